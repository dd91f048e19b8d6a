//! Central finite differences, used as the independent oracle for backward.

use crate::tensor::Tensor;

/// `(f(x + h·e) - f(x - h·e)) / 2h` for every entry of `x`.
pub fn finite_difference_gradient<F>(mut f: F, x: &Tensor, step: f64) -> Tensor
where
    F: FnMut(&Tensor) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    out
}

/// Worst entrywise mismatch between an analytic and a numeric gradient.
///
/// Entries where both magnitudes are below `abs_floor` are compared
/// absolutely; everything else relatively.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientMismatch {
    pub max_relative: f64,
    pub max_absolute_near_zero: f64,
}

impl GradientMismatch {
    pub fn within(&self, rel_tol: f64, abs_tol: f64) -> bool {
        self.max_relative < rel_tol && self.max_absolute_near_zero < abs_tol
    }
}

pub fn compare_gradients(analytic: &Tensor, numeric: &Tensor, abs_floor: f64) -> GradientMismatch {
    assert_eq!(analytic.shape(), numeric.shape());
    let mut max_relative = 0.0f64;
    let mut max_abs = 0.0f64;
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        let diff = (a - n).abs();
        let scale = a.abs().max(n.abs());
        if scale < abs_floor {
            max_abs = max_abs.max(diff);
        } else {
            max_relative = max_relative.max(diff / scale);
        }
    }
    GradientMismatch {
        max_relative,
        max_absolute_near_zero: max_abs,
    }
}
