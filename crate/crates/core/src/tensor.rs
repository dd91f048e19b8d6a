//! Dense row-major 2-D matrices of `f64`.
//!
//! Everything in the crate is expressed with this one type: instance
//! features, embeddings, attention scores, logits, and parameters. The
//! kernels here are plain loops; the matrix products skip zero entries of
//! the left operand, which matters for raw MNIST pixels where most of the
//! 784 inputs are zero.

use serde::{Deserialize, Serialize};

use crate::error::{MilError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MilError::Shape {
                op: "tensor",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix from row vectors; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Ok(Tensor::zeros(0, 0));
        };
        let cols = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(MilError::Shape {
                    op: "from_rows",
                    left: (1, cols),
                    right: (1, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Tensor {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.shape(), (1, 1));
        self.data[0]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.expect_same_shape(other, op)?;
        Ok(Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn expect_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(MilError::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// `self += other`, shapes must agree.
    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Tensor {
        const BLOCK: usize = 32;
        let (r, c) = (self.rows, self.cols);
        let mut out = vec![0.0; r * c];
        for i0 in (0..r).step_by(BLOCK) {
            for j0 in (0..c).step_by(BLOCK) {
                for i in i0..(i0 + BLOCK).min(r) {
                    for j in j0..(j0 + BLOCK).min(c) {
                        out[j * r + i] = self.data[i * c + j];
                    }
                }
            }
        }
        Tensor {
            rows: c,
            cols: r,
            data: out,
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(MilError::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (r, k, c) = (self.rows, self.cols, other.cols);
        let data = gemm((r, k, c), (&self.data, k, 1), (&other.data, c, 1));
        Ok(Tensor { rows: r, cols: c, data })
    }

    /// `self · otherᵀ`, the shape of an affine layer with weights stored `out x in`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(MilError::Shape {
                op: "matmul_nt",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (r, k, c) = (self.rows, self.cols, other.rows);
        let data = gemm((r, k, c), (&self.data, k, 1), (&other.data, 1, k));
        Ok(Tensor { rows: r, cols: c, data })
    }

    /// `selfᵀ · other`.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(MilError::Shape {
                op: "matmul_tn",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, k, c) = (self.rows, self.cols, other.cols);
        let data = gemm((k, n, c), (&self.data, 1, k), (&other.data, c, 1));
        Ok(Tensor { rows: k, cols: c, data })
    }

    /// Columns `[start, start + len)` as a new tensor.
    pub fn slice_columns(&self, start: usize, len: usize) -> Result<Tensor> {
        if start + len > self.cols {
            return Err(MilError::Shape {
                op: "slice_columns",
                left: self.shape(),
                right: (start, len),
            });
        }
        let mut data = Vec::with_capacity(self.rows * len);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..start + len]);
        }
        Ok(Tensor {
            rows: self.rows,
            cols: len,
            data,
        })
    }

    /// Rows in the given order (used for permutation tests and bag shuffles).
    pub fn select_rows(&self, order: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(order.len() * self.cols);
        for &r in order {
            data.extend_from_slice(self.row(r));
        }
        Tensor {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense `m x k` by `k x n` product; operands given as (data, row stride, column stride).
fn gemm((m, k, n): (usize, usize, usize), a: (&[f64], usize, usize), b: (&[f64], usize, usize)) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if m == 0 || k == 0 || n == 0 {
        return out;
    }
    assert!(a.0.len() >= m * k && b.0.len() >= k * n);
    // SAFETY: the strides address exactly the m x k and k x n elements of the
    // checked slices, and `out` holds m x n row-major elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
