//! Bag construction: IDX parsing, soft-bag MNIST sampling, feature-bag files.

pub mod features;
pub mod idx;
pub mod soft;

use crate::tensor::Tensor;

pub use features::{load_feature_bags, write_feature_bags};
pub use idx::{parse_idx, read_idx, IdxFile, Mnist, MnistSplit};
pub use soft::{image_to_instance, make_soft_bags, BagSplits, SoftBagConfig};

/// One labeled set of instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Bag {
    pub bag_id: String,
    /// `N x input_dim`, one instance per row.
    pub features: Tensor,
    pub label: usize,
    /// Source identifier of every row of `features`.
    pub instance_ids: Vec<String>,
}

impl Bag {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }
}
