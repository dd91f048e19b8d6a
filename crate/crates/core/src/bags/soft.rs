//! Soft-bag MNIST: positive and negative bags differ only in how many key
//! digits they contain, so negative bags may hold key instances too.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bags::idx::{Mnist, MnistSplit};
use crate::bags::Bag;
use crate::error::{MilError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftBagConfig {
    /// Fraction of key instances in a positive bag.
    pub p_pos: f64,
    /// Fraction of key instances in a negative bag.
    pub p_neg: f64,
    pub bag_size: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub key_digit: u8,
    pub seed: u64,
}

impl Default for SoftBagConfig {
    fn default() -> Self {
        SoftBagConfig {
            p_pos: 0.4,
            p_neg: 0.2,
            bag_size: 20,
            n_train: 50,
            n_val: 100,
            n_test: 900,
            key_digit: 8,
            seed: 0,
        }
    }
}

impl SoftBagConfig {
    pub fn with_fractions(p_pos: f64, p_neg: f64) -> Self {
        SoftBagConfig {
            p_pos,
            p_neg,
            ..SoftBagConfig::default()
        }
    }

    /// Exact key-instance counts `(positive, negative)` per bag.
    pub fn key_counts(&self) -> (usize, usize) {
        let count = |p: f64| (p * self.bag_size as f64).round() as usize;
        (count(self.p_pos), count(self.p_neg))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MilError::Config(msg));
        for (name, p) in [("p_pos", self.p_pos), ("p_neg", self.p_neg)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if self.bag_size == 0 {
            return bad("bag_size must be positive".into());
        }
        if self.key_digit > 9 {
            return bad(format!("key_digit {} is not a digit", self.key_digit));
        }
        let (pos, neg) = self.key_counts();
        if self.p_pos <= self.p_neg || pos <= neg {
            return bad(format!(
                "positive and negative bags are indistinguishable: p_pos = {} gives {pos} keys, p_neg = {} gives {neg}",
                self.p_pos, self.p_neg
            ));
        }
        Ok(())
    }
}

/// Row-major flatten scaled to `[0, 1]`.
pub fn image_to_instance(pixels: &[u8]) -> Tensor {
    let values: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Tensor::row_vector(&values)
}

#[derive(Clone, Debug, Default)]
pub struct BagSplits {
    pub train: Vec<Bag>,
    pub val: Vec<Bag>,
    pub test: Vec<Bag>,
}

struct Pools<'a> {
    name: &'static str,
    split: &'a MnistSplit,
    keys: Vec<usize>,
    others: Vec<usize>,
}

impl<'a> Pools<'a> {
    fn new(name: &'static str, split: &'a MnistSplit, key_digit: u8) -> Self {
        let (keys, others) = (0..split.len()).partition(|&i| split.labels[i] == key_digit);
        Pools {
            name,
            split,
            keys,
            others,
        }
    }

    fn check(&self, keys_needed: usize, others_needed: usize) -> Result<()> {
        if self.keys.len() < keys_needed {
            return Err(MilError::InsufficientPool {
                pool: format!("{} key-digit", self.name),
                needed: keys_needed,
                available: self.keys.len(),
            });
        }
        if self.others.len() < others_needed {
            return Err(MilError::InsufficientPool {
                pool: format!("{} non-key", self.name),
                needed: others_needed,
                available: self.others.len(),
            });
        }
        Ok(())
    }
}

/// Draws balanced train/val/test bag sets; train and val come from the MNIST
/// training images, test from the MNIST test images.
pub fn make_soft_bags(config: &SoftBagConfig, mnist: &Mnist) -> Result<BagSplits> {
    config.validate()?;
    let (pos_keys, neg_keys) = config.key_counts();
    let train_pool = Pools::new("train", &mnist.train, config.key_digit);
    let test_pool = Pools::new("test", &mnist.test, config.key_digit);
    for pool in [&train_pool, &test_pool] {
        pool.check(pos_keys, config.bag_size - neg_keys)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |prefix: &str, count: usize, pool: &Pools| -> Vec<Bag> {
        let positives = count.div_ceil(2);
        let mut labels: Vec<usize> = (0..count).map(|i| usize::from(i < positives)).collect();
        labels.shuffle(&mut rng);
        labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                let keys = if label == 1 { pos_keys } else { neg_keys };
                let mut members: Vec<usize> = index::sample(&mut rng, pool.keys.len(), keys)
                    .into_iter()
                    .map(|k| pool.keys[k])
                    .collect();
                members.extend(
                    index::sample(&mut rng, pool.others.len(), config.bag_size - keys)
                        .into_iter()
                        .map(|k| pool.others[k]),
                );
                members.shuffle(&mut rng);
                build_bag(format!("{prefix}-{i:04}"), label, pool, &members)
            })
            .collect()
    };
    let train = draw("train", config.n_train, &train_pool);
    let val = draw("val", config.n_val, &train_pool);
    let test = draw("test", config.n_test, &test_pool);
    Ok(BagSplits { train, val, test })
}

fn build_bag(bag_id: String, label: usize, pool: &Pools, members: &[usize]) -> Bag {
    let size = pool.split.image_size();
    let mut data = Vec::with_capacity(members.len() * size);
    for &m in members {
        data.extend(pool.split.image(m).iter().map(|&p| p as f64 / 255.0));
    }
    Bag {
        bag_id,
        features: Tensor::new(members.len(), size, data).expect("bag dimensions"),
        label,
        instance_ids: members.iter().map(|m| format!("{}:{m}", pool.name)).collect(),
    }
}

/// Source split and index of an MNIST instance id such as `test:123`.
pub fn parse_instance_id(id: &str) -> Option<(&str, usize)> {
    let (split, index) = id.split_once(':')?;
    Some((split, index.parse().ok()?))
}
