//! Flat `section.key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Unknown or repeated keys are errors, and every value is range-checked
//! while parsing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bags::{Mnist, SoftBagConfig};
use crate::error::{MilError, Result};
use crate::model::{Aggregator, ModelConfig};
use crate::training::{Protocol, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetConfig {
    /// Soft bags drawn from the raw MNIST IDX files in `mnist_dir`.
    MnistSoft { mnist_dir: PathBuf, bags: SoftBagConfig },
    /// Precomputed feature bags listed by three manifests.
    Features { train: PathBuf, val: PathBuf, test: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub protocol: Protocol,
    /// Seeds `first_seed .. first_seed + seeds`.
    pub seeds: u64,
    pub first_seed: u64,
    /// Head counts compared by `sweep`.
    pub sweep_heads: Vec<usize>,
    /// Bag size used for FLOP counts.
    pub count_instances: usize,
    /// Extra architectures listed by `count`, as `abmil`, `madmil/3`, ...
    pub count_models: Vec<ModelConfig>,
    /// Saved model used by `heatmap`; trained on the spot when absent.
    pub heatmap_model: Option<PathBuf>,
    /// Number of leading test bags exported by `heatmap`.
    pub heatmap_bags: usize,
    pub output_dir: Option<PathBuf>,
}

struct Entries {
    path: PathBuf,
    values: BTreeMap<String, (u64, String)>,
}

impl Entries {
    fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = (i + 1) as u64;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| MilError::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `section.key = value`, found `{content}`")))?;
            let key = key.trim().to_string();
            if !key.contains('.') {
                return Err(err(format!("key `{key}` must be of the form `section.key`")));
            }
            if let Some((first, _)) = values.insert(key.clone(), (line, value.trim().to_string())) {
                return Err(err(format!("key `{key}` repeats line {first}")));
            }
        }
        Ok(Entries {
            path: path.to_path_buf(),
            values,
        })
    }

    fn error(&self, line: u64, message: String) -> MilError {
        MilError::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn raw(&mut self, key: &str) -> Option<(u64, String)> {
        self.values.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|_| self.error(line, format!("`{key}`: cannot parse `{value}`"))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<(u64, Vec<T>)>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, value)) => {
                let items = value
                    .split(',')
                    .map(|item| {
                        item.trim()
                            .parse()
                            .map_err(|_| self.error(line, format!("`{key}`: cannot parse `{}`", item.trim())))
                    })
                    .collect::<Result<Vec<T>>>()?;
                if items.is_empty() {
                    return Err(self.error(line, format!("`{key}` is empty")));
                }
                Ok(Some((line, items)))
            }
        }
    }

    /// Line of `key` for messages about a value already taken.
    fn check(&self, line: u64, ok: bool, message: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error(line, message()))
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| MilError::io(path, e))?;
        Self::parse(path, &text)
    }

    /// Parses `text`; `path` only labels errors and anchors relative paths.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let mut e = Entries::parse(path, text)?;
        let missing = |key: &str| MilError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("required key `{key}` is missing"),
        };

        let kind: String = e.get("dataset.kind")?.ok_or_else(|| missing("dataset.kind"))?;
        let dataset = match kind.as_str() {
            "mnist_soft" => {
                let defaults = SoftBagConfig::default();
                let bags = SoftBagConfig {
                    p_pos: e.get("dataset.p_pos")?.unwrap_or(defaults.p_pos),
                    p_neg: e.get("dataset.p_neg")?.unwrap_or(defaults.p_neg),
                    bag_size: e.get("dataset.bag_size")?.unwrap_or(defaults.bag_size),
                    n_train: e.get("dataset.n_train")?.unwrap_or(defaults.n_train),
                    n_val: e.get("dataset.n_val")?.unwrap_or(defaults.n_val),
                    n_test: e.get("dataset.n_test")?.unwrap_or(defaults.n_test),
                    key_digit: e.get("dataset.key_digit")?.unwrap_or(defaults.key_digit),
                    seed: e.get("dataset.seed")?.unwrap_or(defaults.seed),
                };
                bags.validate()
                    .map_err(|err| MilError::Parse {
                        path: path.to_path_buf(),
                        line: 0,
                        message: err.to_string(),
                    })?;
                let mnist_dir = e.get::<PathBuf>("dataset.mnist_dir")?.map(resolve).unwrap_or_else(|| {
                    let dir = Mnist::default_dir();
                    std::path::absolute(&dir).unwrap_or(dir)
                });
                DatasetConfig::MnistSoft { mnist_dir, bags }
            }
            "features" => {
                let mut manifest = |key: &str| -> Result<PathBuf> {
                    e.get::<PathBuf>(key)?.map(resolve).ok_or_else(|| missing(key))
                };
                DatasetConfig::Features {
                    train: manifest("dataset.train")?,
                    val: manifest("dataset.val")?,
                    test: manifest("dataset.test")?,
                }
            }
            other => {
                return Err(MilError::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!("dataset.kind `{other}` is not `mnist_soft` or `features`"),
                })
            }
        };
        let is_mnist = matches!(dataset, DatasetConfig::MnistSoft { .. });

        let aggregator: Aggregator = match e.raw("model.aggregator") {
            None => return Err(missing("model.aggregator")),
            Some((line, v)) => v.parse().map_err(|err: MilError| e.error(line, err.to_string()))?,
        };
        let input_dim = match e.get("model.input_dim")? {
            Some(d) => d,
            None if is_mnist => 784,
            None => return Err(missing("model.input_dim")),
        };
        let model = ModelConfig {
            input_dim,
            embed_dim: e.get("model.embed_dim")?.ok_or_else(|| missing("model.embed_dim"))?,
            heads: e.get("model.heads")?.unwrap_or(1),
            classes: e.get("model.classes")?.unwrap_or(2),
            aggregator,
            attention_hidden: e.get("model.attention_hidden")?,
        };
        model.validate().map_err(|err| MilError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: err.to_string(),
        })?;

        let base_protocol = if is_mnist { Protocol::mnist() } else { Protocol::features() };
        let mut train = base_protocol.train;
        if let Some(epochs) = e.get("training.epochs")? {
            train.epochs = epochs;
        }
        if let Some(shuffle) = e.get("training.shuffle")? {
            train.shuffle = shuffle;
        }
        let lr_grid = match e.list::<f64>("training.lr")? {
            Some((line, lrs)) => {
                e.check(line, lrs.iter().all(|&v| v >= 0.0 && v.is_finite()), || {
                    "training.lr values must be nonnegative".into()
                })?;
                lrs
            }
            None => base_protocol.lr_grid,
        };
        let wd_grid = match e.list::<f64>("training.wd")? {
            Some((line, wds)) => {
                e.check(line, wds.iter().all(|&v| v >= 0.0 && v.is_finite()), || {
                    "training.wd values must be nonnegative".into()
                })?;
                wds
            }
            None => base_protocol.wd_grid,
        };
        train.learning_rate = lr_grid[0];
        train.weight_decay = wd_grid[0];
        train.validate().map_err(|err| MilError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: err.to_string(),
        })?;
        let seeds = match e.raw("training.seeds") {
            None => 10,
            Some((line, v)) => {
                let n: u64 = v.parse().map_err(|_| e.error(line, format!("`training.seeds`: cannot parse `{v}`")))?;
                e.check(line, n >= 1, || "training.seeds must be at least 1".into())?;
                n
            }
        };
        let first_seed = e.get("training.first_seed")?.unwrap_or(0);

        let sweep_heads = match e.list::<usize>("sweep.heads")? {
            Some((line, heads)) => {
                e.check(line, heads.iter().all(|&m| m >= 1), || "sweep.heads must be positive".into())?;
                heads
            }
            None => vec![model.heads],
        };
        let count_instances = e.get("count.instances")?.unwrap_or(120);
        let count_models = match e.raw("count.models") {
            None => Vec::new(),
            Some((line, v)) => v
                .split(',')
                .map(|spec| parse_model_spec(spec.trim(), &model).map_err(|err| e.error(line, err)))
                .collect::<Result<Vec<_>>>()?,
        };
        let heatmap_model = e.get::<PathBuf>("heatmap.model")?.map(resolve);
        let heatmap_bags = match e.raw("heatmap.bags") {
            None => 1,
            Some((line, v)) => {
                let n: usize = v.parse().map_err(|_| e.error(line, format!("`heatmap.bags`: cannot parse `{v}`")))?;
                e.check(line, n >= 1, || "heatmap.bags must be at least 1".into())?;
                n
            }
        };
        let output_dir = e.get::<PathBuf>("output.dir")?.map(resolve);

        if let Some((key, (line, _))) = e.values.iter().next() {
            return Err(e.error(*line, format!("unknown key `{key}`")));
        }
        Ok(ExperimentConfig {
            dataset,
            model,
            protocol: Protocol {
                train,
                lr_grid,
                wd_grid,
            },
            seeds,
            first_seed,
            sweep_heads,
            count_instances,
            count_models,
            heatmap_model,
            heatmap_bags,
            output_dir,
        })
    }

    /// Canonical dump of every resolved setting, written next to the outputs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        match &self.dataset {
            DatasetConfig::MnistSoft { mnist_dir, bags } => {
                let _ = writeln!(s, "dataset.kind = mnist_soft");
                let _ = writeln!(s, "dataset.mnist_dir = {}", mnist_dir.display());
                let _ = writeln!(s, "dataset.p_pos = {}", bags.p_pos);
                let _ = writeln!(s, "dataset.p_neg = {}", bags.p_neg);
                let _ = writeln!(s, "dataset.bag_size = {}", bags.bag_size);
                let _ = writeln!(s, "dataset.n_train = {}", bags.n_train);
                let _ = writeln!(s, "dataset.n_val = {}", bags.n_val);
                let _ = writeln!(s, "dataset.n_test = {}", bags.n_test);
                let _ = writeln!(s, "dataset.key_digit = {}", bags.key_digit);
                let _ = writeln!(s, "dataset.seed = {}", bags.seed);
            }
            DatasetConfig::Features { train, val, test } => {
                let _ = writeln!(s, "dataset.kind = features");
                let _ = writeln!(s, "dataset.train = {}", train.display());
                let _ = writeln!(s, "dataset.val = {}", val.display());
                let _ = writeln!(s, "dataset.test = {}", test.display());
            }
        }
        let m = &self.model;
        let _ = writeln!(s, "model.aggregator = {}", m.aggregator);
        let _ = writeln!(s, "model.input_dim = {}", m.input_dim);
        let _ = writeln!(s, "model.embed_dim = {}", m.embed_dim);
        let _ = writeln!(s, "model.heads = {}", m.heads);
        let _ = writeln!(s, "model.classes = {}", m.classes);
        if let Some(hidden) = m.attention_hidden {
            let _ = writeln!(s, "model.attention_hidden = {hidden}");
        }
        let t = &self.protocol.train;
        let _ = writeln!(s, "training.epochs = {}", t.epochs);
        let _ = writeln!(s, "training.shuffle = {}", t.shuffle);
        let _ = writeln!(s, "training.lr = {}", list(&self.protocol.lr_grid));
        let _ = writeln!(s, "training.wd = {}", list(&self.protocol.wd_grid));
        let _ = writeln!(s, "training.seeds = {}", self.seeds);
        let _ = writeln!(s, "training.first_seed = {}", self.first_seed);
        let heads: Vec<String> = self.sweep_heads.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(s, "sweep.heads = {}", heads.join(", "));
        let _ = writeln!(s, "count.instances = {}", self.count_instances);
        if !self.count_models.is_empty() {
            let specs: Vec<String> = self.count_models.iter().map(model_spec).collect();
            let _ = writeln!(s, "count.models = {}", specs.join(", "));
        }
        if let Some(p) = &self.heatmap_model {
            let _ = writeln!(s, "heatmap.model = {}", p.display());
        }
        let _ = writeln!(s, "heatmap.bags = {}", self.heatmap_bags);
        if let Some(p) = &self.output_dir {
            let _ = writeln!(s, "output.dir = {}", p.display());
        }
        s
    }

    pub fn train_config(&self) -> TrainConfig {
        self.protocol.train
    }
}

/// `abmil`, `mean_pool`, `max_pool` or `madmil/<M>`, sharing `base` dimensions.
fn parse_model_spec(spec: &str, base: &ModelConfig) -> std::result::Result<ModelConfig, String> {
    let (name, heads) = match spec.split_once('/') {
        Some((name, m)) => (name, m.parse::<usize>().map_err(|_| format!("bad head count in `{spec}`"))?),
        None => (spec, 1),
    };
    let aggregator: Aggregator = name.parse().map_err(|e: MilError| e.to_string())?;
    let model = ModelConfig {
        attention_hidden: None,
        ..base.with_aggregator(aggregator, heads)
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn model_spec(m: &ModelConfig) -> String {
    match m.aggregator {
        Aggregator::Madmil => format!("madmil/{}", m.heads),
        other => other.to_string(),
    }
}
