//! Reproducible experiments driven by a config file, writing CSV artifacts.
//!
//! Every command writes a canonical copy of its parsed configuration to
//! `config.txt` in the output directory next to its results.

pub mod config;
mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bags::{load_feature_bags, make_soft_bags, write_feature_bags, BagSplits, Mnist};
use crate::error::{MilError, Result};
use crate::model::{flops, format_millions, format_thousands, infer, param_count, reference_figure, ModelConfig, ModelParams};
use crate::training::{grid_search, sweep_heads, sweep_seeds};

pub use config::{DatasetConfig, ExperimentConfig};
pub use output::{write_pgm, CsvTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Train,
    Count,
    Sweep,
    Heatmap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Count => "count",
            Command::Sweep => "sweep",
            Command::Heatmap => "heatmap",
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Output directory; falls back to `output.dir`, then `runs/<command>`.
    pub out: Option<PathBuf>,
    /// Seeds trained in parallel.
    pub jobs: usize,
    /// Replaces `training.first_seed`.
    pub seed: Option<u64>,
}

/// A trained model as stored by `train` and read by `heatmap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub model: ModelConfig,
    pub params: ModelParams,
}

impl SavedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| MilError::Config(format!("cannot encode model: {e}")))?;
        fs::write(path, text).map_err(|e| MilError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| MilError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| MilError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: format!("invalid saved model: {e}"),
        })
    }
}

/// Runs `command` and returns the text report printed by the binary.
pub fn run(command: Command, config: &ExperimentConfig, options: &RunOptions) -> Result<String> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.first_seed = seed;
    }
    let out = options
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(command.name()));
    fs::create_dir_all(&out).map_err(|e| MilError::io(&out, e))?;
    let config_copy = out.join("config.txt");
    fs::write(&config_copy, config.to_text()).map_err(|e| MilError::io(&config_copy, e))?;
    let jobs = options.jobs.max(1);
    match command {
        Command::Generate => generate(&config, &out),
        Command::Train => train(&config, &out, jobs),
        Command::Count => count(&config, &out),
        Command::Sweep => sweep(&config, &out, jobs),
        Command::Heatmap => heatmap(&config, &out),
    }
}

fn seeds(config: &ExperimentConfig) -> Vec<u64> {
    (config.first_seed..config.first_seed + config.seeds).collect()
}

/// Bag splits plus, for soft MNIST bags, the images they were drawn from.
pub fn load_data(config: &ExperimentConfig) -> Result<(BagSplits, Option<Mnist>)> {
    match &config.dataset {
        DatasetConfig::MnistSoft { mnist_dir, bags } => {
            let mnist = Mnist::load(mnist_dir)?;
            let splits = make_soft_bags(bags, &mnist)?;
            Ok((splits, Some(mnist)))
        }
        DatasetConfig::Features { train, val, test } => {
            let splits = BagSplits {
                train: load_feature_bags(train)?,
                val: load_feature_bags(val)?,
                test: load_feature_bags(test)?,
            };
            for bag in splits.train.iter().chain(&splits.val).chain(&splits.test) {
                if bag.input_dim() != config.model.input_dim {
                    return Err(MilError::Config(format!(
                        "bag {} has {} features but model.input_dim is {}",
                        bag.bag_id,
                        bag.input_dim(),
                        config.model.input_dim
                    )));
                }
                if bag.label >= config.model.classes {
                    return Err(MilError::LabelOutOfRange {
                        label: bag.label,
                        classes: config.model.classes,
                    });
                }
            }
            Ok((splits, None))
        }
    }
}

fn generate(config: &ExperimentConfig, out: &Path) -> Result<String> {
    let (splits, _) = load_data(config)?;
    let dir = out.join("bags");
    for (name, bags) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        write_feature_bags(&dir, name, bags)?;
    }
    Ok(format!(
        "wrote {} train, {} val and {} test bags to {}\n",
        splits.train.len(),
        splits.val.len(),
        splits.test.len(),
        dir.display()
    ))
}

fn train(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<String> {
    let (data, _) = load_data(config)?;
    let result = sweep_seeds(&config.protocol, &config.model, &data, &seeds(config), jobs)?;

    let mut history = CsvTable::new(&["seed", "epoch", "train_loss", "val_loss"]);
    let mut results = CsvTable::new(&["seed", "auc", "f1", "accuracy", "best_epoch"]);
    let mut grid = CsvTable::new(&["seed", "learning_rate", "weight_decay", "best_val_loss", "best_epoch", "selected"]);
    let models = out.join("models");
    fs::create_dir_all(&models).map_err(|e| MilError::io(&models, e))?;
    for run in &result.runs {
        for h in &run.run().history {
            history.row([run.seed.to_string(), h.epoch.to_string(), h.train_loss.to_string(), h.val_loss.to_string()]);
        }
        results.row([
            run.seed.to_string(),
            run.test.auc.to_string(),
            run.test.f1.to_string(),
            run.test.accuracy.to_string(),
            run.run().best_epoch.to_string(),
        ]);
        for (i, g) in run.grid.table.iter().enumerate() {
            grid.row([
                run.seed.to_string(),
                g.learning_rate.to_string(),
                g.weight_decay.to_string(),
                g.best_val_loss.to_string(),
                g.best_epoch.to_string(),
                (i == run.grid.selected).to_string(),
            ]);
        }
        SavedModel {
            model: config.model,
            params: run.run().best_params.clone(),
        }
        .save(&models.join(format!("seed-{}.json", run.seed)))?;
    }
    let mut summary = CsvTable::new(&["metric", "mean", "std"]);
    for (name, stat) in [("auc", result.auc), ("f1", result.f1), ("accuracy", result.accuracy)] {
        summary.row([name.to_string(), stat.mean.to_string(), stat.std.to_string()]);
    }
    history.write(&out.join("history.csv"))?;
    results.write(&out.join("results.csv"))?;
    grid.write(&out.join("grid.csv"))?;
    summary.write(&out.join("summary.csv"))?;

    let mut report = format!("{} over {} seeds\n", config.model.label(), result.runs.len());
    let _ = writeln!(report, "  AUC      {}", result.auc);
    let _ = writeln!(report, "  F1       {}", result.f1);
    let _ = writeln!(report, "  accuracy {}", result.accuracy);
    let _ = writeln!(report, "results in {}", out.display());
    Ok(report)
}

fn count(config: &ExperimentConfig, out: &Path) -> Result<String> {
    let n = config.count_instances;
    let mut models = vec![config.model];
    models.extend(config.count_models.iter().copied().filter(|m| *m != config.model));
    let mut table = CsvTable::new(&[
        "model",
        "input_dim",
        "embed_dim",
        "heads",
        "classes",
        "instances",
        "params",
        "params_k",
        "flops",
        "flops_m",
        "published_k",
        "published_m",
        "note",
    ]);
    let mut report = format!("{:<12} {:>10} {:>9} {:>13} {:>8}  note\n", "model", "params", "", "FLOPs", "");
    for m in &models {
        let params = param_count(m);
        let ops = flops(m, n);
        let (k, mm) = (format_thousands(params), format_millions(ops));
        let reference = if n == 120 { reference_figure(m) } else { None };
        let mut notes = Vec::new();
        if let Some(r) = reference {
            let published_k = format!("{:.1} K", r.size_k);
            if published_k != k {
                let gap = (params as f64 / 1e3 - r.size_k).abs() / r.size_k * 100.0;
                notes.push(format!("size differs from published {published_k} by {gap:.3}%"));
            }
            let published_m = format!("{:.1} M", r.flops_m);
            if published_m != mm {
                let gap = (ops as f64 / 1e6 - r.flops_m).abs() / r.flops_m * 100.0;
                notes.push(format!("FLOPs differ from published {published_m} by {gap:.3}%"));
            }
        }
        let note = notes.join("; ");
        table.row([
            m.label(),
            m.input_dim.to_string(),
            m.embed_dim.to_string(),
            m.head_count().to_string(),
            m.classes.to_string(),
            n.to_string(),
            params.to_string(),
            k.clone(),
            ops.to_string(),
            mm.clone(),
            reference.map_or(String::new(), |r| format!("{:.1} K", r.size_k)),
            reference.map_or(String::new(), |r| format!("{:.1} M", r.flops_m)),
            note.clone(),
        ]);
        let _ = writeln!(report, "{:<12} {:>10} {:>9} {:>13} {:>8}  {}", m.label(), params, k, ops, mm, note);
    }
    table.write(&out.join("accounting.csv"))?;
    Ok(report)
}

fn sweep(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<String> {
    let (data, _) = load_data(config)?;
    let result = sweep_heads(
        &config.protocol,
        &config.model,
        &config.sweep_heads,
        &data,
        &seeds(config),
        jobs,
        config.count_instances,
    )?;
    let mut table = CsvTable::new(&["M", "mean_val_loss", "mean_auc", "mean_f1", "params", "flops"]);
    let mut report = String::new();
    for row in &result.rows {
        table.row([
            row.heads.to_string(),
            row.sweep.val_loss.mean.to_string(),
            row.sweep.auc.mean.to_string(),
            row.sweep.f1.mean.to_string(),
            row.params.to_string(),
            row.flops.to_string(),
        ]);
        let _ = writeln!(
            report,
            "M = {:<3} val loss {:.4}  AUC {}  F1 {}  params {}",
            row.heads, row.sweep.val_loss.mean, row.sweep.auc, row.sweep.f1, row.params
        );
    }
    table.write(&out.join("sweep.csv"))?;
    let _ = writeln!(report, "selected M = {}", result.selected_heads());
    Ok(report)
}

fn heatmap(config: &ExperimentConfig, out: &Path) -> Result<String> {
    let loaded = config.heatmap_model.as_deref().map(SavedModel::load).transpose()?;
    let model = loaded.as_ref().map_or(config.model, |s| s.model);
    if !model.aggregator.is_attention() {
        return Err(MilError::NoAttention(format!("{} pools without attention", model.label())));
    }
    let (data, mnist) = load_data(config)?;
    let saved = match loaded {
        Some(saved) => saved,
        None => SavedModel {
            model,
            params: grid_search(&config.protocol, &model, &data, config.first_seed)?.run.best_params,
        },
    };
    let mut table = CsvTable::new(&["bag_id", "instance_id", "head", "weight"]);
    let mut images = 0;
    for bag in data.test.iter().take(config.heatmap_bags) {
        let inference = infer(&saved.model, &saved.params, &bag.features)?;
        for (h, weights) in inference.attention.iter().enumerate() {
            for (instance, w) in bag.instance_ids.iter().zip(weights.data()) {
                table.row([bag.bag_id.clone(), instance.clone(), h.to_string(), w.to_string()]);
            }
            if let Some(mnist) = &mnist {
                let path = out.join(format!("heatmap-{}-head{h}.pgm", bag.bag_id));
                output::write_attention_montage(&path, mnist, &bag.instance_ids, weights.data())?;
                images += 1;
            }
        }
    }
    table.write(&out.join("attention.csv"))?;
    Ok(format!(
        "{}: exported {} head(s) for {} bag(s), {} montage(s), to {}\n",
        saved.model.label(),
        saved.model.head_count(),
        config.heatmap_bags.min(data.test.len()),
        images,
        out.display()
    ))
}
