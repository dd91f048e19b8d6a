use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bags::BagSplits;
use crate::error::{MilError, Result};
use crate::metrics::{aggregate, EvalMetrics, MeanStd};
use crate::model::{flops, param_count, Aggregator, ModelConfig};
use crate::training::trainer::{evaluate, train, RunResult, TrainConfig};

/// Learning-rate grid searched on the MNIST bags.
pub const MNIST_LR_GRID: [f64; 3] = [5e-4, 1e-4, 5e-5];
/// Weight-decay grid searched on the MNIST bags.
pub const MNIST_WD_GRID: [f64; 2] = [1e-4, 1e-5];

/// Training settings plus the hyperparameter grid searched for every seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub train: TrainConfig,
    pub lr_grid: Vec<f64>,
    pub wd_grid: Vec<f64>,
}

impl Protocol {
    pub fn mnist() -> Self {
        Protocol {
            train: TrainConfig::default(),
            lr_grid: MNIST_LR_GRID.to_vec(),
            wd_grid: MNIST_WD_GRID.to_vec(),
        }
    }

    /// Fixed learning rate 1e-4 with a weight-decay grid, 50 epochs.
    pub fn features() -> Self {
        Protocol {
            train: TrainConfig {
                epochs: 50,
                ..TrainConfig::default()
            },
            lr_grid: vec![1e-4],
            wd_grid: vec![1e-5, 1e-4, 1e-3],
        }
    }

    /// A single (lr, wd) pair.
    pub fn fixed(train: TrainConfig) -> Self {
        Protocol {
            train,
            lr_grid: vec![train.learning_rate],
            wd_grid: vec![train.weight_decay],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    /// One entry per pair, learning rate outermost, in grid order.
    pub table: Vec<GridRun>,
    pub selected: usize,
    pub run: RunResult,
}

/// Trains every (lr, wd) pair and keeps the one with the lowest best
/// validation loss (first in grid order on ties).
pub fn grid_search(protocol: &Protocol, model: &ModelConfig, data: &BagSplits, seed: u64) -> Result<GridResult> {
    if protocol.lr_grid.is_empty() || protocol.wd_grid.is_empty() {
        return Err(MilError::Config("hyperparameter grids must be nonempty".into()));
    }
    let mut table = Vec::new();
    let mut best: Option<(usize, RunResult)> = None;
    for &lr in &protocol.lr_grid {
        for &wd in &protocol.wd_grid {
            let cfg = protocol.train.with_rates(lr, wd);
            let run = train(&cfg, model, &data.train, &data.val, seed)?;
            table.push(GridRun {
                learning_rate: lr,
                weight_decay: wd,
                best_val_loss: run.best_val_loss,
                best_epoch: run.best_epoch,
            });
            if best.as_ref().is_none_or(|(_, b)| run.best_val_loss < b.best_val_loss) {
                best = Some((table.len() - 1, run));
            }
        }
    }
    let (selected, run) = best.expect("nonempty grid");
    Ok(GridResult { table, selected, run })
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub grid: GridResult,
    pub test: EvalMetrics,
}

impl SeedRun {
    pub fn run(&self) -> &RunResult {
        &self.grid.run
    }
}

#[derive(Clone, Debug)]
pub struct SeedSweep {
    pub model: ModelConfig,
    pub runs: Vec<SeedRun>,
    pub auc: MeanStd,
    pub f1: MeanStd,
    pub accuracy: MeanStd,
    pub val_loss: MeanStd,
}

/// Independent grid-searched runs, one per seed, scored on the test bags and
/// aggregated. Up to `jobs` seeds run in parallel; results keep seed order.
pub fn sweep_seeds(protocol: &Protocol, model: &ModelConfig, data: &BagSplits, seeds: &[u64], jobs: usize) -> Result<SeedSweep> {
    if seeds.is_empty() {
        return Err(MilError::Config("at least one seed is required".into()));
    }
    let one = |seed: u64| -> Result<SeedRun> {
        let grid = grid_search(protocol, model, data, seed)?;
        let test = evaluate(model, &grid.run.best_params, &data.test)?;
        let mut grid = grid;
        grid.run.test_metrics = Some(test);
        Ok(SeedRun { seed, grid, test })
    };
    let runs: Vec<SeedRun> = if jobs <= 1 {
        seeds.iter().copied().map(one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| MilError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| seeds.par_iter().copied().map(one).collect::<Result<_>>())?
    };
    let column = |f: fn(&SeedRun) -> f64| aggregate(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(SeedSweep {
        model: *model,
        auc: column(|r| r.test.auc)?,
        f1: column(|r| r.test.f1)?,
        accuracy: column(|r| r.test.accuracy)?,
        val_loss: column(|r| r.grid.run.best_val_loss)?,
        runs,
    })
}

#[derive(Clone, Debug)]
pub struct HeadRow {
    pub heads: usize,
    pub sweep: SeedSweep,
    pub params: u64,
    pub flops: u64,
}

#[derive(Clone, Debug)]
pub struct HeadSweep {
    pub rows: Vec<HeadRow>,
    /// Index into `rows` of the selected head count.
    pub selected: usize,
}

impl HeadSweep {
    pub fn selected_heads(&self) -> usize {
        self.rows[self.selected].heads
    }
}

/// One MAD-MIL seed sweep per head count; selects the count with the lowest
/// mean best validation loss (smallest `M` on ties). FLOPs are reported for
/// bags of `instances` instances.
pub fn sweep_heads(
    protocol: &Protocol,
    base: &ModelConfig,
    head_counts: &[usize],
    data: &BagSplits,
    seeds: &[u64],
    jobs: usize,
    instances: usize,
) -> Result<HeadSweep> {
    if head_counts.is_empty() {
        return Err(MilError::Config("head list must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(head_counts.len());
    for &heads in head_counts {
        let model = base.with_aggregator(Aggregator::Madmil, heads);
        let model = match base.attention_hidden {
            Some(hidden) => model.with_attention_hidden(hidden),
            None => model,
        };
        let sweep = sweep_seeds(protocol, &model, data, seeds, jobs)?;
        rows.push(HeadRow {
            heads,
            params: param_count(&model),
            flops: flops(&model, instances),
            sweep,
        });
    }
    let mut selected = 0;
    for (i, row) in rows.iter().enumerate() {
        let best = &rows[selected];
        let loss = row.sweep.val_loss.mean;
        if loss < best.sweep.val_loss.mean || (loss == best.sweep.val_loss.mean && row.heads < best.heads) {
            selected = i;
        }
    }
    Ok(HeadSweep { rows, selected })
}
