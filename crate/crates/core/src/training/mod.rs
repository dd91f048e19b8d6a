//! Adam training with validation-loss model selection, plus seed, grid and
//! head-count sweeps.

pub mod adam;
pub mod sweep;
pub mod trainer;

pub use adam::Adam;
pub use sweep::{grid_search, sweep_heads, sweep_seeds, GridResult, GridRun, HeadRow, HeadSweep, Protocol, SeedRun, SeedSweep};
pub use trainer::{bag_loss, evaluate, predict, train, EpochRecord, RunResult, TrainConfig};
