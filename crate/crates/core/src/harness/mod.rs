//! Experiment configuration, setup generation, Monte Carlo execution and
//! result files.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod seed;

pub use config::{ExperimentConfig, PerturbationConfig, PolytopeConfig, SetupConfig, SetupSource};
pub use output::{aggregate, mean_stderr, write_results, AggregateRow};
pub use presets::{load_preset, RandomRecipe, SetupRecipe, PRESET_NAMES};
pub use run::{
    checkpoint_schedule, realize, run_experiment, run_single, Checkpoint, ExperimentResult,
    Realization, RunSettings, RunTrace,
};
pub use seed::child_seed;
