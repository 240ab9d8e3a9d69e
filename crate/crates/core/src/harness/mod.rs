//! Data loading, experiment orchestration, model files, configuration and
//! reports.

pub mod config;
pub mod experiment;
pub mod gesture;
pub mod idx;
pub mod mnist;
pub mod persist;

pub use experiment::{
    grid_report, grid_table, mnist_topology, robustness_grid, run_mnist_experiment, run_robustness_comparison, strategy_table, GridRow,
    MnistData, MnistExperimentConfig, MnistRun, Perturbation, RobustnessComparison,
};
pub use idx::{load_idx, LabelledImages, MnistFiles};
pub use mnist::{occlude, pepper_noise, quarter_split, reassemble, QuarteredImage};
