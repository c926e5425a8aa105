//! Configuration-driven scenarios and their outputs.

pub mod config;
pub mod result;
pub mod scenarios;

pub use config::{Condition, ExperimentConfig};
pub use result::ScenarioResult;
pub use scenarios::{
    run_cat_metrics, run_collapse_revival, run_echo, run_fig2, run_fig3, run_split, run_wigner, Timeline,
};
