//! Configuration, scenario orchestration, persistence and the verdict suite.

mod config;
mod plot;
mod record;
mod run;

pub use config::*;
pub use plot::{plot_data, PlotSeries};
pub use record::*;
pub use run::{run, run_scenario, RunOptions, RunOutput, Timing};
