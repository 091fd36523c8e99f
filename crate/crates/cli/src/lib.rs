//! Configuration-driven front end for the light-induced dipole-dipole
//! pipeline: sweeps, convergence studies, figure data and plot scripts.

pub mod cache;
pub mod config;
pub mod converge;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use config::ExperimentConfig;
pub use pipeline::{run, Stage, StageError};
