//! Experiment harness for the toponav stack: scenario files, open- and
//! closed-loop runs for each localization method, ablation sweeps, metrics
//! tables and plots.

pub mod ablation;
pub mod error;
pub mod plot;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::{Error, Result};
pub use scenario::{Goal, Method, Scenario};
