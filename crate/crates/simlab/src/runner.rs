//! Deterministic parallel replication.

use rayon::prelude::*;

use crate::config::{Experiment, SimulationConfig};
use crate::error::Result;
use crate::output::ExperimentOutput;
use crate::{calibration, error_curve, stability, table1};

/// Settings shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunContext {
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl RunContext {
    pub fn from_config(cfg: &SimulationConfig) -> Self {
        Self {
            reps: cfg.reps,
            alpha: cfg.alpha,
            seed: cfg.master_seed,
            workers: cfg.workers,
        }
    }
}

/// Evaluates `task(0..count)` and returns the results in index order. The
/// worker count only changes scheduling.
pub fn replicate<T, F>(count: usize, workers: Option<usize>, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let go = || (0..count as u64).into_par_iter().map(&task).collect();
    match workers {
        Some(w) => Ok(rayon::ThreadPoolBuilder::new().num_threads(w).build()?.install(go)),
        None => Ok(go()),
    }
}

/// Validates and runs one experiment.
pub fn run(cfg: &SimulationConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let ctx = RunContext::from_config(cfg);
    Ok(match &cfg.experiment {
        Experiment::Table1(c) => ExperimentOutput::Table1(table1::run_table1(c, &ctx)?),
        Experiment::SignalStability(c) => ExperimentOutput::SignalStability(stability::run_signal_stability(c, &ctx)?),
        Experiment::ErrorCurve(c) => ExperimentOutput::ErrorCurve(error_curve::run_error_curve(c, &ctx)?),
        Experiment::NullCalibration(c) => {
            ExperimentOutput::NullCalibration(calibration::run_null_calibration(c, &ctx)?)
        }
    })
}
