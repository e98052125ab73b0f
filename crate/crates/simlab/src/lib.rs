//! Batch Monte Carlo experiments for the sketched F-test.
//!
//! Every replication draws from substreams keyed by `(master_seed, stream,
//! replication index)`, and results are reduced in replication order, so the
//! output depends only on the configuration and never on the worker count.

pub mod calibration;
pub mod config;
pub mod error_curve;
pub mod output;
pub mod runner;
pub mod stability;
pub mod table1;

mod error;
mod stats;

pub use config::{Experiment, KPolicy, SimulationConfig};
pub use error::{Error, Result};
pub use output::{emit, ExperimentOutput, Format, Row, Table, Verdict};
pub use runner::run;
