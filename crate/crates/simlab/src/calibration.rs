//! Null law of the sketched statistic for a fixed design and sketch.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sketchf_core::ftest::f_test_projected;
use sketchf_core::models::rng::{stream, substream};
use sketchf_core::models::{build_spectrum, gaussian_matrix, gaussian_vector, sample_entries, EntryDistribution, SpectrumModel};
use sketchf_core::numkit::{f_cdf, ks_statistic};

use crate::config::NullCalibrationConfig;
use crate::error::Result;
use crate::output::{Row, Table, Verdict};
use crate::runner::{replicate, RunContext};
use crate::stats::binomial_stderr;

/// No verdict is issued below this many replications.
pub const MIN_VERDICT_REPS: usize = 100;

/// `1.36/√R + 0.01`: asymptotic 5% Kolmogorov–Smirnov value plus slack.
pub fn ks_threshold(reps: usize) -> f64 {
    1.36 / (reps as f64).sqrt() + 0.01
}

pub fn design_label(d: &EntryDistribution) -> String {
    match d {
        EntryDistribution::Gaussian => "gaussian".into(),
        EntryDistribution::StudentT { df } => format!("student_t({df})"),
        EntryDistribution::LognormalStandardized => "lognormal_standardized".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub design: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub ks: f64,
    pub ks_threshold: f64,
    pub type1: f64,
    pub mc_stderr: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibrationReport {
    pub seed: u64,
    pub alpha: f64,
    pub cells: Vec<CalibrationCell>,
    pub verdicts: Vec<Verdict>,
}

impl NullCalibrationReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new("null_calibration", &["design", "n", "p", "k"], &["ks", "ks_threshold"]);
        for c in &self.cells {
            t.rows.push(Row {
                keys: vec![c.design.clone(), c.n.to_string(), c.p.to_string(), c.k.to_string()],
                rate: c.type1,
                stderr: c.mc_stderr,
                reps: c.reps,
                seed: self.seed,
                extras: vec![c.ks, c.ks_threshold],
            });
        }
        t
    }
}

/// For each design law: draw `X` and `S` once, then `y = z` afresh per
/// replication, and compare the statistics with `F(k, n - k)`.
pub fn run_null_calibration(cfg: &NullCalibrationConfig, ctx: &RunContext) -> Result<NullCalibrationReport> {
    let (n, p, k) = (cfg.n, cfg.p, cfg.k);
    let roots: Option<Vec<f64>> = match &cfg.spectrum {
        Some(kind) => Some(
            build_spectrum(&SpectrumModel::new(kind.clone(), p))?
                .iter()
                .map(|l| l.sqrt())
                .collect(),
        ),
        None => None,
    };
    let sketch = gaussian_matrix(&mut substream(ctx.seed, stream::SKETCH, 0), p, k);
    let reps = ctx.reps;

    let mut cells = Vec::new();
    let mut verdicts = Vec::new();
    for (di, design) in cfg.designs.iter().enumerate() {
        let mut x = sample_entries(&mut substream(ctx.seed, stream::DESIGN, di as u64), n, p, design)?;
        if let Some(r) = &roots {
            for (j, w) in r.iter().enumerate() {
                x.column_mut(j).scale_mut(*w);
            }
        }
        let xs = &x * &sketch;
        let offset = (di * reps) as u64;
        let stats = replicate(reps, ctx.workers, |rep| {
            let z: DVector<f64> = gaussian_vector(&mut substream(ctx.seed, stream::NOISE, offset + rep), n);
            f_test_projected(&xs, &z, ctx.alpha).map(|r| (r.statistic, r.reject))
        })?;
        let stats = stats.into_iter().collect::<sketchf_core::Result<Vec<_>>>()?;
        let values: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let ks = ks_statistic(&values, |v| f_cdf(v, k as f64, (n - k) as f64))?;
        let type1 = stats.iter().filter(|s| s.1).count() as f64 / reps as f64;
        let threshold = ks_threshold(reps);
        let label = design_label(design);
        if reps >= MIN_VERDICT_REPS {
            verdicts.push(Verdict::new(
                format!("ks/{label}"),
                ks < threshold,
                format!("KS {ks:.4} vs {threshold:.4}"),
            ));
        }
        cells.push(CalibrationCell {
            design: label,
            n,
            p,
            k,
            ks,
            ks_threshold: threshold,
            type1,
            mc_stderr: binomial_stderr(type1, reps),
            reps,
        });
    }
    Ok(NullCalibrationReport {
        seed: ctx.seed,
        alpha: ctx.alpha,
        cells,
        verdicts,
    })
}
