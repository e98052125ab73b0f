//! Type I and Type II error rates over decay settings and `(c1, c2)` scalings.
//!
//! Each replication draws a Haar basis `U`, coefficients `β₀`, design
//! entries `Z`, noise `z` and a sketch `S` once; every cell of that
//! replication reuses them, rescaled so that `‖β‖₂ = c1` and `‖Σ‖_F = c2`.
//! Cells therefore share common random numbers, which sharpens comparisons
//! between them without changing any cell's marginal law.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sketchf_core::ftest::f_test_projected;
use sketchf_core::models::rng::{stream, substream};
use sketchf_core::models::{
    build_spectrum, gaussian_matrix, sample_coefficients, sample_entries, sample_orthobasis, SpectrumModel,
};

use crate::config::Table1Config;
use crate::error::Result;
use crate::output::{Row, Table, Verdict};
use crate::runner::{replicate, RunContext};
use crate::stats::binomial_stderr;

/// Type I tolerance around `alpha` for the embedded calibration verdicts.
pub const TYPE1_BAND: f64 = 0.03;
/// Below this many replications no verdicts are issued.
pub const MIN_VERDICT_REPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub case: String,
    pub c1: f64,
    pub c2: f64,
    pub k: usize,
    /// Rejection frequency: Type I when `c1 = 0`, one minus Type II otherwise.
    pub rate: f64,
    pub mc_stderr: f64,
    /// Replications that produced a decision.
    pub reps: usize,
    /// Replications dropped because the sketched design was singular.
    pub skipped: usize,
}

impl Table1Cell {
    pub fn type2(&self) -> f64 {
        1.0 - self.rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateTable {
    pub seed: u64,
    pub alpha: f64,
    pub n: usize,
    pub p: usize,
    pub cells: Vec<Table1Cell>,
    pub verdicts: Vec<Verdict>,
}

impl ErrorRateTable {
    pub fn cell(&self, case: &str, c1: f64, c2: f64) -> Option<&Table1Cell> {
        self.cells.iter().find(|c| c.case == case && c.c1 == c1 && c.c2 == c2)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new("table1", &["case", "c2", "c1", "k"], &["skipped"]);
        for c in &self.cells {
            t.rows.push(Row {
                keys: vec![c.case.clone(), c.c2.to_string(), c.c1.to_string(), c.k.to_string()],
                rate: c.rate,
                stderr: c.mc_stderr,
                reps: c.reps,
                seed: self.seed,
                extras: vec![c.skipped as f64],
            });
        }
        t
    }
}

struct PreparedCase {
    roots: Vec<f64>,
    k: usize,
}

pub fn run_table1(cfg: &Table1Config, ctx: &RunContext) -> Result<ErrorRateTable> {
    let (n, p) = (cfg.n, cfg.p);
    let mut cases = Vec::with_capacity(cfg.cases.len());
    for case in &cfg.cases {
        let lam = build_spectrum(&SpectrumModel::new(case.spectrum.clone(), p))?;
        // Unit Frobenius norm; the c2 scaling is applied to the design.
        let fro = lam.iter().map(|l| l * l).sum::<f64>().sqrt();
        cases.push(PreparedCase {
            roots: lam.iter().map(|l| (l / fro).sqrt()).collect(),
            k: case.k_policy.resolve(n, p)?,
        });
    }
    let samplers = cfg
        .cases
        .iter()
        .map(|c| c.design_entries.sampler())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let kmax = cases.iter().map(|c| c.k).max().unwrap_or(1);
    let (c1s, c2s) = (&cfg.scalings.c1, &cfg.scalings.c2);
    let alpha = ctx.alpha;

    // Per replication: one decision per (case, c2, c1) cell, `None` if skipped.
    let outcomes = replicate(ctx.reps, ctx.workers, |rep| -> Result<Vec<Option<bool>>> {
        let u = sample_orthobasis(&mut substream(ctx.seed, stream::BASIS, rep), p);
        let beta0 = sample_coefficients(&mut substream(ctx.seed, stream::COEF, rep), p, cfg.coefficients);
        let noise = sample_entries(&mut substream(ctx.seed, stream::NOISE, rep), n, 1, &cfg.noise)?;
        let noise = DVector::from_column_slice(noise.as_slice());
        let sketch = gaussian_matrix(&mut substream(ctx.seed, stream::SKETCH, rep), p, kmax);
        let ut_s = u.tr_mul(&sketch);
        let ut_b = u.tr_mul(&beta0);
        let beta_norm = beta0.norm();

        let mut out = Vec::with_capacity(cases.len() * c1s.len() * c2s.len());
        for (case, sampler) in cases.iter().zip(&samplers) {
            let mut rng = substream(ctx.seed, stream::DESIGN, rep);
            let z = DMatrix::from_fn(n, p, |_, _| sampler.sample(&mut rng));
            // Σ^{1/2} S = U Λ^{1/2} UᵀS and Σ^{1/2} β₀ = U Λ^{1/2} Uᵀβ₀.
            let mut half_s = ut_s.columns(0, case.k).into_owned();
            let mut half_b = ut_b.clone();
            for (i, r) in case.roots.iter().enumerate() {
                half_s.row_mut(i).scale_mut(*r);
                half_b[i] *= r;
            }
            // The F statistic is invariant to rescaling XS, so the c2 factor
            // only enters through the signal term.
            let xs = &z * (&u * half_s);
            let xb = &z * (&u * half_b);
            for &c2 in c2s {
                let scale = c2.sqrt();
                for &c1 in c1s {
                    let y = if c1 == 0.0 {
                        noise.clone()
                    } else if beta_norm == 0.0 {
                        out.push(None);
                        continue;
                    } else {
                        &xb * (scale * c1 / beta_norm) + &noise
                    };
                    out.push(match f_test_projected(&xs, &y, alpha) {
                        Ok(r) => Some(r.reject),
                        Err(sketchf_core::Error::SingularSketch(_)) => None,
                        Err(e) => return Err(e.into()),
                    });
                }
            }
        }
        Ok(out)
    })?;
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut idx = 0;
    for (case_cfg, case) in cfg.cases.iter().zip(&cases) {
        for &c2 in c2s {
            for &c1 in c1s {
                let (mut hits, mut used) = (0usize, 0usize);
                for rep in &outcomes {
                    if let Some(r) = rep[idx] {
                        used += 1;
                        hits += r as usize;
                    }
                }
                let rate = if used == 0 { 0.0 } else { hits as f64 / used as f64 };
                cells.push(Table1Cell {
                    case: case_cfg.label.clone(),
                    c1,
                    c2,
                    k: case.k,
                    rate,
                    mc_stderr: binomial_stderr(rate, used),
                    reps: used,
                    skipped: ctx.reps - used,
                });
                idx += 1;
            }
        }
    }

    let mut verdicts = Vec::new();
    for c in cells.iter().filter(|c| c.c1 == 0.0 && c.reps >= MIN_VERDICT_REPS) {
        verdicts.push(Verdict::new(
            format!("type1/{}/c2={}", c.case, c.c2),
            (c.rate - alpha).abs() <= TYPE1_BAND,
            format!("rate {:.4} vs {alpha} ± {TYPE1_BAND}", c.rate),
        ));
    }
    Ok(ErrorRateTable {
        seed: ctx.seed,
        alpha,
        n,
        p,
        cells,
        verdicts,
    })
}
