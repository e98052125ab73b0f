//! Retained fraction `Δ_k² / βᵀΣβ` on polynomial spectra.
//!
//! Works in the eigenbasis: with a Haar basis and a Gaussian sketch,
//! `Uᵀβ` is a uniformly random direction and `UᵀS` is again Gaussian and
//! independent of it, so drawing `β̃ = g/‖g‖` and `S̃` directly gives the
//! same law without a `p×p` rotation.

use serde::{Deserialize, Serialize};
use sketchf_core::models::rng::{stream, substream};
use sketchf_core::models::{build_spectrum, gaussian_matrix, gaussian_vector, SpectrumKind, SpectrumModel};
use sketchf_core::intrinsic::example_k_formula;
use sketchf_core::power::delta_k_sq_nested;

use crate::config::{log_square_n, StabilityConfig};
use crate::error::Result;
use crate::output::{Row, Table, Verdict};
use crate::runner::{replicate, RunContext};
use crate::stats::{mean_and_stderr, quantile_sorted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub alpha_decay: f64,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    /// Number of doublings applied to the base `k`.
    pub level: u32,
    pub mean: f64,
    pub stderr: f64,
    pub q025: f64,
    pub q975: f64,
    pub min: f64,
    pub max: f64,
    pub reps: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub seed: u64,
    pub cells: Vec<StabilityCell>,
    pub verdicts: Vec<Verdict>,
}

impl StabilityReport {
    pub fn cell(&self, alpha_decay: f64, p: usize, level: u32) -> Option<&StabilityCell> {
        self.cells
            .iter()
            .find(|c| c.alpha_decay == alpha_decay && c.p == p && c.level == level)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "signal_stability",
            &["alpha_decay", "p", "n", "k", "level"],
            &["q025", "q975", "min", "max", "skipped"],
        );
        for c in &self.cells {
            t.rows.push(Row {
                keys: vec![
                    c.alpha_decay.to_string(),
                    c.p.to_string(),
                    c.n.to_string(),
                    c.k.to_string(),
                    c.level.to_string(),
                ],
                rate: c.mean,
                stderr: c.stderr,
                reps: c.reps,
                seed: self.seed,
                extras: vec![c.q025, c.q975, c.min, c.max, c.skipped as f64],
            });
        }
        t
    }
}

struct Group {
    alpha_decay: f64,
    p: usize,
    n: usize,
    ks: Vec<usize>,
    spectrum: Vec<f64>,
}

pub fn run_signal_stability(cfg: &StabilityConfig, ctx: &RunContext) -> Result<StabilityReport> {
    let mut groups = Vec::new();
    for &alpha_decay in &cfg.decays {
        for &p in &cfg.p_grid {
            let n = log_square_n(p);
            let k0 = example_k_formula(p, n, alpha_decay)?;
            let mut ks: Vec<usize> = (0..=cfg.doublings).map(|j| (k0 << j).min(p)).collect();
            ks.dedup();
            let spectrum = build_spectrum(&SpectrumModel::new(SpectrumKind::Polynomial { alpha: alpha_decay }, p))?;
            groups.push(Group {
                alpha_decay,
                p,
                n,
                ks,
                spectrum,
            });
        }
    }

    let reps = ctx.reps;
    let ratios = replicate(groups.len() * reps, ctx.workers, |task| -> Result<Option<Vec<f64>>> {
        let g = &groups[task as usize / reps];
        let kmax = *g.ks.last().unwrap();
        let mut beta = gaussian_vector(&mut substream(ctx.seed, stream::COEF, task), g.p);
        let signal: f64 = beta.iter().zip(&g.spectrum).map(|(b, l)| l * b * b).sum();
        beta /= signal.sqrt();
        let s = gaussian_matrix(&mut substream(ctx.seed, stream::SKETCH, task), g.p, kmax);
        match delta_k_sq_nested(&beta, &g.spectrum, &s, &g.ks) {
            // βᵀΣβ = 1 after the rescaling, so Δ² is already the ratio.
            Ok(d) => Ok(Some(d)),
            Err(sketchf_core::Error::SingularSketch(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    })?;
    let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut verdicts = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let block = &ratios[gi * reps..(gi + 1) * reps];
        let kept: Vec<&Vec<f64>> = block.iter().flatten().collect();
        let mut means = Vec::new();
        for (level, &k) in g.ks.iter().enumerate() {
            let mut xs: Vec<f64> = kept.iter().map(|d| d[level]).collect();
            let (mean, stderr) = mean_and_stderr(&xs);
            xs.sort_by(f64::total_cmp);
            means.push(mean);
            cells.push(StabilityCell {
                alpha_decay: g.alpha_decay,
                p: g.p,
                n: g.n,
                k,
                level: level as u32,
                mean,
                stderr,
                q025: quantile_sorted(&xs, 0.025),
                q975: quantile_sorted(&xs, 0.975),
                min: xs.first().copied().unwrap_or(0.0),
                max: xs.last().copied().unwrap_or(0.0),
                reps: xs.len(),
                skipped: reps - xs.len(),
            });
        }
        let in_range = kept.iter().all(|d| d.iter().all(|r| (0.0..=1.0 + 1e-12).contains(r)));
        verdicts.push(Verdict::new(
            format!("ratio_in_unit_interval/alpha={}/p={}", g.alpha_decay, g.p),
            in_range,
            "every Δ²/βᵀΣβ in [0, 1]",
        ));
        verdicts.push(Verdict::new(
            format!("nested_mean_monotone/alpha={}/p={}", g.alpha_decay, g.p),
            means.windows(2).all(|w| w[1] >= w[0]),
            format!("means {means:?} along k = {:?}", g.ks),
        ));
    }
    Ok(StabilityReport {
        seed: ctx.seed,
        cells,
        verdicts,
    })
}
