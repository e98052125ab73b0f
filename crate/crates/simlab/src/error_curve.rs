//! Type II error of the sketched test as `p` grows with `n = ⌊10 ln² p⌋`.
//!
//! The design is drawn in the eigenbasis, `X̃ = Z Λ^{1/2}`, which for a
//! Gaussian `Z` and Haar basis has the same law as `Z Σ^{1/2}` paired with
//! rotated `β` and `S`. Non-Gaussian entries are applied in the eigenbasis
//! as well, i.e. with `Σ` diagonal.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sketchf_core::ftest::f_test_projected;
use sketchf_core::models::rng::{stream, substream};
use sketchf_core::models::{
    build_spectrum, gaussian_matrix, gaussian_vector, sample_entries, SpectrumKind, SpectrumModel,
};
use sketchf_core::power::power_zc;

use crate::config::{log_square_n, ErrorCurveConfig};
use crate::error::Result;
use crate::output::{Row, Table, Verdict};
use crate::runner::{replicate, RunContext};
use crate::stats::binomial_stderr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveCell {
    pub alpha_decay: f64,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub type2: f64,
    pub mc_stderr: f64,
    pub reps: usize,
    pub skipped: usize,
    /// Average asymptotic power of the ZC test over the drawn coefficients.
    pub zc_theoretical_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveReport {
    pub seed: u64,
    pub alpha: f64,
    pub signal: f64,
    pub cells: Vec<ErrorCurveCell>,
    pub verdicts: Vec<Verdict>,
}

impl ErrorCurveReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "error_curve",
            &["alpha_decay", "p", "n", "k"],
            &["skipped", "zc_theoretical_power"],
        );
        for c in &self.cells {
            t.rows.push(Row {
                keys: vec![c.alpha_decay.to_string(), c.p.to_string(), c.n.to_string(), c.k.to_string()],
                rate: c.type2,
                stderr: c.mc_stderr,
                reps: c.reps,
                seed: self.seed,
                extras: vec![c.skipped as f64, c.zc_theoretical_power],
            });
        }
        t
    }
}

struct Group {
    alpha_decay: f64,
    p: usize,
    n: usize,
    k: usize,
    roots: Vec<f64>,
    spectrum: Vec<f64>,
}

pub fn run_error_curve(cfg: &ErrorCurveConfig, ctx: &RunContext) -> Result<ErrorCurveReport> {
    let mut groups = Vec::new();
    for &alpha_decay in &cfg.decays {
        for &p in &cfg.p_grid {
            let n = log_square_n(p);
            let spectrum = build_spectrum(&SpectrumModel::new(SpectrumKind::Polynomial { alpha: alpha_decay }, p))?;
            groups.push(Group {
                alpha_decay,
                p,
                n,
                k: cfg.k_policy.resolve(n, p)?,
                roots: spectrum.iter().map(|l| l.sqrt()).collect(),
                spectrum,
            });
        }
    }
    let design = cfg.design_entries.sampler()?;
    let sigma = cfg.sigma_sq.sqrt();
    let reps = ctx.reps;
    let alpha = ctx.alpha;

    // (decision, ZC power) per replication.
    let draws = replicate(groups.len() * reps, ctx.workers, |task| -> Result<(Option<bool>, f64)> {
        let g = &groups[task as usize / reps];
        let mut beta = gaussian_vector(&mut substream(ctx.seed, stream::COEF, task), g.p);
        let raw: f64 = beta.iter().zip(&g.spectrum).map(|(b, l)| l * b * b).sum();
        beta *= (cfg.signal / raw).sqrt();
        let sigma_beta_sq: f64 = beta.iter().zip(&g.spectrum).map(|(b, l)| (l * b).powi(2)).sum();
        let zc = power_zc(g.n, &g.spectrum, sigma_beta_sq, cfg.sigma_sq, alpha)?;

        let mut rng = substream(ctx.seed, stream::DESIGN, task);
        let z = nalgebra::DMatrix::from_fn(g.n, g.p, |_, _| design.sample(&mut rng));
        let mut half_s = gaussian_matrix(&mut substream(ctx.seed, stream::SKETCH, task), g.p, g.k);
        let mut half_b = beta;
        for (i, r) in g.roots.iter().enumerate() {
            half_s.row_mut(i).scale_mut(*r);
            half_b[i] *= r;
        }
        let noise = sample_entries(&mut substream(ctx.seed, stream::NOISE, task), g.n, 1, &cfg.noise)?;
        let y = &z * half_b + DVector::from_column_slice(noise.as_slice()) * sigma;
        let decision = match f_test_projected(&(&z * half_s), &y, alpha) {
            Ok(r) => Some(r.reject),
            Err(sketchf_core::Error::SingularSketch(_)) => None,
            Err(e) => return Err(e.into()),
        };
        Ok((decision, zc))
    })?;
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let block = &draws[gi * reps..(gi + 1) * reps];
        let decided: Vec<bool> = block.iter().filter_map(|d| d.0).collect();
        let misses = decided.iter().filter(|r| !**r).count();
        let type2 = if decided.is_empty() { 0.0 } else { misses as f64 / decided.len() as f64 };
        cells.push(ErrorCurveCell {
            alpha_decay: g.alpha_decay,
            p: g.p,
            n: g.n,
            k: g.k,
            type2,
            mc_stderr: binomial_stderr(type2, decided.len()),
            reps: decided.len(),
            skipped: reps - decided.len(),
            zc_theoretical_power: block.iter().map(|d| d.1).sum::<f64>() / reps as f64,
        });
    }

    let mut verdicts = Vec::new();
    for &alpha_decay in &cfg.decays {
        let curve: Vec<&ErrorCurveCell> = cells.iter().filter(|c| c.alpha_decay == alpha_decay).collect();
        if cfg.signal == 0.0 {
            for c in &curve {
                let band = 3.0 * binomial_stderr(1.0 - alpha, c.reps.max(1));
                verdicts.push(Verdict::new(
                    format!("null_flat/alpha={alpha_decay}/p={}", c.p),
                    (c.type2 - (1.0 - alpha)).abs() <= band,
                    format!("acceptance rate {:.4} vs {} ± {band:.4}", c.type2, 1.0 - alpha),
                ));
            }
        } else if curve.len() >= 2 {
            let (first, last) = (curve[0], curve[curve.len() - 1]);
            verdicts.push(Verdict::new(
                format!("type2_decreasing/alpha={alpha_decay}"),
                last.type2 <= first.type2,
                format!("type II {:.4} at p={} vs {:.4} at p={}", first.type2, first.p, last.type2, last.p),
            ));
        }
    }
    Ok(ErrorCurveReport {
        seed: ctx.seed,
        alpha,
        signal: cfg.signal,
        cells,
        verdicts,
    })
}
