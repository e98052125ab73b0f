mod common;

use common::{cases, rng};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use sketchf_core::intrinsic::*;
use sketchf_core::models::*;
use sketchf_core::power::delta_k_sq_nested;

fn poly(alpha: f64, p: usize) -> Vec<f64> {
    build_spectrum(&SpectrumModel::new(SpectrumKind::Polynomial { alpha }, p)).unwrap()
}

/// Both conditions summed term by term, without prefix sums.
fn direct(beta: &[f64], lam: &[f64], r: usize) -> (f64, f64, f64) {
    let p = lam.len();
    let head: f64 = beta[..r].iter().map(|b| b * b).sum::<f64>() / r as f64;
    let tail: f64 = beta[r..].iter().map(|b| b * b).sum::<f64>() / (p - r) as f64;
    let mut c1 = 0.0;
    for i in r..p {
        c1 += head * lam[i] + beta[i] * beta[i] * lam[i];
    }
    let c2 = (head + tail) * r as f64 * lam[r];
    let signal: f64 = beta.iter().zip(lam).map(|(b, l)| b * b * l).sum();
    (c1, c2, signal)
}

fn brute_min(beta: &[f64], lam: &[f64], eta: f64) -> Option<usize> {
    (1..lam.len()).find(|&r| {
        let (c1, c2, s) = direct(beta, lam, r);
        c1 <= eta * s && c2 <= eta * s
    })
}

#[test]
fn polynomial_case_direct_summation() {
    let p = 10_000;
    let lam = poly(2.0, p);
    let beta: Vec<f64> = (0..p).map(|i| 1.0 + 0.5 * ((i % 7) as f64 - 3.0) / 3.0).collect();
    let eta = default_eta(p);
    let rep = intrinsic_conditions(&DVector::from_vec(beta.clone()), &lam, 60, eta).unwrap();
    let (c1, c2, s) = direct(&beta, &lam, 60);
    assert!((rep.cond1_lhs - c1).abs() < 1e-10 * c1);
    assert!((rep.cond2_lhs - c2).abs() < 1e-10 * c2);
    assert!((rep.signal - s).abs() < 1e-10 * s);
    assert_eq!(rep.holds, c1 <= eta * s && c2 <= eta * s);
}

#[test]
fn minimum_is_the_first_feasible_r() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let p = r.random_range(10..300usize);
        let lam = poly(r.random_range(1.2..3.0), p);
        let beta: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
        let eta = r.random_range(0.05..0.5);
        let got = min_intrinsic_dim(&DVector::from_vec(beta.clone()), &lam, eta).unwrap();
        assert_eq!(got, brute_min(&beta, &lam, eta), "seed {seed}");
        if let Some(rr) = got {
            let b = DVector::from_vec(beta.clone());
            assert!(intrinsic_conditions(&b, &lam, rr, eta).unwrap().holds);
            if rr > 1 {
                assert!(!intrinsic_conditions(&b, &lam, rr - 1, eta).unwrap().holds);
            }
        }
    }
}

#[test]
fn polynomial_dimension_tracks_log_p() {
    // Flat coefficients and λ_i = i^{-2}: the conditions reduce to roughly
    // 2/r ≤ signal / ln p, so r/ln p should settle near a constant.
    let mut ratios = Vec::new();
    for p in [1_000usize, 10_000, 100_000] {
        let lam = poly(2.0, p);
        let beta = DVector::from_element(p, 1.0);
        let r = min_intrinsic_dim(&beta, &lam, default_eta(p)).unwrap().unwrap();
        assert_eq!(Some(r), brute_min(beta.as_slice(), &lam, default_eta(p)));
        ratios.push(r as f64 / example_rate(RateKind::Polynomial { alpha: 2.0 }, p).unwrap());
    }
    let c = ratios.iter().copied().fold(0.0, f64::max);
    assert!(c < 3.0, "{ratios:?}");
    assert!(ratios.iter().all(|q| *q > c / 2.0), "{ratios:?}");
}

#[test]
fn never_exceeds_the_rank() {
    for s in [1usize, 3, 10] {
        let p = 40;
        let lam: Vec<f64> = (0..p).map(|i| if i < s { 1.0 / (i + 1) as f64 } else { 0.0 }).collect();
        let beta = draw_coefficients(p, CoefficientDist::Gaussian, s as u64).unwrap().beta;
        let r = min_intrinsic_dim(&beta, &lam, 1e-6).unwrap().unwrap();
        assert!(r <= s);
    }
}

#[test]
fn flat_problem_has_no_small_dimension() {
    let p = 200;
    let beta = DVector::from_element(p, 1.0);
    assert_eq!(min_intrinsic_dim(&beta, &vec![1.0; p], 0.1).unwrap(), None);
}

#[test]
fn recommended_sketch_keeps_most_signal() {
    let (p, n) = (2000, 400);
    let lam = poly(2.0, p);
    let beta = DVector::from_element(p, 1.0);
    let signal: f64 = lam.iter().sum();
    let r = min_intrinsic_dim(&beta, &lam, default_eta(p)).unwrap().unwrap();
    let k = recommend_k(n, Some(r));
    let mut total = 0.0;
    let reps = 50;
    for rep in 0..reps {
        let s = draw_sketch(p, 2 * k, 1000 + rep).unwrap();
        let d = delta_k_sq_nested(&beta, &lam, &s.entries, &[k, 2 * k]).unwrap();
        assert!(d[1] >= d[0]);
        total += d[0] / signal;
    }
    let mean = total / reps as f64;
    assert!(mean >= 0.7, "mean retained fraction {mean} at r={r}, k={k}");
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn smaller_eta_never_lowers_dimension(seed in any::<u64>(), e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
        let mut r = rng(seed);
        let p = r.random_range(5..200usize);
        let mut lam: Vec<f64> = (0..p).map(|_| r.random_range(0.0..1.0f64).powi(3)).collect();
        lam.sort_by(|a, b| b.total_cmp(a));
        let beta = DVector::from_fn(p, |_, _| r.random_range(-1.0..1.0));
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let at_lo = min_intrinsic_dim(&beta, &lam, lo).unwrap().unwrap_or(usize::MAX);
        let at_hi = min_intrinsic_dim(&beta, &lam, hi).unwrap().unwrap_or(usize::MAX);
        prop_assert!(at_hi <= at_lo);
    }

    #[test]
    fn recommend_k_bounds(n in 2usize..100_000, r in proptest::option::of(1usize..10_000)) {
        let k = recommend_k(n, r);
        prop_assert!(k >= 1 && k <= n / 2);
        if let Some(r) = r { prop_assert!(k <= 3 * r); }
    }
}
