mod common;

use common::{cases, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use sketchf_core::models::*;
use sketchf_core::oracles::*;
use sketchf_core::power::delta_k_sq;
use sketchf_core::Error;

struct Instance {
    beta: DVector<f64>,
    cov: CovFactor,
    s: SketchMatrix,
    r: usize,
}

fn instance(seed: u64, p: usize, r: usize, k: usize) -> Instance {
    let mut g = rng(seed);
    let spec = build_spectrum(&SpectrumModel::new(SpectrumKind::Polynomial { alpha: g.random_range(1.1..2.5) }, p)).unwrap();
    Instance {
        beta: draw_coefficients(p, CoefficientDist::Gaussian, seed ^ 11).unwrap().beta,
        cov: random_cov(spec, seed ^ 12).unwrap(),
        s: draw_sketch(p, k, seed ^ 13).unwrap(),
        r,
    }
}

fn random_instance(seed: u64, max_p: usize, max_r: usize) -> Instance {
    let mut g = rng(seed);
    let r = g.random_range(1..=max_r);
    let p = g.random_range(3 * r..=max_p.max(3 * r));
    instance(seed, p, r, 2 * r)
}

fn split_basis(cov: &CovFactor, r: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let u = cov.basis_matrix();
    let p = cov.p();
    let ur = u.columns(0, r).into_owned();
    let ut = u.columns(r, p - r).into_owned();
    let lt = DMatrix::from_diagonal(&DVector::from_column_slice(&cov.spectrum()[r..]));
    let sigma_tail = &ut * lt * ut.transpose();
    (ur, ut, sigma_tail)
}

fn objective(inst: &Instance, xi: &DVector<f64>) -> f64 {
    let (_, _, st) = split_basis(&inst.cov, inst.r);
    let d = &inst.beta - &inst.s.entries * xi;
    (d.transpose() * st * d)[(0, 0)]
}

/// Closed-form stationary point of the Lagrangian, with explicit inverses.
fn lagrange_xi(inst: &Instance) -> DVector<f64> {
    let (ur, _, st) = split_basis(&inst.cov, inst.r);
    let s = &inst.s.entries;
    let g_inv = (s.transpose() * &st * s).try_inverse().unwrap();
    let h = s * &g_inv * s.transpose();
    let m = (ur.transpose() * &h * &ur).try_inverse().unwrap();
    let lambda = 2.0 * m * (ur.transpose() * &h * &st * &inst.beta - ur.transpose() * &inst.beta);
    g_inv * (s.transpose() * &st * &inst.beta - 0.5 * s.transpose() * &ur * lambda)
}

#[test]
fn matches_lagrange_closed_form() {
    for seed in 0..30 {
        let inst = random_instance(seed, 30, 5);
        let xi = xi_star(&inst.beta, &inst.cov, inst.r, &inst.s).unwrap();
        let want = lagrange_xi(&inst);
        assert!((&xi - &want).norm() <= 1e-7 * want.norm().max(1.0), "seed {seed}");
    }
}

#[test]
fn exact_representation_at_rank_r() {
    let (p, r) = (15, 4);
    let spec = vec![3.0, 2.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let cov = random_cov(spec, 2).unwrap();
    let beta = draw_coefficients(p, CoefficientDist::Gaussian, 3).unwrap().beta;
    let s = draw_sketch(p, r, 4).unwrap();
    let split = SplitSketch::new(&beta, &cov, r, &s).unwrap();
    let xi = xi_star_split(&split).unwrap();
    assert_eq!(split.residual(&xi), 0.0);
    let signal = cov.signal(&beta);
    assert!((delta_k_sq(&beta, &cov, &s).unwrap() - signal).abs() < 1e-9 * signal);
}

#[test]
fn constraint_satisfied() {
    for seed in 0..100 {
        let inst = random_instance(1000 + seed, 40, 8);
        let xi = xi_star(&inst.beta, &inst.cov, inst.r, &inst.s).unwrap();
        let (ur, _, _) = split_basis(&inst.cov, inst.r);
        let gap = (ur.transpose() * (&inst.beta - &inst.s.entries * &xi)).norm();
        assert!(gap <= 1e-8 * inst.beta.norm(), "seed {seed}: {gap}");
    }
}

#[test]
fn random_search_cannot_improve() {
    let inst = instance(5, 12, 3, 5);
    let xi = xi_star(&inst.beta, &inst.cov, 3, &inst.s).unwrap();
    let best = objective(&inst, &xi);
    let (ur, _, _) = split_basis(&inst.cov, 3);
    let a = ur.transpose() * &inst.s.entries;
    let pinv = a.transpose() * (&a * a.transpose()).try_inverse().unwrap();
    let proj = DMatrix::identity(5, 5) - &pinv * &a;
    let mut g = rng(6);
    for i in 0..500 {
        let scale = 10f64.powf(g.random_range(-4.0..1.0));
        let w = DVector::from_fn(5, |_, _| g.random_range(-1.0..1.0) * scale);
        let cand = &xi + &proj * w;
        assert!((&a * &cand - &a * &xi).norm() < 1e-10 * (1.0 + xi.norm()));
        assert!(objective(&inst, &cand) >= best * (1.0 - 1e-12), "draw {i}");
    }
}

#[test]
fn xi_star_errors() {
    let inst = instance(7, 10, 4, 3);
    assert!(matches!(xi_star(&inst.beta, &inst.cov, 4, &inst.s), Err(Error::InfeasibleConstraint(_))));
}

#[test]
fn split_reassembles() {
    let inst = instance(8, 20, 4, 8);
    let split = SplitSketch::new(&inst.beta, &inst.cov, 4, &inst.s).unwrap();
    let st = inst.cov.rotate_matrix(&inst.s.entries);
    let mut stacked = DMatrix::zeros(20, 8);
    stacked.rows_mut(0, 4).copy_from(&split.s1);
    stacked.rows_mut(4, 16).copy_from(&split.s2);
    assert!((stacked - st).amax() < 1e-10);
    let b2 = split.beta1.norm_squared() + split.beta2.norm_squared();
    assert!((b2 - inst.beta.norm_squared()).abs() < 1e-8);
}

#[test]
fn bound_degenerate_paths() {
    let inst = instance(9, 20, 4, 8);
    let split = SplitSketch::new(&DVector::zeros(20), &inst.cov, 4, &inst.s).unwrap();
    let cert = l1_l2_bound(&split).unwrap();
    assert_eq!((cert.l1, cert.l2, cert.residual), (0.0, 0.0, 0.0));
    assert!(cert.holds);

    let mut zero_tail = split.clone();
    zero_tail.lam_tail.iter_mut().for_each(|l| *l = 0.0);
    assert!(matches!(l1_l2_bound(&zero_tail), Err(Error::SingularSketch(_))));
}

#[test]
fn bound_holds_on_random_instances() {
    for seed in 0..200 {
        let inst = random_instance(2000 + seed, 40, 8);
        let split = SplitSketch::new(&inst.beta, &inst.cov, inst.r, &inst.s).unwrap();
        let cert = l1_l2_bound(&split).unwrap();
        assert!(cert.holds, "seed {seed}: {cert:?}");
        let signal = inst.cov.signal(&inst.beta);
        let d = delta_k_sq(&inst.beta, &inst.cov, &inst.s).unwrap();
        assert!(d >= signal - 2.0 * cert.l1 - 2.0 * cert.l2 - 1e-6 * signal);
        // The retained signal is at least the signal minus the constrained residual.
        assert!(d >= signal - cert.residual - 1e-9 * signal, "seed {seed}");
    }
}

#[test]
fn lifting_examples() {
    let lifted = eigen_lifting(&[3.0, 2.0, 0.0, 0.0], 2, 1.0, 0.5).unwrap();
    assert_eq!(lifted.lifted, vec![0.0, 0.0]);
    assert_eq!(lifted.ratio, None);

    let lifted = eigen_lifting(&[5.0, 4.0, 2.0, 2.0, 2.0, 2.0], 2, 1.0, 0.5).unwrap();
    let shift = 2.0 * 2.0 * 2.0 / 4.0;
    assert!(lifted.lifted.iter().all(|l| (l - (2.0 + shift)).abs() < 1e-15));
    assert!(eigen_lifting(&[1.0, 1.0], 2, 1.0, 1.0).is_err());
}

#[test]
fn lifting_ratio_on_polynomial_tails() {
    for p in [200usize, 2000] {
        let spec = build_spectrum(&SpectrumModel::new(SpectrumKind::Polynomial { alpha: 2.0 }, p)).unwrap();
        for r in [2usize, 5, 10] {
            let (b, c1) = (1.0, 12.0);
            let out = eigen_lifting(&spec, r, b, c1).unwrap();
            let mut sum = 0.0;
            for i in r..p {
                let l = spec[i] + (b / c1) * r as f64 * spec[r] / (p - r) as f64;
                assert!(l >= spec[i]);
                sum += l;
            }
            let ratio = sum / (spec[r] + (b / c1) * r as f64 * spec[r] / (p - r) as f64);
            assert!((out.ratio.unwrap() - ratio).abs() < 1e-10 * ratio);
            assert!((out.target - (b / c1) * r as f64).abs() < 1e-15);
            assert!(out.meets_target(), "p={p}, r={r}: {ratio} vs {}", out.target);
        }
    }
}

#[test]
fn lifting_target_can_fail_when_tail_is_short() {
    // Σ_{i>r} λ_i = 1 < (b r / C₁)² λ_{r+1} / (p - r) = 100/2.
    let out = eigen_lifting(&[10.0; 12].iter().copied().chain([0.5, 0.5]).collect::<Vec<_>>(), 12, 5.0, 6.0).unwrap();
    assert!(!out.meets_target());
}

fn chi1_tail(x: f64) -> f64 {
    libm::erfc((x / 2.0).sqrt())
}

#[test]
fn quadratic_tail_scalar() {
    let out = quadratic_tail_check(&[1.0], 1.0, 100_000, 21).unwrap();
    let exact = chi1_tail(5.0);
    assert!((exact - 0.0254).abs() < 1e-4);
    let se = (exact * (1.0 - exact) / 1e5).sqrt();
    assert!((out.upper.frequency - exact).abs() < 4.0 * se);
    assert!(out.pass);

    let zero = quadratic_tail_check(&[0.0; 3], 1.0, 1000, 1).unwrap();
    assert_eq!((zero.upper.frequency, zero.lower.frequency), (0.0, 0.0));
    assert!(zero.pass);
    assert!(quadratic_tail_check(&[1.0], 1.0, 999, 1).is_err());
}

#[test]
fn quadratic_tail_random_psd() {
    let mut g = rng(22);
    let spec: Vec<f64> = (0..20).map(|_| g.random_range(0.0..3.0)).collect();
    for t in [0.5, 2.0] {
        let out = quadratic_tail_check(&spec, t, 100_000, 23).unwrap();
        assert!(out.pass, "t={t}: {out:?}");
    }
}

#[test]
fn lambda_sketch_examples() {
    let out = lambda_sketch_singular_check(&vec![1.0; 400], 1, 0.3, 10_000, 31).unwrap();
    assert!(out.pass, "{out:?}");
    assert!(out.frequency < 0.01);

    let mut dominant = vec![1e-3; 50];
    dominant[0] = 1.0;
    assert_eq!(lambda_sketch_bound(&dominant, 2, 0.5), 1.0);
    assert!(lambda_sketch_singular_check(&dominant, 2, 0.5, 2000, 32).unwrap().pass);

    assert_eq!(lambda_sketch_bound(&vec![1.0; 10], 3, 0.999), 1.0);
    assert!(lambda_sketch_singular_check(&vec![1.0; 10], 3, 0.999, 1000, 33).unwrap().pass);
    assert!(lambda_sketch_singular_check(&[1.0], 1, 1.0, 10, 1).is_err());
}

#[test]
fn wishart_single_row_is_chi_square() {
    let (p, t) = (200usize, 0.1);
    let out = wishart_eigen_check(1, p, t, 20_000, 41).unwrap();
    let cut = p as f64 * (1.0 + (1.0 / p as f64).sqrt() + t).powi(2);
    let exact = 1.0 - chi_square_cdf_quad(cut, p as f64);
    let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
    assert!((out.upper.frequency - exact).abs() < 4.0 * se + 1e-4, "{} vs {exact}", out.upper.frequency);
    assert!(exact <= out.upper.bound);
    assert!(out.pass);
}

/// Chi-square CDF by Simpson quadrature of its density on a log-shifted grid.
fn chi_square_cdf_quad(x: f64, df: f64) -> f64 {
    let half = df / 2.0;
    let log_norm = -half * 2f64.ln() - libm::lgamma(half);
    common::integrate(&|u: f64| (log_norm + (half - 1.0) * u.ln() - u / 2.0).exp(), 1e-12, x, 1e-12)
}

#[test]
fn wishart_examples() {
    let out = wishart_eigen_check(20, 200, 0.3, 5000, 42).unwrap();
    assert!(out.pass, "{out:?}");
    let big = wishart_eigen_check(5, 50, 1.5, 1000, 43).unwrap();
    assert_eq!(big.lower.frequency, 0.0);
    assert!(big.pass);
    assert!(wishart_eigen_check(5, 4, 0.1, 10, 1).is_err());
}

#[test]
fn norm_inequality_examples() {
    let mut one = vec![0.0; 10];
    one[0] = 1.0;
    let eq = matrix_norm_ineq_check(&one).unwrap();
    assert!((eq.lhs - 1.0).abs() < 1e-15 && (eq.rhs - 1.0).abs() < 1e-15 && eq.pass);
    let flat = matrix_norm_ineq_check(&[2.0; 64]).unwrap();
    assert!((flat.lhs - 8.0).abs() < 1e-12 && (flat.rhs - 64f64.powf(0.125)).abs() < 1e-12);
    assert!(matches!(matrix_norm_ineq_check(&[0.0; 3]), Err(Error::DegenerateInput(_))));
}

#[test]
fn spectral_events_are_frequent() {
    // Tail sum ≥ 12 k λ_{r+1} holds comfortably for a slowly decaying spectrum.
    let spec = build_spectrum(&SpectrumModel::new(SpectrumKind::Invsqrt, 5000)).unwrap();
    let r = 4;
    let k = 4 * r;
    let tail: f64 = spec[r..].iter().sum();
    assert!(tail >= 12.0 * k as f64 * spec[r]);
    let f = spectral_bounds_frequency(&spec, r, k, 16.0, 2000, 51).unwrap();
    assert!(f.tail_kappa_le_4 > 0.9, "{f:?}");
    assert!(f.head_kappa_le_c2 > 0.9, "{f:?}");
}

proptest! {
    #![proptest_config(cases(10_000))]

    #[test]
    fn norm_inequality_always_holds(spec in prop::collection::vec(0.0f64..1.0, 1..60), pow in 0.5f64..6.0) {
        let spec: Vec<f64> = spec.iter().map(|l| l.powf(pow)).collect();
        prop_assume!(spec.iter().any(|l| *l > 0.0));
        prop_assert!(matrix_norm_ineq_check(&spec).unwrap().pass);
    }
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn residual_below_objective_at_zero(seed in any::<u64>()) {
        // ξ = 0 is feasible only when β has no component on the leading r
        // eigendirections; on those instances the optimum cannot exceed it.
        let inst = random_instance(seed, 40, 8);
        let mut split = SplitSketch::new(&inst.beta, &inst.cov, inst.r, &inst.s).unwrap();
        split.beta1.fill(0.0);
        let xi = xi_star_split(&split).unwrap();
        let at_zero = split.residual(&DVector::zeros(split.k()));
        prop_assert!(split.residual(&xi) <= at_zero + 1e-8, "{} > {}", split.residual(&xi), at_zero);
    }
}

#[test]
fn residual_can_exceed_tail_signal_when_head_is_matched() {
    // With β̃₁ ≠ 0 the zero vector is infeasible, and matching the head can
    // cost more on the tail than the tail signal itself.
    let mut exceeded = 0;
    for seed in 0..200 {
        let inst = random_instance(seed, 40, 8);
        let split = SplitSketch::new(&inst.beta, &inst.cov, inst.r, &inst.s).unwrap();
        let xi = xi_star_split(&split).unwrap();
        exceeded += (split.residual(&xi) > split.residual(&DVector::zeros(split.k())) + 1e-8) as usize;
    }
    assert!(exceeded > 0);
}
