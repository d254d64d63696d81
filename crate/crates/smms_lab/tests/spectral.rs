#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smms_lab::spectral::*;
use smms_lab::*;

fn constant_background(d: &Arc<Domain>, rho: f64) -> Background {
    Background::unweighted(d.clone(), Field::constant(d, rho), BoundaryField::constant(d, 0.0)).unwrap()
}

/// Positive root of `k tanh(k/2) = beta` by bisection.
fn robin_root(beta: f64) -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    while b * (b / 2.0).tanh() < beta {
        b *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid * (mid / 2.0).tanh() < beta {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[test]
fn constant_curvature_eigenvalues() {
    for (n, m) in [(3usize, 0.0), (3, 1.0), (4, 2.0)] {
        let d = Arc::new(build_radial_ball_domain::<f64>(61, n, m).unwrap());
        for rho in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let bg = constant_background(&d, rho);
            let lb = first_eigen_lb(&bg, 1e-10).unwrap();
            let bar = first_eigen_bar(&bg, 1e-10).unwrap();
            assert!((lb.lambda1 - rho).abs() < 1e-8, "({n},{m}) rho {rho}: {}", lb.lambda1);
            assert!((bar.lambda1 + rho / (n as f64 + m - 1.0)).abs() < 1e-8);
            assert!(lb.eigenfunction.iter().all(|&v| (v - 1.0).abs() < 1e-6));
        }
    }
}

#[test]
fn robin_interval_matches_transcendental_root() {
    let (c, nm1) = (6.0, 3.0);
    let h0 = -0.5;
    let lb_exact = -c * robin_root(-2.0 * h0 / c).powi(2);
    let bar_exact = -robin_root(0.5 / nm1).powi(2);
    let mut errs = Vec::new();
    for nodes in [51usize, 101, 201] {
        let d = Arc::new(build_interval_domain::<f64>(nodes, 1.0, 3, 1.0).unwrap());
        let zero = Field::constant(&d, 0.0);
        let lbg = Background::unweighted(d.clone(), zero.clone(), BoundaryField::constant(&d, h0)).unwrap();
        let bbg = Background::unweighted(d.clone(), zero, BoundaryField::constant(&d, 0.5)).unwrap();
        let lb = first_eigen_lb(&lbg, 1e-11).unwrap().lambda1;
        let bar = first_eigen_bar(&bbg, 1e-11).unwrap().lambda1;
        assert!(lb < 0.0 && bar < 0.0);
        errs.push(((lb - lb_exact).abs(), (bar - bar_exact).abs()));
    }
    let h = 1.0 / 200.0;
    assert!(errs[2].0 < 10.0 * h * h && errs[2].1 < 10.0 * h * h, "{errs:?}");
    for p in errs.windows(2) {
        assert!((p[0].0 / p[1].0).log2() > 1.9 && (p[0].1 / p[1].1).log2() > 1.9, "{errs:?}");
    }
}

#[test]
fn eigenpairs_are_minimal_positive_and_accurate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = Arc::new(build_radial_ball_domain::<f64>(41, 3, 1.0).unwrap());
    let phi = Field::from_fn(&d, |x| 0.4 * x[0] * x[0]);
    let r = Field::from_fn(&d, |x| (4.0 * x[0]).sin() - 0.3);
    let bg = Background::new(d.clone(), phi, r, BoundaryField::constant(&d, 0.7)).unwrap();
    for (a, res) in
        [(bg.lb_matrix(), first_eigen_lb(&bg, 1e-10).unwrap()), (bg.barred_matrix(), first_eigen_bar(&bg, 1e-10).unwrap())]
    {
        assert!(res.eigenfunction.iter().all(|&v| v > 0.0));
        assert!(res.residual <= 1e-9);
        assert!(res.shift < res.lambda1);
        for _ in 0..100 {
            let u: Vec<f64> = (0..d.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(res.lambda1 <= rayleigh_quotient(&a, bg.mass(), &u) + 1e-12);
        }
        let au = a.matvec(&res.eigenfunction);
        for i in 0..d.node_count() {
            let lhs = au[i] / bg.mass()[i];
            assert!((lhs - res.lambda1 * res.eigenfunction[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn lb_sign_is_conformally_invariant() {
    // L_new u = w^{-q} L(w u), so the transformed quotient is
    // E(w u) / int u^2 w^{2p}: same form, mass weighted by w^{2p-2}.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = Arc::new(build_interval_domain::<f64>(81, 1.0, 3, 1.0).unwrap());
    let p = 3.0;
    for trial in 0..10 {
        let shift = if trial % 2 == 0 { -1.5 } else { 1.5 };
        let r = Field::from_fn(&d, |x| shift + (3.0 * x[0]).cos());
        let bg = Background::unweighted(d.clone(), r, BoundaryField::constant(&d, 0.1)).unwrap();
        let base = first_eigen_lb(&bg, 1e-10).unwrap().lambda1;
        let amp: f64 = rng.random_range(0.1..0.6);
        let w: Vec<f64> = (0..81).map(|i| 1.0 + amp * (7.0 * d.coord(i)[0]).sin()).collect();
        let a = bg.lb_matrix().scaled(&w, &w);
        let mass: Vec<f64> = bg.mass().iter().zip(&w).map(|(m, x)| m * x.powf(2.0 * p)).collect();
        let moved = generalized_first_eigen(&a, &mass, 1e-10).unwrap().lambda1;
        assert_eq!(base.signum(), moved.signum(), "trial {trial}: {base} vs {moved}");
    }
}

#[test]
fn sign_criteria_examples() {
    let d = Arc::new(build_interval_domain::<f64>(41, 1.0, 3, 1.0).unwrap());
    let one = constant_background(&d, 1.0);
    assert_eq!(criterion_bar_sign(&one).unwrap().verdict, Verdict::NegativeCertified);
    assert!((first_eigen_bar(&one, 1e-10).unwrap().lambda1 + 1.0 / 3.0).abs() < 1e-9);
    let neg = constant_background(&d, -1.0);
    assert_eq!(criterion_lb_sign(&neg).unwrap().verdict, Verdict::NegativeCertified);
    assert!((first_eigen_lb(&neg, 1e-10).unwrap().lambda1 + 1.0).abs() < 1e-9);

    // int R + int H = -0.5 with a unit interval
    let fail_bar = Background::unweighted(d.clone(), Field::constant(&d, -0.5), BoundaryField::constant(&d, 0.0)).unwrap();
    let c = criterion_bar_sign(&fail_bar).unwrap();
    assert_eq!(c.verdict, Verdict::Inconclusive);
    assert!((c.integral + 0.5).abs() < 1e-12);
    let fail_lb = Background::unweighted(d.clone(), Field::constant(&d, 0.3), BoundaryField::constant(&d, 0.0)).unwrap();
    assert_eq!(criterion_lb_sign(&fail_lb).unwrap().verdict, Verdict::Inconclusive);

    let flat = constant_background(&d, 0.0);
    assert!(matches!(criterion_lb_sign(&flat), Err(LabError::Hypothesis(_))));
    assert!(first_eigen_lb(&flat, 1e-10).unwrap().lambda1.abs() < 1e-10);
    assert!(first_eigen_bar(&flat, 1e-10).unwrap().lambda1.abs() < 1e-10);
}

#[test]
fn randomized_backgrounds_obey_sign_criteria() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = Arc::new(build_radial_ball_domain::<f64>(41, 3, 1.0).unwrap());
    for _ in 0..20 {
        let a: [f64; 3] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5)];
        let phi = Field::from_fn(&d, |x| a[2] * x[0] * x[0]);
        let r = Field::from_fn(&d, |x| a[0] + a[1] * (3.0 * x[0]).cos());
        let h = BoundaryField::new(vec![rng.random_range(-1.0..1.0)]);
        let probe = Background::new(d.clone(), phi.clone(), r.clone(), h.clone()).unwrap();
        let vol = probe.integrate(&vec![1.0; d.node_count()]);
        let ir = probe.integrate(probe.weighted_scalar_curvature());
        let ih = probe.integrate_boundary(probe.weighted_mean_curvature());
        let margin = rng.random_range(0.0..0.3);
        let up = (margin - ir - ih) / vol;
        let bar_bg = Background::new(d.clone(), phi.clone(), r.map(|v| v + up), h.clone()).unwrap();
        assert_eq!(criterion_bar_sign(&bar_bg).unwrap().verdict, Verdict::NegativeCertified);
        assert!(first_eigen_bar(&bar_bg, 1e-10).unwrap().lambda1 < 0.0);
        let down = (-margin - ir - 2.0 * ih) / vol;
        let lb_bg = Background::new(d.clone(), phi, r.map(|v| v + down), h).unwrap();
        assert_eq!(criterion_lb_sign(&lb_bg).unwrap().verdict, Verdict::NegativeCertified);
        assert!(first_eigen_lb(&lb_bg, 1e-10).unwrap().lambda1 < 0.0);
    }
}

#[test]
fn rejects_nonpositive_mass() {
    let d = Arc::new(build_interval_domain::<f64>(11, 1.0, 3, 1.0).unwrap());
    let bg = constant_background(&d, 1.0);
    let mut mass = bg.mass().to_vec();
    mass[3] = 0.0;
    assert!(matches!(generalized_first_eigen(&bg.lb_matrix(), &mass, 1e-10), Err(LabError::InvalidInput(_))));
}
