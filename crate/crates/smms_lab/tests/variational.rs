use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smms_lab::variational::*;
use smms_lab::*;

// 30-digit evaluations of the closed form with mpmath (independent of the
// log-gamma path used by the library)
const LAMBDA_1_3: f64 = 1.074661302677646427144644564426;
const LAMBDA_2_4: f64 = 1.236_306_598_700_129;

fn flat_ball(nodes: usize, n: usize) -> (Arc<Domain>, Background) {
    let d = Arc::new(build_radial_ball_domain::<f64>(nodes, n, 0.0).unwrap());
    let bg = Background::unweighted(d.clone(), Field::constant(&d, 0.0), BoundaryField::constant(&d, (n - 1) as f64)).unwrap();
    (d, bg)
}

fn cylinder(r: f64, nodes: usize) -> Arc<Domain> {
    Arc::new(build_halfspace_cylinder_domain::<f64>(nodes, nodes, r, r, 3, 1.0).unwrap())
}

#[test]
fn sharp_constant_values() {
    assert!((lambda_mn(0.0f64, 3).unwrap() - PI.sqrt()).abs() < 1e-10);
    assert!((lambda_mn(1.0f64, 3).unwrap() - LAMBDA_1_3).abs() < 1e-10);
    assert!((lambda_mn(2.0f64, 4).unwrap() - LAMBDA_2_4).abs() < 1e-10);
    // m = 0 collapses to ((n - 2)/2) |S^{n-1}|^{1/(n-1)}
    assert!((lambda_mn(0.0f64, 4).unwrap() - (2.0 * PI * PI).powf(1.0 / 3.0)).abs() < 1e-12);
    for n in 3..=8 {
        for i in 0..=10 {
            let v = lambda_mn(0.5 * i as f64, n).unwrap();
            assert!(v.is_finite() && v > 0.0);
        }
    }
    assert!(lambda_mn(-1.0f64, 3).is_err());
    assert!(lambda_mn(1.0f64, 2).is_err());
}

#[test]
fn extremal_values_and_scaling() {
    let m = 1.0;
    let k: f64 = 2.0;
    let e1 = gns_extremal(1.0, &[0.0, 0.0], m, 3).unwrap();
    assert!((e1.at(&[0.0, 0.0], 0.0) - 2f64.powf(k / 2.0)).abs() < 1e-14);
    let r: f64 = 1e4;
    let lead = 2f64.powf(k / 2.0) * r.powf(-k);
    assert!((e1.radial(r, 0.0) / lead - 1.0).abs() < 1e-6);
    let eps = 0.37;
    let e = gns_extremal(eps, &[0.0, 0.0], m, 3).unwrap();
    for &(x, y, t) in &[(0.1, 0.2, 0.0), (1.5, -0.3, 0.7), (3.0, 2.0, 5.0)] {
        let scaled = eps.powf(-k / 2.0) * e1.at(&[x / eps, y / eps], t / eps);
        assert!((e.at(&[x, y], t) - scaled).abs() < 1e-13 * scaled.max(1.0));
    }
    assert!(gns_extremal(0.0, &[0.0, 0.0], m, 3).is_err());
    assert!(gns_extremal(1.0, &[0.0], m, 3).is_err());
}

#[test]
fn trace_quotient_of_extremal_approaches_constant() {
    let lam = lambda_mn(1.0f64, 3).unwrap();
    let e = gns_extremal(1.0, &[0.0, 0.0], 1.0, 3).unwrap();
    let gaps: Vec<f64> = [(5.0, 26usize), (10.0, 101)]
        .iter()
        .map(|&(r, nodes)| {
            let d = cylinder(r, nodes);
            let w = Field::from_fn(&d, |x| e.radial(x[0], x[1]));
            let rep = trace_gns_report(&d, &w, 1.0, Some(&e)).unwrap();
            assert!(rep.tail_bound.unwrap() > 0.0);
            rep.quotient / lam - 1.0
        })
        .collect();
    assert!(gaps[1].abs() < gaps[0].abs() && gaps[1].abs() < 0.02, "{gaps:?}");
}

#[test]
fn trace_quotient_invariances() {
    let d = cylinder(4.0, 41);
    let lam = lambda_mn(1.0f64, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let s: f64 = rng.random_range(0.5..2.0);
        let w = Field::from_fn(&d, |x| (-(x[0] * x[0] + x[1] * x[1]) / (s * s)).exp());
        let q = trace_gns_quotient(&d, &w, 1.0).unwrap();
        assert!(q >= lam * 0.98, "bump {s}: {q}");
        let c: f64 = rng.random_range(0.1..10.0);
        let cw = w.map(|v| c * v);
        assert!((trace_gns_quotient(&d, &cw, 1.0).unwrap() / q - 1.0).abs() < 1e-10);
    }
    let ball = build_radial_ball_domain::<f64>(11, 3, 1.0).unwrap();
    assert!(matches!(trace_gns_quotient(&ball, &[1.0; 11], 1.0), Err(LabError::InvalidDomain(_))));
}

#[test]
fn escobar_quotient_closed_forms() {
    for n in [3usize, 4] {
        let (d, bg) = flat_ball(41, n);
        let q = escobar_quotient(&bg, &vec![1.0; d.node_count()]).unwrap();
        assert!((q - lambda_mn(0.0f64, n).unwrap()).abs() < 1e-12);

        // classical form (int c'|grad w|^2 + ...)/(oint w^p)^{2/p} for m = 0
        let w = Field::from_fn(&d, |x| 1.0 + 0.4 * x[0] * x[0]);
        let nf = n as f64;
        let a = (nf - 2.0) / (4.0 * (nf - 1.0));
        let p = 2.0 * (nf - 1.0) / (nf - 2.0);
        let wb = w[d.node_count() - 1];
        let sphere = d.boundary_weight()[0];
        let num = d.dirichlet_form(&w, &w, None) + 2.0 * a * (nf - 1.0) * sphere * wb * wb;
        let classical = num / (sphere * wb.powf(p)).powf(2.0 / p);
        assert!((escobar_quotient(&bg, &w).unwrap() / classical - 1.0).abs() < 1e-12);
    }
}

#[test]
fn escobar_invariances_and_gradient() {
    let d = Arc::new(build_radial_ball_domain::<f64>(31, 3, 1.0).unwrap());
    let bg = Background::new(
        d.clone(),
        Field::from_fn(&d, |x| 0.3 * x[0] * x[0]),
        Field::from_fn(&d, |x| x[0].sin()),
        BoundaryField::constant(&d, 1.5),
    )
    .unwrap();
    let es = Escobar::new(&bg);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let w: Vec<f64> = (0..31).map(|i| 1.0 + 0.3 * (i as f64 * rng.random_range(0.1..0.5)).sin()).collect();
        let c = rng.random_range(0.2..5.0);
        let cw: Vec<f64> = w.iter().map(|v| c * v).collect();
        let q = es.quotient(&w).unwrap();
        assert!((es.quotient(&cw).unwrap() / q - 1.0).abs() < 1e-10);

        let mut nw = w.clone();
        es.normalize(&mut nw).unwrap();
        let parts = es.parts(&nw).unwrap();
        assert!((parts.b - 1.0).abs() < 1e-10 && (parts.q - parts.a).abs() < 1e-10 * parts.a.abs());

        let g = es.gradient(&w).unwrap();
        let v: Vec<f64> = (0..31).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-6;
        let plus: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (es.quotient(&plus).unwrap() - es.quotient(&minus).unwrap()) / (2.0 * h);
        let an: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {fd} analytic {an}");

        let dv: Vec<f64> = v.iter().map(|x| 1e-9 * x).collect();
        let moved: Vec<f64> = w.iter().zip(&dv).map(|(a, b)| a + b).collect();
        let exact = (es.quotient(&moved).unwrap() / q).ln();
        assert!((es.log_quotient_change(&w, &dv).unwrap() - exact).abs() < 1e-12);
    }
}

#[test]
fn el_residual_of_extremal_shrinks_with_h() {
    let e = gns_extremal(1.0, &[0.0, 0.0], 1.0, 3).unwrap();
    let res: Vec<f64> = [101usize, 201]
        .iter()
        .map(|&nodes| {
            let d = cylinder(10.0, nodes);
            let bg = Background::unweighted(d.clone(), Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0)).unwrap();
            let w = Field::from_fn(&d, |x| e.radial(x[0], x[1]));
            let q = escobar_quotient(&bg, &w).unwrap();
            let (ri, rb) = el_residual(&bg, &w, q).unwrap();
            // truncation faces carry the artificial zero-flux closure
            let keep = |i: usize| !d.is_truncation_node(i);
            let worst_i = (0..d.node_count()).filter(|&i| keep(i)).fold(0.0f64, |m, i| m.max(ri[i].abs()));
            let worst_b =
                d.boundary_index_set().iter().enumerate().filter(|(_, &i)| keep(i)).fold(0.0f64, |m, (s, _)| m.max(rb[s].abs()));
            let scale = bg.apply_l(&w).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst_i.max(worst_b) / scale
        })
        .collect();
    assert!(res[1] < 0.1 && res[0] / res[1] > 2.5, "{res:?}");
}

#[test]
fn el_residual_of_constant_is_reported() {
    let d = Arc::new(build_interval_domain::<f64>(21, 1.0, 3, 1.0).unwrap());
    let bg = Background::unweighted(d.clone(), Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0)).unwrap();
    let one = vec![1.0; 21];
    let rep = quotient_report(&bg, &one, "constant").unwrap();
    assert_eq!(rep.q_value, 0.0);
    assert_eq!(rep.trial_id, "constant");
    let bg = Background::unweighted(d.clone(), Field::constant(&d, 1.0), BoundaryField::constant(&d, 0.0)).unwrap();
    let rep = quotient_report(&bg, &one, "constant").unwrap();
    assert!(rep.el_interior_residual > 0.1);
}

#[test]
fn minimizer_respects_the_sharp_bound() {
    for n in [3usize, 4] {
        let (d, bg) = flat_ball(41, n);
        let init = Factor::new(Field::from_fn(&d, |x| 1.0 + 0.5 * x[0] * x[0] + 0.3 * (3.0 * x[0]).sin())).unwrap();
        let res = minimize_escobar(&bg, &init, 1e-7, 2000).unwrap();
        let lam = lambda_mn(0.0f64, n).unwrap();
        assert_eq!(res.status, MinimizeStatus::Converged);
        assert!(res.lambda_estimate <= lam * 1.02);
        assert!(res.history.windows(2).all(|p| p[1].q <= p[0].q));
        assert!(res.report.el_interior_residual.max(res.report.el_boundary_residual) <= 1e-6);
        assert!(!res.floor_active);
    }
}

#[test]
fn minimizer_rejects_nonpositive_start() {
    let (d, bg) = flat_ball(11, 3);
    let mut w = vec![1.0; d.node_count()];
    w[3] = -0.5;
    let f = Factor::new(Field::new(vec![1.0; d.node_count()])).unwrap();
    assert!(minimize_escobar(&bg, &f, 1e-7, 0).is_ok());
    assert!(Factor::new(Field::new(w)).is_err());
}

#[test]
fn aubin_estimates() {
    let (d, bg) = flat_ball(41, 3);
    let consts = vec![("one".to_string(), Field::constant(&d, 1.0))];
    let est = estimate_aubin_constant_over(&bg, 0.1, &consts).unwrap();
    // constants: S^{beta} = (V^alpha) C (vol + area) with alpha = 0
    let area = 4.0 * PI;
    let vol = d.integrate_volume(&vec![1.0; d.node_count()], None);
    let expect = area.powf(0.5) / (vol + area);
    assert!((est.c_estimate - expect).abs() < 1e-12);

    let a = estimate_aubin_constant(&bg, 0.1).unwrap();
    let b = estimate_aubin_constant(&bg, 0.2).unwrap();
    assert_eq!(a.family, AUBIN_FAMILY);
    assert!(b.c_estimate <= a.c_estimate);
    assert!(a.trials.iter().all(|t| t.required_c.is_finite() && t.slack >= 0.0));
    assert!(estimate_aubin_constant(&bg, 0.0).is_err());
}
