use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smms_lab::smms::{conformal_curvatures_direct, weighted_mean_curvature_of, weighted_scalar_curvature_of};
use smms_lab::*;

fn interval(nodes: usize, m: f64) -> Arc<Domain> {
    Arc::new(build_interval_domain(nodes, 1.0, 3, m).unwrap())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn coefficients_for_three_plus_one() {
    let c = Coefficients::<f64>::new(3, 1.0).unwrap();
    assert_eq!(c.k, 2.0);
    assert_eq!(c.c, 6.0);
    assert_eq!(c.q, 3.0);
    assert_eq!(c.qb, 2.0);
    assert_eq!(c.p, 3.0);
    assert!(Coefficients::<f64>::new(2, 0.0).is_err());
}

#[test]
fn weighted_laplacian_oracles() {
    let d = interval(201, 1.0);
    let x2 = Field::from_fn(&d, |x| x[0] * x[0]);
    let flat = Background::unweighted(d.clone(), Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0)).unwrap();
    assert!(sup_diff(&flat.weighted_laplacian(&x2), &d.laplacian(&x2)) < 1e-9);
    assert!(sup(&flat.weighted_laplacian(&Field::constant(&d, 4.0))) < 1e-9);

    let bg = Background::new(d.clone(), Field::from_fn(&d, |x| x[0]), Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0))
        .unwrap();
    let lap = bg.weighted_laplacian(&x2);
    let exact: Vec<f64> = (0..201).map(|i| 2.0 - 2.0 * d.coord(i)[0]).collect();
    let h = d.h();
    assert!(sup_diff(&lap, &exact) < 10.0 * h * h);
}

#[test]
fn scalar_curvature_oracles() {
    let d = interval(201, 1.0);
    let r0 = Field::from_fn(&d, |x| x[0].sin());
    let zero = Field::constant(&d, 0.0);
    assert_eq!(weighted_scalar_curvature_of(&d, 1.0, &zero, &r0).unwrap().values, r0.values);
    let phi = Field::from_fn(&d, |x| x[0] * x[0]);
    let r = weighted_scalar_curvature_of(&d, 1.0, &phi, &zero).unwrap();
    let exact: Vec<f64> = (0..201).map(|i| 4.0 - 8.0 * d.coord(i)[0].powi(2)).collect();
    let h = d.h();
    assert!(sup_diff(&r, &exact) < 20.0 * h * h);

    let d0 = interval(11, 0.0);
    let bad = Field::constant(&d0, 0.1);
    assert!(matches!(weighted_scalar_curvature_of(&d0, 0.0, &bad, &Field::constant(&d0, 0.0)), Err(LabError::InvalidInput(_))));
}

#[test]
fn linear_density_on_box_gives_constant_curvature() {
    let a = [0.3, 0.2];
    let d = Arc::new(build_halfspace_box_domain::<f64>(9, 9, 1.0, 1.0, 1.0).unwrap());
    let phi = Field::from_fn(&d, |x| a[0] * x[0] + a[1] * x[1]);
    let bg = Background::new(d.clone(), phi, Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0)).unwrap();
    let expect = -2.0 * (a[0] * a[0] + a[1] * a[1]);
    for i in (0..d.node_count()).filter(|&i| !d.is_truncation_node(i)) {
        assert!((bg.weighted_scalar_curvature()[i] - expect).abs() < 1e-12);
    }
    for (s, &i) in d.boundary_index_set().iter().enumerate() {
        if !d.is_truncation_node(i) {
            assert!(bg.weighted_mean_curvature()[s].abs() < 1e-12);
        }
    }
}

#[test]
fn mean_curvature_oracles() {
    let b = Arc::new(build_radial_ball_domain::<f64>(41, 3, 0.0).unwrap());
    let bg = Background::unweighted(b.clone(), Field::constant(&b, 0.0), BoundaryField::constant(&b, 2.0)).unwrap();
    assert_eq!(bg.weighted_mean_curvature()[0], 2.0);

    let d = interval(51, 1.0);
    let h = weighted_mean_curvature_of(&d, 1.0, &Field::from_fn(&d, |x| x[0]), &[0.0, 0.0]).unwrap();
    // H - d(phi)/d(nu) with outward normals -1 at 0 and +1 at 1
    assert!((h[0] - 1.0).abs() < 1e-12 && (h[1] + 1.0).abs() < 1e-12);
}

#[test]
fn operator_oracles() {
    let d = interval(201, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phi = Field::from_fn(&d, |x| 0.3 * x[0].cos());
    let r0 = Field::new((0..201).map(|_| rng.random_range(-1.0..1.0)).collect());
    let bg = Background::new(d.clone(), phi, r0, BoundaryField::new(vec![0.4, -0.7])).unwrap();
    let one = Field::constant(&d, 1.0);
    assert!(sup_diff(&bg.apply_l(&one), bg.weighted_scalar_curvature()) < 1e-9);
    assert!(sup_diff(&bg.apply_b(&one), bg.weighted_mean_curvature()) < 1e-12);
    let nm1 = 3.0;
    let lbar: Vec<f64> = bg.weighted_scalar_curvature().iter().map(|r| -r / nm1).collect();
    assert!(sup_diff(&bg.apply_lbar(&one), &lbar) < 1e-9);
    let bbar: Vec<f64> = bg.weighted_mean_curvature().iter().map(|h| -h / nm1).collect();
    assert!(sup_diff(&bg.apply_bbar(&one), &bbar) < 1e-12);

    let flat = Background::unweighted(d.clone(), Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0)).unwrap();
    let lw = flat.apply_l(&Field::from_fn(&d, |x| x[0] * x[0]));
    assert!(lw.iter().all(|v| (v + 12.0).abs() < 1e-8));
    let lin = flat.apply_l(&Field::from_fn(&d, |x| 2.0 * x[0] + 1.0));
    assert!(sup(&lin) < 1e-8);

    let r3 = Background::unweighted(d.clone(), Field::constant(&d, nm1), BoundaryField::constant(&d, 0.0)).unwrap();
    assert!(r3.apply_lbar(&one).iter().all(|v| (v + 1.0).abs() < 1e-12));
}

#[test]
fn constant_factors_transform_by_powers() {
    let b = Arc::new(build_radial_ball_domain::<f64>(41, 3, 1.0).unwrap());
    let bg = Background::new(
        b.clone(),
        Field::from_fn(&b, |x| 0.2 * x[0] * x[0]),
        Field::from_fn(&b, |x| 1.0 - x[0]),
        BoundaryField::constant(&b, 2.0),
    )
    .unwrap();
    let id = bg.conformal_transform(&Factor::new(Field::constant(&b, 1.0)).unwrap());
    assert!(sup_diff(&id.r_new, bg.weighted_scalar_curvature()) < 1e-9);
    assert!(sup_diff(&id.h_new, bg.weighted_mean_curvature()) < 1e-12);
    assert!(id.vol_weight.iter().chain(id.area_weight.iter()).all(|&v| v == 1.0));
    let c: f64 = 1.7;
    let k = 2.0;
    let img = bg.conformal_transform(&Factor::new(Field::constant(&b, c)).unwrap());
    let r_expect: Vec<f64> = bg.weighted_scalar_curvature().iter().map(|r| c.powf(-4.0 / k) * r).collect();
    let h_expect: Vec<f64> = bg.weighted_mean_curvature().iter().map(|h| c.powf(-2.0 / k) * h).collect();
    assert!(sup_diff(&img.r_new, &r_expect) < 1e-9);
    assert!(sup_diff(&img.h_new, &h_expect) < 1e-12);
    let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(argmax(&img.r_new), argmax(&id.r_new));
}

#[test]
fn unweighted_reduction_is_exact() {
    let d = interval(41, 0.0);
    let r0 = Field::from_fn(&d, |x| (2.0 * x[0]).cos());
    let bg = Background::unweighted(d.clone(), r0.clone(), BoundaryField::new(vec![0.5, -0.25])).unwrap();
    assert!(sup_diff(bg.weighted_scalar_curvature(), &r0) <= 1e-12);
    assert!(sup_diff(bg.weighted_mean_curvature(), &[0.5, -0.25]) <= 1e-12);
    let u = Field::from_fn(&d, |x| 1.0 + x[0] * x[0]);
    let lap = d.laplacian(&u);
    let c = 8.0;
    let classical: Vec<f64> = (0..41).map(|i| -c * lap[i] + r0[i] * u[i]).collect();
    assert!(sup_diff(&bg.apply_l(&u), &classical) < 1e-9);
}

#[test]
fn transformation_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for ball in [false, true] {
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-0.15..0.15)).collect();
        let w_of =
            |x: f64| 1.0 + a.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * x).cos()).sum::<f64>();
        let errs: Vec<f64> = [101usize, 201, 401]
            .iter()
            .map(|&nodes| {
                let (d, hg): (Arc<Domain>, f64) = if ball {
                    (Arc::new(build_radial_ball_domain(nodes, 3, 1.0).unwrap()), 2.0)
                } else {
                    (interval(nodes, 1.0), 0.0)
                };
                let phi = Field::from_fn(&d, |x| 0.3 * x[0] * x[0]);
                let bg =
                    Background::new(d.clone(), phi, Field::from_fn(&d, |x| 0.5 * x[0]), BoundaryField::constant(&d, hg)).unwrap();
                let w = Factor::new(Field::from_fn(&d, |x| w_of(x[0]))).unwrap();
                let img = bg.conformal_transform(&w);
                let (r, h) = conformal_curvatures_direct(&bg, &w);
                sup_diff(&img.r_new, &r).max(sup_diff(&img.h_new, &h))
            })
            .collect();
        for p in errs.windows(2) {
            assert!((p[0] / p[1]).log2() > 1.9, "ball {ball}: {errs:?}");
        }
    }
}

#[test]
fn yamabe_residual_vanishes_on_trivial_solutions() {
    let d = interval(31, 1.0);
    let bg = Background::new(
        d.clone(),
        Field::from_fn(&d, |x| x[0].sin()),
        Field::from_fn(&d, |x| x[0] - 0.5),
        BoundaryField::new(vec![0.3, -0.2]),
    )
    .unwrap();
    assert!(bg.yamabe_residual_norm(&Factor::new(Field::constant(&d, 1.0)).unwrap()) < 1e-9);
    let flat = Background::unweighted(d.clone(), Field::constant(&d, 0.0), BoundaryField::constant(&d, 0.0)).unwrap();
    assert!(flat.yamabe_residual_norm(&Factor::new(Field::constant(&d, 0.37)).unwrap()) < 1e-12);
}

#[test]
fn rejects_bad_inputs() {
    let d = interval(11, 1.0);
    assert!(matches!(Factor::new(Field::constant(&d, 0.0)), Err(LabError::Positivity(_))));
    let short = Field::new(vec![0.0; 5]);
    assert!(matches!(Background::unweighted(d.clone(), short, BoundaryField::constant(&d, 0.0)), Err(LabError::InvalidInput(_))));
    let nan = Field::from_fn(&d, |_| f64::NAN);
    assert!(Background::unweighted(d.clone(), nan, BoundaryField::constant(&d, 0.0)).is_err());
}
