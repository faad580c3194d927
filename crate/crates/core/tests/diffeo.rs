use std::f64::consts::PI;
use std::sync::Arc;

use diffeq::diffeo::{
    compose, flowbox_straighten, make_contraction, make_linear_blend, make_point_transport, make_rotation_conjugation,
    perturb_away_from_zero, point_transport_min_steps, straightening_residual, translation, Support, BUMP_SLOPE_MAX,
};
use diffeq::fields::{bump_profile_derivative, BallRegion, FieldSpec, VectorField};
use diffeq::linalg::{self, Matrix, Vector};
use diffeq::{ChartDomain, Diffeo, DiffeoSpec, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Arc<ChartDomain<f64>>;

fn v2(x: f64, y: f64) -> Vector<f64> {
    [x, y, 0.0]
}

fn rot2(a: f64) -> Matrix<f64> {
    linalg::matrix_from_rows(&[vec![a.cos(), -a.sin()], vec![a.sin(), a.cos()]])
}

fn box2(n: usize) -> C {
    Arc::new(ChartDomain::cube(2, -2.0, 2.0, n, 0.1).unwrap())
}

fn torus2(n: usize) -> C {
    Arc::new(ChartDomain::torus(2, 0.0, 1.0, n).unwrap())
}

/// A sample of every constructor on the unit torus.
fn factory(c: &C) -> Vec<Diffeo<f64>> {
    let ctr = v2(0.5, 0.5);
    let contraction = make_contraction(c, 3, 0.5, &ctr, 0.15).unwrap();
    let transport = point_transport_min_steps(c, &v2(0.45, 0.5), &v2(0.55, 0.52), &ctr, 0.3, 64).unwrap();
    let rotation = make_rotation_conjugation(c, &rot2(PI / 3.0), &BallRegion::new(ctr, 0.1), 0.15).unwrap();
    let stretch = make_linear_blend(
        c,
        &linalg::matrix_from_rows(&[vec![1.2, 0.0], vec![0.0, 0.85]]),
        &BallRegion::new(v2(0.3, 0.6), 0.05),
        0.15,
    )
    .unwrap();
    let shift = translation(c, &v2(0.1, 0.25)).unwrap();
    let composed = compose(&rotation, &contraction).unwrap();
    vec![contraction, transport, rotation, stretch, shift, composed]
}

fn fd(phi: &Diffeo<f64>, u: &Vector<f64>, h: f64) -> Matrix<f64> {
    let mut j = linalg::identity();
    for b in 0..2 {
        let mut up = *u;
        let mut dn = *u;
        up[b] += h;
        dn[b] -= h;
        let (fu, fdn) = (phi.forward(&up), phi.forward(&dn));
        for a in 0..2 {
            j[a][b] = (fu[a] - fdn[a]) / (2.0 * h);
        }
    }
    j
}

fn max_entry_diff(a: &Matrix<f64>, b: &Matrix<f64>, dim: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

#[test]
fn contraction_with_unit_n_is_identity() {
    let c = box2(33);
    let phi = make_contraction(&c, 1, 0.5, &v2(0.0, 0.0), 1.0).unwrap();
    for i in 0..c.node_count() {
        let u = c.node(i);
        assert_eq!(phi.forward(&u), u);
    }
}

#[test]
fn contraction_maps_unit_sphere_to_radius_one_over_n() {
    let c = box2(33);
    let phi = make_contraction(&c, 4, 0.5, &v2(0.0, 0.0), 1.0).unwrap();
    for k in 0..100 {
        let a = 2.0 * PI * k as f64 / 100.0;
        let y = phi.forward(&v2(a.cos(), a.sin()));
        assert!((linalg::norm(&y) - 0.25).abs() <= 1e-9);
    }
}

#[test]
fn contraction_jacobian_norm_inside_unit_ball() {
    let c = box2(33);
    let phi = make_contraction(&c, 4, 0.5, &v2(0.0, 0.0), 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(0.0f64..1.0).sqrt();
        let a = rng.gen_range(0.0..2.0 * PI);
        worst = worst.max(linalg::op_norm(&phi.jacobian(&v2(r * a.cos(), r * a.sin())), 2));
    }
    assert!(worst <= 0.25 + 1e-9, "{worst}");
}

#[test]
fn contraction_nesting() {
    let c = box2(33);
    for n in [2u32, 3, 5, 8] {
        let phi = make_contraction(&c, n, 0.4, &v2(0.1, -0.2), 1.0).unwrap();
        for k in 0..200 {
            let r = (k as f64 + 0.5) / 200.0;
            let a = 0.37 * k as f64;
            let u = v2(0.1 + r * a.cos(), -0.2 + r * a.sin());
            let y = phi.forward(&u);
            assert!(c.distance(&y, &v2(0.1, -0.2)) <= r / n as f64 + 1e-9);
        }
    }
}

#[test]
fn contraction_region_must_fit() {
    let c = box2(33);
    assert!(matches!(make_contraction(&c, 2, 0.5, &v2(1.0, 0.0), 1.0), Err(Error::Region(_))));
}

#[test]
fn contraction_profile_derivative_bound() {
    // The transition layer [1, 1+eps] has d(r f(r))/dr > 0 (invertibility).
    let c = box2(33);
    let phi = make_contraction(&c, 8, 0.3, &v2(0.0, 0.0), 1.0).unwrap();
    let mut prev = 0.0;
    for k in 1..=2000 {
        let r = 1.4 * k as f64 / 2000.0;
        let y = linalg::norm(&phi.forward(&v2(r, 0.0)));
        assert!(y > prev);
        prev = y;
    }
}

#[test]
fn round_trip_at_every_node() {
    let c = torus2(64);
    for phi in factory(&c) {
        let tol = phi.round_trip_tolerance();
        for i in 0..c.node_count() {
            let u = c.node(i);
            let a = c.distance(&phi.forward(&phi.inverse(&u)), &u);
            let b = c.distance(&phi.inverse(&phi.forward(&u)), &u);
            assert!(a <= tol && b <= tol, "{}: {a:e} {b:e} at {u:?}", phi.label());
        }
    }
}

#[test]
fn support_exactness() {
    let c = torus2(64);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for phi in factory(&c) {
        let Support::Ball(b) = *phi.support() else { continue };
        let mut hits = 0;
        while hits < 1000 {
            let u = v2(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            if c.distance(&u, &b.center) < b.radius {
                continue;
            }
            hits += 1;
            let y = phi.forward(&u);
            assert!(y[0].to_bits() == u[0].to_bits() && y[1].to_bits() == u[1].to_bits(), "{}", phi.label());
        }
    }
}

#[test]
fn orientation_preserved_at_every_node() {
    let c = torus2(64);
    for phi in factory(&c) {
        for i in 0..c.node_count() {
            let d = linalg::det(&phi.jacobian(&c.node(i)), 2);
            assert!(d > 0.0, "{} det {d}", phi.label());
        }
    }
}

#[test]
fn analytic_jacobians_match_central_differences() {
    let c = torus2(64);
    for phi in factory(&c) {
        for i in (0..c.node_count()).step_by(7) {
            let u = c.node(i);
            let e = max_entry_diff(&phi.jacobian(&u), &fd(&phi, &u, 1e-6), 2);
            assert!(e < 1e-5, "{}: {e:e}", phi.label());
        }
    }
}

#[test]
fn bump_slope_constant() {
    let m = (0..=1_000_000).map(|i| bump_profile_derivative(i as f64 / 1e6).abs()).fold(0.0, f64::max);
    assert!((m - BUMP_SLOPE_MAX).abs() < 1e-9, "{m}");
}

#[test]
fn point_transport_identity_when_endpoints_agree() {
    let c = box2(33);
    let x = v2(0.1, 0.2);
    let phi = make_point_transport(&c, &x, &x, &v2(0.0, 0.0), 0.8, 4).unwrap();
    for i in 0..c.node_count() {
        assert_eq!(phi.forward(&c.node(i)), c.node(i));
    }
}

#[test]
fn point_transport_reaches_target_with_local_support() {
    let c = box2(65);
    let (x0, x1, ctr, rho) = (v2(0.0, 0.0), v2(0.3, 0.0), v2(0.0, 0.0), 0.8);
    assert!(matches!(make_point_transport(&c, &x0, &x1, &ctr, rho, 1), Err(Error::StepBudget(_))));
    let phi = point_transport_min_steps(&c, &x0, &x1, &ctr, rho, 100).unwrap();
    let y = phi.forward(&x0);
    assert!(linalg::norm(&linalg::sub(&y, &x1)) <= 1e-8, "{y:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut n = 0;
    while n < 20 {
        let u = v2(rng.gen_range(-1.9..1.9), rng.gen_range(-1.9..1.9));
        if linalg::norm(&u) < rho {
            continue;
        }
        n += 1;
        assert_eq!(phi.forward(&u), u);
    }
}

#[test]
fn point_transport_single_step_is_near_identity() {
    // One admissible step has ‖∂τ‖ < 1/2, so every singular value of the
    // Jacobian lies in (1/2, 3/2) and the determinant is positive.
    let c = box2(65);
    let phi = make_point_transport(&c, &v2(0.0, 0.0), &v2(0.05, 0.02), &v2(0.0, 0.0), 0.8, 1).unwrap();
    for i in 0..c.node_count() {
        let j = phi.jacobian(&c.node(i));
        let t = linalg::mat_add_scaled(&j, -1.0, &linalg::identity());
        assert!(linalg::op_norm(&t, 2) < 0.5);
        assert!(linalg::det(&j, 2) > 0.0);
    }
}

#[test]
fn point_transport_endpoints_must_lie_in_ball() {
    let c = box2(33);
    let r = make_point_transport(&c, &v2(0.0, 0.0), &v2(0.9, 0.0), &v2(0.0, 0.0), 0.8, 10);
    assert!(matches!(r, Err(Error::Region(_))));
}

#[test]
fn rotation_identity_and_quarter_turn() {
    let c = box2(33);
    let region = BallRegion::new(v2(0.2, -0.1), 0.6);
    let id = make_rotation_conjugation(&c, &linalg::identity(), &region, 0.3).unwrap();
    for i in 0..c.node_count() {
        assert_eq!(id.forward(&c.node(i)), c.node(i));
    }
    let phi = make_rotation_conjugation(&c, &rot2(PI / 2.0), &region, 0.3).unwrap();
    let y = phi.forward(&v2(0.2 + 0.3, -0.1));
    assert!((y[0] - 0.2).abs() <= 1e-9 && (y[1] - (-0.1 + 0.3)).abs() <= 1e-9, "{y:?}");
    let j = fd(&phi, &region.center, 1e-5);
    assert!(max_entry_diff(&j, &rot2(PI / 2.0), 2) <= 1e-7);
}

#[test]
fn rotation_rejects_bad_matrices() {
    let c = box2(33);
    let region = BallRegion::new(v2(0.0, 0.0), 0.5);
    let skewed = linalg::matrix_from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]);
    assert!(matches!(make_rotation_conjugation(&c, &skewed, &region, 0.2), Err(Error::Construction(_))));
    let flip = linalg::matrix_from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
    assert!(matches!(make_rotation_conjugation(&c, &flip, &region, 0.2), Err(Error::Construction(_))));
}

#[test]
fn rotation_in_three_dimensions() {
    let c: C = Arc::new(ChartDomain::cube(3, -1.0, 1.0, 17, 0.0).unwrap());
    let k: Matrix<f64> = [[0.0, -0.4, 0.3], [0.4, 0.0, -0.8], [-0.3, 0.8, 0.0]];
    let w = linalg::exp_skew(&k, 3);
    let phi = make_rotation_conjugation(&c, &w, &BallRegion::new([0.0; 3], 0.4), 0.4).unwrap();
    let u = [0.1, -0.05, 0.2];
    let y = phi.forward(&u);
    let expect = linalg::mat_vec(&w, &u);
    assert!(linalg::norm(&linalg::sub(&y, &expect)) < 1e-12);
    for i in 0..c.node_count() {
        let x = c.node(i);
        assert!(linalg::norm(&linalg::sub(&phi.inverse(&phi.forward(&x)), &x)) < 1e-8);
        assert!(linalg::det(&phi.jacobian(&x), 3) > 0.0);
    }
}

#[test]
fn linear_blend_rejects_large_stretch() {
    let c = box2(33);
    let a = linalg::matrix_from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
    let r = make_linear_blend(&c, &a, &BallRegion::new(v2(0.0, 0.0), 0.3), 0.2);
    assert!(matches!(r, Err(Error::Construction(_))));
}

#[test]
fn compose_conventions() {
    let c = torus2(64);
    let bank = factory(&c);
    let id = Diffeo::identity(c.clone());
    for phi in &bank {
        let left = compose(&id, phi).unwrap();
        for i in 0..c.node_count() {
            let u = c.node(i);
            assert_eq!(left.forward(&u), phi.forward(&u));
        }
        let round = compose(phi, &phi.inverted()).unwrap();
        for i in 0..c.node_count() {
            let u = c.node(i);
            assert!(c.distance(&round.forward(&u), &u) <= phi.round_trip_tolerance());
        }
    }
    let (psi, phi) = (&bank[2], &bank[0]);
    let both = compose(psi, phi).unwrap();
    for i in (0..c.node_count()).step_by(5) {
        let u = c.node(i);
        assert_eq!(both.forward(&u), psi.forward(&phi.forward(&u)));
        assert!(max_entry_diff(&both.jacobian(&u), &fd(&both, &u, 1e-6), 2) <= 1e-5);
    }
}

#[test]
fn compose_needs_shared_chart() {
    let a = Diffeo::identity(torus2(16));
    let b = Diffeo::identity(torus2(32));
    assert!(matches!(compose(&a, &b), Err(Error::ChartMismatch(_))));
}

#[test]
fn spec_records_rebuild_the_same_map() {
    let c = torus2(32);
    for phi in factory(&c) {
        let spec = phi.spec();
        let json = serde_json::to_string(&spec).unwrap();
        let back: DiffeoSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let rebuilt = back.build(&c).unwrap();
        for i in 0..c.node_count() {
            let u = c.node(i);
            assert!(c.distance(&rebuilt.forward(&u), &phi.forward(&u)) < 1e-12, "{json}");
        }
    }
    let composed = compose(&factory(&c)[2], &compose(&factory(&c)[0], &factory(&c)[1]).unwrap()).unwrap();
    match composed.spec() {
        DiffeoSpec::Compose { parts } => {
            assert_eq!(parts.len(), 3);
            assert!(matches!(parts[0], DiffeoSpec::RotationConjugation { .. }));
            assert!(matches!(parts[1], DiffeoSpec::Contraction { .. }));
        }
        other => panic!("{other:?}"),
    }
}

fn shear_chart(n: usize) -> C {
    Arc::new(ChartDomain::cube(2, -1.0, 1.0, n, 0.1).unwrap())
}

fn shear(c: &C) -> VectorField<f64> {
    let spec = FieldSpec::Shear { center: vec![0.0, 0.0], slope: 0.5, plateau: 0.6, taper: 0.25 };
    spec.build(c).unwrap().as_vector().unwrap().clone()
}

#[test]
fn flowbox_of_constant_field_is_rigid() {
    let c = shear_chart(129);
    let dir = v2(0.6, 0.8);
    let f = VectorField::from_fn(c.clone(), |u| {
        let cut = 1.0 - diffeq::diffeo::smoothstep((linalg::norm(u) - 0.6) / 0.25);
        linalg::scale(1.5 * cut, &dir)
    })
    .unwrap();
    let m = v2(0.0, 0.0);
    let phi = flowbox_straighten(&f, &m, 0.2, 16).unwrap();
    let a = v2(0.05, -0.07);
    let b = v2(-0.1, 0.02);
    let (pa, pb) = (phi.forward(&a), phi.forward(&b));
    assert!((c.distance(&pa, &pb) - c.distance(&a, &b)).abs() < 1e-12);
    let j = phi.jacobian(&a);
    assert!((j[0][0] - 0.6).abs() < 1e-9 && (j[1][0] - 0.8).abs() < 1e-9);
    assert!(straightening_residual(&phi, &f, &m, 0.2).unwrap() <= 1e-6);
}

#[test]
fn flowbox_straightens_shear() {
    let c = shear_chart(257);
    let f = shear(&c);
    let m = v2(0.0, 0.0);
    let phi = flowbox_straighten(&f, &m, 0.2, 64).unwrap();
    let res = straightening_residual(&phi, &f, &m, 0.2).unwrap();
    assert!(res <= 1e-3, "{res:e}");
    for i in 0..c.node_count() {
        let u = c.node(i);
        assert!(c.distance(&phi.inverse(&phi.forward(&u)), &u) <= 1e-5);
    }
}

#[test]
fn flowbox_rejects_zero_fields() {
    let c = shear_chart(65);
    let f = VectorField::from_fn(c.clone(), |u| {
        let cut = 1.0 - diffeq::diffeo::smoothstep((linalg::norm(u) - 0.5) / 0.2);
        [cut * (u[0] - 0.1), cut * u[1], 0.0]
    })
    .unwrap();
    assert!(matches!(flowbox_straighten(&f, &v2(0.0, 0.0), 0.2, 16), Err(Error::DegenerateField(_))));
}

#[test]
fn perturbation_leaves_large_fields_alone() {
    let c = torus2(64);
    let f = VectorField::from_fn(c.clone(), |u| [1.0 + 0.2 * (2.0 * PI * u[0]).sin(), 0.3, 0.0]).unwrap();
    let u = BallRegion::new(v2(0.5, 0.5), 0.3);
    assert_eq!(perturb_away_from_zero(&f, 0.1, &u).unwrap(), f);
}

#[test]
fn perturbation_lifts_isolated_zero() {
    let c = torus2(128);
    let f = VectorField::from_fn(c.clone(), |u| {
        let (x, y) = (u[0] - 0.5, u[1] - 0.5);
        [x, -y, 0.0]
    })
    .unwrap();
    let u = BallRegion::new(v2(0.5, 0.5), 0.3);
    let eps = 0.01;
    let g = perturb_away_from_zero(&f, eps, &u).unwrap();
    let mask = u.node_mask(&c);
    let min = (0..c.node_count()).filter(|&i| mask[i]).map(|i| linalg::norm(&g.node_value(i))).fold(f64::MAX, f64::min);
    assert!(min > 0.0, "{min}");
    // ‖g - f‖_p <= 2ε ω(U)^{1/p} with the discrete measure of U.
    let w = c.quadrature_weights();
    let vol: f64 = (0..c.node_count()).filter(|&i| mask[i]).map(|i| w[i]).sum();
    for p in [1.0, 2.0, 3.0] {
        let d = diffeq::fields::field_axpy(1.0, &g.clone().into(), -1.0, &f.clone().into()).unwrap();
        assert!(d.lp_norm(p).unwrap() <= 2.0 * eps * vol.powf(1.0 / p) + 1e-15);
    }
}
