use std::f64::consts::PI;
use std::sync::Arc;

use diffeq::diffeo::{compose, make_contraction, make_rotation_conjugation, point_transport_min_steps, translation};
use diffeq::fields::{make_bump, make_vector_bump, BallRegion, InterpOrder};
use diffeq::linalg::{self, Vector};
use diffeq::transport::{
    check_contravariance, operator_norm_estimate, pullback, pullback_scalar, pullback_vector, FieldKind,
};
use diffeq::{ChartDomain, Diffeo, Error, Field, ScalarField, VectorField};

type C = Arc<ChartDomain<f64>>;

fn v2(x: f64, y: f64) -> Vector<f64> {
    [x, y, 0.0]
}

fn torus2(n: usize) -> C {
    Arc::new(ChartDomain::torus(2, 0.0, 1.0, n).unwrap())
}

fn smooth_scalar(c: &C) -> ScalarField<f64> {
    ScalarField::from_fn(c.clone(), |u| (2.0 * PI * u[0]).sin() * (2.0 * PI * u[1]).cos() + 0.3).unwrap()
}

fn smooth_vector(c: &C) -> VectorField<f64> {
    VectorField::from_fn(c.clone(), |u| {
        [(2.0 * PI * u[1]).sin() + 0.2, (2.0 * PI * (u[0] + u[1])).cos(), 0.0]
    })
    .unwrap()
}

#[test]
fn identity_action_is_bit_exact() {
    let c = torus2(64);
    let id = Diffeo::identity(c.clone());
    let s = smooth_scalar(&c);
    let v = smooth_vector(&c);
    assert!(pullback_scalar(&id, &s).unwrap().field.samples_equal(&Field::Scalar(s.clone())));
    assert!(pullback_vector(&id, &v).unwrap().field.samples_equal(&Field::Vector(v.clone())));
}

#[test]
fn circle_translation_reads_shifted_sample() {
    let c: C = Arc::new(ChartDomain::torus(1, 0.0, 1.0, 64).unwrap());
    let f = ScalarField::from_fn(c.clone(), |u| (2.0 * PI * u[0]).sin() + u[0].cos()).unwrap();
    let phi = translation(&c, &[0.25, 0.0, 0.0]).unwrap();
    let g = pullback_scalar(&phi, &f).unwrap().field;
    let g = g.as_scalar().unwrap();
    assert_eq!(g.values()[0], f.values()[16]);
    for i in 0..64 {
        assert_eq!(g.values()[i], f.values()[(i + 16) % 64]);
    }
}

#[test]
fn contraction_pullback_support_is_preimage_of_support() {
    let n = 257;
    let c: C = Arc::new(ChartDomain::cube(2, -2.0, 2.0, n, 0.1).unwrap());
    let h = c.spacing(0);
    let rf = 0.2;
    let f = make_bump(&c, &v2(0.0, 0.0), rf, 1.0).unwrap();
    let phi = make_contraction(&c, 4, 0.5, &v2(0.0, 0.0), 1.0).unwrap();
    let g = pullback_scalar(&phi, &f).unwrap().field;
    let g = g.as_scalar().unwrap();
    // Oracle: φ⁻¹(B(0, rf)) = B(0, 4 rf) because rf <= 1/4; the cubic stencil
    // reaches 2√2 source cells diagonally, magnified 4× by the pullback.
    let mut measured: f64 = 0.0;
    for i in 0..c.node_count() {
        if g.values()[i] != 0.0 {
            measured = measured.max(linalg::norm(&c.node(i)));
        }
    }
    let exact = 4.0 * rf;
    assert!(measured >= exact - h && measured <= 4.0 * (rf + 2.0 * 2f64.sqrt() * h) + 1e-12, "{measured} vs {exact}");
    // Forward-mapped support: every node whose image is well inside supp f is
    // nonzero, and no node whose image is beyond the stencil reach is.
    let hs = c.spacing(0);
    for i in 0..c.node_count() {
        let u = c.node(i);
        let r = linalg::norm(&phi.forward(&u));
        if r < rf - 2.0 * hs {
            assert!(g.values()[i] != 0.0, "{u:?}");
        }
        if r > rf + 2.0 * 2f64.sqrt() * hs {
            assert_eq!(g.values()[i], 0.0, "{u:?}");
        }
    }
}

#[test]
fn vector_pullback_divides_by_linear_factor() {
    // The inverse of a 1-D contraction with n = 2 is u ↦ c + 2(u - c) near c.
    let c: C = Arc::new(ChartDomain::torus(1, 0.0, 8.0, 512).unwrap());
    let phi = make_contraction(&c, 2, 0.5, &[4.0, 0.0, 0.0], 1.0).unwrap().inverted();
    let f = VectorField::new(c.clone(), vec![vec![3.0; 512]], InterpOrder::Cubic).unwrap();
    let g = pullback_vector(&phi, &f).unwrap().field;
    let g = g.as_vector().unwrap();
    for i in 0..512 {
        let x = c.node(i)[0];
        if (x - 4.0).abs() < 0.5 {
            assert!((g.components()[0][i] - 1.5).abs() < 1e-12);
        }
    }
}

#[test]
fn rotation_pullback_at_center() {
    let c = torus2(128);
    let w = linalg::matrix_from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
    let center = v2(0.5, 0.5);
    let phi = make_rotation_conjugation(&c, &w, &BallRegion::new(center, 0.15), 0.1).unwrap();
    let f = smooth_vector(&c);
    let g = pullback_vector(&phi, &f).unwrap().field;
    let g = g.as_vector().unwrap();
    let i = c.flat_index(&[64, 64, 0]);
    let expect = linalg::mat_vec(&linalg::transpose(&w), &f.node_value(i));
    let got = g.node_value(i);
    assert!(linalg::norm(&linalg::sub(&got, &expect)) < 1e-12);
}

#[test]
fn margin_violation_on_box() {
    let c: C = Arc::new(ChartDomain::cube(2, 0.0, 1.0, 33, 0.1).unwrap());
    let f = make_bump(&c, &v2(0.5, 0.5), 0.2, 1.0).unwrap();
    let phi = translation(&c, &v2(0.3, 0.0)).unwrap();
    assert!(matches!(pullback_scalar(&phi, &f), Err(Error::MarginViolation { clipped }) if clipped > 0));
}

#[test]
fn singular_jacobian_is_reported() {
    let c: C = Arc::new(ChartDomain::cube(2, -2.0, 2.0, 33, 0.1).unwrap());
    let f = make_vector_bump(&c, &v2(0.0, 0.0), 0.5, 1.0, &v2(1.0, 0.0)).unwrap();
    let phi = make_contraction(&c, 10_000_000, 0.5, &v2(0.0, 0.0), 1.0).unwrap();
    assert!(matches!(pullback_vector(&phi, &f), Err(Error::SingularJacobian { .. })));
}

#[test]
fn locality_when_supports_are_disjoint() {
    let c = torus2(128);
    let f = make_vector_bump(&c, &v2(0.2, 0.2), 0.1, 1.0, &v2(1.0, 1.0)).unwrap();
    let phi = make_contraction(&c, 3, 0.5, &v2(0.7, 0.7), 0.12).unwrap();
    let g = pullback_vector(&phi, &f).unwrap().field;
    assert!(g.samples_equal(&Field::Vector(f.clone())));
    let s = make_bump(&c, &v2(0.2, 0.2), 0.1, 1.0).unwrap();
    assert!(pullback_scalar(&phi, &s).unwrap().field.samples_equal(&Field::Scalar(s)));
}

#[test]
fn contravariance_identity_pair_is_zero() {
    let c = torus2(32);
    let id = Diffeo::identity(c.clone());
    let f: Field<f64> = smooth_vector(&c).into();
    assert_eq!(check_contravariance(&id, &id, &f, 2.0).unwrap(), 0.0);
}

#[test]
fn contravariance_residual_is_interpolation_error() {
    let mut prev = None;
    for n in [64usize, 128, 256] {
        let c = torus2(n);
        let psi = make_rotation_conjugation(
            &c,
            &linalg::matrix_from_rows(&[vec![0.6, -0.8], vec![0.8, 0.6]]),
            &BallRegion::new(v2(0.5, 0.5), 0.12),
            0.15,
        )
        .unwrap();
        let phi = point_transport_min_steps(&c, &v2(0.45, 0.5), &v2(0.55, 0.55), &v2(0.5, 0.5), 0.3, 64).unwrap();
        let fs: Field<f64> = smooth_scalar(&c).into();
        let fv: Field<f64> = smooth_vector(&c).into();
        let rs = check_contravariance(&psi, &phi, &fs, 2.0).unwrap();
        let rv = check_contravariance(&psi, &phi, &fv, 2.0).unwrap();
        if n == 256 {
            assert!(rs <= 5e-3 && rv <= 5e-3, "{rs:e} {rv:e}");
        }
        if let Some((ps, pv)) = prev {
            let (os, ov) = (f64::log2(ps / rs), f64::log2(pv / rv));
            assert!(os >= 2.0 && ov >= 2.0, "orders {os} {ov}");
        }
        prev = Some((rs, rv));
    }
}

#[test]
fn norm_estimate_identity() {
    let c = torus2(64);
    let id = Diffeo::identity(c.clone());
    let e = operator_norm_estimate(&id, 8, 2.0, FieldKind::Vector).unwrap();
    assert!((e.estimate - 1.0).abs() <= 1e-9);
    assert!((e.bound.unwrap() - 2f64.sqrt()).abs() <= 1e-12);
}

#[test]
fn norm_estimate_contraction_below_bound_and_grows_with_n() {
    let c = torus2(256);
    let phi = make_contraction(&c, 2, 0.5, &v2(0.5, 0.5), 0.15).unwrap();
    let e = operator_norm_estimate(&phi, 16, 2.0, FieldKind::Vector).unwrap();
    assert!(e.estimate <= e.bound.unwrap(), "{e:?}");
    let mut prev = 0.0;
    for n in [2u32, 3, 4] {
        let phi = make_contraction(&c, n, 0.5, &v2(0.5, 0.5), 0.15).unwrap();
        let e = operator_norm_estimate(&phi, 16, 2.0, FieldKind::Scalar).unwrap();
        assert!(e.bound.is_none());
        assert!(e.estimate > prev, "n={n}: {} <= {prev}", e.estimate);
        prev = e.estimate;
    }
}

#[test]
fn complex_fields_transport_partwise() {
    let c = torus2(64);
    let s = smooth_scalar(&c);
    let f = Field::Complex(s.clone(), s.map_values(|x| 2.0 * x));
    let phi = compose(
        &translation(&c, &v2(0.1, 0.0)).unwrap(),
        &make_contraction(&c, 2, 0.5, &v2(0.5, 0.5), 0.15).unwrap(),
    )
    .unwrap();
    let out = pullback(&phi, &f).unwrap().field;
    let re = pullback_scalar(&phi, &s).unwrap().field;
    match out {
        Field::Complex(a, b) => {
            assert_eq!(Field::Scalar(a.clone()), re);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((2.0 * x - y).abs() < 1e-12);
            }
        }
        _ => panic!(),
    }
}
