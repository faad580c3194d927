use std::sync::Arc;

use diffeq::analysis::*;
use diffeq::diffeo::{make_contraction, DiffeoSpec};
use diffeq::fields::{make_bump, BallRegion, FieldSpec};
use diffeq::linalg::{self, Vector};
use diffeq::operators::{OperatorKind, OperatorSpec, Rho};
use diffeq::{ChartDomain, Diffeo, Error, Field, ScalarField};

type C = Arc<ChartDomain<f64>>;

fn v2(x: f64, y: f64) -> Vector<f64> {
    [x, y, 0.0]
}

fn torus2(n: usize) -> C {
    Arc::new(ChartDomain::torus(2, 0.0, 1.0, n).unwrap())
}

fn bump(c: &C, x: f64, y: f64, r: f64, a: f64) -> Field<f64> {
    make_bump(c, &v2(x, y), r, a).unwrap().into()
}

fn signed(c: &C) -> Field<f64> {
    FieldSpec::SignedBumps { a: vec![0.32, 0.5], b: vec![0.68, 0.5], radius: 0.17, amplitude: 1.5 }.build(c).unwrap()
}

fn zoo() -> Vec<OperatorSpec> {
    vec![
        OperatorSpec::pointwise(Rho::Relu),
        OperatorSpec::pointwise(Rho::Tanh),
        OperatorSpec::pointwise(Rho::Affine { a: 2.0, b: 0.5 }),
        OperatorSpec::blur(0.05),
        OperatorSpec::local_average(0.1),
        OperatorSpec::new(OperatorKind::SupOperator),
        OperatorSpec::new(OperatorKind::ExpPhase),
    ]
}

#[test]
fn identity_diffeo_gives_zero_defect() {
    let c = torus2(64);
    let id = Diffeo::identity(c.clone());
    let f = signed(&c);
    for m in zoo() {
        let r = equivariance_defect(&m, &id, &f, "signed", 2.0).unwrap();
        assert_eq!(r.defect_abs, 0.0, "{}", m.label());
        assert_eq!(r.defect_rel, 0.0);
        assert_eq!(r.grid, vec![64, 64]);
    }
}

fn contraction3(c: &C) -> Diffeo<f64> {
    make_contraction(c, 3, 0.5, &v2(0.45, 0.55), 0.13).unwrap()
}

#[test]
fn tanh_defect_vanishes_under_refinement() {
    let mut rels = Vec::new();
    for n in [128, 256, 512] {
        let c = torus2(n);
        let f = bump(&c, 0.45, 0.55, 0.1, 1.5);
        let r = equivariance_defect(&OperatorSpec::pointwise(Rho::Tanh), &contraction3(&c), &f, "bump", 2.0).unwrap();
        rels.push(r.defect_rel);
    }
    assert!(rels[1] <= 5e-3, "{rels:?}");
    for w in rels.windows(2) {
        assert!((w[0] / w[1]).log2() >= 2.0, "{rels:?}");
    }
}

#[test]
fn blur_defect_is_order_one_and_stable() {
    let mut rels = Vec::new();
    for n in [128, 256] {
        let c = torus2(n);
        let f = bump(&c, 0.45, 0.55, 0.1, 1.5);
        rels.push(equivariance_defect(&OperatorSpec::blur(0.05), &contraction3(&c), &f, "bump", 2.0).unwrap().defect_rel);
    }
    assert!(rels.iter().all(|&r| r >= 0.1), "{rels:?}");
    assert!((rels[1] / rels[0] - 1.0).abs() <= STABILITY_BAND);
}

fn small_scalar_bank() -> SuiteBank<f64> {
    SuiteBank::scalar_default(&[128, 256]).unwrap()
}

#[test]
fn scalar_suite_verdicts() {
    let bank = small_scalar_bank();
    let relu = falsification_suite_scalar(&OperatorSpec::pointwise(Rho::Relu), &bank, 1000, 2.0).unwrap();
    assert_eq!(relu.verdict, Verdict::Consistent);
    assert_eq!(relu.pairs_evaluated, 36);
    assert_eq!(relu.reports.len(), 72);

    let blur = falsification_suite_scalar(&OperatorSpec::blur(0.05), &bank, 1000, 2.0).unwrap();
    match blur.verdict {
        Verdict::Falsified { witness, history, stable } => {
            assert!(witness.defect_rel >= 0.1);
            assert_eq!(history.len(), 2);
            assert!(stable);
        }
        v => panic!("{v:?}"),
    }

    let sup = falsification_suite_scalar(&OperatorSpec::new(OperatorKind::SupOperator), &bank, 1000, 2.0).unwrap();
    assert_eq!(sup.verdict, Verdict::Consistent);

    let few = falsification_suite_scalar(&OperatorSpec::pointwise(Rho::Abs), &bank, 5, 2.0).unwrap();
    assert_eq!(few.pairs_evaluated, 5);
}

#[test]
fn suite_rejects_bad_inputs() {
    let one = SuiteBank::<f64>::scalar_default(&[64]).unwrap();
    assert!(matches!(
        falsification_suite_scalar(&OperatorSpec::pointwise(Rho::Relu), &one, 10, 2.0),
        Err(Error::Precondition(_))
    ));
    let t = ChartDomain::torus(2, 0.0, 1.0, 8).unwrap();
    let bank = SuiteBank::build(&t, &[32, 64], vec![DiffeoSpec::Translation { offset: vec![0.25, 0.0] }], scalar_field_bank())
        .unwrap();
    assert!(matches!(
        falsification_suite_scalar(&OperatorSpec::scalar_multiple(2.0), &bank, 10, 2.0),
        Err(Error::KindMismatch(_))
    ));
    assert!(matches!(
        falsification_suite_vector(&OperatorSpec::scalar_multiple(2.0), &bank, 10, 2.0),
        Err(Error::KindMismatch(_))
    ));
    assert!(matches!(
        falsification_suite_scalar(&OperatorSpec::pointwise(Rho::Relu), &bank, 0, 2.0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn grid_aligned_translation_is_exact_for_every_operator() {
    let t = ChartDomain::torus(2, 0.0, 1.0, 8).unwrap();
    let bank =
        SuiteBank::build(&t, &[64, 128], vec![DiffeoSpec::Translation { offset: vec![0.25, 0.125] }], scalar_field_bank())
            .unwrap();
    for m in [OperatorSpec::new(OperatorKind::SupOperator), OperatorSpec::blur(0.05), OperatorSpec::pointwise(Rho::Tanh)] {
        let out = falsification_suite_scalar(&m, &bank, 100, 2.0).unwrap();
        assert_eq!(out.verdict, Verdict::Consistent);
        assert!(out.reports.iter().all(|r| r.defect_rel < 1e-14), "{}", m.label());
    }
}

#[test]
fn vector_suite_fits_lambda_and_falsifies_gain() {
    let bank = SuiteBank::<f64>::vector_default(&[128, 256]).unwrap();
    for lambda in [-1.5, 0.0, 2.0] {
        let out = falsification_suite_vector(&OperatorSpec::scalar_multiple(lambda), &bank, 1000, 2.0).unwrap();
        assert_eq!(out.verdict, Verdict::Consistent);
        let fit = out.lambda.unwrap();
        assert!((fit.lambda - lambda).abs() <= 1e-6, "{fit:?}");
        assert!(fit.residual <= 1e-6);
    }
    let blur = falsification_suite_vector(&OperatorSpec::blur(0.05), &bank, 1000, 2.0).unwrap();
    assert!(blur.verdict.is_falsified());
    assert!(blur.lambda.is_none());

    let t = ChartDomain::torus(2, 0.0, 1.0, 8).unwrap();
    let stretch = DiffeoSpec::LinearBlend {
        a: vec![vec![1.25, 0.0], vec![0.0, 0.8]],
        center: vec![0.5, 0.5],
        radius: 0.05,
        blend: 0.15,
    };
    let bank = SuiteBank::build(&t, &[128, 256], vec![stretch], vector_field_bank()).unwrap();
    let gain = falsification_suite_vector(&OperatorSpec::vector_gain(Rho::Tanh), &bank, 100, 2.0).unwrap();
    match gain.verdict {
        Verdict::Falsified { witness, stable, .. } => {
            assert!(witness.diffeo_label.starts_with("linear_blend"));
            assert!(stable);
        }
        v => panic!("{v:?}"),
    }
}

#[test]
fn lambda_fit_is_global() {
    let c = torus2(64);
    let fs: Vec<Field<f64>> = vector_field_bank().iter().map(|s| s.build(&c).unwrap()).collect();
    let refs: Vec<&Field<f64>> = fs.iter().collect();
    let fit = fit_lambda(&OperatorSpec::scalar_multiple(-1.5), &refs).unwrap();
    assert!((fit.lambda + 1.5).abs() < 1e-12);
    let gain = fit_lambda(&OperatorSpec::vector_gain(Rho::Tanh), &refs).unwrap();
    assert!(gain.residual > 1e-3);
}

fn box_chart(d: usize, n: usize) -> C {
    Arc::new(ChartDomain::cube(d, -1.6, 1.6, n, 0.1).unwrap())
}

fn vector_bumps(c: &C) -> Vec<Field<f64>> {
    let d = c.dim();
    let mut dir = vec![0.0; d];
    dir[0] = 0.6;
    dir[d - 1] += 0.8;
    let mut out = vec![FieldSpec::VectorBump { center: vec![0.0; d], radius: 0.9, amplitude: 1.0, direction: dir }
        .build(c)
        .unwrap()];
    if d == 2 {
        out.push(FieldSpec::SwirlBump { center: vec![0.0; 2], radius: 0.9, amplitude: 2.0 }.build(c).unwrap());
    }
    out
}

#[test]
fn decay_identity_factor_keeps_norm() {
    let c = box_chart(2, 128);
    let f = &vector_bumps(&c)[0];
    let cur = contraction_decay_test(f, &linalg::zero(), &[1], 2.0, 0.5).unwrap();
    assert_eq!(cur.norms[0], cur.baseline);
    assert!(cur.fitted_rate.is_nan());
}

#[test]
fn decay_meets_bound_in_two_dimensions() {
    let c = box_chart(2, 512);
    let f = &vector_bumps(&c)[0];
    let cur = contraction_decay_test(f, &linalg::zero(), &[2, 4, 8], 2.0, 0.5).unwrap();
    assert!(cur.norms[1] <= 4f64.powi(-3) * cur.baseline * 1.05);
    assert!(cur.fitted_rate <= -3.0 + 0.3, "{}", cur.fitted_rate);
    assert!(cur.norms.iter().all(|&x| x > 0.0));
}

#[test]
fn decay_law_over_dimensions_and_exponents() {
    for (d, n, ns) in [(1usize, 512usize, vec![1u32, 2, 4, 8]), (2, 256, vec![1, 2, 4]), (3, 64, vec![1, 2, 4])] {
        let c = box_chart(d, n);
        for f in vector_bumps(&c) {
            for p in [1.0, 2.0] {
                let cur = contraction_decay_test(&f, &linalg::zero(), &ns, p, 0.5).unwrap();
                assert!(cur.worst_ratio() <= 1.05, "d={d} p={p} {:?} {:?}", cur.norms, cur.bounds);
                assert!(cur.fitted_rate <= -(d as f64 + 1.0) + 0.3, "d={d} p={p} {}", cur.fitted_rate);
            }
        }
    }
}

#[test]
fn decay_rejects_under_resolution_and_bad_factors() {
    let c = box_chart(2, 64);
    let f = &vector_bumps(&c)[0];
    assert!(matches!(contraction_decay_test(f, &linalg::zero(), &[2, 4, 8], 2.0, 0.5), Err(Error::UnderResolved(_))));
    assert!(matches!(contraction_decay_test(f, &linalg::zero(), &[2, 2], 2.0, 0.5), Err(Error::Precondition(_))));
}

#[test]
fn localization_identities() {
    let c = torus2(128);
    let f = signed(&c);
    let u = BallRegion::from_f64(&[0.35, 0.5], 0.12);
    for rho in [Rho::Relu, Rho::Tanh, Rho::Abs, Rho::Sin] {
        assert_eq!(localization_check(&OperatorSpec::pointwise(rho), &f, &u, 2.0).unwrap(), 0.0);
    }
    let v = vector_field_bank()[1].build(&c).unwrap();
    assert_eq!(localization_check(&OperatorSpec::scalar_multiple(-1.5), &v, &u, 2.0).unwrap(), 0.0);

    let g = bump(&c, 0.5, 0.5, 0.2, 1.0);
    let straddle = BallRegion::from_f64(&[0.62, 0.5], 0.12);
    let val = localization_check(&OperatorSpec::blur(0.05), &g, &straddle, 2.0).unwrap();
    assert!(val >= 0.05 * g.lp_norm(2.0).unwrap(), "{val}");
}

#[test]
fn disjoint_union_identities() {
    let c = torus2(128);
    let f = signed(&c);
    let balls = [
        BallRegion::from_f64(&[0.3, 0.5], 0.1),
        BallRegion::from_f64(&[0.7, 0.5], 0.1),
        BallRegion::from_f64(&[0.5, 0.8], 0.05),
    ];
    for rho in [Rho::Relu, Rho::Tanh, Rho::Sin] {
        assert_eq!(disjoint_union_check(&OperatorSpec::pointwise(rho), &f, &balls, 2.0).unwrap(), 0.0);
    }
    assert_eq!(disjoint_union_check(&OperatorSpec::blur(0.05), &f, &balls[..1], 2.0).unwrap(), 0.0);
    let close = [BallRegion::from_f64(&[0.4, 0.5], 0.08), BallRegion::from_f64(&[0.6, 0.5], 0.08)];
    assert!(disjoint_union_check(&OperatorSpec::blur(0.05), &bump(&c, 0.5, 0.5, 0.2, 1.0), &close, 2.0).unwrap() > 0.0);
    let overlap = [BallRegion::from_f64(&[0.4, 0.5], 0.1), BallRegion::from_f64(&[0.55, 0.5], 0.1)];
    assert!(matches!(
        disjoint_union_check(&OperatorSpec::pointwise(Rho::Relu), &f, &overlap, 2.0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn inclusion_exclusion_identities() {
    let c = torus2(128);
    let f = bump(&c, 0.5, 0.5, 0.2, 1.2);
    let relu = OperatorSpec::pointwise(Rho::Relu);
    let whole = [BallRegion::from_f64(&[0.5, 0.5], 0.25)];
    assert_eq!(inclusion_exclusion_reconstruct(&relu, &f, &whole, 2.0).unwrap(), 0.0);
    let two = [BallRegion::from_f64(&[0.4, 0.5], 0.23), BallRegion::from_f64(&[0.6, 0.5], 0.23)];
    for rho in [Rho::Relu, Rho::Tanh, Rho::Sin, Rho::Abs] {
        assert_eq!(inclusion_exclusion_reconstruct(&OperatorSpec::pointwise(rho), &f, &two, 2.0).unwrap(), 0.0);
    }
    assert!(inclusion_exclusion_reconstruct(&OperatorSpec::blur(0.05), &f, &two, 2.0).unwrap() > 0.0);

    let many: Vec<BallRegion<f64>> = (0..7)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 7.0;
            BallRegion::from_f64(&[0.5 + 0.12 * a.cos(), 0.5 + 0.12 * a.sin()], 0.17)
        })
        .chain([BallRegion::from_f64(&[0.5, 0.5], 0.1)])
        .collect();
    assert_eq!(inclusion_exclusion_reconstruct(&OperatorSpec::pointwise(Rho::Tanh), &f, &many, 2.0).unwrap(), 0.0);
    let affine = OperatorSpec::pointwise(Rho::Affine { a: 0.5, b: 1.0 });
    assert!(inclusion_exclusion_reconstruct(&affine, &f, &many, 2.0).unwrap() <= 1e-12);

    let thirteen = vec![BallRegion::from_f64(&[0.5, 0.5], 0.3); 13];
    assert!(matches!(inclusion_exclusion_reconstruct(&relu, &f, &thirteen, 2.0), Err(Error::Precondition(_))));
    let short = [BallRegion::from_f64(&[0.4, 0.5], 0.1)];
    assert!(matches!(inclusion_exclusion_reconstruct(&relu, &f, &short, 2.0), Err(Error::Precondition(_))));
}

#[test]
fn vitali_trivial_cases() {
    let c = torus2(128);
    let u = BallRegion::from_f64(&[0.5, 0.5], 0.3);
    let k = ScalarField::constant(c.clone(), 0.7);
    let r = vitali_approximate(&k, &u, 1e-6, 10, 2.0).unwrap();
    assert_eq!(r.pieces.len(), 1);
    assert_eq!(r.pieces[0].radius, 0.3);
    assert_eq!(r.achieved_error, 0.0);

    let f = make_bump(&c, &v2(0.5, 0.5), 0.2, 1.0).unwrap();
    let norm = Field::from(f.clone()).mask(&u).lp_norm(2.0).unwrap();
    let r = vitali_approximate(&f, &u, norm * 1.01, 10, 2.0).unwrap();
    assert!(r.pieces.is_empty());
    assert!((r.achieved_error - norm).abs() < 1e-12);
}

#[test]
fn vitali_pieces_are_disjoint_and_measured() {
    let c = torus2(256);
    let u = BallRegion::from_f64(&[0.5, 0.5], 0.15);
    let f = make_bump(&c, &v2(0.5, 0.5), 0.1, 1.0).unwrap();
    let norm = Field::from(f.clone()).mask(&u).lp_norm(2.0).unwrap();
    let r = vitali_approximate(&f, &u, 0.1 * norm, 4000, 2.0).unwrap();
    assert!(r.achieved_error < 0.1 * norm);
    let balls: Vec<BallRegion<f64>> = r.pieces.iter().map(|p| BallRegion::from_f64(&p.center, p.radius)).collect();
    for (i, a) in balls.iter().enumerate() {
        assert!(c.distance(&a.center, &u.center) + a.radius <= u.radius + 1e-12);
        for b in &balls[i + 1..] {
            assert!(a.disjoint_from(&c, b));
        }
    }
    let mut approx = vec![0.0; c.node_count()];
    for (b, p) in balls.iter().zip(&r.pieces) {
        for (i, m) in b.node_mask(&c).into_iter().enumerate() {
            if m {
                approx[i] += p.value;
            }
        }
    }
    let g: Field<f64> = ScalarField::new(c.clone(), approx, Default::default()).unwrap().into();
    let target = Field::from(f).mask(&u);
    let err = diffeq::fields::field_axpy(1.0, &g, -1.0, &target).unwrap().lp_norm(2.0).unwrap();
    assert!((err - r.achieved_error).abs() <= 1e-9 * (1.0 + err));
}

#[test]
fn vitali_budget_and_bandlimit_errors() {
    let c = torus2(128);
    let u = BallRegion::from_f64(&[0.5, 0.5], 0.3);
    let f = make_bump(&c, &v2(0.5, 0.5), 0.25, 1.0).unwrap();
    match vitali_approximate(&f, &u, 1e-4, 5, 2.0) {
        Err(Error::Budget { balls, best }) => {
            assert_eq!(balls, 5);
            assert!(best > 1e-4);
        }
        other => panic!("{other:?}"),
    }
    let noise = ScalarField::from_fn(c.clone(), |x| ((x[0] * 127.0).round() as i64 % 2) as f64).unwrap();
    assert!(bandlimit_ratio(&noise) > 0.01);
    assert!(matches!(vitali_approximate(&noise, &u, 1e-3, 100, 2.0), Err(Error::Precondition(_))));
}

fn ball_chart() -> C {
    Arc::new(ChartDomain::cube(2, -1.25, 1.25, 256, 0.0).unwrap())
}

#[test]
fn rotation_fit_identity_and_radial_gain() {
    let c = ball_chart();
    let id = FieldSpec::Identity.build(&c).unwrap();
    let fit = rotation_invariance_fit(id.as_vector().unwrap(), &RotationFitOptions::default()).unwrap();
    assert!(fit.max_violation <= 1e-10);
    assert!(fit.bins.iter().all(|b| (b.lambda - 1.0).abs() <= 1e-12));
    assert_eq!(fit.bins.len(), 32);
    assert!(fit.bins.iter().all(|b| b.count >= 20));

    let rg = FieldSpec::RadialGain.build(&c).unwrap();
    let fit = rotation_invariance_fit(rg.as_vector().unwrap(), &RotationFitOptions::default()).unwrap();
    assert!(fit.bins.iter().all(|b| (b.lambda - b.r_mean).abs() <= 1e-3));
    assert!(fit.orthogonal_residual <= 1e-3);
    assert!(fit.max_violation <= 1e-3);
}

#[test]
fn rotation_fit_needs_reflections_to_expose_rotational_part() {
    let c = ball_chart();
    let f = FieldSpec::RotationalPart { strength: 0.1 }.build(&c).unwrap();
    let f = f.as_vector().unwrap();
    let rot = rotation_invariance_fit(f, &RotationFitOptions::default()).unwrap();
    assert!(rot.max_violation <= 1e-10);
    assert!((rot.orthogonal_residual - 0.1).abs() <= 0.01);
    let refl = rotation_invariance_fit(f, &RotationFitOptions { reflections: true, ..Default::default() }).unwrap();
    assert!(refl.max_violation >= 0.05);
}

#[test]
fn rotation_fit_flags_sparse_bins() {
    let c: C = Arc::new(ChartDomain::cube(2, -1.25, 1.25, 64, 0.0).unwrap());
    let f = FieldSpec::Identity.build(&c).unwrap();
    assert!(matches!(
        rotation_invariance_fit(f.as_vector().unwrap(), &RotationFitOptions::default()),
        Err(Error::UnderResolved(_))
    ));
}

#[test]
fn sampled_orthogonal_matrices() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for d in 2..=3 {
        for proper in [true, false] {
            let w: linalg::Matrix<f64> = random_orthogonal(d, &mut rng, proper);
            assert!(linalg::orthogonality_defect(&w, d) < 1e-12);
            assert_eq!(linalg::det(&w, d) > 0.0, proper);
        }
    }
}

#[test]
fn constant_images() {
    let c = torus2(128);
    let u = BallRegion::from_f64(&[0.5, 0.5], 0.2);
    let tanh = OperatorSpec::pointwise(Rho::Tanh);
    let r = constant_image_check(&tanh, &c, 1.0, &u, 3).unwrap();
    assert_eq!(r.deviation, 0.0);
    assert_eq!(r.constant, 1f64.tanh());
    let z = constant_image_check(&tanh, &c, 0.0, &u, 3).unwrap();
    assert_eq!((z.deviation, z.constant), (0.0, 0.0));
    let b = constant_image_check(&OperatorSpec::blur(0.05), &c, 1.0, &u, 3).unwrap();
    assert!(b.deviation > 0.1, "{b:?}");
}
