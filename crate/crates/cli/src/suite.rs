//! The nine-row scoreboard run by the `suite` subcommand.

use std::sync::Arc;

use diffeq::analysis::{
    disjoint_union_check, inclusion_exclusion_reconstruct, localization_check, rotation_invariance_fit, RotationFitOptions,
};
use diffeq::diffeo::{flowbox_straighten, point_transport_min_steps, straightening_residual};
use diffeq::operators::{OperatorSpec, Rho};
use diffeq::transport::check_contravariance;
use diffeq::{BallRegion, ChartDomain, DiffeoSpec, Error, Field, FieldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{num, table};
use crate::run::{decay_curves, decay_passes, norm_rows, vitali_run, Ctx};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub check: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

fn row(check: &str, measured: f64, threshold: f64, pass: bool, detail: String) -> ScoreRow {
    ScoreRow { check: check.into(), measured, threshold, pass, detail }
}

fn torus(n: usize) -> Result<Arc<ChartDomain<f64>>, Error> {
    Ok(Arc::new(ChartDomain::torus(2, 0.0, 1.0, n)?))
}

fn ball(x: f64, y: f64, r: f64) -> BallRegion<f64> {
    BallRegion::from_f64(&[x, y], r)
}

/// Operators with `M(0) = 0` acting sample by sample, with a field each.
fn pointwise_cases(chart: &Arc<ChartDomain<f64>>) -> Result<Vec<(OperatorSpec, Field<f64>)>, Error> {
    let s = FieldSpec::SignedBumps { a: vec![0.32, 0.5], b: vec![0.68, 0.5], radius: 0.17, amplitude: 1.5 }.build(chart)?;
    let v = FieldSpec::SwirlBump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 4.0 }.build(chart)?;
    let mut out: Vec<(OperatorSpec, Field<f64>)> =
        [Rho::Relu, Rho::Tanh, Rho::Abs, Rho::Sin].into_iter().map(|r| (OperatorSpec::pointwise(r), s.clone())).collect();
    out.push((OperatorSpec::scalar_multiple(-1.5), v.clone()));
    out.push((OperatorSpec::vector_gain(Rho::Tanh), v));
    Ok(out)
}

pub fn localization_covers() -> Vec<BallRegion<f64>> {
    vec![ball(0.32, 0.5, 0.1), ball(0.5, 0.5, 0.12), ball(0.25, 0.3, 0.2), ball(0.7, 0.6, 0.05)]
}

pub fn disjoint_families() -> Vec<Vec<BallRegion<f64>>> {
    vec![
        vec![ball(0.3, 0.5, 0.1), ball(0.7, 0.5, 0.1)],
        vec![ball(0.32, 0.5, 0.08), ball(0.5, 0.5, 0.08), ball(0.68, 0.5, 0.08), ball(0.5, 0.2, 0.1)],
    ]
}

/// Covers of the supports of both the signed bumps and the swirl bump.
pub fn inclusion_exclusion_covers() -> Vec<Vec<BallRegion<f64>>> {
    let ring: Vec<BallRegion<f64>> = (0..6)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 6.0;
            ball(0.5 + 0.22 * a.cos(), 0.5 + 0.22 * a.sin(), 0.2)
        })
        .chain([ball(0.5, 0.5, 0.15)])
        .collect();
    vec![
        vec![ball(0.5, 0.5, 0.4)],
        vec![ball(0.35, 0.5, 0.35), ball(0.65, 0.5, 0.35)],
        vec![ball(0.3, 0.5, 0.3), ball(0.5, 0.5, 0.3), ball(0.7, 0.5, 0.3)],
        ring,
    ]
}

/// Largest value returned by each node-exact identity, over all cases.
pub fn identity_maxima(resolution: usize) -> Result<[f64; 3], Error> {
    let chart = torus(resolution)?;
    let mut worst = [0.0f64; 3];
    for (m, f) in pointwise_cases(&chart)? {
        for u in localization_covers() {
            worst[0] = worst[0].max(localization_check(&m, &f, &u, 2.0)?);
        }
        for fam in disjoint_families() {
            worst[1] = worst[1].max(disjoint_union_check(&m, &f, &fam, 2.0)?);
        }
        for cover in inclusion_exclusion_covers() {
            worst[2] = worst[2].max(inclusion_exclusion_reconstruct(&m, &f, &cover, 2.0)?);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContraRow {
    pub psi: String,
    pub phi: String,
    /// Residual at each resolution, coarse to fine (max over the scalar and vector field).
    pub residuals: Vec<f64>,
}

impl ContraRow {
    /// Observed order between the last two levels; infinite when the fine
    /// residual is at roundoff.
    pub fn order(&self) -> f64 {
        let k = self.residuals.len();
        if k < 2 {
            return f64::NAN;
        }
        let (a, b) = (self.residuals[k - 2], self.residuals[k - 1]);
        if b <= 1e-12 {
            f64::INFINITY
        } else {
            (a / b).log2()
        }
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    vec![rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

/// A random diffeomorphism of the unit torus of moderate distortion:
/// rotation conjugation, point transport, linear blend, contraction with
/// `n = 2`, or translation.
pub fn random_diffeo_spec(rng: &mut ChaCha8Rng) -> Result<DiffeoSpec, Error> {
    Ok(match rng.gen_range(0..5) {
        0 => {
            let a: f64 = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            DiffeoSpec::RotationConjugation {
                w: vec![vec![a.cos(), -a.sin()], vec![a.sin(), a.cos()]],
                center: uniform_point(rng, 0.3, 0.7),
                radius: rng.gen_range(0.06..0.12),
                blend: 0.15,
            }
        }
        1 => {
            let center = uniform_point(rng, 0.35, 0.65);
            let rho = 0.3;
            let at = |rng: &mut ChaCha8Rng| {
                let (t, r) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..0.4 * rho));
                vec![center[0] + r * t.cos(), center[1] + r * t.sin()]
            };
            let (x0, x1) = (at(rng), at(rng));
            let probe = Arc::new(ChartDomain::torus(2, 0.0, 1.0, 16)?);
            let v = |x: &[f64]| diffeq::linalg::vector_from_f64(x);
            point_transport_min_steps(&probe, &v(&x0), &v(&x1), &v(&center), rho, 256)?.spec()
        }
        2 => DiffeoSpec::LinearBlend {
            a: vec![
                vec![1.0 + rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)],
                vec![rng.gen_range(-0.1..0.1), 1.0 + rng.gen_range(-0.1..0.1)],
            ],
            center: uniform_point(rng, 0.35, 0.65),
            radius: 0.05,
            blend: 0.15,
        },
        3 => DiffeoSpec::Contraction {
            n: 2,
            eps: 0.5,
            center: uniform_point(rng, 0.35, 0.65),
            scale: rng.gen_range(0.12..0.18),
        },
        _ => DiffeoSpec::Translation { offset: uniform_point(rng, 0.0, 1.0) },
    })
}

/// `count` seeded (ψ, φ) pairs of [`random_diffeo_spec`] maps, measured at
/// every resolution in `levels`.
pub fn contravariance_pairs(ctx: &Ctx, count: usize, levels: &[usize]) -> Result<Vec<ContraRow>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let picks = (0..count)
        .map(|_| Ok((random_diffeo_spec(&mut rng)?, random_diffeo_spec(&mut rng)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut rows: Vec<ContraRow> = Vec::new();
    for (k, &n) in levels.iter().enumerate() {
        let chart = torus(n)?;
        let fs = FieldSpec::Bump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 1.2 }.build(&chart)?;
        let fv = FieldSpec::SwirlBump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 4.0 }.build(&chart)?;
        ctx.log(format!("contravariance pairs at {n}^2"));
        for (idx, (s_psi, s_phi)) in picks.iter().enumerate() {
            let psi = s_psi.build(&chart)?;
            let phi = s_phi.build(&chart)?;
            let r = check_contravariance(&psi, &phi, &fs, 2.0)?.max(check_contravariance(&psi, &phi, &fv, 2.0)?);
            if k == 0 {
                rows.push(ContraRow { psi: psi.label().into(), phi: phi.label().into(), residuals: vec![r] });
            } else {
                rows[idx].residuals.push(r);
            }
        }
    }
    Ok(rows)
}

fn shear_chart(resolution: usize) -> Result<Arc<ChartDomain<f64>>, Error> {
    Ok(Arc::new(ChartDomain::cube(2, -1.0, 1.0, resolution + 1, 0.1)?))
}

/// Straightening residual of the shear field at radius `r` and half of it.
pub fn flowbox_residuals(resolution: usize, steps: usize, r: f64) -> Result<(f64, f64), Error> {
    let chart = shear_chart(resolution)?;
    let f = FieldSpec::Shear { center: vec![0.0, 0.0], slope: 0.5, plateau: 0.6, taper: 0.25 }.build(&chart)?;
    let f = f.as_vector()?;
    let m = diffeq::linalg::zero();
    let mut out = [0.0; 2];
    for (k, rad) in [r, r / 2.0].into_iter().enumerate() {
        let phi = flowbox_straighten(f, &m, rad, steps)?;
        out[k] = straightening_residual(&phi, f, &m, rad)?;
    }
    Ok((out[0], out[1]))
}

pub struct RotationScores {
    /// Largest `|λ(r) − r|` over bins for `F(x) = |x|·x`.
    pub radial_error: f64,
    pub radial_orthogonal: f64,
    /// Violation of the rotational part without and with reflections.
    pub rotational_plain: f64,
    pub rotational_reflected: f64,
}

pub fn rotation_scores(resolution: usize, opts: &RotationFitOptions) -> Result<RotationScores, Error> {
    let chart = Arc::new(ChartDomain::cube(2, -1.25, 1.25, resolution, 0.0)?);
    let rg = FieldSpec::RadialGain.build(&chart)?;
    let fit = rotation_invariance_fit(rg.as_vector()?, opts)?;
    let radial_error = fit.bins.iter().map(|b| (b.lambda - b.r_mean).abs()).fold(0.0, f64::max);
    let rot = FieldSpec::RotationalPart { strength: 0.1 }.build(&chart)?;
    let plain = rotation_invariance_fit(rot.as_vector()?, &RotationFitOptions { reflections: false, ..opts.clone() })?;
    let refl = rotation_invariance_fit(rot.as_vector()?, &RotationFitOptions { reflections: true, ..opts.clone() })?;
    Ok(RotationScores {
        radial_error,
        radial_orthogonal: fit.orthogonal_residual,
        rotational_plain: plain.max_violation,
        rotational_reflected: refl.max_violation,
    })
}

/// Threshold a reflection-sampled violation must reach to count as detected.
pub const DETECTION_LEVEL: f64 = 0.05;

pub fn scoreboard(ctx: &Ctx) -> Result<Vec<ScoreRow>, Error> {
    let cfg = &ctx.cfg;
    let res = cfg.suite.resolution;
    let mut rows = Vec::new();

    let curves = decay_curves(ctx, cfg.decay.resolution)?;
    let worst = curves.iter().map(|c| c.worst_ratio()).fold(0.0, f64::max);
    let slopes: Vec<String> = curves.iter().map(|c| format!("d={} p={} slope {:.3}", c.dim, c.p, c.fitted_rate)).collect();
    rows.push(row(
        "contraction_decay",
        worst,
        cfg.decay.tolerance,
        decay_passes(ctx, &curves),
        format!("worst norm/bound over n={:?}; {}", cfg.decay.n_values, slopes.join(", ")),
    ));

    ctx.log("node-exact identities");
    let ids = identity_maxima(res)?;
    let names = ["localization", "disjoint_union", "inclusion_exclusion"];
    for (name, v) in names.iter().zip(ids) {
        rows.push(row(name, v, 0.0, v == 0.0, format!("max over pointwise kinds with M(0)=0 at {res}^2")));
    }

    let (vs, _) = vitali_run(ctx)?;
    rows.push(row(
        "local_vitali",
        vs.relative_error,
        cfg.vitali.eps_rel,
        vs.relative_error < cfg.vitali.eps_rel,
        format!("{} balls at {}^2 (cap {})", vs.balls, cfg.vitali.resolution, cfg.vitali.max_balls),
    ));

    ctx.log("rotation fit");
    let rot = rotation_scores(res, &cfg.suite.rotation)?;
    let radial = rot.radial_error.max(rot.radial_orthogonal);
    let detected = rot.rotational_reflected >= DETECTION_LEVEL;
    rows.push(row(
        "rotation_invariance_fit",
        radial,
        1e-3,
        radial <= 1e-3 && detected,
        format!(
            "rotational part violation {:.3e} without reflections, {:.3e} with",
            rot.rotational_plain, rot.rotational_reflected
        ),
    ));

    let norms = norm_rows(ctx, cfg.norm_bound.resolution)?;
    let ratio = norms.iter().map(|r| r.estimate / r.bound).fold(0.0, f64::max);
    rows.push(row(
        "pullback_norm_bound",
        ratio,
        cfg.norm_bound.slack,
        norms.iter().all(|r| r.passed()),
        format!("max estimate/bound over {} diffeos, {} trials each", norms.len(), cfg.norm_bound.trials),
    ));

    let pairs = contravariance_pairs(ctx, cfg.suite.contravariance_pairs, &[res / 2, res])?;
    let fine = pairs.iter().map(|p| *p.residuals.last().unwrap()).fold(0.0, f64::max);
    let order = pairs.iter().map(ContraRow::order).fold(f64::INFINITY, f64::min);
    rows.push(row(
        "contravariance",
        fine,
        5e-3,
        fine <= 5e-3 && order >= 2.0,
        format!("{} seeded pairs; min order {:.3} from {}^2 to {res}^2", pairs.len(), order, res / 2),
    ));

    ctx.log("flowbox");
    let (r_full, r_half) = flowbox_residuals(res, cfg.suite.flowbox_steps, 0.2)?;
    rows.push(row(
        "flowbox_straightening",
        r_full,
        1e-3,
        r_full <= 1e-3 && 2.0 * r_half <= r_full,
        format!("shear field, radius 0.2 and 0.1: {r_full:.3e}, {r_half:.3e}"),
    ));
    Ok(rows)
}

pub fn run_suite(ctx: &Ctx) -> Result<bool, Error> {
    let rows = scoreboard(ctx)?;
    write_scoreboard(ctx, &rows)?;
    if ctx.verbose {
        eprint!("{}", render(&rows));
    }
    Ok(rows.iter().all(|r| r.pass))
}

pub fn render(rows: &[ScoreRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.check.clone(),
                if r.pass { "PASS" } else { "FAIL" }.into(),
                format!("{:.4e}", r.measured),
                format!("{:e}", r.threshold),
                r.detail.clone(),
            ]
        })
        .collect();
    table(&["check", "status", "measured", "threshold", "detail"], &cells)
}

pub fn write_scoreboard(ctx: &Ctx, rows: &[ScoreRow]) -> Result<(), Error> {
    ctx.out.write_text("scoreboard.txt", &render(rows))?;
    ctx.out.write_jsonl("suite.jsonl", rows)?;
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.check.clone(), num(r.measured), num(r.threshold), r.pass.to_string(), r.detail.clone()])
        .collect();
    ctx.out.write_csv("suite.csv", &["check", "measured", "threshold", "pass", "detail"], &csv)
}
