//! Measurements: equivariance defects, falsification sweeps, contraction
//! decay, localization identities, Vitali packings, inclusion–exclusion
//! reconstruction and rotation-invariance fits.

mod bank;
mod decay;
mod rotation;
mod suite;
mod vitali;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bank::{diffeo_bank_specs, scalar_field_bank, vector_field_bank, BankLevel, SuiteBank};
pub use decay::{contraction_decay_test, fitted_slope, DecayCurve};
pub use rotation::{random_orthogonal, rotation_invariance_fit, RadialBin, RotationFit, RotationFitOptions};
pub use suite::{
    falsification_suite, falsification_suite_scalar, falsification_suite_vector, fit_lambda, LambdaFit, SuiteOutcome,
    Verdict, BASELINE_FACTOR, STABILITY_BAND,
};
pub use vitali::{bandlimit_ratio, vitali_approximate, VitaliPiece, VitaliResult};

use crate::diffeo::{make_point_transport, Diffeo};
use crate::error::{Error, Result};
use crate::fields::{field_axpy, BallRegion, Field, ScalarField};
use crate::geometry::ChartDomain;
use crate::operators::{apply, OperatorSpec};
use crate::scalar::Real;
use crate::transport::{pullback, TransportResult};

/// Floor for relative defects.
pub const REL_FLOOR: f64 = 1e-300;

/// One measured commutation defect `‖M L_φ f − L_φ M f‖_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub operator_label: String,
    pub diffeo_label: String,
    pub field_label: String,
    pub p: f64,
    pub defect_abs: f64,
    pub defect_rel: f64,
    pub grid: Vec<usize>,
    /// Interpolation-error estimate of the two pullbacks involved.
    pub interp_residual: f64,
    /// `interp_residual / ‖L_φ M f‖_p`, the noise level `defect_rel` is
    /// compared against.
    pub baseline_rel: f64,
}

/// `‖a − b‖_p` for fields of the same kind.
pub(crate) fn distance<T: Real>(a: &Field<T>, b: &Field<T>, p: T) -> Result<T> {
    field_axpy(T::one(), a, -T::one(), b)?.lp_norm(p)
}

/// Defect from a precomputed pullback of `f`.
pub(crate) fn defect_from_parts<T: Real>(
    m: &OperatorSpec,
    phi: &Diffeo<T>,
    f: &Field<T>,
    pulled_f: &TransportResult<T>,
    field_label: &str,
    p: T,
) -> Result<DefectReport> {
    let lhs = apply(m, &pulled_f.field)?;
    let mf = apply(m, f)?;
    let rhs = pullback(phi, &mf)?;
    let defect_abs = distance(&lhs, &rhs.field, p)?;
    let den = rhs.field.lp_norm(p)?;
    let res = pulled_f.interp_residual_p(p) + rhs.interp_residual_p(p);
    let rel = defect_abs.as_f64() / den.as_f64().max(REL_FLOOR);
    Ok(DefectReport {
        operator_label: m.label(),
        diffeo_label: phi.label().to_string(),
        field_label: field_label.to_string(),
        p: p.as_f64(),
        defect_abs: defect_abs.as_f64(),
        defect_rel: rel,
        grid: f.chart().resolution().to_vec(),
        interp_residual: res.as_f64(),
        baseline_rel: res.as_f64() / den.as_f64().max(REL_FLOOR),
    })
}

/// `‖M L_φ f − L_φ M f‖_p`, absolute and relative to `‖L_φ M f‖_p`.
pub fn equivariance_defect<T: Real>(
    m: &OperatorSpec,
    phi: &Diffeo<T>,
    f: &Field<T>,
    field_label: &str,
    p: T,
) -> Result<DefectReport> {
    let pulled = pullback(phi, f)?;
    defect_from_parts(m, phi, f, &pulled, field_label, p)
}

/// `‖M(1_U f) − 1_U M f‖_p`.
pub fn localization_check<T: Real>(m: &OperatorSpec, f: &Field<T>, u: &BallRegion<T>, p: T) -> Result<T> {
    let lhs = apply(m, &f.mask(u))?;
    let rhs = apply(m, f)?.mask(u);
    distance(&lhs, &rhs, p)
}

/// `‖M(Σ 1_{U_i} f) − Σ M(1_{U_i} f)‖_p` for pairwise disjoint closed balls.
pub fn disjoint_union_check<T: Real>(m: &OperatorSpec, f: &Field<T>, regions: &[BallRegion<T>], p: T) -> Result<T> {
    let chart = f.chart();
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if !a.disjoint_from(chart, b) {
                return Err(Error::Precondition(format!(
                    "regions overlap: centre distance {} <= {} + {}",
                    chart.distance(&a.center, &b.center),
                    a.radius,
                    b.radius
                )));
            }
        }
    }
    let Some((first, rest)) = regions.split_first() else {
        return Ok(T::zero());
    };
    let mut union = f.mask(first);
    let mut summed = apply(m, &union)?;
    for r in rest {
        let piece = f.mask(r);
        union = field_axpy(T::one(), &union, T::one(), &piece)?;
        summed = field_axpy(T::one(), &summed, T::one(), &apply(m, &piece)?)?;
    }
    distance(&apply(m, &union)?, &summed, p)
}

/// Largest supported cover for [`inclusion_exclusion_reconstruct`].
pub const MAX_COVER: usize = 12;

/// Reconstructs `M f` from `M` applied to `f` masked by every intersection of
/// cover balls (Poincaré's formula) and returns the `L^p` distance to `M f`.
///
/// Evaluated by the recursion
/// `R(U₁..Uₙ) = M(1_{U₁} f) + R(U₂..Uₙ) − R(U₁∩U₂, …, U₁∩Uₙ)`,
/// which expands to the signed sum over all intersections and keeps
/// pointwise reconstructions node-exact.
pub fn inclusion_exclusion_reconstruct<T: Real>(
    m: &OperatorSpec,
    f: &Field<T>,
    cover: &[BallRegion<T>],
    p: T,
) -> Result<T> {
    if cover.len() > MAX_COVER {
        return Err(Error::Precondition(format!("cover has {} balls; at most {MAX_COVER} supported", cover.len())));
    }
    let chart = f.chart();
    let masks: Vec<Vec<bool>> = cover.iter().map(|b| b.node_mask(chart)).collect();
    let mags = f.magnitudes();
    if let Some(i) = (0..chart.node_count()).find(|&i| mags[i] != T::zero() && !masks.iter().any(|mk| mk[i])) {
        return Err(Error::Precondition(format!(
            "cover misses the support of f at node {:?}",
            crate::linalg::to_f64_vec(&chart.node(i), chart.dim())
        )));
    }
    let zero_image = apply(m, &f.mask_nodes(&vec![false; chart.node_count()]))?;
    let rebuilt = recurse(m, f, &masks, &zero_image)?;
    match rebuilt {
        Some(r) => distance(&r, &apply(m, f)?, p),
        None => apply(m, f)?.lp_norm(p),
    }
}

fn recurse<T: Real>(m: &OperatorSpec, f: &Field<T>, masks: &[Vec<bool>], zero_image: &Field<T>) -> Result<Option<Field<T>>> {
    let Some((first, rest)) = masks.split_first() else {
        return Ok(None);
    };
    if masks.iter().all(|mk| !mk.iter().any(|&b| b)) {
        // Every term is M(0) and the signed count of nonempty subsets is 1.
        return Ok(Some(zero_image.clone()));
    }
    let head = apply(m, &f.mask_nodes(first))?;
    let tail = recurse(m, f, rest, zero_image)?;
    let inter: Vec<Vec<bool>> = rest.iter().map(|mk| mk.iter().zip(first).map(|(a, b)| *a && *b).collect()).collect();
    let overlap = recurse(m, f, &inter, zero_image)?;
    let mut acc = head;
    if let Some(t) = tail {
        acc = field_axpy(T::one(), &acc, T::one(), &t)?;
    }
    if let Some(o) = overlap {
        acc = field_axpy(T::one(), &acc, -T::one(), &o)?;
    }
    Ok(Some(acc))
}

/// Outcome of [`constant_image_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantImage {
    /// Largest deviation from a constant on `U` (one cell away from `∂U`),
    /// including the transport probes.
    pub deviation: f64,
    /// `M(c 1_U)` at the centre of `U`.
    pub constant: f64,
}

/// Checks that `M(c 1_U)` has the form `h(c, U) 1_U`: its spread inside `U`,
/// and its change under point transports supported in `U`.
pub fn constant_image_check<T: Real>(
    m: &OperatorSpec,
    chart: &Arc<ChartDomain<T>>,
    c: T,
    u: &BallRegion<T>,
    transports: usize,
) -> Result<ConstantImage> {
    u.validate(chart)?;
    let mask = u.node_mask(chart);
    let field: Field<T> = ScalarField::new(
        chart.clone(),
        mask.iter().map(|&k| if k { c } else { T::zero() }).collect(),
        Default::default(),
    )?
    .into();
    let out = apply(m, &field)?;
    let out_s = out.as_scalar()?;
    let h = (0..chart.dim()).map(|a| chart.spacing(a)).fold(T::zero(), T::max);
    let inner = BallRegion::new(u.center, u.radius - h);
    let vals: Vec<T> = (0..chart.node_count())
        .filter(|&i| inner.contains(chart, &chart.node(i)))
        .map(|i| out_s.values()[i])
        .collect();
    let hi = vals.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = vals.iter().copied().fold(T::infinity(), T::min);
    let mut dev = if vals.is_empty() { T::zero() } else { hi - lo };

    // Transports keep the cubic stencil (reach 2√d cells) inside U.
    let reach = h * T::lit(2.0 * (chart.dim() as f64).sqrt() + 1.0);
    let rho = u.radius - reach;
    if transports > 0 && rho > T::zero() {
        let dim = chart.dim();
        for k in 0..transports {
            let ang = T::lit(2.0 * std::f64::consts::PI * k as f64 / transports as f64);
            let mut x0 = u.center;
            let mut x1 = u.center;
            let step = rho * T::lit(0.3);
            x0[0] = x0[0] - step * ang.cos();
            x1[0] = x1[0] + step * ang.cos();
            if dim > 1 {
                x0[1] = x0[1] - step * ang.sin();
                x1[1] = x1[1] + step * ang.sin();
            }
            let phi = (1..=256)
                .find_map(|s| make_point_transport(chart, &x0, &x1, &u.center, rho, s).ok())
                .ok_or_else(|| Error::StepBudget("no admissible point transport inside U".into()))?;
            let moved = pullback(&phi, &out)?.field;
            let moved = moved.as_scalar()?;
            let probe = BallRegion::new(u.center, rho);
            for i in 0..chart.node_count() {
                if probe.contains(chart, &chart.node(i)) {
                    dev = dev.max((moved.values()[i] - out_s.values()[i]).abs());
                }
            }
        }
    }
    let centre = out_s.eval(&u.center)?;
    Ok(ConstantImage { deviation: dev.as_f64(), constant: centre.as_f64() })
}
