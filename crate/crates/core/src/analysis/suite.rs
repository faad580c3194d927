//! Falsification sweeps over a [`SuiteBank`].

use serde::{Deserialize, Serialize};

use super::bank::SuiteBank;
use super::{defect_from_parts, DefectReport};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::operators::{apply, Accepts, OperatorSpec};
use crate::scalar::Real;

/// A defect counts as real when it exceeds this multiple of the
/// interpolation baseline.
pub const BASELINE_FACTOR: f64 = 10.0;
/// Relative defects below this are roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Allowed relative drift of a witness between refinement levels.
pub const STABILITY_BAND: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Falsified {
        /// Report at the finest level.
        witness: DefectReport,
        /// `defect_rel` of the witness pair at each level, coarse to fine.
        history: Vec<f64>,
        /// Whether consecutive levels agree within [`STABILITY_BAND`].
        stable: bool,
    },
}

impl Verdict {
    pub fn is_falsified(&self) -> bool {
        matches!(self, Self::Falsified { .. })
    }
}

/// Least-squares `λ` with `M g ≈ λ g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda: f64,
    /// `‖M g − λ g‖ / ‖M g‖` pooled over all fitted fields (0 when `M g = 0`).
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub operator: String,
    pub verdict: Verdict,
    /// Every report, pair-major, coarse to fine within a pair.
    pub reports: Vec<DefectReport>,
    pub pairs_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaFit>,
}

impl SuiteOutcome {
    /// Largest `defect_rel` at the finest level.
    pub fn max_defect_rel(&self) -> f64 {
        let fine = self.reports.last().map(|r| r.grid.clone());
        self.reports.iter().filter(|r| Some(&r.grid) == fine.as_ref()).map(|r| r.defect_rel).fold(0.0, f64::max)
    }
}

fn exceeds(r: &DefectReport) -> bool {
    r.defect_rel > (BASELINE_FACTOR * r.baseline_rel).max(ROUNDOFF_FLOOR)
}

/// Sweeps the first `budget` (diffeo, field) pairs of `bank` across its
/// levels. A pair falsifies equivariance when its defect exceeds
/// [`BASELINE_FACTOR`] times the interpolation baseline at two consecutive
/// levels.
pub fn falsification_suite<T: Real>(m: &OperatorSpec, bank: &SuiteBank<T>, budget: usize, p: T) -> Result<SuiteOutcome> {
    m.validate()?;
    if bank.levels.len() < 2 {
        return Err(Error::Precondition("falsification needs at least two refinement levels".into()));
    }
    if budget == 0 {
        return Err(Error::Precondition("budget must be positive".into()));
    }
    let vector = bank.is_vector();
    match (m.accepts(), vector) {
        (Accepts::Scalar, true) | (Accepts::Vector, false) => {
            return Err(Error::KindMismatch(format!(
                "{} does not accept {} fields",
                m.label(),
                if vector { "vector" } else { "scalar" }
            )))
        }
        _ => {}
    }
    let nf = bank.field_specs.len();
    let pairs = bank.pair_count().min(budget);
    let mut reports = Vec::with_capacity(pairs * bank.levels.len());
    let mut best: Option<(f64, usize)> = None;
    for k in 0..pairs {
        let (d, fi) = (k / nf, k % nf);
        let start = reports.len();
        for level in &bank.levels {
            let (label, f) = &level.fields[fi];
            reports.push(defect_from_parts(m, &level.diffeos[d], f, &level.pulled[d][fi], label, p)?);
        }
        let rs = &reports[start..];
        if rs.windows(2).any(|w| exceeds(&w[0]) && exceeds(&w[1])) {
            let fine = rs[rs.len() - 1].defect_rel;
            if best.is_none_or(|(b, _)| fine > b) {
                best = Some((fine, start));
            }
        }
    }
    let nl = bank.levels.len();
    let verdict = match best {
        None => Verdict::Consistent,
        Some((_, start)) => {
            let history: Vec<f64> = reports[start..start + nl].iter().map(|r| r.defect_rel).collect();
            let stable = history.windows(2).all(|w| (w[1] / w[0] - 1.0).abs() <= STABILITY_BAND);
            Verdict::Falsified { witness: reports[start + nl - 1].clone(), history, stable }
        }
    };
    Ok(SuiteOutcome { operator: m.label(), verdict, reports, pairs_evaluated: pairs, lambda: None })
}

/// [`falsification_suite`] on a scalar bank.
pub fn falsification_suite_scalar<T: Real>(m: &OperatorSpec, bank: &SuiteBank<T>, budget: usize, p: T) -> Result<SuiteOutcome> {
    if bank.is_vector() {
        return Err(Error::KindMismatch("scalar suite given a vector bank".into()));
    }
    falsification_suite(m, bank, budget, p)
}

/// [`falsification_suite`] on a vector bank; a consistent verdict carries the
/// fitted `λ` of `M ≈ λ·id` over the finest-level fields and their pullbacks.
pub fn falsification_suite_vector<T: Real>(m: &OperatorSpec, bank: &SuiteBank<T>, budget: usize, p: T) -> Result<SuiteOutcome> {
    if !bank.is_vector() {
        return Err(Error::KindMismatch("vector suite given a scalar bank".into()));
    }
    let mut out = falsification_suite(m, bank, budget, p)?;
    if !out.verdict.is_falsified() {
        let fine = bank.levels.last().expect("levels checked");
        let mut gs: Vec<&Field<T>> = fine.fields.iter().map(|(_, f)| f).collect();
        gs.extend(fine.pulled.iter().flatten().map(|t| &t.field));
        out.lambda = Some(fit_lambda(m, &gs)?);
    }
    Ok(out)
}

fn components<T: Real>(f: &Field<T>) -> Vec<&[T]> {
    match f {
        Field::Scalar(s) => vec![s.values()],
        Field::Vector(v) => v.components().iter().map(|c| c.as_slice()).collect(),
        Field::Complex(re, im) => vec![re.values(), im.values()],
    }
}

/// Fits `M g ≈ λ g` in the least-squares sense over the node samples of
/// every field in `gs`.
pub fn fit_lambda<T: Real>(m: &OperatorSpec, gs: &[&Field<T>]) -> Result<LambdaFit> {
    let images = gs.iter().map(|g| apply(m, g)).collect::<Result<Vec<_>>>()?;
    let (mut num, mut den) = (0.0, 0.0);
    for (g, mg) in gs.iter().zip(&images) {
        for (a, b) in components(g).into_iter().zip(components(mg)) {
            for (x, y) in a.iter().zip(b) {
                num += x.as_f64() * y.as_f64();
                den += x.as_f64() * x.as_f64();
            }
        }
    }
    if den == 0.0 {
        return Err(Error::Precondition("cannot fit lambda on zero fields".into()));
    }
    let lambda = num / den;
    let (mut res, mut tot) = (0.0, 0.0);
    for (g, mg) in gs.iter().zip(&images) {
        for (a, b) in components(g).into_iter().zip(components(mg)) {
            for (x, y) in a.iter().zip(b) {
                let r = y.as_f64() - lambda * x.as_f64();
                res += r * r;
                tot += y.as_f64() * y.as_f64();
            }
        }
    }
    let residual = if tot == 0.0 { res.sqrt() } else { (res / tot).sqrt() };
    Ok(LambdaFit { lambda, residual })
}
