use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::flowbox::flowbox_with_spec;
use super::{
    compose, make_contraction, make_linear_blend, make_point_transport, make_rotation_conjugation, translation, Diffeo,
};
use crate::error::{Error, Result};
use crate::fields::{BallRegion, FieldSpec};
use crate::geometry::ChartDomain;
use crate::linalg;
use crate::scalar::Real;

/// Constructor name plus parameters; compositions are ordered lists with the
/// outermost map first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constructor", rename_all = "snake_case")]
pub enum DiffeoSpec {
    Identity,
    Translation { offset: Vec<f64> },
    Contraction { n: u32, eps: f64, center: Vec<f64>, #[serde(default = "one")] scale: f64 },
    PointTransport { x0: Vec<f64>, x1: Vec<f64>, center: Vec<f64>, rho: f64, steps: usize },
    RotationConjugation { w: Vec<Vec<f64>>, center: Vec<f64>, radius: f64, blend: f64 },
    LinearBlend { a: Vec<Vec<f64>>, center: Vec<f64>, radius: f64, blend: f64 },
    Flowbox { field: FieldSpec, m: Vec<f64>, radius: f64, steps: usize },
    Compose { parts: Vec<DiffeoSpec> },
    Inverse { of: Box<DiffeoSpec> },
}

fn one() -> f64 {
    1.0
}

fn point<T: Real>(chart: &ChartDomain<T>, xs: &[f64], name: &str) -> Result<linalg::Vector<T>> {
    if xs.len() != chart.dim() {
        return Err(Error::Precondition(format!("{name} has {} coordinates on a {}-D chart", xs.len(), chart.dim())));
    }
    Ok(linalg::vector_from_f64(xs))
}

fn matrix<T: Real>(chart: &ChartDomain<T>, rows: &[Vec<f64>], name: &str) -> Result<linalg::Matrix<T>> {
    let d = chart.dim();
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Precondition(format!("{name} must be {d}x{d}")));
    }
    Ok(linalg::matrix_from_rows(rows))
}

impl DiffeoSpec {
    pub fn build<T: Real>(&self, chart: &Arc<ChartDomain<T>>) -> Result<Diffeo<T>> {
        match self {
            Self::Identity => Ok(Diffeo::identity(chart.clone())),
            Self::Translation { offset } => translation(chart, &point(chart, offset, "offset")?),
            Self::Contraction { n, eps, center, scale } => {
                make_contraction(chart, *n, T::lit(*eps), &point(chart, center, "center")?, T::lit(*scale))
            }
            Self::PointTransport { x0, x1, center, rho, steps } => make_point_transport(
                chart,
                &point(chart, x0, "x0")?,
                &point(chart, x1, "x1")?,
                &point(chart, center, "center")?,
                T::lit(*rho),
                *steps,
            ),
            Self::RotationConjugation { w, center, radius, blend } => make_rotation_conjugation(
                chart,
                &matrix(chart, w, "w")?,
                &BallRegion::new(point(chart, center, "center")?, T::lit(*radius)),
                T::lit(*blend),
            ),
            Self::LinearBlend { a, center, radius, blend } => make_linear_blend(
                chart,
                &matrix(chart, a, "a")?,
                &BallRegion::new(point(chart, center, "center")?, T::lit(*radius)),
                T::lit(*blend),
            ),
            Self::Flowbox { field, m, radius, steps } => {
                let f = field.build(chart)?;
                let f = f.as_vector()?;
                flowbox_with_spec(f, &point(chart, m, "m")?, T::lit(*radius), *steps, field.clone())
            }
            Self::Compose { parts } => {
                let mut acc = Diffeo::identity(chart.clone());
                for (k, p) in parts.iter().rev().enumerate() {
                    let d = p.build(chart)?;
                    acc = if k == 0 { d } else { compose(&d, &acc)? };
                }
                Ok(acc)
            }
            Self::Inverse { of } => Ok(of.build(chart)?.inverted()),
        }
    }
}
