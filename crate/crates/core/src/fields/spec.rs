//! Named field generators for experiment configs and test banks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{bump_profile, make_bump, make_vector_bump, Field, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::geometry::ChartDomain;
use crate::linalg::{self, Vector};
use crate::scalar::Real;

/// A field generator and its parameters (chart units, `f64`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum FieldSpec {
    /// Scalar C^∞ bump.
    Bump { center: Vec<f64>, radius: f64, amplitude: f64 },
    /// Positive bump at `a` minus a bump at `b`; the supports must be disjoint.
    SignedBumps { a: Vec<f64>, b: Vec<f64>, radius: f64, amplitude: f64 },
    /// Scalar constant.
    Constant { value: f64 },
    /// Bump times a fixed direction.
    VectorBump { center: Vec<f64>, radius: f64, amplitude: f64, direction: Vec<f64> },
    /// Bump times the rotational field `(-(y - cy), x - cx)` (2-D only).
    SwirlBump { center: Vec<f64>, radius: f64, amplitude: f64 },
    /// `(1, slope·(x - cx))` inside `plateau`, tapered to zero over `taper`.
    Shear { center: Vec<f64>, slope: f64, plateau: f64, taper: f64 },
    /// `F(x) = x` (maps on ball grids).
    Identity,
    /// `F(x) = |x|·x`.
    RadialGain,
    /// `F(x) = x + strength·(-x₂, x₁)` (2-D only).
    RotationalPart { strength: f64 },
    /// Descriptive placeholder for fields not built from a generator.
    Named { label: String },
}

impl FieldSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Bump { center, radius, amplitude } => format!("bump(c={center:?},r={radius},a={amplitude})"),
            Self::SignedBumps { a, b, radius, amplitude } => {
                format!("signed_bumps(+{a:?},-{b:?},r={radius},a={amplitude})")
            }
            Self::Constant { value } => format!("constant({value})"),
            Self::VectorBump { center, radius, amplitude, direction } => {
                format!("vector_bump(c={center:?},r={radius},a={amplitude},dir={direction:?})")
            }
            Self::SwirlBump { center, radius, amplitude } => format!("swirl_bump(c={center:?},r={radius},a={amplitude})"),
            Self::Shear { slope, .. } => format!("shear(slope={slope})"),
            Self::Identity => "identity_map".into(),
            Self::RadialGain => "radial_gain".into(),
            Self::RotationalPart { strength } => format!("rotational_part({strength})"),
            Self::Named { label } => label.clone(),
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(
            self,
            Self::VectorBump { .. }
                | Self::SwirlBump { .. }
                | Self::Shear { .. }
                | Self::Identity
                | Self::RadialGain
                | Self::RotationalPart { .. }
        )
    }

    pub fn build<T: Real>(&self, chart: &Arc<ChartDomain<T>>) -> Result<Field<T>> {
        let v = |xs: &[f64]| -> Vector<T> { linalg::vector_from_f64(xs) };
        let dim = chart.dim();
        let need2d = |name: &str| -> Result<()> {
            if dim == 2 {
                Ok(())
            } else {
                Err(Error::Precondition(format!("{name} is defined for 2-D charts only")))
            }
        };
        Ok(match self {
            Self::Bump { center, radius, amplitude } => {
                make_bump(chart, &v(center), T::lit(*radius), T::lit(*amplitude))?.into()
            }
            Self::SignedBumps { a, b, radius, amplitude } => {
                let (ca, cb) = (v(a), v(b));
                if chart.distance(&ca, &cb) <= T::lit(2.0 * radius) {
                    return Err(Error::Precondition("signed bumps must have disjoint supports".into()));
                }
                let pa = make_bump(chart, &ca, T::lit(*radius), T::lit(*amplitude))?;
                let pb = make_bump(chart, &cb, T::lit(*radius), T::lit(*amplitude))?;
                let vals = pa.values().iter().zip(pb.values()).map(|(x, y)| *x - *y).collect();
                ScalarField::new(chart.clone(), vals, pa.interp())?.into()
            }
            Self::Constant { value } => ScalarField::constant(chart.clone(), T::lit(*value)).into(),
            Self::VectorBump { center, radius, amplitude, direction } => {
                make_vector_bump(chart, &v(center), T::lit(*radius), T::lit(*amplitude), &v(direction))?.into()
            }
            Self::SwirlBump { center, radius, amplitude } => {
                need2d("swirl_bump")?;
                let c = v(center);
                let r = T::lit(*radius);
                crate::fields::BallRegion::new(c, r).validate(chart)?;
                let amp = T::lit(*amplitude);
                let ch = chart.clone();
                VectorField::from_fn(chart.clone(), move |u| {
                    let d = ch.displacement(&c, u);
                    let s = amp * bump_profile(linalg::norm(&d) / r) / r;
                    [-s * d[1], s * d[0], T::zero()]
                })?
                .into()
            }
            Self::Shear { center, slope, plateau, taper } => {
                need2d("shear")?;
                let c = v(center);
                let (k, pl, tp) = (T::lit(*slope), T::lit(*plateau), T::lit(*taper));
                crate::fields::BallRegion::new(c, pl + tp).validate(chart)?;
                let ch = chart.clone();
                VectorField::from_fn(chart.clone(), move |u| {
                    let d = ch.displacement(&c, u);
                    let r = linalg::norm(&d);
                    let cut = T::one() - crate::diffeo::smoothstep((r - pl) / tp);
                    [cut, cut * k * d[0], T::zero()]
                })?
                .into()
            }
            Self::Identity => VectorField::from_fn(chart.clone(), |u| *u)?.into(),
            Self::RadialGain => VectorField::from_fn(chart.clone(), |u| linalg::scale(linalg::norm(u), u))?.into(),
            Self::RotationalPart { strength } => {
                need2d("rotational_part")?;
                let s = T::lit(*strength);
                VectorField::from_fn(chart.clone(), move |u| [u[0] - s * u[1], u[1] + s * u[0], T::zero()])?.into()
            }
            Self::Named { label } => {
                return Err(Error::Precondition(format!("field '{label}' has no generator")));
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shape() {
        let s = FieldSpec::Bump { center: vec![0.5, 0.5], radius: 0.2, amplitude: 1.0 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"generator":"bump","center":[0.5,0.5],"radius":0.2,"amplitude":1.0}"#);
        let back: FieldSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn signed_bumps_need_disjoint_supports() {
        let c = Arc::new(ChartDomain::<f64>::torus(2, 0.0, 1.0, 16).unwrap());
        let s = FieldSpec::SignedBumps { a: vec![0.3, 0.5], b: vec![0.5, 0.5], radius: 0.15, amplitude: 1.0 };
        assert!(s.build(&c).is_err());
        let s = FieldSpec::SignedBumps { a: vec![0.25, 0.5], b: vec![0.75, 0.5], radius: 0.15, amplitude: 1.0 };
        assert!(s.build(&c).is_ok());
    }
}
