//! Fixed bank of test fields and diffeomorphisms on the unit 2-torus, sampled
//! at several refinement levels.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::diffeo::{Diffeo, DiffeoSpec};
use crate::error::Result;
use crate::fields::{Field, FieldSpec};
use crate::geometry::ChartDomain;
use crate::scalar::Real;
use crate::transport::{pullback, TransportResult};

fn rot(theta: f64) -> Vec<Vec<f64>> {
    vec![vec![theta.cos(), -theta.sin()], vec![theta.sin(), theta.cos()]]
}

/// Twelve compactly supported or periodic diffeomorphisms of `𝕋²`.
pub fn diffeo_bank_specs() -> Vec<DiffeoSpec> {
    let c = |x: f64, y: f64| vec![x, y];
    let contraction2 = DiffeoSpec::Contraction { n: 2, eps: 0.5, center: c(0.5, 0.5), scale: 0.15 };
    let transport1 =
        DiffeoSpec::PointTransport { x0: c(0.45, 0.5), x1: c(0.55, 0.52), center: c(0.5, 0.5), rho: 0.3, steps: 6 };
    let rotate = DiffeoSpec::RotationConjugation { w: rot(PI / 2.0), center: c(0.5, 0.5), radius: 0.1, blend: 0.15 };
    let stretch = DiffeoSpec::LinearBlend {
        a: vec![vec![1.25, 0.0], vec![0.0, 0.8]],
        center: c(0.5, 0.5),
        radius: 0.05,
        blend: 0.15,
    };
    vec![
        contraction2.clone(),
        DiffeoSpec::Contraction { n: 3, eps: 0.5, center: c(0.45, 0.55), scale: 0.13 },
        DiffeoSpec::Contraction { n: 4, eps: 0.5, center: c(0.55, 0.45), scale: 0.12 },
        transport1.clone(),
        DiffeoSpec::PointTransport { x0: c(0.6, 0.4), x1: c(0.5, 0.55), center: c(0.55, 0.5), rho: 0.3, steps: 10 },
        rotate.clone(),
        DiffeoSpec::RotationConjugation { w: rot(PI / 3.0), center: c(0.4, 0.6), radius: 0.08, blend: 0.15 },
        stretch.clone(),
        DiffeoSpec::LinearBlend {
            a: vec![vec![1.1, 0.15], vec![0.0, 0.9]],
            center: c(0.45, 0.5),
            radius: 0.05,
            blend: 0.15,
        },
        DiffeoSpec::Compose { parts: vec![rotate, contraction2] },
        DiffeoSpec::Compose { parts: vec![transport1, stretch] },
        DiffeoSpec::Translation { offset: c(0.1, 0.25) },
    ]
}

/// Smooth scalar fields: a wide bump, a narrow bump and a signed pair.
pub fn scalar_field_bank() -> Vec<FieldSpec> {
    vec![
        FieldSpec::Bump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 1.2 },
        FieldSpec::Bump { center: vec![0.45, 0.55], radius: 0.1, amplitude: 1.5 },
        FieldSpec::SignedBumps { a: vec![0.32, 0.5], b: vec![0.68, 0.5], radius: 0.17, amplitude: 1.5 },
    ]
}

/// Smooth vector fields: a directed bump and a swirl.
pub fn vector_field_bank() -> Vec<FieldSpec> {
    vec![
        FieldSpec::VectorBump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 1.5, direction: vec![0.8, 0.6] },
        FieldSpec::SwirlBump { center: vec![0.5, 0.5], radius: 0.3, amplitude: 4.0 },
    ]
}

/// One refinement level: built maps, fields and the pullbacks `L_φ f`.
pub struct BankLevel<T: Real> {
    pub chart: Arc<ChartDomain<T>>,
    pub diffeos: Vec<Diffeo<T>>,
    pub fields: Vec<(String, Field<T>)>,
    /// `pulled[d][f] = L_{φ_d} f`.
    pub pulled: Vec<Vec<TransportResult<T>>>,
}

/// A bank sampled at increasing resolutions.
pub struct SuiteBank<T: Real> {
    pub levels: Vec<BankLevel<T>>,
    pub diffeo_specs: Vec<DiffeoSpec>,
    pub field_specs: Vec<FieldSpec>,
}

impl<T: Real> SuiteBank<T> {
    /// Builds the bank on `template` re-gridded to each resolution in
    /// `resolutions`.
    pub fn build(
        template: &ChartDomain<T>,
        resolutions: &[usize],
        diffeo_specs: Vec<DiffeoSpec>,
        field_specs: Vec<FieldSpec>,
    ) -> Result<Self> {
        let mut levels = Vec::with_capacity(resolutions.len());
        for &n in resolutions {
            let chart = Arc::new(template.with_resolution(n)?);
            let diffeos = diffeo_specs.iter().map(|s| s.build(&chart)).collect::<Result<Vec<_>>>()?;
            let fields = field_specs
                .iter()
                .map(|s| Ok((s.label(), s.build(&chart)?)))
                .collect::<Result<Vec<_>>>()?;
            let pulled = diffeos
                .iter()
                .map(|phi| fields.iter().map(|(_, f)| pullback(phi, f)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            levels.push(BankLevel { chart, diffeos, fields, pulled });
        }
        Ok(Self { levels, diffeo_specs, field_specs })
    }

    /// Default scalar bank on the unit torus.
    pub fn scalar_default(resolutions: &[usize]) -> Result<Self> {
        let t = ChartDomain::torus(2, T::zero(), T::one(), 8)?;
        Self::build(&t, resolutions, diffeo_bank_specs(), scalar_field_bank())
    }

    /// Default vector bank on the unit torus.
    pub fn vector_default(resolutions: &[usize]) -> Result<Self> {
        let t = ChartDomain::torus(2, T::zero(), T::one(), 8)?;
        Self::build(&t, resolutions, diffeo_bank_specs(), vector_field_bank())
    }

    pub fn is_vector(&self) -> bool {
        self.levels.first().and_then(|l| l.fields.first()).map(|(_, f)| matches!(f, Field::Vector(_))).unwrap_or(false)
    }

    /// Number of (diffeo, field) pairs.
    pub fn pair_count(&self) -> usize {
        self.diffeo_specs.len() * self.field_specs.len()
    }
}
