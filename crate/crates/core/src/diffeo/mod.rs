//! Compactly supported diffeomorphisms of a chart: contractions, point
//! transports, blended rotations and stretches, translations, flowbox
//! straightenings, and their compositions and inverses.

mod flowbox;
mod maps;
mod profile;
mod spec;

use std::fmt;
use std::sync::Arc;

pub use flowbox::{flowbox_straighten, perturb_away_from_zero, straightening_residual};
pub use maps::{
    make_contraction, make_linear_blend, make_point_transport, make_rotation_conjugation, translation,
    point_transport_min_steps, BUMP_SLOPE_MAX,
};
pub use profile::{smoothstep, smoothstep_derivative, TransitionProfile};
pub use spec::DiffeoSpec;

use crate::error::{Error, Result};
use crate::fields::BallRegion;
use crate::geometry::ChartDomain;
use crate::linalg::{self, Matrix, Vector};
use crate::scalar::Real;

/// Where a diffeomorphism may differ from the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Support<T> {
    Empty,
    Ball(BallRegion<T>),
    Global,
}

impl<T: Real> Support<T> {
    /// Whether `u` lies outside the support (so the map fixes it).
    #[inline]
    pub fn excludes(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> bool {
        match self {
            Support::Empty => true,
            Support::Ball(b) => !b.contains(chart, u),
            Support::Global => false,
        }
    }

    /// Smallest ball containing both supports (`Global` when it would wrap).
    pub fn union(&self, other: &Self, chart: &ChartDomain<T>) -> Self {
        match (self, other) {
            (Support::Empty, s) | (s, Support::Empty) => *s,
            (Support::Global, _) | (_, Support::Global) => Support::Global,
            (Support::Ball(a), Support::Ball(b)) => {
                let d = chart.displacement(&a.center, &b.center);
                let dist = linalg::norm(&d);
                if dist + b.radius <= a.radius {
                    return Support::Ball(*a);
                }
                if dist + a.radius <= b.radius {
                    return Support::Ball(*b);
                }
                let r = (dist + a.radius + b.radius) / T::lit(2.0);
                let c = linalg::add(&a.center, &linalg::scale((r - a.radius) / dist, &d));
                if chart.is_torus() && !chart.ball_fits(&c, r) {
                    Support::Global
                } else {
                    Support::Ball(BallRegion::new(c, r))
                }
            }
        }
    }
}

/// The map itself; [`Diffeo`] adds the support guard and bookkeeping.
pub(crate) trait MapKernel<T: Real>: Send + Sync {
    fn forward(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T>;
    fn inverse(&self, chart: &ChartDomain<T>, v: &Vector<T>) -> Vector<T>;
    /// Analytic Jacobian, when available.
    fn jacobian(&self, _chart: &ChartDomain<T>, _u: &Vector<T>) -> Option<Matrix<T>> {
        None
    }
    fn spec(&self) -> DiffeoSpec;
    fn numeric_inverse(&self) -> bool {
        false
    }
}

/// An orientation-preserving diffeomorphism of a chart.
#[derive(Clone)]
pub struct Diffeo<T: Real> {
    chart: Arc<ChartDomain<T>>,
    kernel: Arc<dyn MapKernel<T>>,
    support: Support<T>,
    label: String,
}

impl<T: Real> fmt::Debug for Diffeo<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeo").field("label", &self.label).field("support", &self.support).finish()
    }
}

impl<T: Real> Diffeo<T> {
    pub(crate) fn from_kernel(
        chart: Arc<ChartDomain<T>>,
        kernel: impl MapKernel<T> + 'static,
        support: Support<T>,
        label: String,
    ) -> Self {
        Self { chart, kernel: Arc::new(kernel), support, label }
    }

    pub fn identity(chart: Arc<ChartDomain<T>>) -> Self {
        Self::from_kernel(chart, IdentityMap, Support::Empty, "identity".into())
    }

    pub fn chart(&self) -> &Arc<ChartDomain<T>> {
        &self.chart
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Parameter record for serialization.
    pub fn spec(&self) -> DiffeoSpec {
        self.kernel.spec()
    }

    pub fn has_numeric_inverse(&self) -> bool {
        self.kernel.numeric_inverse()
    }

    /// Round-trip tolerance appropriate for this map's inverse.
    pub fn round_trip_tolerance(&self) -> f64 {
        if self.has_numeric_inverse() {
            1e-5
        } else {
            1e-8
        }
    }

    #[inline]
    pub fn forward(&self, u: &Vector<T>) -> Vector<T> {
        if self.support.excludes(&self.chart, u) {
            *u
        } else {
            self.kernel.forward(&self.chart, u)
        }
    }

    #[inline]
    pub fn inverse(&self, v: &Vector<T>) -> Vector<T> {
        if self.support.excludes(&self.chart, v) {
            *v
        } else {
            self.kernel.inverse(&self.chart, v)
        }
    }

    /// Jacobian `dφ(u)`: analytic when available, else central differences
    /// with step equal to half the grid spacing.
    pub fn jacobian(&self, u: &Vector<T>) -> Matrix<T> {
        if self.support.excludes(&self.chart, u) {
            return linalg::identity();
        }
        match self.kernel.jacobian(&self.chart, u) {
            Some(j) => j,
            None => self.fd_jacobian(u),
        }
    }

    /// Central-difference Jacobian of the forward map.
    pub fn fd_jacobian(&self, u: &Vector<T>) -> Matrix<T> {
        let h = self.chart.min_spacing() / T::lit(2.0);
        fd_jacobian(&self.chart, |x| self.forward(x), u, h)
    }

    /// `ψ ∘ φ` with `self = ψ`.
    pub fn after(&self, phi: &Diffeo<T>) -> Result<Diffeo<T>> {
        compose(self, phi)
    }

    /// The inverse map as a diffeomorphism.
    pub fn inverted(&self) -> Diffeo<T> {
        Self::from_kernel(
            self.chart.clone(),
            InverseMap(self.clone()),
            self.support,
            format!("inverse({})", self.label),
        )
    }
}

/// `compose(ψ, φ).forward(u) = ψ.forward(φ.forward(u))`.
pub fn compose<T: Real>(psi: &Diffeo<T>, phi: &Diffeo<T>) -> Result<Diffeo<T>> {
    if psi.chart != phi.chart {
        return Err(Error::ChartMismatch(format!("{:?} vs {:?}", psi.chart, phi.chart)));
    }
    let support = psi.support.union(&phi.support, &psi.chart);
    let label = format!("{}∘{}", psi.label, phi.label);
    Ok(Diffeo::from_kernel(psi.chart.clone(), ComposeMap { psi: psi.clone(), phi: phi.clone() }, support, label))
}

/// Central differences of `f` at `u` with step `h`, columns = partials.
pub(crate) fn fd_jacobian<T: Real>(
    chart: &ChartDomain<T>,
    f: impl Fn(&Vector<T>) -> Vector<T>,
    u: &Vector<T>,
    h: T,
) -> Matrix<T> {
    let dim = chart.dim();
    let mut j = linalg::identity();
    for b in 0..dim {
        let mut up = *u;
        let mut dn = *u;
        up[b] = up[b] + h;
        dn[b] = dn[b] - h;
        let d = chart.displacement(&f(&dn), &f(&up));
        for a in 0..dim {
            j[a][b] = d[a] / (h + h);
        }
    }
    j
}

/// Damped Newton solve of `f(x) = v` (minimal-image residual).
pub(crate) fn newton_solve<T: Real>(
    chart: &ChartDomain<T>,
    f: impl Fn(&Vector<T>) -> Vector<T>,
    jac: impl Fn(&Vector<T>) -> Matrix<T>,
    v: &Vector<T>,
    x0: Vector<T>,
    tol: T,
    max_iter: usize,
) -> Vector<T> {
    let dim = chart.dim();
    let mut x = x0;
    let mut r = chart.displacement(v, &f(&x));
    let mut rn = linalg::norm(&r);
    for _ in 0..max_iter {
        if rn <= tol {
            break;
        }
        let Some(step) = linalg::solve(&jac(&x), &r, dim) else { break };
        let mut t = T::one();
        let mut improved = false;
        for _ in 0..20 {
            let cand = linalg::sub(&x, &linalg::scale(t, &step));
            let rc = chart.displacement(v, &f(&cand));
            let rcn = linalg::norm(&rc);
            if rcn < rn {
                x = cand;
                r = rc;
                rn = rcn;
                improved = true;
                break;
            }
            t = t / T::lit(2.0);
        }
        if !improved {
            break;
        }
    }
    x
}

struct IdentityMap;

impl<T: Real> MapKernel<T> for IdentityMap {
    fn forward(&self, _: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        *u
    }
    fn inverse(&self, _: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        *v
    }
    fn jacobian(&self, _: &ChartDomain<T>, _: &Vector<T>) -> Option<Matrix<T>> {
        Some(linalg::identity())
    }
    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::Identity
    }
}

struct ComposeMap<T: Real> {
    psi: Diffeo<T>,
    phi: Diffeo<T>,
}

impl<T: Real> MapKernel<T> for ComposeMap<T> {
    fn forward(&self, _: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        self.psi.forward(&self.phi.forward(u))
    }
    fn inverse(&self, _: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        self.phi.inverse(&self.psi.inverse(v))
    }
    fn jacobian(&self, _: &ChartDomain<T>, u: &Vector<T>) -> Option<Matrix<T>> {
        let x = self.phi.forward(u);
        Some(linalg::mat_mul(&self.psi.jacobian(&x), &self.phi.jacobian(u)))
    }
    fn spec(&self) -> DiffeoSpec {
        let mut parts = Vec::new();
        for d in [&self.psi, &self.phi] {
            match d.spec() {
                DiffeoSpec::Compose { parts: inner } => parts.extend(inner),
                s => parts.push(s),
            }
        }
        DiffeoSpec::Compose { parts }
    }
    fn numeric_inverse(&self) -> bool {
        self.psi.has_numeric_inverse() || self.phi.has_numeric_inverse()
    }
}

struct InverseMap<T: Real>(Diffeo<T>);

impl<T: Real> MapKernel<T> for InverseMap<T> {
    fn forward(&self, _: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        self.0.inverse(u)
    }
    fn inverse(&self, _: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        self.0.forward(v)
    }
    fn jacobian(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Option<Matrix<T>> {
        linalg::inverse(&self.0.jacobian(&self.0.inverse(u)), chart.dim())
    }
    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::Inverse { of: Box::new(self.0.spec()) }
    }
    fn numeric_inverse(&self) -> bool {
        self.0.has_numeric_inverse()
    }
}
