//! Sampled scalar and vector fields on a chart.
//!
//! A field owns one sample per grid node (per component for vector fields)
//! and evaluates off-grid by interpolation. Every operation returns a new
//! field.

mod interp;
pub mod io;
mod spec;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use interp::{InterpOrder, Stencil};
pub use spec::FieldSpec;

use crate::error::{Error, Result};
use crate::geometry::{metric_norm, ChartDomain, MetricField, VolumeDensity};
use crate::linalg::{self, Vector};
use crate::scalar::Real;

/// Open metric ball in chart coordinates (periodic distance on a torus).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BallRegion<T> {
    pub center: Vector<T>,
    pub radius: T,
}

impl<T: Real> BallRegion<T> {
    pub fn new(center: Vector<T>, radius: T) -> Self {
        Self { center, radius }
    }

    pub fn from_f64(center: &[f64], radius: f64) -> Self {
        Self { center: linalg::vector_from_f64(center), radius: T::lit(radius) }
    }

    /// Checks the ball against the chart (see [`ChartDomain::ball_fits`]).
    pub fn validate(&self, chart: &ChartDomain<T>) -> Result<()> {
        if chart.ball_fits(&self.center, self.radius) {
            Ok(())
        } else {
            Err(Error::Region(format!(
                "ball(center {:?}, radius {}) does not fit in {:?}",
                linalg::to_f64_vec(&self.center, chart.dim()),
                self.radius,
                chart
            )))
        }
    }

    /// Strict interior test.
    #[inline]
    pub fn contains(&self, chart: &ChartDomain<T>, p: &Vector<T>) -> bool {
        chart.distance(&self.center, p) < self.radius
    }

    /// Membership of every node.
    pub fn node_mask(&self, chart: &ChartDomain<T>) -> Vec<bool> {
        (0..chart.node_count()).map(|i| self.contains(chart, &chart.node(i))).collect()
    }

    /// Whether the closed balls are disjoint.
    pub fn disjoint_from(&self, chart: &ChartDomain<T>, other: &Self) -> bool {
        chart.distance(&self.center, &other.center) > self.radius + other.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    chart: Arc<ChartDomain<T>>,
    values: Vec<T>,
    interp: InterpOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    chart: Arc<ChartDomain<T>>,
    /// One sample plane per chart axis.
    components: Vec<Vec<T>>,
    interp: InterpOrder,
}

fn check_finite<T: Real>(values: &[T]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Precondition("field samples must be finite".into()))
    }
}

fn check_collar<T: Real>(chart: &ChartDomain<T>, values: &[T]) -> Result<()> {
    if chart.is_torus() || chart.boundary_margin() == T::zero() {
        return Ok(());
    }
    for (i, v) in values.iter().enumerate() {
        if *v != T::zero() && chart.in_collar(&chart.node(i)) {
            return Err(Error::Precondition(format!(
                "field is nonzero ({v}) in the boundary collar at {:?}",
                linalg::to_f64_vec(&chart.node(i), chart.dim())
            )));
        }
    }
    Ok(())
}

fn p_check<T: Real>(p: T) -> Result<()> {
    if p >= T::one() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p.as_f64()))
    }
}

/// `(Σ w_i m_i^p)^(1/p)` with a fixed summation order.
fn power_sum<T: Real>(magnitudes: impl Iterator<Item = T>, weights: &[T], p: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    magnitudes
        .zip(weights)
        .map(|(m, &w)| {
            let mp = if p == one {
                m
            } else if p == two {
                m * m
            } else {
                m.powf(p)
            };
            mp * w
        })
        .fold(T::zero(), |acc, x| acc + x)
}

impl<T: Real> ScalarField<T> {
    /// Validated constructor: finite samples, zero in a box collar.
    pub fn new(chart: Arc<ChartDomain<T>>, values: Vec<T>, interp: InterpOrder) -> Result<Self> {
        if values.len() != chart.node_count() {
            return Err(Error::Precondition(format!(
                "{} samples for {} nodes",
                values.len(),
                chart.node_count()
            )));
        }
        check_finite(&values)?;
        check_collar(&chart, &values)?;
        Ok(Self { chart, values, interp })
    }

    /// Unvalidated constructor for operator outputs whose support may leak
    /// into the collar.
    pub(crate) fn from_parts(chart: Arc<ChartDomain<T>>, values: Vec<T>, interp: InterpOrder) -> Self {
        debug_assert_eq!(values.len(), chart.node_count());
        Self { chart, values, interp }
    }

    pub fn from_fn(chart: Arc<ChartDomain<T>>, f: impl Fn(&Vector<T>) -> T + Sync) -> Result<Self> {
        let values: Vec<T> = (0..chart.node_count()).into_par_iter().map(|i| f(&chart.node(i))).collect();
        Self::new(chart, values, InterpOrder::default())
    }

    pub fn zeros(chart: Arc<ChartDomain<T>>) -> Self {
        let n = chart.node_count();
        Self { chart, values: vec![T::zero(); n], interp: InterpOrder::default() }
    }

    /// Constant field (bypasses the collar check: constants are used for the
    /// `M(0)` demonstrations and sup outputs).
    pub fn constant(chart: Arc<ChartDomain<T>>, c: T) -> Self {
        let n = chart.node_count();
        Self { chart, values: vec![c; n], interp: InterpOrder::default() }
    }

    pub fn with_interp(mut self, interp: InterpOrder) -> Self {
        self.interp = interp;
        self
    }

    #[inline]
    pub fn chart(&self) -> &Arc<ChartDomain<T>> {
        &self.chart
    }
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }
    #[inline]
    pub fn interp(&self) -> InterpOrder {
        self.interp
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Same chart and interpolation, new samples.
    pub fn map_values(&self, f: impl Fn(T) -> T + Sync) -> Self {
        Self::from_parts(self.chart.clone(), self.values.par_iter().map(|&v| f(v)).collect(), self.interp)
    }

    pub(crate) fn with_values(&self, values: Vec<T>) -> Self {
        Self::from_parts(self.chart.clone(), values, self.interp)
    }

    /// Interpolated value at `u`.
    pub fn eval(&self, u: &Vector<T>) -> Result<T> {
        let st = Stencil::new(&self.chart, u, self.interp)?;
        Ok(st.apply(&self.chart, &self.values))
    }

    pub fn eval_with(&self, st: &Stencil<T>) -> T {
        st.apply(&self.chart, &self.values)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T: Real> VectorField<T> {
    pub fn new(chart: Arc<ChartDomain<T>>, components: Vec<Vec<T>>, interp: InterpOrder) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::Precondition(format!(
                "{} components on a {}-dimensional chart",
                components.len(),
                chart.dim()
            )));
        }
        for c in &components {
            if c.len() != chart.node_count() {
                return Err(Error::Precondition("component length differs from node count".into()));
            }
            check_finite(c)?;
            check_collar(&chart, c)?;
        }
        Ok(Self { chart, components, interp })
    }

    pub(crate) fn from_parts(chart: Arc<ChartDomain<T>>, components: Vec<Vec<T>>, interp: InterpOrder) -> Self {
        debug_assert_eq!(components.len(), chart.dim());
        Self { chart, components, interp }
    }

    pub fn from_fn(chart: Arc<ChartDomain<T>>, f: impl Fn(&Vector<T>) -> Vector<T> + Sync) -> Result<Self> {
        let dim = chart.dim();
        let samples: Vec<Vector<T>> = (0..chart.node_count()).into_par_iter().map(|i| f(&chart.node(i))).collect();
        let components = (0..dim).map(|a| samples.iter().map(|v| v[a]).collect()).collect();
        Self::new(chart, components, InterpOrder::default())
    }

    pub fn zeros(chart: Arc<ChartDomain<T>>) -> Self {
        let n = chart.node_count();
        let dim = chart.dim();
        Self { chart, components: vec![vec![T::zero(); n]; dim], interp: InterpOrder::default() }
    }

    pub fn with_interp(mut self, interp: InterpOrder) -> Self {
        self.interp = interp;
        self
    }

    #[inline]
    pub fn chart(&self) -> &Arc<ChartDomain<T>> {
        &self.chart
    }
    #[inline]
    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }
    #[inline]
    pub fn interp(&self) -> InterpOrder {
        self.interp
    }

    /// Sample at node `i` as a padded vector.
    #[inline]
    pub fn node_value(&self, i: usize) -> Vector<T> {
        let mut v = linalg::zero();
        for (a, c) in self.components.iter().enumerate() {
            v[a] = c[i];
        }
        v
    }

    pub fn eval(&self, u: &Vector<T>) -> Result<Vector<T>> {
        let st = Stencil::new(&self.chart, u, self.interp)?;
        Ok(self.eval_with(&st))
    }

    pub fn eval_with(&self, st: &Stencil<T>) -> Vector<T> {
        let mut v = linalg::zero();
        for (a, c) in self.components.iter().enumerate() {
            v[a] = st.apply(&self.chart, c);
        }
        v
    }

    /// Builds a field from per-node vectors.
    pub(crate) fn with_node_vectors(&self, samples: Vec<Vector<T>>) -> Self {
        let dim = self.chart.dim();
        let components = (0..dim).map(|a| samples.iter().map(|v| v[a]).collect()).collect();
        Self::from_parts(self.chart.clone(), components, self.interp)
    }

    pub(crate) fn with_components(&self, components: Vec<Vec<T>>) -> Self {
        Self::from_parts(self.chart.clone(), components, self.interp)
    }

    /// Euclidean magnitude at every node.
    pub fn magnitudes(&self) -> Vec<T> {
        (0..self.chart.node_count()).map(|i| linalg::norm(&self.node_value(i))).collect()
    }

    pub fn max_magnitude(&self) -> T {
        self.magnitudes().into_iter().fold(T::zero(), T::max)
    }
}

/// Any field the laboratory transports or feeds to an operator.
///
/// `Complex` bundles the real and imaginary parts of a complex-valued scalar
/// field; it transports like two scalar fields.
#[derive(Clone, Debug, PartialEq)]
pub enum Field<T> {
    Scalar(ScalarField<T>),
    Vector(VectorField<T>),
    Complex(ScalarField<T>, ScalarField<T>),
}

impl<T: Real> From<ScalarField<T>> for Field<T> {
    fn from(f: ScalarField<T>) -> Self {
        Self::Scalar(f)
    }
}

impl<T: Real> From<VectorField<T>> for Field<T> {
    fn from(f: VectorField<T>) -> Self {
        Self::Vector(f)
    }
}

impl<T: Real> Field<T> {
    pub fn chart(&self) -> &Arc<ChartDomain<T>> {
        match self {
            Self::Scalar(f) => f.chart(),
            Self::Vector(f) => f.chart(),
            Self::Complex(re, _) => re.chart(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Scalar(_) => "scalar",
            Self::Vector(_) => "vector",
            Self::Complex(..) => "complex",
        }
    }

    pub fn as_scalar(&self) -> Result<&ScalarField<T>> {
        match self {
            Self::Scalar(f) => Ok(f),
            other => Err(Error::KindMismatch(format!("expected scalar field, got {}", other.kind_name()))),
        }
    }

    pub fn as_vector(&self) -> Result<&VectorField<T>> {
        match self {
            Self::Vector(f) => Ok(f),
            other => Err(Error::KindMismatch(format!("expected vector field, got {}", other.kind_name()))),
        }
    }

    /// Pointwise magnitude at every node (Euclidean for vectors, modulus for
    /// complex fields).
    pub fn magnitudes(&self) -> Vec<T> {
        match self {
            Self::Scalar(f) => f.values().iter().map(|v| v.abs()).collect(),
            Self::Vector(f) => f.magnitudes(),
            Self::Complex(re, im) => re.values().iter().zip(im.values()).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    /// L^p norm with the Euclidean metric and the chart's Lebesgue measure.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        self.lp_norm_with(p, &MetricField::Euclidean, &VolumeDensity::Uniform)
    }

    pub fn lp_norm_with(&self, p: T, g: &MetricField<T>, omega: &VolumeDensity<T>) -> Result<T> {
        match self {
            Self::Scalar(f) => lp_norm_scalar(f, p, omega),
            Self::Vector(f) => lp_norm_vector(f, p, g, omega),
            Self::Complex(..) => {
                p_check(p)?;
                let w = omega.weighted_nodes(self.chart())?;
                Ok(power_sum(self.magnitudes().into_iter(), &w, p).powf(T::one() / p))
            }
        }
    }

    /// `∫ |f|^p dω` (no root).
    pub fn lp_norm_pow(&self, p: T) -> Result<T> {
        p_check(p)?;
        let w = self.chart().quadrature_weights();
        Ok(power_sum(self.magnitudes().into_iter(), &w, p))
    }

    /// Node-exact equality of samples.
    pub fn samples_equal(&self, other: &Self) -> bool {
        self == other
    }

    pub fn mask(&self, region: &BallRegion<T>) -> Self {
        mask_field(self, region)
    }

    pub fn mask_nodes(&self, keep: &[bool]) -> Self {
        mask_nodes(self, keep)
    }
}

/// Interpolated evaluation of a scalar field.
pub fn eval_scalar<T: Real>(f: &ScalarField<T>, u: &Vector<T>) -> Result<T> {
    f.eval(u)
}

/// Interpolated evaluation of a vector field.
pub fn eval_vector<T: Real>(f: &VectorField<T>, u: &Vector<T>) -> Result<Vector<T>> {
    f.eval(u)
}

/// `(∫ |f|^p dω)^(1/p)`.
pub fn lp_norm_scalar<T: Real>(f: &ScalarField<T>, p: T, omega: &VolumeDensity<T>) -> Result<T> {
    p_check(p)?;
    let w = omega.weighted_nodes(f.chart())?;
    Ok(power_sum(f.values().iter().map(|v| v.abs()), &w, p).powf(T::one() / p))
}

/// `(∫ g_u(f, f)^(p/2) dω)^(1/p)`.
pub fn lp_norm_vector<T: Real>(f: &VectorField<T>, p: T, g: &MetricField<T>, omega: &VolumeDensity<T>) -> Result<T> {
    p_check(p)?;
    let chart = f.chart();
    let w = omega.weighted_nodes(chart)?;
    let mags: Vec<T> = if g.is_euclidean() {
        f.magnitudes()
    } else {
        g.validate(chart)?;
        (0..chart.node_count())
            .map(|i| metric_norm(&f.node_value(i), &chart.node(i), g, chart.dim()))
            .collect::<Result<_>>()?
    };
    Ok(power_sum(mags.into_iter(), &w, p).powf(T::one() / p))
}

/// Keeps samples strictly inside `region`, zeroes the rest.
pub fn mask_field<T: Real>(f: &Field<T>, region: &BallRegion<T>) -> Field<T> {
    let keep = region.node_mask(f.chart());
    mask_nodes(f, &keep)
}

/// Keeps samples where `keep` is true, zeroes the rest.
pub fn mask_nodes<T: Real>(f: &Field<T>, keep: &[bool]) -> Field<T> {
    let apply = |vals: &[T]| -> Vec<T> {
        vals.iter().zip(keep).map(|(&v, &k)| if k { v } else { T::zero() }).collect()
    };
    match f {
        Field::Scalar(s) => Field::Scalar(s.with_values(apply(s.values()))),
        Field::Vector(v) => Field::Vector(v.with_components(v.components().iter().map(|c| apply(c)).collect())),
        Field::Complex(re, im) => Field::Complex(re.with_values(apply(re.values())), im.with_values(apply(im.values()))),
    }
}

/// Pointwise `a·f + b·h`.
pub fn field_axpy<T: Real>(a: T, f: &Field<T>, b: T, h: &Field<T>) -> Result<Field<T>> {
    if f.chart() != h.chart() {
        return Err(Error::ChartMismatch(format!("{:?} vs {:?}", f.chart(), h.chart())));
    }
    let comb = |x: &[T], y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(&u, &v)| a * u + b * v).collect() };
    Ok(match (f, h) {
        (Field::Scalar(x), Field::Scalar(y)) => Field::Scalar(x.with_values(comb(x.values(), y.values()))),
        (Field::Vector(x), Field::Vector(y)) => Field::Vector(
            x.with_components(x.components().iter().zip(y.components()).map(|(u, v)| comb(u, v)).collect()),
        ),
        (Field::Complex(xr, xi), Field::Complex(yr, yi)) => Field::Complex(
            xr.with_values(comb(xr.values(), yr.values())),
            xi.with_values(comb(xi.values(), yi.values())),
        ),
        (x, y) => {
            return Err(Error::KindMismatch(format!("{} vs {}", x.kind_name(), y.kind_name())));
        }
    })
}

/// `exp(1 - 1/(1 - s²))` for `|s| < 1`, zero elsewhere; peak 1 at `s = 0`.
#[inline]
pub fn bump_profile<T: Real>(s: T) -> T {
    let s2 = s * s;
    if s2 < T::one() {
        (T::one() - T::one() / (T::one() - s2)).exp()
    } else {
        T::zero()
    }
}

/// Derivative of [`bump_profile`].
#[inline]
pub fn bump_profile_derivative<T: Real>(s: T) -> T {
    let s2 = s * s;
    if s2 < T::one() {
        let q = T::one() - s2;
        bump_profile(s) * (T::lit(-2.0) * s / (q * q))
    } else {
        T::zero()
    }
}

/// C^∞ bump `amplitude · exp(1 - 1/(1 - r²))`, `r = |u - center| / radius`.
pub fn make_bump<T: Real>(chart: &Arc<ChartDomain<T>>, center: &Vector<T>, radius: T, amplitude: T) -> Result<ScalarField<T>> {
    BallRegion::new(*center, radius).validate(chart)?;
    let c = *center;
    ScalarField::from_fn(chart.clone(), move |u| amplitude * bump_profile(chart_distance(chart, &c, u) / radius))
}

/// Bump times a constant direction.
pub fn make_vector_bump<T: Real>(
    chart: &Arc<ChartDomain<T>>,
    center: &Vector<T>,
    radius: T,
    amplitude: T,
    direction: &Vector<T>,
) -> Result<VectorField<T>> {
    BallRegion::new(*center, radius).validate(chart)?;
    let c = *center;
    let d = *direction;
    VectorField::from_fn(chart.clone(), move |u| {
        linalg::scale(amplitude * bump_profile(chart_distance(chart, &c, u) / radius), &d)
    })
}

#[inline]
fn chart_distance<T: Real>(chart: &ChartDomain<T>, a: &Vector<T>, b: &Vector<T>) -> T {
    chart.distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartKind;

    fn unit_torus(n: usize) -> Arc<ChartDomain<f64>> {
        Arc::new(ChartDomain::torus(2, 0.0, 1.0, n).unwrap())
    }

    #[test]
    fn eval_at_node_is_exact() {
        let c = unit_torus(16);
        let f = ScalarField::from_fn(c.clone(), |u| (7.0 * u[0]).sin() + u[1] * u[1]).unwrap();
        for i in [0, 17, 100, 255] {
            assert_eq!(f.eval(&c.node(i)).unwrap(), f.values()[i]);
        }
    }

    #[test]
    fn constants_reproduced() {
        let c = unit_torus(8);
        let f = ScalarField::constant(c, 3.25);
        for u in [[0.1, 0.77, 0.0], [0.999, 0.001, 0.0], [-3.3, 12.7, 0.0]] {
            assert_eq!(f.eval(&u).unwrap(), 3.25);
        }
    }

    #[test]
    fn cubic_sine_on_circle() {
        let c = Arc::new(ChartDomain::torus(1, 0.0, 1.0, 256).unwrap());
        let f = ScalarField::from_fn(c, |u| (2.0 * std::f64::consts::PI * u[0]).sin()).unwrap();
        let v = f.eval(&[0.125, 0.0, 0.0]).unwrap();
        assert!((v - (std::f64::consts::FRAC_PI_4).sin()).abs() < 1e-6);
        // off-node too
        let v = f.eval(&[0.1234, 0.0, 0.0]).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI * 0.1234).sin()).abs() < 1e-6);
    }

    #[test]
    fn out_of_box_is_an_error() {
        let c = Arc::new(ChartDomain::cube(2, 0.0, 1.0, 5, 0.0).unwrap());
        let f = ScalarField::<f64>::zeros(c);
        assert!(matches!(f.eval(&[1.2, 0.5, 0.0]), Err(Error::OutOfDomain { .. })));
        assert!(f.eval(&[1.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn scalar_norm_examples() {
        let c = unit_torus(32);
        let f: Field<f64> = ScalarField::constant(c.clone(), 2.0).into();
        for p in [1.0, 2.0, 3.5] {
            assert!((f.lp_norm(p).unwrap() - 2.0).abs() < 1e-13);
        }
        let z: Field<f64> = ScalarField::zeros(c).into();
        assert_eq!(z.lp_norm(2.0).unwrap(), 0.0);
        assert!(matches!(f.lp_norm(0.5), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn vector_norm_examples() {
        let c = unit_torus(16);
        let f = VectorField::from_fn(c.clone(), |_| [3.0, 4.0, 0.0]).unwrap();
        let n = lp_norm_vector(&f, 1.0, &MetricField::Euclidean, &VolumeDensity::Uniform).unwrap();
        assert!((n - 5.0).abs() < 1e-13);
        let e1 = VectorField::from_fn(c, |_| [1.0, 0.0, 0.0]).unwrap();
        let n = lp_norm_vector(&e1, 2.0, &MetricField::diagonal(&[4.0, 1.0]), &VolumeDensity::Uniform).unwrap();
        assert!((n - 2.0).abs() < 1e-13);
    }

    #[test]
    fn axpy_cancels_and_doubles() {
        let c = unit_torus(8);
        let f: Field<f64> = ScalarField::from_fn(c, |u| u[0] - u[1]).unwrap().into();
        let z = field_axpy(1.0, &f, -1.0, &f).unwrap();
        assert_eq!(z.lp_norm(1.0).unwrap(), 0.0);
        let d = field_axpy(2.0, &f, 0.0, &f).unwrap();
        let (Field::Scalar(a), Field::Scalar(b)) = (&f, &d) else { panic!() };
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| 2.0 * x == *y));
    }

    #[test]
    fn axpy_chart_mismatch() {
        let f: Field<f64> = ScalarField::zeros(unit_torus(8)).into();
        let g: Field<f64> = ScalarField::zeros(unit_torus(16)).into();
        assert!(matches!(field_axpy(1.0, &f, 1.0, &g), Err(Error::ChartMismatch(_))));
    }

    #[test]
    fn mask_edge_cases() {
        let c = unit_torus(32);
        let f: Field<f64> = ScalarField::constant(c.clone(), 1.0).into();
        let whole = BallRegion::from_f64(&[0.5, 0.5], 0.49);
        let bump: Field<f64> = make_bump(&c, &[0.5, 0.5, 0.0], 0.3, 1.0).unwrap().into();
        assert_eq!(bump.mask(&whole), bump);
        let tiny = BallRegion::from_f64(&[0.51, 0.51], 1e-3);
        assert_eq!(f.mask(&tiny).lp_norm(1.0).unwrap(), 0.0);
    }

    #[test]
    fn bump_values() {
        let c = Arc::new(ChartDomain::cube(1, -1.0, 1.0, 201, 0.0).unwrap());
        let b = make_bump(&c, &[0.0, 0.0, 0.0], 1.0, 2.5).unwrap();
        assert_eq!(b.values()[100], 2.5);
        assert_eq!(b.values()[0], 0.0);
        assert_eq!(b.values()[200], 0.0);
        let c2 = Arc::new(ChartDomain::cube(1, -1.0, 1.0, 201, 0.1).unwrap());
        assert!(matches!(make_bump(&c2, &[0.0, 0.0, 0.0], 1.0, 1.0), Err(Error::Region(_))));
    }

    #[test]
    fn collar_invariant_enforced() {
        let c = Arc::new(ChartDomain::new(ChartKind::EuclideanBox, &[(0.0, 1.0)], &[11], 0.2).unwrap());
        assert!(ScalarField::from_fn(c.clone(), |_| 1.0).is_err());
        assert!(ScalarField::from_fn(c, |u: &[f64; 3]| if (u[0] - 0.5).abs() < 0.2 { 1.0 } else { 0.0 }).is_ok());
    }
}
