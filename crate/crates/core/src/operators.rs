//! Candidate operators `M` on sampled fields: pointwise nonlinearities,
//! scalar multiples, and nonlocal or non-Lipschitz counterexamples.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{field_axpy, make_bump, make_vector_bump, Field, ScalarField, VectorField};
use crate::geometry::ChartDomain;
use crate::linalg;
use crate::scalar::Real;

/// Seed for [`lipschitz_estimate`] and [`Rho::verify_lipschitz`].
pub const LIPSCHITZ_SEED: u64 = 0x11b5_c417;

/// Named scalar functions `ρ: ℝ → ℝ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Rho {
    Identity,
    Relu,
    Tanh,
    Abs,
    Sin,
    Softplus,
    Leaky { slope: f64 },
    Affine { a: f64, b: f64 },
}

impl Rho {
    #[inline]
    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            Rho::Identity => x,
            Rho::Relu => x.max(T::zero()),
            Rho::Tanh => x.tanh(),
            Rho::Abs => x.abs(),
            Rho::Sin => x.sin(),
            Rho::Softplus => {
                if x > T::lit(30.0) {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
            Rho::Leaky { slope } => {
                if x >= T::zero() {
                    x
                } else {
                    T::lit(slope) * x
                }
            }
            Rho::Affine { a, b } => T::lit(a) * x + T::lit(b),
        }
    }

    /// Smallest Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Rho::Leaky { slope } => slope.abs().max(1.0),
            Rho::Affine { a, .. } => a.abs(),
            _ => 1.0,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Rho::Identity => "identity".into(),
            Rho::Relu => "relu".into(),
            Rho::Tanh => "tanh".into(),
            Rho::Abs => "abs".into(),
            Rho::Sin => "sin".into(),
            Rho::Softplus => "softplus".into(),
            Rho::Leaky { slope } => format!("leaky({slope})"),
            Rho::Affine { a, b } => format!("affine({a},{b})"),
        }
    }

    /// Checks `|ρ(x) - ρ(y)| <= L|x - y|` on `pairs` seeded random pairs
    /// drawn from `[-10, 10]`, allowing for rounding in `ρ`.
    pub fn verify_lipschitz(&self, l: f64, pairs: usize) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_SEED);
        (0..pairs).all(|k| {
            let x: f64 = rng.gen_range(-10.0..10.0);
            let y: f64 = if k % 2 == 0 { rng.gen_range(-10.0..10.0) } else { x + rng.gen_range(-1e-3..1e-3) };
            let slack = 1e-14 * (1.0 + l) * (1.0 + x.abs() + y.abs());
            (self.eval(x) - self.eval(y)).abs() <= l * (x - y).abs() + slack
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    PointwiseScalar { rho: Rho, lipschitz_const: f64 },
    ScalarMultipleVector { lambda: f64 },
    PointwiseVectorGain { rho: Rho },
    GaussianBlur { sigma: f64 },
    SupOperator,
    ExpPhase,
    SqrtPointwise,
    LocalAverage { radius: f64 },
}

/// An operator and its report label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

/// Which field kinds an operator accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accepts {
    Scalar,
    Vector,
    Both,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind) -> Self {
        Self { kind, label: String::new() }
    }

    pub fn pointwise(rho: Rho) -> Self {
        Self::new(OperatorKind::PointwiseScalar { rho, lipschitz_const: rho.lipschitz() })
    }

    pub fn scalar_multiple(lambda: f64) -> Self {
        Self::new(OperatorKind::ScalarMultipleVector { lambda })
    }

    pub fn vector_gain(rho: Rho) -> Self {
        Self::new(OperatorKind::PointwiseVectorGain { rho })
    }

    pub fn blur(sigma: f64) -> Self {
        Self::new(OperatorKind::GaussianBlur { sigma })
    }

    pub fn local_average(radius: f64) -> Self {
        Self::new(OperatorKind::LocalAverage { radius })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> String {
        if !self.label.is_empty() {
            return self.label.clone();
        }
        match &self.kind {
            OperatorKind::PointwiseScalar { rho, .. } => format!("pointwise({})", rho.name()),
            OperatorKind::ScalarMultipleVector { lambda } => format!("scalar_multiple({lambda})"),
            OperatorKind::PointwiseVectorGain { rho } => format!("vector_gain({})", rho.name()),
            OperatorKind::GaussianBlur { sigma } => format!("gaussian_blur({sigma})"),
            OperatorKind::SupOperator => "sup".into(),
            OperatorKind::ExpPhase => "exp_phase".into(),
            OperatorKind::SqrtPointwise => "sqrt".into(),
            OperatorKind::LocalAverage { radius } => format!("local_average({radius})"),
        }
    }

    pub fn accepts(&self) -> Accepts {
        match self.kind {
            OperatorKind::PointwiseScalar { .. }
            | OperatorKind::SupOperator
            | OperatorKind::ExpPhase
            | OperatorKind::SqrtPointwise => Accepts::Scalar,
            OperatorKind::ScalarMultipleVector { .. } | OperatorKind::PointwiseVectorGain { .. } => Accepts::Vector,
            OperatorKind::GaussianBlur { .. } | OperatorKind::LocalAverage { .. } => Accepts::Both,
        }
    }

    /// Whether the operator acts sample by sample.
    pub fn is_pointwise(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::PointwiseScalar { .. }
                | OperatorKind::ScalarMultipleVector { .. }
                | OperatorKind::PointwiseVectorGain { .. }
                | OperatorKind::ExpPhase
                | OperatorKind::SqrtPointwise
        )
    }

    /// Parameter checks; a declared Lipschitz constant is verified on 10⁴
    /// seeded pairs.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            OperatorKind::PointwiseScalar { rho, lipschitz_const } => {
                if !rho.verify_lipschitz(lipschitz_const, 10_000) {
                    return Err(Error::Precondition(format!(
                        "declared Lipschitz constant {lipschitz_const} is violated by {}",
                        rho.name()
                    )));
                }
            }
            OperatorKind::GaussianBlur { sigma } if !(sigma > 0.0) => {
                return Err(Error::Precondition(format!("blur sigma must be positive, got {sigma}")));
            }
            OperatorKind::LocalAverage { radius } if !(radius > 0.0) => {
                return Err(Error::Precondition(format!("averaging radius must be positive, got {radius}")));
            }
            OperatorKind::ScalarMultipleVector { lambda } if !lambda.is_finite() => {
                return Err(Error::Precondition("lambda must be finite".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// `M f`.
pub fn apply<T: Real>(m: &OperatorSpec, f: &Field<T>) -> Result<Field<T>> {
    apply_with_warning(m, f).map(|(g, _)| g)
}

/// `M f` plus a non-fatal domain warning (negative input to the square root).
pub fn apply_with_warning<T: Real>(m: &OperatorSpec, f: &Field<T>) -> Result<(Field<T>, Option<String>)> {
    let mismatch = || Error::KindMismatch(format!("{} cannot act on a {} field", m.label(), f.kind_name()));
    let out = match (&m.kind, f) {
        (OperatorKind::PointwiseScalar { rho, .. }, Field::Scalar(s)) => Field::Scalar(s.map_values(|x| rho.eval(x))),
        (OperatorKind::ScalarMultipleVector { lambda }, Field::Vector(v)) => {
            let l = T::lit(*lambda);
            Field::Vector(v.with_components(v.components().iter().map(|c| c.iter().map(|x| l * *x).collect()).collect()))
        }
        (OperatorKind::PointwiseVectorGain { rho }, Field::Vector(v)) => {
            let dim = v.chart().dim();
            let samples = (0..v.chart().node_count())
                .into_par_iter()
                .map(|i| {
                    let x = v.node_value(i);
                    let n = linalg::norm(&x);
                    if n == T::zero() {
                        linalg::zero()
                    } else {
                        let g = rho.eval(n) / n;
                        let mut y = linalg::zero();
                        for a in 0..dim {
                            y[a] = g * x[a];
                        }
                        y
                    }
                })
                .collect();
            Field::Vector(v.with_node_vectors(samples))
        }
        (OperatorKind::GaussianBlur { sigma }, _) => {
            let kernels = gaussian_kernels(f.chart(), T::lit(*sigma));
            map_planes(f, |plane| separable_convolve(f.chart(), plane, &kernels)).ok_or_else(mismatch)?
        }
        (OperatorKind::LocalAverage { radius }, _) => {
            let r = T::lit(*radius);
            map_planes(f, |plane| ball_average(f.chart(), plane, r)).ok_or_else(mismatch)?
        }
        (OperatorKind::SupOperator, Field::Scalar(s)) => {
            Field::Scalar(ScalarField::constant(s.chart().clone(), s.max_abs()).with_interp(s.interp()))
        }
        (OperatorKind::ExpPhase, Field::Scalar(s)) => Field::Complex(s.map_values(|x| x.cos()), s.map_values(|x| x.sin())),
        (OperatorKind::SqrtPointwise, Field::Scalar(s)) => {
            let neg = s.values().iter().filter(|x| **x < T::zero()).count();
            let warn = (neg > 0).then(|| format!("sqrt applied to {neg} negative samples (clamped to 0)"));
            return Ok((Field::Scalar(s.map_values(|x| x.max(T::zero()).sqrt())), warn));
        }
        _ => return Err(mismatch()),
    };
    Ok((out, None))
}

/// Applies a plane-wise linear map to a scalar field or to every component
/// of a vector field.
fn map_planes<T: Real>(f: &Field<T>, op: impl Fn(&[T]) -> Vec<T> + Sync) -> Option<Field<T>> {
    match f {
        Field::Scalar(s) => Some(Field::Scalar(s.with_values(op(s.values())))),
        Field::Vector(v) => Some(Field::Vector(v.with_components(v.components().par_iter().map(|c| op(c)).collect()))),
        Field::Complex(..) => None,
    }
}

/// Normalized sampled Gaussians per axis, truncated at `4σ`.
fn gaussian_kernels<T: Real>(chart: &ChartDomain<T>, sigma: T) -> Vec<Vec<T>> {
    (0..chart.dim())
        .map(|a| {
            let h = chart.spacing(a);
            let half = (T::lit(4.0) * sigma / h).floor().to_usize().unwrap_or(0);
            let raw: Vec<T> = (0..=2 * half)
                .map(|k| {
                    let x = (T::from_usize_lossy(k) - T::from_usize_lossy(half)) * h / sigma;
                    (-x * x / T::lit(2.0)).exp()
                })
                .collect();
            let total: T = raw.iter().copied().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
        .collect()
}

/// Index of `i + off` along an axis of length `n`: wrapped on a torus, `None`
/// when it falls off a box.
#[inline]
fn shifted(i: usize, off: isize, n: usize, torus: bool) -> Option<usize> {
    let j = i as isize + off;
    if torus {
        Some(j.rem_euclid(n as isize) as usize)
    } else if j >= 0 && (j as usize) < n {
        Some(j as usize)
    } else {
        None
    }
}

fn separable_convolve<T: Real>(chart: &ChartDomain<T>, plane: &[T], kernels: &[Vec<T>]) -> Vec<T> {
    let mut cur = plane.to_vec();
    let torus = chart.is_torus();
    let res = chart.resolution();
    for (axis, k) in kernels.iter().enumerate() {
        let half = (k.len() / 2) as isize;
        let stride = chart.strides()[axis];
        let n = res[axis];
        let src = cur;
        cur = (0..src.len())
            .into_par_iter()
            .map(|flat| {
                let i = (flat / stride) % n;
                let base = flat - i * stride;
                k.iter().enumerate().fold(T::zero(), |acc, (t, w)| {
                    match shifted(i, t as isize - half, n, torus) {
                        Some(j) => acc + *w * src[base + j * stride],
                        None => acc,
                    }
                })
            })
            .collect();
    }
    cur
}

/// Mean over the nodes within `radius` (zero-padded on a box), using prefix
/// sums along the last axis.
fn ball_average<T: Real>(chart: &ChartDomain<T>, plane: &[T], radius: T) -> Vec<T> {
    let dim = chart.dim();
    let res = chart.resolution();
    let torus = chart.is_torus();
    let last = dim - 1;
    let n_last = res[last];
    // Offsets on the leading axes with the half-width allowed on the last one.
    let reach: Vec<isize> = (0..dim).map(|a| (radius / chart.spacing(a)).floor().to_isize().unwrap_or(0)).collect();
    let mut rows: Vec<([isize; 2], isize)> = Vec::new();
    let lead = |a: usize| -reach[a]..=reach[a];
    let lead0: Vec<isize> = if dim > 1 { lead(0).collect() } else { vec![0] };
    let lead1: Vec<isize> = if dim > 2 { lead(1).collect() } else { vec![0] };
    for &o0 in &lead0 {
        for &o1 in &lead1 {
            let mut r2 = T::zero();
            let offs = [o0, o1];
            for (a, o) in offs.iter().enumerate().take(dim - 1) {
                let x = T::from_isize(*o).unwrap() * chart.spacing(a);
                r2 = r2 + x * x;
            }
            let rem = radius * radius - r2;
            if rem < T::zero() {
                continue;
            }
            let w = (rem.sqrt() / chart.spacing(last)).floor().to_isize().unwrap_or(0);
            rows.push((offs, w));
        }
    }
    let count: isize = rows.iter().map(|(_, w)| 2 * w + 1).sum();
    let inv = T::one() / T::from_isize(count).unwrap();
    // Prefix sums along the last axis; on a torus a row is extended by one period on each side.
    let lines = plane.len() / n_last;
    let ext = if torus { n_last } else { 0 };
    let prefix: Vec<Vec<T>> = (0..lines)
        .map(|l| {
            let row = &plane[l * n_last..(l + 1) * n_last];
            let mut p = Vec::with_capacity(n_last + 2 * ext + 1);
            p.push(T::zero());
            let mut acc = T::zero();
            for k in 0..(n_last + 2 * ext) {
                let v = if torus { row[(k + n_last - ext) % n_last] } else { row[k] };
                acc = acc + v;
                p.push(acc);
            }
            p
        })
        .collect();
    let strides = chart.strides();
    (0..plane.len())
        .into_par_iter()
        .map(|flat| {
            let idx = chart.multi_index(flat);
            let mut total = T::zero();
            'rows: for (offs, w) in &rows {
                let mut line_flat = 0usize;
                for a in 0..dim - 1 {
                    match shifted(idx[a], offs[a], res[a], torus) {
                        Some(j) => line_flat += j * strides[a],
                        None => continue 'rows,
                    }
                }
                let line = line_flat / n_last;
                let c = idx[last] as isize + ext as isize;
                let (mut lo, mut hi) = (c - w, c + w + 1);
                if !torus {
                    lo = lo.max(0);
                    hi = hi.min(n_last as isize);
                    if hi <= lo {
                        continue;
                    }
                }
                total = total + prefix[line][hi as usize] - prefix[line][lo as usize];
            }
            total * inv
        })
        .collect()
}

/// `M(0)` for the field kind the operator accepts.
pub fn m_zero_image<T: Real>(m: &OperatorSpec, chart: &Arc<ChartDomain<T>>) -> Result<Field<T>> {
    let zero: Field<T> = match m.accepts() {
        Accepts::Vector => VectorField::zeros(chart.clone()).into(),
        _ => ScalarField::zeros(chart.clone()).into(),
    };
    apply(m, &zero)
}

/// Whether every node of the field carries the same sample.
pub fn is_constant<T: Real>(f: &Field<T>) -> bool {
    let first_eq = |v: &[T]| v.iter().all(|x| *x == v[0]);
    match f {
        Field::Scalar(s) => first_eq(s.values()),
        Field::Vector(v) => v.components().iter().all(|c| first_eq(c)),
        Field::Complex(re, im) => first_eq(re.values()) && first_eq(im.values()),
    }
}

/// Random field pairs for Lipschitz probing: a base field of random
/// amplitude (zero a quarter of the time) and a perturbation of log-uniform
/// size in `[1e-4, 1]`.
fn random_pair<T: Real>(
    rng: &mut ChaCha8Rng,
    chart: &Arc<ChartDomain<T>>,
    vector: bool,
) -> Result<(Field<T>, Field<T>)> {
    let dim = chart.dim();
    let bump = |rng: &mut ChaCha8Rng, amp: f64| -> Result<Field<T>> {
        let half = (0..dim).map(|a| chart.period(a).as_f64()).fold(f64::INFINITY, f64::min) / 2.0;
        loop {
            let c: Vec<f64> = (0..dim)
                .map(|a| {
                    let (lo, hi) = (chart.lower()[a].as_f64(), chart.upper()[a].as_f64());
                    rng.gen_range(lo..hi)
                })
                .collect();
            let r = rng.gen_range(0.1..0.4) * half;
            let c = linalg::vector_from_f64::<T>(&c);
            if !chart.ball_fits(&c, T::lit(r)) {
                continue;
            }
            return Ok(if vector {
                let d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                make_vector_bump(chart, &c, T::lit(r), T::lit(amp), &linalg::vector_from_f64(&d))?.into()
            } else {
                make_bump(chart, &c, T::lit(r), T::lit(amp))?.into()
            });
        }
    };
    let base_amp = if rng.gen_bool(0.25) { 0.0 } else { 10f64.powf(rng.gen_range(-4.0..0.5)) * sign(rng) };
    let delta = 10f64.powf(rng.gen_range(-4.0..0.0)) * sign(rng);
    let f = bump(rng, base_amp)?;
    let g = bump(rng, delta)?;
    let h = field_axpy(T::one(), &f, T::one(), &g)?;
    Ok((f, h))
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// `max ‖M f - M h‖_p / ‖f - h‖_p` over `trials` seeded random pairs.
pub fn lipschitz_estimate<T: Real>(m: &OperatorSpec, chart: &Arc<ChartDomain<T>>, p: T, trials: usize) -> Result<T> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_SEED);
    let vector = m.accepts() == Accepts::Vector;
    let mut best = T::zero();
    for _ in 0..trials {
        let (f, h) = random_pair(&mut rng, chart, vector)?;
        let den = field_axpy(T::one(), &f, -T::one(), &h)?.lp_norm(p)?;
        if den == T::zero() {
            continue;
        }
        let num = field_axpy(T::one(), &apply(m, &f)?, -T::one(), &apply(m, &h)?)?.lp_norm(p)?;
        best = best.max(num / den);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let m = OperatorSpec::pointwise(Rho::Tanh);
        let j = serde_json::to_string(&m).unwrap();
        assert_eq!(j, r#"{"kind":"pointwise_scalar","rho":{"name":"tanh"},"lipschitz_const":1.0}"#);
        let back: OperatorSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, m);
        let b: OperatorSpec = serde_json::from_str(r#"{"kind":"gaussian_blur","sigma":0.05,"label":"blur"}"#).unwrap();
        assert_eq!(b.label(), "blur");
    }

    #[test]
    fn declared_lipschitz_constants_are_checked() {
        assert!(OperatorSpec::pointwise(Rho::Sin).validate().is_ok());
        let bad = OperatorSpec::new(OperatorKind::PointwiseScalar { rho: Rho::Tanh, lipschitz_const: 0.5 });
        assert!(bad.validate().is_err());
        let leaky = OperatorSpec::pointwise(Rho::Leaky { slope: 3.0 });
        assert!(leaky.validate().is_ok());
    }

    #[test]
    fn ball_average_counts_match_brute_force() {
        for torus in [true, false] {
            let chart = if torus {
                ChartDomain::<f64>::torus(2, 0.0, 1.0, 20).unwrap()
            } else {
                ChartDomain::<f64>::cube(2, 0.0, 1.0, 21, 0.0).unwrap()
            };
            let vals: Vec<f64> = (0..chart.node_count()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
            let r = 0.17;
            let fast = ball_average(&chart, &vals, r);
            // Brute-force oracle over explicit offset lists.
            let reach = 4isize;
            let mut offs = Vec::new();
            for a in -reach..=reach {
                for b in -reach..=reach {
                    let (x, y) = (a as f64 * chart.spacing(0), b as f64 * chart.spacing(1));
                    if x * x + y * y <= r * r {
                        offs.push((a, b));
                    }
                }
            }
            let n = 20 + usize::from(!torus);
            for i in 0..chart.node_count() {
                let (r0, r1) = (i / n, i % n);
                let mut s = 0.0;
                for &(a, b) in &offs {
                    if let (Some(x), Some(y)) = (shifted(r0, a, n, torus), shifted(r1, b, n, torus)) {
                        s += vals[x * n + y];
                    }
                }
                assert!((fast[i] - s / offs.len() as f64).abs() < 1e-12);
            }
        }
    }
}
