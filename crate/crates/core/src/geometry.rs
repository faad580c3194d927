//! Computational charts: bounded Euclidean boxes and flat tori, their grids,
//! quadrature weights, metric tensors and volume densities.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, MAX_DIM};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    EuclideanBox,
    FlatTorus,
}

/// Serialized form of a chart; validated on the way in.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ChartRecord<T> {
    kind: ChartKind,
    dim: usize,
    extent: Vec<[T; 2]>,
    resolution: Vec<usize>,
    #[serde(default = "T::zero")]
    boundary_margin: T,
}

/// A rectangular chart sampled on a regular grid.
///
/// Box grids include both endpoints of every axis. Torus grids exclude the
/// upper endpoint, which is identified with the lower one.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "ChartRecord<T>", into = "ChartRecord<T>")]
pub struct ChartDomain<T> {
    kind: ChartKind,
    dim: usize,
    lower: Vector<T>,
    upper: Vector<T>,
    resolution: [usize; MAX_DIM],
    boundary_margin: T,
    spacing: Vector<T>,
    strides: [usize; MAX_DIM],
}

impl<T: Real> TryFrom<ChartRecord<T>> for ChartDomain<T> {
    type Error = Error;

    fn try_from(r: ChartRecord<T>) -> Result<Self> {
        if r.extent.len() != r.dim || r.resolution.len() != r.dim {
            return Err(Error::InvalidChart(format!(
                "extent/resolution lengths ({}, {}) do not match dim {}",
                r.extent.len(),
                r.resolution.len(),
                r.dim
            )));
        }
        let extent: Vec<(T, T)> = r.extent.iter().map(|e| (e[0], e[1])).collect();
        ChartDomain::new(r.kind, &extent, &r.resolution, r.boundary_margin)
    }
}

impl<T: Real> From<ChartDomain<T>> for ChartRecord<T> {
    fn from(c: ChartDomain<T>) -> Self {
        ChartRecord {
            kind: c.kind,
            dim: c.dim,
            extent: (0..c.dim).map(|a| [c.lower[a], c.upper[a]]).collect(),
            resolution: c.resolution[..c.dim].to_vec(),
            boundary_margin: c.boundary_margin,
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ChartDomain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}[", self.kind)?;
        for a in 0..self.dim {
            if a > 0 {
                write!(f, " x ")?;
            }
            write!(f, "{:?}..{:?}@{}", self.lower[a], self.upper[a], self.resolution[a])?;
        }
        write!(f, "]")
    }
}

impl<T: Real> ChartDomain<T> {
    pub fn new(kind: ChartKind, extent: &[(T, T)], resolution: &[usize], boundary_margin: T) -> Result<Self> {
        let dim = extent.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidChart(format!("dim {dim} outside 1..=3")));
        }
        if resolution.len() != dim {
            return Err(Error::InvalidChart("resolution length differs from extent length".into()));
        }
        if !(boundary_margin >= T::zero()) {
            return Err(Error::InvalidChart("boundary margin must be >= 0".into()));
        }
        if kind == ChartKind::FlatTorus && boundary_margin != T::zero() {
            return Err(Error::InvalidChart("a flat torus has no boundary margin".into()));
        }
        let mut lower = linalg::zero();
        let mut upper = linalg::zero();
        let mut res = [1usize; MAX_DIM];
        let mut spacing = linalg::zero();
        for a in 0..dim {
            let (lo, hi) = extent[a];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidChart(format!("axis {a}: need finite lower < upper")));
            }
            if resolution[a] < 2 {
                return Err(Error::InvalidChart(format!("axis {a}: resolution must be >= 2")));
            }
            lower[a] = lo;
            upper[a] = hi;
            res[a] = resolution[a];
            let cells = match kind {
                ChartKind::EuclideanBox => resolution[a] - 1,
                ChartKind::FlatTorus => resolution[a],
            };
            spacing[a] = (hi - lo) / T::from_usize_lossy(cells);
            if kind == ChartKind::EuclideanBox && T::lit(2.0) * boundary_margin >= hi - lo {
                return Err(Error::InvalidChart(format!("axis {a}: margin swallows the box")));
            }
        }
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= res[a];
        }
        Ok(Self { kind, dim, lower, upper, resolution: res, boundary_margin, spacing, strides })
    }

    /// Box chart with the same bounds and resolution on every axis.
    pub fn cube(dim: usize, lo: T, hi: T, n: usize, margin: T) -> Result<Self> {
        Self::new(ChartKind::EuclideanBox, &vec![(lo, hi); dim], &vec![n; dim], margin)
    }

    /// Torus `[lo, hi)^dim` with `n` nodes per axis.
    pub fn torus(dim: usize, lo: T, hi: T, n: usize) -> Result<Self> {
        Self::new(ChartKind::FlatTorus, &vec![(lo, hi); dim], &vec![n; dim], T::zero())
    }

    /// Same geometry at a different per-axis resolution.
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        let extent: Vec<(T, T)> = (0..self.dim).map(|a| (self.lower[a], self.upper[a])).collect();
        Self::new(self.kind, &extent, &vec![n; self.dim], self.boundary_margin)
    }

    #[inline]
    pub fn kind(&self) -> ChartKind {
        self.kind
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn is_torus(&self) -> bool {
        self.kind == ChartKind::FlatTorus
    }
    #[inline]
    pub fn lower(&self) -> &Vector<T> {
        &self.lower
    }
    #[inline]
    pub fn upper(&self) -> &Vector<T> {
        &self.upper
    }
    #[inline]
    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dim]
    }
    #[inline]
    pub fn spacing(&self, axis: usize) -> T {
        self.spacing[axis]
    }
    #[inline]
    pub fn boundary_margin(&self) -> T {
        self.boundary_margin
    }
    #[inline]
    pub fn strides(&self) -> &[usize] {
        &self.strides[..self.dim]
    }

    /// Smallest grid spacing over the active axes.
    pub fn min_spacing(&self) -> T {
        (0..self.dim).map(|a| self.spacing[a]).fold(T::infinity(), T::min)
    }

    pub fn period(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    pub fn node_count(&self) -> usize {
        self.resolution[..self.dim].iter().product()
    }

    /// Multi-index of a flat node index (axis 0 varies slowest).
    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.dim {
            idx[a] = flat / self.strides[a];
            flat %= self.strides[a];
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize; MAX_DIM]) -> usize {
        (0..self.dim).map(|a| idx[a] * self.strides[a]).sum()
    }

    #[inline]
    pub fn node_coord(&self, axis: usize, i: usize) -> T {
        self.lower[axis] + T::from_usize_lossy(i) * self.spacing[axis]
    }

    /// Coordinates of the node with flat index `flat`.
    #[inline]
    pub fn node(&self, flat: usize) -> Vector<T> {
        let idx = self.multi_index(flat);
        let mut p = linalg::zero();
        for a in 0..self.dim {
            p[a] = self.node_coord(a, idx[a]);
        }
        p
    }

    /// Displacement `to - from`; minimal image on a torus.
    #[inline]
    pub fn displacement(&self, from: &Vector<T>, to: &Vector<T>) -> Vector<T> {
        let mut d = linalg::sub(to, from);
        if self.kind == ChartKind::FlatTorus {
            for a in 0..self.dim {
                let p = self.period(a);
                d[a] = d[a] - p * (d[a] / p).round();
            }
        }
        d
    }

    #[inline]
    pub fn distance(&self, a: &Vector<T>, b: &Vector<T>) -> T {
        linalg::norm(&self.displacement(a, b))
    }

    /// Canonical representative of a point (torus: wrapped into `[lower, upper)`).
    #[inline]
    pub fn wrap(&self, p: &Vector<T>) -> Vector<T> {
        let mut q = *p;
        if self.kind == ChartKind::FlatTorus {
            for a in 0..self.dim {
                let per = self.period(a);
                let mut x = q[a] - self.lower[a];
                x = x - per * (x / per).floor();
                if x >= per {
                    x = x - per;
                }
                q[a] = self.lower[a] + x;
            }
        }
        q
    }

    /// Whether a point is inside the closed box (always true on a torus).
    pub fn contains(&self, p: &Vector<T>) -> bool {
        match self.kind {
            ChartKind::FlatTorus => (0..self.dim).all(|a| p[a].is_finite()),
            ChartKind::EuclideanBox => (0..self.dim).all(|a| p[a] >= self.lower[a] && p[a] <= self.upper[a]),
        }
    }

    /// Whether the closed ball `B(center, radius)` fits in the margin-free
    /// interior (box), or is embedded (torus: radius below half the
    /// shortest period).
    pub fn ball_fits(&self, center: &Vector<T>, radius: T) -> bool {
        if !(radius > T::zero()) {
            return false;
        }
        match self.kind {
            ChartKind::FlatTorus => {
                let half = (0..self.dim).map(|a| self.period(a)).fold(T::infinity(), T::min) / T::lit(2.0);
                radius < half
            }
            ChartKind::EuclideanBox => (0..self.dim).all(|a| {
                center[a] - radius >= self.lower[a] + self.boundary_margin
                    && center[a] + radius <= self.upper[a] - self.boundary_margin
            }),
        }
    }

    /// Per-axis quadrature weights: trapezoid on boxes, midpoint on tori.
    pub fn axis_weights(&self, axis: usize) -> Vec<T> {
        let n = self.resolution[axis];
        let h = self.spacing[axis];
        let mut w = vec![h; n];
        if self.kind == ChartKind::EuclideanBox {
            w[0] = h / T::lit(2.0);
            w[n - 1] = h / T::lit(2.0);
        }
        w
    }

    /// Quadrature weight of every node (product of the axis weights).
    pub fn quadrature_weights(&self) -> Vec<T> {
        let axes: Vec<Vec<T>> = (0..self.dim).map(|a| self.axis_weights(a)).collect();
        (0..self.node_count())
            .map(|flat| {
                let idx = self.multi_index(flat);
                (0..self.dim).fold(T::one(), |acc, a| acc * axes[a][idx[a]])
            })
            .collect()
    }

    /// Whether a node lies in the zero collar of a box chart.
    pub fn in_collar(&self, p: &Vector<T>) -> bool {
        if self.kind == ChartKind::FlatTorus || self.boundary_margin == T::zero() {
            return false;
        }
        (0..self.dim).any(|a| {
            p[a] < self.lower[a] + self.boundary_margin || p[a] > self.upper[a] - self.boundary_margin
        })
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self == other
    }
}

/// All grid nodes in row-major order (axis 0 slowest).
pub fn grid_points<T: Real>(chart: &ChartDomain<T>) -> Vec<Vector<T>> {
    (0..chart.node_count()).map(|i| chart.node(i)).collect()
}

type MatrixFn<T> = Arc<dyn Fn(&Vector<T>) -> Matrix<T> + Send + Sync>;
type ScalarFn<T> = Arc<dyn Fn(&Vector<T>) -> T + Send + Sync>;

/// Riemannian metric tensor in chart coordinates.
#[derive(Clone, Default)]
pub enum MetricField<T> {
    #[default]
    Euclidean,
    Constant(Matrix<T>),
    Function(MatrixFn<T>),
}

impl<T: Real> fmt::Debug for MetricField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean => write!(f, "Euclidean"),
            Self::Constant(m) => write!(f, "Constant({m:?})"),
            Self::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl<T: Real> MetricField<T> {
    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = linalg::identity();
        for (i, &d) in diag.iter().enumerate() {
            m[i][i] = d;
        }
        Self::Constant(m)
    }

    pub fn function(f: impl Fn(&Vector<T>) -> Matrix<T> + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    #[inline]
    pub fn evaluate(&self, u: &Vector<T>) -> Matrix<T> {
        match self {
            Self::Euclidean => linalg::identity(),
            Self::Constant(m) => *m,
            Self::Function(f) => f(u),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, Self::Euclidean)
    }

    /// Sweeps every node and checks symmetric positive definiteness.
    pub fn validate(&self, chart: &ChartDomain<T>) -> Result<()> {
        match self {
            Self::Euclidean => Ok(()),
            Self::Constant(m) => check_spd(m, chart.dim(), &linalg::zero()),
            Self::Function(_) => {
                for i in 0..chart.node_count() {
                    let u = chart.node(i);
                    check_spd(&self.evaluate(&u), chart.dim(), &u)?;
                }
                Ok(())
            }
        }
    }
}

fn check_spd<T: Real>(m: &Matrix<T>, dim: usize, u: &Vector<T>) -> Result<()> {
    if linalg::is_spd(m, dim) {
        Ok(())
    } else {
        Err(Error::InvalidMetric(format!(
            "metric not symmetric positive definite at {:?}",
            linalg::to_f64_vec(u, dim)
        )))
    }
}

/// `sqrt(vᵀ g(u) v)`.
pub fn metric_norm<T: Real>(v: &Vector<T>, u: &Vector<T>, g: &MetricField<T>, dim: usize) -> Result<T> {
    match g {
        MetricField::Euclidean => Ok(linalg::norm(v)),
        _ => {
            let m = g.evaluate(u);
            check_spd(&m, dim, u)?;
            let gv = linalg::mat_vec(&m, v);
            Ok((0..dim).map(|i| v[i] * gv[i]).sum::<T>().max(T::zero()).sqrt())
        }
    }
}

/// Density of the volume form with respect to chart Lebesgue measure.
#[derive(Clone, Default)]
pub enum VolumeDensity<T> {
    #[default]
    Uniform,
    Constant(T),
    Function(ScalarFn<T>),
}

impl<T: Real> fmt::Debug for VolumeDensity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "Uniform"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl<T: Real> VolumeDensity<T> {
    pub fn function(f: impl Fn(&Vector<T>) -> T + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    #[inline]
    pub fn evaluate(&self, u: &Vector<T>) -> T {
        match self {
            Self::Uniform => T::one(),
            Self::Constant(c) => *c,
            Self::Function(f) => f(u),
        }
    }

    /// Node quadrature weights multiplied by the density. Negative or
    /// non-finite samples are rejected; isolated zeros (e.g. `2x` at the
    /// origin) are accepted.
    pub fn weighted_nodes(&self, chart: &ChartDomain<T>) -> Result<Vec<T>> {
        let mut w = chart.quadrature_weights();
        if let Self::Uniform = self {
            return Ok(w);
        }
        for (i, wi) in w.iter_mut().enumerate() {
            let u = chart.node(i);
            let rho = self.evaluate(&u);
            if !(rho >= T::zero()) || !rho.is_finite() {
                return Err(Error::InvalidDensity(format!(
                    "density {} at {:?}",
                    rho,
                    linalg::to_f64_vec(&u, chart.dim())
                )));
            }
            *wi = *wi * rho;
        }
        Ok(w)
    }
}

/// `ω(chart)` by trapezoid (box) or midpoint (torus) quadrature.
pub fn total_volume<T: Real>(chart: &ChartDomain<T>, omega: &VolumeDensity<T>) -> Result<T> {
    Ok(omega.weighted_nodes(chart)?.into_iter().sum())
}
