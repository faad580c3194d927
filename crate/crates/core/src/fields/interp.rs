//! Multilinear and tensor-product cubic (Catmull-Rom) interpolation on chart
//! grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ChartDomain;
use crate::linalg::{self, Vector, MAX_DIM};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpOrder {
    Linear,
    #[default]
    Cubic,
}

impl InterpOrder {
    fn width(self) -> usize {
        match self {
            Self::Linear => 2,
            Self::Cubic => 4,
        }
    }

    fn offset(self) -> isize {
        match self {
            Self::Linear => 0,
            Self::Cubic => -1,
        }
    }
}

/// Fractional indices within this distance of an integer snap onto the node.
const SNAP: f64 = 1e-9;

/// Node indices and weights needed to evaluate a sampled field at one point.
#[derive(Clone, Copy, Debug)]
pub struct Stencil<T> {
    dim: usize,
    width: usize,
    /// Base node (the node at or below the point on every axis).
    base: [usize; MAX_DIM],
    /// Per-axis node indices, already wrapped or clamped.
    nodes: [[usize; 4]; MAX_DIM],
    weights: [[T; 4]; MAX_DIM],
}

#[inline]
fn catmull_rom<T: Real>(t: T) -> [T; 4] {
    let half = T::lit(0.5);
    let t2 = t * t;
    let t3 = t2 * t;
    [
        half * (-t3 + T::lit(2.0) * t2 - t),
        half * (T::lit(3.0) * t3 - T::lit(5.0) * t2 + T::lit(2.0)),
        half * (T::lit(-3.0) * t3 + T::lit(4.0) * t2 + t),
        half * (t3 - t2),
    ]
}

impl<T: Real> Stencil<T> {
    pub fn new(chart: &ChartDomain<T>, p: &Vector<T>, order: InterpOrder) -> Result<Self> {
        let dim = chart.dim();
        let width = order.width();
        let mut st = Self {
            dim,
            width,
            base: [0; MAX_DIM],
            nodes: [[0; 4]; MAX_DIM],
            weights: [[T::zero(); 4]; MAX_DIM],
        };
        let snap = T::lit(SNAP);
        for a in 0..dim {
            let n = chart.resolution()[a];
            let h = chart.spacing(a);
            let mut t = (p[a] - chart.lower()[a]) / h;
            if !t.is_finite() {
                return Err(Error::OutOfDomain { point: linalg::to_f64_vec(p, dim) });
            }
            let r = t.round();
            if (t - r).abs() < snap {
                t = r;
            }
            let nf = T::from_usize_lossy(n);
            if chart.is_torus() {
                t = t - nf * (t / nf).floor();
                if t >= nf {
                    t = t - nf;
                }
            } else {
                let last = nf - T::one();
                if t < T::zero() || t > last {
                    return Err(Error::OutOfDomain { point: linalg::to_f64_vec(p, dim) });
                }
            }
            let mut i0 = t.floor().to_isize().unwrap_or(0);
            let mut frac = t - T::from_isize(i0).unwrap_or_else(T::zero);
            if !chart.is_torus() && i0 as usize == n - 1 && n >= 2 {
                // Upper edge: express as the end of the last cell.
                i0 -= 1;
                frac = T::one();
            }
            st.base[a] = i0 as usize;
            let w = match order {
                InterpOrder::Linear => [T::one() - frac, frac, T::zero(), T::zero()],
                InterpOrder::Cubic => catmull_rom(frac),
            };
            st.weights[a] = w;
            for k in 0..width {
                let raw = i0 + order.offset() + k as isize;
                st.nodes[a][k] = if chart.is_torus() {
                    raw.rem_euclid(n as isize) as usize
                } else {
                    raw.clamp(0, n as isize - 1) as usize
                };
            }
        }
        Ok(st)
    }

    /// Flat index of the base node, used as the reference value.
    fn base_flat(&self, chart: &ChartDomain<T>) -> usize {
        let strides = chart.strides();
        let mut flat = 0;
        for a in 0..self.dim {
            let n = chart.resolution()[a];
            let i = if chart.is_torus() { self.base[a] % n } else { self.base[a].min(n - 1) };
            flat += i * strides[a];
        }
        flat
    }

    /// Interpolated value. Accumulates differences from the base sample so a
    /// locally constant field is reproduced exactly.
    #[inline]
    pub fn apply(&self, chart: &ChartDomain<T>, values: &[T]) -> T {
        let strides = chart.strides();
        let f0 = values[self.base_flat(chart)];
        let w = self.width;
        let mut acc = T::zero();
        match self.dim {
            1 => {
                for i in 0..w {
                    let wi = self.weights[0][i];
                    if wi != T::zero() {
                        acc = acc + wi * (values[self.nodes[0][i]] - f0);
                    }
                }
            }
            2 => {
                for i in 0..w {
                    let wi = self.weights[0][i];
                    if wi == T::zero() {
                        continue;
                    }
                    let row = self.nodes[0][i] * strides[0];
                    let mut inner = T::zero();
                    for j in 0..w {
                        let wj = self.weights[1][j];
                        if wj != T::zero() {
                            inner = inner + wj * (values[row + self.nodes[1][j]] - f0);
                        }
                    }
                    acc = acc + wi * inner;
                }
            }
            _ => {
                for i in 0..w {
                    let wi = self.weights[0][i];
                    if wi == T::zero() {
                        continue;
                    }
                    let oi = self.nodes[0][i] * strides[0];
                    let mut mid = T::zero();
                    for j in 0..w {
                        let wj = self.weights[1][j];
                        if wj == T::zero() {
                            continue;
                        }
                        let oj = oi + self.nodes[1][j] * strides[1];
                        let mut inner = T::zero();
                        for k in 0..w {
                            let wk = self.weights[2][k];
                            if wk != T::zero() {
                                inner = inner + wk * (values[oj + self.nodes[2][k]] - f0);
                            }
                        }
                        mid = mid + wj * inner;
                    }
                    acc = acc + wi * mid;
                }
            }
        }
        f0 + acc
    }
}
