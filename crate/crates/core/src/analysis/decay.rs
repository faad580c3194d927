//! Norm decay of fields compressed by the contractions `φ_n`.

use serde::{Deserialize, Serialize};

use crate::diffeo::make_contraction;
use crate::error::{Error, Result};
use crate::fields::{BallRegion, Field};
use crate::linalg::Vector;
use crate::scalar::Real;
use crate::transport::pullback;

/// Minimum number of cells across the smallest image ball `B(c, 1/n)`.
pub const MIN_CELLS_ACROSS: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub n_values: Vec<u32>,
    /// `‖L_{φ_n⁻¹}(1_B f)‖_p^p` for each `n`.
    pub norms: Vec<f64>,
    /// `‖1_B f‖_p^p`.
    pub baseline: f64,
    /// `n^{-(d+1)}·baseline` for vector fields, `n^{-d}·baseline` for scalars.
    pub bounds: Vec<f64>,
    /// Least-squares slope of `ln norm` against `ln n`.
    pub fitted_rate: f64,
    pub dim: usize,
    pub p: f64,
}

impl DecayCurve {
    /// Largest `norm / bound`.
    pub fn worst_ratio(&self) -> f64 {
        self.norms.iter().zip(&self.bounds).map(|(a, b)| a / b).fold(0.0, f64::max)
    }
}

/// Least-squares slope of `ln y` against `ln x`; NaN for fewer than two
/// distinct abscissae or a nonpositive ordinate.
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 || ys.iter().any(|&y| !(y > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Pushes `1_{B(center,1)} f` into `B(center, 1/n)` with the contraction
/// `φ_n` (profile width `eps`) and records `‖·‖_p^p` for each `n`.
///
/// The compressing action is the pullback by `φ_n⁻¹`; the pullback by `φ_n`
/// itself spreads the field outwards and grows the norm.
pub fn contraction_decay_test<T: Real>(
    f: &Field<T>,
    center: &Vector<T>,
    n_values: &[u32],
    p: T,
    eps: T,
) -> Result<DecayCurve> {
    let chart = f.chart();
    let dim = chart.dim();
    if n_values.is_empty() {
        return Err(Error::Precondition("no contraction factors given".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) || n_values[0] == 0 {
        return Err(Error::Precondition(format!("contraction factors must be positive and strictly increasing: {n_values:?}")));
    }
    let h = (0..dim).map(|a| chart.spacing(a).as_f64()).fold(0.0, f64::max);
    let nmax = *n_values.iter().max().expect("nonempty");
    let across = 2.0 / nmax as f64 / h;
    if across < MIN_CELLS_ACROSS {
        return Err(Error::UnderResolved(format!(
            "image ball B(c, 1/{nmax}) spans {across:.1} cells; need {MIN_CELLS_ACROSS}"
        )));
    }
    let g = f.mask(&BallRegion::new(*center, T::one()));
    let baseline = g.lp_norm_pow(p)?.as_f64();
    let exponent = match f {
        Field::Vector(_) => dim as f64 + 1.0,
        _ => dim as f64,
    };
    let mut norms = Vec::with_capacity(n_values.len());
    let mut bounds = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let phi = make_contraction(chart, n, eps, center, T::one())?;
        let moved = pullback(&phi.inverted(), &g)?;
        norms.push(moved.field.lp_norm_pow(p)?.as_f64());
        bounds.push(baseline * (n as f64).powf(-exponent));
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let fitted_rate = fitted_slope(&xs, &norms);
    Ok(DecayCurve { n_values: n_values.to_vec(), norms, baseline, bounds, fitted_rate, dim, p: p.as_f64() })
}
