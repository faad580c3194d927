//! Rotation-invariance of vector fields on a ball and their radial gain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::linalg::{self, Matrix, Vector};
use crate::scalar::Real;

/// Seed for sampled orthogonal matrices.
pub const ROTATION_SEED: u64 = 0x0507_a7e5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RotationFitOptions {
    /// Ball centre; the chart midpoint when `None`.
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub samples: usize,
    /// Include orientation-reversing matrices (every other sample).
    pub reflections: bool,
    pub bins: usize,
    pub min_per_bin: usize,
    pub seed: u64,
}

impl Default for RotationFitOptions {
    fn default() -> Self {
        Self { center: None, radius: 1.0, samples: 16, reflections: false, bins: 32, min_per_bin: 20, seed: ROTATION_SEED }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBin {
    /// Mean `|x|` of the nodes in the bin.
    pub r_mean: f64,
    /// Mean of `⟨F(x), x⟩ / |x|²`.
    pub lambda: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationFit {
    pub bins: Vec<RadialBin>,
    /// `max |F(Wx) − W F(x)|` over ball nodes and sampled `W`.
    pub max_violation: f64,
    /// `max |F(x) − λ(x) x|`: the non-radial part.
    pub orthogonal_residual: f64,
    pub samples: usize,
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix); with
/// `proper` the determinant is forced to `+1`, otherwise to `-1`.
pub fn random_orthogonal<T: Real>(dim: usize, rng: &mut ChaCha8Rng, proper: bool) -> Matrix<T> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            cols.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    let mut m: Matrix<T> = linalg::identity();
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m[i][j] = T::lit(*x);
        }
    }
    let det = linalg::det(&m, dim);
    if (det > T::zero()) != proper {
        for row in m.iter_mut().take(dim) {
            row[0] = -row[0];
        }
    }
    m
}

/// Measures `F(Wx) = W F(x)` on a ball for sampled orthogonal `W` and fits
/// the radial gain `λ(r)` of `F(x) ≈ λ(|x|) x` in `opts.bins` shells.
pub fn rotation_invariance_fit<T: Real>(f: &VectorField<T>, opts: &RotationFitOptions) -> Result<RotationFit> {
    let chart = f.chart();
    let dim = chart.dim();
    let center: Vector<T> = match &opts.center {
        Some(c) if c.len() == dim => linalg::vector_from_f64(c),
        Some(c) => return Err(Error::Precondition(format!("centre has {} coordinates on a {dim}-D chart", c.len()))),
        None => {
            let mut c = linalg::zero();
            for a in 0..dim {
                c[a] = (chart.lower()[a] + chart.upper()[a]) * T::lit(0.5);
            }
            c
        }
    };
    let radius = T::lit(opts.radius);
    if !chart.ball_fits(&center, radius) {
        return Err(Error::Region(format!("ball of radius {} does not fit the chart", opts.radius)));
    }
    if opts.bins == 0 {
        return Err(Error::Precondition("need at least one bin".into()));
    }
    let nodes: Vec<(usize, Vector<T>)> = (0..chart.node_count())
        .filter_map(|i| {
            let d = chart.displacement(&center, &chart.node(i));
            (linalg::norm(&d) < radius).then_some((i, d))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut violation = 0.0f64;
    for s in 0..opts.samples {
        let proper = !(opts.reflections && s % 2 == 1);
        let w: Matrix<T> = random_orthogonal(dim, &mut rng, proper);
        for (i, d) in &nodes {
            let x = linalg::add(&center, &linalg::mat_vec(&w, d));
            let lhs = f.eval(&x)?;
            let rhs = linalg::mat_vec(&w, &f.node_value(*i));
            violation = violation.max(linalg::norm(&linalg::sub(&lhs, &rhs)).as_f64());
        }
    }

    let nb = opts.bins;
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); nb];
    let mut ortho = 0.0f64;
    for (i, d) in &nodes {
        let r = linalg::norm(d);
        if r == T::zero() {
            continue;
        }
        let v = f.node_value(*i);
        let lam = linalg::dot(&v, d) / (r * r);
        ortho = ortho.max(linalg::norm(&linalg::sub(&v, &linalg::scale(lam, d))).as_f64());
        let b = ((r / radius).as_f64() * nb as f64).floor().min(nb as f64 - 1.0) as usize;
        sums[b].0 += r.as_f64();
        sums[b].1 += lam.as_f64();
        sums[b].2 += 1;
    }
    if let Some((b, s)) = sums.iter().enumerate().find(|(_, s)| s.2 < opts.min_per_bin) {
        return Err(Error::UnderResolved(format!("radial bin {b} holds {} nodes; need {}", s.2, opts.min_per_bin)));
    }
    let bins = sums
        .iter()
        .map(|&(r, l, c)| RadialBin { r_mean: r / c as f64, lambda: l / c as f64, count: c })
        .collect();
    Ok(RotationFit { bins, max_violation: violation, orthogonal_residual: ortho, samples: opts.samples })
}
