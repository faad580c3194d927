//! Approximation of `1_U f` by finite sums `Σ cᵢ 1_{Uᵢ}` over disjoint balls
//! `Uᵢ ⊂ U`, built by greedy largest-first packing.

use std::collections::HashMap;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BallRegion, ScalarField};
use crate::linalg;
use crate::scalar::Real;

/// Largest admissible spectral energy fraction above half the Nyquist
/// frequency.
pub const BANDLIMIT_MAX: f64 = 0.01;
/// Ratio between successive packing radii.
const RADIUS_RATIO: f64 = 0.8;
/// Smallest radius in cells; a `3h` lattice of such balls covers every node.
const NODE_RADIUS: f64 = 1.49;
/// Radius (in cells) below which every node is a candidate centre.
const FINE_LATTICE: f64 = 12.0;
/// Radius (in cells) of the closing single-node balls.
const SINGLE_RADIUS: f64 = 0.49;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VitaliPiece {
    pub center: Vec<f64>,
    pub radius: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VitaliResult {
    pub pieces: Vec<VitaliPiece>,
    /// `‖Σ cᵢ 1_{Uᵢ} − 1_U f‖_p` at the nodes.
    pub achieved_error: f64,
    pub target: f64,
    /// Oscillation allowed inside one ball.
    pub local_tolerance: f64,
    pub bandlimit_ratio: f64,
}

/// Fraction of the discrete spectral energy of `f` with some frequency index
/// above a quarter of the samples on its axis.
pub fn bandlimit_ratio<T: Real>(f: &ScalarField<T>) -> f64 {
    let chart = f.chart();
    let dim = chart.dim();
    let res = chart.resolution();
    let strides = chart.strides();
    let mut data: Vec<Complex64> = f.values().iter().map(|v| Complex64::new(v.as_f64(), 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    for a in 0..dim {
        let n = res[a];
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in 0..data.len() {
            if !(start / strides[a]).is_multiple_of(n) {
                continue;
            }
            for (k, z) in line.iter_mut().enumerate() {
                *z = data[start + k * strides[a]];
            }
            fft.process(&mut line);
            for (k, z) in line.iter().enumerate() {
                data[start + k * strides[a]] = *z;
            }
        }
    }
    let (mut high, mut total) = (0.0, 0.0);
    for (i, z) in data.iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        let idx = chart.multi_index(i);
        if (0..dim).any(|a| {
            let k = idx[a].min(res[a] - idx[a]);
            4 * k > res[a]
        }) {
            high += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

struct Ball {
    d: Vec<f64>,
    r: f64,
}

struct Packing {
    balls: Vec<(Ball, f64)>,
    error: f64,
}

struct Grid<'a, T: Real> {
    f: &'a ScalarField<T>,
    dim: usize,
    h: Vec<f64>,
    res: Vec<usize>,
    torus: bool,
    /// Displacement of the anchor node from the centre of `U`.
    anchor_d: Vec<f64>,
    anchor: Vec<usize>,
    radius: f64,
    centre_value: f64,
    weights: Vec<T>,
    p: f64,
}

impl<T: Real> Grid<'_, T> {
    /// Flat index of the node at `offset` from the anchor, if it exists.
    fn node(&self, offset: &[isize]) -> Option<usize> {
        let strides = self.f.chart().strides();
        let mut flat = 0;
        for a in 0..self.dim {
            let n = self.res[a] as isize;
            let mut i = self.anchor[a] as isize + offset[a];
            if self.torus {
                i = i.rem_euclid(n);
            } else if i < 0 || i >= n {
                return None;
            }
            flat += i as usize * strides[a];
        }
        Some(flat)
    }

    fn disp(&self, offset: &[isize]) -> Vec<f64> {
        (0..self.dim).map(|a| self.anchor_d[a] + offset[a] as f64 * self.h[a]).collect()
    }

    /// Calls `visit(flat, displacement)` for each node offset in `[-k, k]^d`
    /// around `base`.
    fn for_box(&self, base: &[isize], k: &[isize], mut visit: impl FnMut(usize, &[f64])) {
        let mut o = vec![0isize; self.dim];
        for a in 0..self.dim {
            o[a] = base[a] - k[a];
        }
        loop {
            if let Some(flat) = self.node(&o) {
                visit(flat, &self.disp(&o));
            }
            let mut a = self.dim;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                o[a] += 1;
                if o[a] <= base[a] + k[a] {
                    break;
                }
                o[a] = base[a] - k[a];
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closed balls registered in square buckets for disjointness queries.
struct Buckets {
    size: f64,
    dim: usize,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl Buckets {
    fn keys(&self, c: &[f64], r: f64) -> Vec<Vec<i64>> {
        let lo: Vec<i64> = c.iter().map(|x| ((x - r) / self.size).floor() as i64).collect();
        let hi: Vec<i64> = c.iter().map(|x| ((x + r) / self.size).floor() as i64).collect();
        let mut out = Vec::new();
        let mut k = lo.clone();
        loop {
            out.push(k.clone());
            let mut a = self.dim;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                k[a] += 1;
                if k[a] <= hi[a] {
                    break;
                }
                k[a] = lo[a];
            }
        }
    }

    fn insert(&mut self, id: usize, c: &[f64], r: f64) {
        for k in self.keys(c, r) {
            self.map.entry(k).or_default().push(id);
        }
    }

    fn collides(&self, balls: &[(Ball, f64)], c: &[f64], r: f64) -> bool {
        self.keys(c, r).iter().any(|k| {
            self.map.get(k).is_some_and(|ids| ids.iter().any(|&i| dist(&balls[i].0.d, c) <= balls[i].0.r + r))
        })
    }
}

fn pack<T: Real>(g: &Grid<T>, inside: &[(usize, Vec<f64>)], tol: f64, eps: f64, max_balls: usize) -> Result<Packing, f64> {
    let vals = g.f.values();
    let p = g.p;
    let hmax = g.h.iter().copied().fold(0.0, f64::max);
    let rmin = NODE_RADIUS * hmax;
    let mut slot = vec![usize::MAX; vals.len()];
    for (s, (i, _)) in inside.iter().enumerate() {
        slot[*i] = s;
    }
    let mut covered = vec![false; inside.len()];
    let mut approx = vec![0.0f64; inside.len()];
    let mut balls: Vec<(Ball, f64)> = Vec::new();
    let mut buckets = Buckets { size: 4.0 * hmax, dim: g.dim, map: HashMap::new() };
    // Running p-th power of the error.
    let mut err_p: f64 = inside.iter().map(|(i, _)| vals[*i].as_f64().abs().powf(p) * g.weights[*i].as_f64()).sum();
    let target_p = eps.powf(p);
    let mut r = g.radius;
    let mut first = true;
    while r >= rmin * 0.999 {
        let step = if r <= FINE_LATTICE * hmax { 1 } else { ((r / (3.0 * hmax)).floor() as isize).max(1) };
        let kmax: Vec<isize> = (0..g.dim).map(|a| ((g.radius - r) / g.h[a]).floor() as isize + 1).collect();
        let reach: Vec<isize> = (0..g.dim).map(|a| (r / g.h[a]).ceil() as isize).collect();
        let mut candidates: Vec<Option<Vec<isize>>> = Vec::new();
        if first {
            candidates.push(None);
        }
        let mut o: Vec<isize> = kmax.iter().map(|k| -(k / step) * step).collect();
        'lattice: loop {
            candidates.push(Some(o.clone()));
            let mut a = g.dim;
            loop {
                if a == 0 {
                    break 'lattice;
                }
                a -= 1;
                o[a] += step;
                if o[a] <= kmax[a] {
                    break;
                }
                o[a] = -(kmax[a] / step) * step;
            }
        }
        for off in candidates {
            let c = match &off {
                Some(off) => g.disp(off),
                None => vec![0.0; g.dim],
            };
            if dist(&c, &vec![0.0; g.dim]) + r > g.radius {
                continue;
            }
            if let Some(off) = &off {
                match g.node(off) {
                    Some(i) if slot[i] != usize::MAX && covered[slot[i]] => continue,
                    None => continue,
                    _ => {}
                }
            }
            if buckets.collides(&balls, &c, r) {
                continue;
            }
            let mut members = Vec::new();
            let base = off.clone().unwrap_or_else(|| vec![0; g.dim]);
            g.for_box(&base, &reach, |flat, d| {
                if slot[flat] != usize::MAX && dist(d, &c) < r {
                    members.push(slot[flat]);
                }
            });
            if members.is_empty() {
                continue;
            }
            let value = match &off {
                Some(off) => vals[g.node(off).expect("checked")].as_f64(),
                None => g.centre_value,
            };
            let (mut before, mut after) = (0.0, 0.0);
            for &s in &members {
                let (v, w) = (vals[inside[s].0].as_f64(), g.weights[inside[s].0].as_f64());
                before += v.abs().powf(p) * w;
                after += (v - value).abs().powf(p) * w;
            }
            if !(after < before) || members.iter().any(|&s| (vals[inside[s].0].as_f64() - value).abs() >= tol) {
                continue;
            }
            for &s in &members {
                covered[s] = true;
                approx[s] = value;
            }
            buckets.insert(balls.len(), &c, r);
            balls.push((Ball { d: c, r }, value));
            err_p -= before - after;
            if balls.len() > max_balls {
                return Err(err_p.max(0.0).powf(1.0 / p));
            }
            if err_p < target_p {
                return Ok(Packing { balls, error: recompute(g, inside, &approx) });
            }
        }
        first = false;
        r = if r > rmin && r * RADIUS_RATIO < rmin { rmin } else { r * RADIUS_RATIO };
    }

    // Single-node balls in the gaps, heaviest first.
    let mut rest: Vec<usize> = (0..inside.len()).filter(|&s| !covered[s] && vals[inside[s].0] != T::zero()).collect();
    let mass = |s: usize| vals[inside[s].0].as_f64().abs().powf(p) * g.weights[inside[s].0].as_f64();
    rest.sort_by(|&a, &b| mass(b).total_cmp(&mass(a)).then(a.cmp(&b)));
    let single = SINGLE_RADIUS * g.h.iter().copied().fold(f64::INFINITY, f64::min);
    for s in rest {
        let c = inside[s].1.clone();
        let mut r = single.min(g.radius - dist(&c, &vec![0.0; g.dim]));
        for k in buckets.keys(&c, r) {
            if let Some(ids) = buckets.map.get(&k) {
                for &i in ids {
                    r = r.min(0.99 * (dist(&balls[i].0.d, &c) - balls[i].0.r));
                }
            }
        }
        if !(r > 0.0) {
            continue;
        }
        let value = vals[inside[s].0].as_f64();
        covered[s] = true;
        approx[s] = value;
        buckets.insert(balls.len(), &c, r);
        balls.push((Ball { d: c, r }, value));
        err_p -= mass(s);
        if balls.len() > max_balls {
            return Err(err_p.max(0.0).powf(1.0 / p));
        }
        if err_p < target_p {
            return Ok(Packing { balls, error: recompute(g, inside, &approx) });
        }
    }
    Err(err_p.max(0.0).powf(1.0 / p))
}

/// Error of the final approximation measured from scratch.
fn recompute<T: Real>(g: &Grid<T>, inside: &[(usize, Vec<f64>)], approx: &[f64]) -> f64 {
    let vals = g.f.values();
    inside
        .iter()
        .zip(approx)
        .map(|((i, _), a)| (a - vals[*i].as_f64()).abs().powf(g.p) * g.weights[*i].as_f64())
        .sum::<f64>()
        .powf(1.0 / g.p)
}

/// Greedy disjoint-ball approximation of `1_U f` to `L^p` accuracy `eps`
/// using at most `max_balls` balls. Requires a bandlimited `f` (see
/// [`bandlimit_ratio`]).
pub fn vitali_approximate<T: Real>(
    f: &ScalarField<T>,
    u: &BallRegion<T>,
    eps: T,
    max_balls: usize,
    p: T,
) -> Result<VitaliResult> {
    let chart = f.chart();
    u.validate(chart)?;
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::InvalidExponent(p.as_f64()));
    }
    let ratio = bandlimit_ratio(f);
    if ratio > BANDLIMIT_MAX {
        return Err(Error::Precondition(format!(
            "field is not bandlimited: {ratio:.3e} of its energy lies above half the Nyquist frequency"
        )));
    }
    let dim = chart.dim();
    let eps_f = eps.as_f64();
    let p_f = p.as_f64();
    let weights = chart.quadrature_weights();
    let mask = u.node_mask(chart);
    let inside: Vec<(usize, Vec<f64>)> = (0..chart.node_count())
        .filter(|&i| mask[i])
        .map(|i| (i, linalg::to_f64_vec(&chart.displacement(&u.center, &chart.node(i)), dim)))
        .collect();
    let norm_u: f64 = inside
        .iter()
        .map(|(i, _)| f.values()[*i].as_f64().abs().powf(p_f) * weights[*i].as_f64())
        .sum::<f64>()
        .powf(1.0 / p_f);
    if eps_f > norm_u {
        return Ok(VitaliResult {
            pieces: Vec::new(),
            achieved_error: norm_u,
            target: eps_f,
            local_tolerance: f64::INFINITY,
            bandlimit_ratio: ratio,
        });
    }

    let h: Vec<f64> = (0..dim).map(|a| chart.spacing(a).as_f64()).collect();
    let mut anchor = vec![0usize; dim];
    let mut anchor_d = vec![0.0; dim];
    for a in 0..dim {
        let t = (u.center[a] - chart.lower()[a]).as_f64() / h[a];
        let n = chart.resolution()[a] as isize;
        let i = t.round() as isize;
        let i = if chart.is_torus() { i.rem_euclid(n) } else { i.clamp(0, n - 1) };
        anchor[a] = i as usize;
    }
    let anchor_flat = chart.flat_index(&{
        let mut m = [0usize; linalg::MAX_DIM];
        m[..dim].copy_from_slice(&anchor);
        m
    });
    let ad = chart.displacement(&u.center, &chart.node(anchor_flat));
    for a in 0..dim {
        anchor_d[a] = ad[a].as_f64();
    }
    let grid = Grid {
        f,
        dim,
        h,
        res: chart.resolution().to_vec(),
        torus: chart.is_torus(),
        anchor_d,
        anchor,
        radius: u.radius.as_f64(),
        centre_value: f.eval(&u.center)?.as_f64(),
        weights,
        p: p_f,
    };
    let vol: f64 = inside.iter().map(|(i, _)| grid.weights[*i].as_f64()).sum();
    let base_tol = eps_f / vol.powf(1.0 / p_f);
    let mut best = f64::INFINITY;
    for k in 0..10 {
        let tol = base_tol * 16.0 * 0.5f64.powi(k);
        match pack(&grid, &inside, tol, eps_f, max_balls) {
            Ok(pk) => {
                let pieces = pk
                    .balls
                    .into_iter()
                    .map(|(b, value)| {
                        let mut c = u.center;
                        for a in 0..dim {
                            c[a] = c[a] + T::lit(b.d[a]);
                        }
                        let c = linalg::to_f64_vec(&chart.wrap(&c), dim);
                        VitaliPiece { center: c, radius: b.r, value }
                    })
                    .collect();
                return Ok(VitaliResult {
                    pieces,
                    achieved_error: pk.error,
                    target: eps_f,
                    local_tolerance: tol,
                    bandlimit_ratio: ratio,
                });
            }
            Err(e) => best = best.min(e),
        }
    }
    Err(Error::Budget { balls: max_balls, best })
}
