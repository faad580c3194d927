use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;

use super::{fd_jacobian, make_rotation_conjugation, newton_solve, smoothstep, Diffeo, DiffeoSpec, MapKernel, Support};
use crate::error::{Error, Result};
use crate::fields::{BallRegion, FieldSpec, VectorField};
use crate::geometry::ChartDomain;
use crate::linalg::{self, Matrix, Vector};
use crate::scalar::Real;

struct Flowbox<T: Real> {
    dim: usize,
    field: Arc<VectorField<T>>,
    field_spec: FieldSpec,
    m: Vector<T>,
    q: Matrix<T>,
    speed: T,
    steps: usize,
    radius: T,
    rot: Diffeo<T>,
}

impl<T: Real> Flowbox<T> {
    #[inline]
    fn velocity(&self, x: &Vector<T>) -> Vector<T> {
        self.field.eval(x).unwrap_or_else(|_| linalg::zero())
    }

    /// Classical RK4 flow of the field for time `t`.
    fn flow(&self, x0: Vector<T>, t: T) -> Vector<T> {
        if t == T::zero() {
            return x0;
        }
        let h = t / T::from_usize_lossy(self.steps);
        let half = h / T::lit(2.0);
        let sixth = h / T::lit(6.0);
        let mut x = x0;
        for _ in 0..self.steps {
            let k1 = self.velocity(&x);
            let k2 = self.velocity(&linalg::add(&x, &linalg::scale(half, &k1)));
            let k3 = self.velocity(&linalg::add(&x, &linalg::scale(half, &k2)));
            let k4 = self.velocity(&linalg::add(&x, &linalg::scale(h, &k3)));
            let mut inc = linalg::add(&k1, &k4);
            inc = linalg::add(&inc, &linalg::scale(T::lit(2.0), &linalg::add(&k2, &k3)));
            x = linalg::add(&x, &linalg::scale(sixth, &inc));
        }
        x
    }

    /// `(t, s) ↦ Flow_{t/|f(m)|}(m + Σ s_j q_j)` in the frame `q`.
    fn local(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        let d = chart.displacement(&self.m, u);
        let mut seed = self.m;
        for j in 1..self.dim {
            for a in 0..self.dim {
                seed[a] = seed[a] + d[j] * self.q[a][j];
            }
        }
        self.flow(seed, d[0] / self.speed)
    }

    #[inline]
    fn chi(&self, r: T) -> T {
        T::one() - smoothstep((r - self.radius) / self.radius)
    }
}

impl<T: Real> MapKernel<T> for Flowbox<T> {
    fn forward(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        let v = self.rot.forward(u);
        let chi = self.chi(chart.distance(&self.m, &v));
        if chi == T::zero() {
            return v;
        }
        let back = linalg::add(&self.m, &linalg::mat_vec(&linalg::transpose(&self.q), &chart.displacement(&self.m, &v)));
        let g = self.local(chart, &back);
        linalg::add(&v, &linalg::scale(chi, &chart.displacement(&v, &g)))
    }

    fn inverse(&self, chart: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        let tol = T::lit(1e-10);
        let fwd = |x: &Vector<T>| self.forward(chart, x);
        let jac = |x: &Vector<T>| fd_jacobian(chart, fwd, x, chart.min_spacing() / T::lit(2.0));
        let d = chart.displacement(&self.m, v);
        let guess = linalg::add(&self.m, &linalg::mat_vec(&linalg::transpose(&self.q), &d));
        let x = newton_solve(chart, fwd, jac, v, guess, tol, 50);
        if chart.distance(&fwd(&x), v) <= tol {
            return x;
        }
        let y = newton_solve(chart, fwd, jac, v, *v, tol, 50);
        if chart.distance(&fwd(&y), v) < chart.distance(&fwd(&x), v) {
            y
        } else {
            x
        }
    }

    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::Flowbox {
            field: self.field_spec.clone(),
            m: linalg::to_f64_vec(&self.m, self.dim),
            radius: self.radius.as_f64(),
            steps: self.steps,
        }
    }

    fn numeric_inverse(&self) -> bool {
        true
    }
}

/// Orthonormal frame with first column `e`, completed by Gram–Schmidt and
/// oriented so that its determinant is positive.
fn frame<T: Real>(e: &Vector<T>, dim: usize) -> Matrix<T> {
    let mut cols: Vec<Vector<T>> = vec![*e];
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    for k in order {
        if cols.len() == dim {
            break;
        }
        let mut v = linalg::zero();
        v[k] = T::one();
        for c in &cols {
            v = linalg::sub(&v, &linalg::scale(linalg::dot(&v, c), c));
        }
        let n = linalg::norm(&v);
        if n > T::lit(1e-6) {
            cols.push(linalg::scale(T::one() / n, &v));
        }
    }
    let mut q = linalg::identity();
    for (j, c) in cols.iter().enumerate() {
        for a in 0..dim {
            q[a][j] = c[a];
        }
    }
    if dim > 1 && linalg::det(&q, dim) < T::zero() {
        for row in q.iter_mut().take(dim) {
            row[dim - 1] = -row[dim - 1];
        }
    }
    q
}

/// Flowbox straightening of `f` near `m`: on `B(m, radius)` the returned map is
/// `(t, s) ↦ Flow_{t/|f(m)|}(m + Σ s_j n_j)`, so that pulling `f` back by it
/// gives `|f(m)| e₁` there. Outside, it is blended to the identity across a
/// collar of width `radius`.
pub fn flowbox_straighten<T: Real>(f: &VectorField<T>, m: &Vector<T>, radius: T, steps: usize) -> Result<Diffeo<T>> {
    flowbox_with_spec(f, m, radius, steps, FieldSpec::Named { label: "sampled".into() })
}

pub(crate) fn flowbox_with_spec<T: Real>(
    f: &VectorField<T>,
    m: &Vector<T>,
    radius: T,
    steps: usize,
    field_spec: FieldSpec,
) -> Result<Diffeo<T>> {
    let chart = f.chart().clone();
    let dim = chart.dim();
    if steps == 0 {
        return Err(Error::Construction("flowbox needs at least one integrator step".into()));
    }
    BallRegion::new(*m, radius + radius).validate(&chart)?;
    let fm = f.eval(m)?;
    let speed = linalg::norm(&fm);
    if !(speed > T::zero()) {
        return Err(Error::DegenerateField(format!("f vanishes at m = {:?}", linalg::to_f64_vec(m, dim))));
    }
    let ball = BallRegion::new(*m, radius);
    let floor = speed * T::lit(1e-9);
    for i in 0..chart.node_count() {
        let x = chart.node(i);
        if ball.contains(&chart, &x) && !(linalg::norm(&f.node_value(i)) > floor) {
            return Err(Error::DegenerateField(format!(
                "f vanishes at node {:?} inside B(m, {radius}); perturb it away from zero first",
                linalg::to_f64_vec(&x, dim)
            )));
        }
    }
    if let Some(cell) = vanishing_cell(f, &ball) {
        return Err(Error::DegenerateField(format!(
            "every component of f changes sign in the grid cell at {:?} inside B(m, {radius})",
            linalg::to_f64_vec(&cell, dim)
        )));
    }
    let e = linalg::scale(T::one() / speed, &fm);
    if dim == 1 && e[0] < T::zero() {
        return Err(Error::Construction("in one dimension f(m) must be positive to straighten orientably".into()));
    }
    let q = frame(&e, dim);
    let rot = make_rotation_conjugation(&chart, &q, &ball, radius)?;
    let kern = Flowbox { dim, field: Arc::new(f.clone()), field_spec, m: *m, q, speed, steps, radius, rot };
    let label = format!("flowbox(m={:?},r={radius},steps={steps})", linalg::to_f64_vec(m, dim));
    let support = Support::Ball(BallRegion::new(*m, radius + radius));
    let phi = Diffeo::from_kernel(chart.clone(), kern, support, label);

    // The blended part must stay a small perturbation of the identity.
    let nodes: Vec<usize> = (0..chart.node_count()).filter(|&i| !support.excludes(&chart, &chart.node(i))).collect();
    let rot = make_rotation_conjugation(&chart, &q, &ball, radius)?;
    let worst = nodes
        .par_iter()
        .map(|&i| {
            let u = chart.node(i);
            let jr = rot.jacobian(&u);
            let jp = phi.jacobian(&u);
            let Some(jri) = linalg::inverse(&jr, dim) else { return T::infinity() };
            let g = linalg::mat_add_scaled(&linalg::mat_mul(&jp, &jri), -T::one(), &linalg::identity());
            linalg::op_norm(&g, dim)
        })
        .reduce(|| T::zero(), T::max);
    if !(worst < T::one()) {
        return Err(Error::Construction(format!(
            "flowbox blend is not a diffeomorphism (‖dg‖ = {worst}); use a smaller radius"
        )));
    }
    Ok(phi)
}

/// Lower corner of a grid cell meeting `ball` in which every component
/// takes both signs (a necessary condition for an interior zero).
fn vanishing_cell<T: Real>(f: &VectorField<T>, ball: &BallRegion<T>) -> Option<Vector<T>> {
    let chart = f.chart();
    let dim = chart.dim();
    let res = chart.resolution();
    let widest = (0..dim).map(|a| chart.spacing(a)).fold(T::zero(), T::max);
    let reach = ball.radius + widest * T::lit(2.0);
    for i in 0..chart.node_count() {
        let base = chart.node(i);
        if chart.distance(&base, &ball.center) > reach {
            continue;
        }
        let idx = chart.multi_index(i);
        let mut corners = Vec::with_capacity(1 << dim);
        let mut ok = true;
        for mask in 0..(1usize << dim) {
            let mut j = idx;
            for a in 0..dim {
                if mask >> a & 1 == 1 {
                    j[a] += 1;
                    if j[a] == res[a] {
                        if chart.is_torus() {
                            j[a] = 0;
                        } else {
                            ok = false;
                        }
                    }
                }
            }
            if !ok {
                break;
            }
            corners.push(chart.flat_index(&j));
        }
        if !ok || !corners.iter().any(|&k| ball.contains(chart, &chart.node(k))) {
            continue;
        }
        let crosses = f.components().iter().all(|c| {
            let lo = corners.iter().map(|&k| c[k]).fold(T::infinity(), T::min);
            let hi = corners.iter().map(|&k| c[k]).fold(T::neg_infinity(), T::max);
            lo <= T::zero() && hi >= T::zero()
        });
        if crosses {
            return Some(base);
        }
    }
    None
}

/// `‖1_{B(m,r)} (L_φ f - |f(m)| e₁)‖₂`.
pub fn straightening_residual<T: Real>(phi: &Diffeo<T>, f: &VectorField<T>, m: &Vector<T>, r: T) -> Result<T> {
    let chart = f.chart();
    let out = crate::transport::pullback_vector(phi, f)?;
    let g = out.field.as_vector()?;
    let speed = linalg::norm(&f.eval(m)?);
    let ball = BallRegion::new(*m, r);
    let w = chart.quadrature_weights();
    let mut acc = T::zero();
    for (i, wi) in w.iter().enumerate() {
        if ball.contains(chart, &chart.node(i)) {
            let mut d = g.node_value(i);
            d[0] = d[0] - speed;
            acc = acc + linalg::dot(&d, &d) * *wi;
        }
    }
    Ok(acc.sqrt())
}

/// `f + 2ε χ^ε e` on `U`, with `χ^ε = 1` where `|f| <= ε` and `0` where
/// `|f| >= 2ε`; the direction `e` is chosen per connected near-zero set.
pub fn perturb_away_from_zero<T: Real>(f: &VectorField<T>, eps: T, u: &BallRegion<T>) -> Result<VectorField<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    let chart = f.chart().clone();
    u.validate(&chart)?;
    let dim = chart.dim();
    let n = chart.node_count();
    let mags = f.magnitudes();
    let inside = u.node_mask(&chart);
    let two_eps = eps + eps;
    let chi: Vec<T> = (0..n)
        .map(|i| if inside[i] { T::one() - smoothstep((mags[i] - eps) / eps) } else { T::zero() })
        .collect();
    let near: Vec<bool> = (0..n).map(|i| inside[i] && mags[i] < two_eps).collect();

    let mut comps = f.components().to_vec();
    let mut seen = vec![false; n];
    for start in 0..n {
        if !near[start] || seen[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for j in neighbours(&chart, i) {
                if near[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let mut best: Option<(T, Vector<T>)> = None;
        for axis in 0..dim {
            for sign in [T::one(), -T::one()] {
                let mut e = linalg::zero();
                e[axis] = sign;
                let worst = members
                    .iter()
                    .map(|&i| linalg::norm(&linalg::add(&f.node_value(i), &linalg::scale(two_eps * chi[i], &e))))
                    .fold(T::infinity(), T::min);
                if best.is_none_or(|(b, _)| worst > b) {
                    best = Some((worst, e));
                }
            }
        }
        let (_, e) = best.expect("at least one direction");
        for &i in &members {
            for a in 0..dim {
                comps[a][i] = comps[a][i] + two_eps * chi[i] * e[a];
            }
        }
    }
    VectorField::new(chart, comps, f.interp())
}

fn neighbours<T: Real>(chart: &ChartDomain<T>, i: usize) -> Vec<usize> {
    let idx = chart.multi_index(i);
    let res = chart.resolution();
    let mut out = Vec::with_capacity(2 * chart.dim());
    for a in 0..chart.dim() {
        for up in [false, true] {
            let mut j = idx;
            if up {
                if idx[a] + 1 < res[a] {
                    j[a] += 1;
                } else if chart.is_torus() {
                    j[a] = 0;
                } else {
                    continue;
                }
            } else if idx[a] > 0 {
                j[a] -= 1;
            } else if chart.is_torus() {
                j[a] = res[a] - 1;
            } else {
                continue;
            }
            out.push(chart.flat_index(&j));
        }
    }
    out
}
