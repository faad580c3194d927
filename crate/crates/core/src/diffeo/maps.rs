use std::sync::Arc;

use super::{newton_solve, smoothstep, smoothstep_derivative, Diffeo, DiffeoSpec, MapKernel, Support, TransitionProfile};
use crate::error::{Error, Result};
use crate::fields::{bump_profile, bump_profile_derivative, BallRegion};
use crate::geometry::ChartDomain;
use crate::linalg::{self, Matrix, Vector};
use crate::scalar::Real;

/// `sup |f'|` over `[0, 1]` for the bump profile `f(s) = exp(1 - 1/(1 - s²))`.
pub const BUMP_SLOPE_MAX: f64 = 2.170357085708876;

fn v64<T: Real>(v: &Vector<T>, dim: usize) -> Vec<f64> {
    linalg::to_f64_vec(v, dim)
}

fn check_dim<T: Real>(chart: &ChartDomain<T>, m: &Matrix<T>, name: &str) -> Result<()> {
    for i in 0..linalg::MAX_DIM {
        for j in 0..linalg::MAX_DIM {
            let pad = i >= chart.dim() || j >= chart.dim();
            if !m[i][j].is_finite() || (pad && m[i][j] != if i == j { T::one() } else { T::zero() }) {
                return Err(Error::Construction(format!("{name} must be a finite {0}x{0} matrix", chart.dim())));
            }
        }
    }
    Ok(())
}

struct Contraction<T> {
    dim: usize,
    n: u32,
    eps: T,
    center: Vector<T>,
    scale: T,
    profile: TransitionProfile<T>,
}

impl<T: Real> Contraction<T> {
    #[inline]
    fn f(&self, rho: T) -> T {
        self.profile.evaluate((rho - T::one()) / self.eps)
    }

    #[inline]
    fn df(&self, rho: T) -> T {
        self.profile.derivative((rho - T::one()) / self.eps) / self.eps
    }
}

impl<T: Real> MapKernel<T> for Contraction<T> {
    fn forward(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        let d = chart.displacement(&self.center, u);
        let rho = linalg::norm(&d) / self.scale;
        linalg::add(&self.center, &linalg::scale(self.f(rho), &d))
    }

    fn inverse(&self, chart: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        let d = chart.displacement(&self.center, v);
        let r = linalg::norm(&d);
        if r == T::zero() {
            return self.center;
        }
        let target = r / self.scale;
        let n = T::lit(self.n as f64);
        let rho = if target * n <= T::one() {
            target * n
        } else {
            // ρ·f(ρ) is strictly increasing on [1, 1 + ε]: safeguarded Newton.
            let (mut lo, mut hi) = (T::one(), T::one() + self.eps);
            let mut x = (lo + hi) / T::lit(2.0);
            for _ in 0..200 {
                let g = x * self.f(x) - target;
                if g > T::zero() {
                    hi = x;
                } else {
                    lo = x;
                }
                let dg = self.f(x) + x * self.df(x);
                let mut nx = x - g / dg;
                if !(nx > lo && nx < hi) {
                    nx = (lo + hi) / T::lit(2.0);
                }
                if (nx - x).abs() <= T::eps() * x || hi - lo <= T::eps() * hi {
                    x = nx;
                    break;
                }
                x = nx;
            }
            x
        };
        linalg::add(&self.center, &linalg::scale(rho / target, &d))
    }

    fn jacobian(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Option<Matrix<T>> {
        let d = chart.displacement(&self.center, u);
        let r = linalg::norm(&d);
        let rho = r / self.scale;
        let mut j = linalg::diag_scalar(self.f(rho), chart.dim());
        if r > T::zero() {
            let c = self.df(rho) / (self.scale * r);
            j = linalg::mat_add_scaled(&j, c, &linalg::outer(&d, &d));
        }
        Some(j)
    }

    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::Contraction {
            n: self.n,
            eps: self.eps.as_f64(),
            center: v64(&self.center, self.dim),
            scale: self.scale.as_f64(),
        }
    }
}

/// `φ_n(u) = c + f_n(|u - c|/s)(u - c)`: contracts `B(c, s)` onto `B(c, s/n)`
/// and is the identity outside `B(c, s(1 + ε))`.
pub fn make_contraction<T: Real>(
    chart: &Arc<ChartDomain<T>>,
    n: u32,
    eps: T,
    center: &Vector<T>,
    scale: T,
) -> Result<Diffeo<T>> {
    if n == 0 || !(eps > T::zero()) || !(scale > T::zero()) {
        return Err(Error::Construction(format!("contraction needs n >= 1, eps > 0, scale > 0 (got {n}, {eps}, {scale})")));
    }
    let region = BallRegion::new(*center, scale * (T::one() + eps));
    region.validate(chart)?;
    let label = format!("contraction(n={n},eps={eps},s={scale})");
    let support = if n == 1 { Support::Empty } else { Support::Ball(region) };
    let k = Contraction {
        dim: chart.dim(),
        n,
        eps,
        center: *center,
        scale,
        profile: TransitionProfile::new(T::one() / T::lit(n as f64), T::one()),
    };
    Ok(Diffeo::from_kernel(chart.clone(), k, support, label))
}

struct PointTransport<T> {
    dim: usize,
    x0: Vector<T>,
    x1: Vector<T>,
    center: Vector<T>,
    rho: T,
    delta: Vector<T>,
    steps: Vec<(Vector<T>, T)>,
}

impl<T: Real> PointTransport<T> {
    #[inline]
    fn step(&self, chart: &ChartDomain<T>, k: usize, x: &Vector<T>) -> Vector<T> {
        let (xk, eta) = self.steps[k];
        let d = chart.displacement(&xk, x);
        let s = linalg::dot(&d, &d) / (eta * eta);
        linalg::add(x, &linalg::scale(bump_profile(s), &self.delta))
    }

    #[inline]
    fn step_jacobian(&self, chart: &ChartDomain<T>, k: usize, x: &Vector<T>) -> Matrix<T> {
        let (xk, eta) = self.steps[k];
        let d = chart.displacement(&xk, x);
        let s = linalg::dot(&d, &d) / (eta * eta);
        let g = linalg::scale(bump_profile_derivative(s) * T::lit(2.0) / (eta * eta), &d);
        linalg::mat_add_scaled(&linalg::identity(), T::one(), &linalg::outer(&self.delta, &g))
    }
}

impl<T: Real> MapKernel<T> for PointTransport<T> {
    fn forward(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        (0..self.steps.len()).fold(*u, |x, k| self.step(chart, k, &x))
    }

    fn inverse(&self, chart: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        let tol = T::eps() * T::lit(8.0);
        (0..self.steps.len()).rev().fold(*v, |y, k| {
            newton_solve(chart, |x| self.step(chart, k, x), |x| self.step_jacobian(chart, k, x), &y, y, tol, 60)
        })
    }

    fn jacobian(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Option<Matrix<T>> {
        let mut x = *u;
        let mut j = linalg::identity();
        for k in 0..self.steps.len() {
            j = linalg::mat_mul(&self.step_jacobian(chart, k, &x), &j);
            x = self.step(chart, k, &x);
        }
        Some(j)
    }

    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::PointTransport {
            x0: v64(&self.x0, self.dim),
            x1: v64(&self.x1, self.dim),
            center: v64(&self.center, self.dim),
            rho: self.rho.as_f64(),
            steps: self.steps.len(),
        }
    }
}

/// Moves `x0` to `x1` by `steps` equal bump-shaped pushes, each supported in
/// a ball inside `B(center, rho)` and small enough that `‖∂τ‖ < 1/2`.
pub fn make_point_transport<T: Real>(
    chart: &Arc<ChartDomain<T>>,
    x0: &Vector<T>,
    x1: &Vector<T>,
    center: &Vector<T>,
    rho: T,
    steps: usize,
) -> Result<Diffeo<T>> {
    let dim = chart.dim();
    let region = BallRegion::new(*center, rho);
    region.validate(chart)?;
    for (name, x) in [("x0", x0), ("x1", x1)] {
        if !region.contains(chart, x) {
            return Err(Error::Region(format!("{name} = {:?} is not inside B(center, {rho})", v64(x, dim))));
        }
    }
    let label = format!("point_transport({:?}->{:?},rho={rho})", v64(x0, dim), v64(x1, dim));
    let disp = chart.displacement(x0, x1);
    if linalg::norm(&disp) == T::zero() {
        return Ok(Diffeo::identity(chart.clone()).with_label(label));
    }
    if steps == 0 {
        return Err(Error::StepBudget("x1 differs from x0 but zero steps were allowed".into()));
    }
    let delta = linalg::scale(T::one() / T::from_usize_lossy(steps), &disp);
    let len = linalg::norm(&delta);
    let slope = T::lit(BUMP_SLOPE_MAX);
    let mut plan = Vec::with_capacity(steps);
    for k in 0..steps {
        let xk = linalg::add(x0, &linalg::scale(T::from_usize_lossy(k), &delta));
        let room = rho - chart.distance(center, &xk);
        let eta = T::lit(0.99) * room.min(T::lit(0.5));
        let allowed = eta / (T::lit(4.0) * slope);
        if !(len <= allowed) {
            return Err(Error::StepBudget(format!(
                "step {k}: displacement {len:e} exceeds bound {allowed:e}; need more steps"
            )));
        }
        plan.push((xk, eta));
    }
    let k = PointTransport { dim, x0: *x0, x1: *x1, center: *center, rho, delta, steps: plan };
    Ok(Diffeo::from_kernel(chart.clone(), k, Support::Ball(region), label))
}

/// Smallest step count that passes the step bound, searched up to `max_steps`.
pub fn point_transport_min_steps<T: Real>(
    chart: &Arc<ChartDomain<T>>,
    x0: &Vector<T>,
    x1: &Vector<T>,
    center: &Vector<T>,
    rho: T,
    max_steps: usize,
) -> Result<Diffeo<T>> {
    let mut last = None;
    for steps in 1..=max_steps {
        match make_point_transport(chart, x0, x1, center, rho, steps) {
            Err(Error::StepBudget(m)) => last = Some(m),
            other => return other,
        }
    }
    Err(Error::StepBudget(last.unwrap_or_default()))
}

struct RotationConjugation<T> {
    dim: usize,
    w: Matrix<T>,
    k: Matrix<T>,
    center: Vector<T>,
    r_in: T,
    blend: T,
}

impl<T: Real> RotationConjugation<T> {
    #[inline]
    fn theta(&self, r: T) -> T {
        T::one() - smoothstep((r - self.r_in) / self.blend)
    }

    #[inline]
    fn rotation(&self, r: T) -> Matrix<T> {
        let th = self.theta(r);
        if th == T::one() {
            self.w
        } else {
            linalg::exp_skew(&linalg::mat_scale(th, &self.k), self.dim)
        }
    }
}

impl<T: Real> MapKernel<T> for RotationConjugation<T> {
    fn forward(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        let d = chart.displacement(&self.center, u);
        let r = linalg::norm(&d);
        linalg::add(&self.center, &linalg::mat_vec(&self.rotation(r), &d))
    }

    fn inverse(&self, chart: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        let d = chart.displacement(&self.center, v);
        let r = linalg::norm(&d);
        linalg::add(&self.center, &linalg::mat_vec(&linalg::transpose(&self.rotation(r)), &d))
    }

    fn jacobian(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Option<Matrix<T>> {
        let d = chart.displacement(&self.center, u);
        let r = linalg::norm(&d);
        let rot = self.rotation(r);
        if r == T::zero() {
            return Some(rot);
        }
        let dth = -smoothstep_derivative((r - self.r_in) / self.blend) / self.blend;
        let krd = linalg::mat_vec(&self.k, &linalg::mat_vec(&rot, &d));
        Some(linalg::mat_add_scaled(&rot, dth / r, &linalg::outer(&krd, &d)))
    }

    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::RotationConjugation {
            w: linalg::matrix_to_rows(&self.w, self.dim),
            center: v64(&self.center, self.dim),
            radius: self.r_in.as_f64(),
            blend: self.blend.as_f64(),
        }
    }
}

/// Rotation by `w` about the region centre inside the region, blended to the
/// identity across a collar of width `blend` by scaling the rotation angle.
pub fn make_rotation_conjugation<T: Real>(
    chart: &Arc<ChartDomain<T>>,
    w: &Matrix<T>,
    region: &BallRegion<T>,
    blend: T,
) -> Result<Diffeo<T>> {
    let dim = chart.dim();
    check_dim(chart, w, "W")?;
    let defect = linalg::orthogonality_defect(w, dim);
    if !(defect <= T::lit(1e-12)) {
        return Err(Error::Construction(format!("W is not orthogonal (defect {defect:e})")));
    }
    let k = linalg::log_rotation(w, dim).ok_or_else(|| {
        Error::Construction("W has det -1 and lies on no one-parameter rotation subgroup; decompose it".into())
    })?;
    if !(blend > T::zero()) {
        return Err(Error::Construction("blend width must be positive".into()));
    }
    let outer = BallRegion::new(region.center, region.radius + blend);
    outer.validate(chart)?;
    let is_id = (0..dim).all(|i| (0..dim).all(|j| w[i][j] == if i == j { T::one() } else { T::zero() }));
    let support = if is_id { Support::Empty } else { Support::Ball(outer) };
    let angle = if dim == 2 { format!("{}", k[1][0]) } else { "W".into() };
    let label = format!("rotation_conjugation({angle},r={},blend={blend})", region.radius);
    let kern = RotationConjugation { dim, w: *w, k, center: region.center, r_in: region.radius, blend };
    Ok(Diffeo::from_kernel(chart.clone(), kern, support, label))
}

struct LinearBlend<T> {
    dim: usize,
    a: Matrix<T>,
    b: Matrix<T>,
    center: Vector<T>,
    r_in: T,
    blend: T,
}

impl<T: Real> LinearBlend<T> {
    #[inline]
    fn chi(&self, r: T) -> T {
        T::one() - smoothstep((r - self.r_in) / self.blend)
    }
}

impl<T: Real> MapKernel<T> for LinearBlend<T> {
    fn forward(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        let d = chart.displacement(&self.center, u);
        let chi = self.chi(linalg::norm(&d));
        let moved = linalg::add(&d, &linalg::scale(chi, &linalg::mat_vec(&self.b, &d)));
        linalg::add(&self.center, &moved)
    }

    fn inverse(&self, chart: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        newton_solve(
            chart,
            |x| self.forward(chart, x),
            |x| self.jacobian(chart, x).unwrap_or_else(linalg::identity),
            v,
            *v,
            T::eps() * T::lit(8.0),
            60,
        )
    }

    fn jacobian(&self, chart: &ChartDomain<T>, u: &Vector<T>) -> Option<Matrix<T>> {
        let d = chart.displacement(&self.center, u);
        let r = linalg::norm(&d);
        let mut j = linalg::mat_add_scaled(&linalg::identity(), self.chi(r), &self.b);
        if r > T::zero() {
            let dchi = -smoothstep_derivative((r - self.r_in) / self.blend) / self.blend;
            j = linalg::mat_add_scaled(&j, dchi / r, &linalg::outer(&linalg::mat_vec(&self.b, &d), &d));
        }
        Some(j)
    }

    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::LinearBlend {
            a: linalg::matrix_to_rows(&self.a, self.dim),
            center: v64(&self.center, self.dim),
            radius: self.r_in.as_f64(),
            blend: self.blend.as_f64(),
        }
    }
}

/// `u ↦ u + χ(|u - c|)(A - I)(u - c)`: the linear map `A` about the centre
/// inside the region, the identity outside the collar. Requires
/// `‖A - I‖(1 + 2 r_out/blend) < 1`, which makes the map a diffeomorphism.
pub fn make_linear_blend<T: Real>(
    chart: &Arc<ChartDomain<T>>,
    a: &Matrix<T>,
    region: &BallRegion<T>,
    blend: T,
) -> Result<Diffeo<T>> {
    let dim = chart.dim();
    check_dim(chart, a, "A")?;
    if !(blend > T::zero()) {
        return Err(Error::Construction("blend width must be positive".into()));
    }
    let outer = BallRegion::new(region.center, region.radius + blend);
    outer.validate(chart)?;
    let b = linalg::mat_add_scaled(a, -T::one(), &linalg::identity());
    let lip = linalg::op_norm(&b, dim) * (T::one() + T::lit(2.0) * outer.radius / blend);
    if !(lip < T::one()) {
        return Err(Error::Construction(format!("‖A - I‖(1 + 2 r_out/blend) = {lip} >= 1; widen the blend")));
    }
    let label = format!("linear_blend(A={:?},r={},blend={blend})", linalg::matrix_to_rows(a, dim), region.radius);
    let support = if lip == T::zero() { Support::Empty } else { Support::Ball(outer) };
    let kern = LinearBlend { dim, a: *a, b, center: region.center, r_in: region.radius, blend };
    Ok(Diffeo::from_kernel(chart.clone(), kern, support, label))
}

struct Translation<T> {
    dim: usize,
    offset: Vector<T>,
}

impl<T: Real> MapKernel<T> for Translation<T> {
    fn forward(&self, _: &ChartDomain<T>, u: &Vector<T>) -> Vector<T> {
        linalg::add(u, &self.offset)
    }
    fn inverse(&self, _: &ChartDomain<T>, v: &Vector<T>) -> Vector<T> {
        linalg::sub(v, &self.offset)
    }
    fn jacobian(&self, _: &ChartDomain<T>, _: &Vector<T>) -> Option<Matrix<T>> {
        Some(linalg::identity())
    }
    fn spec(&self) -> DiffeoSpec {
        DiffeoSpec::Translation { offset: v64(&self.offset, self.dim) }
    }
}

/// `u ↦ u + offset`. Global; only meaningful on a torus.
pub fn translation<T: Real>(chart: &Arc<ChartDomain<T>>, offset: &Vector<T>) -> Result<Diffeo<T>> {
    let dim = chart.dim();
    if (0..dim).any(|a| !offset[a].is_finite()) {
        return Err(Error::Construction("non-finite translation".into()));
    }
    let support = if linalg::norm(offset) == T::zero() { Support::Empty } else { Support::Global };
    let label = format!("translation({:?})", v64(offset, dim));
    Ok(Diffeo::from_kernel(chart.clone(), Translation { dim, offset: *offset }, support, label))
}
