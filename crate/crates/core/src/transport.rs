//! Pullback actions of diffeomorphisms on sampled fields:
//! `L_φ f(u) = f(φ(u))` for scalars and `L_φ f(u) = dφ(u)⁻¹ f(φ(u))` for
//! vector fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeo::{compose, Diffeo, Support};
use crate::error::{Error, Result};
use crate::fields::{field_axpy, make_bump, make_vector_bump, Field, InterpOrder, ScalarField, Stencil, VectorField};
use crate::geometry::ChartDomain;
use crate::linalg::{self, Vector};
use crate::scalar::Real;

/// Seed for the random test fields of [`operator_norm_estimate`].
pub const NORM_SEED: u64 = 0x00d1_ffe0;

/// Output of a pullback.
#[derive(Clone, Debug)]
pub struct TransportResult<T> {
    pub field: Field<T>,
    /// `‖cubic − linear‖₂` over the moved nodes: an interpolation-error
    /// estimate in field units.
    pub interp_residual: T,
    /// Per-node magnitude of the cubic/linear discrepancy.
    pub residual_nodes: Vec<T>,
    pub clipped_nodes: usize,
}

impl<T: Real> TransportResult<T> {
    /// `‖cubic − linear‖_p`.
    pub fn interp_residual_p(&self, p: T) -> T {
        let w = self.field.chart().quadrature_weights();
        self.residual_nodes
            .iter()
            .zip(&w)
            .fold(T::zero(), |acc, (r, wi)| acc + r.powf(p) * *wi)
            .powf(T::one() / p)
    }
}

fn check_chart<T: Real>(phi: &Diffeo<T>, chart: &ChartDomain<T>) -> Result<()> {
    if **phi.chart() != *chart {
        return Err(Error::ChartMismatch(format!("diffeo on {:?}, field on {:?}", phi.chart(), chart)));
    }
    Ok(())
}

#[allow(clippy::large_enum_variant)]
enum Node<T> {
    Fixed,
    Moved { cubic: Stencil<T>, linear: Stencil<T>, jinv: Option<linalg::Matrix<T>> },
    Clipped,
}

/// Where each node's image lands; `Fixed` nodes copy their sample.
fn plan<T: Real>(phi: &Diffeo<T>, with_jacobian: bool) -> Result<Vec<Node<T>>> {
    let chart = phi.chart();
    let dim = chart.dim();
    let support: Support<T> = *phi.support();
    (0..chart.node_count())
        .into_par_iter()
        .map(|i| {
            let u = chart.node(i);
            if support.excludes(chart, &u) {
                return Ok(Node::Fixed);
            }
            let x = phi.forward(&u);
            let jinv = if with_jacobian {
                let j = phi.jacobian(&u);
                let det = linalg::det(&j, dim);
                if !(det > T::lit(1e-12)) {
                    return Err(Error::SingularJacobian { point: linalg::to_f64_vec(&u, dim), det: det.as_f64() });
                }
                linalg::inverse(&j, dim)
            } else {
                None
            };
            if !with_jacobian && (0..dim).all(|a| x[a] == u[a]) {
                return Ok(Node::Fixed);
            }
            if !chart.contains(&x) {
                return Ok(Node::Clipped);
            }
            let cubic = Stencil::new(chart, &x, InterpOrder::Cubic)?;
            let linear = Stencil::new(chart, &x, InterpOrder::Linear)?;
            Ok(Node::Moved { cubic, linear, jinv })
        })
        .collect()
}

fn clipped<T>(nodes: &[Node<T>]) -> Result<()> {
    let n = nodes.iter().filter(|n| matches!(n, Node::Clipped)).count();
    if n > 0 {
        Err(Error::MarginViolation { clipped: n })
    } else {
        Ok(())
    }
}

fn stencil_for<T: Real>(order: InterpOrder, cubic: &Stencil<T>, linear: &Stencil<T>) -> Stencil<T> {
    match order {
        InterpOrder::Cubic => *cubic,
        InterpOrder::Linear => *linear,
    }
}

fn pull_scalar_with<T: Real>(nodes: &[Node<T>], f: &ScalarField<T>) -> (ScalarField<T>, Vec<T>) {
    let chart = f.chart();
    let vals = f.values();
    let (out, res): (Vec<T>, Vec<T>) = nodes
        .par_iter()
        .enumerate()
        .map(|(i, n)| match n {
            Node::Moved { cubic, linear, .. } => {
                let main = stencil_for(f.interp(), cubic, linear);
                let c = cubic.apply(chart, vals);
                let l = linear.apply(chart, vals);
                (main.apply(chart, vals), (c - l).abs())
            }
            _ => (vals[i], T::zero()),
        })
        .unzip();
    (f.with_values(out), res)
}

fn residual_norm<T: Real>(chart: &ChartDomain<T>, res: &[T]) -> T {
    let w = chart.quadrature_weights();
    res.iter().zip(&w).fold(T::zero(), |acc, (r, wi)| acc + *r * *r * *wi).sqrt()
}

/// `L_φ f(u) = f(φ(u))`.
pub fn pullback_scalar<T: Real>(phi: &Diffeo<T>, f: &ScalarField<T>) -> Result<TransportResult<T>> {
    check_chart(phi, f.chart())?;
    let nodes = plan(phi, false)?;
    clipped(&nodes)?;
    let (out, res) = pull_scalar_with(&nodes, f);
    Ok(TransportResult {
        interp_residual: residual_norm(f.chart(), &res),
        residual_nodes: res,
        field: Field::Scalar(out),
        clipped_nodes: 0,
    })
}

/// `L_φ f(u) = dφ(u)⁻¹ f(φ(u))`.
pub fn pullback_vector<T: Real>(phi: &Diffeo<T>, f: &VectorField<T>) -> Result<TransportResult<T>> {
    check_chart(phi, f.chart())?;
    let chart = f.chart();
    let dim = chart.dim();
    let nodes = plan(phi, true)?;
    clipped(&nodes)?;
    let comps = f.components();
    let eval = |st: &Stencil<T>| -> Vector<T> {
        let mut v = linalg::zero();
        for a in 0..dim {
            v[a] = st.apply(chart, &comps[a]);
        }
        v
    };
    let (out, res): (Vec<Vector<T>>, Vec<T>) = nodes
        .par_iter()
        .enumerate()
        .map(|(i, n)| match n {
            Node::Moved { cubic, linear, jinv } => {
                let jinv = jinv.expect("jacobian requested");
                let main = eval(&stencil_for(f.interp(), cubic, linear));
                let diff = linalg::sub(&eval(cubic), &eval(linear));
                (linalg::mat_vec(&jinv, &main), linalg::norm(&linalg::mat_vec(&jinv, &diff)))
            }
            _ => (f.node_value(i), T::zero()),
        })
        .unzip();
    Ok(TransportResult {
        interp_residual: residual_norm(chart, &res),
        residual_nodes: res,
        field: Field::Vector(f.with_node_vectors(out)),
        clipped_nodes: 0,
    })
}

/// Dispatches on the field kind; complex fields transport as two scalars.
pub fn pullback<T: Real>(phi: &Diffeo<T>, f: &Field<T>) -> Result<TransportResult<T>> {
    match f {
        Field::Scalar(s) => pullback_scalar(phi, s),
        Field::Vector(v) => pullback_vector(phi, v),
        Field::Complex(re, im) => {
            check_chart(phi, re.chart())?;
            let nodes = plan(phi, false)?;
            clipped(&nodes)?;
            let (a, ra) = pull_scalar_with(&nodes, re);
            let (b, rb) = pull_scalar_with(&nodes, im);
            let res: Vec<T> = ra.iter().zip(&rb).map(|(x, y)| x.hypot(*y)).collect();
            Ok(TransportResult {
                interp_residual: residual_norm(re.chart(), &res),
                residual_nodes: res,
                field: Field::Complex(a, b),
                clipped_nodes: 0,
            })
        }
    }
}

/// `‖L_{ψ∘φ} f − L_φ L_ψ f‖_p / max(‖f‖_p, 1e-300)`.
pub fn check_contravariance<T: Real>(psi: &Diffeo<T>, phi: &Diffeo<T>, f: &Field<T>, p: T) -> Result<T> {
    let lhs = pullback(&compose(psi, phi)?, f)?.field;
    let inner = pullback(psi, f)?.field;
    let rhs = pullback(phi, &inner)?.field;
    let diff = field_axpy(T::one(), &lhs, -T::one(), &rhs)?;
    let den = f.lp_norm(p)?.max(T::lit(1e-300));
    Ok(diff.lp_norm(p)? / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Largest observed `‖L_φ f‖_p / ‖f‖_p`.
    pub estimate: f64,
    /// `√(sup ‖dφ⁻¹‖^{2(d+1)} + 1)`; only for `p = 2` vector fields.
    pub bound: Option<f64>,
}

/// `√(max_nodes ‖dφ(u)⁻¹‖^{2(d+1)} + 1)`.
pub fn analytic_bound<T: Real>(phi: &Diffeo<T>) -> Result<T> {
    let chart = phi.chart();
    let dim = chart.dim();
    let s = (0..chart.node_count())
        .into_par_iter()
        .map(|i| {
            let u = chart.node(i);
            let j = phi.jacobian(&u);
            linalg::inverse(&j, dim)
                .map(|ji| linalg::op_norm(&ji, dim))
                .ok_or_else(|| Error::SingularJacobian { point: linalg::to_f64_vec(&u, dim), det: 0.0 })
        })
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::zero(), T::max);
    Ok((s.powi(2 * (dim as i32 + 1)) + T::one()).sqrt())
}

/// Random lower bound on the operator norm of `L_φ` over bump fields
/// centred in the support of `φ`.
pub fn operator_norm_estimate<T: Real>(phi: &Diffeo<T>, trials: usize, p: T, kind: FieldKind) -> Result<NormEstimate> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be >= 1".into()));
    }
    let chart = phi.chart();
    let dim = chart.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let (center, reach) = match phi.support() {
        Support::Ball(b) => (b.center, b.radius.as_f64()),
        _ => {
            let mid: Vec<f64> = (0..dim).map(|a| (chart.lower()[a] + chart.upper()[a]).as_f64() / 2.0).collect();
            let half = (0..dim).map(|a| chart.period(a).as_f64()).fold(f64::INFINITY, f64::min) / 2.0;
            (linalg::vector_from_f64(&mid), half)
        }
    };
    let mut best = 0.0f64;
    for _ in 0..trials {
        let f = loop {
            let mut off = vec![0.0; dim];
            loop {
                for o in off.iter_mut() {
                    *o = rng.gen_range(-1.0..1.0);
                }
                if off.iter().map(|x| x * x).sum::<f64>() < 1.0 {
                    break;
                }
            }
            let c = linalg::add(&center, &linalg::vector_from_f64(&off.iter().map(|x| x * reach).collect::<Vec<_>>()));
            let c = chart.wrap(&c);
            let r = T::lit(reach * rng.gen_range(0.15..0.6));
            let amp = T::lit(rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
            if r < T::lit(2.5) * chart.min_spacing() || !chart.ball_fits(&c, r) {
                continue;
            }
            let f: Field<T> = match kind {
                FieldKind::Scalar => make_bump(chart, &c, r, amp)?.into(),
                FieldKind::Vector => {
                    let mut dir = [0.0; 3];
                    for x in dir.iter_mut().take(dim) {
                        *x = rng.gen_range(-1.0..1.0);
                    }
                    make_vector_bump(chart, &c, r, amp, &linalg::vector_from_f64(&dir))?.into()
                }
            };
            if f.lp_norm(p)? > T::zero() {
                break f;
            }
        };
        let out = pullback(phi, &f)?.field;
        best = best.max((out.lp_norm(p)? / f.lp_norm(p)?).as_f64());
    }
    let bound = if kind == FieldKind::Vector && p == T::lit(2.0) { Some(analytic_bound(phi)?.as_f64()) } else { None };
    Ok(NormEstimate { estimate: best, bound })
}
