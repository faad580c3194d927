//! Fixed-capacity linear algebra for dimensions 1 to 3.
//!
//! Points and matrices always carry three slots. Slots beyond the active
//! dimension are kept at zero (vectors) or at the identity (matrices), so a
//! padded matrix has the same determinant and inverse as its active block.

use crate::scalar::Real;

pub const MAX_DIM: usize = 3;

pub type Vector<T> = [T; MAX_DIM];
pub type Matrix<T> = [[T; MAX_DIM]; MAX_DIM];

#[inline]
pub fn zero<T: Real>() -> Vector<T> {
    [T::zero(); MAX_DIM]
}

/// Pads a slice into a vector, zero-filling the unused slots.
pub fn vector_from<T: Real>(xs: &[T]) -> Vector<T> {
    let mut v = zero();
    for (slot, &x) in v.iter_mut().zip(xs) {
        *slot = x;
    }
    v
}

pub fn vector_from_f64<T: Real>(xs: &[f64]) -> Vector<T> {
    let mut v = zero();
    for (slot, &x) in v.iter_mut().zip(xs) {
        *slot = T::lit(x);
    }
    v
}

pub fn to_f64_vec<T: Real>(v: &Vector<T>, dim: usize) -> Vec<f64> {
    v[..dim].iter().map(|x| x.as_f64()).collect()
}

#[inline]
pub fn identity<T: Real>() -> Matrix<T> {
    let mut m = [[T::zero(); MAX_DIM]; MAX_DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn matrix_from_rows<T: Real>(rows: &[Vec<f64>]) -> Matrix<T> {
    let mut m = identity();
    for (i, row) in rows.iter().enumerate().take(MAX_DIM) {
        for (j, &x) in row.iter().enumerate().take(MAX_DIM) {
            m[i][j] = T::lit(x);
        }
    }
    m
}

pub fn matrix_to_rows<T: Real>(m: &Matrix<T>, dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| m[i][j].as_f64()).collect())
        .collect()
}

#[inline]
pub fn add<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(s: T, a: &Vector<T>) -> Vector<T> {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn dot<T: Real>(a: &Vector<T>, b: &Vector<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm<T: Real>(a: &Vector<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn mat_vec<T: Real>(m: &Matrix<T>, v: &Vector<T>) -> Vector<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let mut c = [[T::zero(); MAX_DIM]; MAX_DIM];
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn transpose<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    let mut t = *a;
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            t[j][i] = x;
        }
    }
    t
}

pub fn mat_add_scaled<T: Real>(a: &Matrix<T>, s: T, b: &Matrix<T>) -> Matrix<T> {
    let mut c = *a;
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            c[i][j] = c[i][j] + s * b[i][j];
        }
    }
    c
}

/// Identity with `s` on the first `dim` diagonal entries.
pub fn diag_scalar<T: Real>(s: T, dim: usize) -> Matrix<T> {
    let mut m = identity();
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = s;
    }
    m
}

/// Entrywise `s·m`.
pub fn mat_scale<T: Real>(s: T, m: &Matrix<T>) -> Matrix<T> {
    let mut r = *m;
    for row in r.iter_mut() {
        for x in row.iter_mut() {
            *x = s * *x;
        }
    }
    r
}

/// Outer product `a bᵀ`.
pub fn outer<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Matrix<T> {
    let mut m = [[T::zero(); MAX_DIM]; MAX_DIM];
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

/// Zeroes the slots outside the active `dim × dim` block and restores the
/// identity there.
pub fn pad_identity<T: Real>(m: &mut Matrix<T>, dim: usize) {
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            if i >= dim || j >= dim {
                m[i][j] = if i == j { T::one() } else { T::zero() };
            }
        }
    }
}

pub fn det<T: Real>(m: &Matrix<T>, dim: usize) -> T {
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Inverse of the active block by the adjugate formula. `None` when the
/// determinant vanishes.
pub fn inverse<T: Real>(m: &Matrix<T>, dim: usize) -> Option<Matrix<T>> {
    let d = det(m, dim);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut inv = identity();
    match dim {
        1 => inv[0][0] = T::one() / d,
        2 => {
            inv[0][0] = m[1][1] / d;
            inv[0][1] = -m[0][1] / d;
            inv[1][0] = -m[1][0] / d;
            inv[1][1] = m[0][0] / d;
        }
        _ => {
            inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
            inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
            inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
            inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
            inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
            inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
            inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
            inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
            inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
        }
    }
    Some(inv)
}

/// Solves `m x = b` on the active block.
pub fn solve<T: Real>(m: &Matrix<T>, b: &Vector<T>, dim: usize) -> Option<Vector<T>> {
    inverse(m, dim).map(|inv| {
        let mut x = mat_vec(&inv, b);
        for slot in x.iter_mut().skip(dim) {
            *slot = T::zero();
        }
        x
    })
}

/// Eigenvalues of the symmetric active block, ascending. Cyclic Jacobi.
pub fn sym_eigenvalues<T: Real>(m: &Matrix<T>, dim: usize) -> Vec<T> {
    let mut a = *m;
    let tiny = T::eps() * T::eps();
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..dim {
            for j in (i + 1)..dim {
                off = off + a[i][j] * a[i][j];
            }
        }
        let scale_sq: T = (0..dim).map(|i| a[i][i] * a[i][i]).sum::<T>() + off;
        if off <= tiny * scale_sq || off == T::zero() {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..dim).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Spectral norm (largest singular value) of the active block.
pub fn op_norm<T: Real>(m: &Matrix<T>, dim: usize) -> T {
    if dim == 1 {
        return m[0][0].abs();
    }
    let mtm = mat_mul(&transpose(m), m);
    let ev = sym_eigenvalues(&mtm, dim);
    ev.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt()
}

/// Cholesky-based positive-definiteness test of the symmetric active block.
pub fn is_spd<T: Real>(m: &Matrix<T>, dim: usize) -> bool {
    let sym_tol = T::lit(1e3) * T::eps();
    for i in 0..dim {
        for j in 0..dim {
            let scale = m[i][j].abs().max(m[j][i].abs()).max(T::one());
            if (m[i][j] - m[j][i]).abs() > sym_tol * scale {
                return false;
            }
        }
    }
    let mut l = [[T::zero(); MAX_DIM]; MAX_DIM];
    for j in 0..dim {
        let mut s = m[j][j];
        for k in 0..j {
            s = s - l[j][k] * l[j][k];
        }
        if !(s > T::zero()) {
            return false;
        }
        l[j][j] = s.sqrt();
        for i in (j + 1)..dim {
            let mut s = m[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    true
}

/// Deviation of `mᵀm` from the identity, max-abs over the active block.
pub fn orthogonality_defect<T: Real>(m: &Matrix<T>, dim: usize) -> T {
    let mtm = mat_mul(&transpose(m), m);
    let mut worst = T::zero();
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((mtm[i][j] - target).abs());
        }
    }
    worst
}

/// Exponential of a skew-symmetric generator (dimensions 2 and 3).
pub fn exp_skew<T: Real>(k: &Matrix<T>, dim: usize) -> Matrix<T> {
    match dim {
        1 => identity(),
        2 => {
            let a = k[1][0];
            let mut r = identity();
            r[0][0] = a.cos();
            r[0][1] = -a.sin();
            r[1][0] = a.sin();
            r[1][1] = a.cos();
            r
        }
        _ => {
            // Rodrigues: exp(K) = I + sin θ/θ K + (1 - cos θ)/θ² K².
            let w = [k[2][1], k[0][2], k[1][0]];
            let theta = norm(&w);
            let k2 = mat_mul(k, k);
            let (a, b) = if theta < T::lit(1e-8) {
                (T::one() - theta * theta / T::lit(6.0), T::lit(0.5) - theta * theta / T::lit(24.0))
            } else {
                (theta.sin() / theta, (T::one() - theta.cos()) / (theta * theta))
            };
            let r = mat_add_scaled(&identity(), a, k);
            mat_add_scaled(&r, b, &k2)
        }
    }
}

/// Skew generator `K` with `exp(K) = w` for a rotation `w`, choosing the
/// principal angle. `None` when `w` is not a proper rotation.
pub fn log_rotation<T: Real>(w: &Matrix<T>, dim: usize) -> Option<Matrix<T>> {
    if det(w, dim) <= T::zero() {
        return None;
    }
    let mut k = [[T::zero(); MAX_DIM]; MAX_DIM];
    match dim {
        1 => Some(k),
        2 => {
            let a = w[1][0].atan2(w[0][0]);
            k[0][1] = -a;
            k[1][0] = a;
            Some(k)
        }
        _ => {
            let tr = w[0][0] + w[1][1] + w[2][2];
            let c = ((tr - T::one()) / T::lit(2.0)).max(-T::one()).min(T::one());
            let theta = c.acos();
            let axis_raw = [w[2][1] - w[1][2], w[0][2] - w[2][0], w[1][0] - w[0][1]];
            let axis = if theta < T::lit(1e-10) {
                return Some(k);
            } else if T::PI() - theta < T::lit(1e-6) {
                // θ ≈ π: axis from the symmetric part w + I = 2 a aᵀ.
                let mut best = 0;
                for i in 1..3 {
                    if w[i][i] > w[best][best] {
                        best = i;
                    }
                }
                let mut a = [T::zero(); 3];
                let denom = (T::lit(2.0) * (w[best][best] + T::one())).sqrt();
                for (i, slot) in a.iter_mut().enumerate() {
                    let wi = if i == best { w[i][i] + T::one() } else { w[i][best] };
                    *slot = wi / denom;
                }
                a
            } else {
                let s = T::lit(2.0) * theta.sin();
                [axis_raw[0] / s, axis_raw[1] / s, axis_raw[2] / s]
            };
            let a = scale(theta, &axis);
            k[0][1] = -a[2];
            k[0][2] = a[1];
            k[1][0] = a[2];
            k[1][2] = -a[0];
            k[2][0] = -a[1];
            k[2][1] = a[0];
            Some(k)
        }
    }
}
