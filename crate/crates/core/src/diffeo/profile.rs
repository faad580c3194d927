use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[inline]
fn psi<T: Real>(x: T) -> T {
    if x > T::zero() {
        (-x.recip()).exp()
    } else {
        T::zero()
    }
}

/// C^∞ monotone step: 0 for `t <= 0`, 1 for `t >= 1`.
#[inline]
pub fn smoothstep<T: Real>(t: T) -> T {
    if t <= T::zero() {
        T::zero()
    } else if t >= T::one() {
        T::one()
    } else {
        let a = psi(t);
        a / (a + psi(T::one() - t))
    }
}

/// Derivative of [`smoothstep`]; its maximum is 2, attained at `t = 1/2`.
#[inline]
pub fn smoothstep_derivative<T: Real>(t: T) -> T {
    if t <= T::zero() || t >= T::one() {
        return T::zero();
    }
    let s = T::one() - t;
    let (a, b) = (psi(t), psi(s));
    let (da, db) = (a / (t * t), b / (s * s));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// Transition from `a` (for `r <= 0`) to `b` (for `r >= 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TransitionProfile<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> TransitionProfile<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    #[inline]
    pub fn evaluate(&self, r: T) -> T {
        self.a + (self.b - self.a) * smoothstep(r)
    }

    #[inline]
    pub fn derivative(&self, r: T) -> T {
        (self.b - self.a) * smoothstep_derivative(r)
    }
}
