//! Second-order forward-mode jets in the spatial coordinate.
//!
//! A [`Jet2`] carries `(value, d/dx, d2/dx2)` through arithmetic so the
//! Laplacian of a network output is exact. Time enters as a constant jet.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus first and second derivatives with respect to `x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dxx: f64,
}

impl Jet2 {
    /// Seed for the differentiation variable: `d/dx x = 1`.
    pub fn var(v: f64) -> Self {
        Self { v, dx: 1.0, dxx: 0.0 }
    }

    pub fn constant(v: f64) -> Self {
        Self { v, dx: 0.0, dxx: 0.0 }
    }

    /// Chain rule through a scalar map given `(s(v), s'(v), s''(v))`.
    #[inline]
    fn chain(self, s: f64, s1: f64, s2: f64) -> Self {
        Self { v: s, dx: s1 * self.dx, dxx: s2 * self.dx * self.dx + s1 * self.dxx }
    }
}

impl Add for Jet2 {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { v: self.v + rhs.v, dx: self.dx + rhs.dx, dxx: self.dxx + rhs.dxx }
    }
}

impl Sub for Jet2 {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { v: self.v - rhs.v, dx: self.dx - rhs.dx, dxx: self.dxx - rhs.dxx }
    }
}

impl Mul for Jet2 {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        // (fg)'' = f''g + 2f'g' + fg''
        Self {
            v: self.v * rhs.v,
            dx: self.dx * rhs.v + self.v * rhs.dx,
            dxx: self.dxx * rhs.v + 2.0 * self.dx * rhs.dx + self.v * rhs.dxx,
        }
    }
}

impl Div for Jet2 {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let inv2 = inv * inv;
        let inv3 = inv2 * inv;
        let v = self.v * inv;
        let dx = self.dx * inv - self.v * rhs.dx * inv2;
        let dxx = self.dxx * inv - (2.0 * self.dx * rhs.dx + self.v * rhs.dxx) * inv2
            + 2.0 * self.v * rhs.dx * rhs.dx * inv3;
        Self { v, dx, dxx }
    }
}

impl Neg for Jet2 {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { v: -self.v, dx: -self.dx, dxx: -self.dxx }
    }
}

/// Scalar abstraction shared by plain `f64` evaluation and jet propagation;
/// network forwards and exact solutions are written once over this trait.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Real for Jet2 {
    fn from_f64(v: f64) -> Self {
        Jet2::constant(v)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tanh(self) -> Self {
        let s = self.v.tanh();
        let s1 = 1.0 - s * s;
        self.chain(s, s1, -2.0 * s * s1)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn powi(self, n: i32) -> Self {
        let s = self.v.powi(n);
        let s1 = n as f64 * self.v.powi(n - 1);
        let s2 = (n as f64) * (n - 1) as f64 * self.v.powi(n - 2);
        self.chain(s, s1, s2)
    }
}

/// A scalar field over `(x, t)` with exact spatial jets.
pub trait Field: Send + Sync {
    /// `(u, u_x, u_xx)` at `(x, t)`.
    fn jet(&self, x: f64, t: f64) -> Jet2;

    fn value(&self, x: f64, t: f64) -> f64 {
        self.jet(x, t).v
    }
}

/// Wraps a generic closure as a [`Field`]; jets fall out of evaluating the
/// closure on [`Jet2`] arguments.
pub struct FnField<F>(pub F);

impl<F> Field for FnField<F>
where
    F: Fn(Jet2, Jet2) -> Jet2 + Send + Sync,
{
    fn jet(&self, x: f64, t: f64) -> Jet2 {
        (self.0)(Jet2::var(x), Jet2::constant(t))
    }
}

/// `(u, u_x, u_xx)` of a model at `(x, t)`, with `t` held fixed.
pub fn eval_with_jet(model: &dyn Field, x: f64, t: f64) -> (f64, f64, f64) {
    let j = model.jet(x, t);
    (j.v, j.dx, j.dxx)
}
