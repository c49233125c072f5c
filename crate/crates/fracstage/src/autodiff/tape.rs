//! Reverse-mode tape for scalar losses.
//!
//! The tape records primal operations with enough structure to replay local
//! partials in one reverse sweep: each node is visited exactly once, in
//! anti-topological (reverse recording) order. Network evaluations enter as
//! batched primitives — the model records its own forward trace and hands
//! back a backward closure, so the tape stays model-agnostic while the
//! Laplacian participates as a differentiable quantity.

use super::jet::Jet2;

/// Handle to a recorded scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy)]
enum Op {
    Const,
    /// Leaf bound to a gradient slot.
    Param(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    /// `c * a`
    Scale(u32, f64),
    /// `a + c` for constant `c`
    AddConst(u32, f64),
    /// `a + c * b`
    AddScaled(u32, f64, u32),
    Sqr(u32),
    Sin(u32),
    Cos(u32),
    Tanh(u32),
    Exp(u32),
    Powi(u32, i32),
    /// Output `comp` (0 = value, 1 = d/dx, 2 = d2/dx2) of point `idx` of
    /// batch record `rec`.
    BatchOut { rec: u32, idx: u32, comp: u8 },
}

/// Backward closure returned by a batched field evaluation: consumes the
/// per-point cotangents `(u_bar, ux_bar, uxx_bar)` and accumulates parameter
/// gradients.
pub type BatchBackward<'a> = Box<dyn FnOnce(&[[f64; 3]], &mut [f64]) + 'a>;

/// A field that can record a batched evaluation on the tape.
pub trait TapeField {
    fn n_params(&self) -> usize;
    /// Jets at every point plus the backward closure for this batch.
    fn record(&self, pts: &[(f64, f64)]) -> (Vec<Jet2>, BatchBackward<'_>);
    /// Value-only variant for points where spatial derivatives are not
    /// needed; the default falls back to full jets.
    fn record_values(&self, pts: &[(f64, f64)]) -> (Vec<f64>, BatchBackward<'_>) {
        let (jets, back) = self.record(pts);
        (jets.into_iter().map(|j| j.v).collect(), back)
    }
}

struct BatchRecord<'a> {
    backward: BatchBackward<'a>,
    cot: Vec<[f64; 3]>,
}

/// Recording tape. Build the loss, then call [`Tape::grad`] for one reverse
/// sweep; batch records are replayed afterwards in recording order, so the
/// reduction order is fixed and gradients are bit-reproducible.
pub struct Tape<'a> {
    ops: Vec<Op>,
    vals: Vec<f64>,
    records: Vec<BatchRecord<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { ops: Vec::new(), vals: Vec::new(), records: Vec::new() }
    }

    pub fn value(&self, v: Var) -> f64 {
        self.vals[v.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op, val: f64) -> Var {
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.vals.push(val);
        Var(id)
    }

    pub fn constant(&mut self, v: f64) -> Var {
        self.push(Op::Const, v)
    }

    /// Leaf whose adjoint lands in `grad[slot]`.
    pub fn param(&mut self, slot: usize, v: f64) -> Var {
        self.push(Op::Param(slot as u32), v)
    }

    /// Register all entries of `params` as leaves on slots `0..len`.
    pub fn params(&mut self, params: &[f64]) -> Vec<Var> {
        params.iter().enumerate().map(|(i, &v)| self.param(i, v)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Add(a.0, b.0), self.vals[a.0 as usize] + self.vals[b.0 as usize])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Sub(a.0, b.0), self.vals[a.0 as usize] - self.vals[b.0 as usize])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Mul(a.0, b.0), self.vals[a.0 as usize] * self.vals[b.0 as usize])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.push(Op::Div(a.0, b.0), self.vals[a.0 as usize] / self.vals[b.0 as usize])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.push(Op::Neg(a.0), -self.vals[a.0 as usize])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(Op::Scale(a.0, c), c * self.vals[a.0 as usize])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.push(Op::AddConst(a.0, c), self.vals[a.0 as usize] + c)
    }

    /// `a + c * b`; the workhorse of the L1 history accumulation.
    pub fn add_scaled(&mut self, a: Var, c: f64, b: Var) -> Var {
        self.push(Op::AddScaled(a.0, c, b.0), self.vals[a.0 as usize] + c * self.vals[b.0 as usize])
    }

    pub fn sqr(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize];
        self.push(Op::Sqr(a.0), v * v)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.push(Op::Sin(a.0), self.vals[a.0 as usize].sin())
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.push(Op::Cos(a.0), self.vals[a.0 as usize].cos())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.push(Op::Tanh(a.0), self.vals[a.0 as usize].tanh())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.push(Op::Exp(a.0), self.vals[a.0 as usize].exp())
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        self.push(Op::Powi(a.0, n), self.vals[a.0 as usize].powi(n))
    }

    /// Sum in slice order (fixed reduction order).
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        let mut acc = self.constant(0.0);
        for &v in vars {
            acc = self.add(acc, v);
        }
        acc
    }

    /// Record a batched field evaluation with full jets; returns
    /// `(u, u_x, u_xx)` variables per point.
    pub fn batch_jets(&mut self, field: &'a dyn TapeField, pts: &[(f64, f64)]) -> Vec<[Var; 3]> {
        let (jets, backward) = field.record(pts);
        let rec = self.records.len() as u32;
        self.records.push(BatchRecord { backward, cot: vec![[0.0; 3]; pts.len()] });
        jets.iter()
            .enumerate()
            .map(|(i, j)| {
                let idx = i as u32;
                [
                    self.push(Op::BatchOut { rec, idx, comp: 0 }, j.v),
                    self.push(Op::BatchOut { rec, idx, comp: 1 }, j.dx),
                    self.push(Op::BatchOut { rec, idx, comp: 2 }, j.dxx),
                ]
            })
            .collect()
    }

    /// Record a batched value-only field evaluation.
    pub fn batch_values(&mut self, field: &'a dyn TapeField, pts: &[(f64, f64)]) -> Vec<Var> {
        let (vals, backward) = field.record_values(pts);
        let rec = self.records.len() as u32;
        self.records.push(BatchRecord { backward, cot: vec![[0.0; 3]; pts.len()] });
        vals.iter()
            .enumerate()
            .map(|(i, &v)| self.push(Op::BatchOut { rec, idx: i as u32, comp: 0 }, v))
            .collect()
    }

    /// Reverse sweep seeded at `loss`; accumulates into `grad` (not cleared).
    /// Consumes the tape.
    pub fn grad(mut self, loss: Var, grad: &mut [f64]) {
        let mut adj = vec![0.0_f64; self.ops.len()];
        adj[loss.0 as usize] = 1.0;
        for i in (0..self.ops.len()).rev() {
            let d = adj[i];
            if d == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Const => {}
                Op::Param(slot) => grad[slot as usize] += d,
                Op::Add(a, b) => {
                    adj[a as usize] += d;
                    adj[b as usize] += d;
                }
                Op::Sub(a, b) => {
                    adj[a as usize] += d;
                    adj[b as usize] -= d;
                }
                Op::Mul(a, b) => {
                    adj[a as usize] += d * self.vals[b as usize];
                    adj[b as usize] += d * self.vals[a as usize];
                }
                Op::Div(a, b) => {
                    let vb = self.vals[b as usize];
                    adj[a as usize] += d / vb;
                    adj[b as usize] -= d * self.vals[a as usize] / (vb * vb);
                }
                Op::Neg(a) => adj[a as usize] -= d,
                Op::Scale(a, c) => adj[a as usize] += c * d,
                Op::AddConst(a, _) => adj[a as usize] += d,
                Op::AddScaled(a, c, b) => {
                    adj[a as usize] += d;
                    adj[b as usize] += c * d;
                }
                Op::Sqr(a) => adj[a as usize] += 2.0 * self.vals[a as usize] * d,
                Op::Sin(a) => adj[a as usize] += d * self.vals[a as usize].cos(),
                Op::Cos(a) => adj[a as usize] -= d * self.vals[a as usize].sin(),
                Op::Tanh(a) => {
                    let y = self.vals[i];
                    adj[a as usize] += d * (1.0 - y * y);
                }
                Op::Exp(a) => adj[a as usize] += d * self.vals[i],
                Op::Powi(a, n) => {
                    let va = self.vals[a as usize];
                    adj[a as usize] += d * n as f64 * va.powi(n - 1);
                }
                Op::BatchOut { rec, idx, comp } => {
                    self.records[rec as usize].cot[idx as usize][comp as usize] += d;
                }
            }
        }
        // Replay batch backwards in recording order.
        for record in self.records {
            (record.backward)(&record.cot, grad);
        }
    }
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient of a recorded scalar loss with respect to `params`: builds a
/// tape with the parameters as leaves, records the loss, and runs one
/// reverse sweep. Returns `(loss, gradient)`.
pub fn grad<F>(f: F, params: &[f64]) -> (f64, Vec<f64>)
where
    F: FnOnce(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars = tape.params(params);
    let loss = f(&mut tape, &vars);
    let value = tape.value(loss);
    let mut g = vec![0.0; params.len()];
    tape.grad(loss, &mut g);
    (value, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_gradient() {
        // loss = p0^2 + 3 p1 at (2, 5) -> (4, 3)
        let (val, g) = grad(
            |t, p| {
                let sq = t.sqr(p[0]);
                let lin = t.scale(p[1], 3.0);
                t.add(sq, lin)
            },
            &[2.0, 5.0],
        );
        assert_eq!(val, 19.0);
        assert_eq!(g, vec![4.0, 3.0]);
    }

    #[test]
    fn sine_gradient_at_zero() {
        let (val, g) = grad(|t, p| t.sin(p[0]), &[0.0]);
        assert_eq!(val, 0.0);
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn chain_of_mixed_ops() {
        // loss = exp(sin(p0) * p1) / (p0 + p1), finite-difference check.
        let f = |t: &mut Tape, p: &[Var]| {
            let s = t.sin(p[0]);
            let prod = t.mul(s, p[1]);
            let e = t.exp(prod);
            let denom = t.add(p[0], p[1]);
            t.div(e, denom)
        };
        let x = [0.6, 1.3];
        let (_, g) = grad(f, &x);
        let eval = |p: &[f64]| ((p[0].sin() * p[1]).exp()) / (p[0] + p[1]);
        let h = 1e-6;
        for i in 0..2 {
            let mut hi = x;
            let mut lo = x;
            hi[i] += h;
            lo[i] -= h;
            let fd = (eval(&hi) - eval(&lo)) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-9, "coord {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn gradient_linearity() {
        // grad(a L1 + b L2) = a grad(L1) + b grad(L2)
        let p = [0.7, -0.4, 1.1];
        let l1 = |t: &mut Tape, v: &[Var]| {
            let a = t.mul(v[0], v[1]);
            t.add(a, v[2])
        };
        let l2 = |t: &mut Tape, v: &[Var]| {
            let a = t.tanh(v[0]);
            let b = t.sqr(v[2]);
            t.mul(a, b)
        };
        let (a, b) = (2.5, -1.25);
        let (_, g1) = grad(l1, &p);
        let (_, g2) = grad(l2, &p);
        let (_, gc) = grad(
            |t, v| {
                let x = l1(t, v);
                let y = l2(t, v);
                let xs = t.scale(x, a);
                t.add_scaled(xs, b, y)
            },
            &p,
        );
        for i in 0..3 {
            assert!((gc[i] - (a * g1[i] + b * g2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let f = |t: &mut Tape, p: &[Var]| {
            let mut acc = t.constant(0.0);
            for i in 0..16 {
                let s = t.sin(p[i % 3]);
                let q = t.sqr(s);
                acc = t.add_scaled(acc, 0.1 * (i as f64 + 1.0), q);
            }
            acc
        };
        let p = [0.3, 0.9, -1.7];
        let (v1, g1) = grad(f, &p);
        let (v2, g2) = grad(f, &p);
        assert_eq!(v1.to_bits(), v2.to_bits());
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
