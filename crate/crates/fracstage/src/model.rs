//! Dense feedforward networks and the parallel-subnetwork multiscale
//! architecture used by correction stages.
//!
//! Forward passes are generic over [`Real`], so plain evaluation and
//! second-order jet propagation share one code path. Training uses batched
//! evaluations over all lattice points with a hand-written reverse pass
//! through the jet forward; that keeps the inner loops contiguous dot
//! products and accumulations.

use crate::autodiff::{BatchBackward, Field, Jet2, Real, TapeField};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sin,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sin" => Ok(Activation::Sin),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }

    #[inline]
    fn apply<S: Real>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sin => z.sin(),
            Activation::Identity => z,
        }
    }

    /// `(s, s', s'', s''')` at `z`.
    #[inline]
    fn derivatives(self, z: f64) -> (f64, f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let s = z.tanh();
                let s1 = 1.0 - s * s;
                let s2 = -2.0 * s * s1;
                let s3 = -2.0 * s1 * s1 + 4.0 * s * s * s1;
                (s, s1, s2, s3)
            }
            Activation::Sin => {
                let (s, c) = z.sin_cos();
                (s, c, -s, -c)
            }
            Activation::Identity => (z, 1.0, 0.0, 0.0),
        }
    }
}

/// Where a flat parameter slot lives inside the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotInfo {
    Weight { subnet: usize, layer: usize, row: usize, col: usize },
    Bias { subnet: usize, layer: usize, row: usize },
    Head { subnet: usize },
}

/// Fully connected network `2 -> hidden ... -> 1` with a per-layer
/// activation tag and a first-layer weight scale `kappa` applied at init.
#[derive(Debug, Clone)]
pub struct DenseNet {
    widths: Vec<usize>,
    acts: Vec<Activation>,
    kappa: f64,
    params: Vec<f64>,
    /// Start of each layer's weight block; biases follow the weights.
    offsets: Vec<usize>,
}

fn layer_offsets(widths: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(widths.len() - 1);
    let mut total = 0;
    for l in 0..widths.len() - 1 {
        offsets.push(total);
        total += widths[l] * widths[l + 1] + widths[l + 1];
    }
    (offsets, total)
}

/// Parameter count of a dense net: sum over layers of `in*out + out`.
pub fn dense_param_count(widths: &[usize]) -> usize {
    layer_offsets(widths).1
}

fn validate_widths(widths: &[usize], acts: &[Activation]) -> Result<()> {
    if widths.len() < 2 || widths[0] != 2 || *widths.last().unwrap() != 1 {
        return Err(Error::InvalidParameter {
            name: "widths",
            msg: format!("need input 2 and output 1, got {widths:?}"),
        });
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::InvalidParameter { name: "widths", msg: "zero-width layer".into() });
    }
    if acts.len() != widths.len() - 1 {
        return Err(Error::InvalidParameter {
            name: "activations",
            msg: format!("need one per layer ({}), got {}", widths.len() - 1, acts.len()),
        });
    }
    if *acts.last().unwrap() != Activation::Identity {
        return Err(Error::InvalidParameter {
            name: "activations",
            msg: "output layer must be identity".into(),
        });
    }
    Ok(())
}

fn init_dense_from_rng(
    widths: &[usize],
    acts: &[Activation],
    kappa: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DenseNet> {
    validate_widths(widths, acts)?;
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter { name: "kappa", msg: format!("must be > 0, got {kappa}") });
    }
    let (offsets, total) = layer_offsets(widths);
    let mut params = vec![0.0; total];
    for l in 0..widths.len() - 1 {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let scale = if l == 0 { kappa } else { 1.0 };
        let w = &mut params[offsets[l]..offsets[l] + fan_in * fan_out];
        for v in w.iter_mut() {
            *v = scale * rng.gen_range(-bound..bound);
        }
        // biases stay zero
    }
    Ok(DenseNet { widths: widths.to_vec(), acts: acts.to_vec(), kappa, params, offsets })
}

/// Glorot-uniform dense network, biases zero, first-layer weights scaled by
/// `kappa`; bit-reproducible from `seed`.
pub fn init_dense(widths: &[usize], acts: &[Activation], kappa: f64, seed: u64) -> Result<DenseNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_dense_from_rng(widths, acts, kappa, &mut rng)
}

/// `[2, width * layers, 1]`.
pub fn hidden_widths(layers: usize, width: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(layers + 2);
    w.push(2);
    w.extend(std::iter::repeat(width).take(layers));
    w.push(1);
    w
}

/// All-tanh hidden activations with identity output.
pub fn tanh_activations(n_layers: usize) -> Vec<Activation> {
    let mut a = vec![Activation::Tanh; n_layers];
    *a.last_mut().unwrap() = Activation::Identity;
    a
}

/// Sinusoidal first hidden layer, tanh afterwards, identity output.
pub fn sin_first_activations(n_layers: usize) -> Vec<Activation> {
    let mut a = tanh_activations(n_layers);
    a[0] = Activation::Sin;
    a
}

impl DenseNet {
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.acts
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weight_block(&self, l: usize) -> &[f64] {
        let (nin, nout) = (self.widths[l], self.widths[l + 1]);
        &self.params[self.offsets[l]..self.offsets[l] + nin * nout]
    }

    fn bias_block(&self, l: usize) -> &[f64] {
        let (nin, nout) = (self.widths[l], self.widths[l + 1]);
        let start = self.offsets[l] + nin * nout;
        &self.params[start..start + nout]
    }

    fn slot_info(&self, slot: usize) -> SlotInfo {
        let mut l = self.offsets.len() - 1;
        while self.offsets[l] > slot {
            l -= 1;
        }
        let (nin, nout) = (self.widths[l], self.widths[l + 1]);
        let local = slot - self.offsets[l];
        if local < nin * nout {
            SlotInfo::Weight { subnet: 0, layer: l, row: local / nin, col: local % nin }
        } else {
            SlotInfo::Bias { subnet: 0, layer: l, row: local - nin * nout }
        }
    }

    /// Generic forward over one `(x, t)` input, optionally pre-scaled.
    pub fn forward_scaled<S: Real>(&self, scale: f64, x: S, t: S) -> S {
        let s = S::from_f64(scale);
        let mut a: Vec<S> = vec![s * x, s * t];
        let mut next: Vec<S> = Vec::new();
        for l in 0..self.widths.len() - 1 {
            let (nin, nout) = (self.widths[l], self.widths[l + 1]);
            let w = self.weight_block(l);
            let b = self.bias_block(l);
            next.clear();
            for j in 0..nout {
                let mut acc = S::from_f64(b[j]);
                let wrow = &w[j * nin..(j + 1) * nin];
                for i in 0..nin {
                    acc = acc + S::from_f64(wrow[i]) * a[i];
                }
                next.push(self.acts[l].apply(acc));
            }
            std::mem::swap(&mut a, &mut next);
        }
        a[0]
    }

    pub fn forward<S: Real>(&self, x: S, t: S) -> S {
        self.forward_scaled(1.0, x, t)
    }

    // ---- batched jet path -------------------------------------------------

    /// Forward all points through the net with jet channels, storing the
    /// pre-activation jets per layer. Returns output jets.
    fn batch_forward_jets(&self, scale: f64, pts: &[(f64, f64)]) -> (Vec<Jet2>, JetTrace) {
        let p_count = pts.len();
        let n_layers = self.widths.len() - 1;
        let mut trace = JetTrace { z: Vec::with_capacity(n_layers) };

        // input jets: a_v = (s x, s t), a_dx = (s, 0), a_dxx = 0
        let mut a_v: Vec<f64> = Vec::with_capacity(p_count * 2);
        let mut a_dx: Vec<f64> = Vec::with_capacity(p_count * 2);
        let mut a_dxx: Vec<f64> = vec![0.0; p_count * 2];
        for &(x, t) in pts {
            a_v.push(scale * x);
            a_v.push(scale * t);
            a_dx.push(scale);
            a_dx.push(0.0);
        }

        for l in 0..n_layers {
            let (nin, nout) = (self.widths[l], self.widths[l + 1]);
            let w = self.weight_block(l);
            let b = self.bias_block(l);
            let mut z_v = vec![0.0; p_count * nout];
            let mut z_dx = vec![0.0; p_count * nout];
            let mut z_dxx = vec![0.0; p_count * nout];
            for p in 0..p_count {
                let av = &a_v[p * nin..(p + 1) * nin];
                let adx = &a_dx[p * nin..(p + 1) * nin];
                let adxx = &a_dxx[p * nin..(p + 1) * nin];
                let zv = &mut z_v[p * nout..(p + 1) * nout];
                let zdx = &mut z_dx[p * nout..(p + 1) * nout];
                let zdxx = &mut z_dxx[p * nout..(p + 1) * nout];
                for j in 0..nout {
                    let wrow = &w[j * nin..(j + 1) * nin];
                    let (mut sv, mut sdx, mut sdxx) = (b[j], 0.0, 0.0);
                    for i in 0..nin {
                        sv += wrow[i] * av[i];
                        sdx += wrow[i] * adx[i];
                        sdxx += wrow[i] * adxx[i];
                    }
                    zv[j] = sv;
                    zdx[j] = sdx;
                    zdxx[j] = sdxx;
                }
            }
            // activation
            let act = self.acts[l];
            let (mut n_v, mut n_dx, mut n_dxx) =
                (vec![0.0; p_count * nout], vec![0.0; p_count * nout], vec![0.0; p_count * nout]);
            if act == Activation::Identity {
                n_v.copy_from_slice(&z_v);
                n_dx.copy_from_slice(&z_dx);
                n_dxx.copy_from_slice(&z_dxx);
            } else {
                for k in 0..p_count * nout {
                    let (s, s1, s2, _) = act.derivatives(z_v[k]);
                    n_v[k] = s;
                    n_dx[k] = s1 * z_dx[k];
                    n_dxx[k] = s2 * z_dx[k] * z_dx[k] + s1 * z_dxx[k];
                }
            }
            trace.z.push([z_v, z_dx, z_dxx]);
            a_v = n_v;
            a_dx = n_dx;
            a_dxx = n_dxx;
        }

        let out = (0..p_count).map(|p| Jet2 { v: a_v[p], dx: a_dx[p], dxx: a_dxx[p] }).collect();
        (out, trace)
    }

    /// Reverse pass from output-jet cotangents to parameter gradients,
    /// reusing the forward trace. `grad` is this net's own slice.
    fn batch_backward_jets(
        &self,
        scale: f64,
        pts: &[(f64, f64)],
        trace: &JetTrace,
        cot: &[[f64; 3]],
        grad: &mut [f64],
    ) {
        let p_count = pts.len();
        let n_layers = self.widths.len() - 1;
        let out_w = self.widths[n_layers];
        debug_assert_eq!(out_w, 1);

        // cotangent on the output activation jets
        let mut ab_v: Vec<f64> = cot.iter().map(|c| c[0]).collect();
        let mut ab_dx: Vec<f64> = cot.iter().map(|c| c[1]).collect();
        let mut ab_dxx: Vec<f64> = cot.iter().map(|c| c[2]).collect();

        for l in (0..n_layers).rev() {
            let (nin, nout) = (self.widths[l], self.widths[l + 1]);
            let act = self.acts[l];
            let [z_v, z_dx, z_dxx] = &trace.z[l];

            // activation backward: a = sigma(z)
            let (mut zb_v, mut zb_dx, mut zb_dxx) = (ab_v, ab_dx, ab_dxx);
            if act != Activation::Identity {
                for k in 0..p_count * nout {
                    let (_, s1, s2, s3) = act.derivatives(z_v[k]);
                    let (bv, bdx, bdxx) = (zb_v[k], zb_dx[k], zb_dxx[k]);
                    zb_v[k] = bv * s1 + bdx * s2 * z_dx[k] + bdxx * (s3 * z_dx[k] * z_dx[k] + s2 * z_dxx[k]);
                    zb_dx[k] = bdx * s1 + bdxx * 2.0 * s2 * z_dx[k];
                    zb_dxx[k] = bdxx * s1;
                }
            }

            // inputs of this layer (activation outputs of l-1 or scaled input jets)
            let (in_v, in_dx, in_dxx) = self.layer_inputs_jets(scale, pts, trace, l);

            // parameter gradients
            let w_off = self.offsets[l];
            let b_off = w_off + nin * nout;
            for p in 0..p_count {
                for j in 0..nout {
                    let k = p * nout + j;
                    let (dv, ddx, ddxx) = (zb_v[k], zb_dx[k], zb_dxx[k]);
                    grad[b_off + j] += dv;
                    let grow = &mut grad[w_off + j * nin..w_off + (j + 1) * nin];
                    let iv = &in_v[p * nin..(p + 1) * nin];
                    let idx = &in_dx[p * nin..(p + 1) * nin];
                    let idxx = &in_dxx[p * nin..(p + 1) * nin];
                    for i in 0..nin {
                        grow[i] += dv * iv[i] + ddx * idx[i] + ddxx * idxx[i];
                    }
                }
            }

            if l == 0 {
                break;
            }

            // propagate to the previous layer's activation outputs
            let w = self.weight_block(l);
            let mut prev_v = vec![0.0; p_count * nin];
            let mut prev_dx = vec![0.0; p_count * nin];
            let mut prev_dxx = vec![0.0; p_count * nin];
            for p in 0..p_count {
                for j in 0..nout {
                    let k = p * nout + j;
                    let (dv, ddx, ddxx) = (zb_v[k], zb_dx[k], zb_dxx[k]);
                    let wrow = &w[j * nin..(j + 1) * nin];
                    let pv = &mut prev_v[p * nin..(p + 1) * nin];
                    for i in 0..nin {
                        pv[i] += wrow[i] * dv;
                    }
                    let pdx = &mut prev_dx[p * nin..(p + 1) * nin];
                    for i in 0..nin {
                        pdx[i] += wrow[i] * ddx;
                    }
                    let pdxx = &mut prev_dxx[p * nin..(p + 1) * nin];
                    for i in 0..nin {
                        pdxx[i] += wrow[i] * ddxx;
                    }
                }
            }
            ab_v = prev_v;
            ab_dx = prev_dx;
            ab_dxx = prev_dxx;
        }
    }

    /// Jets feeding layer `l`: recomputed activation outputs of layer `l-1`,
    /// or the scaled input jets for `l = 0`.
    fn layer_inputs_jets(
        &self,
        scale: f64,
        pts: &[(f64, f64)],
        trace: &JetTrace,
        l: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p_count = pts.len();
        if l == 0 {
            let mut v = Vec::with_capacity(p_count * 2);
            let mut dx = Vec::with_capacity(p_count * 2);
            let dxx = vec![0.0; p_count * 2];
            for &(x, t) in pts {
                v.push(scale * x);
                v.push(scale * t);
                dx.push(scale);
                dx.push(0.0);
            }
            (v, dx, dxx)
        } else {
            let act = self.acts[l - 1];
            let [z_v, z_dx, z_dxx] = &trace.z[l - 1];
            let n = z_v.len();
            let (mut v, mut dx, mut dxx) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for k in 0..n {
                let (s, s1, s2, _) = act.derivatives(z_v[k]);
                v[k] = s;
                dx[k] = s1 * z_dx[k];
                dxx[k] = s2 * z_dx[k] * z_dx[k] + s1 * z_dxx[k];
            }
            (v, dx, dxx)
        }
    }

    // ---- batched value-only path ------------------------------------------

    fn batch_forward_values(&self, scale: f64, pts: &[(f64, f64)]) -> (Vec<f64>, ValueTrace) {
        let p_count = pts.len();
        let n_layers = self.widths.len() - 1;
        let mut trace = ValueTrace { z: Vec::with_capacity(n_layers) };
        let mut a: Vec<f64> = Vec::with_capacity(p_count * 2);
        for &(x, t) in pts {
            a.push(scale * x);
            a.push(scale * t);
        }
        for l in 0..n_layers {
            let (nin, nout) = (self.widths[l], self.widths[l + 1]);
            let w = self.weight_block(l);
            let b = self.bias_block(l);
            let mut z = vec![0.0; p_count * nout];
            for p in 0..p_count {
                let arow = &a[p * nin..(p + 1) * nin];
                let zrow = &mut z[p * nout..(p + 1) * nout];
                for j in 0..nout {
                    let wrow = &w[j * nin..(j + 1) * nin];
                    let mut acc = b[j];
                    for i in 0..nin {
                        acc += wrow[i] * arow[i];
                    }
                    zrow[j] = acc;
                }
            }
            let act = self.acts[l];
            let mut out = vec![0.0; p_count * nout];
            match act {
                Activation::Identity => out.copy_from_slice(&z),
                Activation::Tanh => {
                    for k in 0..z.len() {
                        out[k] = z[k].tanh();
                    }
                }
                Activation::Sin => {
                    for k in 0..z.len() {
                        out[k] = z[k].sin();
                    }
                }
            }
            trace.z.push(z);
            a = out;
        }
        (a, trace)
    }

    fn batch_backward_values(
        &self,
        scale: f64,
        pts: &[(f64, f64)],
        trace: &ValueTrace,
        cot: &[f64],
        grad: &mut [f64],
    ) {
        let p_count = pts.len();
        let n_layers = self.widths.len() - 1;
        let mut ab: Vec<f64> = cot.to_vec();
        for l in (0..n_layers).rev() {
            let (nin, nout) = (self.widths[l], self.widths[l + 1]);
            let act = self.acts[l];
            let z = &trace.z[l];
            let mut zb = ab;
            if act != Activation::Identity {
                for k in 0..p_count * nout {
                    let (_, s1, _, _) = act.derivatives(z[k]);
                    zb[k] *= s1;
                }
            }
            // layer inputs
            let in_v: Vec<f64> = if l == 0 {
                let mut v = Vec::with_capacity(p_count * 2);
                for &(x, t) in pts {
                    v.push(scale * x);
                    v.push(scale * t);
                }
                v
            } else {
                let act_prev = self.acts[l - 1];
                trace.z[l - 1].iter().map(|&zz| act_prev.apply(zz)).collect()
            };
            let w_off = self.offsets[l];
            let b_off = w_off + nin * nout;
            for p in 0..p_count {
                for j in 0..nout {
                    let d = zb[p * nout + j];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b_off + j] += d;
                    let grow = &mut grad[w_off + j * nin..w_off + (j + 1) * nin];
                    let arow = &in_v[p * nin..(p + 1) * nin];
                    for i in 0..nin {
                        grow[i] += d * arow[i];
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = self.weight_block(l);
            let mut prev = vec![0.0; p_count * nin];
            for p in 0..p_count {
                for j in 0..nout {
                    let d = zb[p * nout + j];
                    if d == 0.0 {
                        continue;
                    }
                    let wrow = &w[j * nin..(j + 1) * nin];
                    let pv = &mut prev[p * nin..(p + 1) * nin];
                    for i in 0..nin {
                        pv[i] += wrow[i] * d;
                    }
                }
            }
            ab = prev;
        }
    }
}

struct JetTrace {
    /// Per layer: pre-activation `[z_v, z_dx, z_dxx]`, each `[points * width]`.
    z: Vec<[Vec<f64>; 3]>,
}

struct ValueTrace {
    z: Vec<Vec<f64>>,
}

/// Parallel scaled subnetworks with a trainable linear combination head:
/// `u(x,t) = sum_i head_i * subnet_i(a_i x, a_i t)`.
#[derive(Debug, Clone)]
pub struct MultiscaleNet {
    subnets: Vec<DenseNet>,
    scales: Vec<f64>,
    head: Vec<f64>,
    subnet_offsets: Vec<usize>,
    total_params: usize,
}

/// Multiscale network with sinusoidal first hidden layers, tanh afterwards,
/// head weights `1/n_subnets`; one subnet per scale factor, no shared
/// parameters (block-diagonal weight structure).
pub fn init_multiscale(subnet_widths: &[usize], scales: &[f64], seed: u64) -> Result<MultiscaleNet> {
    if scales.is_empty() {
        return Err(Error::InvalidParameter { name: "scales", msg: "need at least one subnet".into() });
    }
    if scales.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "scales",
            msg: format!("must all be > 0, got {scales:?}"),
        });
    }
    let acts = sin_first_activations(subnet_widths.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subnets = Vec::with_capacity(scales.len());
    for _ in scales {
        subnets.push(init_dense_from_rng(subnet_widths, &acts, 1.0, &mut rng)?);
    }
    let head = vec![1.0 / scales.len() as f64; scales.len()];
    let mut subnet_offsets = Vec::with_capacity(scales.len());
    let mut total = 0;
    for s in &subnets {
        subnet_offsets.push(total);
        total += s.n_params();
    }
    let total_params = total + scales.len();
    Ok(MultiscaleNet { subnets, scales: scales.to_vec(), head, subnet_offsets, total_params })
}

impl MultiscaleNet {
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn subnet_widths(&self) -> &[usize] {
        self.subnets[0].widths()
    }

    pub fn n_params(&self) -> usize {
        self.total_params
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_params);
        for s in &self.subnets {
            out.extend_from_slice(s.params());
        }
        out.extend_from_slice(&self.head);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.total_params);
        for (s, &off) in self.subnets.iter_mut().zip(&self.subnet_offsets) {
            let n = s.n_params();
            s.params_mut().copy_from_slice(&p[off..off + n]);
        }
        self.head.copy_from_slice(&p[self.total_params - self.head.len()..]);
    }

    fn slot_info(&self, slot: usize) -> SlotInfo {
        let head_start = self.total_params - self.head.len();
        if slot >= head_start {
            return SlotInfo::Head { subnet: slot - head_start };
        }
        let mut k = self.subnets.len() - 1;
        while self.subnet_offsets[k] > slot {
            k -= 1;
        }
        match self.subnets[k].slot_info(slot - self.subnet_offsets[k]) {
            SlotInfo::Weight { layer, row, col, .. } => SlotInfo::Weight { subnet: k, layer, row, col },
            SlotInfo::Bias { layer, row, .. } => SlotInfo::Bias { subnet: k, layer, row },
            SlotInfo::Head { .. } => unreachable!(),
        }
    }

    pub fn forward<S: Real>(&self, x: S, t: S) -> S {
        let mut acc = S::from_f64(0.0);
        for ((sub, &a), &h) in self.subnets.iter().zip(&self.scales).zip(&self.head) {
            acc = acc + S::from_f64(h) * sub.forward_scaled(a, x, t);
        }
        acc
    }
}

/// A trainable network of either architecture.
#[derive(Debug, Clone)]
pub enum Network {
    Dense(DenseNet),
    Multiscale(MultiscaleNet),
}

impl Network {
    pub fn n_params(&self) -> usize {
        match self {
            Network::Dense(n) => n.n_params(),
            Network::Multiscale(n) => n.n_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Network::Dense(n) => n.params().to_vec(),
            Network::Multiscale(n) => n.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match self {
            Network::Dense(n) => n.params_mut().copy_from_slice(p),
            Network::Multiscale(n) => n.set_params(p),
        }
    }

    pub fn slot_info(&self, slot: usize) -> SlotInfo {
        match self {
            Network::Dense(n) => n.slot_info(slot),
            Network::Multiscale(n) => n.slot_info(slot),
        }
    }

    /// Fresh network of the same architecture with re-drawn weights.
    pub fn reinit(&self, seed: u64) -> Result<Network> {
        match self {
            Network::Dense(n) => {
                Ok(Network::Dense(init_dense(&n.widths, &n.acts, n.kappa, seed)?))
            }
            Network::Multiscale(n) => {
                Ok(Network::Multiscale(init_multiscale(n.subnet_widths(), &n.scales, seed)?))
            }
        }
    }

    pub fn forward<S: Real>(&self, x: S, t: S) -> S {
        match self {
            Network::Dense(n) => n.forward(x, t),
            Network::Multiscale(n) => n.forward(x, t),
        }
    }
}

impl Field for Network {
    fn jet(&self, x: f64, t: f64) -> Jet2 {
        self.forward(Jet2::var(x), Jet2::constant(t))
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        self.forward(x, t)
    }
}

impl Field for DenseNet {
    fn jet(&self, x: f64, t: f64) -> Jet2 {
        self.forward(Jet2::var(x), Jet2::constant(t))
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        self.forward(x, t)
    }
}

impl Field for MultiscaleNet {
    fn jet(&self, x: f64, t: f64) -> Jet2 {
        self.forward(Jet2::var(x), Jet2::constant(t))
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        self.forward(x, t)
    }
}

impl TapeField for Network {
    fn n_params(&self) -> usize {
        Network::n_params(self)
    }

    fn record(&self, pts: &[(f64, f64)]) -> (Vec<Jet2>, BatchBackward<'_>) {
        match self {
            Network::Dense(net) => {
                let (jets, trace) = net.batch_forward_jets(1.0, pts);
                let pts = pts.to_vec();
                let back: BatchBackward<'_> = Box::new(move |cot, grad| {
                    net.batch_backward_jets(1.0, &pts, &trace, cot, grad);
                });
                (jets, back)
            }
            Network::Multiscale(ms) => {
                let mut traces = Vec::with_capacity(ms.subnets.len());
                let mut sub_jets = Vec::with_capacity(ms.subnets.len());
                let mut jets = vec![Jet2::default(); pts.len()];
                for ((sub, &a), &h) in ms.subnets.iter().zip(&ms.scales).zip(&ms.head) {
                    let (sj, trace) = sub.batch_forward_jets(a, pts);
                    for (acc, j) in jets.iter_mut().zip(&sj) {
                        acc.v += h * j.v;
                        acc.dx += h * j.dx;
                        acc.dxx += h * j.dxx;
                    }
                    traces.push(trace);
                    sub_jets.push(sj);
                }
                let pts = pts.to_vec();
                let back: BatchBackward<'_> = Box::new(move |cot, grad| {
                    let head_start = ms.total_params - ms.head.len();
                    let mut scaled = vec![[0.0; 3]; pts.len()];
                    for (k, ((sub, &a), &h)) in
                        ms.subnets.iter().zip(&ms.scales).zip(&ms.head).enumerate()
                    {
                        for (s, c) in scaled.iter_mut().zip(cot) {
                            s[0] = h * c[0];
                            s[1] = h * c[1];
                            s[2] = h * c[2];
                        }
                        let off = ms.subnet_offsets[k];
                        sub.batch_backward_jets(
                            a,
                            &pts,
                            &traces[k],
                            &scaled,
                            &mut grad[off..off + sub.n_params()],
                        );
                        let mut hg = 0.0;
                        for (c, j) in cot.iter().zip(&sub_jets[k]) {
                            hg += c[0] * j.v + c[1] * j.dx + c[2] * j.dxx;
                        }
                        grad[head_start + k] += hg;
                    }
                });
                (jets, back)
            }
        }
    }

    fn record_values(&self, pts: &[(f64, f64)]) -> (Vec<f64>, BatchBackward<'_>) {
        match self {
            Network::Dense(net) => {
                let (vals, trace) = net.batch_forward_values(1.0, pts);
                let pts = pts.to_vec();
                let back: BatchBackward<'_> = Box::new(move |cot, grad| {
                    let c: Vec<f64> = cot.iter().map(|c| c[0]).collect();
                    net.batch_backward_values(1.0, &pts, &trace, &c, grad);
                });
                (vals, back)
            }
            Network::Multiscale(ms) => {
                let mut traces = Vec::with_capacity(ms.subnets.len());
                let mut sub_vals = Vec::with_capacity(ms.subnets.len());
                let mut vals = vec![0.0; pts.len()];
                for ((sub, &a), &h) in ms.subnets.iter().zip(&ms.scales).zip(&ms.head) {
                    let (sv, trace) = sub.batch_forward_values(a, pts);
                    for (acc, v) in vals.iter_mut().zip(&sv) {
                        *acc += h * v;
                    }
                    traces.push(trace);
                    sub_vals.push(sv);
                }
                let pts = pts.to_vec();
                let back: BatchBackward<'_> = Box::new(move |cot, grad| {
                    let head_start = ms.total_params - ms.head.len();
                    let mut scaled = vec![0.0; pts.len()];
                    for (k, ((sub, &a), &h)) in
                        ms.subnets.iter().zip(&ms.scales).zip(&ms.head).enumerate()
                    {
                        for (s, c) in scaled.iter_mut().zip(cot) {
                            *s = h * c[0];
                        }
                        let off = ms.subnet_offsets[k];
                        sub.batch_backward_values(
                            a,
                            &pts,
                            &traces[k],
                            &scaled,
                            &mut grad[off..off + sub.n_params()],
                        );
                        let mut hg = 0.0;
                        for (c, v) in cot.iter().zip(&sub_vals[k]) {
                            hg += c[0] * v;
                        }
                        grad[head_start + k] += hg;
                    }
                });
                (vals, back)
            }
        }
    }
}

// ---- checkpoint format -----------------------------------------------------
//
// Plain-text preamble terminated by a `---` line, then `params` f64 values in
// little-endian byte order:
//
//   fracstage checkpoint v1
//   kind dense|multiscale
//   widths 2 20 ... 1
//   activations tanh ... identity
//   kappa <v>              (dense)
//   scales <a_1> ... <a_n> (multiscale)
//   params <count>
//   ---

/// Write a network checkpoint: text descriptor preamble plus the flat
/// little-endian f64 parameter array.
pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let params = net.params();
    match net {
        Network::Dense(n) => {
            writeln!(f, "fracstage checkpoint v1")?;
            writeln!(f, "kind dense")?;
            writeln!(f, "widths {}", join(n.widths()))?;
            writeln!(f, "activations {}", n.acts.iter().map(|a| a.name()).collect::<Vec<_>>().join(" "))?;
            writeln!(f, "kappa {:.17e}", n.kappa)?;
        }
        Network::Multiscale(n) => {
            writeln!(f, "fracstage checkpoint v1")?;
            writeln!(f, "kind multiscale")?;
            writeln!(f, "widths {}", join(n.subnet_widths()))?;
            writeln!(
                f,
                "activations {}",
                n.subnets[0].acts.iter().map(|a| a.name()).collect::<Vec<_>>().join(" ")
            )?;
            writeln!(f, "scales {}", n.scales.iter().map(|s| format!("{s:.17e}")).collect::<Vec<_>>().join(" "))?;
        }
    }
    writeln!(f, "params {}", params.len())?;
    writeln!(f, "---")?;
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for v in &params {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&bytes)?;
    Ok(())
}

fn join(w: &[usize]) -> String {
    w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let f = std::fs::File::open(path)?;
    let mut reader = BufReader::new(f);
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Config("checkpoint preamble not terminated by ---".into()));
        }
        let line = line.trim_end();
        if line == "---" {
            break;
        }
        let mut it = line.split_whitespace().map(str::to_string);
        let key = it.next().unwrap_or_default();
        fields.push((key, it.collect()));
    }
    let get = |key: &str| -> Result<&Vec<String>> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Config(format!("checkpoint missing `{key}`")))
    };
    if fields.first().map(|(k, _)| k.as_str()) != Some("fracstage") {
        return Err(Error::Config("not a fracstage checkpoint".into()));
    }
    let kind = get("kind")?[0].clone();
    let widths: Vec<usize> = get("widths")?
        .iter()
        .map(|s| s.parse().map_err(|_| Error::Config(format!("bad width `{s}`"))))
        .collect::<Result<_>>()?;
    let acts: Vec<Activation> =
        get("activations")?.iter().map(|s| Activation::parse(s)).collect::<Result<_>>()?;
    let count: usize =
        get("params")?[0].parse().map_err(|_| Error::Config("bad params count".into()))?;

    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Config(format!(
            "checkpoint payload is {} bytes, expected {}",
            bytes.len(),
            count * 8
        )));
    }
    let params: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();

    match kind.as_str() {
        "dense" => {
            let kappa: f64 =
                get("kappa")?[0].parse().map_err(|_| Error::Config("bad kappa".into()))?;
            let mut net = init_dense(&widths, &acts, kappa, 0)?;
            if net.n_params() != count {
                return Err(Error::Config("checkpoint parameter count mismatch".into()));
            }
            net.params_mut().copy_from_slice(&params);
            Ok(Network::Dense(net))
        }
        "multiscale" => {
            let scales: Vec<f64> = get("scales")?
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Config(format!("bad scale `{s}`"))))
                .collect::<Result<_>>()?;
            let mut net = init_multiscale(&widths, &scales, 0)?;
            if net.n_params() != count {
                return Err(Error::Config("checkpoint parameter count mismatch".into()));
            }
            net.set_params(&params);
            Ok(Network::Multiscale(net))
        }
        other => Err(Error::Config(format!("unknown checkpoint kind `{other}`"))),
    }
}
