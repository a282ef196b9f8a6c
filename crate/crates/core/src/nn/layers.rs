//! Network building blocks with explicit forward/backward passes.
//!
//! Layers are pure value structs; gradients accumulate into separate
//! mirror structs so per-sample backward passes can run on worker threads
//! and be reduced in a fixed order (bitwise-deterministic training).
//! `backward` takes the layer's forward-time input; anything else it needs
//! is recomputed, which keeps traces small.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::scalar::{sc, Scalar};
use crate::tensor::Tensor;

fn uniform<S: Scalar>(rng: &mut ChaCha12Rng, n: usize, bound: f64) -> Vec<S> {
    (0..n).map(|_| sc::<S>(rng.gen_range(-bound..bound))).collect()
}

// ---------------------------------------------------------------------------
// 1-D convolution
// ---------------------------------------------------------------------------

/// 1-D convolution over (channels x time), weights `[out][in][k]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Conv1d<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub struct ConvGrad<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> Conv1d<S> {
    pub fn new(
        rng: &mut ChaCha12Rng,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        padding: usize,
    ) -> Self {
        let bound = 1.0 / ((in_ch * kernel) as f64).sqrt();
        Self {
            w: uniform(rng, out_ch * in_ch * kernel, bound),
            b: uniform(rng, out_ch, bound),
            in_ch,
            out_ch,
            kernel,
            stride,
            dilation,
            padding,
        }
    }

    /// Length-preserving convolution (stride 1, symmetric padding).
    pub fn same(rng: &mut ChaCha12Rng, in_ch: usize, out_ch: usize, kernel: usize, dilation: usize) -> Self {
        let padding = dilation * (kernel - 1) / 2;
        Self::new(rng, in_ch, out_ch, kernel, 1, dilation, padding)
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        let span = self.dilation * (self.kernel - 1) + 1;
        (in_len + 2 * self.padding - span) / self.stride + 1
    }

    pub fn zero_grad(&self) -> ConvGrad<S> {
        ConvGrad {
            w: vec![S::zero(); self.w.len()],
            b: vec![S::zero(); self.b.len()],
        }
    }

    #[inline]
    fn wslice(&self, oc: usize, ic: usize) -> &[S] {
        let base = (oc * self.in_ch + ic) * self.kernel;
        &self.w[base..base + self.kernel]
    }

    pub fn forward(&self, x: &Tensor<S>) -> Tensor<S> {
        assert_eq!(x.ch(), self.in_ch, "conv input channels");
        let in_len = x.len();
        let out_len = self.out_len(in_len);
        let mut y = Tensor::zeros(self.out_ch, out_len);
        if self.stride == 1 {
            for oc in 0..self.out_ch {
                {
                    let yr = y.row_mut(oc);
                    let b = self.b[oc];
                    for v in yr.iter_mut() {
                        *v = b;
                    }
                }
                for ic in 0..self.in_ch {
                    let xr = x.row(ic);
                    let ws = self.wslice(oc, ic);
                    let yr = y.row_mut(oc);
                    for (kk, &wv) in ws.iter().enumerate() {
                        let off = (kk * self.dilation) as isize - self.padding as isize;
                        let t0 = (-off).max(0) as usize;
                        let t1 = (out_len as isize).min(in_len as isize - off).max(0) as usize;
                        if t0 >= t1 {
                            continue;
                        }
                        let xs = &xr[(t0 as isize + off) as usize..(t1 as isize + off) as usize];
                        for (o, &xv) in yr[t0..t1].iter_mut().zip(xs) {
                            *o += wv * xv;
                        }
                    }
                }
            }
        } else {
            for oc in 0..self.out_ch {
                {
                    let yr = y.row_mut(oc);
                    let b = self.b[oc];
                    for v in yr.iter_mut() {
                        *v = b;
                    }
                }
                for ic in 0..self.in_ch {
                    let xr = x.row(ic);
                    let ws = self.wslice(oc, ic);
                    let yr = y.row_mut(oc);
                    for (kk, &wv) in ws.iter().enumerate() {
                        let (t0, t1, base) = self.strided_range(kk, in_len, out_len);
                        let mut pos = base;
                        for yv in &mut yr[t0..t1] {
                            *yv += wv * xr[pos];
                            pos += self.stride;
                        }
                    }
                }
            }
        }
        y
    }

    /// Valid output range `[t0, t1)` for kernel tap `kk`, plus the input
    /// index corresponding to `t0` (strided layouts).
    #[inline]
    fn strided_range(&self, kk: usize, in_len: usize, out_len: usize) -> (usize, usize, usize) {
        let off = (kk * self.dilation) as isize - self.padding as isize;
        // need 0 <= t*stride + off < in_len
        let t0 = if off >= 0 {
            0
        } else {
            ((-off) as usize).div_ceil(self.stride)
        };
        let t1 = if (in_len as isize) <= off {
            t0
        } else {
            (((in_len as isize - 1 - off) as usize) / self.stride + 1).min(out_len).max(t0)
        };
        let base = (t0 * self.stride) as isize + off;
        (t0, t1, base as usize)
    }

    /// Backpropagate: accumulates parameter gradients (when given) and
    /// returns the gradient w.r.t. the input.
    pub fn backward(&self, x: &Tensor<S>, gy: &Tensor<S>, grads: Option<&mut ConvGrad<S>>) -> Tensor<S> {
        let in_len = x.len();
        let out_len = self.out_len(in_len);
        assert_eq!(gy.ch(), self.out_ch);
        assert_eq!(gy.len(), out_len);
        let mut gx = Tensor::zeros(self.in_ch, in_len);
        if let Some(grads) = grads {
            for oc in 0..self.out_ch {
                let gr = gy.row(oc);
                grads.b[oc] += gr.iter().copied().sum::<S>();
                for ic in 0..self.in_ch {
                    let xr = x.row(ic);
                    let base = (oc * self.in_ch + ic) * self.kernel;
                    if self.stride == 1 {
                        for kk in 0..self.kernel {
                            let off = (kk * self.dilation) as isize - self.padding as isize;
                            let t0 = (-off).max(0) as usize;
                            let t1 = (out_len as isize).min(in_len as isize - off).max(0) as usize;
                            if t0 >= t1 {
                                continue;
                            }
                            let xs = &xr[(t0 as isize + off) as usize..(t1 as isize + off) as usize];
                            let mut acc = S::zero();
                            for (&g, &xv) in gr[t0..t1].iter().zip(xs) {
                                acc += g * xv;
                            }
                            grads.w[base + kk] += acc;
                        }
                    } else {
                        for kk in 0..self.kernel {
                            let (t0, t1, mut pos) = self.strided_range(kk, in_len, out_len);
                            let mut acc = S::zero();
                            for &g in &gr[t0..t1] {
                                acc += g * xr[pos];
                                pos += self.stride;
                            }
                            grads.w[base + kk] += acc;
                        }
                    }
                }
            }
        }
        // grad wrt input
        if self.stride == 1 {
            for oc in 0..self.out_ch {
                let gr = gy.row(oc);
                for ic in 0..self.in_ch {
                    let ws = self.wslice(oc, ic);
                    let gxr = gx.row_mut(ic);
                    for (kk, &wv) in ws.iter().enumerate() {
                        let off = (kk * self.dilation) as isize - self.padding as isize;
                        let t0 = (-off).max(0) as usize;
                        let t1 = (out_len as isize).min(in_len as isize - off).max(0) as usize;
                        if t0 >= t1 {
                            continue;
                        }
                        let gxs = &mut gxr[(t0 as isize + off) as usize..(t1 as isize + off) as usize];
                        for (gxv, &g) in gxs.iter_mut().zip(&gr[t0..t1]) {
                            *gxv += wv * g;
                        }
                    }
                }
            }
        } else {
            for oc in 0..self.out_ch {
                let gr = gy.row(oc);
                for ic in 0..self.in_ch {
                    let ws = self.wslice(oc, ic);
                    let gxr = gx.row_mut(ic);
                    for (kk, &wv) in ws.iter().enumerate() {
                        let (t0, t1, mut pos) = self.strided_range(kk, in_len, out_len);
                        for &g in &gr[t0..t1] {
                            gxr[pos] += wv * g;
                            pos += self.stride;
                        }
                    }
                }
            }
        }
        gx
    }
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

/// Dense layer over a flattened tensor, weights `[out][in]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dense<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone)]
pub struct DenseGrad<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(rng: &mut ChaCha12Rng, in_dim: usize, out_dim: usize) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            w: uniform(rng, out_dim * in_dim, bound),
            b: uniform(rng, out_dim, bound),
            in_dim,
            out_dim,
        }
    }

    pub fn zero_grad(&self) -> DenseGrad<S> {
        DenseGrad {
            w: vec![S::zero(); self.w.len()],
            b: vec![S::zero(); self.b.len()],
        }
    }

    /// Input is read flat; output has shape (out_dim, 1).
    pub fn forward(&self, x: &Tensor<S>) -> Tensor<S> {
        assert_eq!(x.numel(), self.in_dim, "dense input size");
        let xd = x.data();
        let mut y = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let ws = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (&wv, &xv) in ws.iter().zip(xd) {
                acc += wv * xv;
            }
            y.push(acc);
        }
        Tensor::from_vec(self.out_dim, 1, y)
    }

    pub fn backward(&self, x: &Tensor<S>, gy: &Tensor<S>, grads: Option<&mut DenseGrad<S>>) -> Tensor<S> {
        assert_eq!(gy.numel(), self.out_dim);
        let xd = x.data();
        let gyd = gy.data();
        if let Some(grads) = grads {
            for (o, &g) in gyd.iter().enumerate() {
                grads.b[o] += g;
                let gw = &mut grads.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (gwv, &xv) in gw.iter_mut().zip(xd) {
                    *gwv += g * xv;
                }
            }
        }
        let mut gx = vec![S::zero(); self.in_dim];
        for (o, &g) in gyd.iter().enumerate() {
            let ws = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (gxv, &wv) in gx.iter_mut().zip(ws) {
                *gxv += g * wv;
            }
        }
        Tensor::from_vec(x.ch(), x.len(), gx)
    }
}

// ---------------------------------------------------------------------------
// Group normalization (single group = layer norm over channels x time,
// per-channel affine)
// ---------------------------------------------------------------------------

const GN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroupNorm<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub ch: usize,
}

#[derive(Debug, Clone)]
pub struct GroupNormGrad<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

impl<S: Scalar> GroupNorm<S> {
    pub fn new(ch: usize) -> Self {
        Self {
            gamma: vec![S::one(); ch],
            beta: vec![S::zero(); ch],
            ch,
        }
    }

    pub fn zero_grad(&self) -> GroupNormGrad<S> {
        GroupNormGrad {
            gamma: vec![S::zero(); self.ch],
            beta: vec![S::zero(); self.ch],
        }
    }

    fn moments(&self, x: &Tensor<S>) -> (S, S) {
        let n = sc::<S>(x.numel() as f64);
        let mean = x.data().iter().copied().sum::<S>() / n;
        let mut var = S::zero();
        for &v in x.data() {
            let d = v - mean;
            var += d * d;
        }
        var /= n;
        let inv_std = S::one() / (var + sc(GN_EPS)).sqrt();
        (mean, inv_std)
    }

    pub fn forward(&self, x: &Tensor<S>) -> Tensor<S> {
        assert_eq!(x.ch(), self.ch, "group norm channels");
        let (mean, inv_std) = self.moments(x);
        let mut y = Tensor::zeros(x.ch(), x.len());
        for c in 0..x.ch() {
            let (g, b) = (self.gamma[c], self.beta[c]);
            for (yv, &xv) in y.row_mut(c).iter_mut().zip(x.row(c)) {
                *yv = g * (xv - mean) * inv_std + b;
            }
        }
        y
    }

    pub fn backward(&self, x: &Tensor<S>, gy: &Tensor<S>, grads: Option<&mut GroupNormGrad<S>>) -> Tensor<S> {
        let n = sc::<S>(x.numel() as f64);
        let (mean, inv_std) = self.moments(x);
        // ghat = gy * gamma (per channel); reductions over the whole sample
        let mut sum_ghat = S::zero();
        let mut sum_ghat_xhat = S::zero();
        let mut ghat = Tensor::zeros(x.ch(), x.len());
        for c in 0..x.ch() {
            let g = self.gamma[c];
            let (gr, xr, hr) = (gy.row(c), x.row(c), ghat.row_mut(c));
            for ((hv, &gv), &xv) in hr.iter_mut().zip(gr).zip(xr) {
                let xhat = (xv - mean) * inv_std;
                let gh = gv * g;
                *hv = gh;
                sum_ghat += gh;
                sum_ghat_xhat += gh * xhat;
            }
        }
        if let Some(grads) = grads {
            for c in 0..x.ch() {
                let (gr, xr) = (gy.row(c), x.row(c));
                let mut dg = S::zero();
                let mut db = S::zero();
                for (&gv, &xv) in gr.iter().zip(xr) {
                    dg += gv * (xv - mean) * inv_std;
                    db += gv;
                }
                grads.gamma[c] += dg;
                grads.beta[c] += db;
            }
        }
        let mean_ghat = sum_ghat / n;
        let mean_ghat_xhat = sum_ghat_xhat / n;
        let mut gx = Tensor::zeros(x.ch(), x.len());
        for c in 0..x.ch() {
            let (hr, xr, gxr) = (ghat.row(c), x.row(c), gx.row_mut(c));
            for ((gxv, &hv), &xv) in gxr.iter_mut().zip(hr).zip(xr) {
                let xhat = (xv - mean) * inv_std;
                *gxv = inv_std * (hv - mean_ghat - xhat * mean_ghat_xhat);
            }
        }
        gx
    }
}

// ---------------------------------------------------------------------------
// Stateless ops: Mish, max-pool 2, nearest upsample 2
// ---------------------------------------------------------------------------

// mish(x) = x * tanh(softplus(x)); with z = 1 + e^x this is
// x * (z^2 - 1) / (z^2 + 1), needing a single exp per element. Above the
// cutoff tanh(softplus(x)) is 1 to within f64 epsilon.
const MISH_SATURATION: f64 = 20.0;

#[inline]
fn mish_tanh_sp<S: Scalar>(x: S) -> S {
    let z = S::one() + x.exp();
    let z2 = z * z;
    (z2 - S::one()) / (z2 + S::one())
}

pub fn mish_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let cut = sc::<S>(MISH_SATURATION);
    x.map(|v| if v > cut { v } else { v * mish_tanh_sp(v) })
}

pub fn mish_backward<S: Scalar>(x: &Tensor<S>, gy: &Tensor<S>) -> Tensor<S> {
    let cut = sc::<S>(MISH_SATURATION);
    let one = S::one();
    let mut gx = Tensor::zeros(x.ch(), x.len());
    for (i, (&xv, &gv)) in x.data().iter().zip(gy.data()).enumerate() {
        let d = if xv > cut {
            one
        } else {
            let e = xv.exp();
            let z = one + e;
            let z2 = z * z;
            let t = (z2 - one) / (z2 + one);
            let sig = e / z;
            t + xv * (one - t * t) * sig
        };
        gx.data_mut()[i] = gv * d;
    }
    gx
}

/// Max pooling, kernel 2, stride 2 (even input length required).
pub fn maxpool2_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    assert_eq!(x.len() % 2, 0, "maxpool2 needs even length");
    Tensor::from_fn(x.ch(), x.len() / 2, |c, t| x.get(c, 2 * t).max(x.get(c, 2 * t + 1)))
}

pub fn maxpool2_backward<S: Scalar>(x: &Tensor<S>, gy: &Tensor<S>) -> Tensor<S> {
    let mut gx = Tensor::zeros(x.ch(), x.len());
    for c in 0..x.ch() {
        for t in 0..gy.len() {
            // ties route to the first element, deterministically
            let idx = if x.get(c, 2 * t) >= x.get(c, 2 * t + 1) { 2 * t } else { 2 * t + 1 };
            let cur = gx.get(c, idx);
            gx.set(c, idx, cur + gy.get(c, t));
        }
    }
    gx
}

/// Nearest-neighbor upsampling by a factor of 2.
pub fn upsample2_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    Tensor::from_fn(x.ch(), x.len() * 2, |c, t| x.get(c, t / 2))
}

pub fn upsample2_backward<S: Scalar>(gy: &Tensor<S>) -> Tensor<S> {
    assert_eq!(gy.len() % 2, 0);
    Tensor::from_fn(gy.ch(), gy.len() / 2, |c, t| gy.get(c, 2 * t) + gy.get(c, 2 * t + 1))
}
