//! Convolutional autoencoder for 12-hour SCADA windows.
//!
//! Encoder: two conv stacks (kernel 7 then kernel 5, each x2 with Mish),
//! max-pool 2 and single-group group norm after each stack. Bottleneck:
//! flatten, FC to 72 units, FC back to 8 x (window/4). Decoder: two
//! (upsample x2, conv k3 x2 with Mish, group norm) blocks, then a linear
//! kernel-1 output convolution back to the input channel count.
//!
//! Widths are configurable so tests can run miniatures; defaults follow the
//! production architecture.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    maxpool2_backward, maxpool2_forward, mish_backward, mish_forward, upsample2_backward,
    upsample2_forward, Conv1d, ConvGrad, Dense, DenseGrad, GroupNorm, GroupNormGrad,
};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid autoencoder config: {0}")]
    BadConfig(String),
    #[error("input shape ({ch}, {len}) does not match model ({want_ch}, {want_len})")]
    ShapeMismatch {
        ch: usize,
        len: usize,
        want_ch: usize,
        want_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    /// Input/output channels.
    pub channels: usize,
    /// Window length in timesteps; must be divisible by 4 (two pools).
    pub window: usize,
    /// Convolution filter count in encoder/decoder stacks.
    pub filters: usize,
    /// Bottleneck width.
    pub bottleneck: usize,
    /// Channel count the bottleneck expands back to before the decoder.
    pub decoder_in: usize,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            channels: 11,
            window: 72,
            filters: 32,
            bottleneck: 72,
            decoder_in: 8,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.window.is_multiple_of(4) || self.window == 0 {
            return Err(ModelError::BadConfig(format!(
                "window {} must be a positive multiple of 4",
                self.window
            )));
        }
        for (name, v) in [
            ("channels", self.channels),
            ("filters", self.filters),
            ("bottleneck", self.bottleneck),
            ("decoder_in", self.decoder_in),
        ] {
            if v == 0 {
                return Err(ModelError::BadConfig(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    fn pooled(&self) -> usize {
        self.window / 4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder<S> {
    pub config: AutoencoderConfig,
    enc1_c1: Conv1d<S>,
    enc1_c2: Conv1d<S>,
    gn1: GroupNorm<S>,
    enc2_c1: Conv1d<S>,
    enc2_c2: Conv1d<S>,
    gn2: GroupNorm<S>,
    fc_in: Dense<S>,
    fc_out: Dense<S>,
    dec3_c1: Conv1d<S>,
    dec3_c2: Conv1d<S>,
    gn3: GroupNorm<S>,
    dec4_c1: Conv1d<S>,
    dec4_c2: Conv1d<S>,
    gn4: GroupNorm<S>,
    out: Conv1d<S>,
}

/// Intermediate activations of one forward pass, consumed by `backward`.
pub struct AeTrace<S> {
    x: Tensor<S>,
    e1a: Tensor<S>,
    e1a_act: Tensor<S>,
    e1b: Tensor<S>,
    e1b_act: Tensor<S>,
    pool1: Tensor<S>,
    gn1_out: Tensor<S>,
    e2a: Tensor<S>,
    e2a_act: Tensor<S>,
    e2b: Tensor<S>,
    e2b_act: Tensor<S>,
    pool2: Tensor<S>,
    gn2_out: Tensor<S>,
    code: Tensor<S>,
    up3: Tensor<S>,
    d3a: Tensor<S>,
    d3a_act: Tensor<S>,
    d3b: Tensor<S>,
    d3b_act: Tensor<S>,
    up4: Tensor<S>,
    d4a: Tensor<S>,
    d4a_act: Tensor<S>,
    d4b: Tensor<S>,
    d4b_act: Tensor<S>,
    gn4_out: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct AeGrads<S> {
    enc1_c1: ConvGrad<S>,
    enc1_c2: ConvGrad<S>,
    gn1: GroupNormGrad<S>,
    enc2_c1: ConvGrad<S>,
    enc2_c2: ConvGrad<S>,
    gn2: GroupNormGrad<S>,
    fc_in: DenseGrad<S>,
    fc_out: DenseGrad<S>,
    dec3_c1: ConvGrad<S>,
    dec3_c2: ConvGrad<S>,
    gn3: GroupNormGrad<S>,
    dec4_c1: ConvGrad<S>,
    dec4_c2: ConvGrad<S>,
    gn4: GroupNormGrad<S>,
    out: ConvGrad<S>,
}

impl<S: Scalar> AeGrads<S> {
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.flat_mut().into_iter().zip(other.flat()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn flat(&self) -> Vec<&Vec<S>> {
        vec![
            &self.enc1_c1.w, &self.enc1_c1.b,
            &self.enc1_c2.w, &self.enc1_c2.b,
            &self.gn1.gamma, &self.gn1.beta,
            &self.enc2_c1.w, &self.enc2_c1.b,
            &self.enc2_c2.w, &self.enc2_c2.b,
            &self.gn2.gamma, &self.gn2.beta,
            &self.fc_in.w, &self.fc_in.b,
            &self.fc_out.w, &self.fc_out.b,
            &self.dec3_c1.w, &self.dec3_c1.b,
            &self.dec3_c2.w, &self.dec3_c2.b,
            &self.gn3.gamma, &self.gn3.beta,
            &self.dec4_c1.w, &self.dec4_c1.b,
            &self.dec4_c2.w, &self.dec4_c2.b,
            &self.gn4.gamma, &self.gn4.beta,
            &self.out.w, &self.out.b,
        ]
    }

    fn flat_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![
            &mut self.enc1_c1.w, &mut self.enc1_c1.b,
            &mut self.enc1_c2.w, &mut self.enc1_c2.b,
            &mut self.gn1.gamma, &mut self.gn1.beta,
            &mut self.enc2_c1.w, &mut self.enc2_c1.b,
            &mut self.enc2_c2.w, &mut self.enc2_c2.b,
            &mut self.gn2.gamma, &mut self.gn2.beta,
            &mut self.fc_in.w, &mut self.fc_in.b,
            &mut self.fc_out.w, &mut self.fc_out.b,
            &mut self.dec3_c1.w, &mut self.dec3_c1.b,
            &mut self.dec3_c2.w, &mut self.dec3_c2.b,
            &mut self.gn3.gamma, &mut self.gn3.beta,
            &mut self.dec4_c1.w, &mut self.dec4_c1.b,
            &mut self.dec4_c2.w, &mut self.dec4_c2.b,
            &mut self.gn4.gamma, &mut self.gn4.beta,
            &mut self.out.w, &mut self.out.b,
        ]
    }
}

impl<S: Scalar> Autoencoder<S> {
    /// Seed-deterministic construction.
    pub fn new(config: &AutoencoderConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let rng = &mut stream_rng(seed, "autoencoder-init");
        let c = config.channels;
        let f = config.filters;
        let pooled = config.pooled();
        Ok(Self {
            config: config.clone(),
            enc1_c1: Conv1d::same(rng, c, f, 7, 1),
            enc1_c2: Conv1d::same(rng, f, f, 7, 1),
            gn1: GroupNorm::new(f),
            enc2_c1: Conv1d::same(rng, f, f, 5, 1),
            enc2_c2: Conv1d::same(rng, f, f, 5, 1),
            gn2: GroupNorm::new(f),
            fc_in: Dense::new(rng, f * pooled, config.bottleneck),
            fc_out: Dense::new(rng, config.bottleneck, config.decoder_in * pooled),
            dec3_c1: Conv1d::same(rng, config.decoder_in, f, 3, 1),
            dec3_c2: Conv1d::same(rng, f, f, 3, 1),
            gn3: GroupNorm::new(f),
            dec4_c1: Conv1d::same(rng, f, f, 3, 1),
            dec4_c2: Conv1d::same(rng, f, f, 3, 1),
            gn4: GroupNorm::new(f),
            out: Conv1d::same(rng, f, c, 1, 1),
        })
    }

    pub fn check_input(&self, x: &Tensor<S>) -> Result<(), ModelError> {
        if x.ch() != self.config.channels || x.len() != self.config.window {
            return Err(ModelError::ShapeMismatch {
                ch: x.ch(),
                len: x.len(),
                want_ch: self.config.channels,
                want_len: self.config.window,
            });
        }
        Ok(())
    }

    /// Reconstruction without keeping intermediates (inference path).
    pub fn forward(&self, x: &Tensor<S>) -> Tensor<S> {
        let (y, _) = self.forward_trace(x);
        y
    }

    pub fn forward_trace(&self, x: &Tensor<S>) -> (Tensor<S>, AeTrace<S>) {
        debug_assert!(self.check_input(x).is_ok());
        let e1a = self.enc1_c1.forward(x);
        let e1a_act = mish_forward(&e1a);
        let e1b = self.enc1_c2.forward(&e1a_act);
        let e1b_act = mish_forward(&e1b);
        let pool1 = maxpool2_forward(&e1b_act);
        let gn1_out = self.gn1.forward(&pool1);
        let e2a = self.enc2_c1.forward(&gn1_out);
        let e2a_act = mish_forward(&e2a);
        let e2b = self.enc2_c2.forward(&e2a_act);
        let e2b_act = mish_forward(&e2b);
        let pool2 = maxpool2_forward(&e2b_act);
        let gn2_out = self.gn2.forward(&pool2);
        let code = self.fc_in.forward(&gn2_out);
        let expanded = self.fc_out.forward(&code);
        let z = expanded.reshaped(self.config.decoder_in, self.config.pooled());
        let up3 = upsample2_forward(&z);
        let d3a = self.dec3_c1.forward(&up3);
        let d3a_act = mish_forward(&d3a);
        let d3b = self.dec3_c2.forward(&d3a_act);
        let d3b_act = mish_forward(&d3b);
        let gn3_out = self.gn3.forward(&d3b_act);
        let up4 = upsample2_forward(&gn3_out);
        let d4a = self.dec4_c1.forward(&up4);
        let d4a_act = mish_forward(&d4a);
        let d4b = self.dec4_c2.forward(&d4a_act);
        let d4b_act = mish_forward(&d4b);
        let gn4_out = self.gn4.forward(&d4b_act);
        let y = self.out.forward(&gn4_out);
        let trace = AeTrace {
            x: x.clone(),
            e1a, e1a_act, e1b, e1b_act, pool1, gn1_out,
            e2a, e2a_act, e2b, e2b_act, pool2, gn2_out,
            code, up3,
            d3a, d3a_act, d3b, d3b_act, up4,
            d4a, d4a_act, d4b, d4b_act, gn4_out,
        };
        (y, trace)
    }

    /// Backpropagate the loss gradient w.r.t. the reconstruction, adding
    /// parameter gradients into `grads`.
    pub fn backward(&self, trace: &AeTrace<S>, gy: &Tensor<S>, grads: &mut AeGrads<S>) {
        let g = self.out.backward(&trace.gn4_out, gy, Some(&mut grads.out));
        let g = self.gn4.backward(&trace.d4b_act, &g, Some(&mut grads.gn4));
        let g = mish_backward(&trace.d4b, &g);
        let g = self.dec4_c2.backward(&trace.d4a_act, &g, Some(&mut grads.dec4_c2));
        let g = mish_backward(&trace.d4a, &g);
        let g = self.dec4_c1.backward(&trace.up4, &g, Some(&mut grads.dec4_c1));
        let g = upsample2_backward(&g);
        let g = self.gn3.backward(&trace.d3b_act, &g, Some(&mut grads.gn3));
        let g = mish_backward(&trace.d3b, &g);
        let g = self.dec3_c2.backward(&trace.d3a_act, &g, Some(&mut grads.dec3_c2));
        let g = mish_backward(&trace.d3a, &g);
        let g = self.dec3_c1.backward(&trace.up3, &g, Some(&mut grads.dec3_c1));
        let g = upsample2_backward(&g);
        let g = g.reshaped(self.config.decoder_in * self.config.pooled(), 1);
        let g = self.fc_out.backward(&trace.code, &g, Some(&mut grads.fc_out));
        let g = self.fc_in.backward(&trace.gn2_out, &g, Some(&mut grads.fc_in));
        let g = g.reshaped(self.config.filters, self.config.pooled());
        let g = self.gn2.backward(&trace.pool2, &g, Some(&mut grads.gn2));
        let g = maxpool2_backward(&trace.e2b_act, &g);
        let g = mish_backward(&trace.e2b, &g);
        let g = self.enc2_c2.backward(&trace.e2a_act, &g, Some(&mut grads.enc2_c2));
        let g = mish_backward(&trace.e2a, &g);
        let g = self.enc2_c1.backward(&trace.gn1_out, &g, Some(&mut grads.enc2_c1));
        let g = self.gn1.backward(&trace.pool1, &g, Some(&mut grads.gn1));
        let g = maxpool2_backward(&trace.e1b_act, &g);
        let g = mish_backward(&trace.e1b, &g);
        let g = self.enc1_c2.backward(&trace.e1a_act, &g, Some(&mut grads.enc1_c2));
        let g = mish_backward(&trace.e1a, &g);
        let _ = self.enc1_c1.backward(&trace.x, &g, Some(&mut grads.enc1_c1));
    }

    pub fn zero_grads(&self) -> AeGrads<S> {
        AeGrads {
            enc1_c1: self.enc1_c1.zero_grad(),
            enc1_c2: self.enc1_c2.zero_grad(),
            gn1: self.gn1.zero_grad(),
            enc2_c1: self.enc2_c1.zero_grad(),
            enc2_c2: self.enc2_c2.zero_grad(),
            gn2: self.gn2.zero_grad(),
            fc_in: self.fc_in.zero_grad(),
            fc_out: self.fc_out.zero_grad(),
            dec3_c1: self.dec3_c1.zero_grad(),
            dec3_c2: self.dec3_c2.zero_grad(),
            gn3: self.gn3.zero_grad(),
            dec4_c1: self.dec4_c1.zero_grad(),
            dec4_c2: self.dec4_c2.zero_grad(),
            gn4: self.gn4.zero_grad(),
            out: self.out.zero_grad(),
        }
    }

    /// Parameter tensors in a fixed order (shared with `AeGrads::flat`).
    pub fn params_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![
            &mut self.enc1_c1.w, &mut self.enc1_c1.b,
            &mut self.enc1_c2.w, &mut self.enc1_c2.b,
            &mut self.gn1.gamma, &mut self.gn1.beta,
            &mut self.enc2_c1.w, &mut self.enc2_c1.b,
            &mut self.enc2_c2.w, &mut self.enc2_c2.b,
            &mut self.gn2.gamma, &mut self.gn2.beta,
            &mut self.fc_in.w, &mut self.fc_in.b,
            &mut self.fc_out.w, &mut self.fc_out.b,
            &mut self.dec3_c1.w, &mut self.dec3_c1.b,
            &mut self.dec3_c2.w, &mut self.dec3_c2.b,
            &mut self.gn3.gamma, &mut self.gn3.beta,
            &mut self.dec4_c1.w, &mut self.dec4_c1.b,
            &mut self.dec4_c2.w, &mut self.dec4_c2.b,
            &mut self.gn4.gamma, &mut self.gn4.beta,
            &mut self.out.w, &mut self.out.b,
        ]
    }

    pub fn params(&self) -> Vec<&Vec<S>> {
        vec![
            &self.enc1_c1.w, &self.enc1_c1.b,
            &self.enc1_c2.w, &self.enc1_c2.b,
            &self.gn1.gamma, &self.gn1.beta,
            &self.enc2_c1.w, &self.enc2_c1.b,
            &self.enc2_c2.w, &self.enc2_c2.b,
            &self.gn2.gamma, &self.gn2.beta,
            &self.fc_in.w, &self.fc_in.b,
            &self.fc_out.w, &self.fc_out.b,
            &self.dec3_c1.w, &self.dec3_c1.b,
            &self.dec3_c2.w, &self.dec3_c2.b,
            &self.gn3.gamma, &self.gn3.beta,
            &self.dec4_c1.w, &self.dec4_c1.b,
            &self.dec4_c2.w, &self.dec4_c2.b,
            &self.gn4.gamma, &self.gn4.beta,
            &self.out.w, &self.out.b,
        ]
    }

    /// Names aligned with the `params` ordering (checkpoint schema).
    pub fn param_names(&self) -> Vec<String> {
        [
            "enc1.conv1", "enc1.conv2", "enc1.norm", "enc2.conv1", "enc2.conv2", "enc2.norm",
            "bottleneck.fc_in", "bottleneck.fc_out", "dec3.conv1", "dec3.conv2", "dec3.norm",
            "dec4.conv1", "dec4.conv2", "dec4.norm", "head",
        ]
        .iter()
        .flat_map(|base| {
            let (a, b) = if base.ends_with("norm") { ("gamma", "beta") } else { ("w", "b") };
            [format!("{base}.{a}"), format!("{base}.{b}")]
        })
        .collect()
    }

    /// Overwrite parameters from another instance with identical config.
    pub fn copy_params_from(&mut self, other: &Self) {
        assert_eq!(self.config, other.config);
        let src: Vec<Vec<S>> = other.params().into_iter().cloned().collect();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            *dst = s;
        }
    }
}
