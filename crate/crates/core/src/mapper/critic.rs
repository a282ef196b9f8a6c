//! Convolutional critic: three strided conv blocks (Mish + group norm)
//! flattened into a single linear score.

use serde::{Deserialize, Serialize};

use crate::nn::{mish_backward, mish_forward, Conv1d, ConvGrad, Dense, DenseGrad, GroupNorm, GroupNormGrad};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub channels: usize,
    /// Window length; three stride-2 convolutions need a multiple of 8.
    pub window: usize,
    /// First two conv blocks use this filter count, the third doubles it.
    pub base_filters: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            channels: 11,
            window: 72,
            base_filters: 128,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.channels == 0 || self.base_filters == 0 {
            return Err("discriminator needs channels > 0 and filters > 0".into());
        }
        if self.window == 0 || !self.window.is_multiple_of(8) {
            return Err(format!(
                "discriminator window {} must be a positive multiple of 8",
                self.window
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator<S> {
    pub config: DiscriminatorConfig,
    conv1: Conv1d<S>,
    gn1: GroupNorm<S>,
    conv2: Conv1d<S>,
    gn2: GroupNorm<S>,
    conv3: Conv1d<S>,
    gn3: GroupNorm<S>,
    fc: Dense<S>,
}

pub struct DiscTrace<S> {
    x: Tensor<S>,
    c1: Tensor<S>,
    a1: Tensor<S>,
    n1: Tensor<S>,
    c2: Tensor<S>,
    a2: Tensor<S>,
    n2: Tensor<S>,
    c3: Tensor<S>,
    a3: Tensor<S>,
    n3: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct DiscGrads<S> {
    conv1: ConvGrad<S>,
    gn1: GroupNormGrad<S>,
    conv2: ConvGrad<S>,
    gn2: GroupNormGrad<S>,
    conv3: ConvGrad<S>,
    gn3: GroupNormGrad<S>,
    fc: DenseGrad<S>,
}

impl<S: Scalar> DiscGrads<S> {
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.flat_mut().into_iter().zip(other.flat()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn flat(&self) -> Vec<&Vec<S>> {
        vec![
            &self.conv1.w, &self.conv1.b, &self.gn1.gamma, &self.gn1.beta,
            &self.conv2.w, &self.conv2.b, &self.gn2.gamma, &self.gn2.beta,
            &self.conv3.w, &self.conv3.b, &self.gn3.gamma, &self.gn3.beta,
            &self.fc.w, &self.fc.b,
        ]
    }

    fn flat_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![
            &mut self.conv1.w, &mut self.conv1.b, &mut self.gn1.gamma, &mut self.gn1.beta,
            &mut self.conv2.w, &mut self.conv2.b, &mut self.gn2.gamma, &mut self.gn2.beta,
            &mut self.conv3.w, &mut self.conv3.b, &mut self.gn3.gamma, &mut self.gn3.beta,
            &mut self.fc.w, &mut self.fc.b,
        ]
    }
}

impl<S: Scalar> Discriminator<S> {
    pub fn new(config: &DiscriminatorConfig, seed: u64, stream: &str) -> Result<Self, String> {
        config.validate()?;
        let rng = &mut stream_rng(seed, stream);
        let f = config.base_filters;
        let fc_in = 2 * f * (config.window / 8);
        Ok(Self {
            config: config.clone(),
            conv1: Conv1d::new(rng, config.channels, f, 5, 2, 1, 2),
            gn1: GroupNorm::new(f),
            conv2: Conv1d::new(rng, f, f, 3, 2, 1, 1),
            gn2: GroupNorm::new(f),
            conv3: Conv1d::new(rng, f, 2 * f, 3, 2, 1, 1),
            gn3: GroupNorm::new(2 * f),
            fc: Dense::new(rng, fc_in, 1),
        })
    }

    /// Critic score for one window.
    pub fn forward(&self, x: &Tensor<S>) -> S {
        let (score, _) = self.forward_trace(x);
        score
    }

    pub fn forward_trace(&self, x: &Tensor<S>) -> (S, DiscTrace<S>) {
        let c1 = self.conv1.forward(x);
        let a1 = mish_forward(&c1);
        let n1 = self.gn1.forward(&a1);
        let c2 = self.conv2.forward(&n1);
        let a2 = mish_forward(&c2);
        let n2 = self.gn2.forward(&a2);
        let c3 = self.conv3.forward(&n2);
        let a3 = mish_forward(&c3);
        let n3 = self.gn3.forward(&a3);
        let flat = n3.reshaped(n3.numel(), 1);
        let score = self.fc.forward(&flat).get(0, 0);
        (
            score,
            DiscTrace {
                x: x.clone(),
                c1, a1, n1, c2, a2, n2, c3, a3, n3,
            },
        )
    }

    /// Backpropagate a scalar output gradient; parameter gradients land in
    /// `grads` (skip with `None` while updating generators) and the input
    /// gradient is returned.
    pub fn backward(&self, trace: &DiscTrace<S>, g_score: S, mut grads: Option<&mut DiscGrads<S>>) -> Tensor<S> {
        let flat = trace.n3.reshaped(trace.n3.numel(), 1);
        let gy = Tensor::from_vec(1, 1, vec![g_score]);
        let g = self.fc.backward(&flat, &gy, grads.as_deref_mut().map(|g| &mut g.fc));
        let g = g.reshaped(trace.n3.ch(), trace.n3.len());
        let g = self.gn3.backward(&trace.a3, &g, grads.as_deref_mut().map(|g| &mut g.gn3));
        let g = mish_backward(&trace.c3, &g);
        let g = self.conv3.backward(&trace.n2, &g, grads.as_deref_mut().map(|g| &mut g.conv3));
        let g = self.gn2.backward(&trace.a2, &g, grads.as_deref_mut().map(|g| &mut g.gn2));
        let g = mish_backward(&trace.c2, &g);
        let g = self.conv2.backward(&trace.n1, &g, grads.as_deref_mut().map(|g| &mut g.conv2));
        let g = self.gn1.backward(&trace.a1, &g, grads.as_deref_mut().map(|g| &mut g.gn1));
        let g = mish_backward(&trace.c1, &g);
        self.conv1.backward(&trace.x, &g, grads.map(|g| &mut g.conv1))
    }

    pub fn zero_grads(&self) -> DiscGrads<S> {
        DiscGrads {
            conv1: self.conv1.zero_grad(),
            gn1: self.gn1.zero_grad(),
            conv2: self.conv2.zero_grad(),
            gn2: self.gn2.zero_grad(),
            conv3: self.conv3.zero_grad(),
            gn3: self.gn3.zero_grad(),
            fc: self.fc.zero_grad(),
        }
    }

    pub fn params(&self) -> Vec<&Vec<S>> {
        vec![
            &self.conv1.w, &self.conv1.b, &self.gn1.gamma, &self.gn1.beta,
            &self.conv2.w, &self.conv2.b, &self.gn2.gamma, &self.gn2.beta,
            &self.conv3.w, &self.conv3.b, &self.gn3.gamma, &self.gn3.beta,
            &self.fc.w, &self.fc.b,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![
            &mut self.conv1.w, &mut self.conv1.b, &mut self.gn1.gamma, &mut self.gn1.beta,
            &mut self.conv2.w, &mut self.conv2.b, &mut self.gn2.gamma, &mut self.gn2.beta,
            &mut self.conv3.w, &mut self.conv3.b, &mut self.gn3.gamma, &mut self.gn3.beta,
            &mut self.fc.w, &mut self.fc.b,
        ]
    }

    pub fn param_names(&self) -> Vec<String> {
        [
            "conv1.w", "conv1.b", "norm1.gamma", "norm1.beta",
            "conv2.w", "conv2.b", "norm2.gamma", "norm2.beta",
            "conv3.w", "conv3.b", "norm3.gamma", "norm3.beta",
            "fc.w", "fc.b",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }
}
