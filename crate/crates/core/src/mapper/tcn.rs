//! Residual TCN generator: a stack of non-causal dilated residual blocks
//! followed by a linear kernel-1 head back to the SCADA channel count.
//! Each block runs two same-length dilated convolutions with Mish, adds a
//! skip path (1x1 convolution when the channel count changes), and applies
//! an optional single-group group norm after the residual sum.

use serde::{Deserialize, Serialize};

use crate::nn::{mish_backward, mish_forward, Conv1d, ConvGrad, GroupNorm, GroupNormGrad};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnBlockConfig {
    pub channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// SCADA channel count at input and output.
    pub channels: usize,
    pub blocks: Vec<TcnBlockConfig>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let block = |channels, dilation, norm| TcnBlockConfig {
            channels,
            kernel: 3,
            dilation,
            norm,
        };
        Self {
            channels: 11,
            blocks: vec![
                block(64, 1, false),
                block(64, 2, true),
                block(64, 4, true),
                block(64, 8, true),
                block(32, 16, true),
                block(16, 32, false),
            ],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.channels == 0 || self.blocks.is_empty() {
            return Err("generator needs channels > 0 and at least one block".into());
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.channels == 0 || b.kernel == 0 || b.dilation == 0 {
                return Err(format!("block {i} has a zero-sized field"));
            }
            if b.kernel % 2 == 0 {
                return Err(format!("block {i}: kernel must be odd for symmetric padding"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TcnBlock<S> {
    conv1: Conv1d<S>,
    conv2: Conv1d<S>,
    /// 1x1 projection on the skip path when in/out channels differ.
    skip: Option<Conv1d<S>>,
    norm: Option<GroupNorm<S>>,
}

pub struct TcnBlockTrace<S> {
    x: Tensor<S>,
    c1: Tensor<S>,
    a1: Tensor<S>,
    c2: Tensor<S>,
    sum: Tensor<S>,
    out: Tensor<S>,
}

#[derive(Debug, Clone)]
pub struct TcnBlockGrad<S> {
    conv1: ConvGrad<S>,
    conv2: ConvGrad<S>,
    skip: Option<ConvGrad<S>>,
    norm: Option<GroupNormGrad<S>>,
}

impl<S: Scalar> TcnBlock<S> {
    fn new(rng: &mut rand_chacha::ChaCha12Rng, in_ch: usize, cfg: &TcnBlockConfig) -> Self {
        Self {
            conv1: Conv1d::same(rng, in_ch, cfg.channels, cfg.kernel, cfg.dilation),
            conv2: Conv1d::same(rng, cfg.channels, cfg.channels, cfg.kernel, cfg.dilation),
            skip: (in_ch != cfg.channels).then(|| Conv1d::same(rng, in_ch, cfg.channels, 1, 1)),
            norm: cfg.norm.then(|| GroupNorm::new(cfg.channels)),
        }
    }

    fn forward_trace(&self, x: &Tensor<S>) -> TcnBlockTrace<S> {
        let c1 = self.conv1.forward(x);
        let a1 = mish_forward(&c1);
        let c2 = self.conv2.forward(&a1);
        let a2 = mish_forward(&c2);
        let mut sum = match &self.skip {
            Some(skip) => skip.forward(x),
            None => x.clone(),
        };
        sum.add_assign(&a2);
        let out = match &self.norm {
            Some(n) => n.forward(&sum),
            None => sum.clone(),
        };
        TcnBlockTrace {
            x: x.clone(),
            c1,
            a1,
            c2,
            sum,
            out,
        }
    }

    fn backward(&self, trace: &TcnBlockTrace<S>, gy: &Tensor<S>, grads: &mut TcnBlockGrad<S>) -> Tensor<S> {
        let g_sum = match (&self.norm, grads.norm.as_mut()) {
            (Some(n), g) => n.backward(&trace.sum, gy, g),
            (None, _) => gy.clone(),
        };
        // skip path
        let mut gx = match (&self.skip, grads.skip.as_mut()) {
            (Some(skip), g) => skip.backward(&trace.x, &g_sum, g),
            (None, _) => g_sum.clone(),
        };
        // main path
        let g_c2 = mish_backward(&trace.c2, &g_sum);
        let g_a1 = self.conv2.backward(&trace.a1, &g_c2, Some(&mut grads.conv2));
        let g_c1 = mish_backward(&trace.c1, &g_a1);
        let g_main = self.conv1.backward(&trace.x, &g_c1, Some(&mut grads.conv1));
        gx.add_assign(&g_main);
        gx
    }

    fn zero_grad(&self) -> TcnBlockGrad<S> {
        TcnBlockGrad {
            conv1: self.conv1.zero_grad(),
            conv2: self.conv2.zero_grad(),
            skip: self.skip.as_ref().map(|s| s.zero_grad()),
            norm: self.norm.as_ref().map(|n| n.zero_grad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnGenerator<S> {
    pub config: GeneratorConfig,
    blocks: Vec<TcnBlock<S>>,
    head: Conv1d<S>,
}

pub struct GenTrace<S> {
    blocks: Vec<TcnBlockTrace<S>>,
}

#[derive(Debug, Clone)]
pub struct GenGrads<S> {
    blocks: Vec<TcnBlockGrad<S>>,
    head: ConvGrad<S>,
}

impl<S: Scalar> GenGrads<S> {
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.flat_mut().into_iter().zip(other.flat()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn flat(&self) -> Vec<&Vec<S>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(&b.conv1.w);
            out.push(&b.conv1.b);
            out.push(&b.conv2.w);
            out.push(&b.conv2.b);
            if let Some(s) = &b.skip {
                out.push(&s.w);
                out.push(&s.b);
            }
            if let Some(n) = &b.norm {
                out.push(&n.gamma);
                out.push(&n.beta);
            }
        }
        out.push(&self.head.w);
        out.push(&self.head.b);
        out
    }

    fn flat_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv1.w);
            out.push(&mut b.conv1.b);
            out.push(&mut b.conv2.w);
            out.push(&mut b.conv2.b);
            if let Some(s) = &mut b.skip {
                out.push(&mut s.w);
                out.push(&mut s.b);
            }
            if let Some(n) = &mut b.norm {
                out.push(&mut n.gamma);
                out.push(&mut n.beta);
            }
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }
}

impl<S: Scalar> TcnGenerator<S> {
    pub fn new(config: &GeneratorConfig, seed: u64, stream: &str) -> Result<Self, String> {
        config.validate()?;
        let rng = &mut stream_rng(seed, stream);
        let mut blocks = Vec::with_capacity(config.blocks.len());
        let mut in_ch = config.channels;
        for cfg in &config.blocks {
            blocks.push(TcnBlock::new(rng, in_ch, cfg));
            in_ch = cfg.channels;
        }
        let head = Conv1d::same(rng, in_ch, config.channels, 1, 1);
        Ok(Self {
            config: config.clone(),
            blocks,
            head,
        })
    }

    pub fn forward(&self, x: &Tensor<S>) -> Tensor<S> {
        let mut cur = x.clone();
        for b in &self.blocks {
            let c1 = b.conv1.forward(&cur);
            let a1 = mish_forward(&c1);
            let c2 = b.conv2.forward(&a1);
            let a2 = mish_forward(&c2);
            let mut sum = match &b.skip {
                Some(skip) => skip.forward(&cur),
                None => cur,
            };
            sum.add_assign(&a2);
            cur = match &b.norm {
                Some(n) => n.forward(&sum),
                None => sum,
            };
        }
        self.head.forward(&cur)
    }

    pub fn forward_trace(&self, x: &Tensor<S>) -> (Tensor<S>, GenTrace<S>) {
        let mut traces = Vec::with_capacity(self.blocks.len());
        let mut cur = x.clone();
        for b in &self.blocks {
            let t = b.forward_trace(&cur);
            cur = t.out.clone();
            traces.push(t);
        }
        let y = self.head.forward(&cur);
        (y, GenTrace { blocks: traces })
    }

    pub fn backward(&self, trace: &GenTrace<S>, gy: &Tensor<S>, grads: &mut GenGrads<S>) -> Tensor<S> {
        let last = trace.blocks.last().expect("nonempty generator");
        let mut g = self.head.backward(&last.out, gy, Some(&mut grads.head));
        for (b, (t, bg)) in self
            .blocks
            .iter()
            .zip(trace.blocks.iter().zip(grads.blocks.iter_mut()))
            .rev()
        {
            g = b.backward(t, &g, bg);
        }
        g
    }

    pub fn zero_grads(&self) -> GenGrads<S> {
        GenGrads {
            blocks: self.blocks.iter().map(|b| b.zero_grad()).collect(),
            head: self.head.zero_grad(),
        }
    }

    pub fn params(&self) -> Vec<&Vec<S>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(&b.conv1.w);
            out.push(&b.conv1.b);
            out.push(&b.conv2.w);
            out.push(&b.conv2.b);
            if let Some(s) = &b.skip {
                out.push(&s.w);
                out.push(&s.b);
            }
            if let Some(n) = &b.norm {
                out.push(&n.gamma);
                out.push(&n.beta);
            }
        }
        out.push(&self.head.w);
        out.push(&self.head.b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv1.w);
            out.push(&mut b.conv1.b);
            out.push(&mut b.conv2.w);
            out.push(&mut b.conv2.b);
            if let Some(s) = &mut b.skip {
                out.push(&mut s.w);
                out.push(&mut s.b);
            }
            if let Some(n) = &mut b.norm {
                out.push(&mut n.gamma);
                out.push(&mut n.beta);
            }
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push(format!("block{i}.conv1.w"));
            out.push(format!("block{i}.conv1.b"));
            out.push(format!("block{i}.conv2.w"));
            out.push(format!("block{i}.conv2.b"));
            if b.skip.is_some() {
                out.push(format!("block{i}.skip.w"));
                out.push(format!("block{i}.skip.b"));
            }
            if b.norm.is_some() {
                out.push(format!("block{i}.norm.gamma"));
                out.push(format!("block{i}.norm.beta"));
            }
        }
        out.push("head.w".into());
        out.push("head.b".into());
        out
    }
}
