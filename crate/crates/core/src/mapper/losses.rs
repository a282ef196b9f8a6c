//! Domain-mapping losses: GAN-QP adversarial objectives, cycle consistency,
//! and the physics-informed zero-state and rated-power losses.
//!
//! Masks are defined on raw values (a position is in the zero state iff the
//! raw measurement is exactly 0, in the rated state iff it equals the rated
//! capacity). Training happens in normalized space, so the masks compare
//! window entries against the normalized images of raw 0 and raw C_D —
//! computed with the same arithmetic as normalization, which makes the
//! comparison exact.

use thiserror::Error;

use crate::data::normalize::NormalizationStats;
use crate::data::types::{Channel, N_CHANNELS};
use crate::scalar::{sc, Scalar};
use crate::tensor::Tensor;

use super::tcn::TcnGenerator;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("degenerate GAN-QP pair: distance is zero")]
    ZeroDistance,
    #[error("batch size mismatch: {0} vs {1}")]
    BatchMismatch(usize, usize),
}

/// Anything that maps a window to a window (generators in production,
/// stubs in tests).
pub trait MapFn<S: Scalar> {
    fn map_window(&self, x: &Tensor<S>) -> Tensor<S>;
}

impl<S: Scalar> MapFn<S> for TcnGenerator<S> {
    fn map_window(&self, x: &Tensor<S>) -> Tensor<S> {
        self.forward(x)
    }
}

impl<S: Scalar, F: Fn(&Tensor<S>) -> Tensor<S>> MapFn<S> for F {
    fn map_window(&self, x: &Tensor<S>) -> Tensor<S> {
        self(x)
    }
}

// ---------------------------------------------------------------------------
// GAN-QP
// ---------------------------------------------------------------------------

/// Per-pair critic objective (to be maximized):
/// `(T_r - T_f) - (T_r - T_f)^2 / (2 lambda_qp d)`.
///
/// As a function of the score gap with fixed `d`, the maximum sits at
/// `gap = lambda_qp * d` with value `lambda_qp * d / 2`.
pub fn gan_qp_critic_objective<S: Scalar>(
    t_real: S,
    t_fake: S,
    distance: S,
    lambda_qp: S,
) -> Result<S, LossError> {
    if !(distance > S::zero()) {
        return Err(LossError::ZeroDistance);
    }
    let gap = t_real - t_fake;
    Ok(gap - gap * gap / (sc::<S>(2.0) * lambda_qp * distance))
}

/// Per-pair generator objective (to be minimized): `T_r - T_f`.
pub fn gan_qp_generator_objective<S: Scalar>(t_real: S, t_fake: S) -> S {
    t_real - t_fake
}

// ---------------------------------------------------------------------------
// State masks
// ---------------------------------------------------------------------------

/// Which domain a window belongs to (selects the rated capacity used for
/// mask computation and loss targets).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

/// Normalized loss targets shared by both generators: the image of raw 0
/// per channel and of each domain's rated power on the mean-power channel.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaskTargets {
    pub zero_norm: [f64; N_CHANNELS],
    pub rated_source_norm: f64,
    pub rated_target_norm: f64,
}

impl MaskTargets {
    pub fn new(norm: &NormalizationStats, rated_source_kw: f64, rated_target_kw: f64) -> Self {
        Self {
            zero_norm: norm.normalized_zero(),
            rated_source_norm: norm.normalized_rated(rated_source_kw),
            rated_target_norm: norm.normalized_rated(rated_target_kw),
        }
    }

    pub fn rated_norm(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Source => self.rated_source_norm,
            Domain::Target => self.rated_target_norm,
        }
    }

    /// Rated target for the *other* domain (what a mapped sample should hit).
    pub fn rated_norm_opposite(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Source => self.rated_target_norm,
            Domain::Target => self.rated_source_norm,
        }
    }
}

/// Positions of zero-state and rated-power entries in one window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateMask {
    /// (channel, timestep) pairs over the zero-state channels
    /// (rotor min/mean/max, power min/mean/max).
    pub zero: Vec<(usize, usize)>,
    /// Timesteps where the mean power equals the domain's rated capacity.
    pub rated: Vec<usize>,
}

impl StateMask {
    pub fn compute<S: Scalar>(window: &Tensor<S>, targets: &MaskTargets, domain: Domain) -> Self {
        let mut zero = Vec::new();
        for ch in Channel::ZERO_STATE {
            let c = ch.index();
            let z = S::from_f64_c(targets.zero_norm[c]);
            for (t, &v) in window.row(c).iter().enumerate() {
                if v == z {
                    zero.push((c, t));
                }
            }
        }
        let rated_v = S::from_f64_c(targets.rated_norm(domain));
        let pm = Channel::PowerMean.index();
        let rated = window
            .row(pm)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == rated_v)
            .map(|(t, _)| t)
            .collect();
        Self { zero, rated }
    }

    pub fn is_empty(&self) -> bool {
        self.zero.is_empty() && self.rated.is_empty()
    }
}

/// Masks for one (source batch, target batch) pair.
#[derive(Debug, Clone)]
pub struct BatchMasks {
    pub source: Vec<StateMask>,
    pub target: Vec<StateMask>,
}

impl BatchMasks {
    pub fn compute<S: Scalar>(
        source: &[Tensor<S>],
        target: &[Tensor<S>],
        targets: &MaskTargets,
    ) -> Self {
        Self {
            source: source
                .iter()
                .map(|w| StateMask::compute(w, targets, Domain::Source))
                .collect(),
            target: target
                .iter()
                .map(|w| StateMask::compute(w, targets, Domain::Target))
                .collect(),
        }
    }

    pub fn zero_counts(&self) -> (usize, usize) {
        (
            self.source.iter().map(|m| m.zero.len()).sum(),
            self.target.iter().map(|m| m.zero.len()).sum(),
        )
    }

    pub fn rated_counts(&self) -> (usize, usize) {
        (
            self.source.iter().map(|m| m.rated.len()).sum(),
            self.target.iter().map(|m| m.rated.len()).sum(),
        )
    }
}

// ---------------------------------------------------------------------------
// Content losses
// ---------------------------------------------------------------------------

fn batch_mae<S: Scalar>(a: &[Tensor<S>], b: &[Tensor<S>]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let sum: S = a
        .iter()
        .zip(b)
        .map(|(x, y)| crate::tensor::mae(x, y))
        .sum();
    sum / sc::<S>(a.len() as f64)
}

/// Cycle-consistency loss:
/// `lambda_cyc * (MAE(t, G_ST(G_TS(t))) + MAE(s, G_TS(G_ST(s))))`.
pub fn cycle_loss<S: Scalar>(
    s: &[Tensor<S>],
    t: &[Tensor<S>],
    g_st: &impl MapFn<S>,
    g_ts: &impl MapFn<S>,
    lambda_cyc: f64,
) -> S {
    let s_cycled: Vec<Tensor<S>> = s
        .iter()
        .map(|x| g_ts.map_window(&g_st.map_window(x)))
        .collect();
    let t_cycled: Vec<Tensor<S>> = t
        .iter()
        .map(|x| g_st.map_window(&g_ts.map_window(x)))
        .collect();
    sc::<S>(lambda_cyc) * (batch_mae(t, &t_cycled) + batch_mae(s, &s_cycled))
}

/// Mean absolute deviation of mapped windows from per-channel constants at
/// masked positions; the mean runs over every masked entry in the batch.
/// Returns zero when no position is masked.
fn masked_deviation<S: Scalar>(
    mapped: &[Tensor<S>],
    masks: &[StateMask],
    target_of_channel: impl Fn(usize) -> S,
) -> S {
    let mut acc = S::zero();
    let mut count = 0usize;
    for (w, m) in mapped.iter().zip(masks) {
        for &(c, t) in &m.zero {
            acc += (w.get(c, t) - target_of_channel(c)).abs();
            count += 1;
        }
    }
    if count == 0 {
        S::zero()
    } else {
        acc / sc::<S>(count as f64)
    }
}

/// Zero-state loss: masked positions of mapped windows are pinned to the
/// normalized zero value of the opposite domain (identical for both domains
/// under shared source normalization). Vacuous masks contribute zero.
pub fn zero_loss<S: Scalar>(
    s: &[Tensor<S>],
    t: &[Tensor<S>],
    masks: &BatchMasks,
    g_st: &impl MapFn<S>,
    g_ts: &impl MapFn<S>,
    targets: &MaskTargets,
    lambda_zero: f64,
) -> S {
    let mapped_s: Vec<Tensor<S>> = s.iter().map(|x| g_st.map_window(x)).collect();
    let mapped_t: Vec<Tensor<S>> = t.iter().map(|x| g_ts.map_window(x)).collect();
    let dev_s = masked_deviation(&mapped_s, &masks.source, |c| S::from_f64_c(targets.zero_norm[c]));
    let dev_t = masked_deviation(&mapped_t, &masks.target, |c| S::from_f64_c(targets.zero_norm[c]));
    sc::<S>(lambda_zero) * (dev_s + dev_t)
}

fn rated_deviation<S: Scalar>(mapped: &[Tensor<S>], masks: &[StateMask], target: S) -> S {
    let pm = Channel::PowerMean.index();
    let mut acc = S::zero();
    let mut count = 0usize;
    for (w, m) in mapped.iter().zip(masks) {
        for &t in &m.rated {
            acc += (w.get(pm, t) - target).abs();
            count += 1;
        }
    }
    if count == 0 {
        S::zero()
    } else {
        acc / sc::<S>(count as f64)
    }
}

/// Rated-power loss: mean-power positions at one domain's rated capacity
/// are pinned to the other domain's (normalized) rated capacity.
pub fn rated_loss<S: Scalar>(
    s: &[Tensor<S>],
    t: &[Tensor<S>],
    masks: &BatchMasks,
    g_st: &impl MapFn<S>,
    g_ts: &impl MapFn<S>,
    targets: &MaskTargets,
    lambda_rated: f64,
) -> S {
    let mapped_s: Vec<Tensor<S>> = s.iter().map(|x| g_st.map_window(x)).collect();
    let mapped_t: Vec<Tensor<S>> = t.iter().map(|x| g_ts.map_window(x)).collect();
    let dev_s = rated_deviation(&mapped_s, &masks.source, S::from_f64_c(targets.rated_target_norm));
    let dev_t = rated_deviation(&mapped_t, &masks.target, S::from_f64_c(targets.rated_source_norm));
    sc::<S>(lambda_rated) * (dev_s + dev_t)
}

/// Loss weights from the published hyperparameters. The critic distance is
/// the Euclidean norm of the flattened sample difference.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_zero: f64,
    pub lambda_rated: f64,
    pub lambda_qp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cyc: 30.0,
            lambda_zero: 0.5,
            lambda_rated: 0.1,
            lambda_qp: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_zero", self.lambda_zero),
            ("lambda_rated", self.lambda_rated),
            ("lambda_qp", self.lambda_qp),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}
