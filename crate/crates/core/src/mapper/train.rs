//! Domain-mapping training loop.
//!
//! Per iteration: a generator step (adversarial GAN-QP generator objectives
//! for both directions, cycle loss, zero-state loss, rated-power loss, plus
//! the cycle term on anomaly-augmented batches), a critic step on freshly
//! sampled batches with the GAN-QP critic objective per domain, and an EMA
//! update. Early stopping tracks the source-NBM reconstruction error of
//! EMA-mapped target validation windows; training stops after a fixed
//! number of iterations without improvement and returns the pair snapshot
//! whose EMA generators scored best.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::types::Channel;
use crate::data::window::WindowSample;
use crate::nbm::{score_batch, NbmModel};
use crate::nn::Adam;
use crate::rng::stream_rng;
use crate::scalar::{sc, Scalar};
use crate::tensor::{euclidean, mae, Tensor};

use super::augment::augment_tensors;
use super::losses::BatchMasks;
use super::pair::MapperPair;
use super::tcn::GenGrads;

/// Pairs closer than this are skipped in the critic objective (degenerate
/// distance denominator).
const MIN_PAIR_DISTANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MapperError {
    #[error("empty {0} dataset")]
    EmptyDataset(&'static str),
    #[error("non-finite {component} at iteration {iter}: training diverged")]
    NonFinite { iter: usize, component: &'static str },
    #[error("window shape ({ch}, {len}) incompatible with mapper config")]
    BadShape { ch: usize, len: usize },
}

/// Published regime: batches of 128 with Adam(0.5, 0.999) at 2e-4 for
/// generators and critics, EMA decay 0.999, early stop after 1000
/// iterations without improvement.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapperTrainRegime {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub ema_decay: f64,
    /// Stop after this many iterations without early-stop improvement.
    pub patience_iters: usize,
    pub max_iters: usize,
    /// Evaluate the early-stop score every N iterations.
    pub eval_every: usize,
    /// Minimum absolute improvement that counts.
    pub improve_tol: f64,
    pub seed: u64,
    pub grad_chunks: usize,
}

impl Default for MapperTrainRegime {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            ema_decay: 0.999,
            patience_iters: 1000,
            max_iters: 5000,
            eval_every: 1,
            improve_tol: 1e-6,
            seed: 0,
            grad_chunks: 4,
        }
    }
}

/// Per-iteration metrics, also written to the training log CSV.
#[derive(Debug, Clone, Copy)]
pub struct IterMetrics {
    pub iter: usize,
    pub gan_st: f64,
    pub gan_ts: f64,
    pub cycle: f64,
    pub zero: f64,
    pub rated: f64,
    pub cycle_aug: f64,
    pub gen_total: f64,
    pub disc_s: f64,
    pub disc_t: f64,
    pub early_stop: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MapperTrainLog {
    pub rows: Vec<IterMetrics>,
}

impl MapperTrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iteration,gan_st,gan_ts,cycle,zero,rated,cycle_aug,gen_total,disc_s,disc_t,early_stop,improved\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.iter,
                r.gan_st,
                r.gan_ts,
                r.cycle,
                r.zero,
                r.rated,
                r.cycle_aug,
                r.gen_total,
                r.disc_s,
                r.disc_t,
                r.early_stop,
                if r.improved { 1 } else { 0 }
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv())
    }
}

#[inline]
fn sign<S: Scalar>(v: S) -> S {
    if v > S::zero() {
        S::one()
    } else if v < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

/// Loss components of one generator step (unweighted means; the weighted
/// total follows the published assembly).
#[derive(Debug, Clone, Copy)]
pub struct GenLossValues {
    pub gan_st: f64,
    pub gan_ts: f64,
    pub cycle: f64,
    pub zero: f64,
    pub rated: f64,
    pub cycle_aug: f64,
    pub total: f64,
}

/// Generator gradients of the full training objective for one batch pair.
pub struct GenBackward<S: Scalar> {
    pub grads_st: GenGrads<S>,
    pub grads_ts: GenGrads<S>,
    pub values: GenLossValues,
}

struct GenPartial<S: Scalar> {
    grads_st: GenGrads<S>,
    grads_ts: GenGrads<S>,
    gan_st: f64,
    gan_ts: f64,
    cyc_s: f64,
    cyc_t: f64,
    zero_dev_s: f64,
    zero_dev_t: f64,
    rated_dev_s: f64,
    rated_dev_t: f64,
}

/// Gradients and loss values of the generator objective (Algorithm lines
/// 3-9) without applying an update. The corrupted batches contribute only
/// the cycle term.
pub fn generator_gradients<S: Scalar>(
    pair: &MapperPair<S>,
    batch_s: &[&Tensor<S>],
    batch_t: &[&Tensor<S>],
    aug_s: &[Tensor<S>],
    aug_t: &[Tensor<S>],
    chunks: usize,
) -> GenBackward<S> {
    let m = batch_s.len();
    debug_assert_eq!(m, batch_t.len());
    let numel = (batch_s[0].ch() * batch_s[0].len()) as f64;
    let weights = pair.weights;
    let targets = pair.targets.clone();
    let pm = Channel::PowerMean.index();

    let masks = BatchMasks::compute_refs(batch_s, batch_t, &targets);
    let (z_count_s, z_count_t) = masks.zero_counts();
    let (r_count_s, r_count_t) = masks.rated_counts();

    let inv_m = 1.0 / m as f64;
    let chunk_size = m.div_ceil(chunks.max(1));

    let idx: Vec<usize> = (0..m).collect();
    let partials: Vec<GenPartial<S>> = idx
        .par_chunks(chunk_size)
        .map(|chunk| {
            let mut p = GenPartial {
                grads_st: pair.g_st.zero_grads(),
                grads_ts: pair.g_ts.zero_grads(),
                gan_st: 0.0,
                gan_ts: 0.0,
                cyc_s: 0.0,
                cyc_t: 0.0,
                zero_dev_s: 0.0,
                zero_dev_t: 0.0,
                rated_dev_s: 0.0,
                rated_dev_t: 0.0,
            };
            for &i in chunk {
                // --- source -> target direction ---
                let s_i = batch_s[i];
                let (st, tr_a) = pair.g_st.forward_trace(s_i);
                let (sts, tr_b) = pair.g_ts.forward_trace(&st);
                let (t_fake, tr_e) = pair.disc_t.forward_trace(&st);
                let t_real = pair.disc_t.forward(batch_t[i]);
                p.gan_st += (t_real - t_fake).to_f64_c() * inv_m;

                // adversarial gradient: d/d(st) of -mean(Disc_T(st))
                let mut g_st_in = pair.disc_t.backward(&tr_e, sc::<S>(-inv_m), None);
                // cycle gradient through G_TS
                let mut gy_sts = Tensor::zeros(sts.ch(), sts.len());
                let cscale = sc::<S>(weights.lambda_cyc / (m as f64 * numel));
                for (g, (a, b)) in gy_sts
                    .data_mut()
                    .iter_mut()
                    .zip(sts.data().iter().zip(s_i.data()))
                {
                    *g = cscale * sign(*a - *b);
                }
                p.cyc_s += mae(s_i, &sts).to_f64_c() * inv_m;
                let g_from_cycle = pair.g_ts.backward(&tr_b, &gy_sts, &mut p.grads_ts);
                g_st_in.add_assign(&g_from_cycle);
                // zero-state pinning on the mapped sample
                if z_count_s > 0 {
                    let zscale = sc::<S>(weights.lambda_zero / z_count_s as f64);
                    for &(c, t) in &masks.source[i].zero {
                        let target = S::from_f64_c(targets.zero_norm[c]);
                        let d = st.get(c, t) - target;
                        p.zero_dev_s += d.abs().to_f64_c() / z_count_s as f64;
                        let cur = g_st_in.get(c, t);
                        g_st_in.set(c, t, cur + zscale * sign(d));
                    }
                }
                // rated-power pinning to the target capacity
                if r_count_s > 0 {
                    let rscale = sc::<S>(weights.lambda_rated / r_count_s as f64);
                    let target = S::from_f64_c(targets.rated_target_norm);
                    for &t in &masks.source[i].rated {
                        let d = st.get(pm, t) - target;
                        p.rated_dev_s += d.abs().to_f64_c() / r_count_s as f64;
                        let cur = g_st_in.get(pm, t);
                        g_st_in.set(pm, t, cur + rscale * sign(d));
                    }
                }
                pair.g_st.backward(&tr_a, &g_st_in, &mut p.grads_st);

                // --- target -> source direction ---
                let t_i = batch_t[i];
                let (ts, tr_c) = pair.g_ts.forward_trace(t_i);
                let (tst, tr_d) = pair.g_st.forward_trace(&ts);
                let (s_fake, tr_f) = pair.disc_s.forward_trace(&ts);
                let s_real = pair.disc_s.forward(s_i);
                p.gan_ts += (s_real - s_fake).to_f64_c() * inv_m;

                let mut g_ts_in = pair.disc_s.backward(&tr_f, sc::<S>(-inv_m), None);
                let mut gy_tst = Tensor::zeros(tst.ch(), tst.len());
                for (g, (a, b)) in gy_tst
                    .data_mut()
                    .iter_mut()
                    .zip(tst.data().iter().zip(t_i.data()))
                {
                    *g = cscale * sign(*a - *b);
                }
                p.cyc_t += mae(t_i, &tst).to_f64_c() * inv_m;
                let g_from_cycle = pair.g_st.backward(&tr_d, &gy_tst, &mut p.grads_st);
                g_ts_in.add_assign(&g_from_cycle);
                if z_count_t > 0 {
                    let zscale = sc::<S>(weights.lambda_zero / z_count_t as f64);
                    for &(c, t) in &masks.target[i].zero {
                        let target = S::from_f64_c(targets.zero_norm[c]);
                        let d = ts.get(c, t) - target;
                        p.zero_dev_t += d.abs().to_f64_c() / z_count_t as f64;
                        let cur = g_ts_in.get(c, t);
                        g_ts_in.set(c, t, cur + zscale * sign(d));
                    }
                }
                if r_count_t > 0 {
                    let rscale = sc::<S>(weights.lambda_rated / r_count_t as f64);
                    let target = S::from_f64_c(targets.rated_source_norm);
                    for &t in &masks.target[i].rated {
                        let d = ts.get(pm, t) - target;
                        p.rated_dev_t += d.abs().to_f64_c() / r_count_t as f64;
                        let cur = g_ts_in.get(pm, t);
                        g_ts_in.set(pm, t, cur + rscale * sign(d));
                    }
                }
                pair.g_ts.backward(&tr_c, &g_ts_in, &mut p.grads_ts);
            }
            p
        })
        .collect();

    let mut it = partials.into_iter();
    let mut acc = it.next().expect("nonempty batch");
    for p in it {
        acc.grads_st.add_assign(&p.grads_st);
        acc.grads_ts.add_assign(&p.grads_ts);
        acc.gan_st += p.gan_st;
        acc.gan_ts += p.gan_ts;
        acc.cyc_s += p.cyc_s;
        acc.cyc_t += p.cyc_t;
        acc.zero_dev_s += p.zero_dev_s;
        acc.zero_dev_t += p.zero_dev_t;
        acc.rated_dev_s += p.rated_dev_s;
        acc.rated_dev_t += p.rated_dev_t;
    }

    // --- corrupted batches: cycle term only ---
    let aug_m = aug_s.len();
    let cyc_aug = {
        let cscale_s = sc::<S>(weights.lambda_cyc / (aug_m as f64 * numel));
        let chunk_size = aug_m.div_ceil(chunks.max(1));
        let idx: Vec<usize> = (0..aug_m).collect();
        let partials: Vec<(GenGrads<S>, GenGrads<S>, f64)> = idx
            .par_chunks(chunk_size)
            .map(|chunk| {
                let mut g_st = pair.g_st.zero_grads();
                let mut g_ts = pair.g_ts.zero_grads();
                let mut cyc = 0.0;
                for &j in chunk {
                    // source-side corrupted cycle
                    let x = &aug_s[j];
                    let (m1, tr1) = pair.g_st.forward_trace(x);
                    let (cycled, tr2) = pair.g_ts.forward_trace(&m1);
                    cyc += mae(x, &cycled).to_f64_c() / aug_m as f64;
                    let mut gy = Tensor::zeros(x.ch(), x.len());
                    for (g, (a, b)) in gy.data_mut().iter_mut().zip(cycled.data().iter().zip(x.data())) {
                        *g = cscale_s * sign(*a - *b);
                    }
                    let g_mid = pair.g_ts.backward(&tr2, &gy, &mut g_ts);
                    pair.g_st.backward(&tr1, &g_mid, &mut g_st);

                    // target-side corrupted cycle
                    let x = &aug_t[j];
                    let (m1, tr1) = pair.g_ts.forward_trace(x);
                    let (cycled, tr2) = pair.g_st.forward_trace(&m1);
                    cyc += mae(x, &cycled).to_f64_c() / aug_m as f64;
                    let mut gy = Tensor::zeros(x.ch(), x.len());
                    for (g, (a, b)) in gy.data_mut().iter_mut().zip(cycled.data().iter().zip(x.data())) {
                        *g = cscale_s * sign(*a - *b);
                    }
                    let g_mid = pair.g_st.backward(&tr2, &gy, &mut g_st);
                    pair.g_ts.backward(&tr1, &g_mid, &mut g_ts);
                }
                (g_st, g_ts, cyc)
            })
            .collect();
        let mut cyc_total = 0.0;
        for (g_st, g_ts, cyc) in partials {
            acc.grads_st.add_assign(&g_st);
            acc.grads_ts.add_assign(&g_ts);
            cyc_total += cyc;
        }
        cyc_total
    };

    let cycle = acc.cyc_s + acc.cyc_t;
    let zero = acc.zero_dev_s + acc.zero_dev_t;
    let rated = acc.rated_dev_s + acc.rated_dev_t;
    let total = acc.gan_st
        + acc.gan_ts
        + weights.lambda_cyc * cycle
        + weights.lambda_zero * zero
        + weights.lambda_rated * rated
        + weights.lambda_cyc * cyc_aug;
    GenBackward {
        grads_st: acc.grads_st,
        grads_ts: acc.grads_ts,
        values: GenLossValues {
            gan_st: acc.gan_st,
            gan_ts: acc.gan_ts,
            cycle,
            zero,
            rated,
            cycle_aug: cyc_aug,
            total,
        },
    }
}

/// Generator update on one pair of batches (Algorithm lines 3-10).
fn generator_step<S: Scalar>(
    pair: &mut MapperPair<S>,
    batch_s: &[&Tensor<S>],
    batch_t: &[&Tensor<S>],
    aug_s: &[Tensor<S>],
    aug_t: &[Tensor<S>],
    opt: &mut Adam<S>,
    chunks: usize,
) -> GenLossValues {
    let back = generator_gradients(pair, batch_s, batch_t, aug_s, aug_t, chunks);
    // single optimizer over both generators (fixed layout: g_st then g_ts)
    let grads: Vec<&Vec<S>> = back
        .grads_st
        .flat()
        .into_iter()
        .chain(back.grads_ts.flat())
        .collect();
    let params: Vec<&mut Vec<S>> = {
        let (g_st, g_ts) = (&mut pair.g_st, &mut pair.g_ts);
        g_st.params_mut().into_iter().chain(g_ts.params_mut()).collect()
    };
    opt.step(params, &grads);
    back.values
}

/// Critic update on fresh batches (Algorithm lines 11-16); pairs real and
/// fake samples by batch index; degenerate pairs are skipped.
fn critic_step<S: Scalar>(
    pair: &mut MapperPair<S>,
    batch_s: &[&Tensor<S>],
    batch_t: &[&Tensor<S>],
    opt: &mut Adam<S>,
    chunks: usize,
) -> (f64, f64) {
    let m = batch_s.len();
    let chunk_size = m.div_ceil(chunks.max(1));
    let lambda_qp = pair.weights.lambda_qp;

    // fakes, forward only (generators frozen during the critic step)
    let idx: Vec<usize> = (0..m).collect();
    let fakes: Vec<(Tensor<S>, Tensor<S>)> = idx
        .par_chunks(chunk_size)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|&i| (pair.g_st.forward(batch_s[i]), pair.g_ts.forward(batch_t[i])))
                .collect::<Vec<_>>()
        })
        .collect();

    // valid-pair counts fix the loss denominators before the parallel pass
    let dist_t: Vec<f64> = (0..m)
        .map(|i| euclidean(batch_t[i], &fakes[i].0).to_f64_c())
        .collect();
    let dist_s: Vec<f64> = (0..m)
        .map(|i| euclidean(batch_s[i], &fakes[i].1).to_f64_c())
        .collect();
    let m_valid_t = dist_t.iter().filter(|d| **d >= MIN_PAIR_DISTANCE).count().max(1);
    let m_valid_s = dist_s.iter().filter(|d| **d >= MIN_PAIR_DISTANCE).count().max(1);

    type CriticPartial<S> = (
        super::critic::DiscGrads<S>,
        super::critic::DiscGrads<S>,
        f64,
        f64,
    );
    let partials: Vec<CriticPartial<S>> = idx
        .par_chunks(chunk_size)
        .map(|chunk| {
            let mut g_s = pair.disc_s.zero_grads();
            let mut g_t = pair.disc_t.zero_grads();
            let mut loss_s = 0.0;
            let mut loss_t = 0.0;
            for &i in chunk {
                // target-domain critic: real t_i vs fake G_ST(s_i)
                if dist_t[i] >= MIN_PAIR_DISTANCE {
                    let (t_r, tr_r) = pair.disc_t.forward_trace(batch_t[i]);
                    let (t_f, tr_f) = pair.disc_t.forward_trace(&fakes[i].0);
                    let delta = (t_r - t_f).to_f64_c();
                    let denom = 2.0 * lambda_qp * dist_t[i];
                    let obj = delta - delta * delta / denom;
                    loss_t += -obj / m_valid_t as f64;
                    let dl_ddelta = -(1.0 - delta / (lambda_qp * dist_t[i])) / m_valid_t as f64;
                    pair.disc_t.backward(&tr_r, sc::<S>(dl_ddelta), Some(&mut g_t));
                    pair.disc_t.backward(&tr_f, sc::<S>(-dl_ddelta), Some(&mut g_t));
                }
                // source-domain critic: real s_i vs fake G_TS(t_i)
                if dist_s[i] >= MIN_PAIR_DISTANCE {
                    let (s_r, tr_r) = pair.disc_s.forward_trace(batch_s[i]);
                    let (s_f, tr_f) = pair.disc_s.forward_trace(&fakes[i].1);
                    let delta = (s_r - s_f).to_f64_c();
                    let denom = 2.0 * lambda_qp * dist_s[i];
                    let obj = delta - delta * delta / denom;
                    loss_s += -obj / m_valid_s as f64;
                    let dl_ddelta = -(1.0 - delta / (lambda_qp * dist_s[i])) / m_valid_s as f64;
                    pair.disc_s.backward(&tr_r, sc::<S>(dl_ddelta), Some(&mut g_s));
                    pair.disc_s.backward(&tr_f, sc::<S>(-dl_ddelta), Some(&mut g_s));
                }
            }
            (g_s, g_t, loss_s, loss_t)
        })
        .collect();

    let mut it = partials.into_iter();
    let (mut gs, mut gt, mut ls, mut lt) = it.next().expect("nonempty batch");
    for (g_s, g_t, l_s, l_t) in it {
        gs.add_assign(&g_s);
        gt.add_assign(&g_t);
        ls += l_s;
        lt += l_t;
    }
    let grads: Vec<&Vec<S>> = gs.flat().into_iter().chain(gt.flat()).collect();
    let params: Vec<&mut Vec<S>> = {
        let (ds, dt) = (&mut pair.disc_s, &mut pair.disc_t);
        ds.params_mut().into_iter().chain(dt.params_mut()).collect()
    };
    opt.step(params, &grads);
    (ls, lt)
}

/// Early-stopping score: mean source-NBM reconstruction error of the EMA
/// target-to-source mapping over the target validation windows. Lower is
/// better. Used only for stopping, never for model selection across
/// hyperparameters (it carries no content-preservation signal).
pub fn early_stop_score<S: Scalar>(
    pair: &MapperPair<S>,
    target_val: &[WindowSample<S>],
    source_nbm: &NbmModel<S>,
) -> Result<f64, MapperError> {
    if target_val.is_empty() {
        return Err(MapperError::EmptyDataset("target validation"));
    }
    let mapped = pair.map_to_source(target_val);
    let refs: Vec<&Tensor<S>> = mapped.iter().map(|w| &w.values).collect();
    let scores = score_batch(&source_nbm.net, &refs, 4);
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Full training per the published algorithm. Returns the pair snapshot at
/// the best early-stop score together with the per-iteration metrics log.
pub fn train_mapper<S: Scalar>(
    mut pair: MapperPair<S>,
    source_train: &[WindowSample<S>],
    target_train: &[WindowSample<S>],
    target_val: &[WindowSample<S>],
    source_nbm: &NbmModel<S>,
    regime: &MapperTrainRegime,
) -> Result<(MapperPair<S>, MapperTrainLog), MapperError> {
    if source_train.is_empty() {
        return Err(MapperError::EmptyDataset("source training"));
    }
    if target_train.is_empty() {
        return Err(MapperError::EmptyDataset("target training"));
    }
    if target_val.is_empty() {
        return Err(MapperError::EmptyDataset("target validation"));
    }
    for w in source_train.iter().chain(target_train).chain(target_val) {
        if w.values.ch() != pair.config.generator.channels {
            return Err(MapperError::BadShape {
                ch: w.values.ch(),
                len: w.values.len(),
            });
        }
    }

    let src: Vec<&Tensor<S>> = source_train.iter().map(|w| &w.values).collect();
    let tgt: Vec<&Tensor<S>> = target_train.iter().map(|w| &w.values).collect();
    let mut batch_rng = stream_rng(regime.seed, "mapper-batches");
    let mut aug_rng = stream_rng(regime.seed, "mapper-augment");
    let mut opt_gen = Adam::new(regime.learning_rate, regime.beta1, regime.beta2);
    let mut opt_disc = Adam::new(regime.learning_rate, regime.beta1, regime.beta2);

    let mut log = MapperTrainLog::default();
    let mut best = pair.clone();
    let mut best_score = f64::INFINITY;
    let mut best_iter = 0usize;
    let m = regime.batch_size.max(1);

    let draw = |rng: &mut rand_chacha::ChaCha12Rng, pool: &[&Tensor<S>]| -> Vec<usize> {
        (0..m).map(|_| rng.gen_range(0..pool.len())).collect()
    };

    for iter in 1..=regime.max_iters {
        // generator step
        let is_idx = draw(&mut batch_rng, &src);
        let it_idx = draw(&mut batch_rng, &tgt);
        let batch_s: Vec<&Tensor<S>> = is_idx.iter().map(|&i| src[i]).collect();
        let batch_t: Vec<&Tensor<S>> = it_idx.iter().map(|&i| tgt[i]).collect();
        let aug_s = augment_tensors(&batch_s, &pair.targets.zero_norm, &mut aug_rng);
        let aug_t = augment_tensors(&batch_t, &pair.targets.zero_norm, &mut aug_rng);
        let gen = generator_step(
            &mut pair,
            &batch_s,
            &batch_t,
            &aug_s,
            &aug_t,
            &mut opt_gen,
            regime.grad_chunks,
        );
        if !gen.total.is_finite() {
            return Err(MapperError::NonFinite {
                iter,
                component: "generator loss",
            });
        }

        // critic step on fresh batches
        let is_idx = draw(&mut batch_rng, &src);
        let it_idx = draw(&mut batch_rng, &tgt);
        let batch_s: Vec<&Tensor<S>> = is_idx.iter().map(|&i| src[i]).collect();
        let batch_t: Vec<&Tensor<S>> = it_idx.iter().map(|&i| tgt[i]).collect();
        let (disc_s, disc_t) = critic_step(&mut pair, &batch_s, &batch_t, &mut opt_disc, regime.grad_chunks);
        if !(disc_s.is_finite() && disc_t.is_finite()) {
            return Err(MapperError::NonFinite {
                iter,
                component: "critic loss",
            });
        }

        pair.ema_update(regime.ema_decay);

        // early stopping on the EMA mapping
        let mut improved = false;
        let mut score = f64::NAN;
        if iter % regime.eval_every.max(1) == 0 {
            score = early_stop_score(&pair, target_val, source_nbm)?;
            if !score.is_finite() {
                return Err(MapperError::NonFinite {
                    iter,
                    component: "early-stop score",
                });
            }
            if score < best_score - regime.improve_tol {
                best_score = score;
                best_iter = iter;
                best = pair.clone();
                improved = true;
            }
        }
        log.rows.push(IterMetrics {
            iter,
            gan_st: gen.gan_st,
            gan_ts: gen.gan_ts,
            cycle: gen.cycle,
            zero: gen.zero,
            rated: gen.rated,
            cycle_aug: gen.cycle_aug,
            gen_total: gen.total,
            disc_s,
            disc_t,
            early_stop: score,
            improved,
        });

        if iter - best_iter >= regime.patience_iters {
            break;
        }
    }

    best.meta.best_iter = best_iter;
    best.meta.iters_run = log.rows.len();
    best.meta.best_early_stop_score = best_score;
    best.meta.scarcity_weeks = pair.meta.scarcity_weeks;
    Ok((best, log))
}

impl BatchMasks {
    /// Mask computation over borrowed batch slices (training-loop variant
    /// of [`BatchMasks::compute`]).
    pub fn compute_refs<S: Scalar>(
        source: &[&Tensor<S>],
        target: &[&Tensor<S>],
        targets: &super::losses::MaskTargets,
    ) -> Self {
        Self {
            source: source
                .iter()
                .map(|w| super::losses::StateMask::compute(w, targets, super::losses::Domain::Source))
                .collect(),
            target: target
                .iter()
                .map(|w| super::losses::StateMask::compute(w, targets, super::losses::Domain::Target))
                .collect(),
        }
    }
}
