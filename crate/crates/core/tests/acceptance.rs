//! Acceptance suite: every release criterion, each as one test printing a
//! PASS/FAIL line. Training-based criteria share one lazily built world
//! (three seed repetitions of the synthetic source/target pair) so the
//! suite trains each model exactly once.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use scadamap_core::data::{
    prepare_domain, source_norm_stats, Channel, NormalizationStats, PreparedDomain,
    STEP_SECONDS,
};
use scadamap_core::eval::{f1_vs_ground_truth, window_labels, write_scores_csv};
use scadamap_core::mapper::{
    cycle_loss, gan_qp_critic_objective, rated_loss, train_mapper, zero_loss, BatchMasks, Domain,
    LossWeights, MapFn, MapperConfig, MapperPair, MapperTrainRegime, MaskTargets, StateMask,
};
use scadamap_core::nbm::{
    compute_threshold, patience_for, AutoencoderConfig, NbmModel, NbmTrainRegime,
};
use scadamap_core::rng::stream_rng;
use scadamap_core::sim::{inject_faults, simulate, FaultInjection, FaultKind, SimTurbineSpec};
use scadamap_core::{Real, Scalar, Tensor};

const WEEKS_TOTAL: usize = 14;
const N_RECORDS: usize = WEEKS_TOTAL * 1008;
const STRIDE: usize = 6;
const REPS: usize = 3;

fn pass_line(criterion: u32, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
}

// =========================================================================
// Criterion 1: oracle suites (threshold, F1, content losses) within 1e-9
// =========================================================================

#[test]
fn criterion_1_oracle_suites() {
    let t0 = Instant::now();
    let mut rng = stream_rng(11, "oracles");

    // --- threshold oracle: brute-force linear-interpolation percentile ---
    let brute_percentile = |sorted: &[f64], p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    for case in 0..1000 {
        let n = rng.gen_range(4..200);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let got = compute_threshold(&scores).unwrap();
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = brute_percentile(&sorted, 0.25);
        let q3 = brute_percentile(&sorted, 0.75);
        let want = q3 + 3.0 * (q3 - q1);
        assert!((got - want).abs() < 1e-9, "threshold case {case}: {got} vs {want}");
    }

    // --- F1 oracle: brute-force confusion matrix ---
    for case in 0..1000 {
        let n = rng.gen_range(1..200);
        let y_star: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let got = f1_vs_ground_truth(&y_star, &y).unwrap();
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for i in 0..n {
            if y_star[i] && y[i] {
                tp += 1;
            }
            if !y_star[i] && y[i] {
                fp += 1;
            }
            if y_star[i] && !y[i] {
                fn_ += 1;
            }
        }
        let want = if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        assert!((got.f1 - want).abs() < 1e-9, "f1 case {case}");
        assert_eq!((got.tp, got.fp, got.fn_), (tp, fp, fn_));
    }

    // --- content-loss oracles with stub generators, f64 ---
    let stats = NormalizationStats {
        min: [0.0; 11],
        max: [50.0; 11],
    };
    let targets = MaskTargets::new(&stats, 30.0, 20.0);
    let weights = LossWeights::default();
    for case in 0..1000 {
        let m = rng.gen_range(1..4);
        let len = 12;
        let mut make_batch = |anchored: bool| -> Vec<Tensor<f64>> {
            (0..m)
                .map(|_| {
                    let mut w = Tensor::from_fn(11, len, |_, _| rng.gen_range(-1.0..1.5));
                    if anchored && rng.gen_bool(0.7) {
                        // exact zero-state and rated entries, as the pipeline produces
                        for ch in Channel::ZERO_STATE {
                            for t in 0..rng.gen_range(0..4) {
                                w.set(ch.index(), t, targets.zero_norm[ch.index()]);
                            }
                        }
                        for t in len - 3..len {
                            if rng.gen_bool(0.5) {
                                w.set(Channel::PowerMean.index(), t, targets.rated_source_norm);
                            }
                        }
                    }
                    w
                })
                .collect()
        };
        let s = make_batch(true);
        let t = {
            // target windows anchor at the target rated value instead
            let mut batch = make_batch(false);
            for w in &mut batch {
                if rng.gen_bool(0.5) {
                    w.set(Channel::PowerMean.index(), 0, targets.rated_target_norm);
                    for ch in Channel::ZERO_STATE {
                        w.set(ch.index(), 5, targets.zero_norm[ch.index()]);
                    }
                }
            }
            batch
        };
        let a1 = rng.gen_range(0.7..1.3);
        let b1 = rng.gen_range(-0.2..0.2);
        let a2 = rng.gen_range(0.7..1.3);
        let b2 = rng.gen_range(-0.2..0.2);
        let g_st = move |x: &Tensor<f64>| x.map(|v| a1 * v + b1);
        let g_ts = move |x: &Tensor<f64>| x.map(|v| a2 * v + b2);
        let masks = BatchMasks::compute(&s, &t, &targets);

        // brute-force recomputation from raw tensors
        let mae = |a: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let mut acc = 0.0;
            for (x, y) in a.data().iter().zip(b.data()) {
                acc += (x - y).abs();
            }
            acc / a.numel() as f64
        };
        let mut brute_cyc = 0.0;
        for w in &t {
            brute_cyc += mae(w, &g_st.map_window(&g_ts.map_window(w))) / m as f64;
        }
        for w in &s {
            brute_cyc += mae(w, &g_ts.map_window(&g_st.map_window(w))) / m as f64;
        }
        brute_cyc *= weights.lambda_cyc;
        let got_cyc = cycle_loss(&s, &t, &g_st, &g_ts, weights.lambda_cyc);
        assert!((got_cyc - brute_cyc).abs() < 1e-9, "cycle case {case}");

        let brute_masked = |batch: &[Tensor<f64>], g: &dyn Fn(&Tensor<f64>) -> Tensor<f64>, domain: Domain| -> f64 {
            let mut acc = 0.0;
            let mut count = 0usize;
            for w in batch {
                let mapped = g(w);
                for ch in Channel::ZERO_STATE {
                    let c = ch.index();
                    for tt in 0..w.len() {
                        if w.get(c, tt) == targets.zero_norm[c] {
                            acc += (mapped.get(c, tt) - targets.zero_norm[c]).abs();
                            count += 1;
                        }
                    }
                }
                let _ = domain;
            }
            if count == 0 {
                0.0
            } else {
                acc / count as f64
            }
        };
        let brute_zero = weights.lambda_zero
            * (brute_masked(&s, &|x| g_st.map_window(x), Domain::Source)
                + brute_masked(&t, &|x| g_ts.map_window(x), Domain::Target));
        let got_zero = zero_loss(&s, &t, &masks, &g_st, &g_ts, &targets, weights.lambda_zero);
        assert!((got_zero - brute_zero).abs() < 1e-9, "zero case {case}");

        let brute_rated_side = |batch: &[Tensor<f64>], g: &dyn Fn(&Tensor<f64>) -> Tensor<f64>, own: f64, other: f64| -> f64 {
            let pm = Channel::PowerMean.index();
            let mut acc = 0.0;
            let mut count = 0usize;
            for w in batch {
                let mapped = g(w);
                for tt in 0..w.len() {
                    if w.get(pm, tt) == own {
                        acc += (mapped.get(pm, tt) - other).abs();
                        count += 1;
                    }
                }
            }
            if count == 0 {
                0.0
            } else {
                acc / count as f64
            }
        };
        let brute_rated = weights.lambda_rated
            * (brute_rated_side(&s, &|x| g_st.map_window(x), targets.rated_source_norm, targets.rated_target_norm)
                + brute_rated_side(&t, &|x| g_ts.map_window(x), targets.rated_target_norm, targets.rated_source_norm));
        let got_rated = rated_loss(&s, &t, &masks, &g_st, &g_ts, &targets, weights.lambda_rated);
        assert!((got_rated - brute_rated).abs() < 1e-9, "rated case {case}");
    }

    let elapsed = t0.elapsed();
    let ok = elapsed < Duration::from_secs(60);
    pass_line(1, ok, &format!("threshold+F1+losses, 1000 cases each, {elapsed:.2?}"));
    assert!(ok, "criterion 1 exceeded 1 minute: {elapsed:?}");
}

// =========================================================================
// Criterion 2: gradient checks on miniature networks
// =========================================================================

#[test]
fn criterion_2_gradient_checks() {
    let t0 = Instant::now();
    // the miniature finite-difference checks live next to the layers; here
    // they run as the release gate with the stated tolerance
    let nbm_out = std::panic::catch_unwind(run_nbm_gradient_check);
    let gen_out = std::panic::catch_unwind(run_generator_gradient_check);
    let elapsed = t0.elapsed();
    let ok = nbm_out.is_ok() && gen_out.is_ok() && elapsed < Duration::from_secs(300);
    pass_line(
        2,
        ok,
        &format!(
            "nbm grad {}, generator grad {}, {elapsed:.2?}",
            if nbm_out.is_ok() { "ok" } else { "failed" },
            if gen_out.is_ok() { "ok" } else { "failed" }
        ),
    );
    assert!(nbm_out.is_ok(), "NBM training-loss gradient check failed");
    assert!(gen_out.is_ok(), "generator total-loss gradient check failed");
    assert!(elapsed < Duration::from_secs(300), "criterion 2 exceeded 5 minutes: {elapsed:?}");
}

fn run_nbm_gradient_check() {
    use scadamap_core::nbm::Autoencoder;
    use scadamap_core::tensor::mse;
    let cfg = AutoencoderConfig {
        channels: 11,
        window: 24,
        filters: 2,
        bottleneck: 8,
        decoder_in: 2,
    };
    let net = Autoencoder::<f64>::new(&cfg, 21).unwrap();
    let x = Tensor::from_fn(11, 24, |c, t| ((c * 5 + t) as f64 * 0.31).sin());
    let (y, trace) = net.forward_trace(&x);
    let numel = (11 * 24) as f64;
    let mut gy = Tensor::zeros(11, 24);
    for (g, (yv, xv)) in gy.data_mut().iter_mut().zip(y.data().iter().zip(x.data())) {
        *g = 2.0 * (yv - xv) / numel;
    }
    let mut grads = net.zero_grads();
    net.backward(&trace, &gy, &mut grads);
    let flat: Vec<Vec<f64>> = grads.flat().into_iter().cloned().collect();
    for (pi, gvec) in flat.iter().enumerate() {
        let step = (gvec.len() / 4).max(1);
        for i in (0..gvec.len()).step_by(step) {
            let h = 1e-6;
            let mut plus = net.clone();
            plus.params_mut()[pi][i] += h;
            let mut minus = net.clone();
            minus.params_mut()[pi][i] -= h;
            let f = |n: &Autoencoder<f64>| mse(&x, &n.forward(&x));
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            // relative tolerance 1e-4 with an absolute floor for entries at
            // the finite-difference noise level
            assert!(
                (fd - gvec[i]).abs() <= 1e-9 + 1e-4 * fd.abs().max(gvec[i].abs()),
                "nbm param {pi}[{i}]: fd {fd} vs {}",
                gvec[i]
            );
        }
    }
}

fn run_generator_gradient_check() {
    use scadamap_core::mapper::{generator_gradients, DiscriminatorConfig, GeneratorConfig, TcnBlockConfig};
    // 2-block miniature pair; the total generator loss includes both
    // adversarial terms, the three content losses, and the corrupted-batch
    // cycle term, exactly as assembled by the training loop
    let config = MapperConfig {
        generator: GeneratorConfig {
            channels: 11,
            blocks: vec![
                TcnBlockConfig { channels: 5, kernel: 3, dilation: 1, norm: false },
                TcnBlockConfig { channels: 4, kernel: 3, dilation: 2, norm: true },
            ],
        },
        discriminator: DiscriminatorConfig { channels: 11, window: 24, base_filters: 4 },
    };
    let stats = NormalizationStats { min: [0.0; 11], max: [50.0; 11] };
    let targets = MaskTargets::new(&stats, 30.0, 20.0);
    let pair = MapperPair::<f64>::build(&config, LossWeights::default(), targets.clone(), 31, "S", "T").unwrap();
    let mut rng = stream_rng(32, "gc");
    let mut mk = |anchor: bool| -> Vec<Tensor<f64>> {
        (0..2)
            .map(|_| {
                let mut w = Tensor::from_fn(11, 24, |_, _| rng.gen_range(-1.0..1.0));
                if anchor {
                    for ch in Channel::ZERO_STATE {
                        w.set(ch.index(), 3, targets.zero_norm[ch.index()]);
                    }
                    w.set(Channel::PowerMean.index(), 7, targets.rated_source_norm);
                }
                w
            })
            .collect()
    };
    let s = mk(true);
    let t = mk(false);
    let batch_s: Vec<&Tensor<f64>> = s.iter().collect();
    let batch_t: Vec<&Tensor<f64>> = t.iter().collect();
    let mut aug_rng = stream_rng(33, "aug");
    let aug_s = scadamap_core::mapper::augment_tensors(&batch_s, &targets.zero_norm, &mut aug_rng);
    let aug_t = scadamap_core::mapper::augment_tensors(&batch_t, &targets.zero_norm, &mut aug_rng);

    let total = |g_st: &scadamap_core::mapper::TcnGenerator<f64>,
                 g_ts: &scadamap_core::mapper::TcnGenerator<f64>|
     -> f64 {
        let m = s.len() as f64;
        let masks = BatchMasks::compute(&s, &t, &targets);
        let w = pair.weights;
        let gan_st: f64 = (0..s.len())
            .map(|i| pair.disc_t.forward(batch_t[i]) - pair.disc_t.forward(&g_st.forward(batch_s[i])))
            .sum::<f64>()
            / m;
        let gan_ts: f64 = (0..s.len())
            .map(|i| pair.disc_s.forward(batch_s[i]) - pair.disc_s.forward(&g_ts.forward(batch_t[i])))
            .sum::<f64>()
            / m;
        gan_st
            + gan_ts
            + cycle_loss(&s, &t, g_st, g_ts, w.lambda_cyc)
            + zero_loss(&s, &t, &masks, g_st, g_ts, &targets, w.lambda_zero)
            + rated_loss(&s, &t, &masks, g_st, g_ts, &targets, w.lambda_rated)
            + cycle_loss(&aug_s, &aug_t, g_st, g_ts, w.lambda_cyc)
    };

    let back = generator_gradients(&pair, &batch_s, &batch_t, &aug_s, &aug_t, 2);
    let mut checked = 0usize;
    for (which, grads) in [(0usize, &back.grads_st), (1usize, &back.grads_ts)] {
        let flat = grads.flat();
        for pi in (0..flat.len()).step_by(2) {
            let plen = flat[pi].len();
            for i in (0..plen).step_by((plen / 2).max(1)) {
                let h = 1e-5;
                let mut st_p = pair.g_st.clone();
                let mut ts_p = pair.g_ts.clone();
                let mut st_m = pair.g_st.clone();
                let mut ts_m = pair.g_ts.clone();
                if which == 0 {
                    st_p.params_mut()[pi][i] += h;
                    st_m.params_mut()[pi][i] -= h;
                } else {
                    ts_p.params_mut()[pi][i] += h;
                    ts_m.params_mut()[pi][i] -= h;
                }
                let fd = (total(&st_p, &ts_p) - total(&st_m, &ts_m)) / (2.0 * h);
                let analytic = flat[pi][i];
                assert!(
                    (fd - analytic).abs() <= 1e-8 + 1e-4 * fd.abs().max(analytic.abs()),
                    "generator {which} param {pi}[{i}]: fd {fd} vs analytic {analytic}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 20);
}

// =========================================================================
// Criterion 3: GAN-QP maximum at delta = lambda * d with value lambda*d/2
// =========================================================================

#[test]
fn criterion_3_gan_qp_property() {
    let mut worst_arg: f64 = 0.0;
    let mut worst_val: f64 = 0.0;
    for d in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0] {
            // ternary search for the maximizer of the per-pair objective
            let f = |delta: f64| gan_qp_critic_objective(delta, 0.0, d, lambda).unwrap();
            let (mut lo, mut hi) = (0.0f64, 4.0 * lambda * d + 1.0);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1) < f(m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            let argmax = 0.5 * (lo + hi);
            let maximum = f(argmax);
            worst_arg = worst_arg.max((argmax - lambda * d).abs());
            worst_val = worst_val.max((maximum - lambda * d / 2.0).abs());
        }
    }
    let ok = worst_arg < 1e-6 && worst_val < 1e-6;
    pass_line(
        3,
        ok,
        &format!("max |argmax err| {worst_arg:.2e}, max |value err| {worst_val:.2e}"),
    );
    assert!(ok, "GAN-QP property violated: arg {worst_arg}, val {worst_val}");
}

// =========================================================================
// Shared world for the training-based criteria (4-8)
// =========================================================================

struct Scenario {
    rep: usize,
    source_full: PreparedDomain<Real>,
    target_gt: PreparedDomain<Real>,
    target_scarce2: PreparedDomain<Real>,
    source_nbm: NbmModel<Real>,
    gt_label_f1: f64,
    gt_train_seconds: f64,
    scarce2_f1: f64,
    scarce8_f1: f64,
    mapper: MapperPair<Real>,
    mapper_seconds: f64,
    dm_scores: Vec<f64>,
    dm_f1: f64,
}

fn acceptance_faults(start_ts: i64) -> Vec<FaultInjection> {
    let at = |idx: i64| start_ts + idx * STEP_SECONDS;
    vec![
        FaultInjection {
            start: at(10_278),
            end: at(10_566),
            kind: FaultKind::IdleStuck,
            magnitude: 1.0,
            logged: true,
        },
        FaultInjection {
            start: at(11_278),
            end: at(11_710),
            kind: FaultKind::PowerDerating,
            magnitude: 0.5,
            logged: false,
        },
        FaultInjection {
            start: at(12_478),
            end: at(13_054),
            kind: FaultKind::TemperatureDrift,
            magnitude: 30.0,
            logged: true,
        },
    ]
}

fn nbm_regime(seed: u64, records: usize, full_records: usize) -> NbmTrainRegime {
    NbmTrainRegime {
        seed,
        patience: patience_for(records, full_records),
        max_epochs: 600,
        ..NbmTrainRegime::default()
    }
}

/// Desk-scale mapper regime: published optimizer settings, smaller batch
/// and a faster-converging EMA so the run fits a CPU budget.
fn mapper_regime(seed: u64) -> MapperTrainRegime {
    MapperTrainRegime {
        seed,
        batch_size: 64,
        max_iters: 300,
        patience_iters: 120,
        eval_every: 2,
        ema_decay: 0.99,
        ..MapperTrainRegime::default()
    }
}

fn build_scenario(rep: usize) -> Scenario {
    let source_spec = SimTurbineSpec::preset_source("SRC", 7100 + rep as u64);
    let target_spec = SimTurbineSpec::preset_target("TGT", 8100 + rep as u64);
    let source_series = simulate(&source_spec, N_RECORDS).unwrap();
    let healthy = simulate(&target_spec, N_RECORDS).unwrap();
    let (target_series, labels) =
        inject_faults(&healthy, &acceptance_faults(target_spec.start_timestamp)).unwrap();

    let norm = source_norm_stats(&source_series, &source_spec.turbine_spec()).unwrap();
    let source_full =
        prepare_domain::<Real>(&source_series, &source_spec.turbine_spec(), &norm, None, STRIDE).unwrap();
    let target_gt =
        prepare_domain::<Real>(&target_series, &target_spec.turbine_spec(), &norm, None, STRIDE).unwrap();
    let target_scarce2 =
        prepare_domain::<Real>(&target_series, &target_spec.turbine_spec(), &norm, Some(2), STRIDE).unwrap();
    let target_scarce8 =
        prepare_domain::<Real>(&target_series, &target_spec.turbine_spec(), &norm, Some(8), STRIDE).unwrap();

    let cfg = AutoencoderConfig::default();
    let source_nbm = NbmModel::train(
        &cfg,
        &norm,
        &source_full.train,
        &source_full.validation,
        &nbm_regime(9000 + rep as u64, source_full.train_val_records, source_full.train_val_records),
        "SRC",
        None,
    )
    .unwrap();

    let t0 = Instant::now();
    let gt_nbm = NbmModel::train(
        &cfg,
        &norm,
        &target_gt.train,
        &target_gt.validation,
        &nbm_regime(9100 + rep as u64, target_gt.train_val_records, target_gt.train_val_records),
        "TGT",
        None,
    )
    .unwrap();
    let gt_scores = gt_nbm.score_windows(&target_gt.test);
    let gt_decisions: Vec<bool> = gt_scores.iter().map(|&s| s >= gt_nbm.threshold).collect();
    let gt_train_seconds = t0.elapsed().as_secs_f64();

    let win_labels = window_labels(&target_series, &labels, &target_gt.test);
    let gt_label_f1 = f1_vs_ground_truth(&win_labels, &gt_decisions).unwrap().f1;

    // scarce NBMs (2 and 8 weeks)
    let mut scarce_f1 = [0.0f64; 2];
    for (slot, (weeks, prep)) in [(2u32, &target_scarce2), (8u32, &target_scarce8)]
        .into_iter()
        .enumerate()
    {
        let nbm = NbmModel::train(
            &cfg,
            &norm,
            &prep.train,
            &prep.validation,
            &nbm_regime(
                9200 + 10 * rep as u64 + weeks as u64,
                prep.train_val_records,
                target_gt.train_val_records,
            ),
            "TGT",
            Some(weeks),
        )
        .unwrap();
        let scores = nbm.score_windows(&target_gt.test);
        let decisions: Vec<bool> = scores.iter().map(|&s| s >= nbm.threshold).collect();
        scarce_f1[slot] = f1_vs_ground_truth(&gt_decisions, &decisions).unwrap().f1;
    }

    // domain mapper at 2-week scarcity
    let targets = MaskTargets::new(&norm, source_spec.rated_power_kw, target_spec.rated_power_kw);
    let regime = mapper_regime(9300 + rep as u64);
    let mut pair = MapperPair::<Real>::build(
        &MapperConfig::default(),
        LossWeights::default(),
        targets,
        regime.seed,
        "SRC",
        "TGT",
    )
    .unwrap();
    pair.meta.scarcity_weeks = Some(2);
    let t0 = Instant::now();
    let (mapper, _log) = train_mapper(
        pair,
        &source_full.train,
        &target_scarce2.train,
        &target_scarce2.validation,
        &source_nbm,
        &regime,
    )
    .unwrap();
    let mapper_seconds = t0.elapsed().as_secs_f64();

    let mapped_val = mapper.map_to_source(&target_scarce2.validation);
    let dm_threshold = compute_threshold(&source_nbm.score_windows(&mapped_val)).unwrap();
    let mapped_test = mapper.map_to_source(&target_gt.test);
    let dm_scores = source_nbm.score_windows(&mapped_test);
    let dm_decisions: Vec<bool> = dm_scores.iter().map(|&s| s >= dm_threshold).collect();
    let dm_f1 = f1_vs_ground_truth(&gt_decisions, &dm_decisions).unwrap().f1;

    println!(
        "world rep {rep}: gt_label_f1 {gt_label_f1:.3}, scarce2 {:.3}, scarce8 {:.3}, dm {:.3} (mapper {:.0}s, {} iters)",
        scarce_f1[0], scarce_f1[1], dm_f1, mapper_seconds, mapper.meta.iters_run
    );

    Scenario {
        rep,
        source_full,
        target_gt,
        target_scarce2,
        source_nbm,
        gt_label_f1,
        gt_train_seconds,
        scarce2_f1: scarce_f1[0],
        scarce8_f1: scarce_f1[1],
        mapper,
        mapper_seconds,
        dm_scores,
        dm_f1,
    }
}

fn world() -> &'static Vec<Scenario> {
    static WORLD: OnceLock<Vec<Scenario>> = OnceLock::new();
    WORLD.get_or_init(|| (0..REPS).map(build_scenario).collect())
}

// =========================================================================
// Criterion 4: ground-truth NBM detects injected faults (label F1 >= 0.8)
// =========================================================================

#[test]
fn criterion_4_nbm_detects_injected_faults() {
    let world = world();
    let rep = &world[0];
    let ok_f1 = rep.gt_label_f1 >= 0.8;
    let ok_time = rep.gt_train_seconds < 15.0 * 60.0;
    pass_line(
        4,
        ok_f1 && ok_time,
        &format!(
            "label F1 {:.3} (>= 0.8), ground-truth training {:.0}s (< 900s)",
            rep.gt_label_f1, rep.gt_train_seconds
        ),
    );
    assert!(
        ok_f1,
        "ground-truth NBM label F1 {:.3} below 0.8",
        rep.gt_label_f1
    );
    assert!(ok_time, "criterion 4 run took {:.0}s", rep.gt_train_seconds);
}

// =========================================================================
// Criterion 5: scarcity degradation (2-week F1 at least 5 points below
// 8-week F1, averaged over 3 seeds)
// =========================================================================

#[test]
fn criterion_5_scarcity_degradation() {
    let world = world();
    let mean2: f64 = world.iter().map(|s| s.scarce2_f1).sum::<f64>() / world.len() as f64;
    let mean8: f64 = world.iter().map(|s| s.scarce8_f1).sum::<f64>() / world.len() as f64;
    let gap = mean8 - mean2;
    let ok = gap >= 0.05;
    let per_rep: Vec<String> = world
        .iter()
        .map(|s| format!("rep{}: {:.3}/{:.3}", s.rep, s.scarce2_f1, s.scarce8_f1))
        .collect();
    pass_line(
        5,
        ok,
        &format!(
            "mean F1 2w {mean2:.3} vs 8w {mean8:.3}, gap {:.1} points [{}]",
            gap * 100.0,
            per_rep.join(", ")
        ),
    );
    assert!(ok, "scarcity gap only {:.1} points", gap * 100.0);
}

// =========================================================================
// Criterion 6: domain mapping beats the scarce baseline by >= 5 points at
// 2-week scarcity, averaged over 3 seeds; each training < 60 min
// =========================================================================

#[test]
fn criterion_6_domain_mapping_benefit() {
    let world = world();
    let mean_scarce: f64 = world.iter().map(|s| s.scarce2_f1).sum::<f64>() / world.len() as f64;
    let mean_dm: f64 = world.iter().map(|s| s.dm_f1).sum::<f64>() / world.len() as f64;
    let gain = mean_dm - mean_scarce;
    let slowest = world.iter().map(|s| s.mapper_seconds).fold(0.0, f64::max);
    let ok = gain >= 0.05 && slowest < 3600.0;
    let per_rep: Vec<String> = world
        .iter()
        .map(|s| format!("rep{}: {:.3} vs {:.3}", s.rep, s.dm_f1, s.scarce2_f1))
        .collect();
    pass_line(
        6,
        ok,
        &format!(
            "mean mapped F1 {mean_dm:.3} vs scarce {mean_scarce:.3}, gain {:.1} points, slowest training {:.0}s [{}]",
            gain * 100.0,
            slowest,
            per_rep.join(", ")
        ),
    );
    assert!(gain >= 0.05, "domain-mapping gain only {:.1} points", gain * 100.0);
    assert!(slowest < 3600.0, "mapper training took {slowest:.0}s");
}

// =========================================================================
// Criterion 7: content preservation of the trained mappers
// =========================================================================

#[test]
fn criterion_7_content_preservation() {
    let world = world();
    let mut within = 0usize;
    let mut total = 0usize;
    let mut cycled_sum = 0.0;
    let mut cycled_n = 0usize;
    for s in world {
        // zero-state preservation on mapped test windows
        let mapped = s.mapper.map_to_source(&s.target_gt.test);
        for (orig, m) in s.target_gt.test.iter().zip(&mapped) {
            let mask = StateMask::compute(&orig.values, &s.mapper.targets, Domain::Target);
            for (c, t) in mask.zero {
                let z = s.mapper.targets.zero_norm[c] as Real;
                let dev = (m.values.get(c, t) - z).abs();
                if dev <= 0.05 {
                    within += 1;
                }
                total += 1;
            }
        }
        // cycled reconstruction on target validation windows (EMA pair)
        for w in &s.target_scarce2.validation {
            let cycled = s.mapper.ema_st.forward(&s.mapper.ema_ts.forward(&w.values));
            cycled_sum += scadamap_core::tensor::mae(&w.values, &cycled).to_f64_c();
            cycled_n += 1;
        }
    }
    let frac = within as f64 / total.max(1) as f64;
    let cycled = cycled_sum / cycled_n.max(1) as f64;
    let ok = frac >= 0.9 && cycled < 0.1;
    pass_line(
        7,
        ok,
        &format!(
            "zero-state within 0.05: {:.1}% of {} entries, mean cycled MAE {:.4}",
            frac * 100.0,
            total,
            cycled
        ),
    );
    assert!(frac >= 0.9, "only {:.1}% of zero-masked entries preserved", frac * 100.0);
    assert!(cycled < 0.1, "mean cycled MAE {cycled:.4} not below 0.1");
}

// =========================================================================
// Criterion 8: bitwise-deterministic rerun of the criterion-6 cell
// =========================================================================

#[test]
fn criterion_8_determinism() {
    let world = world();
    let s = &world[0];
    // rerun the full criterion-6 training for rep 0 with identical seeds
    let targets = s.mapper.targets.clone();
    let regime = mapper_regime(9300);
    let mut pair = MapperPair::<Real>::build(
        &MapperConfig::default(),
        LossWeights::default(),
        targets,
        regime.seed,
        "SRC",
        "TGT",
    )
    .unwrap();
    pair.meta.scarcity_weeks = Some(2);
    let (mapper2, _log) = train_mapper(
        pair,
        &s.source_full.train,
        &s.target_scarce2.train,
        &s.target_scarce2.validation,
        &s.source_nbm,
        &regime,
    )
    .unwrap();
    let mapped_val = mapper2.map_to_source(&s.target_scarce2.validation);
    let threshold2 = compute_threshold(&s.source_nbm.score_windows(&mapped_val)).unwrap();
    let mapped_test = mapper2.map_to_source(&s.target_gt.test);
    let scores2 = s.source_nbm.score_windows(&mapped_test);

    // both runs exported as score CSVs, compared byte for byte
    let dir = tempfile::tempdir().unwrap();
    let starts: Vec<i64> = s.target_gt.test.iter().map(|w| w.start_timestamp).collect();
    let dm_threshold = {
        let mapped_val = s.mapper.map_to_source(&s.target_scarce2.validation);
        compute_threshold(&s.source_nbm.score_windows(&mapped_val)).unwrap()
    };
    let d1: Vec<bool> = s.dm_scores.iter().map(|&v| v >= dm_threshold).collect();
    let d2: Vec<bool> = scores2.iter().map(|&v| v >= threshold2).collect();
    let p1 = dir.path().join("run1.csv");
    let p2 = dir.path().join("run2.csv");
    write_scores_csv(&p1, &starts, &s.dm_scores, &d1).unwrap();
    write_scores_csv(&p2, &starts, &scores2, &d2).unwrap();
    let b1 = std::fs::read(&p1).unwrap();
    let b2 = std::fs::read(&p2).unwrap();
    let ok = b1 == b2;
    pass_line(
        8,
        ok,
        &format!("score CSVs identical: {} bytes", b1.len()),
    );
    assert!(ok, "rerun produced different score CSV bytes");
    assert_eq!(threshold2, dm_threshold, "thresholds must match bitwise");
}
