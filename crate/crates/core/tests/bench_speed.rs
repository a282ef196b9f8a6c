//! Rough timing probes used to size desk-scale configurations.
//! Run by hand: cargo test --release -p scadamap-core --test bench_speed -- --nocapture --ignored

use std::time::Instant;

use scadamap_core::data::normalize::NormalizationStats;
use scadamap_core::data::window::WindowSample;
use scadamap_core::mapper::{LossWeights, MapperConfig, MapperPair, MapperTrainRegime, MaskTargets};
use scadamap_core::nbm::{AutoencoderConfig, NbmModel, NbmTrainRegime};
use scadamap_core::rng::stream_rng;
use scadamap_core::Tensor;
use rand::Rng;

fn windows(seed: u64, n: usize) -> Vec<WindowSample<f32>> {
    let mut rng = stream_rng(seed, "bench");
    (0..n)
        .map(|_| WindowSample {
            values: Tensor::from_fn(11, 72, |_, _| rng.gen_range(-1.0f32..1.0)),
            start_timestamp: 0,
            contains_incident: false,
        })
        .collect()
}

#[test]
#[ignore]
fn bench_mapper_iteration() {
    let stats = NormalizationStats { min: [0.0; 11], max: [100.0; 11] };
    let targets = MaskTargets::new(&stats, 2000.0, 850.0);
    let pair = MapperPair::<f32>::build(&MapperConfig::default(), LossWeights::default(), targets, 1, "A", "B").unwrap();
    let nbm_cfg = AutoencoderConfig::default();
    let train = windows(1, 160);
    let val = windows(2, 40);
    let nbm_regime = NbmTrainRegime { batch_size: 128, patience: 1, max_epochs: 1, seed: 1, ..NbmTrainRegime::default() };
    let t0 = Instant::now();
    let nbm = NbmModel::train(&nbm_cfg, &stats, &train, &val, &nbm_regime, "S", None).unwrap();
    println!("one NBM epoch over 160 windows: {:?}", t0.elapsed());

    for batch in [32usize, 64, 128] {
        let regime = MapperTrainRegime { batch_size: batch, max_iters: 2, patience_iters: 10, eval_every: 1, seed: 2, ..MapperTrainRegime::default() };
        let t0 = Instant::now();
        let (_p, log) = scadamap_core::mapper::train_mapper(pair.clone(), &train, &train, &val, &nbm, &regime).unwrap();
        println!("mapper iteration at batch {batch}: {:?} ({} iters)", t0.elapsed() / log.rows.len() as u32, log.rows.len());
    }
}
