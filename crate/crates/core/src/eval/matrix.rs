//! Benchmark orchestration: for every (source, target) pair and scarcity
//! degree, train or load the ground-truth NBM, the scarce NBM, the
//! fine-tuned NBM, and the domain mapper, evaluate all of them on the fixed
//! target test windows, and persist everything cell by cell so interrupted
//! matrix runs resume without retraining.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    extract_windows, normalize, prepare_domain, source_norm_stats, split_70_30_30, PipelineError,
    PreparedDomain, ScadaSeries, TurbineSpec, WindowSample, WINDOW_LEN,
};
use crate::mapper::{
    train_mapper, LossWeights, MapperConfig, MapperError, MapperPair, MapperTrainRegime,
    MaskTargets,
};
use crate::nbm::{
    compute_threshold, patience_for, AutoencoderConfig, CheckpointError, NbmError, NbmModel,
    NbmTrainRegime,
};
use crate::rng::{child_seed, Digest};
use crate::scalar::Scalar;

use super::f1::{f1_vs_ground_truth, EvalError, EvaluationReport};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("turbine {0} referenced by the grid is not loaded")]
    UnknownTurbine(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Split(#[from] crate::data::SplitError),
    #[error(transparent)]
    Nbm(#[from] NbmError),
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("mapper assembly failed: {0}")]
    Assembly(String),
    #[error("non-finite scores produced by {0}")]
    NonFiniteScores(&'static str),
    #[error("test windows changed across scenarios for target {0}")]
    TestWindowsDiverged(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cell state: {0}")]
    CorruptCell(String),
}

/// The four compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    GroundTruth,
    Scarce,
    FineTune,
    DomainMap,
}

impl MethodId {
    pub const COMPARED: [MethodId; 3] = [MethodId::Scarce, MethodId::FineTune, MethodId::DomainMap];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::GroundTruth => "ground_truth",
            MethodId::Scarce => "scarce",
            MethodId::FineTune => "fine_tune",
            MethodId::DomainMap => "domain_map",
        }
    }
}

/// One method's scores and decisions on the fixed test windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: MethodId,
    pub source_id: String,
    pub target_id: String,
    pub weeks: Option<u32>,
    pub threshold: f64,
    pub scores: Vec<f64>,
    pub decisions: Vec<bool>,
    /// Threshold-similarity report vs the ground truth (absent for the
    /// ground truth itself).
    pub report: Option<EvaluationReport>,
    /// F1 against synthetic per-record labels, when labels exist.
    pub label_report: Option<EvaluationReport>,
}

impl MethodRun {
    fn new(
        method: MethodId,
        source_id: &str,
        target_id: &str,
        weeks: Option<u32>,
        threshold: f64,
        scores: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        if !scores.iter().all(|s| s.is_finite()) {
            return Err(MatrixError::NonFiniteScores(method.as_str()));
        }
        let decisions = scores.iter().map(|&s| s >= threshold).collect();
        Ok(Self {
            method,
            source_id: source_id.into(),
            target_id: target_id.into(),
            weeks,
            threshold,
            scores,
            decisions,
            report: None,
            label_report: None,
        })
    }
}

/// All method runs of one (pair, weeks) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub source_id: String,
    pub target_id: String,
    pub weeks: u32,
    pub window_starts: Vec<i64>,
    pub window_incidents: Vec<bool>,
    pub test_windows_digest: String,
    pub runs: Vec<MethodRun>,
}

/// Per-turbine input: spec, raw series, optional ground-truth labels.
#[derive(Debug, Clone)]
pub struct TurbineData {
    pub spec: TurbineSpec,
    pub series: ScadaSeries,
    pub labels: Option<Vec<bool>>,
}

/// Matrix run configuration (already resolved: datasets loaded, grids
/// explicit, regimes concrete).
#[derive(Debug, Clone)]
pub struct MatrixConfig {
    pub pairs: Vec<(String, String)>,
    pub weeks: Vec<u32>,
    pub stride: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub resume: bool,
    /// Cells within a pair run concurrently when > 1 (each cell is
    /// internally deterministic, so the parallelism degree never changes
    /// results, only wall time).
    pub parallel_cells: usize,
    pub nbm_config: AutoencoderConfig,
    pub nbm_regime: NbmTrainRegime,
    pub mapper_config: MapperConfig,
    pub mapper_regime: MapperTrainRegime,
    pub loss_weights: LossWeights,
}

fn series_digest(d: &mut Digest, series: &ScadaSeries) {
    d.update(series.turbine_id.as_bytes());
    d.update_i64(series.len() as i64);
    for r in &series.records {
        d.update_i64(r.timestamp);
        for v in r.values {
            d.update_f64(v);
        }
        d.update(&[r.incident as u8]);
    }
}

fn windows_digest<S: Scalar>(windows: &[WindowSample<S>]) -> String {
    let mut d = Digest::new();
    d.update_i64(windows.len() as i64);
    for w in windows {
        d.update_i64(w.start_timestamp);
        d.update(&[w.contains_incident as u8]);
        for v in w.values.data() {
            d.update_f64(v.to_f64_c());
        }
    }
    d.hex()
}

/// Window-level ground-truth labels: a window is anomalous iff any of its
/// records is labeled.
pub fn window_labels<S: Scalar>(
    series: &ScadaSeries,
    labels: &[bool],
    windows: &[WindowSample<S>],
) -> Vec<bool> {
    assert_eq!(series.len(), labels.len());
    let ts: Vec<i64> = series.records.iter().map(|r| r.timestamp).collect();
    windows
        .iter()
        .map(|w| {
            let start = ts.partition_point(|&t| t < w.start_timestamp);
            labels[start..(start + WINDOW_LEN).min(labels.len())]
                .iter()
                .any(|l| *l)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    hash: String,
}

fn manifest_matches(path: &Path, hash: &str) -> bool {
    std::fs::read(path)
        .ok()
        .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
        .map(|m| m.hash == hash)
        .unwrap_or(false)
}

fn write_manifest(path: &Path, hash: &str) -> Result<(), MatrixError> {
    let io_err = |source| MatrixError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let json = serde_json::to_vec(&Manifest { hash: hash.into() }).expect("manifest serializes");
    std::fs::write(path, json).map_err(io_err)
}

/// Scores CSV in the documented `window_start,score,decision` schema.
pub fn write_scores_csv(
    path: &Path,
    starts: &[i64],
    scores: &[f64],
    decisions: &[bool],
) -> Result<(), MatrixError> {
    let mut out = String::from("window_start,score,decision\n");
    for ((ts, s), d) in starts.iter().zip(scores).zip(decisions) {
        out.push_str(&format!(
            "{},{},{}\n",
            crate::data::format_timestamp(*ts),
            s,
            *d as u8
        ));
    }
    let io_err = |source| MatrixError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    std::fs::write(path, out).map_err(io_err)
}

struct PairArtifacts<S: Scalar> {
    source_nbm: NbmModel<S>,
    gt_run: MethodRun,
    target_gt: PreparedDomain<S>,
    source_full: PreparedDomain<S>,
}

/// Runs the full experiment matrix. Completed cells (matching manifest
/// hash) are loaded from disk instead of retrained.
pub fn run_matrix<S: Scalar>(
    cfg: &MatrixConfig,
    data: &BTreeMap<String, TurbineData>,
) -> Result<Vec<CellOutcome>, MatrixError> {
    for (s, t) in &cfg.pairs {
        for id in [s, t] {
            if !data.contains_key(id) {
                return Err(MatrixError::UnknownTurbine(id.clone()));
            }
        }
    }
    let mut outcomes = Vec::new();
    for (source_id, target_id) in &cfg.pairs {
        let pair_art = pair_artifacts::<S>(cfg, data, source_id, target_id)?;
        if cfg.parallel_cells > 1 {
            use rayon::prelude::*;
            let cells: Vec<Result<CellOutcome, MatrixError>> = cfg
                .weeks
                .par_iter()
                .with_max_len(1)
                .map(|&weeks| run_cell(cfg, data, &pair_art, source_id, target_id, weeks))
                .collect();
            for cell in cells {
                outcomes.push(cell?);
            }
        } else {
            for &weeks in &cfg.weeks {
                outcomes.push(run_cell(cfg, data, &pair_art, source_id, target_id, weeks)?);
            }
        }
    }
    Ok(outcomes)
}

fn base_hash(cfg: &MatrixConfig, data: &BTreeMap<String, TurbineData>, ids: &[&str]) -> Digest {
    let mut d = Digest::new();
    d.update_i64(cfg.seed as i64);
    d.update_i64(cfg.stride as i64);
    d.update(
        serde_json::to_string(&(
            &cfg.nbm_config,
            &cfg.nbm_regime,
            &cfg.mapper_config,
            &cfg.mapper_regime,
            &cfg.loss_weights,
        ))
        .expect("config serializes")
        .as_bytes(),
    );
    for id in ids {
        series_digest(&mut d, &data[&id.to_string()].series);
    }
    d
}

fn pair_artifacts<S: Scalar>(
    cfg: &MatrixConfig,
    data: &BTreeMap<String, TurbineData>,
    source_id: &str,
    target_id: &str,
) -> Result<PairArtifacts<S>, MatrixError> {
    let source = &data[source_id];
    let target = &data[target_id];
    let norm = source_norm_stats(&source.series, &source.spec)?;
    let source_full: PreparedDomain<S> =
        prepare_domain(&source.series, &source.spec, &norm, None, cfg.stride)?;
    let target_gt: PreparedDomain<S> =
        prepare_domain(&target.series, &target.spec, &norm, None, cfg.stride)?;

    let pair_dir = cfg.out_dir.join("pairs").join(format!("{source_id}__{target_id}"));
    let hash = base_hash(cfg, data, &[source_id, target_id]).hex();
    let manifest = pair_dir.join("manifest.json");
    let source_path = pair_dir.join("source.nbm.json");
    let gt_path = pair_dir.join("ground_truth.nbm.json");

    let (source_nbm, gt_nbm) = if cfg.resume
        && manifest_matches(&manifest, &hash)
        && source_path.exists()
        && gt_path.exists()
    {
        (NbmModel::<S>::load(&source_path)?, NbmModel::<S>::load(&gt_path)?)
    } else {
        let mut regime = cfg.nbm_regime.clone();
        regime.seed = child_seed(cfg.seed, &format!("nbm-source:{source_id}"));
        regime.patience = patience_for(source_full.train_val_records, source_full.train_val_records);
        let source_nbm = NbmModel::<S>::train(
            &cfg.nbm_config,
            &norm,
            &source_full.train,
            &source_full.validation,
            &regime,
            source_id,
            None,
        )?;
        let mut regime = cfg.nbm_regime.clone();
        regime.seed = child_seed(cfg.seed, &format!("nbm-gt:{source_id}:{target_id}"));
        regime.patience = patience_for(target_gt.train_val_records, target_gt.train_val_records);
        let gt_nbm = NbmModel::<S>::train(
            &cfg.nbm_config,
            &norm,
            &target_gt.train,
            &target_gt.validation,
            &regime,
            target_id,
            None,
        )?;
        source_nbm.save(&source_path)?;
        gt_nbm.save(&gt_path)?;
        write_manifest(&manifest, &hash)?;
        (source_nbm, gt_nbm)
    };

    // ground-truth decisions on the fixed test windows
    assert!(gt_nbm.meta.scarcity_weeks.is_none(), "ground truth never runs under scarcity");
    let gt_scores = gt_nbm.score_windows(&target_gt.test);
    let mut gt_run = MethodRun::new(
        MethodId::GroundTruth,
        source_id,
        target_id,
        None,
        gt_nbm.threshold,
        gt_scores,
    )?;
    if let Some(labels) = &target.labels {
        let win_labels = window_labels(&target.series, labels, &target_gt.test);
        gt_run.label_report = Some(f1_vs_ground_truth(&win_labels, &gt_run.decisions)?);
    }
    let starts: Vec<i64> = target_gt.test.iter().map(|w| w.start_timestamp).collect();
    write_scores_csv(
        &pair_dir.join("scores_ground_truth.csv"),
        &starts,
        &gt_run.scores,
        &gt_run.decisions,
    )?;

    Ok(PairArtifacts {
        source_nbm,
        gt_run,
        target_gt,
        source_full,
    })
}

fn run_cell<S: Scalar>(
    cfg: &MatrixConfig,
    data: &BTreeMap<String, TurbineData>,
    pair_art: &PairArtifacts<S>,
    source_id: &str,
    target_id: &str,
    weeks: u32,
) -> Result<CellOutcome, MatrixError> {
    let cell_dir = cfg
        .out_dir
        .join("cells")
        .join(format!("{source_id}__{target_id}__w{weeks}"));
    let mut d = base_hash(cfg, data, &[source_id, target_id]);
    d.update_i64(weeks as i64);
    let hash = d.hex();
    let manifest = cell_dir.join("manifest.json");
    let result_path = cell_dir.join("result.json");

    if cfg.resume && manifest_matches(&manifest, &hash) && result_path.exists() {
        let bytes = std::fs::read(&result_path).map_err(|source| MatrixError::Io {
            path: result_path.display().to_string(),
            source,
        })?;
        return serde_json::from_slice(&bytes)
            .map_err(|e| MatrixError::CorruptCell(format!("{}: {e}", result_path.display())));
    }

    let target = &data[target_id];
    let norm = pair_art.source_nbm.norm.clone();
    let scarce: PreparedDomain<S> =
        prepare_domain(&target.series, &target.spec, &norm, Some(weeks), cfg.stride)?;

    // the test set must be identical across scarcity scenarios
    let gt_digest = windows_digest(&pair_art.target_gt.test);
    if windows_digest(&scarce.test) != gt_digest {
        return Err(MatrixError::TestWindowsDiverged(target_id.into()));
    }
    let test = &pair_art.target_gt.test;
    let starts: Vec<i64> = test.iter().map(|w| w.start_timestamp).collect();
    let incidents: Vec<bool> = test.iter().map(|w| w.contains_incident).collect();
    let win_labels = target
        .labels
        .as_ref()
        .map(|labels| window_labels(&target.series, labels, test));

    let full_records = pair_art.target_gt.train_val_records;
    let scarce_records = scarce.train_val_records;

    // scarce-only NBM
    let mut regime = cfg.nbm_regime.clone();
    regime.seed = child_seed(cfg.seed, &format!("nbm-scarce:{source_id}:{target_id}:w{weeks}"));
    regime.patience = patience_for(scarce_records, full_records);
    let scarce_nbm = NbmModel::<S>::train(
        &cfg.nbm_config,
        &norm,
        &scarce.train,
        &scarce.validation,
        &regime,
        target_id,
        Some(weeks),
    )?;
    scarce_nbm.save(&cell_dir.join("scarce.nbm.json"))?;
    let scarce_run = MethodRun::new(
        MethodId::Scarce,
        source_id,
        target_id,
        Some(weeks),
        scarce_nbm.threshold,
        scarce_nbm.score_windows(test),
    )?;

    // fine-tuned source NBM
    let mut regime = cfg.nbm_regime.clone();
    regime.seed = child_seed(cfg.seed, &format!("nbm-ft:{source_id}:{target_id}:w{weeks}"));
    regime.patience = patience_for(scarce_records, full_records);
    let ft_nbm = pair_art.source_nbm.fine_tune(
        &scarce.train,
        &scarce.validation,
        &regime,
        target_id,
        Some(weeks),
    )?;
    ft_nbm.save(&cell_dir.join("finetune.nbm.json"))?;
    let ft_run = MethodRun::new(
        MethodId::FineTune,
        source_id,
        target_id,
        Some(weeks),
        ft_nbm.threshold,
        ft_nbm.score_windows(test),
    )?;

    // domain mapper
    let targets = MaskTargets::new(&norm, data[source_id].spec.rated_power_kw, target.spec.rated_power_kw);
    let mut mapper_regime = cfg.mapper_regime.clone();
    mapper_regime.seed = child_seed(cfg.seed, &format!("mapper:{source_id}:{target_id}:w{weeks}"));
    let mut pair = MapperPair::<S>::build(
        &cfg.mapper_config,
        cfg.loss_weights,
        targets,
        mapper_regime.seed,
        source_id,
        target_id,
    )
    .map_err(MatrixError::Assembly)?;
    pair.meta.scarcity_weeks = Some(weeks);
    let (pair, train_log) = train_mapper(
        pair,
        &pair_art.source_full.train,
        &scarce.train,
        &scarce.validation,
        &pair_art.source_nbm,
        &mapper_regime,
    )?;
    pair.save(&cell_dir.join("mapper.json"))?;
    train_log
        .write_csv(&cell_dir.join("mapper_train_log.csv"))
        .map_err(|source| MatrixError::Io {
            path: cell_dir.join("mapper_train_log.csv").display().to_string(),
            source,
        })?;
    // threshold from the method's own validation data: mapped scarce
    // validation windows scored by the source NBM
    let mapped_val = pair.map_to_source(&scarce.validation);
    let dm_threshold = compute_threshold(&pair_art.source_nbm.score_windows(&mapped_val))?;
    let mapped_test = pair.map_to_source(test);
    let dm_run = MethodRun::new(
        MethodId::DomainMap,
        source_id,
        target_id,
        Some(weeks),
        dm_threshold,
        pair_art.source_nbm.score_windows(&mapped_test),
    )?;

    // reports vs ground truth (+ labels when present)
    let mut runs = vec![pair_art.gt_run.clone(), scarce_run, ft_run, dm_run];
    for run in &mut runs {
        if run.method != MethodId::GroundTruth {
            run.report = Some(f1_vs_ground_truth(&pair_art.gt_run.decisions, &run.decisions)?);
        }
        if let Some(labels) = &win_labels {
            run.label_report = Some(f1_vs_ground_truth(labels, &run.decisions)?);
        }
        write_scores_csv(
            &cell_dir.join(format!("scores_{}.csv", run.method.as_str())),
            &starts,
            &run.scores,
            &run.decisions,
        )?;
    }

    let outcome = CellOutcome {
        source_id: source_id.into(),
        target_id: target_id.into(),
        weeks,
        window_starts: starts,
        window_incidents: incidents,
        test_windows_digest: gt_digest,
        runs,
    };
    let json = serde_json::to_vec(&outcome).expect("outcome serializes");
    std::fs::write(&result_path, &json).map_err(|source| MatrixError::Io {
        path: result_path.display().to_string(),
        source,
    })?;
    write_manifest(&manifest, &hash)?;
    Ok(outcome)
}

/// Normalized test windows of a series under source-domain statistics,
/// without any filtering (diagnostics and plots).
pub fn raw_test_windows<S: Scalar>(
    series: &ScadaSeries,
    norm: &crate::data::NormalizationStats,
    stride: usize,
) -> Result<Vec<WindowSample<S>>, MatrixError> {
    let split = split_70_30_30(series)?;
    Ok(extract_windows(&normalize(&split.test, norm), stride))
}
