//! SCADA data pipeline: ingestion, splitting, scarcity scenarios, normal
//! behavior filtering, normalization, and window extraction.
//!
//! All operations are pure functions of their inputs and safe to call
//! concurrently on distinct series.

pub mod csv;
pub mod filter;
pub mod normalize;
pub mod split;
pub mod types;
pub mod window;

pub use csv::{load_scada, parse_scada_csv, write_labels, write_scada, CsvError, CSV_HEADER};
pub use filter::{
    filter_incidents_and_curtailment, filter_normal, fit_filter_stats, mahalanobis_cutoff_sq,
    FilterError,
};
pub use normalize::{compute_norm_stats, normalize, NormalizationStats, NormalizeError};
pub use split::{apply_scarcity, split_70_30_30, DatasetSplit, SplitError};
pub use types::{
    format_timestamp, parse_timestamp, Channel, FeatureGroup, ScadaRecord, ScadaSeries,
    TurbineSpec, N_CHANNELS, RECORDS_PER_WEEK, STEP_SECONDS, WINDOW_LEN,
};
pub use window::{extract_windows, WindowSample};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

/// Window datasets for one turbine under one scenario, normalized with
/// source-domain statistics and ready for model training.
#[derive(Debug, Clone)]
pub struct PreparedDomain<S> {
    pub turbine_id: String,
    pub train: Vec<WindowSample<S>>,
    pub validation: Vec<WindowSample<S>>,
    /// Unfiltered test windows; identical across scarcity scenarios.
    pub test: Vec<WindowSample<S>>,
    pub scarcity_weeks: Option<u32>,
    /// Train+validation record count before filtering (the scenario's
    /// dataset-size measure, e.g. 1008 per scarcity week).
    pub train_val_records: usize,
}

/// Run the full preparation for one turbine: split, optional scarcity,
/// normal-behavior filtering of train/validation (never test), normalization
/// with the provided source-domain statistics, and windowing.
pub fn prepare_domain<S: crate::scalar::Scalar>(
    series: &ScadaSeries,
    turbine: &TurbineSpec,
    norm: &NormalizationStats,
    scarcity_weeks: Option<u32>,
    stride: usize,
) -> Result<PreparedDomain<S>, PipelineError> {
    let mut split = split_70_30_30(series)?;
    if let Some(weeks) = scarcity_weeks {
        split = apply_scarcity(&split, weeks)?;
    }
    let train_val_records = split.train.len() + split.validation.len();
    let stats = fit_filter_stats(&split.train, turbine)?;
    let train = filter_normal(&split.train, turbine, &stats);
    let validation = filter_normal(&split.validation, turbine, &stats);
    Ok(PreparedDomain {
        turbine_id: series.turbine_id.clone(),
        train: extract_windows(&normalize(&train, norm), stride),
        validation: extract_windows(&normalize(&validation, norm), stride),
        test: extract_windows(&normalize(&split.test, norm), stride),
        scarcity_weeks,
        train_val_records,
    })
}

/// Normalization statistics for a pair come from the source turbine's
/// filtered training set (no scarcity scenario applied).
pub fn source_norm_stats(
    source_series: &ScadaSeries,
    source_turbine: &TurbineSpec,
) -> Result<NormalizationStats, PipelineError> {
    let split = split_70_30_30(source_series)?;
    let stats = fit_filter_stats(&split.train, source_turbine)?;
    let train = filter_normal(&split.train, source_turbine, &stats);
    Ok(compute_norm_stats(&train)?)
}
