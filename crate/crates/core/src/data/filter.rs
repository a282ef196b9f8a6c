//! Normal-operation filtering for training and validation data: incident
//! log exclusion, a rated-power curtailment rule, and Mahalanobis-distance
//! outlier removal. Test sets are never filtered.

use thiserror::Error;

use crate::stats::{chi2_quantile, MultivariateStats, StatsError};

use super::types::{Channel, ScadaSeries, TurbineSpec, N_CHANNELS};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("cannot fit filtering statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("no records survive incident/curtailment filtering")]
    NothingLeft,
}

/// Squared-distance cutoff: chi-square 0.999 quantile at 11 degrees of freedom.
pub fn mahalanobis_cutoff_sq() -> f64 {
    chi2_quantile(0.999, N_CHANNELS)
}

/// Curtailment heuristic: wind above rated but power clearly below capacity.
fn is_curtailed(record: &super::types::ScadaRecord, spec: &TurbineSpec) -> bool {
    record.value(Channel::WindMean) > spec.rated_wind_speed
        && record.value(Channel::PowerMean) < 0.95 * spec.rated_power_kw
}

/// Remove incident-flagged and curtailed records.
pub fn filter_incidents_and_curtailment(series: &ScadaSeries, spec: &TurbineSpec) -> ScadaSeries {
    ScadaSeries {
        turbine_id: series.turbine_id.clone(),
        records: series
            .records
            .iter()
            .filter(|r| !r.incident && !is_curtailed(r, spec))
            .cloned()
            .collect(),
    }
}

/// Fit the multivariate statistics used by the Mahalanobis rule.
///
/// Fit on training data only, after incident and curtailment removal.
pub fn fit_filter_stats(train: &ScadaSeries, spec: &TurbineSpec) -> Result<MultivariateStats, FilterError> {
    let clean = filter_incidents_and_curtailment(train, spec);
    if clean.is_empty() {
        return Err(FilterError::NothingLeft);
    }
    let rows: Vec<Vec<f64>> = clean.records.iter().map(|r| r.values.to_vec()).collect();
    Ok(MultivariateStats::fit(&rows, N_CHANNELS)?)
}

/// Full normal-operation filter: drops incident-flagged records, curtailment
/// per the rated-power rule, and Mahalanobis outliers beyond the 0.999
/// chi-square quantile. Apply to train/validation series only.
pub fn filter_normal(
    series: &ScadaSeries,
    spec: &TurbineSpec,
    stats: &MultivariateStats,
) -> ScadaSeries {
    let cutoff = mahalanobis_cutoff_sq();
    ScadaSeries {
        turbine_id: series.turbine_id.clone(),
        records: series
            .records
            .iter()
            .filter(|r| {
                !r.incident && !is_curtailed(r, spec) && stats.mahalanobis_sq(&r.values) <= cutoff
            })
            .cloned()
            .collect(),
    }
}
