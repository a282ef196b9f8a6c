//! Chronological 70-30-30 splitting and scarcity scenarios.
//!
//! The test set is the chronologically last 30% of records; the remaining
//! block is split 70/30 into train and validation. A scarcity scenario of
//! `k` weeks keeps only the `k * 1008` records immediately preceding the
//! (unchanged) test set and re-applies the 70/30 proportion inside them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{ScadaSeries, RECORDS_PER_WEEK};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("series of {0} records is too short to split (need at least 10)")]
    TooShort(usize),
    #[error("scarcity weeks must be in 1..=8, got {0}")]
    BadWeeks(u32),
    #[error("scarcity of {weeks} weeks needs {needed} train+validation records, have {available}")]
    InsufficientRecords {
        weeks: u32,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: ScadaSeries,
    pub validation: ScadaSeries,
    pub test: ScadaSeries,
}

/// Round-half-up fraction of a count.
fn round_frac(n: usize, frac: f64) -> usize {
    (n as f64 * frac + 0.5).floor() as usize
}

/// Split a series into train / validation / test per the 70-30-30 scheme.
pub fn split_70_30_30(series: &ScadaSeries) -> Result<DatasetSplit, SplitError> {
    let n = series.len();
    if n < 10 {
        return Err(SplitError::TooShort(n));
    }
    let n_test = round_frac(n, 0.30);
    let remaining = n - n_test;
    let n_train = round_frac(remaining, 0.70);
    let n_val = remaining - n_train;
    debug_assert!(n_train > 0 && n_val > 0 && n_test > 0);
    Ok(DatasetSplit {
        train: series.slice(0..n_train),
        validation: series.slice(n_train..remaining),
        test: series.slice(remaining..n),
    })
}

/// Apply a data scarcity scenario of `weeks` in 1..=8.
///
/// The new train+validation block is the `weeks * 1008` records (by count,
/// not calendar) immediately preceding the test set; the test set is
/// unchanged.
pub fn apply_scarcity(split: &DatasetSplit, weeks: u32) -> Result<DatasetSplit, SplitError> {
    if !(1..=8).contains(&weeks) {
        return Err(SplitError::BadWeeks(weeks));
    }
    let needed = weeks as usize * RECORDS_PER_WEEK;
    let mut pool = split.train.records.clone();
    pool.extend(split.validation.records.iter().cloned());
    if pool.len() < needed {
        return Err(SplitError::InsufficientRecords {
            weeks,
            needed,
            available: pool.len(),
        });
    }
    let block = pool.split_off(pool.len() - needed);
    let n_train = round_frac(needed, 0.70);
    let (train_recs, val_recs) = block.split_at(n_train);
    Ok(DatasetSplit {
        train: ScadaSeries::new(split.train.turbine_id.clone(), train_recs.to_vec()),
        validation: ScadaSeries::new(split.train.turbine_id.clone(), val_recs.to_vec()),
        test: split.test.clone(),
    })
}
