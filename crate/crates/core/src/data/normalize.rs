//! Min-max normalization onto [-1, 1] using source-domain training
//! statistics. Target-domain data normalized with source statistics may
//! fall outside that range, which is expected and allowed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{Channel, ScadaSeries, N_CHANNELS};

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("empty training series")]
    EmptyTrain,
    #[error("channel {0} is constant over the training set (min == max == {1})")]
    ConstantChannel(&'static str, f64),
}

/// Per-channel min/max in physical units, computed on the source-domain
/// training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: [f64; N_CHANNELS],
    pub max: [f64; N_CHANNELS],
}

impl NormalizationStats {
    /// x' = 2 (x - min) / (max - min) - 1
    #[inline]
    pub fn normalize_value(&self, c: Channel, x: f64) -> f64 {
        let i = c.index();
        2.0 * (x - self.min[i]) / (self.max[i] - self.min[i]) - 1.0
    }

    #[inline]
    pub fn denormalize_value(&self, c: Channel, x: f64) -> f64 {
        let i = c.index();
        (x + 1.0) / 2.0 * (self.max[i] - self.min[i]) + self.min[i]
    }

    /// Normalized image of the raw zero state, per channel. Comparing window
    /// entries against these values with `==` reproduces the raw `x == 0`
    /// test exactly, because both sides go through the same arithmetic.
    pub fn normalized_zero(&self) -> [f64; N_CHANNELS] {
        let mut z = [0.0; N_CHANNELS];
        for (i, c) in Channel::ALL.iter().enumerate() {
            z[i] = self.normalize_value(*c, 0.0);
        }
        z
    }

    /// Normalized image of a rated power value on the mean-power channel.
    pub fn normalized_rated(&self, rated_power_kw: f64) -> f64 {
        self.normalize_value(Channel::PowerMean, rated_power_kw)
    }
}

/// Compute per-channel min/max over the training set.
pub fn compute_norm_stats(train: &ScadaSeries) -> Result<NormalizationStats, NormalizeError> {
    if train.is_empty() {
        return Err(NormalizeError::EmptyTrain);
    }
    let mut min = [f64::INFINITY; N_CHANNELS];
    let mut max = [f64::NEG_INFINITY; N_CHANNELS];
    for r in &train.records {
        for i in 0..N_CHANNELS {
            min[i] = min[i].min(r.values[i]);
            max[i] = max[i].max(r.values[i]);
        }
    }
    for (i, c) in Channel::ALL.iter().enumerate() {
        if !(max[i] > min[i]) {
            return Err(NormalizeError::ConstantChannel(c.csv_name(), min[i]));
        }
    }
    Ok(NormalizationStats { min, max })
}

/// Normalize every channel of a series with the given statistics.
pub fn normalize(series: &ScadaSeries, stats: &NormalizationStats) -> ScadaSeries {
    let mut out = series.clone();
    for r in &mut out.records {
        for (i, c) in Channel::ALL.iter().enumerate() {
            r.values[i] = stats.normalize_value(*c, r.values[i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::testutil::healthy_series;
    use super::*;

    fn simple_stats() -> NormalizationStats {
        let mut min = [0.0; N_CHANNELS];
        let mut max = [100.0; N_CHANNELS];
        min[3] = -10.0;
        max[3] = 10.0;
        NormalizationStats { min, max }
    }

    #[test]
    fn midpoint_maps_to_zero() {
        let s = simple_stats();
        assert_eq!(s.normalize_value(Channel::WindMin, 50.0), 0.0);
    }

    #[test]
    fn out_of_range_values_are_allowed() {
        let s = simple_stats();
        assert_eq!(s.normalize_value(Channel::WindMin, 150.0), 2.0);
    }

    #[test]
    fn min_maps_to_minus_one() {
        let s = simple_stats();
        assert_eq!(s.normalize_value(Channel::WindMin, 0.0), -1.0);
        assert_eq!(s.normalize_value(Channel::RotorMin, -10.0), -1.0);
    }

    #[test]
    fn constant_channel_is_an_error() {
        let mut series = healthy_series(50);
        for r in &mut series.records {
            r.set_value(Channel::StatorTemp, 42.0);
        }
        assert_eq!(
            compute_norm_stats(&series),
            Err(NormalizeError::ConstantChannel("stator_t", 42.0))
        );
    }

    #[test]
    fn per_channel_stats_are_independent() {
        let series = healthy_series(50);
        let stats = compute_norm_stats(&series).unwrap();
        for i in 1..N_CHANNELS {
            // channels differ, so at least some (min, max) pairs must differ
            if stats.min[i] != stats.min[0] || stats.max[i] != stats.max[0] {
                return;
            }
        }
        panic!("all channels produced identical stats");
    }

    proptest::proptest! {
        /// denormalize(normalize(x)) stays within 1e-9 for arbitrary stats.
        #[test]
        fn roundtrip_property(
            mins in proptest::collection::vec(-1000.0f64..1000.0, N_CHANNELS),
            spans in proptest::collection::vec(0.001f64..5000.0, N_CHANNELS),
            xs in proptest::collection::vec(-2000.0f64..2000.0, N_CHANNELS),
        ) {
            let mut min = [0.0; N_CHANNELS];
            let mut max = [0.0; N_CHANNELS];
            for i in 0..N_CHANNELS {
                min[i] = mins[i];
                max[i] = mins[i] + spans[i];
            }
            let stats = NormalizationStats { min, max };
            for (i, c) in Channel::ALL.iter().enumerate() {
                let back = stats.denormalize_value(*c, stats.normalize_value(*c, xs[i]));
                proptest::prop_assert!((back - xs[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn roundtrip_within_1e9() {
        let series = healthy_series(300);
        let stats = compute_norm_stats(&series).unwrap();
        let normalized = normalize(&series, &stats);
        for (orig, norm) in series.records.iter().zip(&normalized.records) {
            for (i, c) in Channel::ALL.iter().enumerate() {
                let back = stats.denormalize_value(*c, norm.values[i]);
                assert!((back - orig.values[i]).abs() < 1e-9);
            }
        }
    }
}
