//! Sliding-window extraction of 12-hour samples (11 channels x 72 steps).
//! Windows must cover 72 gap-free consecutive records; windows that would
//! span a time gap are skipped rather than interpolated.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::types::{ScadaSeries, N_CHANNELS, STEP_SECONDS, WINDOW_LEN};

/// One model-ready sample: a channels x time matrix in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample<S> {
    pub values: Tensor<S>,
    pub start_timestamp: i64,
    pub contains_incident: bool,
}

/// Extract all gap-free windows with the given stride (in records).
pub fn extract_windows<S: Scalar>(series: &ScadaSeries, stride: usize) -> Vec<WindowSample<S>> {
    assert!(stride >= 1, "stride must be >= 1");
    let records = &series.records;
    let mut out = Vec::new();
    if records.len() < WINDOW_LEN {
        return out;
    }
    // Maximal gap-free segments, then slide inside each.
    let mut seg_start = 0;
    let mut i = 1;
    loop {
        let seg_ended = i == records.len()
            || records[i].timestamp - records[i - 1].timestamp != STEP_SECONDS;
        if seg_ended {
            let seg = &records[seg_start..i];
            let mut w = 0;
            while w + WINDOW_LEN <= seg.len() {
                let slice = &seg[w..w + WINDOW_LEN];
                let values = Tensor::from_fn(N_CHANNELS, WINDOW_LEN, |c, t| {
                    S::from_f64_c(slice[t].values[c])
                });
                out.push(WindowSample {
                    values,
                    start_timestamp: slice[0].timestamp,
                    contains_incident: slice.iter().any(|r| r.incident),
                });
                w += stride;
            }
            if i == records.len() {
                break;
            }
            seg_start = i;
        }
        i += 1;
    }
    out
}
