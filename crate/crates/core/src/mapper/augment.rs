//! Anomaly augmentation: every sample in a batch is duplicated, and in the
//! duplicate one randomly chosen feature group is forced to the zero state
//! over a random contiguous span covering 40-100% of the window. Mapper
//! training adds the cycle term on these corrupted batches so anomalous
//! states survive domain translation instead of being "repaired".

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::data::types::{FeatureGroup, N_CHANNELS};
use crate::data::window::WindowSample;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Corrupt one window in place over `[start, start+len)`.
fn corrupt<S: Scalar>(values: &mut Tensor<S>, group: FeatureGroup, start: usize, len: usize, zero_norm: &[f64; N_CHANNELS]) {
    for ch in group.channels() {
        let c = ch.index();
        let z = S::from_f64_c(zero_norm[c]);
        for v in &mut values.row_mut(c)[start..start + len] {
            *v = z;
        }
    }
}

/// Tensor-level augmentation used inside the training loop: returns
/// `[orig_0, corrupted_0, orig_1, corrupted_1, ...]` (batch doubled).
pub fn augment_tensors<S: Scalar>(
    batch: &[&Tensor<S>],
    zero_norm: &[f64; N_CHANNELS],
    rng: &mut ChaCha12Rng,
) -> Vec<Tensor<S>> {
    let mut out = Vec::with_capacity(batch.len() * 2);
    for x in batch {
        let window = x.len();
        let min_len = (0.4 * window as f64).ceil() as usize;
        let group = FeatureGroup::ALL[rng.gen_range(0..FeatureGroup::ALL.len())];
        let len = rng.gen_range(min_len..=window);
        let start = rng.gen_range(0..=window - len);
        let mut dup = (*x).clone();
        corrupt(&mut dup, group, start, len, zero_norm);
        out.push((*x).clone());
        out.push(dup);
    }
    out
}

/// Batch augmentation over window samples; deterministic in `seed`.
pub fn augment_anomalies<S: Scalar>(
    batch: &[WindowSample<S>],
    zero_norm: &[f64; N_CHANNELS],
    seed: u64,
) -> Vec<WindowSample<S>> {
    let mut rng = stream_rng(seed, "augment");
    let refs: Vec<&Tensor<S>> = batch.iter().map(|w| &w.values).collect();
    let tensors = augment_tensors(&refs, zero_norm, &mut rng);
    tensors
        .into_iter()
        .enumerate()
        .map(|(i, values)| WindowSample {
            values,
            start_timestamp: batch[i / 2].start_timestamp,
            contains_incident: batch[i / 2].contains_incident,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::types::{Channel, WINDOW_LEN};

    fn sample(seed: usize) -> WindowSample<f64> {
        WindowSample {
            values: Tensor::from_fn(N_CHANNELS, WINDOW_LEN, |c, t| {
                ((c * 31 + t * 7 + seed) as f64 * 0.11).sin()
            }),
            start_timestamp: seed as i64 * 600,
            contains_incident: false,
        }
    }

    fn zero_norm() -> [f64; N_CHANNELS] {
        [-1.0; N_CHANNELS]
    }

    #[test]
    fn batch_is_doubled_and_originals_untouched() {
        let batch: Vec<WindowSample<f64>> = (0..5).map(sample).collect();
        let before: Vec<WindowSample<f64>> = batch.clone();
        let out = augment_anomalies(&batch, &zero_norm(), 9);
        assert_eq!(out.len(), 10);
        assert_eq!(batch, before, "inputs must not be modified");
        for (i, w) in out.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(w, &batch[i / 2], "even slots are the originals");
            } else {
                assert_ne!(w.values, batch[i / 2].values, "duplicates are corrupted");
            }
        }
    }

    #[test]
    fn corrupted_span_length_is_in_bounds() {
        let batch: Vec<WindowSample<f64>> = (0..40).map(sample).collect();
        let out = augment_anomalies(&batch, &zero_norm(), 11);
        for pair in out.chunks(2) {
            let (orig, dup) = (&pair[0], &pair[1]);
            // count timesteps where any channel was replaced by the zero value
            let mut changed = [false; WINDOW_LEN];
            let mut groups_hit = std::collections::BTreeSet::new();
            for c in 0..N_CHANNELS {
                for (t, ch) in changed.iter_mut().enumerate() {
                    if orig.values.get(c, t) != dup.values.get(c, t) {
                        assert_eq!(dup.values.get(c, t), -1.0, "corruption writes the zero value");
                        *ch = true;
                        groups_hit.insert(match c {
                            0..=2 => "wind",
                            3..=5 => "rotor",
                            6..=8 => "power",
                            _ => "temp",
                        });
                    }
                }
            }
            assert!(groups_hit.len() <= 1, "exactly one feature group per duplicate");
            let n_changed = changed.iter().filter(|c| **c).count();
            // span is contiguous
            let first = changed.iter().position(|c| *c).unwrap();
            let last = WINDOW_LEN - 1 - changed.iter().rev().position(|c| *c).unwrap();
            assert_eq!(last - first + 1, n_changed, "span must be contiguous");
            // changed count can undershoot the drawn span only where the
            // original already equals the zero value; bound from above
            assert!(n_changed <= WINDOW_LEN);
            assert!(n_changed >= 1);
        }
    }

    #[test]
    fn spans_cover_40_to_100_percent() {
        // windows that never contain the zero value let us observe the span exactly
        let batch: Vec<WindowSample<f64>> = (0..60).map(sample).collect();
        let out = augment_anomalies(&batch, &zero_norm(), 13);
        let mut lens = Vec::new();
        for pair in out.chunks(2) {
            let (orig, dup) = (&pair[0], &pair[1]);
            let mut changed = [false; WINDOW_LEN];
            for c in 0..N_CHANNELS {
                for (t, ch) in changed.iter_mut().enumerate() {
                    if orig.values.get(c, t) != dup.values.get(c, t) {
                        *ch = true;
                    }
                }
            }
            lens.push(changed.iter().filter(|c| **c).count());
        }
        let min = *lens.iter().min().unwrap();
        let max = *lens.iter().max().unwrap();
        assert!(min >= (0.4 * WINDOW_LEN as f64).ceil() as usize, "min span {min}");
        assert!(max <= WINDOW_LEN);
    }

    #[test]
    fn fixed_seed_reproduces_choices() {
        let batch: Vec<WindowSample<f64>> = (0..6).map(sample).collect();
        let a = augment_anomalies(&batch, &zero_norm(), 21);
        let b = augment_anomalies(&batch, &zero_norm(), 21);
        assert_eq!(a, b);
        let c = augment_anomalies(&batch, &zero_norm(), 22);
        assert_ne!(a, c);
    }

    #[test]
    fn temperature_group_covers_both_temp_channels() {
        // force many draws; at least one duplicate must corrupt temperatures
        let batch: Vec<WindowSample<f64>>= (0..64).map(sample).collect();
        let out = augment_anomalies(&batch, &zero_norm(), 5);
        let mut saw_temp = false;
        for pair in out.chunks(2) {
            let (orig, dup) = (&pair[0], &pair[1]);
            let st = Channel::StatorTemp.index();
            if (0..WINDOW_LEN).any(|t| orig.values.get(st, t) != dup.values.get(st, t)) {
                saw_temp = true;
            }
        }
        assert!(saw_temp);
    }
}
