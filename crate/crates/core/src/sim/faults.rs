//! Fault injection with per-record ground-truth labels.
//!
//! Three kinds cover the states the mapper must preserve: a thermal drift,
//! a power derating (power/wind mismatch), and a stuck-idle turbine.

use serde::{Deserialize, Serialize};

use crate::data::types::{Channel, ScadaSeries};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Stator temperature ramps up by `magnitude` degC across the window.
    TemperatureDrift,
    /// Power triplet scaled by (1 - magnitude) while wind is unaffected;
    /// magnitude is a fraction in (0, 1).
    PowerDerating,
    /// Turbine reads zero power and zero rotor speed regardless of wind.
    /// `magnitude` is unused but must still be positive.
    IdleStuck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    /// Unix seconds; records with start <= timestamp < end are affected.
    pub start: i64,
    pub end: i64,
    pub kind: FaultKind,
    pub magnitude: f64,
    /// Whether the incident log knows about this fault (sets incident_flag).
    pub logged: bool,
}

impl FaultInjection {
    fn validate(&self, first_ts: i64, last_ts: i64) -> Result<(), SimError> {
        if self.start >= self.end {
            return Err(SimError::EmptyFault {
                start: self.start,
                end: self.end,
            });
        }
        if !(self.magnitude > 0.0) {
            return Err(SimError::BadMagnitude(self.magnitude));
        }
        if self.kind == FaultKind::PowerDerating && self.magnitude >= 1.0 {
            return Err(SimError::BadDeratingFraction(self.magnitude));
        }
        if self.start < first_ts || self.end > last_ts + crate::data::STEP_SECONDS {
            return Err(SimError::FaultOutOfSpan {
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    fn covers(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end
    }
}

/// Apply faults to a healthy series. Returns the altered series and the
/// per-record ground-truth label vector (true exactly where a fault is
/// active). The incident flag is set only for faults with `logged = true`.
pub fn inject_faults(
    series: &ScadaSeries,
    faults: &[FaultInjection],
) -> Result<(ScadaSeries, Vec<bool>), SimError> {
    let mut labels = vec![false; series.len()];
    if faults.is_empty() {
        return Ok((series.clone(), labels));
    }
    let first_ts = series.records.first().map(|r| r.timestamp).unwrap_or(0);
    let last_ts = series.records.last().map(|r| r.timestamp).unwrap_or(0);
    for f in faults {
        f.validate(first_ts, last_ts)?;
    }
    for (i, a) in faults.iter().enumerate() {
        for b in &faults[i + 1..] {
            let overlap = a.start < b.end && b.start < a.end;
            if overlap && a.kind != b.kind {
                return Err(SimError::ConflictingFaults(a.start.max(b.start), a.end.min(b.end)));
            }
        }
    }

    let mut out = series.clone();
    for fault in faults {
        // records covered by this fault, for the ramp denominator
        let covered: Vec<usize> = out
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| fault.covers(r.timestamp))
            .map(|(i, _)| i)
            .collect();
        let span = covered.len();
        for (k, &i) in covered.iter().enumerate() {
            let r = &mut out.records[i];
            labels[i] = true;
            if fault.logged {
                r.incident = true;
            }
            match fault.kind {
                FaultKind::TemperatureDrift => {
                    let ramp = (k + 1) as f64 / span as f64;
                    let v = r.value(Channel::StatorTemp) + fault.magnitude * ramp;
                    r.set_value(Channel::StatorTemp, v);
                }
                FaultKind::PowerDerating => {
                    let factor = 1.0 - fault.magnitude;
                    for c in [Channel::PowerMin, Channel::PowerMean, Channel::PowerMax] {
                        let v = r.value(c) * factor;
                        r.set_value(c, v);
                    }
                }
                FaultKind::IdleStuck => {
                    for c in Channel::ZERO_STATE {
                        r.set_value(c, 0.0);
                    }
                }
            }
        }
    }
    Ok((out, labels))
}
