//! Core SCADA domain types: the 11-channel measurement record, turbine
//! specifications, series containers, and UTC timestamp handling on the
//! 10-minute grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of SCADA channels per record.
pub const N_CHANNELS: usize = 11;
/// Records per 12-hour window (72 ten-minute steps).
pub const WINDOW_LEN: usize = 72;
/// Seconds between consecutive records.
pub const STEP_SECONDS: i64 = 600;
/// Ten-minute records in one week (6 * 24 * 7).
pub const RECORDS_PER_WEEK: usize = 1008;

/// Fixed channel ordering used everywhere: window rows, CSV columns,
/// normalization statistics and masks all index channels this way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    WindMin,
    WindMean,
    WindMax,
    RotorMin,
    RotorMean,
    RotorMax,
    PowerMin,
    PowerMean,
    PowerMax,
    StatorTemp,
    RotorTemp,
}

impl Channel {
    pub const ALL: [Channel; N_CHANNELS] = [
        Channel::WindMin,
        Channel::WindMean,
        Channel::WindMax,
        Channel::RotorMin,
        Channel::RotorMean,
        Channel::RotorMax,
        Channel::PowerMin,
        Channel::PowerMean,
        Channel::PowerMax,
        Channel::StatorTemp,
        Channel::RotorTemp,
    ];

    /// Channels checked by the zero-state mask (idle turbine).
    pub const ZERO_STATE: [Channel; 6] = [
        Channel::RotorMin,
        Channel::RotorMean,
        Channel::RotorMax,
        Channel::PowerMin,
        Channel::PowerMean,
        Channel::PowerMax,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn csv_name(self) -> &'static str {
        match self {
            Channel::WindMin => "ws_min",
            Channel::WindMean => "ws_mean",
            Channel::WindMax => "ws_max",
            Channel::RotorMin => "rs_min",
            Channel::RotorMean => "rs_mean",
            Channel::RotorMax => "rs_max",
            Channel::PowerMin => "p_min",
            Channel::PowerMean => "p_mean",
            Channel::PowerMax => "p_max",
            Channel::StatorTemp => "stator_t",
            Channel::RotorTemp => "rotor_t",
        }
    }
}

/// The four physically grouped channel sets used by anomaly augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureGroup {
    Wind,
    Rotor,
    Power,
    Temperature,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Wind,
        FeatureGroup::Rotor,
        FeatureGroup::Power,
        FeatureGroup::Temperature,
    ];

    pub fn channels(self) -> &'static [Channel] {
        match self {
            FeatureGroup::Wind => &[Channel::WindMin, Channel::WindMean, Channel::WindMax],
            FeatureGroup::Rotor => &[Channel::RotorMin, Channel::RotorMean, Channel::RotorMax],
            FeatureGroup::Power => &[Channel::PowerMin, Channel::PowerMean, Channel::PowerMax],
            FeatureGroup::Temperature => &[Channel::StatorTemp, Channel::RotorTemp],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("{triplet} triplet violates min <= mean <= max ({min} / {mean} / {max})")]
    TripletOrder {
        triplet: &'static str,
        min: f64,
        mean: f64,
        max: f64,
    },
    #[error("negative {what}: {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("timestamp {0} is not on the 10-minute grid")]
    OffGrid(i64),
    #[error("non-finite value in channel {0}")]
    NonFinite(&'static str),
}

/// One 10-minute SCADA measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScadaRecord {
    /// Unix seconds, UTC, multiple of 600.
    pub timestamp: i64,
    /// Values in physical units, ordered per [`Channel::ALL`].
    pub values: [f64; N_CHANNELS],
    /// Set when the incident log marks this time frame.
    pub incident: bool,
}

impl ScadaRecord {
    #[inline]
    pub fn value(&self, c: Channel) -> f64 {
        self.values[c.index()]
    }

    #[inline]
    pub fn set_value(&mut self, c: Channel, v: f64) {
        self.values[c.index()] = v;
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.timestamp % STEP_SECONDS != 0 {
            return Err(RecordError::OffGrid(self.timestamp));
        }
        for (c, v) in Channel::ALL.iter().zip(self.values.iter()) {
            if !v.is_finite() {
                return Err(RecordError::NonFinite(c.csv_name()));
            }
        }
        for (name, lo, mid, hi) in [
            ("wind_speed", Channel::WindMin, Channel::WindMean, Channel::WindMax),
            ("rotor_speed", Channel::RotorMin, Channel::RotorMean, Channel::RotorMax),
            ("power", Channel::PowerMin, Channel::PowerMean, Channel::PowerMax),
        ] {
            let (min, mean, max) = (self.value(lo), self.value(mid), self.value(hi));
            if !(min <= mean && mean <= max) {
                return Err(RecordError::TripletOrder {
                    triplet: name,
                    min,
                    mean,
                    max,
                });
            }
        }
        if self.value(Channel::WindMin) < 0.0 {
            return Err(RecordError::Negative {
                what: "wind_speed",
                value: self.value(Channel::WindMin),
            });
        }
        if self.value(Channel::RotorMin) < 0.0 {
            return Err(RecordError::Negative {
                what: "rotor_speed",
                value: self.value(Channel::RotorMin),
            });
        }
        Ok(())
    }
}

/// Rated-capacity description of a turbine, as used by filtering and the
/// rated-power loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineSpec {
    pub turbine_id: String,
    /// Rated power C_D in kW.
    pub rated_power_kw: f64,
    /// Wind speed at which rated power is reached, m/s.
    pub rated_wind_speed: f64,
}

impl TurbineSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rated_power_kw > 0.0) {
            return Err(format!(
                "turbine {}: rated power must be > 0, got {}",
                self.turbine_id, self.rated_power_kw
            ));
        }
        if !(self.rated_wind_speed > 0.0) {
            return Err(format!(
                "turbine {}: rated wind speed must be > 0, got {}",
                self.turbine_id, self.rated_wind_speed
            ));
        }
        Ok(())
    }
}

/// A time-ordered sequence of SCADA records for one turbine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScadaSeries {
    pub turbine_id: String,
    pub records: Vec<ScadaRecord>,
}

impl ScadaSeries {
    pub fn new(turbine_id: impl Into<String>, records: Vec<ScadaRecord>) -> Self {
        Self {
            turbine_id: turbine_id.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks record invariants plus strictly increasing on-grid timestamps.
    pub fn validate(&self) -> Result<(), String> {
        for (i, r) in self.records.iter().enumerate() {
            r.validate().map_err(|e| format!("record {i}: {e}"))?;
        }
        for (i, w) in self.records.windows(2).enumerate() {
            if w[1].timestamp <= w[0].timestamp {
                return Err(format!(
                    "timestamps not strictly increasing at record {}: {} then {}",
                    i + 1,
                    format_timestamp(w[0].timestamp),
                    format_timestamp(w[1].timestamp)
                ));
            }
        }
        Ok(())
    }

    /// Sub-series by record index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ScadaSeries {
        ScadaSeries {
            turbine_id: self.turbine_id.clone(),
            records: self.records[range].to_vec(),
        }
    }
}

// --- UTC timestamp handling (ISO-8601 <-> unix seconds, proleptic Gregorian) ---

fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { y + 1 } else { y }, m, d)
}

/// Parse `YYYY-MM-DDTHH:MM:SSZ` into unix seconds.
pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    let bytes = s.as_bytes();
    let fail = || format!("invalid ISO-8601 UTC timestamp: {s:?}");
    if bytes.len() != 20 || bytes[4] != b'-' || bytes[7] != b'-' || bytes[10] != b'T'
        || bytes[13] != b':' || bytes[16] != b':' || bytes[19] != b'Z'
    {
        return Err(fail());
    }
    let num = |r: std::ops::Range<usize>| -> Result<i64, String> {
        s[r].parse::<i64>().map_err(|_| fail())
    };
    let (y, m, d) = (num(0..4)?, num(5..7)?, num(8..10)?);
    let (hh, mm, ss) = (num(11..13)?, num(14..16)?, num(17..19)?);
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) || hh > 23 || mm > 59 || ss > 59 {
        return Err(fail());
    }
    Ok(days_from_civil(y, m, d) * 86_400 + hh * 3600 + mm * 60 + ss)
}

/// Format unix seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(t: i64) -> String {
    let days = t.div_euclid(86_400);
    let secs = t.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        y,
        m,
        d,
        secs / 3600,
        (secs % 3600) / 60,
        secs % 60
    )
}
