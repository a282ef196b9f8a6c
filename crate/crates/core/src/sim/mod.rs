//! Deterministic synthetic SCADA simulator with ground-truth fault labels.
//!
//! Stands in for proprietary field data so every downstream claim is
//! testable. No aeroelastic fidelity is attempted: the healthy signal is a
//! mean-reverting wind process with daily and multi-week modulation, a
//! smooth saturating power curve, and first-order thermal lags. All
//! randomness flows from a single per-spec seed through named streams, so
//! adding a fault never perturbs the healthy signal.

mod faults;

pub use faults::{inject_faults, FaultInjection, FaultKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::data::types::{Channel, ScadaRecord, ScadaSeries, TurbineSpec, N_CHANNELS, RECORDS_PER_WEEK, STEP_SECONDS};
use crate::rng::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulator spec: {0}")]
    BadSpec(String),
    #[error("n_records must be >= 1")]
    NoRecords,
    #[error("fault window [{start}, {end}) outside series span")]
    FaultOutOfSpan { start: i64, end: i64 },
    #[error("fault has start >= end ({start} >= {end})")]
    EmptyFault { start: i64, end: i64 },
    #[error("fault magnitude must be > 0, got {0}")]
    BadMagnitude(f64),
    #[error("overlapping faults of conflicting kinds at [{0}, {1})")]
    ConflictingFaults(i64, i64),
    #[error("power derating magnitude must be in (0, 1), got {0}")]
    BadDeratingFraction(f64),
}

/// Full parameterization of one synthetic turbine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTurbineSpec {
    pub turbine_id: String,
    /// Rated power C_D in kW (field turbines range roughly 800-3050 kW).
    pub rated_power_kw: f64,
    pub rated_wind_speed: f64,
    pub cut_in: f64,
    pub cut_out: f64,
    pub rated_rotor_rpm: f64,
    /// First-order thermal lag, in 10-minute timesteps.
    pub thermal_time_constant: f64,
    /// Steady-state temperature rise above ambient at rated power, degC.
    pub stator_temp_gain: f64,
    pub rotor_temp_gain: f64,
    pub ambient_mean: f64,
    pub ambient_daily_amplitude: f64,
    pub ambient_season_amplitude: f64,
    /// Mean of the wind process, m/s.
    pub wind_mean: f64,
    /// Std of the per-step wind innovation, m/s.
    pub wind_volatility: f64,
    /// Mean-reversion rate per step, in (0, 1].
    pub wind_reversion: f64,
    pub wind_daily_amplitude: f64,
    /// Amplitude of the multi-week wind regime cycle, m/s.
    pub wind_regime_amplitude: f64,
    /// Shared period of the wind regime and ambient season cycles, weeks.
    pub regime_period_weeks: f64,
    pub regime_phase: f64,
    /// Scale of the intra-interval min/max spread, m/s.
    pub wind_spread: f64,
    /// Multiplicative power noise sigma in partial load (fades to zero at
    /// rated so the rated state stays exact).
    pub power_noise: f64,
    /// Additive temperature noise per step, degC.
    pub temp_noise: f64,
    pub start_timestamp: i64,
    pub seed: u64,
}

impl SimTurbineSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::BadSpec(msg));
        if !(self.rated_power_kw > 0.0) {
            return bad(format!("rated power must be > 0, got {}", self.rated_power_kw));
        }
        if !(self.cut_in < self.rated_wind_speed && self.rated_wind_speed < self.cut_out) {
            return bad(format!(
                "need cut_in < rated wind speed < cut_out, got {} / {} / {}",
                self.cut_in, self.rated_wind_speed, self.cut_out
            ));
        }
        if !(self.thermal_time_constant > 0.0) {
            return bad("thermal time constant must be > 0".into());
        }
        if !(self.wind_reversion > 0.0 && self.wind_reversion <= 1.0) {
            return bad(format!("wind reversion must be in (0, 1], got {}", self.wind_reversion));
        }
        if !(self.rated_rotor_rpm > 0.0) {
            return bad("rated rotor rpm must be > 0".into());
        }
        if self.start_timestamp % STEP_SECONDS != 0 {
            return bad(format!("start timestamp {} not on 10-minute grid", self.start_timestamp));
        }
        for (name, v) in [
            ("wind_volatility", self.wind_volatility),
            ("wind_spread", self.wind_spread),
            ("power_noise", self.power_noise),
            ("temp_noise", self.temp_noise),
            ("wind_daily_amplitude", self.wind_daily_amplitude),
            ("wind_regime_amplitude", self.wind_regime_amplitude),
        ] {
            if v < 0.0 {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }

    /// Rated-capacity view consumed by the data pipeline.
    pub fn turbine_spec(&self) -> TurbineSpec {
        TurbineSpec {
            turbine_id: self.turbine_id.clone(),
            rated_power_kw: self.rated_power_kw,
            rated_wind_speed: self.rated_wind_speed,
        }
    }

    /// A 2 MW-class preset. The multi-week wind regime is phased so that a
    /// calm spell sits immediately before the test split of a 14-week run,
    /// making short scarcity windows genuinely unrepresentative.
    pub fn preset_source(turbine_id: impl Into<String>, seed: u64) -> Self {
        Self {
            turbine_id: turbine_id.into(),
            rated_power_kw: 2000.0,
            rated_wind_speed: 10.5,
            cut_in: 3.25,
            cut_out: 26.0,
            rated_rotor_rpm: 16.0,
            thermal_time_constant: 12.0,
            stator_temp_gain: 20.0,
            rotor_temp_gain: 16.0,
            ambient_mean: 11.0,
            ambient_daily_amplitude: 3.0,
            ambient_season_amplitude: 3.5,
            wind_mean: 6.4,
            wind_volatility: 0.45,
            wind_reversion: 0.12,
            wind_daily_amplitude: 1.6,
            wind_regime_amplitude: 3.0,
            regime_period_weeks: 6.0,
            regime_phase: 1.78,
            wind_spread: 0.35,
            power_noise: 0.035,
            temp_noise: 0.35,
            start_timestamp: 1_577_836_800, // 2020-01-01T00:00:00Z
            seed,
        }
    }

    /// An 850 kW-class preset with different thermal behavior and speeds;
    /// shares the regime phasing of [`SimTurbineSpec::preset_source`].
    pub fn preset_target(turbine_id: impl Into<String>, seed: u64) -> Self {
        Self {
            turbine_id: turbine_id.into(),
            rated_power_kw: 850.0,
            rated_wind_speed: 10.0,
            cut_in: 3.0,
            cut_out: 25.0,
            rated_rotor_rpm: 26.0,
            thermal_time_constant: 8.0,
            stator_temp_gain: 26.0,
            rotor_temp_gain: 21.0,
            ambient_mean: 9.0,
            ambient_daily_amplitude: 3.5,
            ambient_season_amplitude: 3.0,
            wind_mean: 6.2,
            wind_volatility: 0.42,
            wind_reversion: 0.12,
            wind_daily_amplitude: 1.7,
            wind_regime_amplitude: 2.9,
            regime_period_weeks: 6.0,
            regime_phase: 1.78,
            wind_spread: 0.3,
            power_noise: 0.035,
            temp_noise: 0.35,
            start_timestamp: 1_577_836_800,
            seed,
        }
    }
}

const STEPS_PER_DAY: f64 = 144.0;

/// Standard normal via Box-Muller (keeps the dependency set small and the
/// draw sequence fully under our control).
fn normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

struct Curves<'a>(&'a SimTurbineSpec);

impl Curves<'_> {
    /// Smooth cubic-to-flat power curve, exactly 0 below cut-in and exactly
    /// C_D from rated wind speed up to cut-out.
    fn power(&self, v: f64) -> f64 {
        let s = self.0;
        if v < s.cut_in || v >= s.cut_out {
            0.0
        } else if v >= s.rated_wind_speed {
            s.rated_power_kw
        } else {
            s.rated_power_kw * smoothstep((v - s.cut_in) / (s.rated_wind_speed - s.cut_in))
        }
    }

    /// Rotor speed: zero below cut-in, then a continuous monotone power law
    /// up to the rated speed, flat after. Continuity at cut-in matters: a
    /// jump there would make near-cut-in windows irreducibly unpredictable.
    fn rotor(&self, v: f64) -> f64 {
        let s = self.0;
        if v < s.cut_in || v >= s.cut_out {
            0.0
        } else if v >= s.rated_wind_speed {
            s.rated_rotor_rpm
        } else {
            let x = (v - s.cut_in) / (s.rated_wind_speed - s.cut_in);
            s.rated_rotor_rpm * x.powf(1.2)
        }
    }

    /// Noise fade: full noise deep in partial load, exactly zero at rated
    /// and beyond so saturated states stay bit-exact.
    fn fade(&self, v: f64) -> f64 {
        let s = self.0;
        if v >= s.rated_wind_speed || v < s.cut_in {
            0.0
        } else {
            ((s.rated_wind_speed - v) / (s.rated_wind_speed - s.cut_in))
                .clamp(0.0, 1.0)
                .sqrt()
        }
    }
}

/// Generate a healthy SCADA series of `n_records` ten-minute measurements.
pub fn simulate(spec: &SimTurbineSpec, n_records: usize) -> Result<ScadaSeries, SimError> {
    spec.validate()?;
    if n_records == 0 {
        return Err(SimError::NoRecords);
    }
    let mut wind_rng = stream_rng(spec.seed, "wind");
    let mut spread_rng = stream_rng(spec.seed, "spread");
    let mut power_rng = stream_rng(spec.seed, "power_noise");
    let mut rotor_rng = stream_rng(spec.seed, "rotor_noise");
    let mut temp_rng = stream_rng(spec.seed, "temp_noise");

    let curves = Curves(spec);
    let period_steps = spec.regime_period_weeks * RECORDS_PER_WEEK as f64;
    let wind_target = |t: f64| {
        spec.wind_mean
            + spec.wind_daily_amplitude * (std::f64::consts::TAU * t / STEPS_PER_DAY).sin()
            + spec.wind_regime_amplitude
                * (std::f64::consts::TAU * t / period_steps + spec.regime_phase).sin()
    };
    let ambient = |t: f64| {
        spec.ambient_mean
            + spec.ambient_daily_amplitude
                * (std::f64::consts::TAU * t / STEPS_PER_DAY - 1.0).sin()
            + spec.ambient_season_amplitude
                * (std::f64::consts::TAU * t / period_steps + spec.regime_phase + 2.2).sin()
    };

    let mut wind = wind_target(0.0).max(0.0);
    let p0 = curves.power(wind) / spec.rated_power_kw;
    let mut stator_t = ambient(0.0) + spec.stator_temp_gain * p0;
    let mut rotor_t = ambient(0.0) + spec.rotor_temp_gain * p0;
    let tau_s = spec.thermal_time_constant;
    let tau_r = spec.thermal_time_constant * 1.4;

    let mut records = Vec::with_capacity(n_records);
    for i in 0..n_records {
        let t = i as f64;
        // wind process; innovations are clamped so healthy data has no
        // isolated single-record outliers
        let wind_step = normal(&mut wind_rng).clamp(-2.5, 2.5);
        wind += spec.wind_reversion * (wind_target(t) - wind) + spec.wind_volatility * wind_step;
        wind = wind.max(0.0);
        let spread_lo = normal(&mut spread_rng).abs().min(2.2) * spec.wind_spread;
        let spread_hi = normal(&mut spread_rng).abs().min(2.2) * spec.wind_spread;
        let w_min = (wind - spread_lo).max(0.0);
        let w_max = wind + spread_hi;

        // shared multiplicative noise keeps each triplet ordered
        let fade = curves.fade(wind);
        let eta_p = (normal(&mut power_rng) * spec.power_noise).clamp(-3.0 * spec.power_noise, 3.0 * spec.power_noise);
        let eta_r = (normal(&mut rotor_rng) * spec.power_noise).clamp(-3.0 * spec.power_noise, 3.0 * spec.power_noise);
        let p_factor = 1.0 + eta_p * fade;
        let r_factor = 1.0 + eta_r * fade;

        let (p_min, p_mean, p_max, r_min, r_mean, r_max) = if wind >= spec.cut_out {
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        } else {
            (
                curves.power(w_min) * p_factor,
                curves.power(wind) * p_factor,
                curves.power(w_max.min(spec.cut_out - 1e-9)) * p_factor,
                curves.rotor(w_min) * r_factor,
                curves.rotor(wind) * r_factor,
                curves.rotor(w_max.min(spec.cut_out - 1e-9)) * r_factor,
            )
        };

        // first-order thermal lags driven by load and ambient
        let amb = ambient(t);
        let p_frac = p_mean / spec.rated_power_kw;
        stator_t += (amb + spec.stator_temp_gain * p_frac - stator_t) / tau_s
            + spec.temp_noise * normal(&mut temp_rng).clamp(-2.5, 2.5);
        rotor_t += (amb + spec.rotor_temp_gain * p_frac - rotor_t) / tau_r
            + spec.temp_noise * normal(&mut temp_rng).clamp(-2.5, 2.5);

        let mut values = [0.0; N_CHANNELS];
        values[Channel::WindMin.index()] = w_min;
        values[Channel::WindMean.index()] = wind;
        values[Channel::WindMax.index()] = w_max;
        values[Channel::RotorMin.index()] = r_min;
        values[Channel::RotorMean.index()] = r_mean;
        values[Channel::RotorMax.index()] = r_max;
        values[Channel::PowerMin.index()] = p_min;
        values[Channel::PowerMean.index()] = p_mean;
        values[Channel::PowerMax.index()] = p_max;
        values[Channel::StatorTemp.index()] = stator_t;
        values[Channel::RotorTemp.index()] = rotor_t;

        records.push(ScadaRecord {
            timestamp: spec.start_timestamp + i as i64 * STEP_SECONDS,
            values,
            incident: false,
        });
    }
    Ok(ScadaSeries::new(spec.turbine_id.clone(), records))
}
