//! Run configuration: turbine datasets (CSV paths or simulator specs),
//! pair list, scarcity grid, seeds, regime and loss-weight overrides.
//! Seeds are always explicit; nothing defaults to wall-clock state.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{load_scada, parse_timestamp, CsvError, TurbineSpec};
use crate::eval::{MatrixConfig, TurbineData};
use crate::mapper::{LossWeights, MapperConfig, MapperTrainRegime};
use crate::nbm::{AutoencoderConfig, NbmTrainRegime};
use crate::rng::{child_seed, Digest};
use crate::sim::{inject_faults, simulate, FaultInjection, FaultKind, SimError, SimTurbineSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultSection {
    /// ISO-8601 UTC timestamps.
    pub start: String,
    pub end: String,
    pub kind: FaultKind,
    pub magnitude: f64,
    #[serde(default)]
    pub logged: bool,
}

impl FaultSection {
    fn resolve(&self) -> Result<FaultInjection, ConfigError> {
        Ok(FaultInjection {
            start: parse_timestamp(&self.start).map_err(ConfigError::Invalid)?,
            end: parse_timestamp(&self.end).map_err(ConfigError::Invalid)?,
            kind: self.kind,
            magnitude: self.magnitude,
            logged: self.logged,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSection {
    /// "source" (2 MW class) or "target" (850 kW class) baseline.
    #[serde(default = "default_preset")]
    pub preset: String,
    pub n_records: usize,
    /// Simulator seed; derived from the run seed and turbine id if absent.
    pub seed: Option<u64>,
    #[serde(default)]
    pub faults: Vec<FaultSection>,
    /// Field-level overrides of the preset.
    pub rated_power_kw: Option<f64>,
    pub rated_wind_speed: Option<f64>,
    pub cut_in: Option<f64>,
    pub wind_mean: Option<f64>,
    pub wind_regime_amplitude: Option<f64>,
    pub regime_phase: Option<f64>,
}

fn default_preset() -> String {
    "source".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TurbineSection {
    pub id: String,
    /// Load measurements from this CSV (requires the rated fields below).
    pub csv: Option<PathBuf>,
    pub labels_csv: Option<PathBuf>,
    pub rated_power_kw: Option<f64>,
    pub rated_wind_speed: Option<f64>,
    /// Or generate the dataset with the built-in simulator.
    pub simulate: Option<SimSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSection {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NbmSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub grad_chunks: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MapperSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_iters: Option<usize>,
    pub patience_iters: Option<usize>,
    pub eval_every: Option<usize>,
    pub ema_decay: Option<f64>,
    pub grad_chunks: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LossSection {
    pub lambda_cyc: Option<f64>,
    pub lambda_zero: Option<f64>,
    pub lambda_rated: Option<f64>,
    pub lambda_qp: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Master seed; every component derives its own named substream.
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Matrix cells trained concurrently; 1 (the default) is sequential.
    #[serde(default = "default_parallel_cells")]
    pub parallel_cells: usize,
    #[serde(default)]
    pub weeks: Vec<u32>,
    pub turbines: Vec<TurbineSection>,
    #[serde(default)]
    pub pairs: Vec<PairSection>,
    #[serde(default)]
    pub nbm: NbmSection,
    #[serde(default)]
    pub mapper: MapperSection,
    #[serde(default)]
    pub loss_weights: LossSection,
}

fn default_stride() -> usize {
    1
}

fn default_parallel_cells() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.turbines.is_empty() {
            return Err(ConfigError::Invalid("no turbines configured".into()));
        }
        if self.stride == 0 {
            return Err(ConfigError::Invalid("stride must be >= 1".into()));
        }
        if self.parallel_cells == 0 {
            return Err(ConfigError::Invalid("parallel_cells must be >= 1".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for t in &self.turbines {
            if !ids.insert(t.id.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate turbine id {:?}", t.id)));
            }
            match (&t.csv, &t.simulate) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Invalid(format!(
                        "turbine {:?} has both csv and simulate sections",
                        t.id
                    )))
                }
                (None, None) => {
                    return Err(ConfigError::Invalid(format!(
                        "turbine {:?} needs either csv or simulate",
                        t.id
                    )))
                }
                (Some(_), None) => {
                    if t.rated_power_kw.is_none() || t.rated_wind_speed.is_none() {
                        return Err(ConfigError::Invalid(format!(
                            "turbine {:?} loads a CSV and must state rated_power_kw and rated_wind_speed",
                            t.id
                        )));
                    }
                }
                (None, Some(sim)) => {
                    if !matches!(sim.preset.as_str(), "source" | "target") {
                        return Err(ConfigError::Invalid(format!(
                            "turbine {:?}: unknown simulator preset {:?} (use \"source\" or \"target\")",
                            t.id, sim.preset
                        )));
                    }
                    if sim.n_records == 0 {
                        return Err(ConfigError::Invalid(format!(
                            "turbine {:?}: simulate.n_records must be >= 1",
                            t.id
                        )));
                    }
                }
            }
        }
        for p in &self.pairs {
            for id in [&p.source, &p.target] {
                if !ids.contains(id.as_str()) {
                    return Err(ConfigError::Invalid(format!(
                        "pair references unknown turbine {id:?}"
                    )));
                }
            }
            if p.source == p.target {
                return Err(ConfigError::Invalid(format!(
                    "pair maps turbine {:?} onto itself",
                    p.source
                )));
            }
        }
        for w in &self.weeks {
            if !(1..=8).contains(w) {
                return Err(ConfigError::Invalid(format!(
                    "scarcity weeks must be in 1..=8, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// Stable run identifier derived from the configuration content.
    pub fn run_id(&self) -> String {
        let mut d = Digest::new();
        d.update(serde_json::to_string(self).expect("config serializes").as_bytes());
        format!("run-{}", d.hex())
    }

    /// Directory all artifacts of this configuration land in.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.run_id())
    }

    pub fn resolve_sim_spec(&self, section: &TurbineSection) -> Result<SimTurbineSpec, ConfigError> {
        let sim = section
            .simulate
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid(format!("turbine {:?} is not simulated", section.id)))?;
        let seed = sim.seed.unwrap_or_else(|| child_seed(self.seed, &format!("sim:{}", section.id)));
        let mut spec = match sim.preset.as_str() {
            "target" => SimTurbineSpec::preset_target(section.id.clone(), seed),
            _ => SimTurbineSpec::preset_source(section.id.clone(), seed),
        };
        if let Some(v) = sim.rated_power_kw {
            spec.rated_power_kw = v;
        }
        if let Some(v) = sim.rated_wind_speed {
            spec.rated_wind_speed = v;
        }
        if let Some(v) = sim.cut_in {
            spec.cut_in = v;
        }
        if let Some(v) = sim.wind_mean {
            spec.wind_mean = v;
        }
        if let Some(v) = sim.wind_regime_amplitude {
            spec.wind_regime_amplitude = v;
        }
        if let Some(v) = sim.regime_phase {
            spec.regime_phase = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Load or simulate every configured turbine. Relative CSV paths are
    /// resolved against `base_dir`.
    pub fn load_turbines(&self, base_dir: &Path) -> Result<BTreeMap<String, TurbineData>, ConfigError> {
        let mut out = BTreeMap::new();
        for t in &self.turbines {
            let data = if let Some(csv) = &t.csv {
                let spec = TurbineSpec {
                    turbine_id: t.id.clone(),
                    rated_power_kw: t.rated_power_kw.expect("validated"),
                    rated_wind_speed: t.rated_wind_speed.expect("validated"),
                };
                let path = if csv.is_absolute() { csv.clone() } else { base_dir.join(csv) };
                let series = load_scada(&path, &spec)?;
                let labels = match &t.labels_csv {
                    Some(lp) => {
                        let lp = if lp.is_absolute() { lp.clone() } else { base_dir.join(lp) };
                        let (ts, labels) = crate::data::csv::load_labels(&lp)?;
                        if ts.len() != series.len() {
                            return Err(ConfigError::Invalid(format!(
                                "label sidecar for {:?} has {} rows, series has {}",
                                t.id,
                                ts.len(),
                                series.len()
                            )));
                        }
                        Some(labels)
                    }
                    None => None,
                };
                TurbineData { spec, series, labels }
            } else {
                let sim_spec = self.resolve_sim_spec(t)?;
                let healthy = simulate(&sim_spec, t.simulate.as_ref().expect("validated").n_records)?;
                let faults: Vec<FaultInjection> = t
                    .simulate
                    .as_ref()
                    .expect("validated")
                    .faults
                    .iter()
                    .map(|f| f.resolve())
                    .collect::<Result<_, _>>()?;
                let (series, labels) = inject_faults(&healthy, &faults)?;
                TurbineData {
                    spec: sim_spec.turbine_spec(),
                    series,
                    labels: Some(labels),
                }
            };
            out.insert(t.id.clone(), data);
        }
        Ok(out)
    }

    pub fn nbm_regime(&self) -> NbmTrainRegime {
        let d = NbmTrainRegime::default();
        NbmTrainRegime {
            learning_rate: self.nbm.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.nbm.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.nbm.max_epochs.unwrap_or(d.max_epochs),
            grad_chunks: self.nbm.grad_chunks.unwrap_or(d.grad_chunks),
            ..d
        }
    }

    pub fn mapper_regime(&self) -> MapperTrainRegime {
        let d = MapperTrainRegime::default();
        MapperTrainRegime {
            learning_rate: self.mapper.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.mapper.batch_size.unwrap_or(d.batch_size),
            max_iters: self.mapper.max_iters.unwrap_or(d.max_iters),
            patience_iters: self.mapper.patience_iters.unwrap_or(d.patience_iters),
            eval_every: self.mapper.eval_every.unwrap_or(d.eval_every),
            ema_decay: self.mapper.ema_decay.unwrap_or(d.ema_decay),
            grad_chunks: self.mapper.grad_chunks.unwrap_or(d.grad_chunks),
            ..d
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        let d = LossWeights::default();
        LossWeights {
            lambda_cyc: self.loss_weights.lambda_cyc.unwrap_or(d.lambda_cyc),
            lambda_zero: self.loss_weights.lambda_zero.unwrap_or(d.lambda_zero),
            lambda_rated: self.loss_weights.lambda_rated.unwrap_or(d.lambda_rated),
            lambda_qp: self.loss_weights.lambda_qp.unwrap_or(d.lambda_qp),
        }
    }

    /// Assemble the matrix configuration rooted at the run directory.
    pub fn matrix_config(&self, resume: bool) -> MatrixConfig {
        MatrixConfig {
            pairs: self.pairs.iter().map(|p| (p.source.clone(), p.target.clone())).collect(),
            weeks: self.weeks.clone(),
            stride: self.stride,
            seed: self.seed,
            out_dir: self.run_dir(),
            resume,
            parallel_cells: self.parallel_cells.max(1),
            nbm_config: AutoencoderConfig::default(),
            nbm_regime: self.nbm_regime(),
            mapper_config: MapperConfig::default(),
            mapper_regime: self.mapper_regime(),
            loss_weights: self.loss_weights(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
        seed = 42
        out_dir = "runs"
        stride = 6
        weeks = [2, 8]

        [[turbines]]
        id = "WT-A"
        [turbines.simulate]
        preset = "source"
        n_records = 14112

        [[turbines]]
        id = "WT-B"
        [turbines.simulate]
        preset = "target"
        n_records = 14112
        faults = [
            { start = "2020-03-20T00:00:00Z", end = "2020-03-22T00:00:00Z", kind = "idle-stuck", magnitude = 1.0 },
        ]

        [[pairs]]
        source = "WT-A"
        target = "WT-B"

        [mapper]
        batch_size = 64
        max_iters = 10
    "#;

    #[test]
    fn demo_config_parses_and_resolves() {
        let cfg = RunConfig::from_toml_str(DEMO).unwrap();
        assert_eq!(cfg.weeks, vec![2, 8]);
        assert_eq!(cfg.mapper_regime().batch_size, 64);
        assert_eq!(cfg.mapper_regime().learning_rate, 2e-4);
        assert_eq!(cfg.nbm_regime().learning_rate, 0.003);
        assert_eq!(cfg.loss_weights().lambda_cyc, 30.0);
        let spec = cfg.resolve_sim_spec(&cfg.turbines[1]).unwrap();
        assert_eq!(spec.rated_power_kw, 850.0);
        // derived simulator seed is stable
        let spec2 = cfg.resolve_sim_spec(&cfg.turbines[1]).unwrap();
        assert_eq!(spec.seed, spec2.seed);
    }

    #[test]
    fn run_id_tracks_content() {
        let a = RunConfig::from_toml_str(DEMO).unwrap();
        let mut b = RunConfig::from_toml_str(DEMO).unwrap();
        assert_eq!(a.run_id(), b.run_id());
        b.seed = 43;
        assert_ne!(a.run_id(), b.run_id());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for (snippet, needle) in [
            ("seed = 1\nout_dir = \"o\"\nturbines = []", "no turbines"),
            (
                "seed = 1\nout_dir = \"o\"\n[[turbines]]\nid = \"X\"",
                "either csv or simulate",
            ),
            (
                "seed = 1\nout_dir = \"o\"\nweeks = [9]\n[[turbines]]\nid = \"X\"\n[turbines.simulate]\nn_records = 10",
                "weeks must be in 1..=8",
            ),
            (
                "seed = 1\nout_dir = \"o\"\n[[turbines]]\nid = \"X\"\ncsv = \"x.csv\"",
                "rated_power_kw",
            ),
            (
                "seed = 1\nout_dir = \"o\"\n[[pairs]]\nsource = \"X\"\ntarget = \"Y\"\n[[turbines]]\nid = \"X\"\n[turbines.simulate]\nn_records = 10",
                "unknown turbine",
            ),
        ] {
            let err = RunConfig::from_toml_str(snippet).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains(needle), "{snippet:?} -> {msg}");
        }
    }

    #[test]
    fn seeds_are_explicit() {
        // a config without a seed fails to parse rather than defaulting
        let err = RunConfig::from_toml_str("out_dir = \"o\"\n[[turbines]]\nid = \"X\"").unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn simulated_turbines_load_with_labels() {
        let cfg = RunConfig::from_toml_str(DEMO).unwrap();
        let data = cfg.load_turbines(Path::new(".")).unwrap();
        assert_eq!(data.len(), 2);
        let b = &data["WT-B"];
        assert_eq!(b.series.len(), 14112);
        let labels = b.labels.as_ref().unwrap();
        let n_true = labels.iter().filter(|l| **l).count();
        assert_eq!(n_true, 2 * 144, "two days of idle-stuck fault records");
    }
}
