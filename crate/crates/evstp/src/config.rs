//! Experiment configuration file (TOML).
//!
//! ```toml
//! version = 1
//! seed = 1
//! out_dir = "out"
//!
//! [input]
//! trajectories = "fixes.txt"   # or: features = "features.csv"
//!
//! [synthetic]                  # used when no input path is given
//! num_vehicles = 200
//! num_days = 6
//! ```
//!
//! Every other table is optional and falls back to the defaults below.

use std::path::{Path, PathBuf};

use evstp_core::features::{EnergyVariance, ExtractionConfig, SocConfig, NUM_LEVELS};
use evstp_core::spatial_nn::{FeatureSubset, NNTrainConfig};
use evstp_core::temporal_crf::CrfTrainConfig;
use evstp_core::trajectory::DEFAULT_MAX_SPEED;
use evstp_core::{BBox, Day, RegionGrid, RegionId};
use serde::{Deserialize, Serialize};

use crate::dates::{format_day, parse_date};
use crate::error::{Error, Result};
use crate::pipeline::{Settings, SplitPlan};
use crate::synth::{SyntheticFleetConfig, DEFAULT_BBOX, DEFAULT_START_DAY};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Base seed for the synthetic fleet and network initialization.
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub spatial: SpatialConfig,
    #[serde(default)]
    pub temporal: TemporalConfig,
    #[serde(default)]
    pub split: SplitConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Trajectory record file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<PathBuf>,
    /// Previously exported feature table; skips ingest and extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// Log and skip malformed trajectory lines instead of failing.
    #[serde(default)]
    pub skip_malformed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub num_vehicles: usize,
    pub num_days: usize,
    /// Seconds between fixes.
    pub fix_interval: i64,
    pub pattern_strength: f64,
    pub start_date: String,
    /// Defaults to the top-level seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let d = SyntheticFleetConfig::default();
        SyntheticConfig {
            num_vehicles: d.num_vehicles,
            num_days: d.num_days,
            fix_interval: d.fix_interval,
            pattern_strength: d.pattern_strength,
            start_date: format_day(DEFAULT_START_DAY),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// `[lon_min, lat_min, lon_max, lat_max]` in degrees.
    pub bbox: [f64; 4],
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let b = DEFAULT_BBOX;
        GridConfig { bbox: [b.lon_min, b.lat_min, b.lon_max, b.lat_max], rows: 4, cols: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub capacity_kwh: f64,
    /// kWh per km.
    pub consumption_rate: f64,
    /// Clock hour at which every battery is full again.
    pub reset_hour: u8,
    pub energy_variance: EnergyVariance,
    /// Cleaning speed ceiling, m/s.
    pub max_speed: f64,
    pub levels: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let soc = SocConfig::default();
        FeatureConfig {
            capacity_kwh: soc.capacity_kwh,
            consumption_rate: soc.consumption_rate,
            reset_hour: soc.reset_hour,
            energy_variance: EnergyVariance::default(),
            max_speed: DEFAULT_MAX_SPEED,
            levels: NUM_LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialConfig {
    /// Comma-separated feature sets, e.g. "F_D,F_N,F_E".
    pub subset: String,
    pub delta_t: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub online_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub l2: f64,
    pub hourly_retraining: bool,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        let nn = NNTrainConfig::default();
        SpatialConfig {
            subset: FeatureSubset::recommended().to_string(),
            delta_t: nn.delta_t,
            hidden_dim: nn.hidden_dim,
            learning_rate: nn.learning_rate,
            max_epochs: nn.max_epochs,
            online_epochs: nn.online_epochs,
            patience: nn.patience,
            min_delta: nn.min_delta,
            l2: nn.l2,
            hourly_retraining: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        let c = CrfTrainConfig::default();
        TemporalConfig { l2: c.l2, learning_rate: c.learning_rate, max_iters: c.max_iters, tol: c.tol }
    }
}

/// Explicit split; when all three keys are absent the last two days of the
/// data validate and test and the rest train.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_days: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_day: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_day: Option<String>,
    /// Restrict the experiment to these regions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<u16>>,
}

fn date(s: &str) -> Result<Day> {
    parse_date(s).ok_or_else(|| Error::Config(format!("invalid date {s:?}, expected YYYY-MM-DD")))
}

fn core_cfg(e: evstp_core::Error) -> Error {
    Error::Config(e.to_string())
}

impl PipelineConfig {
    /// Minimal config driving the default synthetic fleet.
    pub fn synthetic(seed: u64) -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            seed,
            out_dir: default_out_dir(),
            input: InputConfig::default(),
            synthetic: Some(SyntheticConfig::default()),
            grid: GridConfig::default(),
            features: FeatureConfig::default(),
            spatial: SpatialConfig::default(),
            temporal: TemporalConfig::default(),
            split: SplitConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        let sources = [self.input.trajectories.is_some(), self.input.features.is_some()];
        if sources.iter().filter(|&&s| s).count() > 1 {
            return Err(Error::Config(String::from(
                "give at most one of input.trajectories and input.features",
            )));
        }
        if !sources.contains(&true) && self.synthetic.is_none() {
            return Err(Error::Config(String::from(
                "no input: set input.trajectories, input.features, or a [synthetic] table",
            )));
        }
        // the spatial predictor needs full neighbor sets
        self.grid()?.neighbor_set(RegionId(1)).map_err(core_cfg)?;
        self.extraction().soc.validate().map_err(core_cfg)?;
        if self.features.max_speed.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config(format!("max_speed must be > 0, got {}", self.features.max_speed)));
        }
        if let Some(s) = &self.synthetic {
            self.fleet_config_from(s)?.validate()?;
        }
        self.settings()?.validate()?;
        self.split_plan()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<RegionGrid> {
        let [a, b, c, d] = self.grid.bbox;
        let bbox = BBox::new(a, b, c, d).map_err(core_cfg)?;
        RegionGrid::new(bbox, self.grid.rows, self.grid.cols).map_err(core_cfg)
    }

    pub fn extraction(&self) -> ExtractionConfig {
        ExtractionConfig {
            soc: SocConfig {
                capacity_kwh: self.features.capacity_kwh,
                consumption_rate: self.features.consumption_rate,
                reset_hour: self.features.reset_hour,
            },
            energy_variance: self.features.energy_variance,
        }
    }

    fn fleet_config_from(&self, s: &SyntheticConfig) -> Result<SyntheticFleetConfig> {
        Ok(SyntheticFleetConfig {
            num_vehicles: s.num_vehicles,
            num_days: s.num_days,
            bbox: *self.grid()?.bbox(),
            fix_interval: s.fix_interval,
            rng_seed: s.seed.unwrap_or(self.seed),
            pattern_strength: s.pattern_strength,
            start_day: date(&s.start_date)?,
        })
    }

    /// The synthetic fleet settings, boxed to the grid's bounding box.
    pub fn fleet_config(&self) -> Result<SyntheticFleetConfig> {
        let s = self
            .synthetic
            .as_ref()
            .ok_or_else(|| Error::Config(String::from("config has no [synthetic] table")))?;
        self.fleet_config_from(s)
    }

    pub fn settings(&self) -> Result<Settings> {
        let sp = &self.spatial;
        let subset = FeatureSubset::parse(&sp.subset).map_err(core_cfg)?;
        let nn = NNTrainConfig {
            hidden_dim: sp.hidden_dim,
            learning_rate: sp.learning_rate,
            max_epochs: sp.max_epochs,
            online_epochs: sp.online_epochs,
            patience: sp.patience,
            min_delta: sp.min_delta,
            l2: sp.l2,
            rng_seed: self.seed,
            delta_t: sp.delta_t,
        };
        let t = &self.temporal;
        let crf = CrfTrainConfig {
            l2: t.l2,
            learning_rate: t.learning_rate,
            max_iters: t.max_iters,
            tol: t.tol,
            rng_seed: self.seed,
        };
        Ok(Settings {
            grid: self.grid()?,
            subset,
            nn,
            crf,
            levels: self.features.levels,
            hourly_retraining: sp.hourly_retraining,
            regions: self.split.regions.as_ref().map(|r| r.iter().map(|&k| RegionId(k)).collect()),
        })
    }

    /// The explicit split, or `None` when it should follow the data.
    pub fn split_plan(&self) -> Result<Option<SplitPlan>> {
        let s = &self.split;
        match (&s.train_days, &s.validation_day, &s.test_day) {
            (None, None, None) => Ok(None),
            (Some(train), Some(val), Some(test)) => {
                let train = train.iter().map(|d| date(d)).collect::<Result<Vec<_>>>()?;
                Ok(Some(SplitPlan::new(train, date(val)?, date(test)?)?))
            }
            _ => Err(Error::Config(String::from(
                "split needs all of train_days, validation_day and test_day, or none",
            ))),
        }
    }
}
