//! Plain-text `key = value` experiment configs with typed validation.
//!
//! Every key must be consumed by the command reading the file; leftovers are
//! an error so typos fail loudly before any episode runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rendezvous_core::geometry::EnvKind;
use rendezvous_core::plan::PlannerConfig;
use rendezvous_core::predict::PredictionType;
use rendezvous_core::Error;

/// Raw `key = value` pairs from one file, tracking which keys were read.
#[derive(Debug)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    consumed: std::cell::RefCell<Vec<String>>,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if values.insert(key.clone(), value).is_some() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self {
            values,
            consumed: std::cell::RefCell::new(Vec::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key).map(String::as_str);
        if v.is_some() {
            self.consumed.borrow_mut().push(key.to_string());
        }
        v
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Typed lookup; `None` when the key is absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("key '{key}': cannot parse '{v}'"))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, Error> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, Error> {
        self.get(key)?
            .ok_or_else(|| Error::InvalidConfig(format!("missing required key '{key}'")))
    }

    pub fn get_path(&self, key: &str) -> Result<Option<PathBuf>, Error> {
        Ok(self.raw(key).map(PathBuf::from))
    }

    /// Comma-separated integer list.
    pub fn get_u64_list(&self, key: &str) -> Result<Option<Vec<u64>>, Error> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<u64>().map_err(|_| {
                        Error::InvalidConfig(format!("key '{key}': bad integer '{}'", s.trim()))
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, Error> {
        Ok(self
            .get_u64_list(key)?
            .map(|v| v.into_iter().map(|x| x as usize).collect()))
    }

    /// Errors if any key in the file was never read by the command.
    pub fn finish(&self) -> Result<(), Error> {
        let consumed = self.consumed.borrow();
        let stray: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !consumed.iter().any(|c| c == k))
            .collect();
        if stray.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "unknown key(s): {}",
                stray.join(", ")
            )))
        }
    }
}

/// Which planner drives every agent in an evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlannerKind {
    Hpp,
    CentralizedMp,
    CentralizedOa,
    CentralizedRp,
    RrtMp,
    RrtOa,
    RrtCem,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 7] = [
        PlannerKind::Hpp,
        PlannerKind::CentralizedMp,
        PlannerKind::CentralizedOa,
        PlannerKind::CentralizedRp,
        PlannerKind::RrtMp,
        PlannerKind::RrtOa,
        PlannerKind::RrtCem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Hpp => "hpp",
            PlannerKind::CentralizedMp => "centralized_mp",
            PlannerKind::CentralizedOa => "centralized_oa",
            PlannerKind::CentralizedRp => "centralized_rp",
            PlannerKind::RrtMp => "rrt_mp",
            PlannerKind::RrtOa => "rrt_oa",
            PlannerKind::RrtCem => "rrt_cem",
        }
    }

    pub fn uses_models(self) -> bool {
        self == PlannerKind::Hpp
    }

    pub fn uses_cem(self) -> bool {
        matches!(self, PlannerKind::Hpp | PlannerKind::RrtCem)
    }

    pub fn uses_rrt(self) -> bool {
        matches!(
            self,
            PlannerKind::RrtMp | PlannerKind::RrtOa | PlannerKind::RrtCem
        )
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown planner '{s}' (expected one of: {})",
                    PlannerKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// Settings for `collect`.
#[derive(Clone, Debug)]
pub struct CollectConfig {
    pub environment: EnvKind,
    pub trajectories: usize,
    pub steps: usize,
    pub separation: f32,
    pub variants: Vec<PredictionType>,
    pub stride: usize,
    pub seed: u64,
}

impl CollectConfig {
    pub fn from_raw(raw: &RawConfig, seed_override: Option<u64>) -> Result<Self, Error> {
        let environment = raw.get_or("environment", EnvKind::TrainingRandom)?;
        let variants = match raw.get_or("variant", "delta-pose-lidar".to_string())?.as_str() {
            "all" => PredictionType::ALL.to_vec(),
            one => vec![one.parse::<PredictionType>()?],
        };
        let cfg = Self {
            environment,
            trajectories: raw.get_or("trajectories", 50usize)?,
            steps: raw.get_or("steps", 100usize)?,
            separation: raw.get_or("separation", 5.0f32)?,
            variants,
            stride: raw.get_or("stride", 1usize)?,
            seed: seed_override.unwrap_or(raw.get_or("seed", 0u64)?),
        };
        raw.finish()?;
        if cfg.stride == 0 {
            return Err(Error::InvalidConfig("stride must be >= 1".into()));
        }
        Ok(cfg)
    }
}

/// Settings for `train`.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub dataset_self: PathBuf,
    pub dataset_other: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn from_raw(raw: &RawConfig, seed_override: Option<u64>) -> Result<Self, Error> {
        let cfg = Self {
            dataset_self: raw
                .get_path("dataset_self")?
                .ok_or_else(|| Error::InvalidConfig("missing required key 'dataset_self'".into()))?,
            dataset_other: raw.get_path("dataset_other")?.ok_or_else(|| {
                Error::InvalidConfig("missing required key 'dataset_other'".into())
            })?,
            epochs: raw.get_or("epochs", 20usize)?,
            batch_size: raw.get_or("batch_size", 500usize)?,
            learning_rate: raw.get_or("learning_rate", 1e-3f32)?,
            holdout_fraction: raw.get_or("holdout_fraction", 0.1f64)?,
            seed: seed_override.unwrap_or(raw.get_or("seed", 0u64)?),
        };
        raw.finish()?;
        if cfg.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "holdout_fraction must be in (0, 1)".into(),
            ));
        }
        Ok(cfg)
    }
}

/// Settings for `evaluate` (and the base of every ablation setting).
#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub environment: EnvKind,
    pub planner: PlannerKind,
    pub seeds: Vec<u64>,
    pub base_seed: u64,
    pub max_steps: usize,
    pub stationary_steps: usize,
    pub separation: f32,
    pub scan_noise: f32,
    pub pose_noise: f32,
    pub planner_config: PlannerConfig<f32>,
    pub self_model: Option<PathBuf>,
    pub other_model: Option<PathBuf>,
    pub rrt_max_nodes: usize,
    pub rrt_replan_every: usize,
}

impl EvalConfig {
    pub fn from_raw(raw: &RawConfig, seed_override: Option<u64>) -> Result<Self, Error> {
        let cfg = Self::from_raw_open(raw, seed_override)?;
        raw.finish()?;
        Ok(cfg)
    }

    /// Like [`EvalConfig::from_raw`] but leaves the stray-key check to the
    /// caller, so ablation configs can read extra keys from the same file.
    pub fn from_raw_open(raw: &RawConfig, seed_override: Option<u64>) -> Result<Self, Error> {
        let planner: PlannerKind = raw.require("planner")?;
        let environment: EnvKind = raw.require("environment")?;

        let mut pc = PlannerConfig::<f32>::default();
        let cem_keys = [
            "replan_every",
            "horizon",
            "n_samples",
            "n_elites",
            "max_iters",
            "epsilon",
        ];
        if !planner.uses_cem() {
            for key in cem_keys {
                if raw.has(key) {
                    return Err(Error::InvalidConfig(format!(
                        "key '{key}' only applies to hpp or rrt_cem, not {}",
                        planner.name()
                    )));
                }
            }
        }
        pc.replan_every = raw.get_or("replan_every", pc.replan_every)?;
        pc.horizon = raw.get_or("horizon", pc.horizon)?;
        pc.n_samples = raw.get_or("n_samples", pc.n_samples)?;
        pc.n_elites = raw.get_or("n_elites", pc.n_elites)?;
        pc.max_iters = raw.get_or("max_iters", pc.max_iters)?;
        pc.epsilon = raw.get_or("epsilon", pc.epsilon)?;
        pc.rendezvous_d = raw.get_or("rendezvous_d", pc.rendezvous_d)?;
        pc.validate()?;

        let self_model = raw.get_path("self_model")?;
        let other_model = raw.get_path("other_model")?;
        if planner.uses_models() {
            if self_model.is_none() || other_model.is_none() {
                return Err(Error::InvalidConfig(
                    "hpp needs both 'self_model' and 'other_model' paths".into(),
                ));
            }
        } else if self_model.is_some() || other_model.is_some() {
            return Err(Error::InvalidConfig(format!(
                "model paths only apply to hpp, not {}",
                planner.name()
            )));
        }

        if !planner.uses_rrt() {
            for key in ["rrt_max_nodes", "rrt_replan_every"] {
                if raw.has(key) {
                    return Err(Error::InvalidConfig(format!(
                        "key '{key}' only applies to RRT planners, not {}",
                        planner.name()
                    )));
                }
            }
        }

        let cfg = Self {
            environment,
            planner,
            seeds: raw.get_u64_list("seeds")?.unwrap_or((0..10).collect()),
            base_seed: seed_override.unwrap_or(raw.get_or("seed", 0u64)?),
            max_steps: raw.get_or("max_steps", 100usize)?,
            stationary_steps: raw.get_or("stationary_steps", 5usize)?,
            separation: raw.get_or("separation", 5.0f32)?,
            scan_noise: raw.get_or("scan_noise", 0.0f32)?,
            pose_noise: raw.get_or("pose_noise", 0.0f32)?,
            planner_config: pc,
            self_model,
            other_model,
            rrt_max_nodes: raw.get_or(
                "rrt_max_nodes",
                if planner == PlannerKind::RrtCem {
                    600
                } else {
                    5000
                },
            )?,
            rrt_replan_every: raw.get_or("rrt_replan_every", 40usize)?,
        };
        if cfg.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        if cfg.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        Ok(cfg)
    }
}

/// An ablation sweep: the axis plus the base evaluation everything varies
/// around.
#[derive(Clone, Debug)]
pub struct AblateConfig {
    pub kind: AblateKind,
    pub base: EvalConfig,
    pub horizons: Vec<usize>,
    /// Per-variant (self, other) model paths for the prediction-type sweep.
    pub variant_models: Vec<(PredictionType, PathBuf, PathBuf)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblateKind {
    PlanningFrequency,
    PlanningHorizon,
    PredictionType,
    CemParams,
}

impl FromStr for AblateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "planning_frequency" => Ok(AblateKind::PlanningFrequency),
            "planning_horizon" => Ok(AblateKind::PlanningHorizon),
            "prediction_type" => Ok(AblateKind::PredictionType),
            "cem_params" => Ok(AblateKind::CemParams),
            other => Err(Error::InvalidConfig(format!(
                "unknown ablation '{other}' (expected planning_frequency, planning_horizon, \
                 prediction_type, or cem_params)"
            ))),
        }
    }
}

impl AblateConfig {
    pub fn from_raw(
        raw: &RawConfig,
        kind: AblateKind,
        seed_override: Option<u64>,
    ) -> Result<Self, Error> {
        let base = EvalConfig::from_raw_open(raw, seed_override)?;
        if base.planner != PlannerKind::Hpp {
            return Err(Error::InvalidConfig(
                "ablations sweep the hpp planner; set planner = hpp".into(),
            ));
        }
        let horizons = raw
            .get_usize_list("horizons")?
            .unwrap_or_else(|| vec![1, 5, 10]);
        let mut variant_models = Vec::new();
        if kind == AblateKind::PredictionType {
            let dir = raw.get_path("models_dir")?.ok_or_else(|| {
                Error::InvalidConfig(
                    "prediction_type ablation needs 'models_dir' holding \
                     self_<variant>.mlp / other_<variant>.mlp"
                        .into(),
                )
            })?;
            for variant in PredictionType::ALL {
                variant_models.push((
                    variant,
                    dir.join(format!("self_{variant}.mlp")),
                    dir.join(format!("other_{variant}.mlp")),
                ));
            }
        }
        raw.finish()?;
        if horizons.is_empty() || horizons.contains(&0) {
            return Err(Error::InvalidConfig(
                "horizons must be a non-empty list of positive steps".into(),
            ));
        }
        Ok(Self {
            kind,
            base,
            horizons,
            variant_models,
        })
    }
}
