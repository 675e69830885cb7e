use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, Method, PfamiParams};
use crate::classifier::{BoostConfig, HyperplaneConfig};
use crate::data::{DistributionSpec, ImageShape, BLOBS, GAUSSIAN_FIELD};
use crate::diffusion::{Activation, LrSchedule, Optimizer, ScheduleParams, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, FprBudget};

pub const PRESETS: [&str; 5] = ["analog-a", "analog-b", "analog-c", "analog-d", "analog-e"];

/// Shift used by the strongly shifted presets.
pub const LARGE_SHIFT: f64 = 0.3;
pub const SMALL_SHIFT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub embed_width: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            embed_width: 16,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub lr_schedule: LrSchedule,
    pub noise_draws: usize,
}

impl TrainSettings {
    pub fn to_train_config(self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            optimizer: self.optimizer,
            lr_schedule: self.lr_schedule,
            noise_draws: self.noise_draws,
        }
    }
}

/// One benchmark setup: member and non-member distributions, sizes and the
/// training regime of its target model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    pub id: String,
    pub member: DistributionSpec,
    pub nonmember: DistributionSpec,
    pub n_train: usize,
    pub n_eval_per_side: usize,
    pub train: TrainSettings,
}

/// A setup written either as a preset name or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetupEntry {
    Preset(String),
    Explicit(SetupConfig),
}

pub fn preset(id: &str) -> Result<SetupConfig> {
    let field = DistributionSpec::new(GAUSSIAN_FIELD).with_param("length_scale", 0.7);
    let overtrained = TrainSettings {
        epochs: 300,
        batch_size: 4,
        learning_rate: 2e-3,
        optimizer: Optimizer::Adam,
        lr_schedule: LrSchedule::Cosine,
        noise_draws: 8,
    };
    let one_pass = TrainSettings {
        epochs: 1,
        noise_draws: 1,
        ..overtrained
    };
    let large = |train, n_train, n_eval| SetupConfig {
        id: id.to_string(),
        member: field.clone(),
        nonmember: field.clone().shifted(LARGE_SHIFT),
        n_train,
        n_eval_per_side: n_eval,
        train,
    };
    let unshifted = |spec: DistributionSpec, delta: f64| SetupConfig {
        id: id.to_string(),
        nonmember: spec.clone().shifted(delta),
        member: spec,
        n_train: 20_000,
        n_eval_per_side: 500,
        train: one_pass,
    };
    Ok(match id {
        "analog-a" => large(overtrained, 64, 32),
        "analog-b" => large(one_pass, 20_000, 500),
        "analog-c" => unshifted(field, 0.0),
        "analog-d" => unshifted(field, SMALL_SHIFT),
        "analog-e" => unshifted(DistributionSpec::new(BLOBS), 0.0),
        other => {
            return Err(Error::config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    })
}

/// An attack given by method id alone or with overrides of its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEntry {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfami: Option<PfamiParams>,
}

/// Which evaluation split classifier attacks are fitted on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitSplit {
    #[default]
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub boost: BoostConfig,
    pub fit_on: FitSplit,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            boost: BoostConfig::default(),
            fit_on: FitSplit::Val,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub image: ImageShape,
    pub schedule: ScheduleParams,
    pub model: ModelConfig,
    pub setups: Vec<SetupEntry>,
    pub attacks: Vec<AttackEntry>,
    /// FPR budgets in percent.
    pub budgets: Vec<f64>,
    pub classifier: ClassifierSettings,
    pub hyperplane: HyperplaneConfig,
    pub eval: EvalOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let steps = 100;
        Self {
            seed: 1,
            image: ImageShape::default(),
            schedule: ScheduleParams::rescaled_linear(steps),
            model: ModelConfig::default(),
            setups: PRESETS.iter().map(|p| SetupEntry::Preset(p.to_string())).collect(),
            attacks: Method::BENCHMARK
                .iter()
                .map(|&method| AttackEntry {
                    method,
                    grid: None,
                    pfami: None,
                })
                .collect(),
            budgets: vec![1.0, 0.1],
            classifier: ClassifierSettings::default(),
            hyperplane: HyperplaneConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.build()?;
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) || !self.model.embed_width.is_multiple_of(2) {
            return Err(Error::config("model needs non-zero hidden widths and an even embedding width"));
        }
        if self.setups.is_empty() {
            return Err(Error::config("no setups configured"));
        }
        let setups = self.resolved_setups()?;
        for (i, s) in setups.iter().enumerate() {
            if setups[..i].iter().any(|o| o.id == s.id) {
                return Err(Error::config(format!("duplicate setup id {}", s.id)));
            }
        }
        for b in &self.budgets {
            FprBudget::new(*b)?;
        }
        for a in &self.attacks {
            self.attack_config(a).validate(self.schedule.steps)?;
        }
        Ok(())
    }

    pub fn resolved_setups(&self) -> Result<Vec<SetupConfig>> {
        self.setups
            .iter()
            .map(|e| match e {
                SetupEntry::Preset(id) => preset(id),
                SetupEntry::Explicit(s) => Ok(s.clone()),
            })
            .collect()
    }

    pub fn setup(&self, id: &str) -> Result<SetupConfig> {
        self.resolved_setups()?
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::config(format!("setup {id:?} is not in the config")))
    }

    pub fn attack_config(&self, entry: &AttackEntry) -> AttackConfig {
        let mut cfg = AttackConfig::default_for(entry.method, self.schedule.steps, self.seed);
        if let Some(g) = &entry.grid {
            cfg.grid = g.clone();
        }
        if let Some(p) = entry.pfami {
            cfg.pfami = p;
        }
        cfg
    }

    /// The configured attack for `method`, or its defaults if unlisted.
    pub fn attack_for(&self, method: Method) -> AttackConfig {
        match self.attacks.iter().find(|a| a.method == method) {
            Some(entry) => self.attack_config(entry),
            None => AttackConfig::default_for(method, self.schedule.steps, self.seed),
        }
    }

    pub fn budgets(&self) -> Result<Vec<FprBudget>> {
        self.budgets.iter().map(|b| FprBudget::new(*b)).collect()
    }
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
