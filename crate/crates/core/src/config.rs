//! Run configuration: one JSON document with a flat section per command.
//! Command-line flags override values read from the file.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "simulate": { "preset": "three-group", "n": 5000 },
//!   "train": { "hidden": [16], "learning_rate": 0.01, "epochs": 50 },
//!   "cv": { "folds": 5 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::neural::{Activation, NetworkSpec, TrainConfig};
use crate::simulate::{Censoring, CohortSpec, DEFAULT_ADMIN_HORIZON, DEFAULT_CENSOR_SCALE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub preset: String,
    pub n: usize,
    pub censor_scale: f64,
    pub admin_horizon: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            preset: "three-group".to_string(),
            n: 5000,
            censor_scale: DEFAULT_CENSOR_SCALE,
            admin_horizon: DEFAULT_ADMIN_HORIZON,
        }
    }
}

impl SimulateSection {
    pub fn cohort_spec(&self, seed: u64) -> Result<CohortSpec> {
        let mut spec = match self.preset.as_str() {
            "three-group" => CohortSpec::three_group(self.n, seed),
            other => return Err(Error::InvalidSpec(format!("unknown preset `{other}`"))),
        };
        spec.censoring = Censoring {
            censor_scale: self.censor_scale,
            admin_horizon: self.admin_horizon,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub clusters: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub penalty_weight: f64,
    pub prob_floor: f64,
    pub variance_ridge: f64,
}

impl Default for TrainSection {
    /// The reference synthetic setup: one hidden layer of 16 units, three
    /// clusters, lr 0.01, 50 epochs, batches of 32, decay 0.01, λ = 0.1.
    fn default() -> Self {
        let loss = LossConfig::default();
        let train = TrainConfig::default();
        Self {
            hidden: vec![16],
            clusters: 3,
            activation: Activation::Relu,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            weight_decay: train.weight_decay,
            penalty_weight: loss.penalty_weight,
            prob_floor: loss.prob_floor,
            variance_ridge: loss.variance_ridge,
        }
    }
}

impl TrainSection {
    /// Settings used for the 8×8 digits cohort: 64 → 32 → 3, smaller steps,
    /// larger batches and more epochs than the synthetic setup.
    pub fn digits_reference() -> Self {
        Self {
            hidden: vec![32],
            learning_rate: 0.0005,
            epochs: 300,
            batch_size: 128,
            ..Self::default()
        }
    }

    pub fn network_spec(&self, inputs: usize, seed: u64) -> Result<NetworkSpec> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(inputs);
        sizes.extend(&self.hidden);
        sizes.push(self.clusters);
        let spec = NetworkSpec::new(sizes, seed).with_activation(self.activation);
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let cfg = LossConfig {
            penalty_weight: self.penalty_weight,
            prob_floor: self.prob_floor,
            variance_ridge: self.variance_ridge,
        };
        cfg.validate(self.clusters)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSection {
    pub folds: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DigitsSection {
    /// Seed of the digit → group permutation; the run seed when absent.
    pub grouping_seed: Option<u64>,
    pub censor_scale: f64,
    pub admin_horizon: f64,
}

impl Default for DigitsSection {
    fn default() -> Self {
        Self {
            grouping_seed: None,
            censor_scale: DEFAULT_CENSOR_SCALE,
            admin_horizon: DEFAULT_ADMIN_HORIZON,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateSection,
    pub train: TrainSection,
    pub cv: CvSection,
    pub digits: DigitsSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
