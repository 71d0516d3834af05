//! Experiment configuration: TOML file with flag overrides, every key
//! defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::scheduler::{Policy, PolicyConstants};

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum DataKind {
    Blobs,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    /// Directory holding the four conventional MNIST IDX files.
    pub mnist_dir: PathBuf,
    pub n_per_class: usize,
    pub class_count: usize,
    pub dim: usize,
    pub separation: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kind: DataKind::Blobs,
            mnist_dir: PathBuf::from("data/mnist"),
            n_per_class: 400,
            class_count: 4,
            dim: 8,
            separation: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Hidden layer widths; input and class count come from the dataset.
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![32, 16],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub momentum: f64,
    pub nesterov: bool,
    pub batch_size: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            momentum: 0.9,
            nesterov: true,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum PolicyKind {
    Fixed,
    Warmup,
    Decay,
    /// Policy 1: relative change in IHYLL.
    DynamicChange,
    /// Policy 2: change and value of IHYLL relative to IXY.
    DynamicChangeValue,
    /// Policy 2 applied per layer with that layer's IHY.
    Layerwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// The rate baselines run at; dynamic bounds default to a decade
    /// around it.
    pub desired_lr: f64,
    pub lr_min: Option<f64>,
    pub lr_max: Option<f64>,
    pub epsilon: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Warm-up baseline: epochs of linear growth from lr_min to desired_lr.
    pub warmup_epochs: usize,
    /// Decay baseline: per-epoch multiplier.
    pub decay_rate: f64,
    /// Epochs of value-only tracking engaged by a batch-size change.
    pub value_only_window: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::DynamicChangeValue,
            desired_lr: 0.01,
            lr_min: None,
            lr_max: None,
            epsilon: 0.01,
            gamma1: 0.1,
            gamma2: 0.1,
            gamma3: 0.1,
            warmup_epochs: 5,
            decay_rate: 0.97,
            value_only_window: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub size: usize,
    pub k: usize,
    pub tiling_factor: usize,
    /// Redraw the probe subset each epoch instead of fixing it per run.
    pub redraw_per_epoch: bool,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            size: 1000,
            k: 4,
            tiling_factor: 1,
            redraw_per_epoch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckpointConfig {
    /// Checkpoint every N completed epochs; the final epoch always writes one.
    pub every: usize,
}

impl Default for CheckpointConfig {
    fn default() -> Self {
        CheckpointConfig { every: 5 }
    }
}

/// Mid-run batch-size change directive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSizeChange {
    pub at_epoch: usize,
    pub new_batch_size: usize,
    #[serde(default = "default_window")]
    pub value_only_window: usize,
}

fn default_window() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub optimizer: OptimizerSettings,
    pub policy: PolicyConfig,
    pub probe: ProbeSettings,
    pub checkpoint: CheckpointConfig,
    /// Resume training from this checkpoint instead of a fresh network.
    pub resume_from: Option<PathBuf>,
    pub batch_size_change: Option<BatchSizeChange>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            epochs: 10,
            out_dir: PathBuf::from("runs/out"),
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            optimizer: OptimizerSettings::default(),
            policy: PolicyConfig::default(),
            probe: ProbeSettings::default(),
            checkpoint: CheckpointConfig::default(),
            resume_from: None,
            batch_size_change: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            key: "<config file>".into(),
            reason: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The bounds/gains the dynamic policies run with.
    pub fn constants(&self) -> PolicyConstants {
        let (dmin, dmax) = PolicyConstants::bounds_around(self.policy.desired_lr);
        PolicyConstants {
            lr_min: self.policy.lr_min.unwrap_or(dmin),
            lr_max: self.policy.lr_max.unwrap_or(dmax),
            epsilon: self.policy.epsilon,
            gamma1: self.policy.gamma1,
            gamma2: self.policy.gamma2,
            gamma3: self.policy.gamma3,
        }
    }

    /// The network-wide policy, when the run is not layer-wise.
    pub fn network_policy(&self) -> Option<Policy> {
        let c = self.constants();
        Some(match self.policy.kind {
            PolicyKind::Fixed => Policy::Fixed {
                lr0: self.policy.desired_lr,
            },
            PolicyKind::Warmup => Policy::Warmup {
                lr0: c.lr_min,
                lr_target: self.policy.desired_lr,
                warmup_epochs: self.policy.warmup_epochs,
            },
            PolicyKind::Decay => Policy::Decay {
                lr0: self.policy.desired_lr,
                decay_rate: self.policy.decay_rate,
            },
            PolicyKind::DynamicChange => Policy::DynamicChange,
            PolicyKind::DynamicChangeValue => Policy::DynamicChangeValue,
            PolicyKind::Layerwise => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(config_err("epochs", "must be at least 1"));
        }
        if !(self.policy.desired_lr > 0.0 && self.policy.desired_lr.is_finite()) {
            return Err(config_err(
                "policy.desired_lr",
                format!("must be a positive rate, got {}", self.policy.desired_lr),
            ));
        }
        self.constants()
            .validate()
            .map_err(|e| config_err("policy.lr_min/policy.lr_max", e.to_string()))?;
        if !(self.policy.decay_rate > 0.0 && self.policy.decay_rate <= 1.0) {
            return Err(config_err(
                "policy.decay_rate",
                format!("must lie in (0, 1], got {}", self.policy.decay_rate),
            ));
        }
        if self.policy.warmup_epochs == 0 {
            return Err(config_err("policy.warmup_epochs", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.optimizer.momentum) {
            return Err(config_err(
                "optimizer.momentum",
                format!("must lie in [0, 1), got {}", self.optimizer.momentum),
            ));
        }
        if self.optimizer.batch_size == 0 {
            return Err(config_err("optimizer.batch_size", "must be at least 1"));
        }
        if self.network.hidden.contains(&0) {
            return Err(config_err("network.hidden", "widths must be positive"));
        }
        if self.probe.size == 0 {
            return Err(config_err("probe.size", "must be at least 1"));
        }
        if self.probe.k == 0 {
            return Err(config_err("probe.k", "must be at least 1"));
        }
        if self.probe.k >= self.probe.size {
            return Err(config_err(
                "probe.k",
                format!(
                    "needs k < probe size, got k={} with size={}",
                    self.probe.k, self.probe.size
                ),
            ));
        }
        if self.probe.tiling_factor == 0 {
            return Err(config_err("probe.tiling_factor", "must be at least 1"));
        }
        if self.checkpoint.every == 0 {
            return Err(config_err("checkpoint.every", "must be at least 1"));
        }
        if self.data.kind == DataKind::Blobs {
            if self.data.class_count < 2 {
                return Err(config_err("data.class_count", "need at least two classes"));
            }
            if self.data.dim == 0 {
                return Err(config_err("data.dim", "must be positive"));
            }
            if self.data.dim < 64 && self.data.class_count > (1usize << self.data.dim) {
                return Err(config_err(
                    "data.dim",
                    "too small to give every class a distinct vertex",
                ));
            }
            if self.data.n_per_class < 2 {
                return Err(config_err("data.n_per_class", "need at least 2 per class"));
            }
            if !(self.data.separation.is_finite() && self.data.separation >= 0.0) {
                return Err(config_err("data.separation", "must be finite and >= 0"));
            }
        }
        if let Some(bsc) = &self.batch_size_change {
            if bsc.new_batch_size == 0 {
                return Err(config_err(
                    "batch_size_change.new_batch_size",
                    "must be at least 1",
                ));
            }
            if self.policy.kind == PolicyKind::Layerwise {
                return Err(config_err(
                    "batch_size_change",
                    "not supported together with the layerwise policy",
                ));
            }
            if matches!(
                self.policy.kind,
                PolicyKind::Fixed | PolicyKind::Warmup | PolicyKind::Decay
            ) && bsc.value_only_window > 0
            {
                return Err(config_err(
                    "batch_size_change.value_only_window",
                    "value-only tracking needs a dynamic change-value policy",
                ));
            }
        }
        Ok(())
    }
}
