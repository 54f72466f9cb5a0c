//! Training configuration and its flat `key = value` text form.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::data::{CapMode, ForecastTask};
use super::{PipelineError, Result};
use crate::numcore::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingMode {
    /// Minimise `λ·ELBO + (1−λ)·MSE` over all parameters.
    Joint,
    /// Pretrain the VAE on its ELBO, then train the basin model with the
    /// VAE frozen.
    Staged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: ForecastTask,
    pub lambda: f64,
    pub epochs: usize,
    /// Windows per batch (per group-batch with hierarchical batching).
    pub batch_size: usize,
    pub seed: u64,
    pub use_rg: bool,
    pub use_hn: bool,
    pub use_embeddings: bool,
    pub raw_forcings: bool,
    pub latent_dim: usize,
    pub vae_hidden: usize,
    pub hidden_dim: usize,
    pub kernel_width: usize,
    pub blocks: usize,
    /// Extra past days of forcings in each VAE input row.
    pub lookback: usize,
    pub kl_weight: f64,
    pub mode: TrainingMode,
    pub stage1_epochs: usize,
    /// Head emits `t_out` values instead of one rolled step.
    pub direct_multi_output: bool,
    pub split: (f64, f64, f64),
    pub cap_percentile: f64,
    pub cap_mode: CapMode,
    pub impute: bool,
    pub patience: usize,
    /// Training windows drawn per epoch; 0 uses all of them.
    pub windows_per_epoch: usize,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: ForecastTask::SHORT,
            lambda: 0.5,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            use_rg: true,
            use_hn: true,
            use_embeddings: true,
            raw_forcings: true,
            latent_dim: 8,
            vae_hidden: 32,
            hidden_dim: 32,
            kernel_width: 3,
            blocks: 2,
            lookback: 0,
            kl_weight: 1.0,
            mode: TrainingMode::Joint,
            stage1_epochs: 10,
            direct_multi_output: false,
            split: (0.7, 0.1, 0.2),
            cap_percentile: 99.0,
            cap_mode: CapMode::PerStation,
            impute: false,
            patience: 10,
            windows_per_epoch: 0,
            optimizer: AdamConfig::default(),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "task",
    "lambda",
    "epochs",
    "batch_size",
    "seed",
    "use_rg",
    "use_hn",
    "use_embeddings",
    "raw_forcings",
    "latent_dim",
    "vae_hidden",
    "hidden_dim",
    "kernel_width",
    "blocks",
    "lookback",
    "kl_weight",
    "mode",
    "stage1_epochs",
    "direct_multi_output",
    "split_train",
    "split_val",
    "split_test",
    "cap_percentile",
    "cap_mode",
    "impute",
    "patience",
    "windows_per_epoch",
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
];

fn bad(key: &str, value: &str) -> PipelineError {
    PipelineError::ConfigInvalid(format!("bad value {value:?} for key {key}"))
}

fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, v))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, v)),
    }
}

impl TrainConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "task" => self.task = ForecastTask::parse(v).ok_or_else(|| bad(key, v))?,
            "lambda" => self.lambda = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "use_rg" => self.use_rg = flag(key, v)?,
            "use_hn" => self.use_hn = flag(key, v)?,
            "use_embeddings" => self.use_embeddings = flag(key, v)?,
            "raw_forcings" => self.raw_forcings = flag(key, v)?,
            "latent_dim" => self.latent_dim = num(key, v)?,
            "vae_hidden" => self.vae_hidden = num(key, v)?,
            "hidden_dim" => self.hidden_dim = num(key, v)?,
            "kernel_width" => self.kernel_width = num(key, v)?,
            "blocks" => self.blocks = num(key, v)?,
            "lookback" => self.lookback = num(key, v)?,
            "kl_weight" => self.kl_weight = num(key, v)?,
            "mode" => {
                self.mode = match v {
                    "joint" => TrainingMode::Joint,
                    "staged" => TrainingMode::Staged,
                    _ => return Err(bad(key, v)),
                }
            }
            "stage1_epochs" => self.stage1_epochs = num(key, v)?,
            "direct_multi_output" => self.direct_multi_output = flag(key, v)?,
            "split_train" => self.split.0 = num(key, v)?,
            "split_val" => self.split.1 = num(key, v)?,
            "split_test" => self.split.2 = num(key, v)?,
            "cap_percentile" => self.cap_percentile = num(key, v)?,
            "cap_mode" => {
                self.cap_mode = match v {
                    "per_station" => CapMode::PerStation,
                    "global" => CapMode::Global,
                    _ => return Err(bad(key, v)),
                }
            }
            "impute" => self.impute = flag(key, v)?,
            "patience" => self.patience = num(key, v)?,
            "windows_per_epoch" => self.windows_per_epoch = num(key, v)?,
            "lr" => self.optimizer.lr = num(key, v)?,
            "beta1" => self.optimizer.beta1 = num(key, v)?,
            "beta2" => self.optimizer.beta2 = num(key, v)?,
            "adam_eps" => self.optimizer.eps = num(key, v)?,
            _ => return Err(PipelineError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse flat `key = value` text over the defaults. `#` starts a
    /// comment; unknown keys are rejected by name.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::ConfigInvalid(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PipelineError::ConfigInvalid(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda {} outside [0, 1]", self.lambda));
        }
        let (a, b, c) = self.split;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return fail(format!("split fractions {a}, {b}, {c} must be positive and sum to 1"));
        }
        if self.kernel_width == 0 || self.kernel_width > self.task.t_in {
            return fail(format!("kernel_width {} must be in 1..={}", self.kernel_width, self.task.t_in));
        }
        if self.use_embeddings && self.latent_dim == 0 {
            return fail("latent_dim must be positive when embeddings are used".into());
        }
        if self.batch_size == 0 || self.hidden_dim == 0 || self.vae_hidden == 0 {
            return fail("batch_size, hidden_dim and vae_hidden must be positive".into());
        }
        if !(0.0..=100.0).contains(&self.cap_percentile) {
            return fail(format!("cap_percentile {} outside [0, 100]", self.cap_percentile));
        }
        if !(self.optimizer.lr > 0.0) {
            return fail("lr must be positive".into());
        }
        Ok(())
    }

    /// Canonical text form: every key, in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let b = |x: bool| if x { "true" } else { "false" };
        let values: Vec<String> = alloc::vec![
            self.task.label().into(),
            format!("{}", self.lambda),
            format!("{}", self.epochs),
            format!("{}", self.batch_size),
            format!("{}", self.seed),
            b(self.use_rg).into(),
            b(self.use_hn).into(),
            b(self.use_embeddings).into(),
            b(self.raw_forcings).into(),
            format!("{}", self.latent_dim),
            format!("{}", self.vae_hidden),
            format!("{}", self.hidden_dim),
            format!("{}", self.kernel_width),
            format!("{}", self.blocks),
            format!("{}", self.lookback),
            format!("{}", self.kl_weight),
            match self.mode {
                TrainingMode::Joint => "joint",
                TrainingMode::Staged => "staged",
            }
            .into(),
            format!("{}", self.stage1_epochs),
            b(self.direct_multi_output).into(),
            format!("{}", self.split.0),
            format!("{}", self.split.1),
            format!("{}", self.split.2),
            format!("{}", self.cap_percentile),
            match self.cap_mode {
                CapMode::PerStation => "per_station",
                CapMode::Global => "global",
            }
            .into(),
            b(self.impute).into(),
            format!("{}", self.patience),
            format!("{}", self.windows_per_epoch),
            format!("{}", self.optimizer.lr),
            format!("{}", self.optimizer.beta1),
            format!("{}", self.optimizer.beta2),
            format!("{}", self.optimizer.eps),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Values emitted per node by the basin head.
    pub fn out_steps(&self) -> usize {
        if self.direct_multi_output {
            self.task.t_out
        } else {
            1
        }
    }
}
