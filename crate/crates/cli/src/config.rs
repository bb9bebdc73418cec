//! Experiment configuration file: one `[shared]` block and a list of
//! `[[rows]]`, parsed strictly so a typo can never silently change an
//! experiment.

use serde::{Deserialize, Serialize};

use mxladder_core::block_quant::QuantLayout;
use mxladder_core::hadamard::HadamardSize;
use mxladder_core::trainer::{
    BaselineNumeric, DataConfig, DivergenceConfig, LadderConfig, LayoutPolicy, ModelConfig,
    Nonlinearity, OptMethod, OptimizerConfig, PathSet, Stabilizer, TargetLoss,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub shared: SharedBlock,
    pub rows: Vec<RowBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedBlock {
    pub widths: Vec<usize>,
    pub nonlinearity: NonlinearityName,
    #[serde(default)]
    pub residual: bool,
    pub data_seed: u64,
    pub train_samples: usize,
    pub val_samples: usize,
    pub gain_sigma: f64,
    pub outlier_prob: f64,
    pub outlier_gain: f64,
    pub noise_std: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerName,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_epsilon")]
    pub adam_epsilon: f64,
    pub baseline_numeric: BaselineName,
    /// Either the string "auto" or a fixed loss threshold.
    pub target_loss: TargetSpec,
    pub max_steps: u64,
    pub eval_every: u64,
    pub loss_blowup_factor: f64,
    #[serde(default = "default_true")]
    pub nan_abort: bool,
    #[serde(default = "default_activation_layout")]
    pub activation_layout: LayoutName,
    #[serde(default = "default_weight_layout")]
    pub weight_layout: LayoutName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mx_paths: Vec<PathName>,
    pub stabilizer: StabilizerName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hadamard: Option<HadamardName>,
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_epsilon() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}
fn default_activation_layout() -> LayoutName {
    LayoutName::Row
}
fn default_weight_layout() -> LayoutName {
    LayoutName::Block
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityName {
    Tanh,
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineName {
    Exact,
    Fp8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Keyword(AutoKeyword),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutName {
    Row,
    Col,
    Block,
}

impl LayoutName {
    pub fn to_layout(self) -> QuantLayout {
        match self {
            LayoutName::Row => QuantLayout::Row1x32,
            LayoutName::Col => QuantLayout::Col32x1,
            LayoutName::Block => QuantLayout::Block32x32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathName {
    Fprop,
    Dgrad,
    Wgrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizerName {
    None,
    StochasticRounding,
    DetHadamard,
    RandHadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HadamardName {
    H16,
    H32,
}

impl HadamardName {
    pub fn size(self) -> HadamardSize {
        match self {
            HadamardName::H16 => HadamardSize::H16,
            HadamardName::H32 => HadamardSize::H32,
        }
    }
}

impl ExperimentFile {
    /// Strict parse; errors carry the TOML line/column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config parse error: {e}")))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment file serializes")
    }

    /// Lowers the file into per-row ladder configs plus display labels.
    pub fn to_ladder_configs(&self) -> Result<(Vec<String>, Vec<LadderConfig>), CliError> {
        let s = &self.shared;
        let method = match s.optimizer {
            OptimizerName::Sgd => OptMethod::Sgd {
                momentum: s.momentum,
            },
            OptimizerName::Adam => OptMethod::Adam {
                beta1: s.adam_beta1,
                beta2: s.adam_beta2,
                epsilon: s.adam_epsilon,
            },
        };
        let shared_cfg = LadderConfig {
            mx_paths: PathSet::none(),
            stabilizer: Stabilizer::None,
            baseline_numeric: match s.baseline_numeric {
                BaselineName::Exact => BaselineNumeric::Exact,
                BaselineName::Fp8 => BaselineNumeric::Fp8Sim,
            },
            model: ModelConfig {
                widths: s.widths.clone(),
                nonlinearity: match s.nonlinearity {
                    NonlinearityName::Tanh => Nonlinearity::Tanh,
                    NonlinearityName::Relu => Nonlinearity::Relu,
                    NonlinearityName::Identity => Nonlinearity::Identity,
                },
                residual: s.residual,
            },
            data: DataConfig {
                seed: s.data_seed,
                train_samples: s.train_samples,
                val_samples: s.val_samples,
                gain_sigma: s.gain_sigma,
                outlier_prob: s.outlier_prob,
                outlier_gain: s.outlier_gain,
                noise_std: s.noise_std,
            },
            optimizer: OptimizerConfig {
                learning_rate: s.learning_rate,
                batch_size: s.batch_size,
                method,
            },
            layouts: LayoutPolicy {
                activation: s.activation_layout.to_layout(),
                weight: s.weight_layout.to_layout(),
            },
            target_loss: match s.target_loss {
                TargetSpec::Keyword(AutoKeyword::Auto) => TargetLoss::Auto,
                TargetSpec::Fixed(t) => TargetLoss::Fixed(t),
            },
            max_steps: s.max_steps,
            eval_every: s.eval_every,
            divergence: DivergenceConfig {
                loss_blowup_factor: s.loss_blowup_factor,
                nan_abort: s.nan_abort,
            },
        };

        if self.rows.is_empty() {
            return Err(CliError::usage("config has no [[rows]]"));
        }
        let mut labels = Vec::with_capacity(self.rows.len());
        let mut configs = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let mut paths = PathSet::none();
            for p in &row.mx_paths {
                match p {
                    PathName::Fprop => paths.fprop = true,
                    PathName::Dgrad => paths.dgrad = true,
                    PathName::Wgrad => paths.wgrad = true,
                }
            }
            let stabilizer = match (row.stabilizer, row.hadamard) {
                (StabilizerName::None, None) => Stabilizer::None,
                (StabilizerName::StochasticRounding, None) => Stabilizer::StochasticRounding,
                (StabilizerName::DetHadamard, Some(h)) => Stabilizer::DetHadamard(h.size()),
                (StabilizerName::RandHadamard, Some(h)) => Stabilizer::RandHadamard(h.size()),
                (StabilizerName::DetHadamard | StabilizerName::RandHadamard, None) => {
                    return Err(CliError::usage(format!(
                        "row {i}: hadamard stabilizer requires a `hadamard` size"
                    )))
                }
                (_, Some(_)) => {
                    return Err(CliError::usage(format!(
                        "row {i}: `hadamard` is only valid with a hadamard stabilizer"
                    )))
                }
            };
            let cfg = LadderConfig {
                mx_paths: paths,
                stabilizer,
                ..shared_cfg.clone()
            };
            cfg.validate()
                .map_err(|e| CliError::usage(format!("row {i}: {e}")))?;
            let label = row.label.clone().unwrap_or_else(|| {
                let mut parts = cfg.mx_paths.names().join("_");
                if parts.is_empty() {
                    parts = "baseline".into();
                }
                match stabilizer {
                    Stabilizer::None => parts,
                    Stabilizer::StochasticRounding => format!("{parts}_sr"),
                    Stabilizer::DetHadamard(s) => format!("{parts}_deth{}", s.n()),
                    Stabilizer::RandHadamard(s) => format!("{parts}_randh{}", s.n()),
                }
            });
            labels.push(label);
            configs.push(cfg);
        }
        Ok((labels, configs))
    }
}
