//! Flags and config-file values share one struct; flags win on merge.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    OneVsOne,
    OneVsAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    ExactMax,
    Lse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingArg {
    Matrix8,
    Flat64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

macro_rules! settings {
    ($( $(#[$meta:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Settings {
            /// Config file (TOML or JSON) with the same keys as the flags, in snake_case.
            #[arg(long, global = true)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$meta])* #[serde(default, skip_serializing_if = "Option::is_none")] pub $name: Option<$ty>, )*
        }

        impl Settings {
            /// Values set here take precedence over `base`.
            pub fn over(self, base: Settings) -> Settings {
                Settings {
                    config: self.config.or(base.config),
                    $( $name: self.$name.or(base.$name), )*
                }
            }
        }
    };
}

settings! {
    /// Optdigits CSV: 64 pixels then the label per row.
    #[arg(long, global = true)]
    dataset: PathBuf,
    #[arg(long, global = true, value_enum)]
    task: TaskArg,
    #[arg(long, global = true)]
    target_digit: u8,
    #[arg(long, global = true)]
    other_digit: u8,
    /// Selection cutoff on |Re eps|.
    #[arg(long, global = true)]
    delta: f64,
    #[arg(long, global = true)]
    eta: f64,
    /// Maximum number of full cost evaluations.
    #[arg(long, global = true)]
    budget: usize,
    #[arg(long, global = true)]
    seed: u64,
    /// Box for the transform entries, as LO,HI.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    bounds: Vec<f64>,
    #[arg(long, global = true, value_enum)]
    threshold_method: MethodArg,
    #[arg(long, global = true)]
    lse_beta: f64,
    #[arg(long, global = true, value_enum)]
    encoding: EncodingArg,
    /// Comma-separated noise levels.
    #[arg(long, global = true, value_delimiter = ',')]
    noise_levels: Vec<f64>,
    #[arg(long, global = true)]
    out_dir: PathBuf,
    /// Subset size drawn from the dataset.
    #[arg(long, global = true)]
    total: usize,
    #[arg(long, global = true)]
    train_fraction: f64,
    /// Seed for the subset draw and split.
    #[arg(long, global = true)]
    split_seed: u64,
    #[arg(long, global = true)]
    rows: usize,
    #[arg(long, global = true)]
    cols: usize,
    #[arg(long, global = true)]
    kappa_x: f64,
    #[arg(long, global = true)]
    kappa_y: f64,
    #[arg(long, global = true)]
    gamma: f64,
    #[arg(long, global = true)]
    initial_temperature: f64,
    #[arg(long, global = true)]
    visiting: f64,
    #[arg(long, global = true)]
    acceptance: f64,
    #[arg(long, global = true)]
    restart_ratio: f64,
    #[arg(long, global = true)]
    local_search: bool,
    #[arg(long, global = true)]
    polish_fraction: f64,
    /// Model file; defaults to OUT_DIR/model.json.
    #[arg(long, global = true)]
    model: PathBuf,
    /// Split manifest; defaults to OUT_DIR/split.csv.
    #[arg(long, global = true)]
    split: PathBuf,
    /// Which part of the split a command runs on.
    #[arg(long, global = true, value_enum)]
    on: SplitArg,
    #[arg(long, global = true)]
    image_id: usize,
    #[arg(long, global = true)]
    realizations: usize,
    #[arg(long, global = true)]
    noise_seed: u64,
    /// Noise drawn symmetric around zero instead of nonnegative.
    #[arg(long, global = true)]
    symmetric_noise: bool,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let format = if path.extension().is_some_and(|e| e == "json") {
            ConfigFormat::Json
        } else {
            ConfigFormat::Toml
        };
        Settings::parse(&text, format).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn parse(text: &str, format: ConfigFormat) -> Result<Settings, String> {
        match format {
            ConfigFormat::Json => serde_json::from_str(text).map_err(|e| e.to_string()),
            ConfigFormat::Toml => toml::from_str(text).map_err(|e| e.to_string()),
        }
    }

    /// Flags merged over the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<Settings, CliError> {
        match &self.config {
            Some(path) => {
                let file = Settings::from_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out_dir().join("model.json"))
    }

    pub fn split_path(&self) -> PathBuf {
        self.split.clone().unwrap_or_else(|| self.out_dir().join("split.csv"))
    }

    pub fn dataset_path(&self) -> Result<&Path, CliError> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::Usage("--dataset is required".into()))
    }
}
