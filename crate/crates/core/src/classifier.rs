//! Single-image classification and model persistence.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Image, Task};
use crate::encoding::{encode, EncodingError, EncodingMode, TransformMatrix};
use crate::lattice::ArrayParams;
use crate::spectrum::{empty_set_sentinel, is_strict_zero_mode, spectral_gap, GapResult, Spectrum};
use crate::threshold::{ThresholdError, ThresholdHint, ThresholdMethod, ThresholdResult, ThresholdSolver};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub delta: f64,
    pub target_digit: u8,
    pub task: Task,
    pub threshold_method: ThresholdMethod,
    pub encoding_mode: EncodingMode,
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.delta >= 0.0) {
            return Err(ModelError::Invalid(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if self.target_digit > 9 {
            return Err(ModelError::Invalid(format!("target digit {}", self.target_digit)));
        }
        if let Task::OneVsOne { other_digit } = self.task {
            if other_digit > 9 || other_digit == self.target_digit {
                return Err(ModelError::Invalid(format!("other digit {other_digit}")));
            }
        }
        if let ThresholdMethod::Lse { beta } = self.threshold_method {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(ModelError::Invalid(format!("lse beta {beta}")));
            }
        }
        Ok(())
    }

    /// Whether an image with this label belongs to the positive class.
    pub fn is_positive(&self, label: u8) -> bool {
        label == self.target_digit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub budget: u64,
    pub final_cost: f64,
    pub dataset_sha: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub transform: TransformMatrix,
    pub array: ArrayParams,
    pub config: ClassifierConfig,
    pub provenance: Provenance,
}

impl Model {
    pub fn new(
        transform: TransformMatrix,
        array: ArrayParams,
        config: ClassifierConfig,
        provenance: Provenance,
    ) -> Result<Self, ModelError> {
        array.validate().map_err(|e| ModelError::Invalid(e.to_string()))?;
        config.validate()?;
        if transform.mode() != config.encoding_mode {
            return Err(ModelError::Invalid(
                "transform mode differs from the configured encoding".into(),
            ));
        }
        transform.check_array(&array)?;
        Ok(Self {
            transform,
            array,
            config,
            provenance,
        })
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("inconsistent model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// On-disk layout of a model.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    encoding_mode: EncodingMode,
    rows: usize,
    cols: usize,
    kappa_x: f64,
    kappa_y: f64,
    gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_scale: Option<f64>,
    delta: f64,
    task: Task,
    target_digit: u8,
    threshold_method: ThresholdMethod,
    matrix: Vec<f64>,
    provenance: Provenance,
}

pub fn model_to_json(model: &Model) -> String {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        encoding_mode: model.config.encoding_mode,
        rows: model.array.rows,
        cols: model.array.cols,
        kappa_x: model.array.kappa_x,
        kappa_y: model.array.kappa_y,
        gamma: model.array.gamma,
        time_scale: model.array.time_scale,
        delta: model.config.delta,
        task: model.config.task,
        target_digit: model.config.target_digit,
        threshold_method: model.config.threshold_method,
        matrix: model.transform.entries().to_vec(),
        provenance: model.provenance.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

/// Parses a model document. The version is checked before anything else so
/// that files from other format versions fail with a version error.
pub fn model_from_json(text: &str) -> Result<Model, ModelError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    match value.get("version") {
        Some(v) if v.as_u64() == Some(u64::from(MODEL_FORMAT_VERSION)) => {}
        Some(v) => {
            return Err(ModelError::Version {
                found: v.to_string(),
                expected: MODEL_FORMAT_VERSION,
            })
        }
        None => return Err(ModelError::Malformed("missing version field".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let mut array = ArrayParams::new(file.rows, file.cols, file.kappa_x, file.kappa_y, file.gamma)
        .map_err(|e| ModelError::Invalid(e.to_string()))?;
    array.time_scale = file.time_scale;
    let config = ClassifierConfig {
        delta: file.delta,
        target_digit: file.target_digit,
        task: file.task,
        threshold_method: file.threshold_method,
        encoding_mode: file.encoding_mode,
    };
    let transform = TransformMatrix::new(file.encoding_mode, &array, file.matrix)?;
    Model::new(transform, array, config, file.provenance)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    NoThresholdReachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub answer: Answer,
    pub gap: f64,
    pub alpha: Option<f64>,
    pub lasing_eigenvalue: Option<Complex64>,
    pub lasing_selected: bool,
    pub selected_count: usize,
    /// The lasing mode has `|Re eps|` at rounding level.
    pub strictly_zero: bool,
    pub diagnostic: Option<Diagnostic>,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

/// Full output of one pipeline run, kept for reports and spectrum dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub result: ClassificationResult,
    pub threshold: Option<ThresholdResult>,
    pub gap: Option<GapResult>,
}

/// Reusable classification workspace for one model geometry.
#[derive(Debug, Clone)]
pub struct Pipeline {
    solver: ThresholdSolver,
}

impl Pipeline {
    pub fn new(array: &ArrayParams) -> Result<Self, ThresholdError> {
        Ok(Self {
            solver: ThresholdSolver::new(array)?,
        })
    }

    pub fn run(
        &mut self,
        image: &Image,
        transform: &TransformMatrix,
        config: &ClassifierConfig,
        hint: Option<&ThresholdHint>,
    ) -> Result<PipelineOutput, ClassifyError> {
        let pump = encode(image, transform)?;
        let gamma = self.solver.params().gamma;
        let threshold = match self.solver.solve_with_hint(&pump, config.threshold_method, hint) {
            Ok(t) => t,
            Err(ThresholdError::NoThresholdReachable) => {
                return Ok(PipelineOutput {
                    result: ClassificationResult {
                        answer: Answer::No,
                        gap: empty_set_sentinel(gamma),
                        alpha: None,
                        lasing_eigenvalue: None,
                        lasing_selected: false,
                        selected_count: 0,
                        strictly_zero: false,
                        diagnostic: Some(Diagnostic::NoThresholdReachable),
                    },
                    threshold: None,
                    gap: None,
                })
            }
            Err(e) => return Err(e.into()),
        };
        let gap = spectral_gap(&threshold.spectrum, config.delta, gamma);
        let result = ClassificationResult {
            answer: if gap.gap > 0.0 { Answer::Yes } else { Answer::No },
            gap: gap.gap,
            alpha: Some(threshold.alpha),
            lasing_eigenvalue: Some(gap.lasing_eigenvalue),
            lasing_selected: gap.lasing_selected,
            selected_count: gap.selected_count,
            strictly_zero: is_strict_zero_mode(gap.lasing_eigenvalue),
            diagnostic: None,
        };
        Ok(PipelineOutput {
            result,
            threshold: Some(threshold),
            gap: Some(gap),
        })
    }

    pub fn run_model(&mut self, image: &Image, model: &Model) -> Result<PipelineOutput, ClassifyError> {
        self.run(image, &model.transform, &model.config, None)
    }
}

/// Encode, scale to threshold, and read the answer off the sign of the
/// spectral gap. A gap of exactly zero counts as "no".
pub fn classify(image: &Image, model: &Model) -> Result<ClassificationResult, ClassifyError> {
    Ok(Pipeline::new(&model.array)?.run_model(image, model)?.result)
}

/// Spectrum of the threshold-scaled pump, for dumps.
pub fn threshold_spectrum(image: &Image, model: &Model) -> Result<Option<(ThresholdResult, Spectrum)>, ClassifyError> {
    let out = Pipeline::new(&model.array)?.run_model(image, model)?;
    Ok(out.threshold.map(|t| {
        let s = t.spectrum.clone();
        (t, s)
    }))
}
