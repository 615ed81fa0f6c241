//! Image to pump encoding `P = |M I|`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Image, IMAGE_PIXELS, IMAGE_SIDE};
use crate::lattice::{ArrayParams, LatticeError, PumpPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// 8x8 matrix multiplying the image grid from the left.
    Matrix8,
    /// `sites x 64` matrix acting on the row-major flattened image.
    Flat64,
}

impl EncodingMode {
    pub fn name(self) -> &'static str {
        match self {
            EncodingMode::Matrix8 => "matrix8",
            EncodingMode::Flat64 => "flat64",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("{mode} transform needs {expected} entries, got {got}")]
    EntryCount {
        mode: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix8 encoding needs an 8x8 array, got {rows}x{cols}")]
    ArrayShape { rows: usize, cols: usize },
    #[error("transform produces a {rows}x{cols} pump but the array is {array_rows}x{array_cols}")]
    PumpShape {
        rows: usize,
        cols: usize,
        array_rows: usize,
        array_cols: usize,
    },
    #[error("non-finite transform entry at {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Trainable linear transform, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    mode: EncodingMode,
    pump_rows: usize,
    pump_cols: usize,
    entries: Vec<f64>,
}

impl TransformMatrix {
    /// Builds a transform for `array`. For `Flat64` the matrix has one row per
    /// array site, so any array shape can be fed.
    pub fn new(mode: EncodingMode, array: &ArrayParams, entries: Vec<f64>) -> Result<Self, EncodingError> {
        let expected = Self::parameter_count(mode, array)?;
        if entries.len() != expected {
            return Err(EncodingError::EntryCount {
                mode: mode.name(),
                expected,
                got: entries.len(),
            });
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(EncodingError::NonFinite(i));
        }
        Ok(Self {
            mode,
            pump_rows: array.rows,
            pump_cols: array.cols,
            entries,
        })
    }

    pub fn parameter_count(mode: EncodingMode, array: &ArrayParams) -> Result<usize, EncodingError> {
        match mode {
            EncodingMode::Matrix8 => {
                if array.rows != IMAGE_SIDE || array.cols != IMAGE_SIDE {
                    return Err(EncodingError::ArrayShape {
                        rows: array.rows,
                        cols: array.cols,
                    });
                }
                Ok(IMAGE_SIDE * IMAGE_SIDE)
            }
            EncodingMode::Flat64 => Ok(array.sites() * IMAGE_PIXELS),
        }
    }

    /// The transform whose encoding reproduces the image itself. For `Flat64`
    /// on arrays with fewer than 64 sites each site sums the pixels it covers.
    pub fn identity(mode: EncodingMode, array: &ArrayParams) -> Result<Self, EncodingError> {
        let count = Self::parameter_count(mode, array)?;
        let mut entries = vec![0.0; count];
        match mode {
            EncodingMode::Matrix8 => {
                for i in 0..IMAGE_SIDE {
                    entries[i * IMAGE_SIDE + i] = 1.0;
                }
            }
            EncodingMode::Flat64 => {
                let sites = array.sites();
                for p in 0..IMAGE_PIXELS {
                    entries[(p % sites) * IMAGE_PIXELS + p] = 1.0;
                }
            }
        }
        Self::new(mode, array, entries)
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    pub fn pump_shape(&self) -> (usize, usize) {
        (self.pump_rows, self.pump_cols)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Row count and column count of the stored matrix.
    pub fn matrix_shape(&self) -> (usize, usize) {
        match self.mode {
            EncodingMode::Matrix8 => (IMAGE_SIDE, IMAGE_SIDE),
            EncodingMode::Flat64 => (self.pump_rows * self.pump_cols, IMAGE_PIXELS),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Same shape and mode with new entries, as produced by an optimizer.
    pub fn with_entries(&self, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), self.entries.len(), "transform parameter count changed");
        Self {
            entries: entries.to_vec(),
            ..self.clone()
        }
    }

    pub fn check_array(&self, array: &ArrayParams) -> Result<(), EncodingError> {
        if (array.rows, array.cols) != (self.pump_rows, self.pump_cols) {
            return Err(EncodingError::PumpShape {
                rows: self.pump_rows,
                cols: self.pump_cols,
                array_rows: array.rows,
                array_cols: array.cols,
            });
        }
        Ok(())
    }
}

/// `P = |M I|` entrywise.
pub fn encode(image: &Image, m: &TransformMatrix) -> Result<PumpPattern, EncodingError> {
    let px = image.pixels();
    let gains = match m.mode {
        EncodingMode::Matrix8 => {
            let mut out = vec![0.0; IMAGE_PIXELS];
            for i in 0..IMAGE_SIDE {
                for k in 0..IMAGE_SIDE {
                    let a = m.entries[i * IMAGE_SIDE + k];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..IMAGE_SIDE {
                        out[i * IMAGE_SIDE + j] += a * px[k * IMAGE_SIDE + j];
                    }
                }
            }
            out
        }
        EncodingMode::Flat64 => m
            .entries
            .chunks_exact(IMAGE_PIXELS)
            .map(|row| row.iter().zip(px).map(|(a, b)| a * b).sum())
            .collect(),
    };
    Ok(PumpPattern::new(
        m.pump_rows,
        m.pump_cols,
        gains.into_iter().map(f64::abs).collect(),
    )?)
}
