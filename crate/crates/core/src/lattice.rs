//! Coupled-cavity array: parameters, pump patterns and the non-Hermitian
//! tight-binding Hamiltonian.
//!
//! Sites are flattened row-major: site `(m, n)` (zero-based) maps to index
//! `m * cols + n`, so the second lattice index runs fastest. Couplings are
//! nearest-neighbour with open boundaries; `kappa_x` links sites that differ
//! in the row index and `kappa_y` sites that differ in the column index.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("gain at site {index} is {value}; gains must be finite and nonnegative")]
    InvalidGain { index: usize, value: f64 },
}

/// Physical constants of a single cavity resonance, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    wavelength: f64,
    linewidth: f64,
    speed_of_light: f64,
}

pub const SPEED_OF_LIGHT: f64 = 2.998e8;

impl PhysicalParams {
    pub fn new(wavelength: f64, linewidth: f64, speed_of_light: f64) -> Result<Self, LatticeError> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(LatticeError::InvalidParameter(format!(
                "wavelength {wavelength} must be positive"
            )));
        }
        if !(linewidth > 0.0 && linewidth.is_finite()) {
            return Err(LatticeError::InvalidParameter(format!(
                "linewidth {linewidth} must be positive"
            )));
        }
        if linewidth >= wavelength {
            return Err(LatticeError::InvalidParameter(
                "linewidth must be smaller than the wavelength".into(),
            ));
        }
        if !(speed_of_light > 0.0 && speed_of_light.is_finite()) {
            return Err(LatticeError::InvalidParameter("speed of light must be positive".into()));
        }
        Ok(Self {
            wavelength,
            linewidth,
            speed_of_light,
        })
    }

    /// 1550 nm photonic-crystal nanocavity with a 0.4 nm linewidth (Q ~ 4000).
    pub fn photonic_crystal() -> Self {
        Self {
            wavelength: 1550e-9,
            linewidth: 0.4e-9,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn linewidth(&self) -> f64 {
        self.linewidth
    }

    pub fn speed_of_light(&self) -> f64 {
        self.speed_of_light
    }
}

/// Time unit used to normalize all rates: `T = 0.2 λ² / (π c Δλ)`, in seconds.
pub fn derive_time_scale(phys: &PhysicalParams) -> f64 {
    0.2 * phys.wavelength * phys.wavelength / (std::f64::consts::PI * phys.speed_of_light * phys.linewidth)
}

/// Lattice geometry and normalized rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayParams {
    pub rows: usize,
    pub cols: usize,
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub gamma: f64,
    /// Time unit the rates were normalized with, kept for provenance only.
    pub time_scale: Option<f64>,
}

impl ArrayParams {
    pub fn new(rows: usize, cols: usize, kappa_x: f64, kappa_y: f64, gamma: f64) -> Result<Self, LatticeError> {
        let params = Self {
            rows,
            cols,
            kappa_x,
            kappa_y,
            gamma,
            time_scale: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// The 8x8 array with `kappa_x = kappa_y = 1` and `gamma = 0.2`.
    pub fn standard() -> Self {
        Self {
            rows: 8,
            cols: 8,
            kappa_x: 1.0,
            kappa_y: 1.0,
            gamma: 0.2,
            time_scale: Some(derive_time_scale(&PhysicalParams::photonic_crystal())),
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(LatticeError::InvalidParameter(
                "array must have at least one site".into(),
            ));
        }
        if !self.kappa_x.is_finite() || !self.kappa_y.is_finite() {
            return Err(LatticeError::InvalidParameter("couplings must be finite".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(LatticeError::InvalidParameter(format!(
                "loss rate {} must be positive",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Nearest-neighbour bonds `(i, j, coupling)` with `i < j`.
    pub fn bonds(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(2 * self.sites());
        for m in 0..self.rows {
            for n in 0..self.cols {
                let k = self.index(m, n);
                if m + 1 < self.rows {
                    out.push((k, self.index(m + 1, n), self.kappa_x));
                }
                if n + 1 < self.cols {
                    out.push((k, self.index(m, n + 1), self.kappa_y));
                }
            }
        }
        out
    }
}

/// Nonnegative gain rates, one per site, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpPattern {
    rows: usize,
    cols: usize,
    gains: Vec<f64>,
}

impl PumpPattern {
    pub fn new(rows: usize, cols: usize, gains: Vec<f64>) -> Result<Self, LatticeError> {
        if gains.len() != rows * cols {
            return Err(LatticeError::InvalidParameter(format!(
                "{} gains supplied for a {rows}x{cols} array",
                gains.len()
            )));
        }
        if let Some((index, &value)) = gains.iter().enumerate().find(|(_, g)| !(**g >= 0.0 && g.is_finite())) {
            return Err(LatticeError::InvalidGain { index, value });
        }
        Ok(Self { rows, cols, gains })
    }

    pub fn uniform(rows: usize, cols: usize, gain: f64) -> Result<Self, LatticeError> {
        Self::new(rows, cols, vec![gain; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.gains[row * self.cols + col]
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            gains: self.gains.iter().map(|g| g * alpha).collect(),
        }
    }

    pub fn max_gain(&self) -> f64 {
        self.gains.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_gain(&self) -> f64 {
        self.gains.iter().sum::<f64>() / self.gains.len() as f64
    }

    pub fn check_shape(&self, params: &ArrayParams) -> Result<(), LatticeError> {
        if self.rows != params.rows || self.cols != params.cols {
            return Err(LatticeError::ShapeMismatch {
                expected_rows: params.rows,
                expected_cols: params.cols,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }
}

/// Checkerboard sublattice signs, `+1` on sublattice A (which holds site
/// `(0, 0)`) and `-1` on sublattice B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SublatticeMask {
    rows: usize,
    cols: usize,
    signs: Vec<i8>,
}

impl SublatticeMask {
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn sign(&self, row: usize, col: usize) -> i8 {
        self.signs[row * self.cols + col]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

pub fn sublattice_mask(rows: usize, cols: usize) -> SublatticeMask {
    let signs = (0..rows * cols)
        .map(|k| if (k / cols + k % cols).is_multiple_of(2) { 1 } else { -1 })
        .collect();
    SublatticeMask { rows, cols, signs }
}

/// Basis ordering of a Hamiltonian's rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flattening {
    /// Site `(m, n)` at index `m * cols + n`.
    RowMajor,
}

/// Dense `N x N` Hamiltonian, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    rows: usize,
    cols: usize,
    matrix: Vec<Complex64>,
    flattening: Flattening,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn lattice_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn flattening(&self) -> Flattening {
        self.flattening
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[i * self.dim() + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|k| self.get(k, k)).sum()
    }

    /// Off-diagonal (coupling) part.
    pub fn coupling(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut k = self.matrix.clone();
        for i in 0..n {
            k[i * n + i] = Complex64::new(0.0, 0.0);
        }
        k
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `H psi`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                self.matrix[i * n..(i + 1) * n]
                    .iter()
                    .zip(psi)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Builds the coupled-mode Hamiltonian: real symmetric nearest-neighbour
/// couplings plus `i (g - gamma)` on the diagonal.
pub fn build_hamiltonian(pump: &PumpPattern, params: &ArrayParams) -> Result<Hamiltonian, LatticeError> {
    params.validate()?;
    pump.check_shape(params)?;
    let n = params.sites();
    let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
    for (k, g) in pump.gains().iter().enumerate() {
        matrix[k * n + k] = Complex64::new(0.0, g - params.gamma);
    }
    for (i, j, kappa) in params.bonds() {
        matrix[i * n + j] = Complex64::new(kappa, 0.0);
        matrix[j * n + i] = Complex64::new(kappa, 0.0);
    }
    Ok(Hamiltonian {
        rows: params.rows,
        cols: params.cols,
        matrix,
        flattening: Flattening::RowMajor,
    })
}

/// Complex field amplitudes of all cavities.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<Complex64>);

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
