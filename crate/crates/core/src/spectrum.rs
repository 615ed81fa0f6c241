//! Spectra of the array Hamiltonian and the spectral-gap decision statistic.
//!
//! Two solvers are provided. [`eigendecompose`] is a general dense complex
//! eigensolver and works for any matrix. [`eigenvalues_gauge`] exploits the
//! lattice structure: with `S = diag(i^p)` (`p = 0` on sublattice A, `1` on B)
//! the matrix `S (-iH) S^-1` is real, with the gains minus loss on the
//! diagonal and a skew-symmetric coupling. Its eigenvalues `nu` give
//! `eps = i nu`, so the pairing `eps -> -conj(eps)` is exact and zero-modes
//! have a real part of exactly zero.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{sublattice_mask, Hamiltonian};
use crate::linalg::banded::BandLu;
use crate::linalg::{complex_eig, real_eig, LinalgError};

/// `|Re eps|` at or below this is reported as a strict zero-mode.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("eigensolver failed: {0}")]
    Convergence(#[from] LinalgError),
    #[error("Hamiltonian has non-finite entries")]
    NonFinite,
    #[error("Hamiltonian lacks the lattice structure (real couplings, imaginary diagonal) needed by the gauge solver")]
    NotLatticeStructured,
}

/// Unit-norm eigenvectors with their relative residuals `|H v - eps v| / |H|_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
    basis: Option<EigenBasis>,
}

impl Spectrum {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        Self {
            eigenvalues,
            basis: None,
        }
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Option<&EigenBasis> {
        self.basis.as_ref()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_residual(&self) -> Option<f64> {
        self.basis
            .as_ref()
            .map(|b| b.residuals.iter().copied().fold(0.0, f64::max))
    }
}

fn check_finite(h: &Hamiltonian) -> Result<(), SpectrumError> {
    if h.matrix().iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(SpectrumError::NonFinite)
    }
}

/// All eigenpairs via Householder-Hessenberg reduction and complex Schur QR.
pub fn eigendecompose(h: &Hamiltonian) -> Result<Spectrum, SpectrumError> {
    check_finite(h)?;
    let n = h.dim();
    let eig = complex_eig::eig(n, h.matrix())?;
    let vectors: Vec<Vec<Complex64>> = (0..n)
        .map(|k| {
            let mut v: Vec<Complex64> = (0..n).map(|i| eig.vectors[i * n + k]).collect();
            fix_phase(&mut v);
            v
        })
        .collect();
    let residuals = residuals(h, &eig.values, &vectors);
    Ok(Spectrum {
        eigenvalues: eig.values,
        basis: Some(EigenBasis { vectors, residuals }),
    })
}

/// Real matrix `S (-iH) S^-1` for a lattice Hamiltonian, row-major.
pub fn gauge_matrix(h: &Hamiltonian) -> Result<Vec<f64>, SpectrumError> {
    check_finite(h)?;
    let (rows, cols) = h.lattice_shape();
    let signs = sublattice_mask(rows, cols);
    let signs = signs.signs();
    let n = h.dim();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let z = h.get(i, j);
            if i == j {
                if z.re != 0.0 {
                    return Err(SpectrumError::NotLatticeStructured);
                }
                q[i * n + i] = z.im;
            } else if z != Complex64::new(0.0, 0.0) {
                if z.im != 0.0 || signs[i] == signs[j] {
                    return Err(SpectrumError::NotLatticeStructured);
                }
                q[i * n + j] = -f64::from(signs[i]) * z.re;
            }
        }
    }
    Ok(q)
}

/// Maps an eigenvalue `nu` of the gauge matrix to `eps = i nu`.
pub fn gauge_to_energy(nu: Complex64) -> Complex64 {
    Complex64::new(-nu.im, nu.re)
}

/// Eigenvalues of a lattice Hamiltonian through its real gauge form.
pub fn eigenvalues_gauge(h: &Hamiltonian) -> Result<Vec<Complex64>, SpectrumError> {
    let q = gauge_matrix(h)?;
    let nu = real_eig::eigenvalues(h.dim(), &q)?;
    Ok(nu.into_iter().map(gauge_to_energy).collect())
}

/// Gauge-route eigenvalues plus eigenvectors from banded inverse iteration.
pub fn eigendecompose_gauge(h: &Hamiltonian) -> Result<Spectrum, SpectrumError> {
    let values = eigenvalues_gauge(h)?;
    let vectors = inverse_iteration_vectors(h, &values);
    let residuals = residuals(h, &values, &vectors);
    Ok(Spectrum {
        eigenvalues: values,
        basis: Some(EigenBasis { vectors, residuals }),
    })
}

/// Half-bandwidth of a row-major lattice Hamiltonian.
pub(crate) fn lattice_bandwidth(h: &Hamiltonian) -> usize {
    let (rows, cols) = h.lattice_shape();
    if rows > 1 {
        cols
    } else {
        1.min(cols.saturating_sub(1))
    }
}

fn inverse_iteration_vectors(h: &Hamiltonian, values: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = h.dim();
    let bw = lattice_bandwidth(h);
    let hnorm = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut lu = BandLu::new(n, bw, bw);
    values
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            lu.clear();
            for i in 0..n {
                for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                    let mut z = h.get(i, j);
                    if i == j {
                        z -= eps;
                    }
                    lu.set(i, j, z);
                }
            }
            lu.factor(f64::EPSILON * hnorm);
            // Deterministic start vector that is unlikely to be orthogonal to
            // any eigenvector.
            let mut v: Vec<Complex64> = (0..n)
                .map(|i| Complex64::from_polar(1.0, 0.7 * i as f64 + 0.3 * k as f64))
                .collect();
            for _ in 0..3 {
                lu.solve(&mut v);
                normalize(&mut v);
            }
            fix_phase(&mut v);
            v
        })
        .collect()
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|z| *z /= norm);
    }
}

/// Rotates `v` so its largest-magnitude component is real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return;
    };
    if big.norm() > 0.0 {
        let phase = big.conj() / big.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

fn residuals(h: &Hamiltonian, values: &[Complex64], vectors: &[Vec<Complex64>]) -> Vec<f64> {
    let hnorm = h.frobenius_norm();
    values
        .iter()
        .zip(vectors)
        .map(|(&eps, v)| {
            let hv = h.apply(v);
            let r = hv
                .iter()
                .zip(v)
                .map(|(a, b)| (a - eps * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if hnorm > 0.0 {
                r / hnorm
            } else {
                r
            }
        })
        .collect()
}

/// Largest distance in a greedy one-to-one matching of the eigenvalues with
/// their reflections `-conj(eps)`. Closest pairs are matched first.
pub fn nhph_defect(spec: &Spectrum) -> f64 {
    let values = spec.eigenvalues();
    let n = values.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, a) in values.iter().enumerate() {
        for (j, b) in values.iter().enumerate() {
            pairs.push(((a + b.conj()).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used_left = vec![false; n];
    let mut used_right = vec![false; n];
    let mut matched = 0;
    let mut worst = 0.0f64;
    for (d, i, j) in pairs {
        if used_left[i] || used_right[j] {
            continue;
        }
        used_left[i] = true;
        used_right[j] = true;
        worst = worst.max(d);
        matched += 1;
        if matched == n {
            break;
        }
    }
    worst
}

/// Partition of mode indices by the spectral cutoff `|Re eps| <= delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSelection {
    pub delta: f64,
    pub selected: Vec<usize>,
    pub nonselected: Vec<usize>,
}

impl ModeSelection {
    pub fn is_selected(&self, index: usize) -> bool {
        self.selected.binary_search(&index).is_ok()
    }
}

pub fn select_modes(spec: &Spectrum, delta: f64) -> ModeSelection {
    assert!(delta >= 0.0, "spectral cutoff must be nonnegative");
    let (selected, nonselected) = (0..spec.len()).partition(|&i| spec.eigenvalues()[i].re.abs() <= delta);
    ModeSelection {
        delta,
        selected,
        nonselected,
    }
}

/// Index of the mode closest to (or furthest above) threshold: largest
/// `Im eps`, ties broken by smaller `|Re eps|` and then by lower index.
pub fn lasing_index(spec: &Spectrum) -> usize {
    assert!(!spec.is_empty(), "empty spectrum has no lasing mode");
    let values = spec.eigenvalues();
    let mut best = 0;
    for (i, z) in values.iter().enumerate().skip(1) {
        let b = values[best];
        if z.im > b.im || (z.im == b.im && z.re.abs() < b.re.abs()) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub gap: f64,
    /// `max Im eps` over selected modes, or the empty-set sentinel.
    pub selected_max: f64,
    /// `max Im eps` over non-selected modes, or the empty-set sentinel.
    pub nonselected_max: f64,
    pub lasing_index: usize,
    pub lasing_eigenvalue: Complex64,
    pub lasing_selected: bool,
    pub selected_count: usize,
    pub selected_empty: bool,
    pub nonselected_empty: bool,
}

/// Value standing in for the maximum over an empty mode set. It lies below
/// the lower bound `-gamma` of every `Im eps`.
pub fn empty_set_sentinel(gamma: f64) -> f64 {
    -2.0 * gamma
}

/// `max_{selected} Im eps - max_{non-selected} Im eps`.
pub fn spectral_gap(spec: &Spectrum, delta: f64, gamma: f64) -> GapResult {
    let selection = select_modes(spec, delta);
    let values = spec.eigenvalues();
    let sentinel = empty_set_sentinel(gamma);
    let max_over = |idx: &[usize]| idx.iter().map(|&i| values[i].im).fold(f64::NEG_INFINITY, f64::max);
    let selected_max = if selection.selected.is_empty() {
        sentinel
    } else {
        max_over(&selection.selected)
    };
    let nonselected_max = if selection.nonselected.is_empty() {
        sentinel
    } else {
        max_over(&selection.nonselected)
    };
    let lasing = lasing_index(spec);
    GapResult {
        gap: selected_max - nonselected_max,
        selected_max,
        nonselected_max,
        lasing_index: lasing,
        lasing_eigenvalue: values[lasing],
        lasing_selected: selection.is_selected(lasing),
        selected_count: selection.selected.len(),
        selected_empty: selection.selected.is_empty(),
        nonselected_empty: selection.nonselected.is_empty(),
    }
}

pub fn is_strict_zero_mode(eps: Complex64) -> bool {
    eps.re.abs() <= ZERO_MODE_TOLERANCE
}

/// Phase differences `arg(v_j / v_i)` across every nearest-neighbour bond
/// `(i, j)`, for sites where both amplitudes are nonzero.
pub fn neighbor_phase_differences(vector: &[Complex64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut push = |a: Complex64, b: Complex64| {
        if a.norm() > 0.0 && b.norm() > 0.0 {
            out.push((b / a).arg());
        }
    };
    for m in 0..rows {
        for n in 0..cols {
            let k = m * cols + n;
            if m + 1 < rows {
                push(vector[k], vector[k + cols]);
            }
            if n + 1 < cols {
                push(vector[k], vector[k + 1]);
            }
        }
    }
    out
}

pub const SPECTRUM_CSV_HEADER: &str = "index,re,im,residual,selected,is_lasing";

/// Writes one row per mode. The residual column is empty when the spectrum
/// carries no eigenvectors.
pub fn write_spectrum_csv<W: Write>(mut out: W, spec: &Spectrum, delta: f64) -> std::io::Result<()> {
    let selection = select_modes(spec, delta);
    let lasing = lasing_index(spec);
    writeln!(out, "{SPECTRUM_CSV_HEADER}")?;
    for (i, z) in spec.eigenvalues().iter().enumerate() {
        let residual = spec
            .basis()
            .map(|b| format!("{:e}", b.residuals[i]))
            .unwrap_or_default();
        writeln!(
            out,
            "{i},{:e},{:e},{residual},{},{}",
            z.re,
            z.im,
            u8::from(selection.is_selected(i)),
            u8::from(i == lasing)
        )?;
    }
    Ok(())
}
