//! Pump scaling to the lasing threshold: find `alpha > 0` such that the
//! largest `Im eps` of `H(alpha P)` is zero.
//!
//! Everything runs on the real gauge matrix `Q(alpha) = alpha P - gamma + J`
//! (see [`crate::spectrum`]), whose eigenvalues `nu` satisfy `Im eps = Re nu`.
//! Two bounds give a bracket without any eigen-solve. The largest eigenvalue
//! of the symmetric part bounds `Re nu` from above, so
//! `f(alpha) <= alpha max P - gamma`. The trace fixes the mean of `Re nu`
//! at `alpha mean P - gamma`, which bounds the maximum from below. Hence the
//! root lies in `[gamma / max P, gamma / mean P]`.
//!
//! Inside the bracket the rightmost eigenvalue is followed with Newton steps
//! in `alpha`, using `d nu / d alpha = u^H P w / u^H w` from left/right
//! eigenvectors obtained by banded shifted inverse iteration. One dense solve
//! at the end certifies that no other mode sits above threshold. If tracking
//! fails, Brent refinement on the dense objective takes over.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{sublattice_mask, ArrayParams, LatticeError, PumpPattern};
use crate::linalg::banded::BandLu;
use crate::linalg::real_eig::RealWork;
use crate::linalg::LinalgError;
use crate::roots::{brent, BrentOptions, RootError};
use crate::spectrum::{gauge_to_energy, Spectrum};

pub const DEFAULT_LSE_BETA: f64 = 200.0;
/// Postcondition on `|f(alpha)|` at the returned scale.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;
/// Tracking result accepted without Brent refinement below this `|f|`.
const TRACK_ACCEPT: f64 = 1e-12;
const MAX_RESTARTS: usize = 4;
const MAX_TRACK_ITERS: usize = 30;
const MAX_BRENT_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
#[derive(Default)]
pub enum ThresholdMethod {
    /// `f = max_i Im eps_i`.
    #[default]
    ExactMax,
    /// `f = (1/beta) ln sum_i exp(beta Im eps_i)`.
    Lse { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("pump has no gain anywhere; no scale reaches threshold")]
    NoThresholdReachable,
    #[error("no sign change of the threshold objective: {0}")]
    BracketExhausted(String),
    #[error("invalid threshold method: {0}")]
    InvalidMethod(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Eigen(#[from] LinalgError),
    #[error("root refinement failed in [{lo}, {hi}] after {iterations} iterations")]
    NoConvergence { lo: f64, hi: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub alpha: f64,
    pub scaled_pump: PumpPattern,
    /// Eigenvalues of `H(alpha P)`, no eigenvectors.
    pub spectrum: Spectrum,
    pub method: ThresholdMethod,
    /// Objective value at `alpha`.
    pub objective: f64,
    pub dense_solves: usize,
    pub hint: Option<ThresholdHint>,
}

/// Where the previous root sat: its relative position in the analytic
/// bracket and the gauge eigenvalue of the lasing mode. Both are invariant
/// under rescaling the pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdHint {
    pub position: f64,
    pub nu: Complex64,
}

/// Reusable workspace for repeated threshold searches on one array geometry.
#[derive(Debug, Clone)]
pub struct ThresholdSolver {
    params: ArrayParams,
    n: usize,
    bandwidth: usize,
    /// Off-diagonal entries of `Q` as `(row, col, value)`, row-major order.
    coupling: Vec<(usize, usize, f64)>,
    work: RealWork,
    values: Vec<Complex64>,
    lu: BandLu,
    dense_solves: usize,
}

impl ThresholdSolver {
    pub fn new(params: &ArrayParams) -> Result<Self, ThresholdError> {
        params.validate()?;
        let n = params.sites();
        let signs = sublattice_mask(params.rows, params.cols);
        let signs = signs.signs();
        let mut coupling = Vec::new();
        for (i, j, kappa) in params.bonds() {
            coupling.push((i, j, -f64::from(signs[i]) * kappa));
            coupling.push((j, i, -f64::from(signs[j]) * kappa));
        }
        coupling.sort_by_key(|&(i, j, _)| (i, j));
        let bandwidth = if params.rows > 1 {
            params.cols
        } else {
            usize::from(params.cols > 1)
        };
        Ok(Self {
            params: *params,
            n,
            bandwidth,
            coupling,
            work: RealWork::new(n),
            values: Vec::with_capacity(n),
            lu: BandLu::new(n, bandwidth, bandwidth),
            dense_solves: 0,
        })
    }

    pub fn params(&self) -> &ArrayParams {
        &self.params
    }

    pub fn solve(&mut self, pump: &PumpPattern, method: ThresholdMethod) -> Result<ThresholdResult, ThresholdError> {
        self.solve_with_hint(pump, method, None)
    }

    /// Like [`ThresholdSolver::solve`], but starts tracking from the lasing
    /// mode of a similar, earlier pump. Saves the initial dense solve when
    /// the mode is still the most amplified one. The hint only affects the
    /// path to the root, not which root conditions are enforced.
    pub fn solve_with_hint(
        &mut self,
        pump: &PumpPattern,
        method: ThresholdMethod,
        hint: Option<&ThresholdHint>,
    ) -> Result<ThresholdResult, ThresholdError> {
        pump.check_shape(&self.params)?;
        self.dense_solves = 0;
        let gains = pump.gains();
        let gamma = self.params.gamma;
        let pmax = pump.max_gain();
        if !(pmax > 0.0) {
            return Err(ThresholdError::NoThresholdReachable);
        }
        let pmean = pump.mean_gain();
        let offset = match method {
            ThresholdMethod::ExactMax => 0.0,
            ThresholdMethod::Lse { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(ThresholdError::InvalidMethod(format!(
                        "lse beta must be positive, got {beta}"
                    )));
                }
                // Jensen: lse >= mean + ln(N)/beta, so at alpha = 0 (all
                // Im eps = -gamma) a nonnegative value means it never drops
                // below zero for any alpha.
                (self.n as f64).ln() / beta
            }
        };
        if offset >= gamma {
            return Err(ThresholdError::BracketExhausted(format!(
                "objective at alpha = 0 is {} >= 0 and bounded below by that value for all alpha",
                offset - gamma
            )));
        }
        let lo = (gamma - offset) / pmax;
        let hi = (gamma - offset) / pmean;

        let alpha = if hi <= lo {
            // Uniform pump: both bounds coincide and are attained.
            self.objective(gains, lo, method)?;
            lo
        } else {
            match method {
                ThresholdMethod::ExactMax => self.solve_exact_max(gains, lo, hi, hint)?,
                ThresholdMethod::Lse { .. } => self.brent_on_dense(gains, method, lo, None, hi, None)?,
            }
        };
        // `self.values` holds the spectrum at `alpha` at this point.
        let objective = self.objective_from_values(method);
        if !(objective.abs() <= THRESHOLD_TOLERANCE) && method == ThresholdMethod::ExactMax {
            return Err(ThresholdError::NoConvergence {
                lo,
                hi,
                iterations: self.dense_solves,
            });
        }
        let hint = (hi > lo).then(|| ThresholdHint {
            position: (alpha - lo) / (hi - lo),
            nu: self.rightmost(),
        });
        Ok(ThresholdResult {
            alpha,
            hint,
            scaled_pump: pump.scaled(alpha),
            spectrum: Spectrum::from_eigenvalues(self.values.iter().map(|&nu| gauge_to_energy(nu)).collect()),
            method,
            objective,
            dense_solves: self.dense_solves,
        })
    }

    fn solve_exact_max(
        &mut self,
        gains: &[f64],
        mut lo: f64,
        mut hi: f64,
        hint: Option<&ThresholdHint>,
    ) -> Result<f64, ThresholdError> {
        let method = ThresholdMethod::ExactMax;
        let mut f_lo = None;
        let mut f_hi = None;
        let warm = hint.and_then(|h| {
            let start = lo + h.position.clamp(0.0, 1.0) * (hi - lo);
            self.track(gains, start, h.nu, lo, hi)
        });
        let mut alpha = warm.unwrap_or(0.5 * (lo + hi));
        let mut f = self.objective(gains, alpha, method)?;
        for _ in 0..=MAX_RESTARTS {
            if f.abs() <= TRACK_ACCEPT {
                return Ok(alpha);
            }
            if f < 0.0 {
                lo = alpha;
                f_lo = Some(f);
            } else {
                hi = alpha;
                f_hi = Some(f);
            }
            let nu = self.rightmost();
            let Some(next) = self.track(gains, alpha, nu, lo, hi) else {
                break;
            };
            alpha = next;
            f = self.objective(gains, alpha, method)?;
        }
        if f.abs() <= TRACK_ACCEPT {
            return Ok(alpha);
        }
        self.brent_on_dense(gains, method, lo, f_lo, hi, f_hi)
    }

    fn brent_on_dense(
        &mut self,
        gains: &[f64],
        method: ThresholdMethod,
        lo: f64,
        f_lo: Option<f64>,
        hi: f64,
        f_hi: Option<f64>,
    ) -> Result<f64, ThresholdError> {
        // The analytic bracket ends can be attained up to rounding, in which
        // case the end itself is the root.
        let f_lo = match f_lo {
            Some(v) => v,
            None => self.objective(gains, lo, method)?,
        };
        if f_lo.abs() <= TRACK_ACCEPT {
            self.objective(gains, lo, method)?;
            return Ok(lo);
        }
        let f_hi = match f_hi {
            Some(v) => v,
            None => self.objective(gains, hi, method)?,
        };
        if f_hi.abs() <= TRACK_ACCEPT {
            self.objective(gains, hi, method)?;
            return Ok(hi);
        }
        let opts = BrentOptions {
            ftol: 0.0,
            xtol_rel: 4.0 * f64::EPSILON,
            max_iter: MAX_BRENT_ITERS,
        };
        let mut last = f64::NAN;
        let root = brent(
            |a| {
                last = a;
                self.objective(gains, a, method)
            },
            lo,
            hi,
            f_lo,
            f_hi,
            &opts,
        )
        .map_err(|e| match e {
            RootError::Eval(e) => e,
            RootError::NotBracketed { a, b, fa, fb } => {
                ThresholdError::BracketExhausted(format!("f({a}) = {fa}, f({b}) = {fb}"))
            }
            RootError::NoConvergence { iterations, a, b } => ThresholdError::NoConvergence {
                lo: a,
                hi: b,
                iterations,
            },
        })?;
        if root.x != last {
            self.objective(gains, root.x, method)?;
        }
        Ok(root.x)
    }

    /// Dense eigenvalues of `Q(alpha)` into `self.values`; returns the objective.
    fn objective(&mut self, gains: &[f64], alpha: f64, method: ThresholdMethod) -> Result<f64, ThresholdError> {
        let n = self.n;
        let gamma = self.params.gamma;
        let a = self.work.matrix_mut();
        a.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.coupling {
            a[i * n + j] = v;
        }
        for (k, g) in gains.iter().enumerate() {
            a[k * n + k] = g * alpha - gamma;
        }
        self.work.eigenvalues_into(&mut self.values)?;
        self.dense_solves += 1;
        Ok(self.objective_from_values(method))
    }

    fn objective_from_values(&self, method: ThresholdMethod) -> f64 {
        let max = self.values.iter().map(|nu| nu.re).fold(f64::NEG_INFINITY, f64::max);
        match method {
            ThresholdMethod::ExactMax => max,
            ThresholdMethod::Lse { beta } => {
                let s: f64 = self.values.iter().map(|nu| (beta * (nu.re - max)).exp()).sum();
                max + s.ln() / beta
            }
        }
    }

    fn rightmost(&self) -> Complex64 {
        let mut best = self.values[0];
        for &nu in &self.values[1..] {
            if nu.re > best.re {
                best = nu;
            }
        }
        best
    }

    /// Newton iteration on `Re nu(alpha) = 0` for the eigenvalue branch
    /// through `nu` at `alpha`. Returns `None` when the branch cannot be
    /// followed inside `[lo, hi]`.
    fn track(&mut self, gains: &[f64], mut alpha: f64, mut nu: Complex64, lo: f64, hi: f64) -> Option<f64> {
        let n = self.n;
        let gamma = self.params.gamma;
        let bw = self.bandwidth;
        let start: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, 0.7 + 1.3 * k as f64))
            .collect();
        let mut w = start.clone();
        let mut u = start;
        let slack = 1e-12 * hi;
        for iter in 0..MAX_TRACK_ITERS {
            self.lu.clear();
            for (k, g) in gains.iter().enumerate() {
                self.lu.set(k, k, Complex64::new(g * alpha - gamma, 0.0) - nu);
            }
            for &(i, j, v) in &self.coupling {
                if i.abs_diff(j) <= bw {
                    self.lu.set(i, j, Complex64::new(v, 0.0));
                }
            }
            self.lu.factor(f64::EPSILON);
            for _ in 0..if iter == 0 { 2 } else { 1 } {
                self.lu.solve(&mut w);
                self.lu.solve_adjoint(&mut u);
                if !(normalize(&mut w) && normalize(&mut u)) {
                    return None;
                }
            }
            let mut uw = Complex64::new(0.0, 0.0);
            let mut uqw = Complex64::new(0.0, 0.0);
            let mut upw = Complex64::new(0.0, 0.0);
            for (k, g) in gains.iter().enumerate() {
                let c = u[k].conj() * w[k];
                uw += c;
                upw += c * g;
                uqw += c * (g * alpha - gamma);
            }
            for &(i, j, v) in &self.coupling {
                uqw += u[i].conj() * w[j] * v;
            }
            if uw.norm() < 1e-6 {
                // Nearly defective: derivative ill-defined.
                return None;
            }
            let rq = uqw / uw;
            let d = upw / uw;
            if !(d.re > 0.0) {
                return None;
            }
            let step = -rq.re / d.re;
            let next = alpha + step;
            if !(next >= lo - slack && next <= hi + slack) {
                return None;
            }
            nu = rq + d * step;
            alpha = next;
            // Convergence is quadratic, so the error left after a step this
            // small is far below rounding. The dense check that follows
            // certifies the result anyway.
            if step.abs() <= 1e-9 * alpha {
                return Some(alpha);
            }
        }
        None
    }
}

fn normalize(v: &mut [Complex64]) -> bool {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    true
}

/// Scales `pump` so that its most amplified mode sits exactly at threshold.
pub fn threshold_scale(
    pump: &PumpPattern,
    params: &ArrayParams,
    method: ThresholdMethod,
) -> Result<ThresholdResult, ThresholdError> {
    ThresholdSolver::new(params)?.solve(pump, method)
}
