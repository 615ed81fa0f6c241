//! Time-domain integration of `i d(psi)/dt = H psi`.
//!
//! Serves as an independent check on the eigensolvers: the asymptotic
//! exponential growth rate of a generic state equals `max Im eps`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::{Hamiltonian, StateVector};

pub const DEFAULT_STEP: f64 = 0.01;
const DEFAULT_SEED: u64 = 0x005e_ed0f_9a1e;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("horizon {horizon} is shorter than the step {step}")]
    InvalidHorizon { horizon: f64, step: f64 },
    #[error("initial state has {got} entries, Hamiltonian has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state became non-finite at t = {time}; retry with a horizon of at most {suggested_horizon}")]
    NonFinite { time: f64, suggested_horizon: f64 },
}

/// Nonzero entries of `-iH` as `(row, col, value)`.
struct Generator {
    n: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl Generator {
    fn new(h: &Hamiltonian) -> Self {
        let n = h.dim();
        let minus_i = Complex64::new(0.0, -1.0);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = h.get(i, j);
                if z != Complex64::new(0.0, 0.0) {
                    entries.push((i, j, minus_i * z));
                }
            }
        }
        Self { n, entries }
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
    }
}

struct Rk4 {
    gen: Generator,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(h: &Hamiltonian) -> Self {
        let gen = Generator::new(h);
        let zero = vec![Complex64::new(0.0, 0.0); gen.n];
        Self {
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            tmp: zero,
            gen,
        }
    }

    fn step(&mut self, psi: &mut [Complex64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.gen.apply(psi, k1);
        for ((t, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(k1.iter()) {
            *t = p + k * (0.5 * dt);
        }
        self.gen.apply(&self.tmp, k2);
        for ((t, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(k2.iter()) {
            *t = p + k * (0.5 * dt);
        }
        self.gen.apply(&self.tmp, k3);
        for ((t, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(k3.iter()) {
            *t = p + k * dt;
        }
        self.gen.apply(&self.tmp, k4);
        for i in 0..psi.len() {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

/// Number of steps and the adjusted step that spans `horizon` exactly.
fn step_plan(horizon: f64, step: f64) -> Result<(usize, f64), DynamicsError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(DynamicsError::InvalidStep(step));
    }
    if !(horizon >= step && horizon.is_finite()) {
        return Err(DynamicsError::InvalidHorizon { horizon, step });
    }
    let count = (horizon / step).round().max(1.0) as usize;
    Ok((count, horizon / count as f64))
}

/// Integrates with classical fourth-order Runge-Kutta. The step is shrunk
/// slightly if needed so that a whole number of steps reaches `horizon`.
pub fn evolve(h: &Hamiltonian, psi0: &StateVector, horizon: f64, step: f64) -> Result<StateVector, DynamicsError> {
    if psi0.len() != h.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: h.dim(),
            got: psi0.len(),
        });
    }
    let (count, dt) = step_plan(horizon, step)?;
    let mut rk = Rk4::new(h);
    let mut psi = psi0.0.clone();
    for s in 0..count {
        rk.step(&mut psi, dt);
        if !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            let time = (s + 1) as f64 * dt;
            return Err(DynamicsError::NonFinite {
                time,
                suggested_horizon: 0.5 * time,
            });
        }
    }
    Ok(StateVector(psi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthOptions {
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    /// RMS of the log-norm fit residual above which the estimate is flagged.
    pub residual_tolerance: f64,
}

impl GrowthOptions {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            step: DEFAULT_STEP,
            seed: DEFAULT_SEED,
            residual_tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    /// Largest `ln |mu| / dt` over Ritz values `mu` of the one-interval
    /// propagator, fitted on the last few trajectory snapshots. Unlike the
    /// slope it is unaffected by beating between modes of equal `Im eps`.
    pub rate: f64,
    /// Least-squares slope of `log |psi(t)|` over the final third.
    pub slope: f64,
    pub residual_rms: f64,
    /// Set when the log-norm is visibly not a straight line, typically
    /// because two modes share the largest `Im eps` and beat.
    pub flagged: bool,
}

pub fn growth_rate(h: &Hamiltonian, horizon: f64) -> Result<GrowthEstimate, DynamicsError> {
    growth_rate_with(h, &GrowthOptions::with_horizon(horizon))
}

/// Snapshots kept for the Ritz fit and their spacing in time units.
const RITZ_SNAPSHOTS: usize = 9;
const RITZ_SPACING: f64 = 1.0;

/// Growth of `|psi(t)|` from a unit-modulus state with seeded random phases.
/// The state is renormalized every step so long horizons cannot overflow.
pub fn growth_rate_with(h: &Hamiltonian, opts: &GrowthOptions) -> Result<GrowthEstimate, DynamicsError> {
    let (count, dt) = step_plan(opts.horizon, opts.step)?;
    let n = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut psi: Vec<Complex64> = (0..n)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let mut log_norm = 0.0;
    normalize(&mut psi, &mut log_norm);

    let stride = ((RITZ_SPACING / dt).round() as usize).max(1);
    let first_snapshot = count.saturating_sub(stride * (RITZ_SNAPSHOTS - 1));
    let mut snapshots: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(RITZ_SNAPSHOTS);
    let start = count - count / 3;
    let mut window = Vec::with_capacity(count - start + 1);
    let mut rk = Rk4::new(h);
    for s in 1..=count {
        rk.step(&mut psi, dt);
        if !normalize(&mut psi, &mut log_norm) {
            let time = s as f64 * dt;
            return Err(DynamicsError::NonFinite {
                time,
                suggested_horizon: 0.5 * time,
            });
        }
        if s >= start {
            window.push(((s - start) as f64 * dt, log_norm));
        }
        if s >= first_snapshot && (s - first_snapshot) % stride == 0 && snapshots.len() < RITZ_SNAPSHOTS {
            snapshots.push((log_norm, psi.clone()));
        }
    }
    let (slope, residual_rms) = line_fit(&window);
    let flagged = residual_rms > opts.residual_tolerance;
    let rate = ritz_rate(&snapshots, stride as f64 * dt).unwrap_or(slope);
    Ok(GrowthEstimate {
        rate,
        slope,
        residual_rms,
        flagged,
    })
}

/// Slope and RMS residual of the least-squares line through `points`.
fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let m = points.len() as f64;
    let (mt, my) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / m, b + y / m));
    let (mut stt, mut sty) = (0.0, 0.0);
    for (t, y) in points {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let ss: f64 = points.iter().map(|(t, y)| (y - my - slope * (t - mt)).powi(2)).sum();
    (slope, (ss / m).sqrt())
}

/// Largest `ln |mu| / spacing` over the Ritz values `mu` of the propagator
/// restricted to the Krylov space spanned by consecutive snapshots. Each
/// snapshot is stored normalized together with its accumulated log-norm.
fn ritz_rate(snapshots: &[(f64, Vec<Complex64>)], spacing: f64) -> Option<f64> {
    if snapshots.len() < 2 {
        return None;
    }
    let base = snapshots[0].0;
    let scaled: Vec<Vec<Complex64>> = snapshots
        .iter()
        .map(|(l, v)| {
            let f = (l - base).exp();
            v.iter().map(|z| z * f).collect()
        })
        .collect();
    // Gram-Schmidt on x_0, x_1, ... until the next snapshot adds nothing new.
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    let mut r: Vec<Vec<Complex64>> = Vec::new();
    for x in &scaled[..scaled.len() - 1] {
        let mut w = x.clone();
        let mut col = vec![Complex64::new(0.0, 0.0); q.len() + 1];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &w);
                col[k] += c;
                w.iter_mut().zip(qk).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = dot(&w, &w).re.sqrt();
        let xnorm = dot(x, x).re.sqrt();
        if norm <= 1e-9 * xnorm {
            break;
        }
        col[q.len()] = Complex64::new(norm, 0.0);
        w.iter_mut().for_each(|a| *a /= norm);
        q.push(w);
        r.push(col);
    }
    let d = q.len();
    if d == 0 {
        return None;
    }
    // Small matrix Q^H Y R^-1 with Y = [x_1 .. x_d].
    let mut qy = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            qy[i * d + j] = dot(&q[i], &scaled[j + 1]);
        }
    }
    let mut small = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        // Row i of qy times R^-1: solve z R = row by forward substitution.
        for j in 0..d {
            let mut s = qy[i * d + j];
            for k in 0..j {
                s -= small[i * d + k] * r[j][k];
            }
            small[i * d + j] = s / r[j][j];
        }
    }
    let eig = crate::linalg::complex_eig::eig(d, &small).ok()?;
    eig.values
        .iter()
        .map(|mu| mu.norm().ln() / spacing)
        .filter(|x| x.is_finite())
        .reduce(f64::max)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(psi: &mut [Complex64], log_norm: &mut f64) -> bool {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return false;
    }
    *log_norm += norm.ln();
    psi.iter_mut().for_each(|z| *z /= norm);
    true
}
