//! Complete eigendecomposition of a dense complex matrix.
//!
//! Householder reduction to upper Hessenberg form, single-shift QR with
//! Wilkinson shifts to complex Schur form `A = Z T Z^H`, then eigenvectors
//! of the triangular factor by back substitution mapped through `Z`.

use num_complex::Complex64;

use super::LinalgError;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Eigenpairs of a complex matrix. Eigenvector `k` is column `k` of
/// `vectors` (row-major, `n x n`), normalized to unit 2-norm.
#[derive(Debug, Clone)]
pub struct ComplexEigen {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Complex64>,
    /// Total QR sweeps performed.
    pub sweeps: usize,
}

/// Eigenvalues and eigenvectors of the row-major `n x n` matrix `a`.
pub fn eig(n: usize, a: &[Complex64]) -> Result<ComplexEigen, LinalgError> {
    assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
    let mut t = a.to_vec();
    let mut z = identity(n);
    householder_hessenberg(n, &mut t, &mut z);
    let sweeps = schur_qr(n, &mut t, &mut z)?;
    let values: Vec<Complex64> = (0..n).map(|k| t[k * n + k]).collect();
    let vectors = triangular_eigenvectors(n, &t, &z);
    Ok(ComplexEigen {
        values,
        vectors,
        sweeps,
    })
}

fn identity(n: usize) -> Vec<Complex64> {
    let mut z = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        z[k * n + k] = Complex64::new(1.0, 0.0);
    }
    z
}

fn householder_hessenberg(n: usize, a: &mut [Complex64], z: &mut [Complex64]) {
    if n < 3 {
        return;
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let head = a[(k + 1) * n + k];
        let phase = if head.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            head / head.norm()
        };
        let alpha = -phase * norm;
        for i in 0..n {
            v[i] = if i > k { a[i * n + k] } else { Complex64::new(0.0, 0.0) };
        }
        v[k + 1] -= alpha;
        let vnorm: f64 = v[k + 1..].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for x in v[k + 1..].iter_mut() {
            *x /= vnorm;
        }
        // A <- (I - 2 v v^H) A
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for i in k + 1..n {
                s += v[i].conj() * a[i * n + j];
            }
            s *= 2.0;
            for i in k + 1..n {
                a[i * n + j] -= v[i] * s;
            }
        }
        // A <- A (I - 2 v v^H), Z <- Z (I - 2 v v^H)
        for m in [&mut *a, &mut *z] {
            for i in 0..n {
                let row = &mut m[i * n..i * n + n];
                let mut s = Complex64::new(0.0, 0.0);
                for j in k + 1..n {
                    s += row[j] * v[j];
                }
                s *= 2.0;
                for j in k + 1..n {
                    row[j] -= s * v[j].conj();
                }
            }
        }
        for i in k + 2..n {
            a[i * n + k] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(f, g)` to `(r, 0)`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let fn_ = f.norm();
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let norm = fn_.hypot(gn);
    let c = fn_ / norm;
    let s = (f / fn_) * g.conj() / norm;
    (c, s)
}

fn rotate_rows(n: usize, a: &mut [Complex64], p: usize, c: f64, s: Complex64, cols: std::ops::Range<usize>) {
    let q = p + 1;
    for j in cols {
        let x = a[p * n + j];
        let y = a[q * n + j];
        a[p * n + j] = x * c + s * y;
        a[q * n + j] = -s.conj() * x + y * c;
    }
}

fn rotate_cols(n: usize, a: &mut [Complex64], p: usize, c: f64, s: Complex64, rows: std::ops::Range<usize>) {
    let q = p + 1;
    for i in rows {
        let x = a[i * n + p];
        let y = a[i * n + q];
        a[i * n + p] = x * c + s.conj() * y;
        a[i * n + q] = -s * x + y * c;
    }
}

fn schur_qr(n: usize, h: &mut [Complex64], z: &mut [Complex64]) -> Result<usize, LinalgError> {
    if n == 0 {
        return Ok(0);
    }
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[i * n + j].norm();
        }
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut sweeps = 0usize;
    loop {
        let mut lo = hi;
        while lo > 0 {
            let mut s = h[(lo - 1) * n + lo - 1].norm() + h[lo * n + lo].norm();
            if s == 0.0 {
                s = anorm;
            }
            if h[lo * n + lo - 1].norm() <= eps * s {
                h[lo * n + lo - 1] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            if hi == 0 {
                break;
            }
            hi -= 1;
            its = 0;
            continue;
        }
        if its == MAX_SWEEPS_PER_EIGENVALUE {
            return Err(LinalgError::NoConvergence {
                index: hi,
                iterations: its,
            });
        }
        let shift = if its > 0 && its.is_multiple_of(10) {
            // Exceptional shift.
            h[hi * n + hi] + Complex64::new(0.75 * h[hi * n + hi - 1].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1) * n + hi - 1],
                h[(hi - 1) * n + hi],
                h[hi * n + hi - 1],
                h[hi * n + hi],
            )
        };
        its += 1;
        sweeps += 1;

        let mut f = h[lo * n + lo] - shift;
        let mut g = h[(lo + 1) * n + lo];
        for k in lo..hi {
            let (c, s) = givens(f, g);
            let col_start = if k > lo { k - 1 } else { k };
            rotate_rows(n, h, k, c, s, col_start..n);
            let row_end = (k + 3).min(hi + 1);
            rotate_cols(n, h, k, c, s, 0..row_end);
            rotate_cols(n, z, k, c, s, 0..n);
            if k > lo {
                h[(k + 1) * n + k - 1] = Complex64::new(0.0, 0.0);
            }
            if k + 1 < hi {
                f = h[(k + 1) * n + k];
                g = h[(k + 2) * n + k];
            }
        }
    }
    Ok(sweeps)
}

/// Eigenvalue of the trailing 2x2 block closer to its last diagonal entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn triangular_eigenvectors(n: usize, t: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
    let mut tnorm = 0.0f64;
    for i in 0..n {
        for j in i..n {
            tnorm = tnorm.max(t[i * n + j].norm());
        }
    }
    let small = f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);
    let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let lambda = t[k * n + k];
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[j * n + l] * y[l];
            }
            let mut d = t[j * n + j] - lambda;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            y[j] = -s / d;
            // Rescale to keep the partial solution bounded.
            let ymax = y[j].norm();
            if ymax > 1e100 {
                for v in y[..=k].iter_mut() {
                    *v /= ymax;
                }
            }
        }
        let mut norm = 0.0;
        for i in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for l in 0..=k {
                s += z[i * n + l] * y[l];
            }
            vectors[i * n + k] = s;
            norm += s.norm_sqr();
        }
        let norm = norm.sqrt();
        if norm > 0.0 {
            for i in 0..n {
                vectors[i * n + k] /= norm;
            }
        }
    }
    vectors
}
