//! Eigenvalues of a dense real matrix: stabilized elimination to upper
//! Hessenberg form followed by Francis double-shift QR.
//!
//! Only eigenvalues are produced. Complex eigenvalues come out as exact
//! conjugate pairs and real eigenvalues carry an imaginary part of exactly
//! zero, which the spectrum module relies on to identify zero-modes.

use num_complex::Complex64;

use super::LinalgError;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Row-major square scratch matrix. Reused across calls to avoid allocation
/// inside the threshold root search.
#[derive(Debug, Clone)]
pub struct RealWork {
    n: usize,
    a: Vec<f64>,
}

impl RealWork {
    pub fn new(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix_mut(&mut self) -> &mut [f64] {
        &mut self.a
    }

    /// Destroys the stored matrix and writes its eigenvalues into `out`.
    pub fn eigenvalues_into(&mut self, out: &mut Vec<Complex64>) -> Result<(), LinalgError> {
        out.clear();
        out.resize(self.n, Complex64::new(0.0, 0.0));
        reduce_hessenberg(self.n, &mut self.a);
        hessenberg_qr(self.n, &mut self.a, out)
    }
}

/// Eigenvalues of the row-major `n x n` matrix `a`.
pub fn eigenvalues(n: usize, a: &[f64]) -> Result<Vec<Complex64>, LinalgError> {
    assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
    let mut work = RealWork::new(n);
    work.a.copy_from_slice(a);
    let mut out = Vec::with_capacity(n);
    work.eigenvalues_into(&mut out)?;
    Ok(out)
}

/// Gaussian elimination with partial pivoting down to upper Hessenberg form.
/// Everything below the first subdiagonal is zeroed on return.
pub fn reduce_hessenberg(n: usize, a: &mut [f64]) {
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut pivot = 0.0f64;
        let mut p = m;
        for j in m..n {
            let v = a[j * n + m - 1];
            if v.abs() > pivot.abs() {
                pivot = v;
                p = j;
            }
        }
        if p != m {
            for j in (m - 1)..n {
                a.swap(p * n + j, m * n + j);
            }
            for j in 0..n {
                a.swap(j * n + p, j * n + m);
            }
        }
        if pivot != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i * n + m - 1];
                if y != 0.0 {
                    y /= pivot;
                    a[i * n + m - 1] = 0.0;
                    let (upper, lower) = a.split_at_mut(i * n);
                    let row_m = &upper[m * n..m * n + n];
                    let row_i = &mut lower[..n];
                    for j in m..n {
                        row_i[j] -= y * row_m[j];
                    }
                    for j in 0..n {
                        a[j * n + m] += y * a[j * n + i];
                    }
                }
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
pub fn hessenberg_qr(n: usize, a: &mut [f64], out: &mut [Complex64]) -> Result<(), LinalgError> {
    if n == 0 {
        return Ok(());
    }
    let idx = |i: usize, j: usize| i * n + j;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[idx(i, j)].abs();
        }
    }
    let eps = f64::EPSILON;
    let mut nn = n as isize - 1;
    let mut shift_total = 0.0;
    let mut its = 0usize;
    while nn >= 0 {
        let top = nn as usize;
        // Look for a single small subdiagonal element.
        let mut l = top;
        while l >= 1 {
            let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[idx(l, l - 1)].abs() <= eps * s {
                a[idx(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }
        let mut x = a[idx(top, top)];
        if l == top {
            out[top] = Complex64::new(x + shift_total, 0.0);
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[idx(top - 1, top - 1)];
        let mut w = a[idx(top, top - 1)] * a[idx(top - 1, top)];
        if l + 1 == top {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let z = q.abs().sqrt();
            x += shift_total;
            if q >= 0.0 {
                let z = p + z.copysign(p);
                out[top - 1] = Complex64::new(x + z, 0.0);
                out[top] = Complex64::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
            } else {
                out[top - 1] = Complex64::new(x + p, z);
                out[top] = Complex64::new(x + p, -z);
            }
            nn -= 2;
            its = 0;
            continue;
        }
        if its == MAX_SWEEPS_PER_EIGENVALUE {
            return Err(LinalgError::NoConvergence {
                index: top,
                iterations: its,
            });
        }
        if its > 0 && its.is_multiple_of(10) {
            // Exceptional shift.
            shift_total += x;
            for i in 0..=top {
                a[idx(i, i)] -= x;
            }
            let s = a[idx(top, top - 1)].abs() + a[idx(top - 1, top - 2)].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut m = top - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = a[idx(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
            q = a[idx(m + 1, m + 1)] - z - rr - ss;
            r = a[idx(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in (m + 2)..=top {
            a[idx(i, i - 2)] = 0.0;
            if i != m + 2 {
                a[idx(i, i - 3)] = 0.0;
            }
        }

        // Double-shift QR step on rows l..=top and columns m..=top.
        for k in m..top {
            let last = k + 1 == top;
            if k != m {
                p = a[idx(k, k - 1)];
                q = a[idx(k + 1, k - 1)];
                r = if last { 0.0 } else { a[idx(k + 2, k - 1)] };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = (p * p + q * q + r * r).sqrt().copysign(p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                }
            } else {
                a[idx(k, k - 1)] = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            let z = r / s;
            q /= p;
            r /= p;
            for j in k..=top {
                let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                if !last {
                    pp += r * a[idx(k + 2, j)];
                    a[idx(k + 2, j)] -= pp * z;
                }
                a[idx(k + 1, j)] -= pp * y;
                a[idx(k, j)] -= pp * x;
            }
            let mmin = top.min(k + 3);
            for i in l..=mmin {
                let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                if !last {
                    pp += z * a[idx(i, k + 2)];
                    a[idx(i, k + 2)] -= pp * r;
                }
                a[idx(i, k + 1)] -= pp * q;
                a[idx(i, k)] -= pp;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let ev = sorted(eigenvalues(3, &a).unwrap());
        let re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![-1.0, 2.0, 3.0]);
        assert!(ev.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn rotation_generator_has_conjugate_pair() {
        let a = [0.0, -2.0, 2.0, 0.0];
        let ev = sorted(eigenvalues(2, &a).unwrap());
        assert!((ev[0] - Complex64::new(0.0, -2.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let a = [
            10.0, -35.0, 50.0, -24.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ];
        let ev = sorted(eigenvalues(4, &a).unwrap());
        for (k, z) in ev.iter().enumerate() {
            assert!((z.re - (k + 1) as f64).abs() < 1e-10, "{z}");
            assert_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn empty_and_scalar() {
        assert!(eigenvalues(0, &[]).unwrap().is_empty());
        assert_eq!(eigenvalues(1, &[4.5]).unwrap(), vec![Complex64::new(4.5, 0.0)]);
    }
}
