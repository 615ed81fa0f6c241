//! LU factorization with partial pivoting for complex band matrices.
//!
//! Storage is dense row-major; only the band is touched, so a factorization
//! costs `O(n * kl * (kl + ku))`. Row interchanges follow the progressive
//! convention (multipliers are never permuted), which keeps `L` inside the
//! original lower bandwidth.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            lu: vec![ZERO; n * n],
            piv: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Clears the storage so the band can be refilled with [`BandLu::set`].
    pub fn clear(&mut self) {
        self.lu.iter_mut().for_each(|z| *z = ZERO);
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "entry ({i}, {j}) outside band");
        self.lu[i * self.n + j] = value;
    }

    /// Factorizes the stored matrix in place. Exactly zero pivots are
    /// replaced by `tiny` so that shifted inverse iteration at an exact
    /// eigenvalue still produces a usable solve.
    pub fn factor(&mut self, tiny: f64) {
        let n = self.n;
        let width = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + width).min(n - 1);
            let mut p = k;
            let mut best = self.lu[k * n + k].norm_sqr();
            for r in k + 1..=last_row {
                let v = self.lu[r * n + k].norm_sqr();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    self.lu.swap(k * n + j, p * n + j);
                }
            }
            if self.lu[k * n + k].norm_sqr() == 0.0 {
                self.lu[k * n + k] = Complex64::new(tiny, 0.0);
            }
            let pivot = self.lu[k * n + k];
            for r in k + 1..=last_row {
                let m = self.lu[r * n + k] / pivot;
                self.lu[r * n + k] = m;
                if m != ZERO {
                    let (top, bottom) = self.lu.split_at_mut(r * n);
                    let src = &top[k * n + k + 1..k * n + last_col + 1];
                    let dst = &mut bottom[k + 1..last_col + 1];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= m * s;
                    }
                }
            }
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let n = self.n;
        let width = self.kl + self.ku;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                b[r] -= self.lu[r * n + k] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + width).min(n - 1) {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }

    /// Solves `A^H y = c` in place.
    pub fn solve_adjoint(&self, c: &mut [Complex64]) {
        let n = self.n;
        let width = self.kl + self.ku;
        for i in 0..n {
            let mut s = c[i];
            for j in i.saturating_sub(width)..i {
                s -= self.lu[j * n + i].conj() * c[j];
            }
            c[i] = s / self.lu[i * n + i].conj();
        }
        for k in (0..n).rev() {
            let mut s = ZERO;
            for r in k + 1..=(k + self.kl).min(n - 1) {
                s += self.lu[r * n + k].conj() * c[r];
            }
            c[k] -= s;
            c.swap(k, self.piv[k]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(n: usize, a: &[Complex64], x: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if adjoint {
                            a[j * n + i].conj() * x[j]
                        } else {
                            a[i * n + j] * x[j]
                        }
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn solves_band_system_and_its_adjoint() {
        let (n, kl, ku) = (20, 3, 2);
        let mut a = vec![ZERO; n * n];
        let mut lu = BandLu::new(n, kl, ku);
        let mut seed = 3u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // Small diagonal forces pivoting.
                let scale = if i == j { 0.01 } else { 1.0 };
                let v = Complex64::new(next(), next()) * scale;
                a[i * n + j] = v;
                lu.set(i, j, v);
            }
        }
        lu.factor(1e-300);
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let mut b = matvec(n, &a, &x, false);
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-9, "{u} vs {v}");
        }
        let mut c = matvec(n, &a, &x, true);
        lu.solve_adjoint(&mut c);
        for (u, v) in c.iter().zip(&x) {
            assert!((u - v).norm() < 1e-9, "{u} vs {v}");
        }
    }
}
