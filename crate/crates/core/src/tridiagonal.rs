//! Eigenpairs of real symmetric tridiagonal matrices with a constant
//! off-diagonal, as produced by second-order finite differences of radial
//! Schrödinger operators.
//!
//! Eigenvalues are located by shifted inverse iteration followed by Rayleigh
//! quotient iteration and certified by Sturm counts; bisection on the Sturm
//! count is the fallback when the iteration lands on the wrong index.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `diag` and every
/// off-diagonal entry equal to `off`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: f64,
}

/// Deterministic start vector with components along every eigenvector.
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    norm
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: f64) -> Self {
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let b2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut d = 1.0;
        for (i, &a) in self.diag.iter().enumerate() {
            d = if i == 0 { a - x } else { a - x - b2 / d };
            if d == 0.0 {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, &a| m.min(a)) - r;
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a)) + r;
        (lo, hi)
    }

    /// `x ← (A − σ)^{−1} x` by Gaussian elimination without pivoting;
    /// vanishing pivots are replaced by a tiny value, which is harmless for
    /// inverse iteration.
    fn shifted_solve(&self, sigma: f64, x: &mut [f64], work: &mut [f64]) {
        let n = self.len();
        let b = self.off;
        let guard = 1e-300_f64.max(f64::EPSILON * b.abs() * 1e-6);
        // work holds the modified super-diagonal ratios c'_i = b / d_i.
        let mut d = self.diag[0] - sigma;
        if d.abs() < guard {
            d = guard;
        }
        work[0] = b / d;
        x[0] /= d;
        for i in 1..n {
            d = self.diag[i] - sigma - b * work[i - 1];
            if d.abs() < guard {
                d = guard;
            }
            work[i] = b / d;
            x[i] = (x[i] - b * x[i - 1]) / d;
        }
        for i in (0..n - 1).rev() {
            x[i] -= work[i] * x[i + 1];
        }
    }

    fn rayleigh(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut num = 0.0;
        for i in 0..n {
            let mut ax = self.diag[i] * x[i];
            if i > 0 {
                ax += self.off * x[i - 1];
            }
            if i + 1 < n {
                ax += self.off * x[i + 1];
            }
            num += x[i] * ax;
        }
        num / x.iter().map(|v| v * v).sum::<f64>()
    }

    /// Eigenvector for an accurately known eigenvalue, unit Euclidean norm.
    pub fn eigenvector(&self, eigenvalue: f64, scale: f64) -> Vec<f64> {
        let n = self.len();
        let mut x = start_vector(n);
        let mut work = vec![0.0; n];
        let shift = eigenvalue + 1e-13 * scale.max(eigenvalue.abs());
        for _ in 0..2 {
            self.shifted_solve(shift, &mut x, &mut work);
            normalize(&mut x);
        }
        // Fix the sign so that the first significant component is positive.
        if let Some(&first) = x.iter().find(|v| v.abs() > 1e-8) {
            if first < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
        }
        x
    }

    /// Index-`k` eigenvalue (ascending, zero-based) by bisection on the
    /// Sturm count inside `[lo, hi]`.
    pub fn bisect_eigenvalue(&self, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalue with index `k` starting from `guess`; the result is
    /// certified by Sturm counts with resolution `1e−9·scale`.
    pub fn eigenvalue_near(&self, k: usize, guess: f64, scale: f64) -> Result<f64> {
        let n = self.len();
        if k >= n {
            return Err(Error::Precondition(format!(
                "index {k} exceeds dimension {n}"
            )));
        }
        let mut x = start_vector(n);
        let mut work = vec![0.0; n];
        for _ in 0..2 {
            self.shifted_solve(guess, &mut x, &mut work);
            normalize(&mut x);
        }
        let mut sigma = self.rayleigh(&x);
        for _ in 0..12 {
            self.shifted_solve(sigma, &mut x, &mut work);
            normalize(&mut x);
            let next = self.rayleigh(&x);
            let done = (next - sigma).abs() <= 4.0 * f64::EPSILON * next.abs().max(scale);
            sigma = next;
            if done {
                break;
            }
        }
        let delta = 1e-9 * scale;
        if self.sturm_count(sigma - delta) == k && self.sturm_count(sigma + delta) == k + 1 {
            return Ok(sigma);
        }
        let (lo, hi) = self.gershgorin();
        let tol = 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(scale);
        Ok(self.bisect_eigenvalue(k, lo, hi, tol))
    }

    /// All eigenvalues below `cutoff`, ascending. `guesses` (for example the
    /// spectrum of a nearby matrix) speed up the search; missing guesses are
    /// extrapolated from the previous two eigenvalues, and the lowest one is
    /// located by coarse bisection when no guess is available. `spacing` is
    /// the typical eigenvalue spacing.
    pub fn eigenvalues_below(
        &self,
        cutoff: f64,
        guesses: &[f64],
        spacing: f64,
    ) -> Result<Vec<f64>> {
        let count = self.sturm_count(cutoff);
        let mut values: Vec<f64> = Vec::with_capacity(count);
        for k in 0..count {
            let guess = if let Some(&g) = guesses.get(k) {
                g
            } else if k >= 2 {
                2.0 * values[k - 1] - values[k - 2]
            } else if k == 1 {
                values[0] + spacing
            } else {
                let (lo, _) = self.gershgorin();
                self.bisect_eigenvalue(0, lo, cutoff, 0.05 * spacing)
            };
            values.push(self.eigenvalue_near(k, guess, spacing)?);
        }
        Ok(values)
    }
}
