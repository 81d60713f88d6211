//! Special functions, quadrature rules and small symmetric-matrix helpers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Float;

use crate::error::{Error, Result};

/// Smallest eigenvalue accepted when taking inverse square roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Running log-sum-exp, merged in any order.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // modified Lentz on the continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (1.0 - (h.ln() + log_prefix).exp()).max(0.0)
    }
}

/// P(chi^2_d <= x).
pub fn chi_square_cdf(d: usize, x: f64) -> f64 {
    gamma_p(d as f64 / 2.0, x / 2.0)
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    (h * PI.ln() - ln_gamma(h + 1.0)).exp()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Adaptive Gauss–Legendre on `[a, b]`: a 15-node panel is accepted when it agrees
/// with its two halves to `rel_tol` relative to the running total.
pub fn adaptive_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (x, w) = gauss_legendre(15);
    let panel = |lo: f64, hi: f64| -> f64 {
        let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        x.iter().zip(&w).map(|(xi, wi)| wi * f(m + h * xi)).sum::<f64>() * h
    };
    let whole = panel(a, b);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (l, r) = (panel(lo, mid), panel(mid, hi));
        if !(l + r).is_finite() {
            return Err(Error::Numerical {
                context: "adaptive quadrature".into(),
                detail: format!("non-finite integrand on [{lo}, {hi}]"),
            });
        }
        if ((l + r) - est).abs() <= rel_tol * scale * 1e-2 || depth >= 48 {
            if depth >= 48 {
                return Err(Error::Numerical {
                    context: "adaptive quadrature".into(),
                    detail: format!("no convergence on [{lo}, {hi}]"),
                });
            }
            total += l + r;
        } else {
            stack.push((lo, mid, l, depth + 1));
            stack.push((mid, hi, r, depth + 1));
        }
    }
    Ok(total)
}

/// Gauss–Hermite rule for the standard normal: E f(Z) ≈ Σ w_i f(z_i).
///
/// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v * v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    // symmetrize against rounding
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.iter().map(|p| (p.0, p.1 / total)).unzip()
}

/// Gauss–Jacobi rule for the Beta(p, q) law on (0, 1): E f(V) ≈ Σ w_i f(v_i),
/// exact for polynomials of degree below `2n`.
pub fn gauss_jacobi_beta(n: usize, p: f64, q: f64) -> (Vec<f64>, Vec<f64>) {
    // Jacobi weight (1-x)^a (1+x)^b on [-1, 1] with v = (1+x)/2
    let (a, b) = (q - 1.0, p - 1.0);
    let s = a + b;
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let den = (2.0 * kf + s) * (2.0 * kf + s + 2.0);
        let diag = if k == 0 { (b - a) / (s + 2.0) } else { (b * b - a * a) / den };
        jac[(k, k)] = 0.5 * (1.0 + diag);
        if k + 1 < n {
            let m = kf + 1.0;
            let t = 2.0 * m + s;
            let off2 = if k == 0 {
                // (1+s)/(1+s) cancels at the first step
                4.0 * (1.0 + a) * (1.0 + b) / (t * t * (t + 1.0))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + s) / (t * t * (t + 1.0) * (t - 1.0))
            };
            let off = 0.5 * off2.sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i].clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0), v * v)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(core::cmp::Ordering::Equal));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.iter().map(|p| (p.0, p.1 / total)).unzip()
}

/// Eigen-decomposition of a symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_spd(eig: &SymmetricEigen<f64, nalgebra::Dyn>, context: &str) -> Result<()> {
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= EIGEN_FLOOR) {
        return Err(Error::NotPositiveDefinite { context: context.into(), min_eigenvalue: min });
    }
    Ok(())
}

fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Symmetric positive-definite inverse square root.
pub fn inv_sqrt_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m);
    check_spd(&eig, context)?;
    Ok(spectral_map(&eig, |v| 1.0 / v.sqrt()))
}

/// Symmetric positive-definite square root.
pub fn sqrt_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m);
    check_spd(&eig, context)?;
    Ok(spectral_map(&eig, |v| v.sqrt()))
}

pub fn log_det_spd(m: &DMatrix<f64>, context: &str) -> Result<f64> {
    let eig = sym_eigen(m);
    check_spd(&eig, context)?;
    Ok(eig.eigenvalues.iter().map(|v| v.ln()).sum())
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).eigenvalues.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Number of count vectors of `k` non-negative parts summing to `n`, `C(n+k-1, k-1)`,
/// saturating at `u128::MAX`.
pub fn composition_count(n: u64, k: usize) -> u128 {
    if k == 0 {
        return (n == 0) as u128;
    }
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        // c = C(n+i, i), exact at every step
        c = match c.checked_mul(n as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

/// Calls `f` on every count vector of `k` parts summing to `n`, in lexicographic order.
pub fn for_each_composition(n: u64, k: usize, mut f: impl FnMut(&[u64])) {
    if k == 0 {
        if n == 0 {
            f(&[]);
        }
        return;
    }
    let mut c = vec![0u64; k];
    c[k - 1] = n;
    loop {
        f(&c);
        // advance: find the last non-final slot that can take one more from the tail
        let tail = c[k - 1];
        if k == 1 {
            return;
        }
        if tail > 0 {
            c[k - 2] += 1;
            c[k - 1] = tail - 1;
            continue;
        }
        let mut i = k - 2;
        loop {
            if c[i] > 0 {
                break;
            }
            if i == 0 {
                return;
            }
            i -= 1;
        }
        if i == 0 {
            return;
        }
        let moved = c[i];
        c[i] = 0;
        c[i - 1] += 1;
        c[k - 1] = moved - 1;
    }
}

/// `log(n! / ∏ c_i!)`.
pub fn log_multinomial(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    ln_gamma(n as f64 + 1.0) - counts.iter().map(|c| ln_gamma(*c as f64 + 1.0)).sum::<f64>()
}

pub(crate) fn fmt_vec(v: &[f64]) -> alloc::string::String {
    format!("{v:?}")
}
