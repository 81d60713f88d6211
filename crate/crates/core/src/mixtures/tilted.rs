//! Exponential tilting of a family along its single-letter deviation statistic.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model_families::{FamilySpec, Order};
use crate::numeric::{adaptive_legendre, fmt_vec, gauss_legendre, inv_sqrt_spd, log_sum_exp, max_eigenvalue};

/// Box `(-b/2, b/2)^{d×d}` of tilt matrices and its product Gauss–Legendre rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltingSpec {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Defaults to 9 per axis when `d = 1` and 5 otherwise.
    #[serde(default)]
    pub nodes_per_axis: Option<usize>,
}

fn default_half_width() -> f64 {
    0.5
}

impl Default for TiltingSpec {
    fn default() -> Self {
        TiltingSpec { half_width: default_half_width(), nodes_per_axis: None }
    }
}

impl TiltingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) || self.nodes_per_axis == Some(0) {
            return Err(Error::Config(format!("tilt box needs b > 0 and at least one node (b = {})", self.half_width)));
        }
        Ok(())
    }

    /// Tilt matrices (row-major `d×d`) with weights summing to one.
    pub fn beta_grid(&self, d: usize) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let m = self.nodes_per_axis.unwrap_or(if d == 1 { 9 } else { 5 });
        let (x, w) = gauss_legendre(m);
        let axes = d * d;
        let total = m.pow(axes as u32);
        let mut betas = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut entries = Vec::with_capacity(axes);
            let mut wt = 1.0;
            for _ in 0..axes {
                let k = idx % m;
                idx /= m;
                entries.push(0.25 * self.half_width * x[k] * 2.0);
                wt *= 0.5 * w[k];
            }
            betas.push(DMatrix::from_row_slice(d, d, &entries));
            weights.push(wt);
        }
        (betas, weights)
    }

    /// The `2^{d²}` corners of the box.
    pub fn corners(&self, d: usize) -> Vec<DMatrix<f64>> {
        let axes = d * d;
        (0..(1usize << axes))
            .map(|mask| {
                let e: Vec<f64> = (0..axes)
                    .map(|i| if mask >> i & 1 == 1 { 0.5 * self.half_width } else { -0.5 * self.half_width })
                    .collect();
                DMatrix::from_row_slice(d, d, &e)
            })
            .collect()
    }
}

/// Frobenius inner product `trace(V βᵀ)`.
fn frob(v: &DMatrix<f64>, beta: &DMatrix<f64>) -> f64 {
    v.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
}

/// Single-letter deviation statistics of a finite alphabet at `θ`: `(log p(x|θ), V(x|θ))` per symbol.
pub fn symbol_deviations(family: &FamilySpec, theta: &[f64]) -> Result<Vec<(f64, DMatrix<f64>)>> {
    let k = family
        .alphabet_size()
        .ok_or_else(|| Error::Unsupported("symbol table needs a finite alphabet".into()))?;
    let d = family.dim();
    let prep = family.prepare(theta)?;
    let root = inv_sqrt_spd(&family.fisher(theta)?, "Fisher information")?;
    (0..k)
        .map(|x| {
            let local = prep.eval(&[x as f64], Order::Info)?;
            let v = match local.info {
                Some(info) if local.logp.is_finite() => &root * info * &root - DMatrix::identity(d, d),
                _ => DMatrix::zeros(d, d),
            };
            Ok((local.logp, v))
        })
        .collect()
}

/// Contaminated Gaussian, one dimension: `V(z) = Ĵ₁(z)/j - 1` at offset `z = x - θ`.
fn contaminated_deviation(family: &FamilySpec, z: f64) -> Result<(f64, f64)> {
    let FamilySpec::ContaminatedGaussian(p) = family else { unreachable!() };
    let j = p.fisher_scalar()?;
    let wt = p.weights(z * z);
    let a = 1.0 - 1.0 / (p.s * p.s);
    Ok((wt.logp, (wt.w - a * a * wt.q * z * z) / j - 1.0))
}

fn tilt_supported(family: &FamilySpec) -> Result<()> {
    match family {
        FamilySpec::ContaminatedGaussian(p) if p.d != 1 => {
            Err(Error::Unsupported("tilting a contaminated Gaussian needs d = 1".into()))
        }
        _ => Ok(()),
    }
}

/// `ψ(θ, β) = log E_θ exp(trace(V(X|θ) βᵀ))`.
pub fn psi(family: &FamilySpec, theta: &[f64], beta: &DMatrix<f64>) -> Result<f64> {
    tilt_supported(family)?;
    let value = if family.is_exponential() {
        // V vanishes identically
        0.0
    } else if let FamilySpec::ContaminatedGaussian(p) = family {
        let j = p.fisher_scalar()?;
        let a = 1.0 - 1.0 / (p.s * p.s);
        let b = beta[(0, 0)];
        let f = |z: f64| {
            let wt = p.weights(z * z);
            (wt.logp + b * ((wt.w - a * a * wt.q * z * z) / j - 1.0)).exp()
        };
        let reach = 40.0 * p.s;
        adaptive_legendre(&f, -reach, reach, 1e-13)?.ln()
    } else {
        let table = symbol_deviations(family, theta)?;
        let a: Vec<f64> = table.iter().map(|(lp, v)| lp + frob(v, beta)).collect();
        log_sum_exp(&a)
    };
    if !value.is_finite() {
        return Err(Error::TiltNotFinite { theta: fmt_vec(theta), beta: fmt_vec(beta.as_slice()) });
    }
    Ok(value)
}

/// `log p_e(x|θ,β) = log p(x|θ) + trace(V(x|θ) βᵀ) - ψ(θ,β)`.
pub fn tilted_log_density(family: &FamilySpec, theta: &[f64], beta: &DMatrix<f64>, x: &[f64]) -> Result<f64> {
    tilt_supported(family)?;
    if family.is_exponential() {
        return family.log_likelihood(theta, x);
    }
    let shift = psi(family, theta, beta)?;
    if matches!(family, FamilySpec::ContaminatedGaussian(_)) {
        let (lp, v) = contaminated_deviation(family, x[0] - theta[0])?;
        return Ok(lp + beta[(0, 0)] * v - shift);
    }
    let i = crate::model_families::symbol_index(x[0], family.finite_alphabet()?)?;
    let table = symbol_deviations(family, theta)?;
    Ok(table[i].0 + frob(&table[i].1, beta) - shift)
}

/// Log tilted densities on a product grid of `θ` nodes and `β` nodes.
#[derive(Clone, Debug)]
pub(crate) enum TiltTables {
    /// `logp[(i * betas + j) * k + x]`.
    Finite { logp: Vec<f64> },
    /// Location family: `ψ` depends on `β` only.
    Contaminated { psi: Vec<f64> },
}

#[derive(Clone, Debug)]
pub(crate) struct TiltBuild {
    pub tables: TiltTables,
    pub betas: Vec<DMatrix<f64>>,
    pub beta_log_weights: Vec<f64>,
    pub lambda_star: Option<f64>,
}

pub(crate) fn build_tables(family: &FamilySpec, nodes: &[Vec<f64>], spec: &TiltingSpec) -> Result<TiltBuild> {
    spec.validate()?;
    tilt_supported(family)?;
    let d = family.dim();
    let (betas, bw) = spec.beta_grid(d);
    let beta_log_weights: Vec<f64> = bw.iter().map(|w| w.ln()).collect();
    let corners = spec.corners(d);
    if let FamilySpec::ContaminatedGaussian(_) = family {
        for c in &corners {
            psi(family, &[0.0], c)?;
        }
        let psi_vals = betas.iter().map(|b| psi(family, &[0.0], b)).collect::<Result<_>>()?;
        return Ok(TiltBuild { tables: TiltTables::Contaminated { psi: psi_vals }, betas, beta_log_weights, lambda_star: None });
    }
    let k = family.finite_alphabet()?;
    let mut logp = Vec::with_capacity(nodes.len() * betas.len() * k);
    let mut lambda_star: f64 = 0.0;
    let dd = d * d;
    for theta in nodes {
        let table = symbol_deviations(family, theta)?;
        let tilt_at = |beta: &DMatrix<f64>| -> Result<Vec<f64>> {
            let a: Vec<f64> = table.iter().map(|(lp, v)| lp + frob(v, beta)).collect();
            let z = log_sum_exp(&a);
            if !z.is_finite() {
                return Err(Error::TiltNotFinite { theta: fmt_vec(theta), beta: fmt_vec(beta.as_slice()) });
            }
            Ok(a.iter().map(|v| v - z).collect())
        };
        for c in &corners {
            tilt_at(c)?;
        }
        for beta in &betas {
            let row = tilt_at(beta)?;
            // covariance of vec(V) under the tilted law
            let mut mean = DMatrix::<f64>::zeros(dd, 1);
            for (lp, (_, v)) in row.iter().zip(&table) {
                let p = lp.exp();
                for (m, e) in mean.iter_mut().zip(v.iter()) {
                    *m += p * e;
                }
            }
            let mut cov = DMatrix::<f64>::zeros(dd, dd);
            for (lp, (_, v)) in row.iter().zip(&table) {
                let p = lp.exp();
                if p == 0.0 {
                    continue;
                }
                let c = DMatrix::from_iterator(dd, 1, v.iter().copied()) - &mean;
                cov += &c * c.transpose() * p;
            }
            lambda_star = lambda_star.max(max_eigenvalue(&cov));
            logp.extend(row);
        }
    }
    Ok(TiltBuild { tables: TiltTables::Finite { logp }, betas, beta_log_weights, lambda_star: Some(lambda_star) })
}

pub(crate) fn contaminated_deviation_at(family: &FamilySpec, z: f64) -> Result<(f64, f64)> {
    contaminated_deviation(family, z)
}
