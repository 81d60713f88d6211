use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use num_traits::Float;

use super::{Local, Order, Prep, ParamDomain};
use crate::error::{Error, Result};
use crate::numeric::{ln_gamma, log_sum_exp};

/// Which exponential family: a finite table of sufficient statistics, or one of two
/// infinite-support families with closed-form log-partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExponentialModel {
    /// Symbol `i` has statistic `stats[i]` and log reference mass `log_base[i]` (default 0).
    Finite {
        stats: Vec<Vec<f64>>,
        #[serde(default)]
        log_base: Option<Vec<f64>>,
    },
    /// Symbols are `0, -1, -2, ...`; `T(x) = x`, base measure `1/(-x)!`, `psi = exp(-theta)`.
    Poisson {},
    /// Real line, `T(x) = (x, x^2)`, natural parameters `(mu/sigma^2, -1/(2 sigma^2))`.
    Gaussian {},
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialPayload {
    pub d: usize,
    pub model: ExponentialModel,
    pub natural_domain: ParamDomain,
}

impl ExponentialPayload {
    pub fn validate(&self) -> Result<()> {
        self.natural_domain.validate()?;
        if self.natural_domain.dim() != self.d {
            return Err(Error::Config(format!(
                "natural domain has dimension {} but d = {}",
                self.natural_domain.dim(),
                self.d
            )));
        }
        match &self.model {
            ExponentialModel::Finite { stats, log_base } => {
                if stats.len() < 2 {
                    return Err(Error::Config("finite exponential family needs at least two symbols".into()));
                }
                if stats.iter().any(|t| t.len() != self.d || t.iter().any(|v| !v.is_finite())) {
                    return Err(Error::Config(format!("every statistic must be a finite vector of length {}", self.d)));
                }
                if let Some(b) = log_base {
                    if b.len() != stats.len() || b.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                        return Err(Error::Config("log_base must have one entry per symbol".into()));
                    }
                }
                Ok(())
            }
            ExponentialModel::Poisson {} if self.d != 1 => Err(Error::Config("Poisson family has d = 1".into())),
            ExponentialModel::Gaussian {} if self.d != 2 => Err(Error::Config("Gaussian family has d = 2".into())),
            _ => Ok(()),
        }
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.model {
            ExponentialModel::Finite { stats, .. } => Some(stats.len()),
            _ => None,
        }
    }

    pub fn admissible(&self, theta: &[f64]) -> bool {
        match self.model {
            ExponentialModel::Gaussian {} => theta[1] < 0.0,
            _ => true,
        }
    }

    /// Log-partition, mean parameter and Fisher information at `theta`.
    pub fn moments(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        match &self.model {
            ExponentialModel::Finite { stats, log_base } => finite_moments(stats, log_base.as_deref(), theta),
            ExponentialModel::Poisson {} => {
                let e = (-theta[0]).exp();
                (e, DVector::from_element(1, -e), DMatrix::from_element(1, 1, e))
            }
            ExponentialModel::Gaussian {} => {
                let (a, b) = (theta[0], theta[1]);
                let psi = -a * a / (4.0 * b) + 0.5 * (core::f64::consts::PI / -b).ln();
                let eta = DVector::from_vec(alloc::vec![-a / (2.0 * b), a * a / (4.0 * b * b) - 1.0 / (2.0 * b)]);
                let j11 = -1.0 / (2.0 * b);
                let j12 = a / (2.0 * b * b);
                let j22 = -a * a / (2.0 * b * b * b) + 1.0 / (2.0 * b * b);
                (psi, eta, DMatrix::from_row_slice(2, 2, &[j11, j12, j12, j22]))
            }
        }
    }

    /// Sufficient statistic and log reference density of one observation.
    pub fn stat(&self, x: &[f64]) -> Result<(DVector<f64>, f64)> {
        match &self.model {
            ExponentialModel::Finite { stats, log_base } => {
                let i = super::symbol_index(x[0], stats.len())?;
                Ok((DVector::from_column_slice(&stats[i]), log_base.as_ref().map_or(0.0, |b| b[i])))
            }
            ExponentialModel::Poisson {} => {
                let v = x[0];
                if !(v <= 0.0 && v.fract() == 0.0) {
                    return Err(Error::Alphabet(format!("{v} is not a non-positive integer")));
                }
                Ok((DVector::from_element(1, v), -ln_gamma(1.0 - v)))
            }
            ExponentialModel::Gaussian {} => {
                let v = x[0];
                if !v.is_finite() {
                    return Err(Error::Alphabet(format!("{v} is not a real number")));
                }
                Ok((DVector::from_vec(alloc::vec![v, v * v]), 0.0))
            }
        }
    }
}

pub(crate) fn finite_moments(
    stats: &[Vec<f64>],
    log_base: Option<&[f64]>,
    theta: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = theta.len();
    let a: Vec<f64> = stats
        .iter()
        .enumerate()
        .map(|(i, t)| super::domain::dot(t, theta) + log_base.map_or(0.0, |b| b[i]))
        .collect();
    let psi = log_sum_exp(&a);
    let mut eta = DVector::zeros(d);
    let probs: Vec<f64> = a.iter().map(|v| (v - psi).exp()).collect();
    for (p, t) in probs.iter().zip(stats) {
        eta += DVector::from_column_slice(t) * *p;
    }
    let mut j = DMatrix::zeros(d, d);
    for (p, t) in probs.iter().zip(stats) {
        let c = DVector::from_column_slice(t) - &eta;
        j += &c * c.transpose() * *p;
    }
    (psi, eta, j)
}

struct ExpPrep<'a> {
    payload: &'a ExponentialPayload,
    theta: DVector<f64>,
    psi: f64,
    eta: DVector<f64>,
    fisher: DMatrix<f64>,
}

impl Prep for ExpPrep<'_> {
    fn eval(&self, x: &[f64], order: Order) -> Result<Local> {
        let (t, base) = self.payload.stat(x)?;
        let logp = self.theta.dot(&t) + base - self.psi;
        let mut out = Local::value(logp);
        if order >= Order::Score {
            out.score = Some(t - &self.eta);
        }
        if order >= Order::Info {
            out.info = Some(self.fisher.clone());
        }
        Ok(out)
    }

    fn fisher(&self) -> Result<DMatrix<f64>> {
        Ok(self.fisher.clone())
    }
}

pub(super) fn prepare<'a>(payload: &'a ExponentialPayload, theta: &[f64]) -> Result<Box<dyn Prep + 'a>> {
    let (psi, eta, fisher) = payload.moments(theta);
    if !psi.is_finite() {
        return Err(Error::Domain(format!("log-partition diverges at {theta:?}")));
    }
    Ok(Box::new(ExpPrep { payload, theta: DVector::from_column_slice(theta), psi, eta, fisher }))
}
