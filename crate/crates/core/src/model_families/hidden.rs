use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use num_traits::Float;

use super::{symbol_index, Local, Order, ParamDomain, Prep};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Parameterization of the latent distribution `q(y|theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatentModel {
    /// Mixture weights: `q(y) = theta_y` for `y >= 1`, `q(0) = 1 - sum(theta)`.
    Simplex {},
    /// Natural parameters: `q(y) ∝ exp(theta · stats[y])`.
    Natural { stats: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenVarPayload {
    pub d: usize,
    pub latent_size: usize,
    pub alphabet_size: usize,
    /// `kappa(x|y)`, row-major with rows indexed by `y`.
    pub emission: Vec<f64>,
    pub latent: LatentModel,
    /// Region searched by the MLE for natural latent parameters.
    #[serde(default)]
    pub search_domain: Option<ParamDomain>,
}

impl HiddenVarPayload {
    pub fn validate(&self) -> Result<()> {
        let (m, k) = (self.latent_size, self.alphabet_size);
        if m < 2 || k < 2 || self.emission.len() != m * k {
            return Err(Error::Config(format!("emission must be {m}x{k} with m, k >= 2")));
        }
        for y in 0..m {
            let row = &self.emission[y * k..(y + 1) * k];
            if row.iter().any(|v| !(*v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("emission row {y} is not a probability vector")));
            }
        }
        for x in 0..k {
            if (0..m).all(|y| self.kappa(x, y) == 0.0) {
                return Err(Error::Config(format!("symbol {x} has probability zero under every latent value")));
            }
        }
        match &self.latent {
            LatentModel::Simplex {} if self.d != m - 1 => {
                Err(Error::Config(format!("simplex latent model has d = {} not {}", m - 1, self.d)))
            }
            LatentModel::Natural { stats } if stats.len() != m || stats.iter().any(|t| t.len() != self.d) => {
                Err(Error::Config(format!("natural latent model needs {m} statistics of length {}", self.d)))
            }
            _ => Ok(()),
        }?;
        if let Some(dom) = &self.search_domain {
            dom.validate()?;
        }
        Ok(())
    }

    pub fn kappa(&self, x: usize, y: usize) -> f64 {
        self.emission[y * self.alphabet_size + x]
    }

    /// True when the emission matrix is the identity: a plain multinomial in mean parameters.
    pub fn is_multinomial(&self) -> bool {
        matches!(self.latent, LatentModel::Simplex {})
            && self.latent_size == self.alphabet_size
            && (0..self.latent_size)
                .all(|y| (0..self.alphabet_size).all(|x| self.kappa(x, y) == if x == y { 1.0 } else { 0.0 }))
    }

    pub fn admissible(&self, theta: &[f64]) -> bool {
        match self.latent {
            LatentModel::Simplex {} => {
                theta.iter().all(|t| *t >= -1e-12) && theta.iter().sum::<f64>() <= 1.0 + 1e-12
            }
            LatentModel::Natural { .. } => true,
        }
    }

    /// Latent probabilities `q(y|theta)`.
    pub fn latent_probs(&self, theta: &[f64]) -> Vec<f64> {
        match &self.latent {
            LatentModel::Simplex {} => {
                let mut q = Vec::with_capacity(self.latent_size);
                q.push((1.0 - theta.iter().sum::<f64>()).max(0.0));
                q.extend(theta.iter().map(|t| t.max(0.0)));
                q
            }
            LatentModel::Natural { stats } => {
                let a: Vec<f64> = stats.iter().map(|t| super::domain::dot(t, theta)).collect();
                let z = log_sum_exp(&a);
                a.iter().map(|v| (v - z).exp()).collect()
            }
        }
    }

    /// Symbol probabilities `p(x|theta)`.
    pub fn symbol_probs(&self, theta: &[f64]) -> Vec<f64> {
        let q = self.latent_probs(theta);
        (0..self.alphabet_size).map(|x| (0..self.latent_size).map(|y| q[y] * self.kappa(x, y)).sum()).collect()
    }

    /// Mean `eta` and covariance `G` of `T(Y)` under the latent model (natural kind).
    pub fn latent_moments(&self, theta: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let LatentModel::Natural { stats } = &self.latent else {
            return None;
        };
        let q = self.latent_probs(theta);
        Some(weighted_moments(stats, &q))
    }
}

fn weighted_moments(stats: &[Vec<f64>], w: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = stats[0].len();
    let mut mean = DVector::zeros(d);
    for (t, p) in stats.iter().zip(w) {
        mean += DVector::from_column_slice(t) * *p;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (t, p) in stats.iter().zip(w) {
        let c = DVector::from_column_slice(t) - &mean;
        cov += &c * c.transpose() * *p;
    }
    (mean, cov)
}

struct SimplexPrep<'a> {
    payload: &'a HiddenVarPayload,
    probs: Vec<f64>,
}

impl SimplexPrep<'_> {
    fn diffs(&self, x: usize) -> DVector<f64> {
        let p = self.payload;
        DVector::from_iterator(p.d, (1..p.latent_size).map(|y| p.kappa(x, y) - p.kappa(x, 0)))
    }
}

impl Prep for SimplexPrep<'_> {
    fn eval(&self, x: &[f64], order: Order) -> Result<Local> {
        let i = symbol_index(x[0], self.payload.alphabet_size)?;
        let p = self.probs[i];
        let mut out = Local::value(p.ln());
        if order >= Order::Score {
            out.score = Some(self.diffs(i) / p);
        }
        if order >= Order::Info {
            let dv = self.diffs(i);
            out.info = Some(&dv * dv.transpose() / (p * p));
        }
        Ok(out)
    }

    fn fisher(&self) -> Result<DMatrix<f64>> {
        let d = self.payload.d;
        let mut j = DMatrix::zeros(d, d);
        for (x, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                let dv = self.diffs(x);
                j += &dv * dv.transpose() / *p;
            }
        }
        Ok(j)
    }
}

struct NaturalPrep<'a> {
    payload: &'a HiddenVarPayload,
    stats: &'a [Vec<f64>],
    q: Vec<f64>,
    probs: Vec<f64>,
    eta: DVector<f64>,
    g: DMatrix<f64>,
}

impl NaturalPrep<'_> {
    /// Posterior mean and covariance of `T(Y)` given one symbol.
    fn posterior(&self, x: usize) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.probs[x];
        let w: Vec<f64> = (0..self.payload.latent_size).map(|y| self.q[y] * self.payload.kappa(x, y) / p).collect();
        weighted_moments(self.stats, &w)
    }
}

impl Prep for NaturalPrep<'_> {
    fn eval(&self, x: &[f64], order: Order) -> Result<Local> {
        let i = symbol_index(x[0], self.payload.alphabet_size)?;
        let mut out = Local::value(self.probs[i].ln());
        if order >= Order::Score && self.probs[i] > 0.0 {
            let (mean, cov) = self.posterior(i);
            out.score = Some(mean - &self.eta);
            if order >= Order::Info {
                out.info = Some(&self.g - cov);
            }
        }
        Ok(out)
    }

    fn fisher(&self) -> Result<DMatrix<f64>> {
        let mut j = self.g.clone();
        for (x, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                j -= self.posterior(x).1 * *p;
            }
        }
        Ok(j)
    }
}

pub(super) fn prepare<'a>(payload: &'a HiddenVarPayload, theta: &[f64]) -> Result<Box<dyn Prep + 'a>> {
    let probs = payload.symbol_probs(theta);
    match &payload.latent {
        LatentModel::Simplex {} => Ok(Box::new(SimplexPrep { payload, probs })),
        LatentModel::Natural { stats } => {
            let q = payload.latent_probs(theta);
            let (eta, g) = weighted_moments(stats, &q);
            Ok(Box::new(NaturalPrep { payload, stats, q, probs, eta, g }))
        }
    }
}
