use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use num_traits::Float;

use super::{Local, Order, Prep};
use crate::error::{numerical, Error, Result};
use crate::numeric::{adaptive_legendre, ln_gamma, log_add_exp};

/// `(1 - nu) N(theta, I) + nu N(theta, s^2 I)` on R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminatedGaussianPayload {
    pub d: usize,
    pub nu: f64,
    /// Standard-deviation ratio of the wide component.
    pub s: f64,
}

/// Quantities of one observation at offset `z = x - theta`.
pub(crate) struct Weights {
    pub logp: f64,
    pub r: f64,
    pub w: f64,
    pub q: f64,
}

impl ContaminatedGaussianPayload {
    pub fn from_variance(d: usize, nu: f64, s2: f64) -> Self {
        ContaminatedGaussianPayload { d, nu, s: s2.sqrt() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || !(self.nu > 0.0 && self.nu < 1.0) || !(self.s > 1.0 && self.s.is_finite()) {
            return Err(Error::Config(format!(
                "contaminated Gaussian needs d >= 1, 0 < nu < 1, s > 1 (got d={}, nu={}, s={})",
                self.d, self.nu, self.s
            )));
        }
        Ok(())
    }

    fn s2(&self) -> f64 {
        self.s * self.s
    }

    pub(crate) fn weights(&self, z2: f64) -> Weights {
        let d = self.d as f64;
        let s2 = self.s2();
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let lg0 = (1.0 - self.nu).ln() - d * half_log_2pi - 0.5 * z2;
        let lg1 = self.nu.ln() - d * half_log_2pi - 0.5 * d * s2.ln() - 0.5 * z2 / s2;
        let logp = log_add_exp(lg0, lg1);
        let r = (lg0 - logp).exp();
        let w = (1.0 - 1.0 / s2) * r + 1.0 / s2;
        Weights { logp, r, w, q: r * (1.0 - r) }
    }

    /// Posterior weight of the narrow component, `r(x|theta)`.
    pub fn narrow_weight(&self, x: &[f64], theta: &[f64]) -> f64 {
        let z2: f64 = x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
        self.weights(z2).r
    }

    /// Offset at which `r(0|theta) = 1/2` in one dimension.
    pub fn critical_radius(&self) -> f64 {
        let s2 = self.s2();
        let ratio = (1.0 - self.nu) * (1.0 - self.nu) / (self.nu * self.nu);
        ((s2.ln() + ratio.ln()) / (1.0 - 1.0 / s2)).sqrt()
    }

    /// Scalar `j` with `J = j I`.
    ///
    /// By symmetry `E[q z_1^2] = E[q |z|^2] / d`, so the expectation reduces to one
    /// radial integral per component, done by adaptive Gauss–Legendre.
    pub fn fisher_scalar(&self) -> Result<f64> {
        let a = 1.0 - 1.0 / self.s2();
        let d = self.d as f64;
        let log_norm = (d / 2.0 - 1.0) * 2f64.ln() + ln_gamma(d / 2.0);
        let integrand = |rho: f64| {
            if rho <= 0.0 && self.d > 1 {
                return 0.0;
            }
            let dens = ((d - 1.0) * rho.ln() - 0.5 * rho * rho - log_norm).exp();
            let mut val = 0.0;
            for (mass, r2) in [(1.0 - self.nu, rho * rho), (self.nu, self.s2() * rho * rho)] {
                let wt = self.weights(r2);
                val += mass * (wt.w - a * a * wt.q * r2 / d);
            }
            dens * val
        };
        let top = d.sqrt() + 40.0;
        adaptive_legendre(&integrand, 0.0, top, 1e-12)
            .map_err(|e| numerical("contaminated Fisher information", alloc::format!("{e}")))
    }
}

struct ContaminatedPrep<'a> {
    payload: &'a ContaminatedGaussianPayload,
    theta: Vec<f64>,
}

impl Prep for ContaminatedPrep<'_> {
    fn eval(&self, x: &[f64], order: Order) -> Result<Local> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Alphabet(format!("{x:?} is not a real vector")));
        }
        let d = self.payload.d;
        let z = DVector::from_iterator(d, x.iter().zip(&self.theta).map(|(a, b)| a - b));
        let wt = self.payload.weights(z.norm_squared());
        let mut out = Local::value(wt.logp);
        if order >= Order::Score {
            out.score = Some(&z * wt.w);
        }
        if order >= Order::Info {
            let a = 1.0 - 1.0 / self.payload.s2();
            out.info = Some(DMatrix::identity(d, d) * wt.w - &z * z.transpose() * (a * a * wt.q));
        }
        Ok(out)
    }

    fn fisher(&self) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.payload.d, self.payload.d) * self.payload.fisher_scalar()?)
    }
}

pub(super) fn prepare<'a>(payload: &'a ContaminatedGaussianPayload, theta: &[f64]) -> Result<Box<dyn Prep + 'a>> {
    Ok(Box::new(ContaminatedPrep { payload, theta: theta.to_vec() }))
}
