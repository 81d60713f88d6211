use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use num_traits::Float;

use super::exponential::{ExponentialModel, ExponentialPayload};
use super::{Local, Order, ParamDomain, Prep};
use crate::error::{Error, Result};

/// `coef * prod_i theta_i^powers[i]`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// How second derivatives of the embedding are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivatives {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvedPayload {
    pub d: usize,
    pub ambient: ExponentialPayload,
    /// One polynomial per ambient coordinate.
    pub embedding: Vec<Vec<Monomial>>,
    /// Parameter region searched by the MLE.
    pub theta_domain: ParamDomain,
    #[serde(default)]
    pub derivatives: Derivatives,
}

const FD_STEP: f64 = 1e-5;

fn mono_value(m: &Monomial, theta: &[f64]) -> f64 {
    m.coef * m.powers.iter().zip(theta).map(|(p, t)| t.powi(*p as i32)).product::<f64>()
}

/// d/dtheta_i of a monomial.
fn mono_diff(m: &Monomial, i: usize) -> Option<Monomial> {
    let p = m.powers[i];
    if p == 0 {
        return None;
    }
    let mut powers = m.powers.clone();
    powers[i] = p - 1;
    Some(Monomial { coef: m.coef * p as f64, powers })
}

impl CurvedPayload {
    pub fn validate(&self) -> Result<()> {
        self.ambient.validate()?;
        self.theta_domain.validate()?;
        if !matches!(self.ambient.model, ExponentialModel::Finite { .. }) {
            return Err(Error::Config("curved families need a finite-alphabet ambient family".into()));
        }
        if self.embedding.len() != self.ambient.d || self.ambient.d <= self.d {
            return Err(Error::Config(format!(
                "embedding must map R^{} into the ambient R^{} with more coordinates",
                self.d, self.ambient.d
            )));
        }
        if self.theta_domain.dim() != self.d {
            return Err(Error::Config("theta_domain dimension differs from d".into()));
        }
        if self.embedding.iter().flatten().any(|m| m.powers.len() != self.d || !m.coef.is_finite()) {
            return Err(Error::Config(format!("every monomial needs {} exponents", self.d)));
        }
        Ok(())
    }

    pub fn phi(&self, theta: &[f64]) -> Vec<f64> {
        self.embedding.iter().map(|poly| poly.iter().map(|m| mono_value(m, theta)).sum()).collect()
    }

    /// Jacobian `D[k][i] = d phi_k / d theta_i` (ambient rows, parameter columns).
    pub fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let (db, d) = (self.ambient.d, self.d);
        let mut jac = DMatrix::zeros(db, d);
        match self.derivatives {
            Derivatives::Analytic => {
                for (k, poly) in self.embedding.iter().enumerate() {
                    for i in 0..d {
                        jac[(k, i)] = poly.iter().filter_map(|m| mono_diff(m, i)).map(|m| mono_value(&m, theta)).sum();
                    }
                }
            }
            Derivatives::FiniteDifference => {
                for i in 0..d {
                    let (mut up, mut dn) = (theta.to_vec(), theta.to_vec());
                    up[i] += FD_STEP;
                    dn[i] -= FD_STEP;
                    let (pu, pd) = (self.phi(&up), self.phi(&dn));
                    for k in 0..db {
                        jac[(k, i)] = (pu[k] - pd[k]) / (2.0 * FD_STEP);
                    }
                }
            }
        }
        jac
    }

    /// Second derivatives `H^k`, one d×d matrix per ambient coordinate.
    pub fn hessians(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        let d = self.d;
        match self.derivatives {
            Derivatives::Analytic => self
                .embedding
                .iter()
                .map(|poly| {
                    let mut h = DMatrix::zeros(d, d);
                    for i in 0..d {
                        for j in 0..d {
                            h[(i, j)] = poly
                                .iter()
                                .filter_map(|m| mono_diff(m, i))
                                .filter_map(|m| mono_diff(&m, j))
                                .map(|m| mono_value(&m, theta))
                                .sum();
                        }
                    }
                    h
                })
                .collect(),
            Derivatives::FiniteDifference => {
                let mut out = vec![DMatrix::zeros(d, d); self.ambient.d];
                let f0 = self.phi(theta);
                let h = FD_STEP;
                for i in 0..d {
                    for j in 0..d {
                        let vals: Vec<f64> = if i == j {
                            let (mut up, mut dn) = (theta.to_vec(), theta.to_vec());
                            up[i] += h;
                            dn[i] -= h;
                            let (pu, pd) = (self.phi(&up), self.phi(&dn));
                            (0..self.ambient.d).map(|k| (pu[k] - 2.0 * f0[k] + pd[k]) / (h * h)).collect()
                        } else {
                            let shifted = |si: f64, sj: f64| {
                                let mut t = theta.to_vec();
                                t[i] += si * h;
                                t[j] += sj * h;
                                self.phi(&t)
                            };
                            let (pp, pm, mp, mm) =
                                (shifted(1.0, 1.0), shifted(1.0, -1.0), shifted(-1.0, 1.0), shifted(-1.0, -1.0));
                            (0..self.ambient.d).map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h)).collect()
                        };
                        for (k, v) in vals.into_iter().enumerate() {
                            out[k][(i, j)] = v;
                        }
                    }
                }
                out
            }
        }
    }
}

struct CurvedPrep<'a> {
    payload: &'a CurvedPayload,
    u: DVector<f64>,
    psi: f64,
    eta: DVector<f64>,
    jac: DMatrix<f64>,
    hess: Vec<DMatrix<f64>>,
    fisher: DMatrix<f64>,
}

impl Prep for CurvedPrep<'_> {
    fn eval(&self, x: &[f64], order: Order) -> Result<Local> {
        let (t, base) = self.payload.ambient.stat(x)?;
        let mut out = Local::value(self.u.dot(&t) + base - self.psi);
        let resid = t - &self.eta;
        if order >= Order::Score {
            out.score = Some(self.jac.transpose() * &resid);
        }
        if order >= Order::Info {
            let mut info = self.fisher.clone();
            for (k, h) in self.hess.iter().enumerate() {
                info -= h * resid[k];
            }
            out.info = Some(info);
        }
        Ok(out)
    }

    fn fisher(&self) -> Result<DMatrix<f64>> {
        Ok(self.fisher.clone())
    }
}

pub(super) fn prepare<'a>(payload: &'a CurvedPayload, theta: &[f64]) -> Result<Box<dyn Prep + 'a>> {
    let u = payload.phi(theta);
    let (psi, eta, jbar) = payload.ambient.moments(&u);
    let jac = payload.jacobian(theta);
    let fisher = jac.transpose() * jbar * &jac;
    Ok(Box::new(CurvedPrep {
        payload,
        u: DVector::from_vec(u),
        psi,
        eta,
        hess: payload.hessians(theta),
        jac,
        fisher,
    }))
}
