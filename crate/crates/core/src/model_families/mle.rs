//! Maximum likelihood over a restricted parameter set.
//!
//! One projected Newton ascent handles every kind: constraints that block the
//! gradient are held active and the Newton step is taken in their null space,
//! with a Levenberg shift when the reduced Hessian is not negative definite.
//! Families with a concave log-likelihood use one start; the rest use a grid.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use super::{aggregate_prepared, domain::dot, FamilySpec, LatentModel, Obs, Order, ParamDomain};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MleResult {
    pub theta: Vec<f64>,
    pub loglik: f64,
    /// Two or more distinct local maxima tie within `TIE_TOL`.
    pub multiple: bool,
    /// A domain constraint is active at the maximizer.
    pub boundary: bool,
}

const TIE_TOL: f64 = 1e-9;
const SAME_POINT: f64 = 1e-6;
const ACTIVE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 300;

pub fn mle(family: &FamilySpec, xs: &[f64], domain: &ParamDomain) -> Result<MleResult> {
    mle_obs(family, Obs::Seq(xs), domain)
}

pub fn mle_counts(family: &FamilySpec, counts: &[u64], domain: &ParamDomain) -> Result<MleResult> {
    mle_obs(family, Obs::Counts(counts), domain)
}

pub fn mle_obs(family: &FamilySpec, obs: Obs<'_>, domain: &ParamDomain) -> Result<MleResult> {
    domain.validate()?;
    if domain.dim() != family.dim() {
        return Err(Error::Config(alloc::format!(
            "domain has dimension {} but the family has {}",
            domain.dim(),
            family.dim()
        )));
    }
    let empty = match obs {
        Obs::Seq(xs) => xs.is_empty(),
        Obs::Counts(c) => c.iter().all(|v| *v == 0),
    };
    if empty {
        return Err(Error::Domain("maximum likelihood needs at least one observation".into()));
    }
    if family.is_multinomial() {
        if let (Obs::Counts(c), ParamDomain::Simplex { tau, .. }) = (obs, domain) {
            if *tau == 0.0 {
                return multinomial_closed_form(family, c);
            }
        }
    }
    let starts = match family {
        FamilySpec::Exponential(_) => alloc::vec![center(domain)],
        FamilySpec::HiddenVariable(p) if matches!(p.latent, LatentModel::Simplex {}) => {
            alloc::vec![center(domain)]
        }
        _ => {
            let per_axis = match family.dim() {
                1 => 33,
                2 => 9,
                3 => 5,
                _ => 3,
            };
            let mut s = domain.start_grid(per_axis);
            if s.is_empty() {
                s.push(center(domain));
            }
            s
        }
    };
    let mut found: Vec<MleResult> = Vec::new();
    let mut last_err = None;
    for s in starts {
        match ascend(family, obs, domain, s) {
            Ok(r) => {
                if !found.iter().any(|f| dist(&f.theta, &r.theta) < SAME_POINT) {
                    found.push(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if found.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Domain("no admissible start point".into())));
    }
    let best = found.iter().map(|r| r.loglik).fold(f64::NEG_INFINITY, f64::max);
    let mut ties: Vec<MleResult> = found.into_iter().filter(|r| r.loglik >= best - TIE_TOL).collect();
    ties.sort_by(|a, b| lex_cmp(&a.theta, &b.theta));
    let multiple = ties.len() > 1;
    let mut out = ties.swap_remove(0);
    out.multiple = multiple;
    Ok(out)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(core::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    core::cmp::Ordering::Equal
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn center(domain: &ParamDomain) -> Vec<f64> {
    match domain {
        ParamDomain::Simplex { dim, .. } => alloc::vec![1.0 / (*dim as f64 + 1.0); *dim],
        _ => {
            let (lo, hi) = domain.bounding_box();
            lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
        }
    }
}

fn multinomial_closed_form(family: &FamilySpec, counts: &[u64]) -> Result<MleResult> {
    let n: u64 = counts.iter().sum();
    let theta: Vec<f64> = counts[1..].iter().map(|c| *c as f64 / n as f64).collect();
    let loglik = family.log_likelihood_counts(&theta, counts)?;
    let boundary = counts.iter().any(|c| *c == 0);
    Ok(MleResult { theta, loglik, multiple: false, boundary })
}

struct Eval {
    f: f64,
    g: DVector<f64>,
    h: DMatrix<f64>,
}

fn evaluate(family: &FamilySpec, obs: Obs<'_>, theta: &[f64], order: Order) -> Result<Option<Eval>> {
    if !family.admissible(theta) {
        return Ok(None);
    }
    let prep = family.prepare(theta)?;
    let agg = aggregate_prepared(family, prep.as_ref(), obs, order)?;
    if !agg.loglik.is_finite() {
        return Ok(None);
    }
    let d = family.dim();
    Ok(Some(Eval {
        f: agg.loglik,
        g: agg.score.unwrap_or_else(|| DVector::zeros(d)),
        h: agg.info.map(|m| -m).unwrap_or_else(|| DMatrix::zeros(d, d)),
    }))
}

/// Orthogonal projector onto the complement of the active normals.
fn free_projector(normals: &[&[f64]], d: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for a in normals {
        let mut v = DVector::from_column_slice(a);
        for b in &basis {
            let c = v.dot(b);
            v -= b * c;
        }
        let nrm = v.norm();
        if nrm > 1e-10 {
            basis.push(v / nrm);
        }
    }
    let mut p = DMatrix::identity(d, d);
    for b in &basis {
        p -= b * b.transpose();
    }
    p
}

fn ascend(family: &FamilySpec, obs: Obs<'_>, domain: &ParamDomain, start: Vec<f64>) -> Result<MleResult> {
    let d = family.dim();
    let halfspaces = domain.halfspaces();
    let mut theta = domain.project(&start);
    let Some(mut cur) = evaluate(family, obs, &theta, Order::Info)? else {
        return Err(Error::Domain(alloc::format!("likelihood is zero at start {theta:?}")));
    };
    let scale = cur.f.abs().max(1.0);
    for _ in 0..MAX_ITER {
        // constraints that are tight and block the gradient stay active
        let mut active: Vec<&[f64]> = Vec::new();
        for hs in &halfspaces {
            if dot(&hs.normal, &theta) >= hs.bound - ACTIVE_TOL && dot(&hs.normal, cur.g.as_slice()) > 0.0 {
                active.push(&hs.normal);
            }
        }
        let p = free_projector(&active, d);
        let pg = &p * &cur.g;
        if pg.norm() <= 1e-11 * scale {
            break;
        }
        let neg_h = -&cur.h;
        let mut lambda = 0.0;
        let dir = loop {
            let m = &p * (&neg_h + DMatrix::identity(d, d) * lambda) * &p + (DMatrix::identity(d, d) - &p);
            if let Some(ch) = m.cholesky() {
                break &p * ch.solve(&pg);
            }
            lambda = if lambda == 0.0 { 1e-6 * (1.0 + neg_h.norm()) } else { lambda * 10.0 };
            if lambda > 1e12 {
                break pg.clone();
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> =
                domain.project(&theta.iter().zip(dir.iter()).map(|(t, s)| t + step * s).collect::<Vec<_>>());
            if let Some(e) = evaluate(family, obs, &trial, Order::Info)? {
                if e.f >= cur.f {
                    accepted = Some((trial, e));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, e)) = accepted else { break };
        let moved = dist(&next, &theta);
        let gain = e.f - cur.f;
        theta = next;
        cur = e;
        if moved <= 1e-13 * (1.0 + theta.iter().map(|t| t.abs()).fold(0.0, f64::max)) && gain <= 1e-15 * scale {
            break;
        }
    }
    let boundary = halfspaces.iter().any(|hs| dot(&hs.normal, &theta) >= hs.bound - 1e-9);
    Ok(MleResult { theta, loglik: cur.f, multiple: false, boundary })
}
