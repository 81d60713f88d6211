//! Convex combinations that repair the plain Jeffreys mixture where it fails:
//! strings with non-typical empirical Fisher information, strings far from a
//! curved model, and strings near the boundary of a simplex.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


use num_traits::Float;

use crate::error::{Error, Result};
use crate::model_families::{ExponentialPayload, FamilySpec, LatentModel, ParamDomain};
use crate::priors::{McSpec, PriorKind, PriorSpec};

use super::{Strategy, StrategySpec, TiltingSpec};

fn check_rate(n: u64, r: f64) -> Result<f64> {
    if n < 2 || !(r > 0.0) || !r.is_finite() {
        return Err(Error::Config(format!("need n >= 2 and r > 0 (got n = {n}, r = {r})")));
    }
    Ok((n as f64).powf(-r))
}

fn check_domain(family: &FamilySpec, domain: &ParamDomain) -> Result<()> {
    family.validate()?;
    domain.validate()?;
    if domain.dim() != family.dim() {
        return Err(Error::Config(format!(
            "domain has dimension {} but the family has {}",
            domain.dim(),
            family.dim()
        )));
    }
    Ok(())
}

fn ideal(n: u64, domain: &ParamDomain, eps: Option<f64>, alpha_scale: Option<f64>) -> PriorSpec {
    PriorSpec { kind: PriorKind::Ideal { n, eps, alpha_scale, mc: McSpec::default() }, domain: domain.clone(), grid: None }
}

/// `(1 - n^{-r})` ideal-prior mixture over `K` plus `n^{-r}` tilted mixture with
/// Jeffreys weights over `K` and a uniform `β`.
pub fn ideal_tilted_spec(
    family: &FamilySpec,
    domain: &ParamDomain,
    n: u64,
    r: f64,
    tilting: &TiltingSpec,
    eps: Option<f64>,
    alpha_scale: Option<f64>,
) -> Result<StrategySpec> {
    check_domain(family, domain)?;
    tilting.validate()?;
    let w = check_rate(n, r)?;
    Ok(StrategySpec::Composite {
        weights: vec![1.0 - w, w],
        children: vec![
            StrategySpec::bayes(ideal(n, domain, eps, alpha_scale)),
            StrategySpec::Tilted { prior: PriorSpec::jeffreys(domain.clone()), tilting: tilting.clone() },
        ],
    })
}

pub fn ideal_tilted_composite(
    family: &FamilySpec,
    domain: &ParamDomain,
    n: u64,
    r: f64,
    tilting: &TiltingSpec,
    eps: Option<f64>,
    alpha_scale: Option<f64>,
) -> Result<Strategy> {
    Strategy::build(&ideal_tilted_spec(family, domain, n, r, tilting, eps, alpha_scale)?, family)
}

/// Points of `K` on a lattice with 2001 points per axis in one dimension and 41 otherwise.
fn sample_domain(domain: &ParamDomain) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let m: usize = if d == 1 { 2001 } else { 41 };
    let (lo, hi) = domain.bounding_box();
    let mut pts = domain.vertices();
    for mut idx in 0..m.pow(d as u32) {
        let p: Vec<f64> = (0..d)
            .map(|i| {
                let k = idx % m;
                idx /= m;
                lo[i] + (hi[i] - lo[i]) * k as f64 / (m - 1) as f64
            })
            .collect();
        if domain.contains(&p, 1e-12) {
            pts.push(p);
        }
    }
    pts
}

/// `(1 - n^{-r})` ideal-prior mixture of a curved family over `K` plus `n^{-r}`
/// uniform mixture of the ambient exponential family over the box `U`.
///
/// The image of `K` must lie in the interior of `U`.
pub fn ideal_ambient_spec(
    family: &FamilySpec,
    domain: &ParamDomain,
    n: u64,
    r: f64,
    ambient_box: &ParamDomain,
    eps: Option<f64>,
    alpha_scale: Option<f64>,
) -> Result<StrategySpec> {
    check_domain(family, domain)?;
    let FamilySpec::Curved(curve) = family else {
        return Err(Error::Config("the ambient composite needs a curved family".into()));
    };
    ambient_box.validate()?;
    if !matches!(ambient_box, ParamDomain::Box { .. }) || ambient_box.dim() != curve.ambient.d {
        return Err(Error::Config(format!("ambient region must be a box of dimension {}", curve.ambient.d)));
    }
    let ambient = FamilySpec::Exponential(ExponentialPayload { natural_domain: ambient_box.clone(), ..curve.ambient.clone() });
    ambient.validate()?;
    if let Some(v) = ambient_box.vertices().iter().find(|v| !ambient.admissible(v)) {
        return Err(Error::Config(format!("ambient box corner {v:?} is outside the natural parameter space")));
    }
    for theta in sample_domain(domain) {
        let u = curve.phi(&theta);
        if !ambient_box.interior_contains(&u, 0.0) {
            return Err(Error::Config(format!(
                "embedding of theta = {theta:?} is {u:?}, not inside the ambient box"
            )));
        }
    }
    let w = check_rate(n, r)?;
    Ok(StrategySpec::Composite {
        weights: vec![1.0 - w, w],
        children: vec![
            StrategySpec::bayes(ideal(n, domain, eps, alpha_scale)),
            StrategySpec::Bayes { prior: PriorSpec::uniform(ambient_box.clone()), family: Some(Box::new(ambient)) },
        ],
    })
}

pub fn ideal_ambient_composite(
    family: &FamilySpec,
    domain: &ParamDomain,
    n: u64,
    r: f64,
    ambient_box: &ParamDomain,
    eps: Option<f64>,
    alpha_scale: Option<f64>,
) -> Result<Strategy> {
    Strategy::build(&ideal_ambient_spec(family, domain, n, r, ambient_box, eps, alpha_scale)?, family)
}

/// Settings of the three-part simplex composite.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexBoundary {
    pub n: u64,
    pub r: f64,
    /// Dirichlet parameter of the boundary component, in `(0, 1/2)`.
    pub alpha: f64,
    /// Exponent of the boundary layer; constrains `r < (1/2 - α)(1 - p)`.
    pub p: f64,
    pub tilting: TiltingSpec,
    /// Accepted for symmetry with the other composites; no ideal prior is involved here.
    pub eps: Option<f64>,
    pub alpha_scale: Option<f64>,
}

impl SimplexBoundary {
    /// `(α, p, r) = (1/4, 0.9, 0.02)`.
    pub fn new(n: u64) -> Self {
        SimplexBoundary { n, r: 0.02, alpha: 0.25, p: 0.9, tilting: TiltingSpec::default(), eps: None, alpha_scale: None }
    }
}

/// `(1 - 2n^{-r})` Jeffreys mixture over the whole simplex, `n^{-r}` tilted
/// mixture and `n^{-r}` Dirichlet(α) mixture.
pub fn simplex_boundary_spec(family: &FamilySpec, s: &SimplexBoundary) -> Result<StrategySpec> {
    family.validate()?;
    let d = match family {
        FamilySpec::HiddenVariable(h) if h.latent == LatentModel::Simplex {} => h.d,
        _ => return Err(Error::Config("the simplex composite needs a mixture family".into())),
    };
    if !(s.alpha > 0.0 && s.alpha < 0.5) {
        return Err(Error::Config(format!("need 0 < alpha < 1/2, got {}", s.alpha)));
    }
    if !(s.p >= 0.0 && s.p < 1.0) {
        return Err(Error::Config(format!("need 0 <= p < 1, got {}", s.p)));
    }
    let bound = (0.5 - s.alpha) * (1.0 - s.p);
    if !(s.r < bound) {
        return Err(Error::Config(format!(
            "r < (1/2 - alpha)(1 - p) fails: r = {} but (1/2 - {})(1 - {}) = {bound}",
            s.r, s.alpha, s.p
        )));
    }
    s.tilting.validate()?;
    let w = check_rate(s.n, s.r)?;
    if !(1.0 - 2.0 * w > 0.0) {
        return Err(Error::Config(format!(
            "main weight 1 - 2 n^(-r) = {} is not positive at n = {}, r = {}",
            1.0 - 2.0 * w,
            s.n,
            s.r
        )));
    }
    let full = ParamDomain::simplex(d, 0.0);
    Ok(StrategySpec::Composite {
        weights: vec![1.0 - 2.0 * w, w, w],
        children: vec![
            StrategySpec::bayes(PriorSpec::jeffreys(full.clone())),
            StrategySpec::Tilted { prior: PriorSpec::jeffreys(full.clone()), tilting: s.tilting.clone() },
            StrategySpec::bayes(PriorSpec::dirichlet(s.alpha, full)),
        ],
    })
}

pub fn simplex_boundary_composite(family: &FamilySpec, s: &SimplexBoundary) -> Result<Strategy> {
    Strategy::build(&simplex_boundary_spec(family, s)?, family)
}
