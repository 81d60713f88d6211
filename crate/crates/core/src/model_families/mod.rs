//! Parametric model families and their per-parameter quantities.
//!
//! Observations are `f64`. Finite-alphabet symbols are the indices `0..k` stored as
//! floats; Poisson symbols are `0, -1, -2, ...`; a `d`-dimensional contaminated
//! Gaussian sequence is flattened, `d` numbers per observation.

pub mod contaminated;
pub mod curved;
pub mod domain;
pub mod exponential;
pub mod hidden;
pub mod mle;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use contaminated::ContaminatedGaussianPayload;
pub use curved::{CurvedPayload, Derivatives, Monomial};
pub use domain::{Halfspace, ParamDomain};
pub use exponential::{ExponentialModel, ExponentialPayload};
pub use hidden::{HiddenVarPayload, LatentModel};
pub use mle::{mle, mle_counts, MleResult};

use num_traits::Float;

use crate::error::{numerical, Error, Result};
use crate::numeric::{inv_sqrt_spd, min_eigenvalue, symmetrize, EIGEN_FLOOR};

/// How much of the local expansion to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Score,
    Info,
}

/// Log-density of one observation with optional gradient and negative Hessian.
#[derive(Clone, Debug)]
pub struct Local {
    pub logp: f64,
    pub score: Option<DVector<f64>>,
    pub info: Option<DMatrix<f64>>,
}

impl Local {
    pub fn value(logp: f64) -> Self {
        Local { logp, score: None, info: None }
    }
}

/// A family frozen at one parameter value.
pub trait Prep {
    fn eval(&self, x: &[f64], order: Order) -> Result<Local>;
    fn fisher(&self) -> Result<DMatrix<f64>>;
}

pub(crate) fn symbol_index(x: f64, k: usize) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && (x as usize) < k {
        Ok(x as usize)
    } else {
        Err(Error::Alphabet(format!("{x} is not one of 0..{k}")))
    }
}

/// A data set: a raw sequence or, for finite alphabets, symbol counts.
#[derive(Clone, Copy, Debug)]
pub enum Obs<'a> {
    Seq(&'a [f64]),
    Counts(&'a [u64]),
}

/// Sums over a data set.
#[derive(Clone, Debug)]
pub struct Aggregate {
    pub n: u64,
    pub loglik: f64,
    pub score: Option<DVector<f64>>,
    /// Negative Hessian of the log-likelihood (not divided by `n`).
    pub info: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Exponential(ExponentialPayload),
    Curved(CurvedPayload),
    HiddenVariable(HiddenVarPayload),
    ContaminatedGaussian(ContaminatedGaussianPayload),
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::Exponential(p) => p.validate(),
            FamilySpec::Curved(p) => p.validate(),
            FamilySpec::HiddenVariable(p) => p.validate(),
            FamilySpec::ContaminatedGaussian(p) => p.validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilySpec::Exponential(p) => p.d,
            FamilySpec::Curved(p) => p.d,
            FamilySpec::HiddenVariable(p) => p.d,
            FamilySpec::ContaminatedGaussian(p) => p.d,
        }
    }

    /// Numbers per observation.
    pub fn obs_dim(&self) -> usize {
        match self {
            FamilySpec::ContaminatedGaussian(p) => p.d,
            _ => 1,
        }
    }

    /// `Some(k)` for finite alphabets `0..k`, `None` for infinite or continuous ones.
    pub fn alphabet_size(&self) -> Option<usize> {
        match self {
            FamilySpec::Exponential(p) => p.alphabet_size(),
            FamilySpec::Curved(p) => p.ambient.alphabet_size(),
            FamilySpec::HiddenVariable(p) => Some(p.alphabet_size),
            FamilySpec::ContaminatedGaussian(_) => None,
        }
    }

    /// Densities are with respect to Lebesgue measure.
    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            FamilySpec::ContaminatedGaussian(_)
                | FamilySpec::Exponential(ExponentialPayload { model: ExponentialModel::Gaussian {}, .. })
        )
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, FamilySpec::Exponential(_))
    }

    /// Plain multinomial in mean parameters (identity emission).
    pub fn is_multinomial(&self) -> bool {
        matches!(self, FamilySpec::HiddenVariable(p) if p.is_multinomial())
    }

    pub fn admissible(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().all(|t| t.is_finite())
            && match self {
                FamilySpec::Exponential(p) => p.admissible(theta),
                FamilySpec::HiddenVariable(p) => p.admissible(theta),
                _ => true,
            }
    }

    /// Region searched by the unrestricted maximum-likelihood estimate.
    pub fn search_domain(&self, obs: Obs<'_>) -> Result<ParamDomain> {
        Ok(match self {
            FamilySpec::Exponential(p) => p.natural_domain.clone(),
            FamilySpec::Curved(p) => p.theta_domain.clone(),
            FamilySpec::HiddenVariable(p) => match (&p.latent, &p.search_domain) {
                (LatentModel::Simplex {}, _) => ParamDomain::simplex(p.d, 0.0),
                (_, Some(dom)) => dom.clone(),
                _ => ParamDomain::Box { lo: vec![-20.0; p.d], hi: vec![20.0; p.d] },
            },
            FamilySpec::ContaminatedGaussian(p) => {
                let Obs::Seq(xs) = obs else {
                    return Err(Error::Unsupported("count data for a continuous family".into()));
                };
                if xs.is_empty() {
                    return Err(Error::Domain("empty data set".into()));
                }
                let mut lo = vec![f64::INFINITY; p.d];
                let mut hi = vec![f64::NEG_INFINITY; p.d];
                for x in xs.chunks(p.d) {
                    for i in 0..p.d {
                        lo[i] = lo[i].min(x[i] - 1.0);
                        hi[i] = hi[i].max(x[i] + 1.0);
                    }
                }
                ParamDomain::Box { lo, hi }
            }
        })
    }

    /// Freeze the family at `theta`.
    pub fn prepare(&self, theta: &[f64]) -> Result<Box<dyn Prep + '_>> {
        if !self.admissible(theta) {
            return Err(Error::Domain(format!("theta = {theta:?} is not an admissible parameter")));
        }
        match self {
            FamilySpec::Exponential(p) => exponential::prepare(p, theta),
            FamilySpec::Curved(p) => curved::prepare(p, theta),
            FamilySpec::HiddenVariable(p) => hidden::prepare(p, theta),
            FamilySpec::ContaminatedGaussian(p) => contaminated::prepare(p, theta),
        }
    }

    /// Log-likelihood, score and summed information over a data set.
    ///
    /// Score and information are skipped (left `None`) once the likelihood is zero.
    pub fn aggregate(&self, theta: &[f64], obs: Obs<'_>, order: Order) -> Result<Aggregate> {
        let prep = self.prepare(theta)?;
        aggregate_prepared(self, prep.as_ref(), obs, order)
    }

    pub fn log_likelihood(&self, theta: &[f64], xs: &[f64]) -> Result<f64> {
        Ok(self.aggregate(theta, Obs::Seq(xs), Order::Value)?.loglik)
    }

    pub fn log_likelihood_counts(&self, theta: &[f64], counts: &[u64]) -> Result<f64> {
        Ok(self.aggregate(theta, Obs::Counts(counts), Order::Value)?.loglik)
    }

    pub fn score(&self, theta: &[f64], xs: &[f64]) -> Result<DVector<f64>> {
        self.score_obs(theta, Obs::Seq(xs))
    }

    pub fn score_obs(&self, theta: &[f64], obs: Obs<'_>) -> Result<DVector<f64>> {
        self.aggregate(theta, obs, Order::Score)?
            .score
            .ok_or_else(|| numerical("score", "likelihood is zero at this parameter"))
    }

    /// `-(1/n)` times the Hessian of the log-likelihood.
    pub fn empirical_fisher(&self, theta: &[f64], xs: &[f64]) -> Result<DMatrix<f64>> {
        self.empirical_fisher_obs(theta, Obs::Seq(xs))
    }

    pub fn empirical_fisher_counts(&self, theta: &[f64], counts: &[u64]) -> Result<DMatrix<f64>> {
        self.empirical_fisher_obs(theta, Obs::Counts(counts))
    }

    pub fn empirical_fisher_obs(&self, theta: &[f64], obs: Obs<'_>) -> Result<DMatrix<f64>> {
        let agg = self.aggregate(theta, obs, Order::Info)?;
        if agg.n == 0 {
            return Err(Error::Domain("empty data set".into()));
        }
        let info = agg.info.ok_or_else(|| numerical("empirical Fisher", "likelihood is zero at this parameter"))?;
        Ok(symmetrize(&(info / agg.n as f64)))
    }

    /// Fisher information; errors unless positive definite.
    pub fn fisher(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let j = symmetrize(&self.prepare(theta)?.fisher()?);
        check_pd(&j, "Fisher information")?;
        Ok(j)
    }

    /// `J^{-1/2} Ĵ J^{-1/2} - I`.
    pub fn v_statistic(&self, theta: &[f64], xs: &[f64]) -> Result<DMatrix<f64>> {
        self.v_statistic_obs(theta, Obs::Seq(xs))
    }

    pub fn v_statistic_counts(&self, theta: &[f64], counts: &[u64]) -> Result<DMatrix<f64>> {
        self.v_statistic_obs(theta, Obs::Counts(counts))
    }

    pub fn v_statistic_obs(&self, theta: &[f64], obs: Obs<'_>) -> Result<DMatrix<f64>> {
        let root = inv_sqrt_spd(&self.fisher(theta)?, "Fisher information")?;
        let jhat = self.empirical_fisher_obs(theta, obs)?;
        let d = self.dim();
        Ok(symmetrize(&(&root * jhat * &root)) - DMatrix::identity(d, d))
    }

    /// `log p(x|theta)` for every symbol of a finite alphabet.
    pub fn symbol_log_probs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let k = self.finite_alphabet()?;
        let prep = self.prepare(theta)?;
        (0..k).map(|x| Ok(prep.eval(&[x as f64], Order::Value)?.logp)).collect()
    }

    pub(crate) fn finite_alphabet(&self) -> Result<usize> {
        self.alphabet_size().ok_or_else(|| Error::Unsupported("operation needs a finite alphabet".into()))
    }
}

pub(crate) fn check_pd(m: &DMatrix<f64>, context: &str) -> Result<()> {
    let lo = min_eigenvalue(m);
    if !(lo > EIGEN_FLOOR) {
        return Err(Error::NotPositiveDefinite { context: context.into(), min_eigenvalue: lo });
    }
    Ok(())
}

pub(crate) fn aggregate_prepared(family: &FamilySpec, prep: &dyn Prep, obs: Obs<'_>, order: Order) -> Result<Aggregate> {
    let d = family.dim();
    let mut agg = Aggregate {
        n: 0,
        loglik: 0.0,
        score: (order >= Order::Score).then(|| DVector::zeros(d)),
        info: (order >= Order::Info).then(|| DMatrix::zeros(d, d)),
    };
    let add = |x: &[f64], weight: f64, agg: &mut Aggregate| -> Result<()> {
        let local = prep.eval(x, if agg.loglik == f64::NEG_INFINITY { Order::Value } else { order })?;
        agg.loglik += weight * local.logp;
        if agg.loglik == f64::NEG_INFINITY {
            agg.score = None;
            agg.info = None;
            return Ok(());
        }
        if let (Some(s), Some(ls)) = (agg.score.as_mut(), local.score) {
            *s += ls * weight;
        }
        if let (Some(m), Some(lm)) = (agg.info.as_mut(), local.info) {
            *m += lm * weight;
        }
        Ok(())
    };
    match obs {
        Obs::Seq(xs) => {
            let od = family.obs_dim();
            if xs.len() % od != 0 {
                return Err(Error::Alphabet(format!("sequence length {} is not a multiple of {od}", xs.len())));
            }
            for x in xs.chunks(od) {
                add(x, 1.0, &mut agg)?;
                agg.n += 1;
            }
        }
        Obs::Counts(counts) => {
            let k = family.finite_alphabet()?;
            if counts.len() != k {
                return Err(Error::Alphabet(format!("{} counts for an alphabet of size {k}", counts.len())));
            }
            for (x, c) in counts.iter().enumerate() {
                if *c > 0 {
                    add(&[x as f64], *c as f64, &mut agg)?;
                    agg.n += c;
                }
            }
        }
    }
    Ok(agg)
}

/// Bernoulli in the mean parameter `P(x = 1)`.
pub fn bernoulli_mean() -> FamilySpec {
    multinomial_mean(2)
}

/// Categorical on `k` symbols with parameters `(p_1, ..., p_{k-1})`.
pub fn multinomial_mean(k: usize) -> FamilySpec {
    let mut emission = vec![0.0; k * k];
    for i in 0..k {
        emission[i * k + i] = 1.0;
    }
    FamilySpec::HiddenVariable(HiddenVarPayload {
        d: k - 1,
        latent_size: k,
        alphabet_size: k,
        emission,
        latent: LatentModel::Simplex {},
        search_domain: None,
    })
}

/// Mixture of `m` fixed distributions over `k` symbols, with weights as parameters.
pub fn mixture_family(m: usize, k: usize, emission: Vec<f64>) -> FamilySpec {
    FamilySpec::HiddenVariable(HiddenVarPayload {
        d: m - 1,
        latent_size: m,
        alphabet_size: k,
        emission,
        latent: LatentModel::Simplex {},
        search_domain: None,
    })
}

/// Bernoulli with `p(1) = e^θ / (1 + e^θ)`, natural parameters restricted to `[lo, hi]`.
pub fn bernoulli_natural(lo: f64, hi: f64) -> FamilySpec {
    finite_exponential(vec![vec![0.0], vec![1.0]], None, ParamDomain::interval(lo, hi))
}

pub fn finite_exponential(stats: Vec<Vec<f64>>, log_base: Option<Vec<f64>>, natural_domain: ParamDomain) -> FamilySpec {
    FamilySpec::Exponential(ExponentialPayload {
        d: stats.first().map_or(0, Vec::len),
        model: ExponentialModel::Finite { stats, log_base },
        natural_domain,
    })
}

/// Poisson on the symbols `0, -1, -2, ...` with `ψ(θ) = e^{-θ}`.
pub fn poisson(lo: f64, hi: f64) -> FamilySpec {
    FamilySpec::Exponential(ExponentialPayload {
        d: 1,
        model: ExponentialModel::Poisson {},
        natural_domain: ParamDomain::interval(lo, hi),
    })
}

/// Poisson restricted to `0..=max`: symbol `x` has statistic `x` and base mass `1/x!`.
pub fn truncated_poisson(max: usize, lo: f64, hi: f64) -> FamilySpec {
    let stats = (0..=max).map(|x| vec![x as f64]).collect();
    let base = (0..=max).map(|x| -crate::numeric::ln_gamma(x as f64 + 1.0)).collect();
    finite_exponential(stats, Some(base), ParamDomain::interval(lo, hi))
}

/// Normal family in natural parameters `(μ/σ², -1/(2σ²))`.
pub fn gaussian(natural_domain: ParamDomain) -> FamilySpec {
    FamilySpec::Exponential(ExponentialPayload { d: 2, model: ExponentialModel::Gaussian {}, natural_domain })
}

/// Two independent coins on the symbols `0..4 ↔ (a, b)`, natural parameters `u`.
pub fn bernoulli_pair_ambient(natural_domain: ParamDomain) -> ExponentialPayload {
    ExponentialPayload {
        d: 2,
        model: ExponentialModel::Finite {
            stats: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            log_base: None,
        },
        natural_domain,
    }
}

/// The parabola `u = (θ, c θ²)` inside the coin-pair family.
pub fn curved_bernoulli_pair(c: f64) -> FamilySpec {
    FamilySpec::Curved(CurvedPayload {
        d: 1,
        ambient: bernoulli_pair_ambient(ParamDomain::boxed(&[-20.0, -20.0], &[20.0, 20.0])),
        embedding: vec![
            vec![Monomial { coef: 1.0, powers: vec![1] }],
            vec![Monomial { coef: c, powers: vec![2] }],
        ],
        theta_domain: ParamDomain::interval(-8.0, 8.0),
        derivatives: Derivatives::Analytic,
    })
}

/// `(1-ν) N(θ, I) + ν N(θ, s² I)` given the variance ratio `s²`.
pub fn contaminated(d: usize, nu: f64, s2: f64) -> FamilySpec {
    FamilySpec::ContaminatedGaussian(ContaminatedGaussianPayload::from_variance(d, nu, s2))
}
