//! Regret measurements: exact worst case by count-class enumeration, Shtarkov
//! constants, Laplace estimates, Monte Carlo expected regret and the split of
//! strings into good and not-good classes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use num_bigint::BigUint;
use num_traits::{Float, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::Strategy;
use crate::model_families::mle::{mle_counts, mle_obs};
use crate::model_families::{ExponentialModel, FamilySpec, Obs, ParamDomain};
use crate::numeric::{composition_count, for_each_composition, log_det_spd, log_multinomial, spectral_norm_sym, LogSum};
use crate::priors::{jeffreys_integral_on, GridSpec, Prior};

/// Largest number of count classes enumerated in one sweep.
pub const CLASS_LIMIT: u128 = 10_000_000;

/// Tolerance for "the unrestricted MLE lies in `K`".
const DOMAIN_TOL: f64 = 1e-9;

/// A type class of strings: symbol counts plus the exact number of strings sharing them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountClass {
    pub counts: Vec<u64>,
    pub multiplicity: BigUint,
}

impl CountClass {
    pub fn new(counts: Vec<u64>) -> Self {
        let mut m = BigUint::one();
        let mut seen = 0u64;
        for &c in &counts {
            // multiply by C(seen + c, c) one factor at a time; every prefix is an integer
            for j in 1..=c {
                m = m * BigUint::from(seen + j) / BigUint::from(j);
            }
            seen += c;
        }
        CountClass { counts, multiplicity: m }
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn log_multiplicity(&self) -> f64 {
        log_multinomial(&self.counts)
    }
}

fn guard(n: u64, k: usize) -> Result<u128> {
    let classes = composition_count(n, k);
    if classes > CLASS_LIMIT {
        return Err(Error::GuardExceeded { classes, limit: CLASS_LIMIT });
    }
    Ok(classes)
}

/// All count vectors of length-`n` strings over `k` symbols, lexicographic.
pub fn enumerate_classes(n: u64, k: usize) -> Result<Vec<Vec<u64>>> {
    let total = guard(n, k)?;
    let mut out = Vec::with_capacity(total as usize);
    for_each_composition(n, k, |c| out.push(c.to_vec()));
    Ok(out)
}

/// Which strings a worst case ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Strings whose unrestricted MLE lies in `K`.
    InDomain,
    /// Every string, measured against the best member of `K`.
    AllStrings,
}

/// `δ_n = n^{-1/2 + γ}` with `γ = 0.2`.
pub fn good_threshold(n: u64) -> f64 {
    (n as f64).powf(-0.3)
}

/// `(d/2) log(n/2π) + log C_J`.
pub fn asymptotic_minimax_value(d: usize, n: f64, c_j: f64) -> f64 {
    0.5 * d as f64 * (n / (2.0 * PI)).ln() + c_j.ln()
}

/// `(d/2) log(n/2πe) + log C_J`, the expected-regret counterpart.
pub fn expected_asymptotic_value(d: usize, n: f64, c_j: f64) -> f64 {
    asymptotic_minimax_value(d, n, c_j) - 0.5 * d as f64
}

/// Strategy-independent facts about one count class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassInfo {
    pub counts: Vec<u64>,
    pub log_multiplicity: f64,
    /// MLE restricted to `K`.
    pub theta_hat: Vec<f64>,
    /// `log max_{θ∈K} p(x^n|θ)` for one string of the class.
    pub log_max: f64,
    /// The unrestricted MLE lies in `K`.
    pub in_domain: bool,
    /// `‖V(x^n|θ̂)‖_s`, `None` where `V` is undefined (e.g. MLE on a simplex face).
    pub v_norm: Option<f64>,
}

impl ClassInfo {
    pub fn is_good(&self, delta: f64) -> bool {
        self.in_domain && self.v_norm.is_some_and(|v| v <= delta)
    }
}

/// Compute [`ClassInfo`] for one class.
pub fn class_info(family: &FamilySpec, domain: &ParamDomain, counts: &[u64]) -> Result<ClassInfo> {
    let obs = Obs::Counts(counts);
    let free = mle_counts(family, counts, &family.search_domain(obs)?)?;
    let in_domain = domain.contains(&free.theta, DOMAIN_TOL);
    let restricted = if in_domain { free } else { mle_counts(family, counts, domain)? };
    let v_norm = if family.is_exponential() {
        Some(0.0)
    } else {
        family.v_statistic_counts(&restricted.theta, counts).ok().map(|v| spectral_norm_sym(&v))
    };
    Ok(ClassInfo {
        counts: counts.to_vec(),
        log_multiplicity: log_multinomial(counts),
        theta_hat: restricted.theta,
        log_max: restricted.loglik,
        in_domain,
        v_norm,
    })
}

/// Every count class of length `n` with its MLE facts; shared by all strategies.
#[derive(Clone, Debug)]
pub struct ClassTable {
    pub n: u64,
    pub domain: ParamDomain,
    pub classes: Vec<ClassInfo>,
}

impl ClassTable {
    pub fn build(family: &FamilySpec, domain: &ParamDomain, n: u64) -> Result<Self> {
        let k = family.finite_alphabet()?;
        let all = enumerate_classes(n, k)?;
        let classes = all.iter().map(|c| class_info(family, domain, c)).collect::<Result<_>>()?;
        Ok(ClassTable { n, domain: domain.clone(), classes })
    }

    /// `log c_{n,K}`: the sum runs over all strings.
    pub fn log_shtarkov(&self) -> f64 {
        let mut acc = LogSum::default();
        for c in &self.classes {
            acc.add(c.log_multiplicity + c.log_max);
        }
        acc.value()
    }
}

/// `log Σ_{x^n} max_{θ∈K} p(x^n|θ)`.
pub fn shtarkov_log_constant(family: &FamilySpec, domain: &ParamDomain, n: u64) -> Result<f64> {
    let k = family.finite_alphabet()?;
    guard(n, k)?;
    let mut acc = LogSum::default();
    let mut failure = None;
    for_each_composition(n, k, |c| {
        if failure.is_none() {
            match mle_counts(family, c, domain) {
                Ok(m) => acc.add(log_multinomial(c) + m.loglik),
                Err(e) => failure = Some(e),
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(acc.value()),
    }
}

/// `log p(x^n|θ̂_K) - log q(x^n)`.
pub fn pointwise_regret(strategy: &Strategy, family: &FamilySpec, domain: &ParamDomain, obs: Obs<'_>) -> Result<f64> {
    let empty = match obs {
        Obs::Seq(xs) => xs.is_empty(),
        Obs::Counts(c) => c.iter().all(|c| *c == 0),
    };
    if empty {
        return Err(Error::Domain("regret needs a non-empty string".into()));
    }
    let best = mle_obs(family, obs, domain)?;
    Ok(best.loglik - strategy.log_marginal(obs)?)
}

/// Regrets of the classes `range` of a table, in order.
pub fn class_regrets(strategy: &Strategy, table: &ClassTable, range: Range<usize>) -> Result<Vec<f64>> {
    table.classes[range].iter().map(|c| Ok(c.log_max - strategy.log_marginal_counts(&c.counts)?)).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretOptions {
    pub scope: Option<Scope>,
    /// Good-string threshold; defaults to [`good_threshold`].
    pub delta: Option<f64>,
    /// `C_J(K)` for the asymptotic reference; computed by quadrature when absent.
    pub jeffreys_integral: Option<f64>,
}

/// One row of the per-class table of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassRow {
    pub counts: Vec<u64>,
    pub regret: f64,
    pub in_domain: bool,
    pub good: bool,
    pub v_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretReport {
    pub n: u64,
    pub strategy: String,
    pub scope: Scope,
    pub max_regret_nats: f64,
    pub min_regret_nats: f64,
    pub argmax_counts: Vec<u64>,
    pub asymptotic_nats: Option<f64>,
    pub gap_nats: Option<f64>,
    pub delta: f64,
    /// Classes inside the scope.
    pub num_classes: u64,
    /// Share of in-scope classes that are good.
    pub good_fraction: f64,
    pub rows: Vec<ClassRow>,
}

impl RegretReport {
    pub fn max_regret_bits(&self) -> f64 {
        self.max_regret_nats / core::f64::consts::LN_2
    }
}

/// `C_J(K)` by the default quadrature of the domain.
pub fn jeffreys_constant(family: &FamilySpec, domain: &ParamDomain) -> Result<f64> {
    jeffreys_integral_on(family, domain, &GridSpec::default_for(domain))
}

/// Assemble a report from per-class regrets (same order as `table.classes`).
pub fn summarize(
    label: &str,
    family: &FamilySpec,
    table: &ClassTable,
    regrets: &[f64],
    opts: &RegretOptions,
) -> Result<RegretReport> {
    if regrets.len() != table.classes.len() {
        return Err(Error::Config("one regret per class is required".into()));
    }
    let scope = opts.scope.unwrap_or(Scope::InDomain);
    let delta = opts.delta.unwrap_or_else(|| good_threshold(table.n));
    let mut rows = Vec::with_capacity(regrets.len());
    let (mut max, mut min, mut arg) = (f64::NEG_INFINITY, f64::INFINITY, None);
    let (mut count, mut good) = (0u64, 0u64);
    for (c, r) in table.classes.iter().zip(regrets) {
        let row = ClassRow {
            counts: c.counts.clone(),
            regret: *r,
            in_domain: c.in_domain,
            good: c.is_good(delta),
            v_norm: c.v_norm,
        };
        if scope == Scope::AllStrings || c.in_domain {
            count += 1;
            good += row.good as u64;
            if *r > max || arg.is_none() {
                max = *r;
                arg = Some(c.counts.clone());
            }
            min = min.min(*r);
        }
        rows.push(row);
    }
    let argmax_counts = arg.ok_or_else(|| Error::Domain("no count class lies in the domain".into()))?;
    let c_j = match opts.jeffreys_integral {
        Some(v) => Some(v),
        None => jeffreys_constant(family, &table.domain).ok(),
    };
    let asymptotic = c_j.map(|c| asymptotic_minimax_value(family.dim(), table.n as f64, c));
    Ok(RegretReport {
        n: table.n,
        strategy: label.into(),
        scope,
        max_regret_nats: max,
        min_regret_nats: min,
        argmax_counts,
        asymptotic_nats: asymptotic,
        gap_nats: asymptotic.map(|a| max - a),
        delta,
        num_classes: count,
        good_fraction: good as f64 / count as f64,
        rows,
    })
}

/// Exact worst-case regret of a strategy over strings of length `n`.
pub fn worst_case_regret(
    strategy: &Strategy,
    family: &FamilySpec,
    domain: &ParamDomain,
    n: u64,
    opts: &RegretOptions,
) -> Result<RegretReport> {
    let table = ClassTable::build(family, domain, n)?;
    let regrets = class_regrets(strategy, &table, 0..table.classes.len())?;
    summarize(&strategy.spec().label(), family, &table, &regrets, opts)
}

/// Count classes labelled good or not good at threshold `δ`.
pub fn classify_good_strings(family: &FamilySpec, domain: &ParamDomain, n: u64, delta: f64) -> Result<Vec<(ClassInfo, bool)>> {
    let table = ClassTable::build(family, domain, n)?;
    Ok(table
        .classes
        .into_iter()
        .map(|c| {
            let g = c.is_good(delta);
            (c, g)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceEstimate {
    /// `(d/2) log(n/2π) + log(|Ĵ|^{1/2} / w(θ̂))`.
    pub value: f64,
    /// `(1/2) log(|Ĵ(θ̂)| / |J(θ̂)|)`.
    pub correction: f64,
    pub theta_hat: Vec<f64>,
    /// The MLE touches the boundary of `K`; the approximation is not valid there.
    pub boundary: bool,
}

/// Laplace approximation of the pointwise regret of the Bayes mixture with `prior`.
pub fn laplace_regret_estimate(prior: &Prior, family: &FamilySpec, domain: &ParamDomain, obs: Obs<'_>) -> Result<LaplaceEstimate> {
    let best = mle_obs(family, obs, domain)?;
    let theta = best.theta;
    let n = family.aggregate(&theta, obs, crate::model_families::Order::Value)?.n as f64;
    let boundary = best.boundary || !domain.interior_contains(&theta, DOMAIN_TOL);
    let log_det_hat = log_det_spd(&family.empirical_fisher_obs(&theta, obs)?, "empirical Fisher information")?;
    let log_det = log_det_spd(&family.fisher(&theta)?, "Fisher information")?;
    let d = family.dim() as f64;
    let value = 0.5 * d * (n / (2.0 * PI)).ln() + 0.5 * log_det_hat - prior.log_density(family, &theta)?;
    Ok(LaplaceEstimate { value, correction: 0.5 * (log_det_hat - log_det), theta_hat: theta, boundary })
}

/// Monte Carlo means with standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedRegret {
    pub trials: u64,
    /// `E log p(X^n|θ)/q(X^n)` at the sampling parameter.
    pub redundancy: f64,
    pub redundancy_stderr: f64,
    /// `E log p(X^n|θ̂_K)/q(X^n)`, when a domain is given.
    pub regret: Option<f64>,
    pub regret_stderr: Option<f64>,
}

fn sample_obs(family: &FamilySpec, theta: &[f64], n: u64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if family.alphabet_size().is_some() {
        let probs: Vec<f64> = family.symbol_log_probs(theta)?.iter().map(|l| l.exp()).collect();
        return Ok((0..n)
            .map(|_| {
                let mut u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
                let mut x = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    if u < *p {
                        x = i;
                        break;
                    }
                    u -= p;
                }
                x as f64
            })
            .collect());
    }
    match family {
        FamilySpec::Exponential(p) => match p.model {
            ExponentialModel::Poisson {} => {
                let dist = Poisson::new((-theta[0]).exp())
                    .map_err(|e| Error::Domain(format!("Poisson rate at theta = {theta:?}: {e}")))?;
                Ok((0..n).map(|_| -dist.sample(rng)).collect())
            }
            ExponentialModel::Gaussian {} => {
                let var = -0.5 / theta[1];
                let (mu, sd) = (theta[0] * var, var.sqrt());
                Ok((0..n).map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            ExponentialModel::Finite { .. } => unreachable!("finite alphabets are handled above"),
        },
        FamilySpec::ContaminatedGaussian(p) => {
            let mut out = Vec::with_capacity(n as usize * p.d);
            for _ in 0..n {
                let sd = if rng.random::<f64>() < p.nu { p.s } else { 1.0 };
                for t in theta {
                    out.push(t + sd * rng.sample::<f64, _>(StandardNormal));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported("sampling from this family".into())),
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Expected redundancy (and regret, given `K`) of a strategy when data come from `θ`.
pub fn expected_regret_mc(
    strategy: &Strategy,
    family: &FamilySpec,
    theta: &[f64],
    n: u64,
    trials: u64,
    seed: u64,
    domain: Option<&ParamDomain>,
) -> Result<ExpectedRegret> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut red = Vec::with_capacity(trials as usize);
    let mut reg = Vec::new();
    for _ in 0..trials {
        let xs = sample_obs(family, theta, n, &mut rng)?;
        let obs = Obs::Seq(&xs);
        let log_q = strategy.log_marginal(obs)?;
        red.push(family.log_likelihood(theta, &xs)? - log_q);
        if let Some(dom) = domain {
            reg.push(mle_obs(family, obs, dom)?.loglik - log_q);
        }
    }
    let (redundancy, redundancy_stderr) = mean_stderr(&red);
    let (regret, regret_stderr) = if domain.is_some() {
        let (m, s) = mean_stderr(&reg);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    Ok(ExpectedRegret { trials, redundancy, redundancy_stderr, regret, regret_stderr })
}

/// Both sides of `log p(x^n|θ̂)/p(x^n|θ) ≤ n D(q(·|θ̂) ‖ q(·|θ))` for a model with a
/// finite latent variable, `θ̂` the MLE of the class.
pub fn latent_divergence_bound(family: &FamilySpec, counts: &[u64], theta_hat: &[f64], theta: &[f64]) -> Result<(f64, f64)> {
    let FamilySpec::HiddenVariable(h) = family else {
        return Err(Error::Unsupported("latent divergence needs a hidden-variable family".into()));
    };
    let n: u64 = counts.iter().sum();
    let lhs = family.log_likelihood_counts(theta_hat, counts)? - family.log_likelihood_counts(theta, counts)?;
    let (qh, q) = (h.latent_probs(theta_hat), h.latent_probs(theta));
    let kl: f64 = qh.iter().zip(&q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
    Ok((lhs, n as f64 * kl))
}

/// Split `0..total` into at most `chunks` contiguous ranges for parallel sweeps.
pub fn chunk_ranges(total: usize, chunks: usize) -> Vec<Range<usize>> {
    let chunks = chunks.max(1).min(total.max(1));
    let size = total.div_ceil(chunks);
    (0..chunks).map(|i| (i * size).min(total)..((i + 1) * size).min(total)).filter(|r| !r.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::mixtures::StrategySpec;
    use crate::model_families::{bernoulli_mean, bernoulli_natural, curved_bernoulli_pair};
    use crate::priors::PriorSpec;

    fn kt() -> Strategy {
        Strategy::build(&StrategySpec::bayes(PriorSpec::jeffreys(ParamDomain::simplex(1, 0.0))), &bernoulli_mean()).unwrap()
    }

    #[test]
    fn multiplicities_are_exact() {
        let c = CountClass::new(vec![3, 0, 5, 2]);
        assert_eq!(c.multiplicity, BigUint::from(2520u32));
        let big = CountClass::new(vec![50, 50, 50]);
        let text = big.multiplicity.to_str_radix(10);
        assert_eq!(&text[..8], "20308076");
        assert!((big.log_multiplicity() - 159.58680499410463).abs() < 1e-9);
    }

    #[test]
    fn shtarkov_small_cases() {
        let fam = bernoulli_mean();
        let full = ParamDomain::simplex(1, 0.0);
        assert!((shtarkov_log_constant(&fam, &full, 1).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((shtarkov_log_constant(&fam, &full, 2).unwrap() - 2.5f64.ln()).abs() < 1e-12);
        let narrow = ParamDomain::simplex(1, 0.2);
        assert!(shtarkov_log_constant(&fam, &narrow, 10).unwrap() < shtarkov_log_constant(&fam, &full, 10).unwrap());
        assert!((asymptotic_minimax_value(1, 1024.0, PI) - 3.691527255444454).abs() < 1e-12);
        assert!(asymptotic_minimax_value(1, 2.0 * PI, 1.0).abs() < 1e-15);
        assert!((asymptotic_minimax_value(2, 100.0, 2.0) - expected_asymptotic_value(2, 100.0, 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kt_regret_examples() {
        let fam = bernoulli_mean();
        let full = ParamDomain::simplex(1, 0.0);
        let s = kt();
        let r = pointwise_regret(&s, &fam, &full, Obs::Seq(&[1.0, 1.0])).unwrap();
        assert!((r - (1.0f64 / 0.375).ln()).abs() < 1e-12);
        let rep = worst_case_regret(&s, &fam, &full, 8, &RegretOptions::default()).unwrap();
        assert!(rep.argmax_counts == vec![8, 0] || rep.argmax_counts == vec![0, 8]);
        let balanced = rep.rows.iter().find(|r| r.counts == vec![4, 4]).unwrap().regret;
        assert!(rep.max_regret_nats > balanced);
        assert!(pointwise_regret(&s, &fam, &full, Obs::Seq(&[])).is_err());
    }

    #[test]
    fn nml_regret_is_flat() {
        let fam = bernoulli_mean();
        let k = ParamDomain::simplex(1, 0.1);
        let nml = Strategy::build(&StrategySpec::Nml { n: 10, domain: k.clone() }, &fam).unwrap();
        let rep = worst_case_regret(&nml, &fam, &k, 10, &RegretOptions { scope: Some(Scope::AllStrings), ..Default::default() }).unwrap();
        let c = nml.nml_log_constant().unwrap();
        assert!(rep.rows.iter().all(|r| (r.regret - c).abs() < 1e-12));
        assert!((c - shtarkov_log_constant(&fam, &k, 10).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn exponential_classes_are_all_good() {
        let fam = bernoulli_natural(-2.0, 2.0);
        let labels = classify_good_strings(&fam, &ParamDomain::interval(-2.0, 2.0), 10, 0.0).unwrap();
        assert!(labels.iter().filter(|(c, _)| c.in_domain).all(|(_, g)| *g));
        let curved = curved_bernoulli_pair(0.45);
        let labels = classify_good_strings(&curved, &ParamDomain::interval(0.2, 2.0), 12, good_threshold(12).powf(1.0)).unwrap();
        assert!(labels.iter().any(|(_, g)| *g) && labels.iter().any(|(c, g)| c.in_domain && !*g));
    }

    #[test]
    fn laplace_close_to_exact_for_kt() {
        let fam = bernoulli_mean();
        let full = ParamDomain::simplex(1, 0.0);
        let prior = Prior::build(&PriorSpec::jeffreys(full.clone()), &fam).unwrap();
        let counts = [32u64, 32];
        let est = laplace_regret_estimate(&prior, &fam, &full, Obs::Counts(&counts)).unwrap();
        let exact = pointwise_regret(&kt(), &fam, &full, Obs::Counts(&counts)).unwrap();
        assert!((est.value - exact).abs() < 0.05);
        assert!(est.correction.abs() < 1e-12 && !est.boundary);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let fam = bernoulli_mean();
        let s = kt();
        let a = expected_regret_mc(&s, &fam, &[0.3], 20, 200, 7, Some(&ParamDomain::simplex(1, 0.0))).unwrap();
        let b = expected_regret_mc(&s, &fam, &[0.3], 20, 200, 7, Some(&ParamDomain::simplex(1, 0.0))).unwrap();
        assert_eq!(a, b);
        assert!(a.regret.unwrap() > a.redundancy);
    }

    #[test]
    fn chunks_cover_range() {
        let r = chunk_ranges(10, 3);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert_eq!(chunk_ranges(2, 8), vec![0..1, 1..2]);
    }
}
