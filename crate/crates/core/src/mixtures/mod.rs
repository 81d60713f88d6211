//! Coding distributions over a family: Bayes and tilted mixtures, NML, single
//! members and convex composites, with their sequential predictives.

mod composites;
mod tilted;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model_families::mle::mle_counts;
use crate::model_families::{symbol_index, FamilySpec, Obs, ParamDomain};
use crate::numeric::{composition_count, for_each_composition, ln_gamma, log_multinomial, LogSum};
use crate::priors::{GridScheme, GridSpec, Prior, PriorKind, PriorSpec};

pub use composites::{
    ideal_ambient_composite, ideal_ambient_spec, ideal_tilted_composite, ideal_tilted_spec, simplex_boundary_composite,
    simplex_boundary_spec, SimplexBoundary,
};
pub use tilted::{psi, symbol_deviations, tilted_log_density, TiltingSpec};

/// Largest number of count classes an NML table will enumerate.
pub const NML_CLASS_LIMIT: u128 = 10_000_000;

/// Serializable description of a coding distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    /// `∫ p(x^n|θ) w(θ) dθ`. `family` replaces the surrounding family, e.g. an
    /// ambient model over the same alphabet.
    Bayes {
        prior: PriorSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<Box<FamilySpec>>,
    },
    /// Mixture of the tilted densities `p_e(x^n|θ,β)` under `w(θ)` times a uniform law on the `β` box.
    Tilted {
        prior: PriorSpec,
        #[serde(default)]
        tilting: TiltingSpec,
    },
    /// `max_{θ∈K} p(x^n|θ) / c_{n,K}` for strings of length `n`.
    Nml { n: u64, domain: ParamDomain },
    /// A single member of the family.
    Fixed { theta: Vec<f64> },
    Composite { weights: Vec<f64>, children: Vec<StrategySpec> },
}

impl StrategySpec {
    pub fn bayes(prior: PriorSpec) -> Self {
        StrategySpec::Bayes { prior, family: None }
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            StrategySpec::Bayes { prior, family } => {
                let p = match &prior.kind {
                    PriorKind::Jeffreys {} => String::from("jeffreys"),
                    PriorKind::Dirichlet { alpha } => format!("dirichlet({alpha})"),
                    PriorKind::Ideal { .. } => String::from("ideal"),
                    PriorKind::Uniform {} => String::from("uniform"),
                };
                if family.is_some() {
                    format!("bayes-{p}-ambient")
                } else {
                    format!("bayes-{p}")
                }
            }
            StrategySpec::Tilted { .. } => String::from("tilted"),
            StrategySpec::Nml { n, .. } => format!("nml({n})"),
            StrategySpec::Fixed { .. } => String::from("fixed"),
            StrategySpec::Composite { children, .. } => {
                let parts: Vec<String> = children.iter().map(StrategySpec::label).collect();
                format!("composite[{}]", parts.join("+"))
            }
        }
    }
}

#[derive(Clone, Debug)]
struct NmlTable {
    n: u64,
    log_c: f64,
    log_max: BTreeMap<Vec<u64>, f64>,
}

#[derive(Clone, Debug)]
enum Body {
    /// Dirichlet(α) over the full simplex of a plain multinomial: closed form.
    Conjugate { alpha: f64 },
    Bayes { nodes: Vec<Vec<f64>>, log_weights: Vec<f64>, table: Option<Vec<f64>>, factor_stderr: f64 },
    Tilted { nodes: Vec<Vec<f64>>, log_weights: Vec<f64>, tilt: tilted::TiltBuild },
    Nml(NmlTable),
    Fixed { theta: Vec<f64>, table: Option<Vec<f64>> },
    Composite { weights: Vec<f64>, children: Vec<Strategy> },
}

/// Predictive distribution of the next symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictive {
    /// Renormalized probabilities.
    pub probs: Vec<f64>,
    /// `Σ q(x|prefix) - 1` before renormalization.
    pub mass_error: f64,
}

/// A constructed strategy; evaluation is read-only and may run on many threads.
#[derive(Clone, Debug)]
pub struct Strategy {
    spec: StrategySpec,
    model: FamilySpec,
    body: Body,
}

fn check_alphabet(outer: &FamilySpec, inner: &FamilySpec) -> Result<()> {
    if outer.alphabet_size() != inner.alphabet_size() || outer.obs_dim() != inner.obs_dim() {
        return Err(Error::Config("replacement family must share the observation space".into()));
    }
    Ok(())
}

/// Grid used by tilted mixtures when none is given; `β` already multiplies the node count.
fn tilted_grid(prior: &PriorSpec) -> PriorSpec {
    let mut p = prior.clone();
    if p.grid.is_none() && p.domain.dim() >= 2 {
        let scheme = if p.domain.is_simplex() { GridScheme::SimplexProduct } else { GridScheme::GaussLegendre };
        p.grid = Some(GridSpec::new(scheme, 24));
    }
    p
}

fn table_for(model: &FamilySpec, nodes: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    if model.alphabet_size().is_none() {
        return Ok(None);
    }
    let mut t = Vec::new();
    for theta in nodes {
        t.extend(model.symbol_log_probs(theta)?);
    }
    Ok(Some(t))
}

/// `Σ_x c_x row[x]`, skipping empty cells so that `0 · (-∞)` never appears.
fn dot_counts(counts: &[u64], row: &[f64]) -> f64 {
    counts.iter().zip(row).filter(|(c, _)| **c > 0).map(|(c, l)| *c as f64 * l).sum()
}

impl Strategy {
    pub fn build(spec: &StrategySpec, family: &FamilySpec) -> Result<Self> {
        family.validate()?;
        let (model, body) = match spec {
            StrategySpec::Bayes { prior, family: alt } => {
                let model = match alt {
                    Some(m) => {
                        m.validate()?;
                        check_alphabet(family, m)?;
                        (**m).clone()
                    }
                    None => family.clone(),
                };
                let conjugate = match (&prior.kind, &prior.domain, &prior.grid) {
                    (PriorKind::Jeffreys {}, ParamDomain::Simplex { tau, .. }, None) if *tau == 0.0 => Some(0.5),
                    (PriorKind::Dirichlet { alpha }, ParamDomain::Simplex { tau, .. }, None) if *tau == 0.0 => {
                        Some(*alpha)
                    }
                    _ => None,
                };
                let body = match conjugate {
                    Some(alpha) if model.is_multinomial() && prior.domain.dim() == model.dim() => {
                        if !(alpha > 0.0 && alpha.is_finite()) {
                            return Err(Error::Config(format!("Dirichlet parameter must be positive, got {alpha}")));
                        }
                        Body::Conjugate { alpha }
                    }
                    _ => {
                        let built = Prior::build(prior, &model)?;
                        let table = table_for(&model, &built.nodes)?;
                        Body::Bayes {
                            nodes: built.nodes,
                            log_weights: built.log_weights,
                            table,
                            factor_stderr: built.factor_stderr,
                        }
                    }
                };
                (model, body)
            }
            StrategySpec::Tilted { prior, tilting } => {
                let built = Prior::build(&tilted_grid(prior), family)?;
                let tilt = tilted::build_tables(family, &built.nodes, tilting)?;
                (family.clone(), Body::Tilted { nodes: built.nodes, log_weights: built.log_weights, tilt })
            }
            StrategySpec::Nml { n, domain } => (family.clone(), Body::Nml(nml_table(family, *n, domain)?)),
            StrategySpec::Fixed { theta } => {
                if !family.admissible(theta) {
                    return Err(Error::Domain(format!("theta = {theta:?} is not an admissible parameter")));
                }
                let table = table_for(family, core::slice::from_ref(theta))?;
                (family.clone(), Body::Fixed { theta: theta.clone(), table })
            }
            StrategySpec::Composite { weights, children } => {
                if weights.len() != children.len() || children.is_empty() {
                    return Err(Error::Config(format!(
                        "composite needs one weight per child ({} weights, {} children)",
                        weights.len(),
                        children.len()
                    )));
                }
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return Err(Error::Config(format!("composite weights must be positive, got {weights:?}")));
                }
                let total: f64 = weights.iter().sum();
                if total > 1.0 + 1e-12 {
                    return Err(Error::Config(format!("composite weights sum to {total} > 1")));
                }
                let built = children.iter().map(|c| Strategy::build(c, family)).collect::<Result<_>>()?;
                (family.clone(), Body::Composite { weights: weights.clone(), children: built })
            }
        };
        Ok(Strategy { spec: spec.clone(), model, body })
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    /// Family the strategy evaluates (the replacement family for an ambient Bayes child).
    pub fn family(&self) -> &FamilySpec {
        &self.model
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        self.model.alphabet_size()
    }

    /// Composite weights and children; `None` for other kinds.
    pub fn children(&self) -> Option<(&[f64], &[Strategy])> {
        match &self.body {
            Body::Composite { weights, children } => Some((weights, children)),
            _ => None,
        }
    }

    /// Total probability assigned to all strings of any fixed length.
    pub fn total_mass(&self) -> f64 {
        match &self.body {
            Body::Composite { weights, children } => weights.iter().zip(children).map(|(w, c)| w * c.total_mass()).sum(),
            _ => 1.0,
        }
    }

    /// Total mass falls short of one.
    pub fn is_deficient(&self) -> bool {
        self.total_mass() < 1.0 - 1e-12
    }

    /// Largest eigenvalue of the tilted covariance of `V` over the `(θ, β)` grid.
    pub fn lambda_star(&self) -> Option<f64> {
        match &self.body {
            Body::Tilted { tilt, .. } => tilt.lambda_star,
            Body::Composite { children, .. } => {
                children.iter().filter_map(Strategy::lambda_star).fold(None, |a, b| Some(a.map_or(b, |a: f64| a.max(b))))
            }
            _ => None,
        }
    }

    /// Monte Carlo standard error carried by ideal-prior weights, if any.
    pub fn factor_stderr(&self) -> f64 {
        match &self.body {
            Body::Bayes { factor_stderr, .. } => *factor_stderr,
            Body::Composite { children, .. } => children.iter().map(Strategy::factor_stderr).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// Symbol counts of a finite-alphabet sequence.
    pub fn counts_of(&self, xs: &[f64]) -> Result<Vec<u64>> {
        let k = self.model.finite_alphabet()?;
        let mut c = vec![0u64; k];
        for x in xs {
            c[symbol_index(*x, k)?] += 1;
        }
        Ok(c)
    }

    /// `log q(x^n)`.
    pub fn log_marginal(&self, obs: Obs<'_>) -> Result<f64> {
        match obs {
            Obs::Counts(c) => self.log_marginal_counts(c),
            Obs::Seq(xs) if self.model.alphabet_size().is_some() => self.log_marginal_counts(&self.counts_of(xs)?),
            Obs::Seq(xs) => self.log_marginal_seq(xs),
        }
    }

    /// `log q` of any string with the given symbol counts.
    pub fn log_marginal_counts(&self, counts: &[u64]) -> Result<f64> {
        let k = self.model.finite_alphabet()?;
        if counts.len() != k {
            return Err(Error::Alphabet(format!("{} counts for an alphabet of size {k}", counts.len())));
        }
        let value = match &self.body {
            Body::Conjugate { alpha } => dirichlet_multinomial_log(counts, *alpha),
            Body::Bayes { log_weights, table, .. } => {
                let table = table.as_ref().expect("finite alphabet has a table");
                let mut acc = LogSum::default();
                for (lw, row) in log_weights.iter().zip(table.chunks(k)) {
                    acc.add(lw + dot_counts(counts, row));
                }
                nonzero(acc.value())?
            }
            Body::Tilted { log_weights, tilt, .. } => {
                let tilted::TiltTables::Finite { logp } = &tilt.tables else { unreachable!() };
                let nb = tilt.betas.len();
                let mut acc = LogSum::default();
                for (i, lw) in log_weights.iter().enumerate() {
                    for (j, lb) in tilt.beta_log_weights.iter().enumerate() {
                        let row = &logp[(i * nb + j) * k..(i * nb + j + 1) * k];
                        acc.add(lw + lb + dot_counts(counts, row));
                    }
                }
                nonzero(acc.value())?
            }
            Body::Nml(t) => nml_log_marginal(t, counts)?,
            Body::Fixed { table, .. } => dot_counts(counts, table.as_ref().expect("finite alphabet has a table")),
            Body::Composite { weights, children } => {
                let mut acc = LogSum::default();
                for (w, c) in weights.iter().zip(children) {
                    acc.add(w.ln() + c.log_marginal_counts(counts)?);
                }
                acc.value()
            }
        };
        Ok(value)
    }

    fn log_marginal_seq(&self, xs: &[f64]) -> Result<f64> {
        let od = self.model.obs_dim();
        if xs.len() % od != 0 {
            return Err(Error::Alphabet(format!("sequence length {} is not a multiple of {od}", xs.len())));
        }
        match &self.body {
            Body::Bayes { nodes, log_weights, .. } => {
                let mut acc = LogSum::default();
                for (theta, lw) in nodes.iter().zip(log_weights) {
                    acc.add(lw + self.model.log_likelihood(theta, xs)?);
                }
                nonzero(acc.value())
            }
            Body::Tilted { nodes, log_weights, tilt } => {
                let tilted::TiltTables::Contaminated { psi } = &tilt.tables else { unreachable!() };
                let n = xs.len() as f64;
                let mut acc = LogSum::default();
                for (theta, lw) in nodes.iter().zip(log_weights) {
                    let (mut ll, mut v) = (0.0, 0.0);
                    for x in xs {
                        let (lp, vx) = tilted::contaminated_deviation_at(&self.model, x - theta[0])?;
                        ll += lp;
                        v += vx;
                    }
                    for ((beta, lb), ps) in tilt.betas.iter().zip(&tilt.beta_log_weights).zip(psi) {
                        acc.add(lw + lb + ll + beta[(0, 0)] * v - n * ps);
                    }
                }
                nonzero(acc.value())
            }
            Body::Fixed { theta, .. } => self.model.log_likelihood(theta, xs),
            Body::Composite { weights, children } => {
                let mut acc = LogSum::default();
                for (w, c) in weights.iter().zip(children) {
                    acc.add(w.ln() + c.log_marginal_seq(xs)?);
                }
                Ok(acc.value())
            }
            Body::Conjugate { .. } | Body::Nml(_) => unreachable!("finite-alphabet strategies"),
        }
    }

    /// Next-symbol distribution after a prefix given by its counts.
    pub fn predictive_counts(&self, counts: &[u64]) -> Result<Predictive> {
        let base = self.log_marginal_counts(counts)?;
        if base == f64::NEG_INFINITY {
            return Err(Error::Numerical { context: "predictive".into(), detail: "prefix has zero probability".into() });
        }
        let mut next = counts.to_vec();
        let mut probs = Vec::with_capacity(counts.len());
        for x in 0..counts.len() {
            next[x] += 1;
            probs.push((self.log_marginal_counts(&next)? - base).exp());
            next[x] -= 1;
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical { context: "predictive".into(), detail: format!("mass {total}") });
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Predictive { probs, mass_error: total - 1.0 })
    }

    /// Next-symbol distribution after a finite-alphabet prefix.
    pub fn predictive(&self, prefix: &[f64]) -> Result<Predictive> {
        self.predictive_counts(&self.counts_of(prefix)?)
    }

    /// `log q(x | prefix)` for one further observation; works for continuous families.
    pub fn log_conditional(&self, prefix: &[f64], x: &[f64]) -> Result<f64> {
        let mut all = prefix.to_vec();
        all.extend_from_slice(x);
        Ok(self.log_marginal(Obs::Seq(&all))? - self.log_marginal(Obs::Seq(prefix))?)
    }
}

fn nonzero(v: f64) -> Result<f64> {
    if v == f64::NEG_INFINITY || v.is_nan() {
        return Err(Error::Numerical { context: "mixture".into(), detail: "every quadrature node has zero likelihood".into() });
    }
    Ok(v)
}

fn nml_table(family: &FamilySpec, n: u64, domain: &ParamDomain) -> Result<NmlTable> {
    let k = family.finite_alphabet()?;
    domain.validate()?;
    if domain.dim() != family.dim() {
        return Err(Error::Config("NML domain dimension differs from the family".into()));
    }
    let classes = composition_count(n, k);
    if classes > NML_CLASS_LIMIT {
        return Err(Error::GuardExceeded { classes, limit: NML_CLASS_LIMIT });
    }
    let mut log_max = BTreeMap::new();
    let mut total = LogSum::default();
    let mut failure = None;
    for_each_composition(n, k, |c| {
        if failure.is_some() {
            return;
        }
        match mle_counts(family, c, domain) {
            Ok(m) => {
                total.add(log_multinomial(c) + m.loglik);
                log_max.insert(c.to_vec(), m.loglik);
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(NmlTable { n, log_c: total.value(), log_max })
}

/// Prefix probabilities sum the normalized maximum likelihood over all completions.
fn nml_log_marginal(t: &NmlTable, counts: &[u64]) -> Result<f64> {
    let m: u64 = counts.iter().sum();
    if m > t.n {
        return Err(Error::Domain(format!("NML table covers strings of length {}, got {m}", t.n)));
    }
    let mut acc = LogSum::default();
    let mut full = counts.to_vec();
    for_each_composition(t.n - m, counts.len(), |s| {
        for ((f, c), add) in full.iter_mut().zip(counts).zip(s) {
            *f = c + add;
        }
        acc.add(log_multinomial(s) + t.log_max[&full]);
    });
    Ok(acc.value() - t.log_c)
}

impl Strategy {
    /// `log c_{n,K}` for an NML strategy.
    pub fn nml_log_constant(&self) -> Option<f64> {
        match &self.body {
            Body::Nml(t) => Some(t.log_c),
            _ => None,
        }
    }
}

/// Dirichlet-multinomial `log ∫ ∏ θ_x^{c_x} Dir(θ; α)` for one string with these counts.
pub fn dirichlet_multinomial_log(counts: &[u64], alpha: f64) -> f64 {
    let n: u64 = counts.iter().sum();
    let k = counts.len() as f64;
    ln_gamma(k * alpha) - ln_gamma(n as f64 + k * alpha)
        + counts.iter().map(|c| ln_gamma(*c as f64 + alpha) - ln_gamma(alpha)).sum::<f64>()
}
