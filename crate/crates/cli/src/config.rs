//! JSON experiment files.

use std::path::PathBuf;

use minimax_core::mixtures::{
    ideal_ambient_spec, ideal_tilted_spec, simplex_boundary_spec, SimplexBoundary, StrategySpec, TiltingSpec,
};
use minimax_core::model_families::{self as fam, FamilySpec, ParamDomain};
use minimax_core::priors::{McSpec, PriorKind, PriorSpec};
use minimax_core::regret_lab::Scope;
use serde::Deserialize;

use crate::Fail;

/// Named family constructors, so configs need not spell out emission tables.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Bernoulli {},
    Multinomial { k: usize },
    BernoulliNatural { lo: f64, hi: f64 },
    TruncatedPoisson { max: usize, lo: f64, hi: f64 },
    CurvedBernoulliPair { c: f64 },
    Mixture { m: usize, k: usize, emission: Vec<f64> },
    Contaminated { d: usize, nu: f64, s2: f64 },
}

impl Preset {
    fn family(&self) -> FamilySpec {
        match self {
            Preset::Bernoulli {} => fam::bernoulli_mean(),
            Preset::Multinomial { k } => fam::multinomial_mean(*k),
            Preset::BernoulliNatural { lo, hi } => fam::bernoulli_natural(*lo, *hi),
            Preset::TruncatedPoisson { max, lo, hi } => fam::truncated_poisson(*max, *lo, *hi),
            Preset::CurvedBernoulliPair { c } => fam::curved_bernoulli_pair(*c),
            Preset::Mixture { m, k, emission } => fam::mixture_family(*m, *k, emission.clone()),
            Preset::Contaminated { d, nu, s2 } => fam::contaminated(*d, *nu, *s2),
        }
    }
}

fn half() -> f64 {
    0.5
}

fn boundary_r() -> f64 {
    0.02
}

fn boundary_alpha() -> f64 {
    0.25
}

fn boundary_p() -> f64 {
    0.9
}

/// How a strategy is obtained; builders that depend on `n` are rebuilt per length.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyDef {
    /// A literal strategy tree.
    Spec { spec: StrategySpec },
    Jeffreys {},
    Uniform {},
    Dirichlet { alpha: f64 },
    Fixed { theta: Vec<f64> },
    Ideal {
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default)]
        alpha_scale: Option<f64>,
        #[serde(default)]
        mc: Option<McSpec>,
    },
    Nml {},
    IdealTilted {
        #[serde(default = "half")]
        r: f64,
        #[serde(default)]
        tilting: TiltingSpec,
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default)]
        alpha_scale: Option<f64>,
    },
    IdealAmbient {
        #[serde(default = "half")]
        r: f64,
        ambient_box: ParamDomain,
        #[serde(default)]
        eps: Option<f64>,
        #[serde(default)]
        alpha_scale: Option<f64>,
    },
    SimplexBoundary {
        #[serde(default = "boundary_r")]
        r: f64,
        #[serde(default = "boundary_alpha")]
        alpha: f64,
        #[serde(default = "boundary_p")]
        p: f64,
        #[serde(default)]
        tilting: TiltingSpec,
    },
}

#[derive(Clone, Debug, Deserialize)]
pub struct StrategyEntry {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub def: StrategyDef,
}

/// Expected-regret Monte Carlo settings for `compare`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSpec {
    pub theta: Vec<f64>,
    pub trials: u64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub domain: Option<ParamDomain>,
    #[serde(default)]
    pub strategies: Vec<StrategyEntry>,
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub scope: Option<Scope>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub jeffreys_integral: Option<f64>,
    #[serde(default)]
    pub expected: Option<ExpectedSpec>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub alpha_scale: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Fail::Usage(format!("config {}: {e}", path.display())).into())
    }

    pub fn family(&self) -> anyhow::Result<FamilySpec> {
        let f = match (&self.family, &self.preset) {
            (Some(f), None) => f.clone(),
            (None, Some(p)) => p.family(),
            (None, None) => return Err(Fail::Usage("config needs `family` or `preset`".into()).into()),
            (Some(_), Some(_)) => return Err(Fail::Usage("config has both `family` and `preset`".into()).into()),
        };
        f.validate()?;
        Ok(f)
    }

    /// The configured domain, or the full simplex for mean-parameter families.
    pub fn domain(&self, family: &FamilySpec) -> anyhow::Result<ParamDomain> {
        let d = match (&self.domain, family) {
            (Some(d), _) => d.clone(),
            (None, FamilySpec::HiddenVariable(h)) => ParamDomain::simplex(h.d, 0.0),
            (None, _) => return Err(Fail::Usage("config needs `domain` for this family".into()).into()),
        };
        d.validate()?;
        if d.dim() != family.dim() {
            return Err(Fail::Usage(format!("domain dimension {} differs from family dimension {}", d.dim(), family.dim())).into());
        }
        Ok(d)
    }

    pub fn require_n(&self) -> anyhow::Result<()> {
        if self.n.is_empty() {
            return Err(Fail::Usage("config has an empty `n` list".into()).into());
        }
        Ok(())
    }

    pub fn require_strategies(&self) -> anyhow::Result<()> {
        if self.strategies.is_empty() {
            return Err(Fail::Usage("config has an empty strategy list".into()).into());
        }
        Ok(())
    }
}

impl StrategyEntry {
    pub fn label(&self, spec: &StrategySpec) -> String {
        self.name.clone().unwrap_or_else(|| spec.label())
    }
}

impl StrategyDef {
    /// Strategy tree at length `n`.
    pub fn spec(&self, family: &FamilySpec, domain: &ParamDomain, n: u64) -> anyhow::Result<StrategySpec> {
        let bayes = |kind: PriorKind| StrategySpec::bayes(PriorSpec { kind, domain: domain.clone(), grid: None });
        Ok(match self {
            StrategyDef::Spec { spec } => spec.clone(),
            StrategyDef::Jeffreys {} => bayes(PriorKind::Jeffreys {}),
            StrategyDef::Uniform {} => bayes(PriorKind::Uniform {}),
            StrategyDef::Dirichlet { alpha } => bayes(PriorKind::Dirichlet { alpha: *alpha }),
            StrategyDef::Fixed { theta } => StrategySpec::Fixed { theta: theta.clone() },
            StrategyDef::Ideal { eps, alpha_scale, mc } => bayes(PriorKind::Ideal {
                n,
                eps: *eps,
                alpha_scale: *alpha_scale,
                mc: mc.clone().unwrap_or_default(),
            }),
            StrategyDef::Nml {} => StrategySpec::Nml { n, domain: domain.clone() },
            StrategyDef::IdealTilted { r, tilting, eps, alpha_scale } => {
                ideal_tilted_spec(family, domain, n, *r, tilting, *eps, *alpha_scale)?
            }
            StrategyDef::IdealAmbient { r, ambient_box, eps, alpha_scale } => {
                ideal_ambient_spec(family, domain, n, *r, ambient_box, *eps, *alpha_scale)?
            }
            StrategyDef::SimplexBoundary { r, alpha, p, tilting } => {
                let s = SimplexBoundary { r: *r, alpha: *alpha, p: *p, tilting: tilting.clone(), ..SimplexBoundary::new(n) };
                simplex_boundary_spec(family, &s)?
            }
        })
    }
}
