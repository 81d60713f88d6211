//! Prior densities over a parameter domain and their normalizers.

pub mod grid;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use grid::{GridScheme, GridSpec, QuadratureGrid};

use num_traits::Float;

use crate::error::{Error, Result};
use crate::model_families::{FamilySpec, ParamDomain};
use crate::numeric::{chi_square_cdf, gauss_jacobi_beta, ln_gamma, log_det_spd, log_sum_exp, normal_cdf, sqrt_spd};

/// Monte Carlo settings for the Gaussian-mass factor when no closed form applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_seed() -> u64 {
    0xC0FFEE
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec { samples: default_samples(), seed: default_seed() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorKind {
    /// `|J(θ)|^{1/2} / C_J(K)`.
    Jeffreys {},
    /// `∏ θ_i^{α-1}` over a simplex, `θ_0 = 1 - Σ θ_i` included.
    Dirichlet { alpha: f64 },
    /// Jeffreys divided by the Gaussian mass of the local region around `θ`.
    Ideal {
        n: u64,
        /// Ball radius scale; defaults to `√(log n / n)`.
        #[serde(default)]
        eps: Option<f64>,
        /// Widening of the local Gaussian; defaults to `max(1, log n)`.
        #[serde(default)]
        alpha_scale: Option<f64>,
        #[serde(default)]
        mc: McSpec,
    },
    /// Constant density.
    Uniform {},
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub domain: ParamDomain,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

impl PriorSpec {
    pub fn jeffreys(domain: ParamDomain) -> Self {
        PriorSpec { kind: PriorKind::Jeffreys {}, domain, grid: None }
    }

    pub fn dirichlet(alpha: f64, domain: ParamDomain) -> Self {
        PriorSpec { kind: PriorKind::Dirichlet { alpha }, domain, grid: None }
    }

    pub fn ideal(n: u64, domain: ParamDomain) -> Self {
        PriorSpec { kind: PriorKind::Ideal { n, eps: None, alpha_scale: None, mc: McSpec::default() }, domain, grid: None }
    }

    pub fn uniform(domain: ParamDomain) -> Self {
        PriorSpec { kind: PriorKind::Uniform {}, domain, grid: None }
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = Some(grid);
        self
    }
}

pub fn default_eps(n: u64) -> f64 {
    let n = n as f64;
    (n.ln() / n).sqrt()
}

pub fn default_alpha_scale(n: u64) -> f64 {
    (n as f64).ln().max(1.0)
}

/// Settings of the ideal prior after defaults are filled in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealParams {
    pub n: u64,
    pub eps: f64,
    pub alpha_scale: f64,
}

impl IdealParams {
    pub fn new(n: u64, eps: Option<f64>, alpha_scale: Option<f64>) -> Result<Self> {
        let p = IdealParams {
            n,
            eps: eps.unwrap_or_else(|| default_eps(n)),
            alpha_scale: alpha_scale.unwrap_or_else(|| default_alpha_scale(n)),
        };
        if n == 0 || !(p.eps > 0.0) || !(p.alpha_scale >= 1.0) || !p.eps.is_finite() || !p.alpha_scale.is_finite() {
            return Err(Error::Config(format!(
                "ideal prior needs n >= 1, eps > 0, alpha_scale >= 1 (got n={n}, eps={}, alpha_scale={})",
                p.eps, p.alpha_scale
            )));
        }
        Ok(p)
    }

    /// Radius `√n ε` of the ball in standardized coordinates.
    pub fn radius(&self) -> f64 {
        (self.n as f64).sqrt() * self.eps
    }

    /// Rate quantities whose limits the construction relies on.
    pub fn diagnostics(&self, d: usize) -> IdealDiagnostics {
        let n = self.n as f64;
        IdealDiagnostics {
            n_eps2_over_d: n * self.eps * self.eps / d as f64,
            sqrt_n_eps_over_alpha: n.sqrt() * self.eps / self.alpha_scale,
            n_eps2_over_alpha2: n * self.eps * self.eps / (self.alpha_scale * self.alpha_scale),
            eps_alpha: self.eps * self.alpha_scale,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealDiagnostics {
    pub n_eps2_over_d: f64,
    pub sqrt_n_eps_over_alpha: f64,
    pub n_eps2_over_alpha2: f64,
    pub eps_alpha: f64,
}

/// Standard-Gaussian mass of the local region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorValue {
    pub value: f64,
    /// Zero for closed forms.
    pub stderr: f64,
    pub exact: bool,
    /// `θ` lies outside the domain, so the region is empty.
    pub empty: bool,
}

/// `|J(θ)|^{1/2}`, erroring unless `J` is positive definite.
pub fn sqrt_det_fisher(family: &FamilySpec, theta: &[f64]) -> Result<f64> {
    let j = family.fisher(theta)?;
    Ok((0.5 * log_det_spd(&j, "Fisher information")?).exp())
}

/// `∫_K |J(θ)|^{1/2} dθ` on a fixed grid.
pub fn jeffreys_integral(family: &FamilySpec, grid: &QuadratureGrid) -> Result<f64> {
    let mut total = 0.0;
    for (node, w) in grid.nodes.iter().zip(&grid.weights) {
        let v = sqrt_det_fisher(family, node).map_err(|e| Error::Numerical {
            context: "Jeffreys integral".into(),
            detail: format!("at node {node:?}: {e}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Numerical {
                context: "Jeffreys integral".into(),
                detail: format!("integrand is not finite at node {node:?}"),
            });
        }
        total += w * v;
    }
    Ok(total)
}

/// Convenience: Jeffreys integral over `domain` with a grid built from `spec`.
pub fn jeffreys_integral_on(family: &FamilySpec, domain: &ParamDomain, spec: &GridSpec) -> Result<f64> {
    jeffreys_integral(family, &QuadratureGrid::new(domain, spec)?)
}

/// `P(a <= Z <= b)` for a standard normal, accurate in both tails.
pub fn normal_interval_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        0.0
    } else if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// `P(|Z| <= r)` for a `d`-dimensional standard normal.
pub fn gaussian_ball_mass(d: usize, r: f64) -> f64 {
    chi_square_cdf(d, r * r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallMassBound {
    /// `1 - exp(-(nε²/2)(1 - (d/nε²) log(nε²/d)) + d/2)`.
    pub general: f64,
    /// `1 - exp(-nε²/4 + d/2)`, valid when `nε²/d >= 2`.
    pub simplified: Option<f64>,
}

/// Lower bounds on the Gaussian mass of the ball of radius `√n ε`.
pub fn gaussian_ball_mass_bound(n: f64, eps: f64, d: usize) -> BallMassBound {
    let t = n * eps * eps;
    let df = d as f64;
    let general = 1.0 - (-(t / 2.0) * (1.0 - (df / t) * (t / df).ln()) + df / 2.0).exp();
    let simplified = (t / df >= 2.0).then(|| 1.0 - (-t / 4.0 + df / 2.0).exp());
    BallMassBound { general, simplified }
}

/// Region `{|z| <= R} ∩ M (K - θ)` with `M = (√n/α) J(θ)^{1/2}`, as half-spaces `g·z <= c`.
struct LocalRegion {
    d: usize,
    radius: f64,
    normals: Vec<DVector<f64>>,
    bounds: Vec<f64>,
    m: DMatrix<f64>,
}

impl LocalRegion {
    fn new(family: &FamilySpec, k: &ParamDomain, theta: &[f64], p: &IdealParams) -> Result<Self> {
        let d = family.dim();
        let j = family.fisher(theta)?;
        let root = sqrt_spd(&j, "Fisher information")?;
        let scale = (p.n as f64).sqrt() / p.alpha_scale;
        let m = &root * scale;
        let m_inv = m.clone().try_inverse().ok_or_else(|| Error::NotPositiveDefinite {
            context: "scaled Fisher root".into(),
            min_eigenvalue: 0.0,
        })?;
        let mut normals = Vec::new();
        let mut bounds = Vec::new();
        for hs in k.halfspaces() {
            let a = DVector::from_column_slice(&hs.normal);
            normals.push(&m_inv * &a);
            bounds.push(hs.bound - a.dot(&DVector::from_column_slice(theta)));
        }
        Ok(LocalRegion { d, radius: p.radius(), normals, bounds, m })
    }

    fn contains(&self, z: &DVector<f64>) -> bool {
        z.norm_squared() <= self.radius * self.radius
            && self.normals.iter().zip(&self.bounds).all(|(g, c)| g.dot(z) <= *c)
    }
}

/// Gaussian mass `Φ(U)` of `U = N_{√n ε}(0) ∩ ((n/α²) J(θ))^{1/2} (K - θ)`.
///
/// Closed forms: `d = 1`; the ball inside the polytope (chi-square); a box domain
/// with diagonal `J` whose image lies inside the ball (product of normal masses).
/// Otherwise Monte Carlo with antithetic pairs.
pub fn ideal_prior_factor(
    family: &FamilySpec,
    k: &ParamDomain,
    theta: &[f64],
    params: &IdealParams,
    mc: &McSpec,
) -> Result<FactorValue> {
    if !k.contains(theta, 1e-12) {
        return Ok(FactorValue { value: 0.0, stderr: 0.0, exact: true, empty: true });
    }
    let region = LocalRegion::new(family, k, theta, params)?;
    let exact = |value: f64| Ok(FactorValue { value, stderr: 0.0, exact: true, empty: false });
    let r = region.radius;
    if region.d == 1 {
        let (lo, hi) = k.bounding_box();
        let mm = region.m[(0, 0)];
        let a = (mm * (lo[0] - theta[0])).max(-r);
        let b = (mm * (hi[0] - theta[0])).min(r);
        return exact(normal_interval_mass(a, b));
    }
    let ball_inside = region.normals.iter().zip(&region.bounds).all(|(g, c)| *c >= r * g.norm());
    if ball_inside {
        return exact(gaussian_ball_mass(region.d, r));
    }
    if let ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } = k {
        let diag = (0..region.d).all(|i| (0..region.d).all(|j| i == j || region.m[(i, j)] == 0.0));
        let corners_inside = k.vertices().iter().all(|v| {
            let off = DVector::from_iterator(region.d, v.iter().zip(theta).map(|(a, b)| a - b));
            (&region.m * off).norm() <= r
        });
        if diag && corners_inside {
            let mass = (0..region.d)
                .map(|i| {
                    let mi = region.m[(i, i)];
                    normal_interval_mass(mi * (lo[i] - theta[i]), mi * (hi[i] - theta[i]))
                })
                .product();
            return exact(mass);
        }
    }
    let pairs = (mc.samples / 2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..pairs {
        let z = DVector::from_iterator(region.d, (0..region.d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let hit = (region.contains(&z) as u8 + region.contains(&-&z) as u8) as f64 / 2.0;
        sum += hit;
        sum_sq += hit * hit;
    }
    let np = pairs as f64;
    let mean = sum / np;
    let var = (sum_sq / np - mean * mean).max(0.0);
    Ok(FactorValue { value: mean, stderr: (var / np).sqrt(), exact: false, empty: false })
}

/// Points of `(a, b)` where the standardized interval hits the ball radius.
fn factor_kinks(family: &FamilySpec, a: f64, b: f64, params: &IdealParams) -> Result<Vec<f64>> {
    let r = params.radius();
    let scale = (params.n as f64).sqrt() / params.alpha_scale;
    let reach = |t: f64| -> Result<(f64, f64)> {
        let s = scale * sqrt_det_fisher(family, &[t])?;
        Ok((s * (b - t) - r, s * (t - a) - r))
    };
    const SCAN: usize = 2048;
    let pts: Vec<f64> = (0..=SCAN).map(|i| a + (b - a) * (i as f64 + 0.5) / (SCAN as f64 + 1.0)).collect();
    let vals: Vec<(f64, f64)> = pts.iter().map(|t| reach(*t)).collect::<Result<_>>()?;
    let mut kinks = Vec::new();
    for side in 0..2 {
        let pick = |v: (f64, f64)| if side == 0 { v.0 } else { v.1 };
        for i in 0..SCAN {
            let (fa, fb) = (pick(vals[i]), pick(vals[i + 1]));
            if fa == 0.0 {
                kinks.push(pts[i]);
            } else if fa * fb < 0.0 {
                let (mut lo, mut hi, mut flo) = (pts[i], pts[i + 1], fa);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = pick(reach(mid)?);
                    if fm * flo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                    if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                kinks.push(0.5 * (lo + hi));
            }
        }
    }
    Ok(kinks)
}

/// Nodes for integrating over `K` against the ideal prior; one-dimensional domains are
/// split where the Gaussian-mass factor has kinks.
fn ideal_grid(family: &FamilySpec, k: &ParamDomain, params: &IdealParams, spec: &GridSpec) -> Result<QuadratureGrid> {
    if k.dim() == 1 {
        let (lo, hi) = k.bounding_box();
        let kinks = factor_kinks(family, lo[0], hi[0], params)?;
        Ok(QuadratureGrid::panels(lo[0], hi[0], &kinks, spec))
    } else {
        QuadratureGrid::new(k, spec)
    }
}

/// `C^{(α)} = ∫_K |J(θ)|^{1/2} / Φ(U(θ)) dθ`.
pub fn ideal_prior_normalizer(
    family: &FamilySpec,
    k: &ParamDomain,
    params: &IdealParams,
    spec: &GridSpec,
    mc: &McSpec,
) -> Result<f64> {
    let grid = ideal_grid(family, k, params, spec)?;
    let mut total = 0.0;
    for (node, w) in grid.nodes.iter().zip(&grid.weights) {
        let f = ideal_prior_factor(family, k, node, params, mc)?;
        if !(f.value > 0.0) {
            return Err(Error::Numerical {
                context: "ideal prior normalizer".into(),
                detail: format!("Gaussian-mass factor is zero at node {node:?}"),
            });
        }
        total += w * sqrt_det_fisher(family, node)? / f.value;
    }
    Ok(total)
}

/// A prior ready for use: log normalizer plus a normalized discrete mixture on grid nodes.
#[derive(Clone, Debug)]
pub struct Prior {
    pub spec: PriorSpec,
    /// Log of the density's normalizing constant.
    pub log_normalizer: f64,
    pub nodes: Vec<Vec<f64>>,
    /// Log mixture weights of the nodes; they sum to one.
    pub log_weights: Vec<f64>,
    /// Largest Monte Carlo standard error among the Gaussian-mass factors.
    pub factor_stderr: f64,
}

impl Prior {
    pub fn build(spec: &PriorSpec, family: &FamilySpec) -> Result<Self> {
        family.validate()?;
        spec.domain.validate()?;
        if spec.domain.dim() != family.dim() {
            return Err(Error::Config(format!(
                "prior domain has dimension {} but the family has {}",
                spec.domain.dim(),
                family.dim()
            )));
        }
        let mut grid_spec = spec.grid.clone().unwrap_or_else(|| GridSpec::default_for(&spec.domain));
        let mut factor_stderr = 0.0;
        let (grid, unnorm): (QuadratureGrid, Vec<f64>) = match &spec.kind {
            PriorKind::Jeffreys {} => {
                let grid = QuadratureGrid::new(&spec.domain, &grid_spec)?;
                let v = grid
                    .nodes
                    .iter()
                    .map(|t| Ok(0.5 * log_det_spd(&family.fisher(t)?, "Fisher information")?))
                    .collect::<Result<_>>()?;
                (grid, v)
            }
            PriorKind::Dirichlet { alpha } => {
                check_dirichlet(*alpha, &spec.domain)?;
                if let (None, ParamDomain::Simplex { dim, tau }) = (&spec.grid, &spec.domain) {
                    if *tau == 0.0 {
                        let grid = dirichlet_grid(*alpha, *dim, grid_spec.nodes_per_axis);
                        let v = vec![0.0; grid.len()];
                        return Prior::from_grid(spec, grid, v, 0.0);
                    }
                }
                if spec.grid.is_none() {
                    grid_spec.cluster = grid_spec.cluster.max((1.0 / alpha).ceil() as u32);
                }
                let grid = QuadratureGrid::new(&spec.domain, &grid_spec)?;
                let v = grid.nodes.iter().map(|t| dirichlet_kernel(*alpha, t)).collect();
                (grid, v)
            }
            PriorKind::Uniform {} => {
                let grid = QuadratureGrid::new(&spec.domain, &grid_spec)?;
                let v = vec![0.0; grid.len()];
                (grid, v)
            }
            PriorKind::Ideal { n, eps, alpha_scale, mc } => {
                let params = IdealParams::new(*n, *eps, *alpha_scale)?;
                let grid = ideal_grid(family, &spec.domain, &params, &grid_spec)?;
                let mut v = Vec::with_capacity(grid.len());
                for t in &grid.nodes {
                    let f = ideal_prior_factor(family, &spec.domain, t, &params, mc)?;
                    if !(f.value > 0.0) {
                        return Err(Error::Numerical {
                            context: "ideal prior".into(),
                            detail: format!("Gaussian-mass factor is zero at node {t:?}"),
                        });
                    }
                    factor_stderr = f64::max(factor_stderr, f.stderr);
                    v.push(0.5 * log_det_spd(&family.fisher(t)?, "Fisher information")? - f.value.ln());
                }
                (grid, v)
            }
        };
        Prior::from_grid(spec, grid, unnorm, factor_stderr)
    }

    fn from_grid(spec: &PriorSpec, grid: QuadratureGrid, unnorm: Vec<f64>, factor_stderr: f64) -> Result<Self> {
        let mut log_weights: Vec<f64> = unnorm.iter().zip(&grid.weights).map(|(u, w)| u + w.ln()).collect();
        let total = log_sum_exp(&log_weights);
        if !total.is_finite() {
            return Err(Error::Numerical { context: "prior".into(), detail: "grid mass is not finite".into() });
        }
        log_weights.iter_mut().for_each(|v| *v -= total);
        let log_normalizer = match &spec.kind {
            PriorKind::Dirichlet { alpha } => match spec.domain {
                ParamDomain::Simplex { dim, tau } if tau == 0.0 => dirichlet_log_beta(*alpha, dim),
                _ => total,
            },
            PriorKind::Uniform {} => spec.domain.volume().ln(),
            _ => total,
        };
        Ok(Prior { spec: spec.clone(), log_normalizer, nodes: grid.nodes, log_weights, factor_stderr })
    }

    /// Log density at `θ`, `-∞` outside the domain.
    pub fn log_density(&self, family: &FamilySpec, theta: &[f64]) -> Result<f64> {
        if !self.spec.domain.contains(theta, 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let kernel = match &self.spec.kind {
            PriorKind::Jeffreys {} => 0.5 * log_det_spd(&family.fisher(theta)?, "Fisher information")?,
            PriorKind::Dirichlet { alpha } => dirichlet_kernel(*alpha, theta),
            PriorKind::Uniform {} => 0.0,
            PriorKind::Ideal { n, eps, alpha_scale, mc } => {
                let params = IdealParams::new(*n, *eps, *alpha_scale)?;
                let f = ideal_prior_factor(family, &self.spec.domain, theta, &params, mc)?;
                0.5 * log_det_spd(&family.fisher(theta)?, "Fisher information")? - f.value.ln()
            }
        };
        Ok(kernel - self.log_normalizer)
    }
}

/// Same as [`Prior::log_density`] for a one-off evaluation.
pub fn prior_log_density(prior: &Prior, family: &FamilySpec, theta: &[f64]) -> Result<f64> {
    prior.log_density(family, theta)
}

fn check_dirichlet(alpha: f64, domain: &ParamDomain) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("Dirichlet parameter must be positive, got {alpha}")));
    }
    if !domain.is_simplex() {
        return Err(Error::Config("Dirichlet priors live on a simplex domain".into()));
    }
    Ok(())
}

/// Dirichlet(α) over the full `d`-simplex as a probability rule: stick-breaking
/// `θ_i = v_i ∏_{j<i} (1 - v_j)` with independent `v_i ~ Beta(α, (d - i + 1)α)`, each
/// integrated by Gauss–Jacobi. The density never has to be evaluated near a vertex.
pub fn dirichlet_grid(alpha: f64, d: usize, per_axis: usize) -> QuadratureGrid {
    let rules: Vec<(Vec<f64>, Vec<f64>)> =
        (0..d).map(|i| gauss_jacobi_beta(per_axis, alpha, (d - i) as f64 * alpha)).collect();
    let total = per_axis.pow(d as u32);
    let mut grid = QuadratureGrid { nodes: Vec::with_capacity(total), weights: Vec::with_capacity(total) };
    for mut idx in 0..total {
        let mut rest = 1.0;
        let mut w = 1.0;
        let mut theta = Vec::with_capacity(d);
        for (v, wv) in &rules {
            let k = idx % per_axis;
            idx /= per_axis;
            theta.push(rest * v[k]);
            rest *= 1.0 - v[k];
            w *= wv[k];
        }
        grid.nodes.push(theta);
        grid.weights.push(w);
    }
    grid
}

/// `Σ_{i=0..d} (α - 1) log θ_i` with `θ_0 = 1 - Σ θ_i`.
pub fn dirichlet_kernel(alpha: f64, theta: &[f64]) -> f64 {
    let t0 = 1.0 - theta.iter().sum::<f64>();
    (alpha - 1.0) * (t0.ln() + theta.iter().map(|t| t.ln()).sum::<f64>())
}

/// `log ∫ ∏ θ_i^{α-1}` over the full `d`-simplex: `(d+1) log Γ(α) - log Γ((d+1)α)`.
pub fn dirichlet_log_beta(alpha: f64, d: usize) -> f64 {
    let k = d as f64 + 1.0;
    k * ln_gamma(alpha) - ln_gamma(k * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_families::{bernoulli_mean, bernoulli_natural, multinomial_mean};
    use core::f64::consts::PI;

    #[test]
    fn dirichlet_rule_reproduces_dirichlet_multinomial() {
        let fam = multinomial_mean(3);
        for alpha in [0.25, 0.5, 1.5] {
            let prior = Prior::build(&PriorSpec::dirichlet(alpha, ParamDomain::simplex(2, 0.0)), &fam).unwrap();
            for counts in [[0u64, 0, 9], [3, 1, 5], [4, 4, 4], [0, 12, 0]] {
                let mut acc = crate::numeric::LogSum::default();
                for (t, lw) in prior.nodes.iter().zip(&prior.log_weights) {
                    acc.add(lw + fam.log_likelihood_counts(t, &counts).unwrap());
                }
                let exact = crate::mixtures::dirichlet_multinomial_log(&counts, alpha);
                assert!((acc.value() - exact).abs() < 1e-10, "alpha={alpha} {counts:?}");
            }
        }
    }

    #[test]
    fn jeffreys_closed_forms() {
        let spec = GridSpec::default_for(&ParamDomain::interval(0.0, 1.0));
        let c = jeffreys_integral_on(&bernoulli_mean(), &ParamDomain::simplex(1, 0.0), &spec).unwrap();
        assert!((c - PI).abs() < 1e-9, "{c}");
        let tri = ParamDomain::simplex(2, 0.0);
        let c = jeffreys_integral_on(&multinomial_mean(3), &tri, &GridSpec::default_for(&tri)).unwrap();
        assert!((c - 2.0 * PI).abs() < 1e-8, "{c}");
    }

    #[test]
    fn densities_at_half() {
        let fam = bernoulli_mean();
        let dom = ParamDomain::simplex(1, 0.0);
        let j = Prior::build(&PriorSpec::jeffreys(dom.clone()), &fam).unwrap();
        let want = (2.0 / PI).ln();
        assert!((j.log_density(&fam, &[0.5]).unwrap() - want).abs() < 1e-9);
        let dir = Prior::build(&PriorSpec::dirichlet(0.5, dom.clone()), &fam).unwrap();
        assert!((dir.log_density(&fam, &[0.5]).unwrap() - want).abs() < 1e-12);
        assert_eq!(j.log_density(&fam, &[1.5]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn factor_one_dimensional_example() {
        // K = [0, 1], θ = 1, n = 100, ε = 0.3; α is chosen so the scaled root √n √J / α is 10
        let fam = bernoulli_natural(-1.0, 1.0);
        let k = ParamDomain::interval(0.0, 1.0);
        let j1 = fam.fisher(&[1.0]).unwrap()[(0, 0)];
        let params = IdealParams { n: 100, eps: 0.3, alpha_scale: j1.sqrt() };
        let f = ideal_prior_factor(&fam, &k, &[1.0], &params, &McSpec::default()).unwrap();
        assert!((f.value - (normal_cdf(0.0) - normal_cdf(-3.0))).abs() < 1e-12, "{f:?}");
        assert!((f.value - 0.49865).abs() < 1e-5);
        assert!(ideal_prior_factor(&fam, &k, &[1.5], &params, &McSpec::default()).unwrap().empty);
    }

    #[test]
    fn ball_bound_examples() {
        let b = gaussian_ball_mass_bound(8.0, 1.0, 1);
        assert!((b.simplified.unwrap() - (1.0 - (-1.5f64).exp())).abs() < 1e-15);
        assert!((gaussian_ball_mass(1, 8f64.sqrt()) - 0.99532).abs() < 1e-5);
        let b = gaussian_ball_mass_bound(4.0, 1.0, 2);
        assert_eq!(b.simplified, Some(0.0));
    }
}
