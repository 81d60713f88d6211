use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model_families::ParamDomain;
use crate::numeric::gauss_legendre;

/// One-dimensional rule applied along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    GaussLegendre,
    /// Composite midpoint rule; nodes sit half a step inside each face.
    Trapezoid,
    /// Gauss–Legendre through a stick-breaking map of the cube onto a simplex.
    SimplexProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub scheme: GridScheme,
    pub nodes_per_axis: usize,
    /// Endpoint clustering exponent `p` of `u = s^p / (s^p + (1-s)^p)`; 1 disables it.
    #[serde(default = "default_cluster")]
    pub cluster: u32,
}

fn default_cluster() -> u32 {
    2
}

impl GridSpec {
    pub fn new(scheme: GridScheme, nodes_per_axis: usize) -> Self {
        GridSpec { scheme, nodes_per_axis, cluster: 2 }
    }

    /// 512 nodes for d = 1, 128 per axis for a 2-d box, 96 per axis on a simplex.
    pub fn default_for(domain: &ParamDomain) -> Self {
        match (domain, domain.dim()) {
            (_, 1) => GridSpec::new(GridScheme::GaussLegendre, 512),
            (ParamDomain::Simplex { .. }, 2) => GridSpec::new(GridScheme::SimplexProduct, 96),
            (ParamDomain::Simplex { .. }, _) => GridSpec::new(GridScheme::SimplexProduct, 32),
            (_, 2) => GridSpec::new(GridScheme::GaussLegendre, 128),
            _ => GridSpec::new(GridScheme::GaussLegendre, 32),
        }
    }

    /// Same rule with twice the nodes per axis.
    pub fn doubled(&self) -> Self {
        GridSpec { nodes_per_axis: 2 * self.nodes_per_axis, ..self.clone() }
    }
}

/// Nodes and positive weights with `Σ w f(node) ≈ ∫ f` over a domain.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Rule on `(0, 1)` after endpoint clustering: `(u, du/ds * w)`.
fn unit_rule(scheme: GridScheme, m: usize, p: u32) -> Vec<(f64, f64)> {
    let base: Vec<(f64, f64)> = match scheme {
        GridScheme::Trapezoid => (0..m).map(|i| ((i as f64 + 0.5) / m as f64, 1.0 / m as f64)).collect(),
        _ => {
            let (x, w) = gauss_legendre(m);
            x.iter().zip(&w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
        }
    };
    if p <= 1 {
        return base;
    }
    let pf = p as f64;
    base.into_iter()
        .map(|(s, w)| {
            let (a, b) = (s.powi(p as i32), (1.0 - s).powi(p as i32));
            let den = a + b;
            let jac = pf * (s * (1.0 - s)).powi(p as i32 - 1) / (den * den);
            (a / den, w * jac)
        })
        .collect()
}

impl QuadratureGrid {
    pub fn new(domain: &ParamDomain, spec: &GridSpec) -> Result<Self> {
        domain.validate()?;
        if spec.nodes_per_axis == 0 {
            return Err(Error::Config("quadrature needs at least one node per axis".into()));
        }
        match domain {
            ParamDomain::Simplex { dim, tau } => Ok(Self::simplex(*dim, *tau, spec)),
            _ => {
                if spec.scheme == GridScheme::SimplexProduct {
                    return Err(Error::Config("simplex_product grids need a simplex domain".into()));
                }
                let (lo, hi) = domain.bounding_box();
                let axes: Vec<Vec<(f64, f64)>> = lo
                    .iter()
                    .zip(&hi)
                    .map(|(a, b)| {
                        unit_rule(spec.scheme, spec.nodes_per_axis, spec.cluster)
                            .into_iter()
                            .map(|(u, w)| (a + (b - a) * u, (b - a) * w))
                            .collect()
                    })
                    .collect();
                Ok(Self::product(&axes))
            }
        }
    }

    /// Gauss–Legendre panels on `[a, b]` split at `breaks`.
    pub fn panels(a: f64, b: f64, breaks: &[f64], spec: &GridSpec) -> Self {
        let mut cuts = vec![a];
        cuts.extend(breaks.iter().copied().filter(|t| *t > a && *t < b));
        cuts.push(b);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        cuts.dedup();
        let rule = unit_rule(spec.scheme, spec.nodes_per_axis, spec.cluster);
        let mut grid = QuadratureGrid { nodes: Vec::new(), weights: Vec::new() };
        for win in cuts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            for (u, w) in &rule {
                grid.nodes.push(vec![lo + (hi - lo) * u]);
                grid.weights.push((hi - lo) * w);
            }
        }
        grid
    }

    fn product(axes: &[Vec<(f64, f64)>]) -> Self {
        let mut nodes = vec![Vec::new()];
        let mut weights = vec![1.0];
        for axis in axes {
            let mut nn = Vec::with_capacity(nodes.len() * axis.len());
            let mut nw = Vec::with_capacity(nodes.len() * axis.len());
            for (node, w) in nodes.iter().zip(&weights) {
                for (x, wx) in axis {
                    let mut p = node.clone();
                    p.push(*x);
                    nn.push(p);
                    nw.push(w * wx);
                }
            }
            nodes = nn;
            weights = nw;
        }
        QuadratureGrid { nodes, weights }
    }

    /// Stick-breaking: `y_1 = v_1`, `y_i = v_i ∏_{j<i} (1 - v_j)`, then the affine map
    /// onto `{θ_i ≥ τ, θ_0 ≥ τ}`.
    fn simplex(dim: usize, tau: f64, spec: &GridSpec) -> Self {
        let rule = unit_rule(spec.scheme, spec.nodes_per_axis, spec.cluster);
        let cube = Self::product(&vec![rule; dim]);
        let side = 1.0 - (dim as f64 + 1.0) * tau;
        let scale = side.powi(dim as i32);
        let mut nodes = Vec::with_capacity(cube.nodes.len());
        let mut weights = Vec::with_capacity(cube.nodes.len());
        for (v, w) in cube.nodes.iter().zip(&cube.weights) {
            let mut rest = 1.0;
            let mut jac = 1.0;
            let mut theta = Vec::with_capacity(dim);
            for vi in v {
                theta.push(tau + side * rest * vi);
                jac *= rest;
                rest *= 1.0 - vi;
            }
            nodes.push(theta);
            weights.push(w * jac * scale);
        }
        QuadratureGrid { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}
