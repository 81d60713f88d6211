use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use num_traits::Float;

use crate::error::{Error, Result};

/// A restricted parameter set: an axis-aligned box or a simplex with a lower margin.
///
/// Simplex coordinates are `theta_1..theta_dim`; the implicit `theta_0 = 1 - sum`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDomain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// The natural parameter space cut down to a box for numerical work.
    Clipped { lo: Vec<f64>, hi: Vec<f64> },
    Simplex {
        dim: usize,
        #[serde(default)]
        tau: f64,
    },
}

/// One linear constraint `a · theta <= b`.
#[derive(Clone, Debug)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub bound: f64,
}

impl ParamDomain {
    pub fn interval(a: f64, b: f64) -> Self {
        ParamDomain::Box { lo: vec![a], hi: vec![b] }
    }

    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        ParamDomain::Box { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    pub fn simplex(dim: usize, tau: f64) -> Self {
        ParamDomain::Simplex { dim, tau }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamDomain::Box { lo, .. } | ParamDomain::Clipped { lo, .. } => lo.len(),
            ParamDomain::Simplex { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::Config(format!("box bounds have lengths {} and {}", lo.len(), hi.len())));
                }
                for (a, b) in lo.iter().zip(hi) {
                    if !(a.is_finite() && b.is_finite() && a < b) {
                        return Err(Error::Config(format!("box axis [{a}, {b}] has empty interior")));
                    }
                }
                Ok(())
            }
            ParamDomain::Simplex { dim, tau } => {
                if *dim == 0 {
                    return Err(Error::Config("simplex dimension must be positive".into()));
                }
                if !(*tau >= 0.0 && (*dim as f64 + 1.0) * tau < 1.0) {
                    return Err(Error::Config(format!("simplex margin {tau} leaves no interior")));
                }
                Ok(())
            }
        }
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self, ParamDomain::Simplex { .. })
    }

    /// All constraints as half-spaces `a · theta <= b`.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        let d = self.dim();
        let mut out = Vec::new();
        match self {
            ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } => {
                for i in 0..d {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    out.push(Halfspace { normal: e.clone(), bound: hi[i] });
                    e[i] = -1.0;
                    out.push(Halfspace { normal: e, bound: -lo[i] });
                }
            }
            ParamDomain::Simplex { tau, .. } => {
                for i in 0..d {
                    let mut e = vec![0.0; d];
                    e[i] = -1.0;
                    out.push(Halfspace { normal: e, bound: -tau });
                }
                out.push(Halfspace { normal: vec![1.0; d], bound: 1.0 - tau });
            }
        }
        out
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        theta.len() == self.dim()
            && self.halfspaces().iter().all(|h| dot(&h.normal, theta) <= h.bound + tol)
    }

    /// Strict interior membership with a margin `tol`.
    pub fn interior_contains(&self, theta: &[f64], tol: f64) -> bool {
        theta.len() == self.dim()
            && self.halfspaces().iter().all(|h| dot(&h.normal, theta) < h.bound - tol)
    }

    /// Exact Euclidean projection.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } => {
                theta.iter().zip(lo.iter().zip(hi)).map(|(t, (a, b))| t.max(*a).min(*b)).collect()
            }
            ParamDomain::Simplex { tau, .. } => project_corner_simplex(theta, *tau, 1.0 - tau),
        }
    }

    /// Per-axis bounding interval (used for start grids and scales).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } => (lo.clone(), hi.clone()),
            ParamDomain::Simplex { dim, tau } => {
                let hi = 1.0 - *dim as f64 * tau;
                (vec![*tau; *dim], vec![hi; *dim])
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| b - a).product()
            }
            ParamDomain::Simplex { dim, tau } => {
                let side = 1.0 - (*dim as f64 + 1.0) * tau;
                let fact: f64 = (1..=*dim).map(|k| k as f64).product();
                side.powi(*dim as i32) / fact
            }
        }
    }

    /// Vertices: box corners or simplex corners.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            ParamDomain::Box { lo, hi } | ParamDomain::Clipped { lo, hi } => {
                let d = lo.len();
                (0..(1usize << d))
                    .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
                    .collect()
            }
            ParamDomain::Simplex { dim, tau } => {
                let d = *dim;
                let top = 1.0 - d as f64 * tau;
                let mut out = vec![vec![*tau; d]];
                for i in 0..d {
                    let mut v = vec![*tau; d];
                    v[i] = top;
                    out.push(v);
                }
                out
            }
        }
    }

    /// A deterministic set of interior start points, `per_axis` along each box axis.
    pub fn start_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let (lo, hi) = self.bounding_box();
        let mut pts = Vec::new();
        let total = per_axis.pow(d as u32);
        for mut idx in 0..total {
            let mut p = Vec::with_capacity(d);
            for i in 0..d {
                let k = idx % per_axis;
                idx /= per_axis;
                p.push(lo[i] + (hi[i] - lo[i]) * (k as f64 + 0.5) / per_axis as f64);
            }
            if self.interior_contains(&p, 0.0) {
                pts.push(p);
            }
        }
        pts
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection onto `{x : x_i >= lo, sum x <= top}`.
fn project_corner_simplex(theta: &[f64], lo: f64, top: f64) -> Vec<f64> {
    let clamped: Vec<f64> = theta.iter().map(|t| t.max(lo)).collect();
    if clamped.iter().sum::<f64>() <= top {
        return clamped;
    }
    // project onto {x_i >= lo, sum x = top} by sorting
    let d = theta.len();
    let shifted: Vec<f64> = theta.iter().map(|t| t - lo).collect();
    let budget = top - lo * d as f64;
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - budget) / (k + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    shifted.iter().map(|v| (v - shift).max(0.0) + lo).collect()
}
