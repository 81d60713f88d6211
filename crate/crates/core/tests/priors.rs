use std::f64::consts::PI;

use minimax_core::model_families::{self as fam, FamilySpec, ParamDomain};
use minimax_core::priors::{
    gaussian_ball_mass, ideal_prior_factor, GridScheme, GridSpec, IdealParams, McSpec, Prior, PriorSpec,
    QuadratureGrid,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

/// `∫ density` on `grid`, with the prior built on its own default grid.
fn mass(prior: &Prior, family: &FamilySpec, grid: &QuadratureGrid) -> f64 {
    grid.nodes.iter().zip(&grid.weights).map(|(t, w)| w * prior.log_density(family, t).unwrap().exp()).sum()
}

#[test]
fn priors_integrate_to_one_under_refinement() {
    let cases: Vec<(&str, FamilySpec, PriorSpec)> = vec![
        ("kt", fam::bernoulli_mean(), PriorSpec::jeffreys(ParamDomain::simplex(1, 0.0))),
        ("trinomial", fam::multinomial_mean(3), PriorSpec::jeffreys(ParamDomain::simplex(2, 0.0))),
        ("natural", fam::bernoulli_natural(-3.0, 3.0), PriorSpec::jeffreys(ParamDomain::interval(-3.0, 2.0))),
        ("poisson", fam::truncated_poisson(4, -2.0, 1.5), PriorSpec::jeffreys(ParamDomain::interval(-2.0, 1.5))),
        ("curved", fam::curved_bernoulli_pair(0.45), PriorSpec::jeffreys(ParamDomain::interval(0.2, 2.0))),
        ("dirichlet", fam::multinomial_mean(3), PriorSpec::dirichlet(0.7, ParamDomain::simplex(2, 0.05))),
        ("uniform", fam::multinomial_mean(3), PriorSpec::uniform(ParamDomain::simplex(2, 0.1))),
    ];
    for (name, family, spec) in cases {
        let prior = Prior::build(&spec, &family).unwrap();
        let g = GridSpec::default_for(&spec.domain);
        for grid in [g.clone(), g.doubled()] {
            let m = mass(&prior, &family, &QuadratureGrid::new(&spec.domain, &grid).unwrap());
            assert!((m - 1.0).abs() <= 1e-6, "{name}: mass {m} on {} nodes per axis", grid.nodes_per_axis);
        }
    }
}

#[test]
fn ideal_prior_integrates_to_one() {
    let family = fam::bernoulli_natural(-2.0, 2.0);
    let k = ParamDomain::interval(-2.0, 2.0);
    for n in [50u64, 400] {
        let prior = Prior::build(&PriorSpec::ideal(n, k.clone()), &family).unwrap();
        // the factor has kinks where the ball meets the boundary; a fine midpoint rule is second order there
        for per_axis in [20_000, 40_000] {
            let grid = QuadratureGrid::new(&k, &GridSpec { scheme: GridScheme::Trapezoid, nodes_per_axis: per_axis, cluster: 1 }).unwrap();
            let m = mass(&prior, &family, &grid);
            assert!((m - 1.0).abs() <= 1e-6, "n {n}: mass {m}");
        }
    }
}

#[test]
fn small_dirichlet_dominates_jeffreys_at_faces() {
    for (family, d) in [(fam::bernoulli_mean(), 1usize), (fam::multinomial_mean(3), 2)] {
        let k = ParamDomain::simplex(d, 0.0);
        let jeff = Prior::build(&PriorSpec::jeffreys(k.clone()), &family).unwrap();
        for alpha in [0.1, 0.25, 0.4] {
            let dir = Prior::build(&PriorSpec::dirichlet(alpha, k.clone()), &family).unwrap();
            let (mut first, mut last) = (None, f64::NEG_INFINITY);
            for t in [1e-2, 1e-3, 1e-4] {
                let mut theta = vec![1.0 / (d + 1) as f64; d];
                theta[0] = t;
                let rest = (1.0 - t) / d as f64;
                theta.iter_mut().skip(1).for_each(|v| *v = rest);
                let log_ratio = dir.log_density(&family, &theta).unwrap() - jeff.log_density(&family, &theta).unwrap();
                assert!(log_ratio > last, "alpha {alpha} d {d}: ratio fell at θ_1 = {t}");
                last = log_ratio;
                first.get_or_insert(log_ratio);
            }
            // the ratio grows like θ_1^{α - 1/2}
            let growth = last - first.unwrap();
            assert!((growth - (0.5 - alpha) * 100f64.ln()).abs() < 0.05, "alpha {alpha} d {d}: growth {growth}");
        }
    }
}

/// Lower bound on the factor: `vol(MK) / (2 diam(MK)^d V_d) · Φ(ball)`, `M = J(θ)^{1/2}`;
/// the ratio is invariant to the scale of `M`.
fn volume_bound(family: &FamilySpec, k: &ParamDomain, theta: &[f64], radius: f64) -> f64 {
    let d = theta.len();
    let eig = SymmetricEigen::new(family.fisher(theta).unwrap());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    let verts: Vec<DVector<f64>> = k.vertices().iter().map(|v| &root * DVector::from_column_slice(v)).collect();
    let mut diam = 0.0f64;
    for a in &verts {
        for b in &verts {
            diam = diam.max((a - b).norm());
        }
    }
    let vol = root.determinant() * k.volume();
    let unit_ball = PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0 + 1.0);
    vol / (2.0 * diam.powi(d as i32) * unit_ball) * gaussian_ball_mass(d, radius)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factor_shrinks_as_alpha_grows(
        u in 0.0f64..1.0,
        a1 in 1.0f64..6.0,
        step in 0.0f64..4.0,
        n in 10u64..5000,
    ) {
        let family = fam::bernoulli_natural(-2.0, 2.0);
        let k = ParamDomain::interval(-2.0, 2.0);
        let theta = [-2.0 + 4.0 * u];
        let mc = McSpec::default();
        let f1 = ideal_prior_factor(&family, &k, &theta, &IdealParams::new(n, None, Some(a1)).unwrap(), &mc).unwrap();
        let f2 = ideal_prior_factor(&family, &k, &theta, &IdealParams::new(n, None, Some(a1 + step)).unwrap(), &mc).unwrap();
        prop_assert!(f2.value <= f1.value + 1e-15);
        prop_assert!(f1.value > 0.0 && f1.value <= 1.0);
    }

    #[test]
    fn simplex_factor_shrinks_as_alpha_grows(
        w in prop::collection::vec(0.001f64..1.0, 3),
        a1 in 1.0f64..4.0,
        step in 0.0f64..3.0,
    ) {
        let family = fam::multinomial_mean(3);
        let k = ParamDomain::simplex(2, 0.0);
        let s: f64 = w.iter().sum();
        let theta = [w[1] / s, w[2] / s];
        // equal seeds nest the hit sets, but a closed form on one side and sampling on the other do not
        let mc = McSpec { samples: 20_000, seed: 5 };
        let f1 = ideal_prior_factor(&family, &k, &theta, &IdealParams::new(200, None, Some(a1)).unwrap(), &mc).unwrap();
        let f2 = ideal_prior_factor(&family, &k, &theta, &IdealParams::new(200, None, Some(a1 + step)).unwrap(), &mc).unwrap();
        let noise = 4.0 * (f1.stderr + f2.stderr);
        prop_assert!(f2.value <= f1.value + noise + 1e-15, "{} > {}", f2.value, f1.value);
    }

    #[test]
    fn factor_exceeds_the_volume_bound(
        w in prop::collection::vec(0.001f64..1.0, 3),
        n in 20u64..2000,
    ) {
        let family = fam::multinomial_mean(3);
        let k = ParamDomain::simplex(2, 0.0);
        let s: f64 = w.iter().sum();
        let theta = [w[1] / s, w[2] / s];
        let params = IdealParams::new(n, None, None).unwrap();
        let f = ideal_prior_factor(&family, &k, &theta, &params, &McSpec { samples: 20_000, seed: 1 }).unwrap();
        let bound = volume_bound(&family, &k, &theta, params.radius());
        prop_assert!(f.value + 3.0 * f.stderr >= bound, "factor {} ± {} below {bound}", f.value, f.stderr);
    }

    #[test]
    fn interval_factor_exceeds_the_volume_bound(u in 0.0f64..1.0, n in 5u64..100_000) {
        let family = fam::truncated_poisson(4, -2.0, 1.5);
        let k = ParamDomain::interval(-2.0, 1.5);
        let theta = [-2.0 + 3.5 * u];
        let params = IdealParams::new(n, None, None).unwrap();
        let f = ideal_prior_factor(&family, &k, &theta, &params, &McSpec::default()).unwrap();
        // one dimension: the ratio reduces to 1/4
        prop_assert!(f.value >= 0.25 * gaussian_ball_mass(1, params.radius()) - 1e-15);
        let bound = volume_bound(&family, &k, &theta, params.radius());
        prop_assert!((bound - 0.25 * gaussian_ball_mass(1, params.radius())).abs() < 1e-12);
    }
}

#[test]
fn prior_specs_reject_unknown_keys() {
    use minimax_core::priors::PriorKind;
    assert!(serde_json::from_str::<PriorKind>(r#"{"type": "jeffreys"}"#).is_ok());
    assert!(serde_json::from_str::<PriorKind>(r#"{"type": "jeffreys", "alpha": 0.5}"#).is_err());
    assert!(serde_json::from_str::<PriorKind>(r#"{"type": "uniform", "n": 3}"#).is_err());
}
