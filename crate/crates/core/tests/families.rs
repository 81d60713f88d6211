use minimax_core::model_families::{self as fam, mle_counts, FamilySpec, HiddenVarPayload, LatentModel, ParamDomain};
use minimax_core::regret_lab::enumerate_classes;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Random symbol string over `0..m` from a seed list.
fn symbols(raw: &[u32], m: usize) -> Vec<f64> {
    raw.iter().map(|r| (*r as usize % m) as f64).collect()
}

/// Rows of a random `m × k` stochastic matrix, entries bounded away from zero.
fn emission(raw: &[f64], m: usize, k: usize) -> Vec<f64> {
    let mut e = raw[..m * k].to_vec();
    for row in e.chunks_mut(k) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    e
}

/// A point of the open `d`-simplex with every coordinate, `θ_0` included, at least `tau`.
fn simplex_point(raw: &[f64], d: usize, tau: f64) -> Vec<f64> {
    let s: f64 = raw[..=d].iter().sum();
    let free = 1.0 - (d + 1) as f64 * tau;
    raw[1..=d].iter().map(|r| tau + free * r / s).collect()
}

fn natural_latent() -> FamilySpec {
    FamilySpec::HiddenVariable(HiddenVarPayload {
        d: 1,
        latent_size: 3,
        alphabet_size: 4,
        emission: vec![0.5, 0.2, 0.2, 0.1, 0.1, 0.6, 0.2, 0.1, 0.1, 0.1, 0.3, 0.5],
        latent: LatentModel::Natural { stats: vec![vec![0.0], vec![1.0], vec![2.0]] },
        search_domain: None,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_empirical_fisher_is_fisher(theta in -2.5f64..2.5, raw in prop::collection::vec(any::<u32>(), 1..40)) {
        for family in [fam::bernoulli_natural(-3.0, 3.0), fam::truncated_poisson(6, -3.0, 3.0)] {
            let xs = symbols(&raw, family.alphabet_size().unwrap());
            let jhat = family.empirical_fisher(&[theta], &xs).unwrap();
            let j = family.fisher(&[theta]).unwrap();
            prop_assert!(max_abs(&(jhat - j)) <= 1e-10);
        }
    }

    #[test]
    fn gaussian_empirical_fisher_is_fisher(
        a in -2.0f64..2.0,
        b in -3.0f64..-0.2,
        xs in prop::collection::vec(-5.0f64..5.0, 1..30),
    ) {
        let family = fam::gaussian(ParamDomain::boxed(&[-3.0, -3.0], &[3.0, -0.1]));
        let jhat = family.empirical_fisher(&[a, b], &xs).unwrap();
        let j = family.fisher(&[a, b]).unwrap();
        prop_assert!(max_abs(&(jhat - j)) <= 1e-10);
    }

    #[test]
    fn score_matches_differences(
        t in 0.3f64..1.9,
        raw in prop::collection::vec(any::<u32>(), 5..20),
        w in prop::collection::vec(0.05f64..1.0, 3),
    ) {
        let h = 1e-5;
        let mixture = fam::mixture_family(3, 4, vec![0.5, 0.2, 0.2, 0.1, 0.1, 0.6, 0.2, 0.1, 0.1, 0.1, 0.3, 0.5]);
        let cases: Vec<(FamilySpec, Vec<f64>)> = vec![
            (fam::curved_bernoulli_pair(0.45), vec![t]),
            (natural_latent(), vec![t - 1.0]),
            (mixture, simplex_point(&w, 2, 0.05)),
        ];
        for (family, theta) in cases {
            let xs = symbols(&raw, family.alphabet_size().unwrap());
            let score = family.score(&theta, &xs).unwrap();
            let mut fd = DVector::zeros(theta.len());
            for j in 0..theta.len() {
                let (mut up, mut dn) = (theta.clone(), theta.clone());
                up[j] += h;
                dn[j] -= h;
                fd[j] = (family.log_likelihood(&up, &xs).unwrap() - family.log_likelihood(&dn, &xs).unwrap()) / (2.0 * h);
            }
            prop_assert!((&score - &fd).amax() <= 1e-6 * score.amax().max(1e-3), "{score} vs {fd}");
        }
    }

    #[test]
    fn contaminated_score_matches_differences(
        theta in prop::collection::vec(-1.5f64..1.5, 2),
        xs in prop::collection::vec(-4.0f64..4.0, 10..30),
    ) {
        let h = 1e-5;
        let family = fam::contaminated(2, 0.1, 9.0);
        let xs = &xs[..xs.len() / 2 * 2];
        let score = family.score(&theta, xs).unwrap();
        for j in 0..2 {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (family.log_likelihood(&up, xs).unwrap() - family.log_likelihood(&dn, xs).unwrap()) / (2.0 * h);
            prop_assert!((score[j] - fd).abs() <= 1e-6 * score.amax().max(1e-3));
        }
    }

    #[test]
    fn latent_fisher_two_ways(theta in -2.0f64..2.0) {
        // expected empirical information, and expected squared score by differences
        let family = natural_latent();
        let FamilySpec::HiddenVariable(h) = &family else { unreachable!() };
        let p = h.symbol_probs(&[theta]);
        let j = family.fisher(&[theta]).unwrap()[(0, 0)];
        let step = 1e-5;
        let (mut expected_jhat, mut expected_sq) = (0.0, 0.0);
        for (x, px) in p.iter().enumerate() {
            let xs = [x as f64];
            expected_jhat += px * family.empirical_fisher(&[theta], &xs).unwrap()[(0, 0)];
            let s = (family.log_likelihood(&[theta + step], &xs).unwrap()
                - family.log_likelihood(&[theta - step], &xs).unwrap())
                / (2.0 * step);
            expected_sq += px * s * s;
        }
        prop_assert!((j - expected_jhat).abs() <= 1e-8, "{j} {expected_jhat}");
        prop_assert!((j - expected_sq).abs() <= 1e-8, "{j} {expected_sq}");
    }

    #[test]
    fn mixture_information_is_psd(
        raw_e in prop::collection::vec(0.01f64..1.0, 12),
        w in prop::collection::vec(0.01f64..1.0, 3),
        counts in prop::collection::vec(0u64..6, 4),
    ) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let family = fam::mixture_family(3, 4, emission(&raw_e, 3, 4));
        let theta = simplex_point(&w, 2, 0.0);
        let jhat = family.empirical_fisher_counts(&theta, &counts).unwrap();
        let eig = jhat.symmetric_eigenvalues();
        prop_assert!(eig.iter().all(|v| *v >= -1e-12), "{eig}");
    }

    #[test]
    fn mixture_information_band(
        raw_e in prop::collection::vec(0.01f64..1.0, 12),
        w1 in prop::collection::vec(0.01f64..1.0, 3),
        w2 in prop::collection::vec(0.01f64..1.0, 3),
        z in prop::collection::vec(-1.0f64..1.0, 2),
        counts in prop::collection::vec(0u64..6, 4),
        tau in 0.02f64..0.3,
    ) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let family = fam::mixture_family(3, 4, emission(&raw_e, 3, 4));
        let (a, b) = (simplex_point(&w1, 2, tau), simplex_point(&w2, 2, tau));
        let z = DVector::from_vec(z);
        prop_assume!(z.norm() > 1e-3);
        let form = |t: &[f64]| {
            let j = family.empirical_fisher_counts(t, &counts).unwrap();
            z.dot(&(&j * &z))
        };
        let (qa, qb) = (form(&a), form(&b));
        prop_assume!(qb > 1e-12);
        let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let width = 2.0 * 2f64.sqrt() * dist / tau;
        let ratio = qa / qb;
        prop_assert!(ratio <= width.exp() * (1.0 + 1e-9) && ratio >= (-width).exp() * (1.0 - 1e-9), "{ratio} {width}");
    }
}

#[test]
fn exponential_mle_closed_forms() {
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let natural = fam::bernoulli_natural(-2.0, 2.0);
    let natural_k = ParamDomain::interval(-2.0, 2.0);
    let poisson = fam::truncated_poisson(3, -2.0, 2.0);
    let poisson_k = ParamDomain::interval(-2.0, 2.0);
    for n in 1..=12u64 {
        for c in enumerate_classes(n, 2).unwrap() {
            let p = c[1] as f64 / n as f64;
            let want = if p == 0.0 { -2.0 } else if p == 1.0 { 2.0 } else { logit(p).clamp(-2.0, 2.0) };
            let got = mle_counts(&natural, &c, &natural_k).unwrap().theta[0];
            assert!((got - want).abs() <= 1e-8, "{c:?}: {got} vs {want}");
        }
        // mean matching: the truncated mean is increasing in θ
        for c in enumerate_classes(n, 4).unwrap() {
            let mean = (c[1] + 2 * c[2] + 3 * c[3]) as f64 / n as f64;
            let model_mean = |t: f64| {
                let w: Vec<f64> = (0..4).map(|x| (x as f64 * t).exp() / [1.0, 1.0, 2.0, 6.0][x]).collect();
                w.iter().enumerate().map(|(x, v)| x as f64 * v).sum::<f64>() / w.iter().sum::<f64>()
            };
            let want = if mean <= model_mean(-2.0) {
                -2.0
            } else if mean >= model_mean(2.0) {
                2.0
            } else {
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if model_mean(mid) < mean { lo = mid } else { hi = mid }
                }
                0.5 * (lo + hi)
            };
            let got = mle_counts(&poisson, &c, &poisson_k).unwrap().theta[0];
            assert!((got - want).abs() <= 1e-7, "{c:?}: {got} vs {want}");
        }
    }
}

#[test]
fn simplex_mle_is_the_frequency_vector() {
    let tri = fam::multinomial_mean(3);
    let k = ParamDomain::simplex(2, 0.0);
    for n in 1..=12u64 {
        for c in enumerate_classes(n, 3).unwrap() {
            let got = mle_counts(&tri, &c, &k).unwrap().theta;
            let want = [c[1] as f64 / n as f64, c[2] as f64 / n as f64];
            assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-9), "{c:?}: {got:?}");
        }
    }
}

#[test]
fn family_specs_reject_unknown_keys() {
    let tri = serde_json::to_value(fam::multinomial_mean(3)).unwrap();
    assert_eq!(serde_json::from_value::<FamilySpec>(tri.clone()).unwrap(), fam::multinomial_mean(3));
    let mut bad = tri;
    bad["latent"]["stats"] = serde_json::json!([[0.0]]);
    assert!(serde_json::from_value::<FamilySpec>(bad).is_err());
    let mut gauss = serde_json::to_value(fam::gaussian(ParamDomain::boxed(&[-1.0, -1.0], &[1.0, -0.1]))).unwrap();
    gauss["model"]["stats"] = serde_json::json!([]);
    assert!(serde_json::from_value::<FamilySpec>(gauss).is_err());
}
