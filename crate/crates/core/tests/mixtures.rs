use std::collections::BTreeSet;

use minimax_core::mixtures::{ideal_tilted_composite, Strategy, StrategySpec, TiltingSpec};
use minimax_core::model_families::{self as fam, FamilySpec, Obs, ParamDomain};
use minimax_core::priors::PriorSpec;
use minimax_core::regret_lab::{
    enumerate_classes, good_threshold, pointwise_regret, shtarkov_log_constant, ClassTable, CountClass,
};
use proptest::prelude::*;

fn bayes(prior: PriorSpec) -> StrategySpec {
    StrategySpec::bayes(prior)
}

fn jeffreys(k: &ParamDomain) -> StrategySpec {
    bayes(PriorSpec::jeffreys(k.clone()))
}

fn tilted(k: &ParamDomain) -> StrategySpec {
    StrategySpec::Tilted { prior: PriorSpec::jeffreys(k.clone()), tilting: TiltingSpec::default() }
}

/// `Σ_{x^n} q(x^n)` by count classes.
fn total_mass(s: &Strategy, n: u64, k: usize) -> f64 {
    enumerate_classes(n, k)
        .unwrap()
        .into_iter()
        .map(|c| (CountClass::new(c.clone()).log_multiplicity() + s.log_marginal_counts(&c).unwrap()).exp())
        .sum()
}

fn curved() -> (FamilySpec, ParamDomain) {
    (fam::curved_bernoulli_pair(0.45), ParamDomain::interval(0.2, 2.0))
}

#[test]
fn strategies_sum_to_their_mass() {
    let bern = fam::bernoulli_mean();
    let tri = fam::multinomial_mean(3);
    let (cf, ck) = curved();
    let cases: Vec<(&str, FamilySpec, StrategySpec, Vec<u64>)> = vec![
        ("kt", bern.clone(), jeffreys(&ParamDomain::simplex(1, 0.0)), vec![1, 5, 14]),
        ("uniform margin", bern.clone(), bayes(PriorSpec::uniform(ParamDomain::simplex(1, 0.1))), vec![1, 7, 14]),
        ("nml", bern.clone(), StrategySpec::Nml { n: 14, domain: ParamDomain::simplex(1, 0.2) }, vec![14]),
        ("fixed", tri.clone(), StrategySpec::Fixed { theta: vec![0.2, 0.5] }, vec![1, 6, 12]),
        ("dirichlet", tri.clone(), bayes(PriorSpec::dirichlet(0.25, ParamDomain::simplex(2, 0.0))), vec![1, 6, 12]),
        ("ideal", fam::bernoulli_natural(-2.0, 2.0), bayes(PriorSpec::ideal(12, ParamDomain::interval(-2.0, 2.0))), vec![12]),
        ("curved jeffreys", cf.clone(), jeffreys(&ck), vec![1, 4, 10]),
        ("curved tilted", cf.clone(), tilted(&ck), vec![1, 4, 10]),
    ];
    for (name, family, spec, ns) in cases {
        let s = Strategy::build(&spec, &family).unwrap();
        let k = family.alphabet_size().unwrap();
        for n in ns {
            let m = total_mass(&s, n, k);
            assert!((m - 1.0).abs() <= 1e-8, "{name} n {n}: mass {m}");
        }
    }
    // a composite may be deficient but never exceeds one
    let s = ideal_tilted_composite(&cf, &ck, 10, 0.5, &TiltingSpec::default(), None, None).unwrap();
    let m = total_mass(&s, 10, 4);
    assert!(m <= 1.0 + 1e-9 && m >= 1.0 - 1e-8 - (1.0 - s.total_mass()), "composite mass {m}");
}

#[test]
fn nml_regret_is_log_c_on_every_class() {
    let family = fam::bernoulli_natural(-3.0, 3.0);
    for (lo, hi) in [(-3.0, 3.0), (-0.5, 1.0), (0.2, 0.4)] {
        let k = ParamDomain::interval(lo, hi);
        for n in [1u64, 4, 11, 20] {
            let s = Strategy::build(&StrategySpec::Nml { n, domain: k.clone() }, &family).unwrap();
            let log_c = shtarkov_log_constant(&family, &k, n).unwrap();
            for c in enumerate_classes(n, 2).unwrap() {
                let r = pointwise_regret(&s, &family, &k, Obs::Counts(&c)).unwrap();
                assert!((r - log_c).abs() <= 1e-9, "[{lo}, {hi}] n {n} {c:?}: {r} vs {log_c}");
            }
        }
    }
}

#[test]
fn tilted_composite_costs_at_most_its_weight() {
    // (1 - n^{-r}) Jeffreys + n^{-r} tilted never loses more than -log(1 - n^{-r}) to Jeffreys
    let (family, k) = curved();
    let plain = Strategy::build(&jeffreys(&k), &family).unwrap();
    for n in [4u64, 8, 12] {
        let w = (n as f64).powf(-0.5);
        let comp = Strategy::build(
            &StrategySpec::Composite { weights: vec![1.0 - w, w], children: vec![jeffreys(&k), tilted(&k)] },
            &family,
        )
        .unwrap();
        let table = ClassTable::build(&family, &k, n).unwrap();
        let delta = good_threshold(n);
        let mut goods = 0;
        for c in &table.classes {
            let loss = plain.log_marginal_counts(&c.counts).unwrap() - comp.log_marginal_counts(&c.counts).unwrap();
            assert!(loss <= -(1.0 - w).ln() + 1e-12, "n {n} {:?}: loss {loss}", c.counts);
            goods += c.is_good(delta) as usize;
        }
        assert!(goods > 0, "n {n}: no good class to check");
    }
}

#[test]
fn tilted_gains_on_every_not_good_class() {
    let (family, k) = curved();
    let plain = Strategy::build(&jeffreys(&k), &family).unwrap();
    let tilt = Strategy::build(&tilted(&k), &family).unwrap();
    for n in [6u64, 8, 10, 12] {
        let table = ClassTable::build(&family, &k, n).unwrap();
        let delta = good_threshold(n);
        let mut seen = 0;
        for c in table.classes.iter().filter(|c| c.in_domain && c.v_norm.is_some_and(|v| v > delta)) {
            let gain = tilt.log_marginal_counts(&c.counts).unwrap() - plain.log_marginal_counts(&c.counts).unwrap();
            assert!(gain > 0.0, "n {n} {:?} |V| {:?}: gain {gain}", c.counts, c.v_norm);
            seen += 1;
        }
        assert!(seen > 0, "n {n}: no not-good class");
    }
}

/// Distinct rearrangements of `xs`.
fn permutations(xs: &[f64]) -> BTreeSet<Vec<u64>> {
    fn go(rest: &mut Vec<u64>, cur: &mut Vec<u64>, out: &mut BTreeSet<Vec<u64>>) {
        if rest.is_empty() {
            out.insert(cur.clone());
            return;
        }
        let mut seen = BTreeSet::new();
        for i in 0..rest.len() {
            if !seen.insert(rest[i]) {
                continue;
            }
            let v = rest.remove(i);
            cur.push(v);
            go(rest, cur, out);
            cur.pop();
            rest.insert(i, v);
        }
    }
    let mut out = BTreeSet::new();
    go(&mut xs.iter().map(|x| *x as u64).collect(), &mut Vec::new(), &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chain_rule_holds(raw in prop::collection::vec(0u8..4, 1..40), which in 0usize..5) {
        let (cf, ck) = curved();
        let (family, spec): (FamilySpec, StrategySpec) = match which {
            0 => (fam::bernoulli_mean(), jeffreys(&ParamDomain::simplex(1, 0.0))),
            1 => (fam::multinomial_mean(3), bayes(PriorSpec::dirichlet(0.25, ParamDomain::simplex(2, 0.0)))),
            2 => (fam::truncated_poisson(3, -1.0, 1.0), jeffreys(&ParamDomain::interval(-1.0, 1.0))),
            3 => (cf.clone(), jeffreys(&ck)),
            _ => (cf, tilted(&ck)),
        };
        let m = family.alphabet_size().unwrap();
        let xs: Vec<f64> = raw.iter().map(|r| (*r as usize % m) as f64).collect();
        let s = Strategy::build(&spec, &family).unwrap();
        let whole = s.log_marginal(Obs::Seq(&xs)).unwrap();
        let mut sum = 0.0;
        for t in 0..xs.len() {
            sum += s.predictive(&xs[..t]).unwrap().probs[xs[t] as usize].ln();
        }
        prop_assert!((whole - sum).abs() <= 1e-9, "{whole} vs {sum}");
    }

    #[test]
    fn nml_chain_rule_holds(raw in prop::collection::vec(0u8..2, 10)) {
        let family = fam::bernoulli_mean();
        let s = Strategy::build(&StrategySpec::Nml { n: 10, domain: ParamDomain::simplex(1, 0.1) }, &family).unwrap();
        let xs: Vec<f64> = raw.iter().map(|r| *r as f64).collect();
        let whole = s.log_marginal(Obs::Seq(&xs)).unwrap();
        let sum: f64 = (0..xs.len()).map(|t| s.predictive(&xs[..t]).unwrap().probs[xs[t] as usize].ln()).sum();
        prop_assert!((whole - sum).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn marginals_are_exchangeable(strings in prop::collection::vec(prop::collection::vec(0u8..4, 8), 3)) {
        let (cf, ck) = curved();
        let models = [
            (fam::multinomial_mean(4), bayes(PriorSpec::dirichlet(0.5, ParamDomain::simplex(3, 0.0)))),
            (cf.clone(), jeffreys(&ck)),
            (cf, tilted(&ck)),
        ];
        for (family, spec) in &models {
            let s = Strategy::build(spec, family).unwrap();
            for raw in &strings {
                let xs: Vec<f64> = raw.iter().map(|r| *r as f64).collect();
                let base = s.log_marginal(Obs::Seq(&xs)).unwrap();
                for p in permutations(&xs) {
                    let ys: Vec<f64> = p.iter().map(|v| *v as f64).collect();
                    let v = s.log_marginal(Obs::Seq(&ys)).unwrap();
                    prop_assert!((v - base).abs() <= 1e-10, "{xs:?} vs {ys:?}");
                }
            }
        }
    }
}
