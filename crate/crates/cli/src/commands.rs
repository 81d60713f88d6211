use std::path::{Path, PathBuf};
use std::thread;

use minimax_core::arith_coding::{decode, encode_symbols};
use minimax_core::mixtures::Strategy;
use minimax_core::model_families::{self as fam, mle, FamilySpec, ParamDomain};
use minimax_core::priors::{ideal_prior_normalizer, GridSpec, IdealParams, McSpec};
use minimax_core::regret_lab::{
    asymptotic_minimax_value, chunk_ranges, class_info, class_regrets, enumerate_classes, expected_regret_mc,
    jeffreys_constant, summarize, ClassTable, RegretOptions, Scope,
};

use crate::config::ExperimentConfig;
use crate::{container, emit, Fail};

/// 12 significant digits; scientific outside `[1e-5, 1e15)`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..15).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn join_counts(c: &[u64]) -> String {
    c.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    fn new(header: &[&str]) -> anyhow::Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Csv(w))
    }

    fn row(&mut self, fields: &[String]) -> anyhow::Result<()> {
        self.0.write_record(fields)?;
        Ok(())
    }

    fn finish(self, out: Option<&PathBuf>) -> anyhow::Result<()> {
        let bytes = self.0.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        emit(out, &bytes)
    }
}

/// Run `f` over `chunks` contiguous pieces of `0..total` on scoped threads; results in order.
fn par_chunks<T: Send>(
    total: usize,
    chunks: usize,
    f: impl Fn(std::ops::Range<usize>) -> minimax_core::Result<Vec<T>> + Sync,
) -> minimax_core::Result<Vec<T>> {
    let ranges = chunk_ranges(total, chunks.max(1));
    if ranges.len() <= 1 {
        return f(0..total);
    }
    let parts: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = ranges.into_iter().map(|r| s.spawn(|| f(r))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(total);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn class_table(family: &FamilySpec, domain: &ParamDomain, n: u64, threads: usize) -> anyhow::Result<ClassTable> {
    let k = family
        .alphabet_size()
        .ok_or_else(|| Fail::Usage("class enumeration needs a finite alphabet".into()))?;
    let all = enumerate_classes(n, k)?;
    let classes = par_chunks(all.len(), threads, |r| all[r].iter().map(|c| class_info(family, domain, c)).collect())?;
    Ok(ClassTable { n, domain: domain.clone(), classes })
}

fn regrets(strategy: &Strategy, table: &ClassTable, threads: usize) -> anyhow::Result<Vec<f64>> {
    Ok(par_chunks(table.classes.len(), threads, |r| class_regrets(strategy, table, r))?)
}

fn options(cfg: &ExperimentConfig, family: &FamilySpec, domain: &ParamDomain) -> RegretOptions {
    RegretOptions {
        scope: cfg.scope,
        delta: cfg.delta,
        jeffreys_integral: cfg.jeffreys_integral.or_else(|| jeffreys_constant(family, domain).ok()),
    }
}

pub fn regret_scan(config: &Path, out: Option<PathBuf>, threads: usize) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.require_strategies()?;
    cfg.require_n()?;
    let family = cfg.family()?;
    let domain = cfg.domain(&family)?;
    let opts = options(&cfg, &family, &domain);
    let mut csv = Csv::new(&[
        "n",
        "strategy",
        "max_regret_nats",
        "max_regret_bits",
        "argmax_counts",
        "asymptotic_nats",
        "gap_nats",
        "num_classes",
        "good_fraction",
    ])?;
    for &n in &cfg.n {
        let table = class_table(&family, &domain, n, threads)?;
        for entry in &cfg.strategies {
            let spec = entry.def.spec(&family, &domain, n)?;
            let strategy = Strategy::build(&spec, &family)?;
            let r = regrets(&strategy, &table, threads)?;
            let rep = summarize(&entry.label(&spec), &family, &table, &r, &opts)?;
            csv.row(&[
                n.to_string(),
                rep.strategy.clone(),
                num(rep.max_regret_nats),
                num(rep.max_regret_bits()),
                join_counts(&rep.argmax_counts),
                opt_num(rep.asymptotic_nats),
                opt_num(rep.gap_nats),
                rep.num_classes.to_string(),
                num(rep.good_fraction),
            ])?;
        }
    }
    csv.finish(out.as_ref().or(cfg.out.as_ref()))
}

pub fn nml(config: &Path, out: Option<PathBuf>, threads: usize) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.require_n()?;
    let family = cfg.family()?;
    let domain = cfg.domain(&family)?;
    let c_j = cfg.jeffreys_integral.or_else(|| jeffreys_constant(&family, &domain).ok());
    let mut csv = Csv::new(&["n", "log_c_nats", "log_c_bits", "asymptotic_nats", "gap_nats"])?;
    for &n in &cfg.n {
        // The empty string is the only string of length zero and has probability one.
        let log_c = if n == 0 { 0.0 } else { class_table(&family, &domain, n, threads)?.log_shtarkov() };
        let asym = c_j.filter(|_| n > 0).map(|c| asymptotic_minimax_value(family.dim(), n as f64, c));
        csv.row(&[
            n.to_string(),
            num(log_c),
            num(log_c / std::f64::consts::LN_2),
            opt_num(asym),
            opt_num(asym.map(|a| log_c - a)),
        ])?;
    }
    csv.finish(out.as_ref().or(cfg.out.as_ref()))
}

pub fn compare(config: &Path, out: Option<PathBuf>, threads: usize, seed: u64) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.require_strategies()?;
    cfg.require_n()?;
    let family = cfg.family()?;
    let domain = cfg.domain(&family)?;
    let scope = cfg.scope.unwrap_or(Scope::InDomain);
    let mut header = vec![
        "n",
        "strategy",
        "max_regret_nats",
        "min_regret_nats",
        "shtarkov_nats",
        "max_minus_shtarkov_nats",
        "best_classes",
        "num_classes",
    ];
    if cfg.expected.is_some() {
        header.extend(["expected_regret_nats", "expected_regret_stderr"]);
    }
    let mut csv = Csv::new(&header)?;
    for &n in &cfg.n {
        let table = class_table(&family, &domain, n, threads)?;
        let log_c = table.log_shtarkov();
        let in_scope: Vec<bool> = table.classes.iter().map(|c| scope == Scope::AllStrings || c.in_domain).collect();
        let mut built = Vec::new();
        for entry in &cfg.strategies {
            let spec = entry.def.spec(&family, &domain, n)?;
            let strategy = Strategy::build(&spec, &family)?;
            let r = regrets(&strategy, &table, threads)?;
            built.push((entry.label(&spec), strategy, r));
        }
        let best: Vec<f64> = (0..table.classes.len())
            .map(|i| built.iter().map(|b| b.2[i]).fold(f64::INFINITY, f64::min))
            .collect();
        for (label, strategy, r) in &built {
            let picked: Vec<(usize, f64)> = r.iter().copied().enumerate().filter(|(i, _)| in_scope[*i]).collect();
            if picked.is_empty() {
                return Err(minimax_core::Error::Domain("no count class lies in the domain".into()).into());
            }
            let max = picked.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let min = picked.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let wins = picked.iter().filter(|(i, v)| *v <= best[*i]).count();
            let mut row = vec![
                n.to_string(),
                label.clone(),
                num(max),
                num(min),
                num(log_c),
                num(max - log_c),
                wins.to_string(),
                picked.len().to_string(),
            ];
            if let Some(e) = &cfg.expected {
                let mc = expected_regret_mc(strategy, &family, &e.theta, n, e.trials, seed, Some(&domain))?;
                row.push(opt_num(mc.regret));
                row.push(opt_num(mc.regret_stderr));
            }
            csv.row(&row)?;
        }
    }
    csv.finish(out.as_ref().or(cfg.out.as_ref()))
}

/// The single strategy of a coding config, built for `n` symbols.
fn coding_strategy(cfg: &ExperimentConfig, n: u64) -> anyhow::Result<(FamilySpec, Strategy, usize)> {
    if cfg.strategies.len() != 1 {
        return Err(Fail::Usage(format!("coding needs exactly one strategy, config has {}", cfg.strategies.len())).into());
    }
    let family = cfg.family()?;
    let alphabet = family
        .alphabet_size()
        .ok_or_else(|| Fail::Usage("coding needs a family with a finite alphabet".into()))?;
    if alphabet > 256 {
        return Err(Fail::Usage(format!("alphabet of size {alphabet} does not fit in a byte")).into());
    }
    let def = &cfg.strategies[0].def;
    let domain = cfg.domain(&family)?;
    let spec = def.spec(&family, &domain, n)?;
    let strategy = Strategy::build(&spec, &family)?;
    Ok((family, strategy, alphabet))
}

fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    Ok(std::fs::read(path).map_err(|e| Fail::Io(format!("cannot read {}: {e}", path.display())))?)
}

pub fn compress(config: &Path, input: &Path, out: &Path) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.require_strategies()?;
    let bytes = read_input(input)?;
    let alphabet = cfg.family()?.alphabet_size().unwrap_or(0);
    let symbols = container::unpack(&bytes, alphabet.max(1))?;
    let n = u32::try_from(symbols.len())
        .map_err(|_| Fail::Usage(format!("{} symbols exceed the 32-bit length field", symbols.len())))?;
    let (family, strategy, _) = coding_strategy(&cfg, n as u64)?;
    let stream = encode_symbols(&strategy, &symbols)?;
    let digest = container::digest(&family, strategy.spec());
    emit(Some(&out.to_path_buf()), &container::write(n, &digest, &stream.bytes))
}

pub fn decompress(config: &Path, input: &Path, out: &Path) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.require_strategies()?;
    let bytes = read_input(input)?;
    let (header, payload) = container::read(&bytes)?;
    let (family, strategy, alphabet) = coding_strategy(&cfg, header.n as u64)?;
    if container::digest(&family, strategy.spec()) != header.digest {
        return Err(Fail::Data("strategy digest does not match the configured strategy".into()).into());
    }
    let symbols = decode(&strategy, payload, header.n as u64).map_err(|e| match e {
        minimax_core::Error::Truncated { index } => {
            anyhow::Error::new(Fail::Data(format!("payload ends before symbol {index} is determined")))
        }
        other => other.into(),
    })?;
    emit(Some(&out.to_path_buf()), &container::pack(&symbols, alphabet))
}

pub fn demo_contaminated(s2: f64, nu: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    let family = fam::contaminated(1, nu, s2);
    family.validate()?;
    let FamilySpec::ContaminatedGaussian(p) = &family else { unreachable!() };
    let c = p.critical_radius();
    let guaranteed = s2.ln() >= 4.0;
    if !guaranteed {
        eprintln!(
            "warning: log s^2 = {} < 4, so negative empirical Fisher information at offset c is not guaranteed",
            num(s2.ln())
        );
    }
    let j_plus = family.empirical_fisher(&[0.0], &[c])?[(0, 0)];
    let j_minus = family.empirical_fisher(&[0.0], &[-c])?[(0, 0)];
    let xs = [c, -c];
    let search = family.search_domain(fam::Obs::Seq(&xs))?;
    let m = mle(&family, &xs, &search)?;
    let t = m.theta[0].abs();
    let mut csv = Csv::new(&["quantity", "value"])?;
    let rows: Vec<(&str, String)> = vec![
        ("s2", num(s2)),
        ("nu", num(nu)),
        ("log_s2", num(s2.ln())),
        ("negativity_guaranteed", guaranteed.to_string()),
        ("critical_radius", num(c)),
        ("empirical_fisher_at_plus_c", num(j_plus)),
        ("empirical_fisher_at_minus_c", num(j_minus)),
        ("fisher_information", num(p.fisher_scalar()?)),
        ("mle_for_plus_minus_c", num(m.theta[0])),
        ("maximizer_low", num(-t)),
        ("maximizer_high", num(t)),
        ("max_log_likelihood", num(m.loglik)),
        ("mle_multiple", m.multiple.to_string()),
    ];
    for (k, v) in rows {
        csv.row(&[k.to_string(), v])?;
    }
    csv.finish(out.as_ref())
}

pub fn demo_ideal_prior(config: Option<&Path>, out: Option<PathBuf>, seed: u64) -> anyhow::Result<()> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            family: Some(fam::bernoulli_natural(-2.0, 2.0)),
            domain: Some(ParamDomain::interval(-2.0, 2.0)),
            n: vec![100, 1000, 10_000, 100_000],
            ..Default::default()
        },
    };
    cfg.require_n()?;
    let family = cfg.family()?;
    let domain = cfg.domain(&family)?;
    let grid = GridSpec::default_for(&domain);
    let c_j = match cfg.jeffreys_integral {
        Some(v) => v,
        None => jeffreys_constant(&family, &domain)?,
    };
    let mc = McSpec { seed, ..McSpec::default() };
    let mut csv = Csv::new(&[
        "n",
        "eps",
        "alpha_scale",
        "radius",
        "ideal_normalizer",
        "jeffreys_integral",
        "ratio",
        "n_eps2_over_d",
        "sqrt_n_eps_over_alpha",
        "eps_alpha",
    ])?;
    for &n in &cfg.n {
        let params = IdealParams::new(n, cfg.eps, cfg.alpha_scale)?;
        let c_ideal = ideal_prior_normalizer(&family, &domain, &params, &grid, &mc)?;
        let diag = params.diagnostics(family.dim());
        csv.row(&[
            n.to_string(),
            num(params.eps),
            num(params.alpha_scale),
            num(params.radius()),
            num(c_ideal),
            num(c_j),
            num(c_ideal / c_j),
            num(diag.n_eps2_over_d),
            num(diag.sqrt_n_eps_over_alpha),
            num(diag.eps_alpha),
        ])?;
    }
    csv.finish(out.as_ref())
}
