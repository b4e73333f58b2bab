use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tel_core::chain::{
    build_resistance_graph, matching_mass, min_in_tree_roots, reachable_chain_capped, recurrent_class,
    stationary_distribution, write_mass_csv, ChainError, MassRow,
};
use tel_core::engine::{
    acceptor_optimal_mass, market_fingerprint, replication_seed, run, stable_mass, AcceptorPolicy,
};
use tel_core::market::{deferred_acceptance, enumerate_stable, random_market, Market, Matching, Side, ENUMERATION_CAP};

use crate::config::{ConfigFile, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    TargetMissed,
}

impl Status {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Status::Success => ExitCode::SUCCESS,
            Status::TargetMissed => ExitCode::from(1),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn gen_market(n: usize, m: usize, seed: u64, out: &Path) -> Result<Status> {
    ensure!(n >= 1 && m >= 1, "market needs at least one proposer and one acceptor");
    let market = random_market(n, m, seed);
    let mut text = market.to_json();
    text.push('\n');
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} ({n}x{m}, fingerprint {})", out.display(), market_fingerprint(&market));
    if n <= ENUMERATION_CAP && m <= ENUMERATION_CAP {
        println!("stable matchings: {}", enumerate_stable(&market)?.len());
        println!("proposer-optimal: {}", deferred_acceptance(&market, Side::Proposer));
        println!("acceptor-optimal: {}", deferred_acceptance(&market, Side::Acceptor));
    } else {
        println!("{n}x{m} exceeds the enumeration cap of {ENUMERATION_CAP}; stable-set summary skipped");
    }
    Ok(Status::Success)
}

#[derive(Debug, Clone, Serialize)]
struct RunRow {
    replication: u64,
    seed: u64,
    stable_mass: f64,
    acceptor_optimal_mass: f64,
}

#[derive(Serialize)]
struct Campaign<'a> {
    config: &'a ExperimentConfig,
    market_fingerprint: String,
    /// `stable_mass` under ATL, `acceptor_optimal_mass` under ATLstar.
    target: &'static str,
    mean_stable_mass: f64,
    mean_acceptor_optimal_mass: f64,
    threshold: f64,
    pass: bool,
    runs: &'a [RunRow],
}

pub fn simulate(file: ConfigFile) -> Result<Status> {
    let config = ExperimentConfig::resolve(file)?;
    let market = config.load_market()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let runs: Vec<RunRow> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<RunRow> {
            let seed = replication_seed(config.seed, r);
            let traj = run(&market, &config.combo, config.horizon, seed, config.record_policy)?;
            traj.write_summary_csv(&market, create(&out.join(format!("run-{r:04}.csv")))?)?;
            traj.write_jsonl(create(&out.join(format!("run-{r:04}.jsonl")))?)?;
            Ok(RunRow {
                replication: r,
                seed,
                stable_mass: stable_mass(&traj, &market, config.burn_in_fraction)?,
                acceptor_optimal_mass: acceptor_optimal_mass(&traj, &market, config.burn_in_fraction)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut w = csv::Writer::from_writer(create(&out.join("campaign.csv"))?);
    for row in &runs {
        w.serialize(row)?;
    }
    w.flush()?;

    let k = runs.len() as f64;
    let mean_stable_mass = runs.iter().map(|r| r.stable_mass).sum::<f64>() / k;
    let mean_acceptor_optimal_mass = runs.iter().map(|r| r.acceptor_optimal_mass).sum::<f64>() / k;
    let (target, value) = match config.combo.acceptor_policy {
        AcceptorPolicy::Atl => ("stable_mass", mean_stable_mass),
        AcceptorPolicy::AtlStar => ("acceptor_optimal_mass", mean_acceptor_optimal_mass),
    };
    let threshold = 1.0 - config.delta;
    let pass = value >= threshold;
    let campaign = Campaign {
        config: &config,
        market_fingerprint: market_fingerprint(&market),
        target,
        mean_stable_mass,
        mean_acceptor_optimal_mass,
        threshold,
        pass,
        runs: &runs,
    };
    serde_json::to_writer_pretty(create(&out.join("campaign.json"))?, &campaign)?;

    for row in &runs {
        println!(
            "run {:>4} seed {:>20}  stable {:.4}  acceptor-optimal {:.4}",
            row.replication, row.seed, row.stable_mass, row.acceptor_optimal_mass
        );
    }
    println!(
        "{} replications: mean {target} {value:.4} (needs >= {threshold:.4}) -> {}",
        runs.len(),
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { Status::Success } else { Status::TargetMissed })
}

pub fn exact(file: ConfigFile, export_chain: bool) -> Result<Status> {
    let config = ExperimentConfig::resolve(file)?;
    let market = config.load_market()?;
    let mut eps = config.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    // Transition probabilities are polynomials in the rate, so one
    // construction serves the whole sweep.
    let chain = match reachable_chain_capped(&market, &config.combo_at(eps[0])?, config.state_cap) {
        Err(ChainError::StateCapExceeded { cap }) => bail!(
            "reachable chain for the {}x{} market exceeds the state cap of {cap} states (epsilon {:?})",
            market.n(),
            market.m(),
            eps
        ),
        other => other?,
    };
    let closed = recurrent_class(&chain)?.len();
    println!(
        "chain: {} states, {} transitions, closed class of {closed} states",
        chain.len(),
        chain.transition_count()
    );
    let rows: Vec<MassRow> = eps
        .par_iter()
        .map(|&e| -> Result<MassRow> {
            let s = stationary_distribution(&chain, e)?;
            let report = matching_mass(&chain, &s.pi, &market)?;
            Ok(MassRow {
                epsilon: e,
                stable_mass: report.stable_mass,
                acceptor_optimal_mass: report.acceptor_optimal_mass,
                residual: s.residual,
            })
        })
        .collect::<Result<_>>()?;
    let out = &config.output_dir;
    write_mass_csv(&rows, create(&out.join("exact.csv"))?)?;
    if export_chain {
        fs::write(out.join("chain.json"), chain.to_json(None))?;
    }
    println!("{:>10} {:>12} {:>22} {:>10}", "epsilon", "stable_mass", "acceptor_optimal_mass", "residual");
    for r in &rows {
        println!("{:>10} {:>12.6} {:>22.6} {:>10.1e}", r.epsilon, r.stable_mass, r.acceptor_optimal_mass, r.residual);
    }
    Ok(Status::Success)
}

/// Named checks of a prediction against the stable-matching oracles.
pub fn verdicts(
    policy: AcceptorPolicy,
    roots: &[Matching],
    stable: &[Matching],
    optimum: &Matching,
) -> Vec<(&'static str, bool)> {
    let mut v = vec![(
        "predicted set is a nonempty subset of the stable matchings",
        !roots.is_empty() && roots.iter().all(|r| stable.contains(r)),
    )];
    if policy == AcceptorPolicy::AtlStar {
        v.push(("predicted set is exactly the acceptor-optimal matching", roots == [optimum.clone()]));
    }
    v
}

#[derive(Serialize)]
struct PredictionReport {
    nodes: usize,
    edges: usize,
    stable: Vec<String>,
    acceptor_optimal: String,
    weight: f64,
    predicted: Vec<String>,
    verdicts: Vec<(&'static str, bool)>,
}

pub fn predict(file: ConfigFile, dot: bool) -> Result<Status> {
    let config = ExperimentConfig::resolve(file)?;
    let market: Market = config.load_market()?;
    let graph = build_resistance_graph(&market, &config.combo)?;
    let prediction = min_in_tree_roots(&graph)?;
    let stable = enumerate_stable(&market)?;
    let optimum = deferred_acceptance(&market, Side::Acceptor);
    let checks = verdicts(config.combo.acceptor_policy, &prediction.roots, &stable, &optimum);

    println!(
        "resistance graph: {} matchings ({} stable), {} edges",
        graph.nodes.len(),
        graph.stable.iter().filter(|s| **s).count(),
        graph.edges.len()
    );
    println!("minimum in-tree weight: {:.6}", prediction.weight);
    for r in &prediction.roots {
        println!("predicted: {r}");
    }
    println!("acceptor-optimal: {optimum}");
    for (name, ok) in &checks {
        println!("{}: {name}", if *ok { "PASS" } else { "FAIL" });
    }

    let out = &config.output_dir;
    let report = PredictionReport {
        nodes: graph.nodes.len(),
        edges: graph.edges.len(),
        stable: stable.iter().map(ToString::to_string).collect(),
        acceptor_optimal: optimum.to_string(),
        weight: prediction.weight,
        predicted: prediction.roots.iter().map(ToString::to_string).collect(),
        verdicts: checks.clone(),
    };
    serde_json::to_writer_pretty(create(&out.join("prediction.json"))?, &report)?;
    if dot {
        fs::write(out.join("resistance.dot"), graph.to_dot())?;
    }
    Ok(if checks.iter().all(|c| c.1) { Status::Success } else { Status::TargetMissed })
}
