use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const M2: &str = r#"{"n":2,"m":2,
  "proposer_utils":[["0.6","0.3"],["0.3","0.6"]],
  "acceptor_utils":[["0.3","0.6"],["0.6","0.3"]]}"#;

fn tel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tel"))
        .args(args)
        .env_remove("TEL_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn m2_file(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("m2.json");
    std::fs::write(&path, M2).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn campaign(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("campaign.json")).unwrap()).unwrap()
}

#[test]
fn gen_market_round_trips_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let o = tel(&["gen-market", "--n", "2", "--m", "2", "--seed", "7", "--out", s(&a)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("stable matchings:"));
    assert!(tel(&["gen-market", "--n", "2", "--m", "2", "--seed", "7", "--out", s(&b)]).status.success());
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    tel_core::market::MarketFile::parse(std::str::from_utf8(&ta).unwrap()).unwrap();

    let big = dir.path().join("big.json");
    let o = tel(&["gen-market", "--n", "8", "--m", "8", "--seed", "1", "--out", s(&big)]);
    assert!(o.status.success());
    assert!(big.exists());
    assert!(stdout(&o).contains("summary skipped"));
}

#[test]
fn simulate_m2_atl_meets_its_target() {
    let dir = TempDir::new().unwrap();
    let market = m2_file(&dir);
    let out = dir.path().join("sim");
    let o = tel(&[
        "simulate", "--market", s(&market), "--policy", "atl", "--epsilon", "0.01", "--horizon", "200000",
        "--replications", "4", "--delta", "0.1", "--seed", "3", "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let c = campaign(&out);
    assert!(c["mean_stable_mass"].as_f64().unwrap() >= 0.9);
    assert_eq!(c["runs"].as_array().unwrap().len(), 4);

    // Per-run summaries re-parse and their frequencies sum to one.
    for r in 0..4 {
        let mut rd = csv::Reader::from_path(out.join(format!("run-{r:04}.csv"))).unwrap();
        let total: f64 = rd
            .deserialize::<(String, u64, f64, bool, bool)>()
            .map(|row| row.unwrap().2)
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "run {r}: {total}");
        let jsonl = std::fs::read_to_string(out.join(format!("run-{r:04}.jsonl"))).unwrap();
        let header: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(header["seed"], c["runs"][r]["seed"]);
    }
    let mut rd = csv::Reader::from_path(out.join("campaign.csv")).unwrap();
    assert_eq!(rd.records().count(), 4);
}

#[test]
fn simulate_exit_status_tracks_the_exploit_target() {
    let dir = TempDir::new().unwrap();
    let market = m2_file(&dir);
    let out = dir.path().join("star");
    let o = tel(&[
        "simulate", "--market", s(&market), "--policy", "atl-star", "--epsilon", "0.01", "--horizon", "200000",
        "--replications", "4", "--delta", "0.1", "--out", s(&out),
    ]);
    let c = campaign(&out);
    let mass = c["mean_acceptor_optimal_mass"].as_f64().unwrap();
    println!("M2 PTL+ATL*: mean acceptor-optimal mass {mass:.4}");
    assert_eq!(c["target"], "acceptor_optimal_mass");
    assert_eq!(c["pass"].as_bool().unwrap(), mass >= 0.9);
    assert_eq!(o.status.code(), Some(if mass >= 0.9 { 0 } else { 1 }));
}

#[test]
fn config_file_with_flag_and_env_overrides() {
    let dir = TempDir::new().unwrap();
    let market = m2_file(&dir);
    let config = dir.path().join("cfg.json");
    let from_file = dir.path().join("from-file");
    std::fs::write(
        &config,
        serde_json::json!({
            "schema_version": 1,
            "market": {"file": market},
            "horizon": 1000,
            "replications": 2,
            "seed": 11,
            "record_policy": {"thin": 100},
            "output_dir": from_file,
        })
        .to_string(),
    )
    .unwrap();
    let o = tel(&["simulate", "--config", s(&config), "--replications", "3", "--delta", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = campaign(&from_file);
    assert_eq!(c["runs"].as_array().unwrap().len(), 3);
    assert_eq!(c["config"]["horizon"], 1000);
    let jsonl = std::fs::read_to_string(from_file.join("run-0000.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1 + 10);

    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_tel"))
        .args(["simulate", "--config", s(&config), "--delta", "1"])
        .env("TEL_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success());
    // Same config and seeds give the same per-run numbers.
    let a = std::fs::read_to_string(from_file.join("campaign.csv")).unwrap();
    let b = std::fs::read_to_string(env_out.join("campaign.csv")).unwrap();
    assert_eq!(b.lines().count(), 3);
    assert_eq!(a.lines().take(3).collect::<Vec<_>>(), b.lines().collect::<Vec<_>>());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 9}"#).unwrap();
    assert_eq!(tel(&["simulate", "--config", s(&bad)]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let market = m2_file(&dir);
    let out = dir.path().join("x");
    for extra in [["--horizon", "0"], ["--delta", "0"], ["--replications", "0"], ["--epsilon", "0.9"]] {
        let mut args = vec!["simulate", "--market", s(&market), "--out", s(&out)];
        args.extend(extra);
        assert_eq!(tel(&args).status.code(), Some(2), "{extra:?}");
    }
    assert_eq!(tel(&["simulate", "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn exact_sweeps_are_sorted_and_concentrate() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("one");
    let o = tel(&["exact", "--random", "1,1,0", "--eps", "0.05,0.2,0.1", "--out", s(&out), "--export-chain"]);
    assert!(o.status.success());
    let mut rd = csv::Reader::from_path(out.join("exact.csv")).unwrap();
    let rows: Vec<(f64, f64, f64, f64)> = rd.deserialize().map(Result::unwrap).collect();
    let eps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert_eq!(eps, vec![0.2, 0.1, 0.05]);
    assert!(rows.windows(2).all(|w| w[1].1 >= w[0].1));
    assert!(rows.iter().all(|r| r.3 < 1e-12));
    let chain: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("chain.json")).unwrap()).unwrap();
    assert!(!chain["transitions"].as_array().unwrap().is_empty());

    let market = m2_file(&dir);
    let out = dir.path().join("m2");
    assert!(tel(&["exact", "--market", s(&market), "--out", s(&out)]).status.success());
}

#[test]
fn exact_reports_an_oversized_chain() {
    let dir = TempDir::new().unwrap();
    let o = tel(&["exact", "--random", "5,5,1", "--state-cap", "20000", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("state cap") && err.contains("0.05"), "{err}");
}

#[test]
fn predict_on_m2() {
    let dir = TempDir::new().unwrap();
    let market = m2_file(&dir);
    for policy in ["atl", "atl-star"] {
        let out = dir.path().join(policy);
        let o = tel(&["predict", "--market", s(&market), "--policy", policy, "--out", s(&out), "--dot"]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
        assert!(std::fs::read_to_string(out.join("resistance.dot")).unwrap().starts_with("digraph"));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("atl-star/prediction.json")).unwrap()).unwrap();
    assert_eq!(report["predicted"].as_array().unwrap().len(), 1);
    assert_eq!(report["predicted"][0], report["acceptor_optimal"]);
}

#[test]
fn predict_rejects_markets_beyond_enumeration() {
    let dir = TempDir::new().unwrap();
    assert_eq!(tel(&["predict", "--random", "8,8,1", "--out", s(dir.path())]).status.code(), Some(2));
}
