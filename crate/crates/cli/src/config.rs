//! Experiment configuration: a JSON file with a schema version, overridden
//! field by field from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tel_core::agents::{AffineExponent, ExploitParams};
use tel_core::engine::{AcceptorPolicy, PolicyCombo, RecordPolicy};
use tel_core::market::{random_market, Market, MarketFile};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketSource {
    File(PathBuf),
    Random { n: usize, m: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExploitMaps {
    pub f: AffineExponent,
    pub g: AffineExponent,
}

/// The on-disk form. Every field except the version may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub market: Option<MarketSource>,
    pub acceptor_policy: Option<AcceptorPolicy>,
    pub epsilon: Option<f64>,
    pub exploit: Option<ExploitMaps>,
    pub horizon: Option<u64>,
    pub burn_in_fraction: Option<f64>,
    pub delta: Option<f64>,
    pub replications: Option<u64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub record_policy: Option<RecordPolicy>,
    pub epsilons: Option<Vec<f64>>,
    pub state_cap: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: ConfigFile =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        ensure!(
            file.schema_version == SCHEMA_VERSION,
            "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        );
        Ok(file)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            market,
            acceptor_policy,
            epsilon,
            exploit,
            horizon,
            burn_in_fraction,
            delta,
            replications,
            seed,
            output_dir,
            record_policy,
            epsilons,
            state_cap
        );
        self
    }
}

/// A fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub market: MarketSource,
    pub combo: PolicyCombo,
    pub horizon: u64,
    pub burn_in_fraction: f64,
    pub delta: f64,
    pub replications: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub record_policy: RecordPolicy,
    pub epsilons: Vec<f64>,
    pub state_cap: usize,
}

impl ExperimentConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let market = file.market.context("no market given: use --market FILE or --random N,M,SEED")?;
        let epsilon = file.epsilon.unwrap_or(0.01);
        let policy = file.acceptor_policy.unwrap_or(AcceptorPolicy::Atl);
        let combo = match policy {
            AcceptorPolicy::Atl => {
                ensure!(file.exploit.is_none(), "exploit maps are only used with ATLstar");
                PolicyCombo::atl(epsilon)?
            }
            AcceptorPolicy::AtlStar => {
                let maps = file.exploit.unwrap_or(ExploitMaps {
                    f: ExploitParams::DEFAULT_F,
                    g: ExploitParams::DEFAULT_G,
                });
                PolicyCombo::atl_star(ExploitParams::new(maps.f, maps.g, epsilon)?)?
            }
        };
        let config = ExperimentConfig {
            market,
            combo,
            horizon: file.horizon.unwrap_or(100_000),
            burn_in_fraction: file.burn_in_fraction.unwrap_or(0.5),
            delta: file.delta.unwrap_or(0.1),
            replications: file.replications.unwrap_or(1),
            seed: file.seed.unwrap_or(0),
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            record_policy: file.record_policy.unwrap_or_default(),
            epsilons: file.epsilons.unwrap_or_else(|| vec![0.2, 0.1, 0.05]),
            state_cap: file.state_cap.unwrap_or(tel_core::chain::DEFAULT_STATE_CAP),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.horizon >= 1, "horizon must be at least 1");
        ensure!(self.replications >= 1, "replications must be at least 1");
        ensure!(self.delta > 0.0 && self.delta <= 1.0, "delta {} outside (0, 1]", self.delta);
        ensure!(
            (0.0..1.0).contains(&self.burn_in_fraction),
            "burn_in_fraction {} outside [0, 1)",
            self.burn_in_fraction
        );
        ensure!(!self.epsilons.is_empty(), "epsilon list is empty");
        for &e in &self.epsilons {
            let mut combo = self.combo;
            combo.epsilon = e;
            if let Some(p) = combo.exploit.as_mut() {
                p.epsilon = e;
            }
            combo.validate().with_context(|| format!("epsilon {e} in the sweep"))?;
        }
        if let RecordPolicy::Thin(0) = self.record_policy {
            bail!("thinning interval must be positive");
        }
        Ok(())
    }

    pub fn load_market(&self) -> Result<Market> {
        load_market(&self.market)
    }

    /// The combo at another rate, same rules and exponent maps.
    pub fn combo_at(&self, epsilon: f64) -> Result<PolicyCombo> {
        Ok(match self.combo.exploit {
            None => PolicyCombo::atl(epsilon)?,
            Some(p) => PolicyCombo::atl_star(ExploitParams::new(p.f, p.g, epsilon)?)?,
        })
    }
}

pub fn load_market(source: &MarketSource) -> Result<Market> {
    match source {
        MarketSource::File(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(MarketFile::parse(&text).with_context(|| format!("market {}", path.display()))?)
        }
        MarketSource::Random { n, m, seed } => {
            ensure!(*n >= 1 && *m >= 1, "random market needs n, m >= 1");
            Ok(random_market(*n, *m, *seed))
        }
    }
}

/// `full`, `summary` or `thin:K`.
pub fn parse_record_policy(s: &str) -> Result<RecordPolicy, String> {
    match s {
        "full" => Ok(RecordPolicy::Full),
        "summary" => Ok(RecordPolicy::SummaryOnly),
        _ => match s.strip_prefix("thin:").map(str::parse::<u64>) {
            Some(Ok(k)) if k > 0 => Ok(RecordPolicy::Thin(k)),
            _ => Err(format!("expected full, summary or thin:K with K > 0, got {s:?}")),
        },
    }
}

/// `N,M,SEED`.
pub fn parse_random(s: &str) -> Result<MarketSource, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [n, m, seed] = parts.as_slice() else {
        return Err(format!("expected N,M,SEED, got {s:?}"));
    };
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("{x:?}: {e}"));
    Ok(MarketSource::Random {
        n: num(n)? as usize,
        m: num(m)? as usize,
        seed: num(seed)?,
    })
}
