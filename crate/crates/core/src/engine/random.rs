//! Randomness sources for the repeated game.
//!
//! Every random decision is addressed by `(agent, t, site)`. The seeded
//! source derives an independent generator for each address from the master
//! seed, so a run's output does not depend on the order in which agents are
//! processed. The scripted source replays queued draws for tests.

use std::collections::{HashMap, VecDeque};

use rand::rngs::SmallRng;
use rand::SeedableRng;

use crate::agents::{Draws, RngDraws};
use crate::market::{AgentId, Side};

/// Which decision of an agent in a round the draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Act,
    Update,
}

pub trait RandomSource {
    fn stream(&mut self, agent: AgentId, t: u64, site: Site) -> &mut dyn Draws;
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of one replication from a master seed.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    mix(master ^ mix(replication.wrapping_add(0x5eed)))
}

#[derive(Debug, Clone)]
pub struct Seeded {
    seed: u64,
    current: RngDraws<SmallRng>,
}

impl Seeded {
    pub fn new(seed: u64) -> Self {
        Seeded {
            seed,
            current: RngDraws(SmallRng::seed_from_u64(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn key(&self, agent: AgentId, t: u64, site: Site) -> u64 {
        let side = match agent.side {
            Side::Proposer => 0u64,
            Side::Acceptor => 1,
        };
        let site = match site {
            Site::Act => 0u64,
            Site::Update => 1,
        };
        let tag = (agent.index as u64) << 2 | side << 1 | site;
        mix(mix(self.seed ^ mix(t)) ^ tag)
    }
}

impl RandomSource for Seeded {
    fn stream(&mut self, agent: AgentId, t: u64, site: Site) -> &mut dyn Draws {
        self.current = RngDraws(SmallRng::seed_from_u64(self.key(agent, t, site)));
        &mut self.current
    }
}

/// A unit draw just below one: never experiments, never turns an exploiting
/// acceptor hopeful (unless the acceptance probability is one).
pub const QUIET_UNIT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Default)]
pub struct ScriptedDraws {
    units: VecDeque<f64>,
    belows: VecDeque<usize>,
}

impl Draws for ScriptedDraws {
    fn unit(&mut self) -> f64 {
        self.units.pop_front().unwrap_or(QUIET_UNIT)
    }

    fn below(&mut self, n: usize) -> usize {
        let k = self.belows.pop_front().unwrap_or(0);
        assert!(k < n, "scripted choice {k} out of range 0..{n}");
        k
    }
}

/// Replays queued draws per `(agent, t, site)`; unscripted addresses get
/// [`QUIET_UNIT`] and index `0`.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    queues: HashMap<(AgentId, u64, Site), ScriptedDraws>,
    fallback: ScriptedDraws,
}

impl Scripted {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_unit(&mut self, agent: AgentId, t: u64, site: Site, x: f64) -> &mut Self {
        self.queues.entry((agent, t, site)).or_default().units.push_back(x);
        self
    }

    pub fn push_below(&mut self, agent: AgentId, t: u64, site: Site, k: usize) -> &mut Self {
        self.queues.entry((agent, t, site)).or_default().belows.push_back(k);
        self
    }

    /// Proposer `i` experiments at round `t` by proposing to acceptor `j`.
    pub fn experiment(&mut self, t: u64, i: usize, j: usize, epsilon: f64) -> &mut Self {
        let agent = AgentId::proposer(i);
        self.push_unit(agent, t, Site::Act, epsilon * epsilon + 0.5 * epsilon)
            .push_below(agent, t, Site::Act, j)
    }

    /// Proposer `i` stays unmatched at round `t`.
    pub fn abstain(&mut self, t: u64, i: usize) -> &mut Self {
        self.push_unit(AgentId::proposer(i), t, Site::Act, 0.0)
    }

    /// An exploiting acceptor `j` takes the hopeful branch at round `t`.
    pub fn hop(&mut self, t: u64, j: usize) -> &mut Self {
        self.push_unit(AgentId::acceptor(j), t, Site::Update, 0.0)
    }
}

impl RandomSource for Scripted {
    fn stream(&mut self, agent: AgentId, t: u64, site: Site) -> &mut dyn Draws {
        match self.queues.get_mut(&(agent, t, site)) {
            Some(q) => q,
            None => {
                self.fallback = ScriptedDraws::default();
                &mut self.fallback
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_depend_only_on_address() {
        let mut a = Seeded::new(5);
        let mut b = Seeded::new(5);
        let x = a.stream(AgentId::proposer(1), 7, Site::Act).unit();
        b.stream(AgentId::acceptor(0), 3, Site::Update).unit();
        let y = b.stream(AgentId::proposer(1), 7, Site::Act).unit();
        assert_eq!(x, y);
        let z = a.stream(AgentId::proposer(1), 8, Site::Act).unit();
        assert_ne!(x, z);
        let w = Seeded::new(6).stream(AgentId::proposer(1), 7, Site::Act).unit();
        assert_ne!(x, w);
    }

    #[test]
    fn scripted_replays_then_goes_quiet() {
        let mut s = Scripted::new();
        s.abstain(2, 0);
        assert_eq!(s.stream(AgentId::proposer(0), 2, Site::Act).unit(), 0.0);
        assert_eq!(s.stream(AgentId::proposer(0), 2, Site::Act).unit(), QUIET_UNIT);
        assert_eq!(s.stream(AgentId::proposer(0), 1, Site::Act).below(3), 0);
    }

    #[test]
    fn replication_seeds_differ() {
        assert_ne!(replication_seed(1, 0), replication_seed(1, 1));
        assert_eq!(replication_seed(1, 4), replication_seed(1, 4));
    }
}
