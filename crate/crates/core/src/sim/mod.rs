//! Seeded Monte Carlo simulation of the two-source, `M`-relay network.
//!
//! Each trial draws fresh block-fading channels, lets every relay pick an ECV
//! from its (possibly noisy) channel estimate, evaluates the realized rate on
//! the true channel, and asks whether the destination can find two
//! independent equations at the target rate. Trial `i` uses ChaCha stream `i`
//! under a key derived from the master seed, so results do not depend on how
//! trials are scheduled.

mod channel;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use channel::{apply_cee, complex_normal, draw_channels, RelayFading};

use crate::error::{CmfError, Result};
use crate::exec::Execution;
use crate::rate::{canonicalize, scaled_channel, Ecv, Rate, SourcePowers};
use crate::search::{
    build_gmin_table, solve_optimal, solve_simplified, CandidateSet, GminTable, RelayDecision,
    DEFAULT_TABLE_CAP,
};

/// Target rate used throughout the reference experiments.
pub const DEFAULT_TARGET_RATE: f64 = 0.5;
pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// Sum SNR quantile covered by the optimum solver's table: `Pr{||g||^2 > x} =
/// exp(-x/P) (1 + x/P)` for equal powers, which is `1e-9` at `x = 23.95 P`.
const SUM_SNR_TAIL: f64 = 23.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Optimal,
    /// CMF(K).
    Simplified(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Optimal => f.write_str("optimal"),
            Strategy::Simplified(k) => write!(f, "cmf{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub powers: SourcePowers,
    pub m_relays: u32,
    pub strategy: Strategy,
    pub target_rate: Rate,
    pub trials: u64,
    pub seed: u64,
    /// Channel-estimation error variance; 0 disables it.
    pub cee_sigma_sq: f64,
}

impl SimConfig {
    /// Equal per-source SNR with the default target rate, trial count and no
    /// estimation error.
    pub fn equal_snr(snr_db: f64, m_relays: u32, strategy: Strategy, seed: u64) -> Result<Self> {
        let cfg = Self {
            powers: SourcePowers::equal_db(snr_db)?,
            m_relays,
            strategy,
            target_rate: Rate(DEFAULT_TARGET_RATE),
            trials: DEFAULT_TRIALS,
            seed,
            cee_sigma_sq: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CmfError::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.m_relays < 2 {
            return bad(format!("need at least 2 relays, got {}", self.m_relays));
        }
        if !self.cee_sigma_sq.is_finite() || self.cee_sigma_sq < 0.0 {
            return bad(format!("CEE variance must be >= 0, got {}", self.cee_sigma_sq));
        }
        if self.target_rate.value().is_nan() || self.target_rate.value() < 0.0 {
            return bad(format!(
                "target rate must be >= 0, got {}",
                self.target_rate.value()
            ));
        }
        if let Strategy::Simplified(k) = self.strategy {
            if k < 2 {
                return bad(format!("CMF(K) needs K >= 2, got {k}"));
            }
        }
        Ok(())
    }

    /// Sum SNR (of the channel estimate) below which the optimum solver can
    /// rely on its table with overwhelming probability.
    pub fn table_cap(&self) -> f64 {
        let p = self.powers.p1().max(self.powers.p2());
        (SUM_SNR_TAIL * p * (1.0 + self.cee_sigma_sq)).max(DEFAULT_TABLE_CAP)
    }
}

/// ECV selection rule shared by all relays of a run.
#[derive(Clone, Debug)]
pub enum Selector {
    Optimal(Arc<GminTable>),
    Simplified(CandidateSet),
}

impl Selector {
    /// Builds the selector `cfg` needs. Optimum selection computes a table
    /// sized by [`SimConfig::table_cap`].
    pub fn for_config(cfg: &SimConfig) -> Result<Self> {
        match cfg.strategy {
            Strategy::Optimal => Ok(Selector::Optimal(Arc::new(build_gmin_table(cfg.table_cap())?))),
            Strategy::Simplified(k) => Ok(Selector::Simplified(CandidateSet::first(k)?)),
        }
    }

    /// Reuses `table` (for optimum selection) or builds `S_K` from it.
    pub fn from_table(strategy: Strategy, table: &Arc<GminTable>) -> Result<Self> {
        match strategy {
            Strategy::Optimal => Ok(Selector::Optimal(Arc::clone(table))),
            Strategy::Simplified(k) => Ok(Selector::Simplified(CandidateSet::from_table(table, k)?)),
        }
    }

    pub fn select(&self, g: crate::rate::ScaledChannel) -> RelayDecision {
        match self {
            Selector::Optimal(table) => solve_optimal(g, table),
            Selector::Simplified(set) => solve_simplified(g, set),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelayOutcome {
    /// Canonical ECV the relay chose.
    pub ecv: Ecv,
    /// Rate of that ECV on the true channel.
    pub rate: Rate,
    /// Rate the relay believed it would get, from its channel estimate.
    pub estimated_rate: Rate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub outage: bool,
    pub rank_failure: bool,
    pub relays: Vec<RelayOutcome>,
}

/// Destination decision from the relays' `(ECV, rate)` pairs.
///
/// Equations are grouped by canonical ECV (for two sources, two integer
/// vectors are dependent exactly when their canonical forms agree). Fewer
/// than two groups is a rank failure; otherwise the outcome is an outage when
/// the second-largest group-best rate is below `target`.
/// Returns `(outage, rank_failure)`.
pub fn destination_outcome(decisions: &[(Ecv, Rate)], target: Rate) -> Result<(bool, bool)> {
    let mut groups: Vec<(Ecv, f64)> = Vec::with_capacity(decisions.len());
    for &(ecv, rate) in decisions {
        let key = canonicalize(ecv)?;
        match groups.iter_mut().find(|(e, _)| *e == key) {
            Some((_, best)) => *best = best.max(rate.value()),
            None => groups.push((key, rate.value())),
        }
    }
    if groups.len() < 2 {
        return Ok((true, true));
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(_, r) in &groups {
        if r > first {
            second = first;
            first = r;
        } else if r > second {
            second = r;
        }
    }
    Ok((second < target.value(), false))
}

/// One network use: channels, relay selections and the destination outcome.
pub fn simulate_trial<R: rand::Rng + ?Sized>(
    rng: &mut R,
    cfg: &SimConfig,
    selector: &Selector,
) -> TrialOutcome {
    let m = cfg.m_relays as usize;
    let fading = draw_channels(rng, m);
    let estimates = apply_cee(rng, &fading, cfg.cee_sigma_sq);
    let relays: Vec<RelayOutcome> = fading
        .iter()
        .zip(&estimates)
        .map(|(f, est)| {
            let decision = selector.select(scaled_channel(*est, cfg.powers));
            let rate = if cfg.cee_sigma_sq == 0.0 {
                decision.rate
            } else {
                scaled_channel(f.gains(), cfg.powers).form().rate(decision.ecv)
            };
            RelayOutcome {
                ecv: decision.ecv,
                rate,
                estimated_rate: decision.rate,
            }
        })
        .collect();
    let pairs: Vec<(Ecv, Rate)> = relays.iter().map(|r| (r.ecv, r.rate)).collect();
    // Decisions are canonical and nonzero, so grouping cannot fail.
    let (outage, rank_failure) = destination_outcome(&pairs, cfg.target_rate).unwrap_or((true, true));
    TrialOutcome {
        outage,
        rank_failure,
        relays,
    }
}

/// A Bernoulli proportion with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl OutageEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let value = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        let std_error = if trials == 0 {
            0.0
        } else {
            (value * (1.0 - value) / trials as f64).sqrt()
        };
        Self {
            value,
            std_error,
            trials,
        }
    }
}

/// Per-ECV counts aggregated over all relays and trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EcvCounts {
    pub selected: u64,
    /// Selections whose realized rate fell below the target.
    pub outage: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloResult {
    pub config: SimConfig,
    pub outage: OutageEstimate,
    pub rank_failure: OutageEstimate,
    /// Per-relay outage over `trials * M` relay uses.
    pub relay_outage: OutageEstimate,
    pub histogram: BTreeMap<Ecv, EcvCounts>,
}

impl MonteCarloResult {
    pub fn relay_samples(&self) -> u64 {
        self.relay_outage.trials
    }

    /// Empirical probability that a relay selects `ecv`.
    pub fn selection(&self, ecv: Ecv) -> OutageEstimate {
        let hits = self.histogram.get(&ecv).map_or(0, |c| c.selected);
        OutageEstimate::from_counts(hits, self.relay_samples())
    }

    /// Empirical `Pr{rate < R_t | ecv selected}`.
    pub fn conditional_outage(&self, ecv: Ecv) -> OutageEstimate {
        let c = self.histogram.get(&ecv).copied().unwrap_or_default();
        OutageEstimate::from_counts(c.outage, c.selected)
    }
}

#[derive(Clone, Debug, Default)]
struct Tally {
    trials: u64,
    outage: u64,
    rank_failure: u64,
    relay_outage: u64,
    ecvs: Vec<(Ecv, EcvCounts)>,
}

impl Tally {
    fn add(&mut self, t: &TrialOutcome, target: Rate) {
        self.trials += 1;
        self.outage += u64::from(t.outage);
        self.rank_failure += u64::from(t.rank_failure);
        for r in &t.relays {
            let below = r.rate < target;
            self.relay_outage += u64::from(below);
            let slot = match self.ecvs.iter().position(|(e, _)| *e == r.ecv) {
                Some(i) => i,
                None => {
                    self.ecvs.push((r.ecv, EcvCounts::default()));
                    self.ecvs.len() - 1
                }
            };
            let c = &mut self.ecvs[slot].1;
            c.selected += 1;
            c.outage += u64::from(below);
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.outage += other.outage;
        self.rank_failure += other.rank_failure;
        self.relay_outage += other.relay_outage;
        for (e, c) in other.ecvs {
            match self.ecvs.iter_mut().find(|(x, _)| *x == e) {
                Some((_, mine)) => {
                    mine.selected += c.selected;
                    mine.outage += c.outage;
                }
                None => self.ecvs.push((e, c)),
            }
        }
        self
    }
}

fn stream_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    rand::RngCore::fill_bytes(&mut ChaCha8Rng::seed_from_u64(seed), &mut key);
    key
}

/// RNG for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    trial_rng_from_key(stream_key(seed), index)
}

fn trial_rng_from_key(key: [u8; 32], index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

pub fn run_monte_carlo(cfg: &SimConfig) -> Result<MonteCarloResult> {
    let selector = Selector::for_config(cfg)?;
    run_monte_carlo_with(cfg, &selector, Execution::default())
}

pub fn run_monte_carlo_with(
    cfg: &SimConfig,
    selector: &Selector,
    exec: Execution,
) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let key = stream_key(cfg.seed);
    let tally = exec.map_reduce(
        cfg.trials,
        Tally::default,
        |acc, i| {
            let mut rng = trial_rng_from_key(key, i);
            let t = simulate_trial(&mut rng, cfg, selector);
            acc.add(&t, cfg.target_rate);
        },
        Tally::merge,
    );
    let relay_samples = tally.trials * u64::from(cfg.m_relays);
    Ok(MonteCarloResult {
        config: *cfg,
        outage: OutageEstimate::from_counts(tally.outage, tally.trials),
        rank_failure: OutageEstimate::from_counts(tally.rank_failure, tally.trials),
        relay_outage: OutageEstimate::from_counts(tally.relay_outage, relay_samples),
        histogram: tally.ecvs.into_iter().collect(),
    })
}
