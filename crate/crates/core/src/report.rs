//! Experiment sweeps and their CSV serialization.
//!
//! Every file starts with `#` lines echoing the resolved configuration,
//! followed by a header row and one row per grid point. Floats use six
//! significant digits. Nothing here depends on the thread count, so the same
//! spec and seed always produce the same bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::analysis::{report_from_profile, FadingModel, OutageReport, SelectionProfile};
use crate::error::{CmfError, Result};
use crate::exec::Execution;
use crate::rate::{Ecv, Rate, SourcePowers};
use crate::search::{build_gmin_table, CandidateSet, GminTable};
use crate::sim::{run_monte_carlo_with, MonteCarloResult, Selector, SimConfig, Strategy};

/// Formats `x` like C's `%g` with six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Inclusive SNR grid `start, start + step, ..., <= stop`.
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(CmfError::InvalidConfig(format!(
            "bad SNR grid start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// A resolved experiment: the cartesian product of its lists.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub snr_db: Vec<f64>,
    pub relays: Vec<u32>,
    pub strategies: Vec<Strategy>,
    pub target_rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub cee_sigma_sq: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CmfError::InvalidConfig(m.into()));
        if self.snr_db.is_empty() {
            return bad("empty SNR grid");
        }
        if self.relays.is_empty() {
            return bad("no relay counts given");
        }
        if self.strategies.is_empty() {
            return bad("no strategy given");
        }
        if self.cee_sigma_sq.is_empty() {
            return bad("no CEE variance given");
        }
        for &snr in &self.snr_db {
            for &m in &self.relays {
                for &strategy in &self.strategies {
                    for &s in &self.cee_sigma_sq {
                        self.config(snr, m, strategy, s)?.validate()?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn config(&self, snr_db: f64, m_relays: u32, strategy: Strategy, sigma_sq: f64) -> Result<SimConfig> {
        Ok(SimConfig {
            powers: SourcePowers::equal_db(snr_db)?,
            m_relays,
            strategy,
            target_rate: Rate(self.target_rate),
            trials: self.trials,
            seed: self.seed,
            cee_sigma_sq: sigma_sq,
        })
    }

    fn has_optimal(&self) -> bool {
        self.strategies.contains(&Strategy::Optimal)
    }

    /// One table large enough for every optimum configuration of the sweep.
    fn shared_table(&self) -> Result<Option<Arc<GminTable>>> {
        if !self.has_optimal() {
            return Ok(None);
        }
        let mut cap: f64 = 0.0;
        for &snr in &self.snr_db {
            for &s in &self.cee_sigma_sq {
                cap = cap.max(self.config(snr, 2, Strategy::Optimal, s)?.table_cap());
            }
        }
        Ok(Some(Arc::new(build_gmin_table(cap)?)))
    }

    /// `#` lines describing the sweep.
    pub fn header_lines(&self, command: &str) -> Vec<String> {
        let join = |v: Vec<String>| v.join(";");
        vec![
            format!("# command={command}"),
            format!(
                "# snr_db={}",
                join(self.snr_db.iter().map(|x| fmt_sig(*x)).collect())
            ),
            format!(
                "# relays={}",
                join(self.relays.iter().map(u32::to_string).collect())
            ),
            format!(
                "# strategies={}",
                join(self.strategies.iter().map(Strategy::to_string).collect())
            ),
            format!("# target_rate={}", fmt_sig(self.target_rate)),
            format!("# trials={}", self.trials),
            format!("# seed={}", self.seed),
            format!(
                "# sigma_e_sq={}",
                join(self.cee_sigma_sq.iter().map(|x| fmt_sig(*x)).collect())
            ),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutageRow {
    pub snr_db: f64,
    pub strategy: Strategy,
    pub m_relays: u32,
    pub target_rate: f64,
    pub sigma_e_sq: f64,
    /// CMF(K) without estimation error only.
    pub analytic: Option<OutageReport>,
    pub simulated: MonteCarloResult,
}

pub const OUTAGE_COLUMNS: [&str; 15] = [
    "snr_db",
    "strategy",
    "M",
    "R_t",
    "sigma_e_sq",
    "analytic_outage",
    "analytic_relay_outage",
    "analytic_rank_failure",
    "outage",
    "outage_se",
    "rank_failure",
    "rank_failure_se",
    "relay_outage",
    "relay_outage_se",
    "trials",
];

impl OutageRow {
    pub fn fields(&self) -> Vec<String> {
        let a =
            |f: fn(&OutageReport) -> f64| self.analytic.as_ref().map(|r| fmt_sig(f(r))).unwrap_or_default();
        let s = &self.simulated;
        vec![
            fmt_sig(self.snr_db),
            self.strategy.to_string(),
            self.m_relays.to_string(),
            fmt_sig(self.target_rate),
            fmt_sig(self.sigma_e_sq),
            a(|r| r.system_outage),
            a(|r| r.relay_outage),
            a(|r| r.rank_failure),
            fmt_sig(s.outage.value),
            fmt_sig(s.outage.std_error),
            fmt_sig(s.rank_failure.value),
            fmt_sig(s.rank_failure.std_error),
            fmt_sig(s.relay_outage.value),
            fmt_sig(s.relay_outage.std_error),
            s.outage.trials.to_string(),
        ]
    }
}

/// Cache of CMF(K) selection profiles keyed by `(snr index, K)`.
struct Profiles<'a> {
    spec: &'a SweepSpec,
    sets: BTreeMap<usize, CandidateSet>,
    cache: BTreeMap<(usize, usize), SelectionProfile>,
}

impl<'a> Profiles<'a> {
    fn new(spec: &'a SweepSpec) -> Self {
        Self {
            spec,
            sets: BTreeMap::new(),
            cache: BTreeMap::new(),
        }
    }

    fn set(&mut self, k: usize) -> Result<&CandidateSet> {
        if let std::collections::btree_map::Entry::Vacant(slot) = self.sets.entry(k) {
            slot.insert(CandidateSet::first(k)?);
        }
        Ok(&self.sets[&k])
    }

    fn get(&mut self, snr_idx: usize, k: usize) -> Result<&SelectionProfile> {
        if !self.cache.contains_key(&(snr_idx, k)) {
            let fm = FadingModel::new(SourcePowers::equal_db(self.spec.snr_db[snr_idx])?);
            let rt = Rate(self.spec.target_rate);
            let profile = SelectionProfile::compute(self.set(k)?, &fm, rt)?;
            self.cache.insert((snr_idx, k), profile);
        }
        Ok(&self.cache[&(snr_idx, k)])
    }
}

fn selector(strategy: Strategy, table: &Option<Arc<GminTable>>, sets: &mut Profiles) -> Result<Selector> {
    match (strategy, table) {
        (Strategy::Optimal, Some(t)) => Ok(Selector::Optimal(Arc::clone(t))),
        (Strategy::Optimal, None) => unreachable!("table is built whenever optimal is requested"),
        (Strategy::Simplified(k), _) => Ok(Selector::Simplified(sets.set(k)?.clone())),
    }
}

/// Runs every `(snr, M, strategy, sigma_e^2)` point in that nesting order.
pub fn run_outage_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<OutageRow>> {
    spec.validate()?;
    let table = spec.shared_table()?;
    let mut profiles = Profiles::new(spec);
    let mut rows = Vec::new();
    for (si, &snr) in spec.snr_db.iter().enumerate() {
        for &m in &spec.relays {
            for &strategy in &spec.strategies {
                let sel = selector(strategy, &table, &mut profiles)?;
                for &sigma in &spec.cee_sigma_sq {
                    let cfg = spec.config(snr, m, strategy, sigma)?;
                    let analytic = match strategy {
                        Strategy::Simplified(k) if sigma == 0.0 => {
                            Some(report_from_profile(profiles.get(si, k)?, m, exec)?)
                        }
                        _ => None,
                    };
                    rows.push(OutageRow {
                        snr_db: snr,
                        strategy,
                        m_relays: m,
                        target_rate: spec.target_rate,
                        sigma_e_sq: sigma,
                        analytic,
                        simulated: run_monte_carlo_with(&cfg, &sel, exec)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_outage_csv<W: Write>(
    mut out: W,
    spec: &SweepSpec,
    command: &str,
    rows: &[OutageRow],
) -> Result<()> {
    for line in spec.header_lines(command) {
        writeln!(out, "{line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTAGE_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRow {
    pub snr_db: f64,
    pub strategy: Strategy,
    pub ecv: Ecv,
    pub probability: f64,
    /// Zero for analytic rows.
    pub se: f64,
}

pub const SELECTION_COLUMNS: [&str; 5] = ["snr_db", "strategy", "ecv", "probability", "se"];

impl SelectionRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            fmt_sig(self.snr_db),
            self.strategy.to_string(),
            self.ecv.to_string(),
            fmt_sig(self.probability),
            fmt_sig(self.se),
        ]
    }
}

/// Selection probabilities per SNR: Monte Carlo histograms for the optimum
/// strategy (with `M = spec.relays[0]`, pooled over relays), analytic
/// `P_k^Sel` for CMF(K). Optimum rows follow table order.
pub fn run_selection_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SelectionRow>> {
    let spec = SweepSpec {
        cee_sigma_sq: vec![0.0],
        ..spec.clone()
    };
    spec.validate()?;
    let table = spec.shared_table()?;
    let mut profiles = Profiles::new(&spec);
    let mut rows = Vec::new();
    for (si, &snr) in spec.snr_db.iter().enumerate() {
        for &strategy in &spec.strategies {
            match strategy {
                Strategy::Simplified(k) => {
                    let p = profiles.get(si, k)?;
                    rows.extend(
                        p.ecvs
                            .iter()
                            .zip(&p.probs)
                            .map(|(&ecv, &probability)| SelectionRow {
                                snr_db: snr,
                                strategy,
                                ecv,
                                probability,
                                se: 0.0,
                            }),
                    );
                }
                Strategy::Optimal => {
                    let t = table.as_ref().expect("table built for optimal");
                    let cfg = spec.config(snr, spec.relays[0], strategy, 0.0)?;
                    let mc = run_monte_carlo_with(&cfg, &Selector::Optimal(Arc::clone(t)), exec)?;
                    let rank = |e: &Ecv| {
                        t.entries()
                            .iter()
                            .position(|x| x.ecv == e.abs())
                            .unwrap_or(usize::MAX)
                    };
                    let mut seen: Vec<Ecv> = mc.histogram.keys().copied().collect();
                    seen.sort_by_key(|e| (rank(e), *e));
                    rows.extend(seen.into_iter().map(|ecv| {
                        let est = mc.selection(ecv);
                        SelectionRow {
                            snr_db: snr,
                            strategy,
                            ecv,
                            probability: est.value,
                            se: est.std_error,
                        }
                    }));
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_selection_csv<W: Write>(mut out: W, spec: &SweepSpec, rows: &[SelectionRow]) -> Result<()> {
    for line in spec.header_lines("selection-prob") {
        writeln!(out, "{line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SELECTION_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}
