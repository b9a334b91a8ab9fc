//! ECV selection at a relay.
//!
//! The optimum ECV minimises `a^T G a` over nonzero integer vectors. The
//! search space is cut down in stages:
//!
//! 1. vectors with `||a||^2 >= 1 + ||g||^2` have zero rate;
//! 2. the optimum's signs follow the channel's signs, so the search runs over
//!    nonnegative vectors against `|g|`;
//! 3. vectors with a common factor are beaten by their reduced form;
//! 4. a vector whose `g_min^2` exceeds `||g||^2` cannot be optimal.
//!
//! CMF(K) replaces the whole search by a fixed list of `K` candidates.

mod gmin;

pub use gmin::{
    build_gmin_table, build_gmin_table_with, gmin, GminEntry, GminSolver, GminTable, ANGULAR_GRID,
    DEFAULT_TABLE_CAP, GMIN_SLACK,
};

use crate::error::{CmfError, Result};
use crate::rate::{canonicalize, Ecv, QuadraticForm, Rate, ScaledChannel};

/// Outcome of ECV selection at one relay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelayDecision {
    /// Canonical form of the selected ECV.
    pub ecv: Ecv,
    pub rate: Rate,
}

/// `1 + ||g||^2`; every ECV at or beyond this squared norm has rate zero.
pub fn ball_radius_sq(g: ScaledChannel) -> f64 {
    1.0 + g.norm_sq()
}

/// Which pruning stages to apply on top of the candidate ball
/// `||a||^2 < 1 + ||g||^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pruning {
    pub sign: bool,
    pub coprime: bool,
    pub gmin: bool,
}

impl Pruning {
    pub const NONE: Pruning = Pruning {
        sign: false,
        coprime: false,
        gmin: false,
    };
    pub const ALL: Pruning = Pruning {
        sign: true,
        coprime: true,
        gmin: true,
    };

    /// Stages applied cumulatively: 1 ball only, 2 adds sign, 3 adds
    /// coprimality, 4 adds `g_min`.
    pub fn through(stage: u8) -> Pruning {
        Pruning {
            sign: stage >= 2,
            coprime: stage >= 3,
            gmin: stage >= 4,
        }
    }
}

fn signum(x: f64) -> i64 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Moves a nonnegative vector found against `|g|` into the frame of `g`.
fn orient(e: Ecv, g: ScaledChannel) -> Ecv {
    Ecv::new(signum(g.g1) * e.a1, signum(g.g2) * e.a2)
}

/// Lists the search space of the optimum ECV after the requested pruning.
///
/// With sign pruning the vectors are returned already oriented to match the
/// signs of `g` (and are zero wherever `g` is). Order: ascending `||a||^2`,
/// then lexicographic.
pub fn enumerate_candidates(
    g: ScaledChannel,
    pruning: Pruning,
    table: Option<&GminTable>,
) -> Result<Vec<Ecv>> {
    let table = match (pruning.gmin, table) {
        (true, None) => {
            return Err(CmfError::InvalidConfig(
                "g_min pruning requires a g_min table".into(),
            ))
        }
        (true, Some(t)) if g.norm_sq() > t.cap() => {
            return Err(CmfError::TableTooShort {
                norm_sq: g.norm_sq(),
                cap: t.cap(),
            })
        }
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };

    let radius = ball_radius_sq(g);
    let bound = radius.sqrt().ceil() as i64;
    let range = |on_axis: bool| {
        if !pruning.sign {
            -bound..=bound
        } else if on_axis {
            0..=0
        } else {
            0..=bound
        }
    };
    let limit = g.norm_sq() * (1.0 + GMIN_SLACK);
    let mut out = Vec::new();
    for x in range(g.g1 == 0.0) {
        for y in range(g.g2 == 0.0) {
            let a = Ecv::new(x, y);
            if a.is_zero() || (a.norm_sq() as f64) >= radius {
                continue;
            }
            if pruning.coprime && a.gcd() != 1 {
                continue;
            }
            if let Some(t) = table {
                match t.gmin_sq(a) {
                    Some(v) if v <= limit => {}
                    _ => continue,
                }
            }
            out.push(if pruning.sign { orient(a, g) } else { a });
        }
    }
    out.sort_by_key(|a| (a.norm_sq(), *a));
    Ok(out)
}

/// Selection key: smallest quadratic form, then smallest norm, then
/// lexicographically smallest canonical form.
fn better(form: &QuadraticForm, a: Ecv, best: Option<(f64, Ecv)>) -> Option<(f64, Ecv)> {
    let q = form.eval(a);
    let ca = canonicalize(a).ok()?;
    match best {
        None => Some((q, ca)),
        Some((bq, bc)) => {
            let wins = q < bq
                || (q == bq && (ca.norm_sq() < bc.norm_sq() || (ca.norm_sq() == bc.norm_sq() && ca < bc)));
            Some(if wins { (q, ca) } else { (bq, bc) })
        }
    }
}

/// Exact optimum ECV for channel `g`.
///
/// Uses the table prefix (all pruning stages) when `||g||^2` is within the table's
/// cap and falls back to ball, sign and coprime enumeration otherwise. A zero channel
/// yields `[1,0]` at rate zero.
pub fn solve_optimal(g: ScaledChannel, table: &GminTable) -> RelayDecision {
    let form = g.form();
    let mut best = None;
    if g.norm_sq() <= table.cap() {
        for entry in table.candidates_for(g.norm_sq()) {
            let e = entry.ecv;
            if (g.g1 == 0.0 && e.a1 != 0) || (g.g2 == 0.0 && e.a2 != 0) {
                continue;
            }
            best = better(&form, orient(e, g), best);
        }
    } else {
        let pruning = Pruning {
            sign: true,
            coprime: true,
            gmin: false,
        };
        // Cannot fail without g_min pruning.
        for a in enumerate_candidates(g, pruning, None).unwrap_or_default() {
            best = better(&form, a, best);
        }
    }
    match best {
        Some((_, ecv)) => RelayDecision {
            ecv,
            rate: form.rate(ecv),
        },
        None => RelayDecision {
            ecv: Ecv::new(1, 0),
            rate: Rate(0.0),
        },
    }
}

/// The search list `S_K` of CMF(K).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    ecvs: Vec<Ecv>,
}

impl CandidateSet {
    pub fn new(ecvs: Vec<Ecv>) -> Result<Self> {
        let bad = |msg: String| Err(CmfError::InvalidCandidateSet(msg));
        if ecvs.len() < 2 {
            return bad(format!("need at least 2 candidates, got {}", ecvs.len()));
        }
        if ecvs[0] != Ecv::new(1, 0) || ecvs[1] != Ecv::new(0, 1) {
            return bad("candidate list must start with [1,0], [0,1]".into());
        }
        for (i, e) in ecvs.iter().enumerate() {
            if !e.is_canonical() {
                return bad(format!("{e} is not in canonical form"));
            }
            if ecvs[..i].contains(e) {
                return bad(format!("{e} appears twice"));
            }
        }
        Ok(Self { ecvs })
    }

    /// The first `k` entries of a `g_min` table.
    pub fn from_table(table: &GminTable, k: usize) -> Result<Self> {
        if k > table.len() {
            return Err(CmfError::InvalidCandidateSet(format!(
                "table has {} entries, {k} requested",
                table.len()
            )));
        }
        Self::new(table.entries()[..k].iter().map(|e| e.ecv).collect())
    }

    /// `S_K` built from a freshly computed table just large enough for `k`.
    pub fn first(k: usize) -> Result<Self> {
        let mut cap = 4.0;
        loop {
            let table = build_gmin_table(cap)?;
            if table.len() >= k || cap > 1e5 {
                return Self::from_table(&table, k);
            }
            cap *= 4.0;
        }
    }

    pub fn ecvs(&self) -> &[Ecv] {
        &self.ecvs
    }

    pub fn len(&self) -> usize {
        self.ecvs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ecvs.is_empty()
    }

    pub fn index_of(&self, e: Ecv) -> Option<usize> {
        self.ecvs.iter().position(|&x| x == e)
    }
}

/// CMF(K) selection: the candidate with the smallest quadratic form, earliest
/// in the list on ties. Candidates are oriented to the signs of `g`, which is
/// the identity for nonnegative channels.
pub fn solve_simplified(g: ScaledChannel, set: &CandidateSet) -> RelayDecision {
    let form = g.form();
    let mut best = orient(set.ecvs[0], g);
    let mut best_q = form.eval(best);
    for &e in &set.ecvs[1..] {
        let a = orient(e, g);
        let q = form.eval(a);
        if q < best_q {
            best = a;
            best_q = q;
        }
    }
    let ecv = canonicalize(best).expect("candidate sets hold nonzero vectors");
    RelayDecision {
        ecv,
        rate: Rate::from_quad_form(best_q),
    }
}
