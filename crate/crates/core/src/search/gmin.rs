//! Minimum channel norm at which an ECV can be the optimal choice, and the
//! sorted table of those values.
//!
//! Along a ray `g = r u` (unit `u`) every quadratic form is affine in
//! `t = r^2 / (1 + r^2)`:
//!
//! ```text
//! a^T G a = ||a||^2 - t (a.u)^2
//! ```
//!
//! and a competitor `b` enters the candidate ball `||b||^2 <= 1 + r^2` exactly
//! when `t >= 1 - 1/||b||^2`. So for one direction the feasible `t` set is an
//! intersection of half-lines, updated each time a new norm shell activates,
//! and its smallest element is found exactly. The outer minimisation over the
//! direction is a grid sweep followed by zooming in on the best local minima.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use crate::error::{CmfError, Result};
use crate::exec::Execution;
use crate::rate::Ecv;

/// Directions in the initial angular sweep over `[0, pi/2]`.
pub const ANGULAR_GRID: usize = 2048;

/// Default table cap, covering sum SNRs up to about 33 dB.
pub const DEFAULT_TABLE_CAP: f64 = 2200.0;

/// Relative slack used when comparing a channel's sum SNR against tabulated
/// `g_min^2` values. Tabulated values are upper bounds accurate to far better
/// than this.
pub const GMIN_SLACK: f64 = 1e-9;

const ZOOM_POINTS: usize = 16;
const ZOOM_BASINS: usize = 8;
const ZOOM_MAX_ROUNDS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GminEntry {
    pub ecv: Ecv,
    pub gmin_sq: f64,
}

/// `g_min^2` for every nonnegative primitive ECV whose value does not exceed
/// `cap`, sorted ascending by value, then by norm, then with the larger first
/// component first (so `[1,0]` precedes `[0,1]` and `[2,1]` precedes `[1,2]`).
#[derive(Clone, Debug, PartialEq)]
pub struct GminTable {
    cap: f64,
    entries: Vec<GminEntry>,
}

impl GminTable {
    /// Builds a table from precomputed entries, sorting them into table order.
    pub fn from_entries(cap: f64, mut entries: Vec<GminEntry>) -> Self {
        entries.sort_by(table_order);
        Self { cap, entries }
    }

    /// Largest sum SNR for which the table is complete.
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn entries(&self) -> &[GminEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries that can be optimal for a channel with sum SNR `norm_sq`.
    pub fn candidates_for(&self, norm_sq: f64) -> &[GminEntry] {
        let limit = norm_sq * (1.0 + GMIN_SLACK);
        let n = self.entries.partition_point(|e| e.gmin_sq <= limit);
        &self.entries[..n]
    }

    /// Tabulated `g_min^2` of `|a|`, or `None` when `a` is not in the table
    /// (so it cannot be optimal anywhere below the cap).
    pub fn gmin_sq(&self, a: Ecv) -> Option<f64> {
        let key = a.abs();
        self.entries.iter().find(|e| e.ecv == key).map(|e| e.gmin_sq)
    }

    /// CSV with columns `k,a1,a2,gmin_sq`, values to 6 decimal places.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "a1", "a2", "gmin_sq"])?;
        for (k, e) in self.entries.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                e.ecv.a1.to_string(),
                e.ecv.a2.to_string(),
                format!("{:.6}", e.gmin_sq),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn table_order(x: &GminEntry, y: &GminEntry) -> std::cmp::Ordering {
    x.gmin_sq
        .total_cmp(&y.gmin_sq)
        .then(x.ecv.norm_sq().cmp(&y.ecv.norm_sq()))
        .then(y.ecv.cmp(&x.ecv))
}

/// Shared state for `g_min` evaluations up to a given sum-SNR cap.
#[derive(Clone, Debug)]
pub struct GminSolver {
    cap_sq: f64,
    t_cap: f64,
    grid: usize,
    /// Nonnegative primitive competitors grouped into shells of equal norm.
    shells: Vec<Shell>,
}

#[derive(Clone, Debug)]
struct Shell {
    norm_sq: i64,
    /// `t` at which the shell enters the candidate ball.
    activation: f64,
    members: Vec<Ecv>,
}

impl GminSolver {
    /// Solver for channels with `||g||^2 <= cap_sq`.
    pub fn new(cap_sq: f64) -> Self {
        Self::with_grid(cap_sq, ANGULAR_GRID)
    }

    pub fn with_grid(cap_sq: f64, grid: usize) -> Self {
        let cap_sq = cap_sq.max(0.0);
        let shells = competitor_shells(1.0 + cap_sq);
        Self {
            cap_sq,
            t_cap: cap_sq / (1.0 + cap_sq),
            grid: grid.max(2),
            shells,
        }
    }

    pub fn cap_sq(&self) -> f64 {
        self.cap_sq
    }

    /// `g_min(e)^2`, or `f64::INFINITY` when no channel with
    /// `||g||^2 <= cap_sq` makes `e` optimal.
    pub fn gmin_sq(&self, e: Ecv) -> Result<f64> {
        if e.is_zero() {
            return Err(CmfError::ZeroEcv);
        }
        if e.gcd() != 1 {
            // A scaled-down copy always beats it.
            return Ok(f64::INFINITY);
        }
        let e = e.abs();
        let t = self.min_t(e);
        Ok(if t.is_finite() {
            t / (1.0 - t)
        } else {
            f64::INFINITY
        })
    }

    fn min_t(&self, e: Ecv) -> f64 {
        let eval = |theta: f64| self.min_t_along(e, theta).unwrap_or(f64::INFINITY);
        let step = FRAC_PI_2 / self.grid as f64;
        let thetas: Vec<f64> = (0..=self.grid).map(|i| i as f64 * step).collect();
        let values: Vec<f64> = thetas.iter().map(|&th| eval(th)).collect();

        let mut basins: Vec<usize> = (0..=self.grid)
            .filter(|&i| {
                let v = values[i];
                v.is_finite() && (i == 0 || v <= values[i - 1]) && (i == self.grid || v <= values[i + 1])
            })
            .collect();
        basins.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        basins.truncate(ZOOM_BASINS);

        let mut windows: Vec<(f64, f64)> = basins
            .iter()
            .map(|&i| (thetas[i.saturating_sub(1)], thetas[(i + 1).min(self.grid)]))
            .collect();
        // The direction of `e` itself catches windows narrower than the grid.
        let own = (e.a2 as f64).atan2(e.a1 as f64);
        windows.push(((own - step).max(0.0), (own + step).min(FRAC_PI_2)));

        let mut best = basins.first().map_or(f64::INFINITY, |&i| values[i]);
        for (mut lo, mut hi) in windows {
            for _ in 0..ZOOM_MAX_ROUNDS {
                if hi - lo < 1e-15 {
                    break;
                }
                let h = (hi - lo) / ZOOM_POINTS as f64;
                let mut arg = 0;
                let mut val = f64::INFINITY;
                for j in 0..=ZOOM_POINTS {
                    let v = eval(lo + j as f64 * h);
                    if v < val {
                        val = v;
                        arg = j;
                    }
                }
                if !val.is_finite() {
                    break;
                }
                best = best.min(val);
                let centre = lo + arg as f64 * h;
                lo = (centre - h).max(0.0);
                hi = (centre + h).min(FRAC_PI_2);
            }
        }
        best
    }

    /// Smallest `t` at which `e` beats every competitor inside the candidate
    /// ball along direction `theta`.
    fn min_t_along(&self, e: Ecv, theta: f64) -> Option<f64> {
        let (s, c) = theta.sin_cos();
        let proj = |a: Ecv| {
            let p = a.a1 as f64 * c + a.a2 as f64 * s;
            p * p
        };
        let e_norm = e.norm_sq() as f64;
        let e_proj = proj(e);
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;

        for (idx, shell) in self.shells.iter().enumerate() {
            if shell.activation > self.t_cap {
                break;
            }
            for &b in &shell.members {
                if b == e {
                    continue;
                }
                // ||e||^2 - t (e.u)^2 <= ||b||^2 - t (b.u)^2
                let offset = e_norm - shell.norm_sq as f64;
                let slope = e_proj - proj(b);
                if slope > 0.0 {
                    lo = lo.max(offset / slope);
                } else if slope < 0.0 {
                    hi = hi.min(offset / slope);
                } else if offset > 0.0 {
                    return None;
                }
            }
            // Constraints only accumulate, so an empty set stays empty.
            if lo > hi || lo > self.t_cap {
                return None;
            }
            let next = self.shells.get(idx + 1).map_or(1.0, |sh| sh.activation);
            let candidate = lo.max(shell.activation);
            if candidate <= hi && candidate < next && candidate <= self.t_cap {
                return Some(candidate);
            }
        }
        None
    }
}

fn competitor_shells(max_norm_sq: f64) -> Vec<Shell> {
    let bound = max_norm_sq.sqrt().floor() as i64;
    let mut all: Vec<Ecv> = (0..=bound)
        .flat_map(|x| (0..=bound).map(move |y| Ecv::new(x, y)))
        .filter(|b| !b.is_zero() && b.gcd() == 1 && (b.norm_sq() as f64) <= max_norm_sq)
        .collect();
    all.sort_by_key(|b| (b.norm_sq(), *b));
    let mut shells: Vec<Shell> = Vec::new();
    for b in all {
        match shells.last_mut() {
            Some(sh) if sh.norm_sq == b.norm_sq() => sh.members.push(b),
            _ => shells.push(Shell {
                norm_sq: b.norm_sq(),
                activation: 1.0 - 1.0 / b.norm_sq() as f64,
                members: vec![b],
            }),
        }
    }
    shells
}

/// `||g_min(e)||`, searching channel norms up to `search_cap`. Returns
/// `f64::INFINITY` when `e` is not optimal for any channel below the cap.
pub fn gmin(e: Ecv, search_cap: f64) -> Result<f64> {
    if search_cap.is_nan() || search_cap < 0.0 {
        return Err(CmfError::InvalidConfig(format!(
            "search cap must be nonnegative, got {search_cap}"
        )));
    }
    Ok(GminSolver::new(search_cap * search_cap).gmin_sq(e)?.sqrt())
}

/// Builds the sorted `g_min^2` table for all ECVs with `g_min^2 <= max_gmin_sq`.
///
/// Each unordered pair is solved once and emitted in both orders, since a
/// coordinate swap of the ECV and the channel leaves every quadratic form
/// unchanged.
pub fn build_gmin_table(max_gmin_sq: f64) -> Result<GminTable> {
    build_gmin_table_with(max_gmin_sq, Execution::default())
}

pub fn build_gmin_table_with(max_gmin_sq: f64, exec: Execution) -> Result<GminTable> {
    if max_gmin_sq.is_nan() || max_gmin_sq <= 0.0 || !max_gmin_sq.is_finite() {
        return Err(CmfError::InvalidConfig(format!(
            "table cap must be positive and finite, got {max_gmin_sq}"
        )));
    }
    let solver = GminSolver::new(max_gmin_sq);
    // An ECV optimal at g has ||e||^2 <= 1 + ||g||^2.
    let bound = (1.0 + max_gmin_sq).sqrt().floor() as i64;
    let pairs: Vec<Ecv> = (0..=bound)
        .flat_map(|x| (0..=x).map(move |y| Ecv::new(x, y)))
        .filter(|e| !e.is_zero() && e.gcd() == 1 && (e.norm_sq() as f64) <= 1.0 + max_gmin_sq)
        .collect();
    let values = exec.map_collect(&pairs, |&e| solver.gmin_sq(e));
    let mut entries = Vec::new();
    for (e, v) in pairs.into_iter().zip(values) {
        let v = v?;
        if v <= max_gmin_sq {
            entries.push(GminEntry { ecv: e, gmin_sq: v });
            if e.permuted() != e {
                entries.push(GminEntry {
                    ecv: e.permuted(),
                    gmin_sq: v,
                });
            }
        }
    }
    Ok(GminTable::from_entries(max_gmin_sq, entries))
}
