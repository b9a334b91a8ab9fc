//! Exact outage analysis of CMF(K) under Rayleigh fading.
//!
//! The scaled gains `g_1, g_2` are independent with densities
//! `f(g) = (2 g / P) exp(-g^2 / P)` on `g >= 0`. In polar coordinates
//! `g = r (cos th, sin th)` each candidate's quadratic form is affine in
//! `t = r^2 / (1 + r^2)`, so along a ray the selection regions `D_k` and the
//! outage regions `O_k` are unions of `t`-intervals found by comparing the
//! forms directly, and the radial integral of the density has a closed form.
//! Only the angular integral is numeric.

mod compositions;
mod quadrature;

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

pub use compositions::{
    composition_count, enumerate_compositions, enumerate_compositions_capped, multinomial, Compositions,
    DEFAULT_COMPOSITION_CAP,
};
pub use quadrature::{integrate, Integral};

use crate::error::{CmfError, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::rate::{Ecv, Rate, SourcePowers};
use crate::search::CandidateSet;

/// Absolute tolerance of the angular integral.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;

/// Selection probabilities below this are treated as "never selected".
pub const DEGENERATE_SELECTION: f64 = 1e-12;

/// Independent Rayleigh fading on both links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadingModel {
    powers: SourcePowers,
}

impl FadingModel {
    pub fn new(powers: SourcePowers) -> Self {
        Self { powers }
    }

    pub fn powers(&self) -> SourcePowers {
        self.powers
    }

    /// Joint density of `(g1, g2)` on the nonnegative quadrant.
    pub fn density(&self, g1: f64, g2: f64) -> f64 {
        if g1 < 0.0 || g2 < 0.0 {
            return 0.0;
        }
        let (p1, p2) = (self.powers.p1(), self.powers.p2());
        (2.0 * g1 / p1) * (-g1 * g1 / p1).exp() * (2.0 * g2 / p2) * (-g2 * g2 / p2).exp()
    }
}

/// Per-candidate selection and conditional outage probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionProfile {
    pub ecvs: Vec<Ecv>,
    /// `P_k^Sel`.
    pub probs: Vec<f64>,
    /// `Pr{g in O_k and D_k}`.
    pub joint_outage: Vec<f64>,
    /// `P_Out|e_k`; 1 for degenerate (never selected) candidates.
    pub cond_outage: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub target_rate: Rate,
    pub powers: SourcePowers,
    /// Quadrature error estimate (absolute, per component).
    pub error_estimate: f64,
}

/// Probability mass of the ray segment `t in [ta, tb]` at one angle,
/// without the angular factor `4 cs / (P1 P2)`.
///
/// With `x = r^2 = t / (1 - t)`:
/// `int r^3 exp(-w r^2) dr = [(1 + w x) exp(-w x)] / (2 w^2)` between the ends.
fn radial_mass(w: f64, ta: f64, tb: f64) -> f64 {
    let tail = |t: f64| {
        if t >= 1.0 {
            0.0
        } else {
            let x = t / (1.0 - t);
            (1.0 + w * x) * (-w * x).exp()
        }
    };
    (tail(ta) - tail(tb)) / (2.0 * w * w)
}

struct RayIntegrand<'a> {
    norms: Vec<f64>,
    ecvs: &'a [Ecv],
    p1: f64,
    p2: f64,
    threshold: f64,
}

impl RayIntegrand<'_> {
    /// Writes `[sel_1..sel_K, out_1..out_K]` densities at angle `theta`.
    fn eval(&self, theta: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let k = self.ecvs.len();
        let (s, c) = theta.sin_cos();
        let angular = 4.0 * c * s / (self.p1 * self.p2);
        if angular <= 0.0 {
            return;
        }
        let w = c * c / self.p1 + s * s / self.p2;
        let slopes: Vec<f64> = self
            .ecvs
            .iter()
            .map(|e| {
                let p = e.a1 as f64 * c + e.a2 as f64 * s;
                p * p
            })
            .collect();
        let form = |i: usize, t: f64| self.norms[i] - t * slopes[i];

        let mut cuts = vec![0.0, 1.0];
        for i in 0..k {
            for j in (i + 1)..k {
                let ds = slopes[i] - slopes[j];
                if ds != 0.0 {
                    let t = (self.norms[i] - self.norms[j]) / ds;
                    if t > 0.0 && t < 1.0 {
                        cuts.push(t);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        for seg in cuts.windows(2) {
            let (ta, tb) = (seg[0], seg[1]);
            if tb <= ta {
                continue;
            }
            let mid = 0.5 * (ta + tb);
            let mut win = 0;
            let mut best = form(0, mid);
            for i in 1..k {
                let q = form(i, mid);
                if q < best {
                    best = q;
                    win = i;
                }
            }
            out[win] += angular * radial_mass(w, ta, tb);

            // Outage while the winner's form stays above the threshold.
            let out_end = if slopes[win] > 0.0 {
                ((self.norms[win] - self.threshold) / slopes[win]).clamp(ta, tb)
            } else if self.norms[win] > self.threshold {
                tb
            } else {
                ta
            };
            if out_end > ta {
                out[k + win] += angular * radial_mass(w, ta, out_end);
            }
        }
    }
}

impl SelectionProfile {
    pub fn compute(set: &CandidateSet, fm: &FadingModel, target_rate: Rate) -> Result<Self> {
        let ecvs = set.ecvs();
        if ecvs.iter().any(|e| e.a1 < 0 || e.a2 < 0) {
            return Err(CmfError::InvalidCandidateSet(
                "analysis assumes nonnegative candidates".into(),
            ));
        }
        let k = ecvs.len();
        let integrand = RayIntegrand {
            norms: ecvs.iter().map(|e| e.norm_sq() as f64).collect(),
            ecvs,
            p1: fm.powers.p1(),
            p2: fm.powers.p2(),
            threshold: target_rate.quad_form_threshold(),
        };
        let result = integrate(
            |th, out| integrand.eval(th, out),
            0.0,
            FRAC_PI_2,
            2 * k,
            QUADRATURE_TOLERANCE,
            MAX_INTERVALS,
        )?;
        let probs: Vec<f64> = result.values[..k].iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let joint: Vec<f64> = result.values[k..].iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let degenerate: Vec<bool> = probs.iter().map(|&p| p < DEGENERATE_SELECTION).collect();
        let cond_outage = probs
            .iter()
            .zip(&joint)
            .zip(&degenerate)
            .map(|((&p, &j), &d)| if d { 1.0 } else { (j / p).clamp(0.0, 1.0) })
            .collect();
        Ok(Self {
            ecvs: ecvs.to_vec(),
            probs,
            joint_outage: joint,
            cond_outage,
            degenerate,
            target_rate,
            powers: fm.powers,
            error_estimate: result.error,
        })
    }

    pub fn k(&self) -> usize {
        self.ecvs.len()
    }

    /// `sum_k P_k^Sel * P_Out|e_k`.
    pub fn relay_outage(&self) -> f64 {
        let terms: Vec<f64> = self
            .probs
            .iter()
            .zip(&self.cond_outage)
            .map(|(p, c)| p * c)
            .collect();
        pairwise_sum(&terms).clamp(0.0, 1.0)
    }

    /// `sum_k (P_k^Sel)^M`: every relay picked the same ECV.
    pub fn rank_failure(&self, m_relays: u32) -> Result<f64> {
        check_relays(m_relays)?;
        Ok(rank_failure_from(&self.probs, m_relays))
    }

    pub fn system_outage(&self, m_relays: u32, exec: Execution) -> Result<f64> {
        check_relays(m_relays)?;
        system_outage_from(
            &self.probs,
            &self.cond_outage,
            m_relays,
            DEFAULT_COMPOSITION_CAP,
            exec,
        )
    }
}

fn check_relays(m_relays: u32) -> Result<()> {
    if m_relays < 2 {
        return Err(CmfError::InvalidConfig(format!(
            "need at least 2 relays, got {m_relays}"
        )));
    }
    Ok(())
}

fn rank_failure_from(probs: &[f64], m_relays: u32) -> f64 {
    let terms: Vec<f64> = probs.iter().map(|p| p.powi(m_relays as i32)).collect();
    pairwise_sum(&terms).clamp(0.0, 1.0)
}

/// System outage from selection probabilities and conditional outages.
///
/// Sums over all group-size vectors `(n_1..n_K)`: the multinomial weight
/// times the probability that at most one group's best rate reaches the
/// target, `prod c_k^{n_k} + sum_k (1 - c_k^{n_k}) prod_{j != k} c_j^{n_j}`,
/// with `c^0 = 1` for empty groups.
pub fn system_outage_from(
    probs: &[f64],
    cond_outage: &[f64],
    m_relays: u32,
    cap: u128,
    exec: Execution,
) -> Result<f64> {
    let k = probs.len();
    if k < 2 || cond_outage.len() != k {
        return Err(CmfError::InvalidConfig(format!(
            "need matching profiles with K >= 2, got {} and {}",
            k,
            cond_outage.len()
        )));
    }
    let compositions: Vec<Vec<u32>> = enumerate_compositions_capped(m_relays, k as u32, cap)?.collect();
    let terms = exec.map_collect(&compositions, |n| {
        let weight = multinomial(n)
            * probs
                .iter()
                .zip(n)
                .map(|(p, &c)| p.powi(c as i32))
                .product::<f64>();
        if weight == 0.0 {
            return 0.0;
        }
        let below: Vec<f64> = cond_outage
            .iter()
            .zip(n)
            .map(|(c, &cnt)| c.powi(cnt as i32))
            .collect();
        let all_below: f64 = below.iter().product();
        let one_above: f64 = (0..k)
            .map(|i| {
                let others: f64 = (0..k).filter(|&j| j != i).map(|j| below[j]).product();
                (1.0 - below[i]) * others
            })
            .sum();
        weight * (all_below + one_above)
    });
    Ok(pairwise_sum(&terms).clamp(0.0, 1.0))
}

/// End-to-end outage summary for CMF(K).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutageReport {
    pub relay_outage: f64,
    pub rank_failure: f64,
    pub system_outage: f64,
    pub m_relays: u32,
    pub k: usize,
    pub p1: f64,
    pub p2: f64,
    pub target_rate: f64,
}

pub fn selection_probability(set: &CandidateSet, k: usize, fm: &FadingModel) -> Result<f64> {
    check_index(set, k)?;
    Ok(SelectionProfile::compute(set, fm, Rate(0.0))?.probs[k])
}

/// `P_Out|e_k`; degenerate candidates report 1.
pub fn conditional_outage(set: &CandidateSet, k: usize, fm: &FadingModel, rt: Rate) -> Result<f64> {
    check_index(set, k)?;
    Ok(SelectionProfile::compute(set, fm, rt)?.cond_outage[k])
}

pub fn relay_outage(set: &CandidateSet, fm: &FadingModel, rt: Rate) -> Result<f64> {
    Ok(SelectionProfile::compute(set, fm, rt)?.relay_outage())
}

pub fn rank_failure_probability(set: &CandidateSet, fm: &FadingModel, m_relays: u32) -> Result<f64> {
    SelectionProfile::compute(set, fm, Rate(0.0))?.rank_failure(m_relays)
}

pub fn system_outage(set: &CandidateSet, fm: &FadingModel, m_relays: u32, rt: Rate) -> Result<OutageReport> {
    let profile = SelectionProfile::compute(set, fm, rt)?;
    report_from_profile(&profile, m_relays, Execution::default())
}

pub fn report_from_profile(
    profile: &SelectionProfile,
    m_relays: u32,
    exec: Execution,
) -> Result<OutageReport> {
    Ok(OutageReport {
        relay_outage: profile.relay_outage(),
        rank_failure: profile.rank_failure(m_relays)?,
        system_outage: profile.system_outage(m_relays, exec)?,
        m_relays,
        k: profile.k(),
        p1: profile.powers.p1(),
        p2: profile.powers.p2(),
        target_rate: profile.target_rate.value(),
    })
}

fn check_index(set: &CandidateSet, k: usize) -> Result<()> {
    if k >= set.len() {
        return Err(CmfError::InvalidConfig(format!(
            "candidate index {k} out of range for K = {}",
            set.len()
        )));
    }
    Ok(())
}
