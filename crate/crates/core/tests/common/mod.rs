//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use cmf_core::{Ecv, ScaledChannel};
use rand::Rng;

/// `a^T (I - g g^T / (1 + |g|^2)) a`, expanded entry by entry.
pub fn quad(g: (f64, f64), a: (i64, i64)) -> f64 {
    let (g1, g2) = g;
    let d = 1.0 + g1 * g1 + g2 * g2;
    let (x, y) = (a.0 as f64, a.1 as f64);
    let m11 = 1.0 - g1 * g1 / d;
    let m22 = 1.0 - g2 * g2 / d;
    let m12 = -g1 * g2 / d;
    m11 * x * x + 2.0 * m12 * x * y + m22 * y * y
}

pub fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Divide by the gcd and make the first nonzero entry positive.
pub fn canonical(a: (i64, i64)) -> (i64, i64) {
    let d = gcd(a.0, a.1);
    let (x, y) = (a.0 / d, a.1 / d);
    if x < 0 || (x == 0 && y < 0) {
        (-x, -y)
    } else {
        (x, y)
    }
}

/// Exhaustive minimum over every nonzero integer vector with
/// `|a|^2 < 1 + |g|^2`; ties go to the shorter vector, then the larger
/// canonical form. Returns the canonical minimizer, the raw minimizer and
/// the minimum.
pub fn brute_force(g: (f64, f64)) -> ((i64, i64), (i64, i64), f64) {
    let limit = 1.0 + g.0 * g.0 + g.1 * g.1;
    let r = limit.sqrt().ceil() as i64;
    let mut best = ((1, 0), f64::INFINITY);
    for x in -r..=r {
        for y in -r..=r {
            if (x == 0 && y == 0) || ((x * x + y * y) as f64) >= limit {
                continue;
            }
            let q = quad(g, (x, y));
            let (bx, by) = best.0;
            let better = q < best.1
                || (q == best.1
                    && (x * x + y * y < bx * bx + by * by
                        || (x * x + y * y == bx * bx + by * by && canonical((x, y)) > canonical(best.0))));
            if better {
                best = ((x, y), q);
            }
        }
    }
    (canonical(best.0), best.0, best.1)
}

/// Uniform direction on the circle, `|g|^2` uniform on `[0, max_norm_sq]`.
pub fn random_channel<R: Rng>(rng: &mut R, max_norm_sq: f64) -> (f64, f64) {
    let r = (rng.random::<f64>() * max_norm_sq).sqrt();
    let th = rng.random::<f64>() * std::f64::consts::TAU;
    (r * th.cos(), r * th.sin())
}

pub fn scaled((g1, g2): (f64, f64)) -> ScaledChannel {
    ScaledChannel::new(g1, g2)
}

pub fn pair(e: Ecv) -> (i64, i64) {
    (e.a1, e.a2)
}

/// Bernoulli comparison: `|a - b| <= k * se`.
pub fn within_se(a: f64, b: f64, se: f64, k: f64) -> bool {
    (a - b).abs() <= k * se
}
