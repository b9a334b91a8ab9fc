//! Weak compositions of `m` into `k` parts.

use crate::error::{CmfError, Result};

/// Default bound on the number of compositions a caller may enumerate.
pub const DEFAULT_COMPOSITION_CAP: u128 = 1_000_000;

/// `C(m + k - 1, k - 1)`, saturating at `u128::MAX`.
pub fn composition_count(m: u32, k: u32) -> u128 {
    if k == 0 {
        return u128::from(m == 0);
    }
    let n = u128::from(m) + u128::from(k) - 1;
    let r = u128::from(k - 1).min(u128::from(m));
    let mut c: u128 = 1;
    for i in 0..r {
        // c * (n - i) is divisible by (i + 1) after the multiplication.
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Every nonnegative `k`-vector summing to `m`, in colexicographic order:
/// `(m,0,..,0)` first and `(0,..,0,m)` last.
#[derive(Clone, Debug)]
pub struct Compositions {
    current: Option<Vec<u32>>,
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        if let Some(i) = next.iter().position(|&n| n > 0) {
            if i + 1 < next.len() {
                let v = next[i];
                next[i] = 0;
                next[i + 1] += 1;
                next[0] = v - 1;
                self.current = Some(next);
            }
        }
        Some(out)
    }
}

pub fn enumerate_compositions(m: u32, k: u32) -> Result<Compositions> {
    enumerate_compositions_capped(m, k, DEFAULT_COMPOSITION_CAP)
}

pub fn enumerate_compositions_capped(m: u32, k: u32, cap: u128) -> Result<Compositions> {
    if k == 0 {
        return Err(CmfError::InvalidConfig(
            "compositions need at least one part".into(),
        ));
    }
    let count = composition_count(m, k);
    if count > cap {
        return Err(CmfError::CompositionOverflow { count, cap });
    }
    let mut first = vec![0; k as usize];
    first[0] = m;
    Ok(Compositions { current: Some(first) })
}

/// `m! / (n_1! ... n_k!)` as a float.
pub fn multinomial(parts: &[u32]) -> f64 {
    let mut remaining: u32 = parts.iter().sum();
    let mut coef = 1.0;
    for &n in parts {
        coef *= binomial(remaining, n);
        remaining -= n;
    }
    coef
}

fn binomial(n: u32, r: u32) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}
