//! Scaled channels, Gram matrices and the computation-rate formula.
//!
//! Rates are in bits per real channel use (logarithm base 2). Noise has unit
//! variance, so source powers double as per-source SNRs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CmfError, Result};

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Transmit powers of the two sources (linear, noise variance 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePowers {
    p1: f64,
    p2: f64,
}

impl SourcePowers {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if p1 > 0.0 && p2 > 0.0 && p1.is_finite() && p2.is_finite() {
            Ok(Self { p1, p2 })
        } else {
            Err(CmfError::InvalidPower(p1, p2))
        }
    }

    /// Both sources at `snr_db`.
    pub fn equal_db(snr_db: f64) -> Result<Self> {
        let p = db_to_linear(snr_db);
        Self::new(p, p)
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

/// Real channel gains from source 1 and source 2 to one relay.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChannelVector {
    pub h1: f64,
    pub h2: f64,
}

impl ChannelVector {
    pub fn new(h1: f64, h2: f64) -> Self {
        Self { h1, h2 }
    }
}

/// Channel gains scaled by the square roots of the source powers,
/// `g_l = h_l * sqrt(P_l)`. `norm_sq` is the instantaneous sum SNR.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScaledChannel {
    pub g1: f64,
    pub g2: f64,
}

impl ScaledChannel {
    pub fn new(g1: f64, g2: f64) -> Self {
        Self { g1, g2 }
    }

    pub fn norm_sq(&self) -> f64 {
        self.g1 * self.g1 + self.g2 * self.g2
    }

    pub fn dot(&self, a: Ecv) -> f64 {
        a.a1 as f64 * self.g1 + a.a2 as f64 * self.g2
    }

    /// Componentwise absolute value.
    pub fn abs(&self) -> Self {
        Self {
            g1: self.g1.abs(),
            g2: self.g2.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.g1 == 0.0 && self.g2 == 0.0
    }

    /// Evaluator for `a^T G a` at this channel.
    pub fn form(&self) -> QuadraticForm {
        QuadraticForm::new(*self)
    }
}

/// `a^T G a` for a fixed channel, evaluated as `||a||^2 - (a.g)^2 / (1 + ||g||^2)`.
///
/// Every solver and rate computation in the crate goes through this type so
/// that comparisons between candidates are bit-for-bit consistent.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticForm {
    g: ScaledChannel,
    inv: f64,
}

impl QuadraticForm {
    pub fn new(g: ScaledChannel) -> Self {
        Self {
            g,
            inv: 1.0 / (1.0 + g.norm_sq()),
        }
    }

    pub fn channel(&self) -> ScaledChannel {
        self.g
    }

    #[inline]
    pub fn eval(&self, a: Ecv) -> f64 {
        let d = self.g.dot(a);
        a.norm_sq() as f64 - d * d * self.inv
    }

    #[inline]
    pub fn rate(&self, a: Ecv) -> Rate {
        Rate::from_quad_form(self.eval(a))
    }
}

/// Equation coefficient vector `a = [a1, a2]`.
///
/// The derived ordering is lexicographic on `(a1, a2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ecv {
    pub a1: i64,
    pub a2: i64,
}

impl Ecv {
    pub const fn new(a1: i64, a2: i64) -> Self {
        Self { a1, a2 }
    }

    pub fn norm_sq(&self) -> i64 {
        self.a1 * self.a1 + self.a2 * self.a2
    }

    pub fn is_zero(&self) -> bool {
        self.a1 == 0 && self.a2 == 0
    }

    /// `gcd(|a1|, |a2|)` with `gcd(a, 0) = a`.
    pub fn gcd(&self) -> i64 {
        gcd(self.a1.unsigned_abs(), self.a2.unsigned_abs()) as i64
    }

    pub fn abs(&self) -> Self {
        Self::new(self.a1.abs(), self.a2.abs())
    }

    /// Coordinate swap.
    pub fn permuted(&self) -> Self {
        Self::new(self.a2, self.a1)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.a1, -self.a2)
    }

    pub fn is_canonical(&self) -> bool {
        !self.is_zero() && canonicalize(*self).ok() == Some(*self)
    }
}

impl fmt::Display for Ecv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a1, self.a2)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Symmetric 2x2 matrix `G = I - g g^T / (1 + ||g||^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramMatrix {
    pub m: [[f64; 2]; 2],
}

impl GramMatrix {
    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.m[0][0] - self.m[1][1]);
        let disc = (half_diff * half_diff + self.m[0][1] * self.m[1][0]).sqrt();
        [half_tr - disc, half_tr + disc]
    }
}

/// Information rate in bits per real channel use.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Rate(pub f64);

impl Rate {
    /// `1/2 log+ (1 / q)` for a quadratic-form value `q > 0`.
    #[inline]
    pub fn from_quad_form(q: f64) -> Self {
        Rate(0.5 * (-q.log2()).max(0.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Quadratic-form threshold `2^(-2 R)`; `a^T G a` above it means the
    /// equation cannot be decoded at this rate.
    pub fn quad_form_threshold(&self) -> f64 {
        (-2.0 * self.0).exp2()
    }
}

pub fn scaled_channel(h: ChannelVector, p: SourcePowers) -> ScaledChannel {
    ScaledChannel {
        g1: h.h1 * p.p1.sqrt(),
        g2: h.h2 * p.p2.sqrt(),
    }
}

pub fn gram_matrix(g: ScaledChannel) -> GramMatrix {
    let inv = 1.0 / (1.0 + g.norm_sq());
    let off = -g.g1 * g.g2 * inv;
    GramMatrix {
        m: [[1.0 - g.g1 * g.g1 * inv, off], [off, 1.0 - g.g2 * g.g2 * inv]],
    }
}

/// `a^T G a` through the explicit matrix.
pub fn quad_form(a: Ecv, gram: &GramMatrix) -> f64 {
    let (x, y) = (a.a1 as f64, a.a2 as f64);
    let m = &gram.m;
    x * x * m[0][0] + x * y * (m[0][1] + m[1][0]) + y * y * m[1][1]
}

pub fn computation_rate(g: ScaledChannel, a: Ecv) -> Result<Rate> {
    if a.is_zero() {
        return Err(CmfError::ZeroEcv);
    }
    Ok(g.form().rate(a))
}

/// Divides out the gcd and makes the first nonzero component positive.
pub fn canonicalize(a: Ecv) -> Result<Ecv> {
    if a.is_zero() {
        return Err(CmfError::ZeroEcv);
    }
    let d = a.gcd();
    let r = Ecv::new(a.a1 / d, a.a2 / d);
    let first = if r.a1 != 0 { r.a1 } else { r.a2 };
    Ok(if first < 0 { r.neg() } else { r })
}
