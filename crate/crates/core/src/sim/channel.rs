//! Rayleigh channel draws and channel-estimation error.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rate::ChannelVector;

/// Underlying complex gains of one relay; the true real gains are their
/// magnitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelayFading {
    pub gamma: [Complex64; 2],
}

impl RelayFading {
    pub fn gains(&self) -> ChannelVector {
        ChannelVector::new(self.gamma[0].norm(), self.gamma[1].norm())
    }
}

/// Circularly-symmetric complex normal with unit total variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Draws the complex gains for `m_relays` relays; `|gamma|` is Rayleigh with
/// `E[h^2] = 1`.
pub fn draw_channels<R: Rng + ?Sized>(rng: &mut R, m_relays: usize) -> Vec<RelayFading> {
    (0..m_relays)
        .map(|_| RelayFading {
            gamma: [complex_normal(rng), complex_normal(rng)],
        })
        .collect()
}

/// Estimated gains `|gamma + sigma_e e|` built from the same `gamma` that
/// produced the true gains. With `sigma_sq == 0` no randomness is consumed
/// and the true gains are returned unchanged.
pub fn apply_cee<R: Rng + ?Sized>(rng: &mut R, fading: &[RelayFading], sigma_sq: f64) -> Vec<ChannelVector> {
    if sigma_sq == 0.0 {
        return fading.iter().map(RelayFading::gains).collect();
    }
    let sigma = sigma_sq.sqrt();
    fading
        .iter()
        .map(|f| {
            let h1 = (f.gamma[0] + complex_normal(rng) * sigma).norm();
            let h2 = (f.gamma[1] + complex_normal(rng) * sigma).norm();
            ChannelVector::new(h1, h2)
        })
        .collect()
}
