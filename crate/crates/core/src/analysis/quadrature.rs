//! Adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

use crate::error::{CmfError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Debug)]
pub struct Integral {
    pub values: Vec<f64>,
    /// Sum over subintervals of the largest per-component error estimate.
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    values: Vec<f64>,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64, &mut [f64])>(f: &F, a: f64, b: f64, dim: usize) -> Piece {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut buf = vec![0.0; dim];

    f(centre, &mut buf);
    for d in 0..dim {
        kron[d] = WGK[7] * buf[d];
        gauss[d] = WG[3] * buf[d];
    }
    for (j, &x) in XGK[..7].iter().enumerate() {
        for sign in [-1.0, 1.0] {
            f(centre + sign * half * x, &mut buf);
            for d in 0..dim {
                kron[d] += WGK[j] * buf[d];
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * buf[d];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..dim {
        kron[d] *= half;
        gauss[d] *= half;
        error = error.max((kron[d] - gauss[d]).abs());
    }
    Piece {
        a,
        b,
        values: kron,
        error,
    }
}

/// Integrates `f: R -> R^dim` over `[a, b]` by repeatedly bisecting the
/// subinterval with the largest error estimate until the total estimate is
/// at most `abs_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, dim: usize, abs_tol: f64, max_intervals: usize) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]),
{
    let mut pieces = vec![gauss_kronrod(&f, a, b, dim)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.error).sum();
        if total <= abs_tol {
            break;
        }
        if pieces.len() >= max_intervals {
            return Err(CmfError::QuadratureNotConverged {
                estimate: total,
                tolerance: abs_tol,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(CmfError::QuadratureNotConverged {
                estimate: total,
                tolerance: abs_tol,
            });
        }
        pieces.push(gauss_kronrod(&f, p.a, mid, dim));
        pieces.push(gauss_kronrod(&f, mid, p.b, dim));
    }
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut values = vec![0.0; dim];
    for p in &pieces {
        for (v, x) in values.iter_mut().zip(&p.values) {
            *v += x;
        }
    }
    Ok(Integral {
        values,
        error: pieces.iter().map(|p| p.error).sum(),
        intervals: pieces.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x, out| out[0] = x.powi(9) - 3.0 * x * x, 0.0, 2.0, 1, 1e-12, 10).unwrap();
        assert!((r.values[0] - (102.4 - 8.0)).abs() < 1e-12);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn kinks_and_vectors() {
        let r = integrate(
            |x, out| {
                out[0] = (x - 0.3).abs();
                out[1] = x.sin();
            },
            0.0,
            PI,
            2,
            1e-11,
            1000,
        )
        .unwrap();
        let abs_exact = 0.5 * 0.3 * 0.3 + 0.5 * (PI - 0.3).powi(2);
        assert!((r.values[0] - abs_exact).abs() < 1e-10);
        assert!((r.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let r = integrate(
            |x, out| out[0] = if x < 0.123_456 { 0.0 } else { 1.0 },
            0.0,
            1.0,
            1,
            1e-14,
            4,
        );
        assert!(matches!(r, Err(CmfError::QuadratureNotConverged { .. })));
    }
}
