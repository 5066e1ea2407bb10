//! One-dimensional building blocks: the heat kernel on `Z`, the profile `s_n`, and `phi`.

use serde::{Deserialize, Serialize};

use crate::bessel::scaled_bessel_i;
use crate::error::{Result, TreeError};
use crate::optim::{golden_section_max, log_grid};

/// Heat kernel of `f(j) - (f(j-1) + f(j+1))/2` on `Z`, i.e. `e^{-t} I_j(t)`.
pub fn heat_kernel_z(t: f64, j: u32) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(TreeError::InvalidTime(t));
    }
    Ok(scaled_bessel_i(j, t))
}

/// Two-sided approximation of `heat_kernel_z`:
/// `e^{-t + sqrt(j^2+t^2)} (1+j^2+t^2)^{-1/4} (t/(j + sqrt(j^2+t^2)))^j`.
pub fn heat_kernel_z_approx(t: f64, j: u32) -> f64 {
    let j = f64::from(j);
    let root = (j * j + t * t).sqrt();
    // -t + sqrt(j^2+t^2) = j^2 / (t + sqrt(j^2+t^2))
    let ln = j * j / (t + root) - 0.25 * (1.0 + j * j + t * t).ln() + if j > 0.0 { j * (t / (j + root)).ln() } else { 0.0 };
    ln.exp()
}

/// `phi(t) = -t + sqrt(1+t^2) + ln t - ln(1 + sqrt(1+t^2))`.
pub fn phi(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(TreeError::InvalidTime(t));
    }
    Ok(phi_unchecked(t))
}

pub(crate) fn phi_unchecked(t: f64) -> f64 {
    let root = (1.0 + t * t).sqrt();
    1.0 / (root + t) - (1.0 / t).asinh()
}

fn ln_s_profile(n: u32, t: f64) -> f64 {
    let m = f64::from(n) + 1.0;
    let root = (m * m + t * t).sqrt();
    m.ln() + m * m / (t + root) + m * (t / (m + root)).ln() - t.ln() - 0.25 * (1.0 + m * m + t * t).ln()
}

/// `s_n(t) = (n+1) e^{-t + sqrt((n+1)^2+t^2)} (t/(n+1+sqrt((n+1)^2+t^2)))^{n+1} / (t (1+(n+1)^2+t^2)^{1/4})`.
pub fn s_profile(n: u32, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(TreeError::InvalidTime(t));
    }
    Ok(ln_s_profile(n, t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub sup: f64,
    pub argmax_t: f64,
}

/// Maximum over `t > 0` of `s_n(t)`, or of `(n/t) s_n(t)` when `weighted`.
///
/// A 400-point log grid on `[1e-4 (n+1), 1e4 (n+1)^2]` brackets the maximiser,
/// which is then refined by golden section in `ln t`.
pub fn sup_profile(n: u32, weighted: bool) -> SupResult {
    if weighted && n == 0 {
        return SupResult { sup: 0.0, argmax_t: f64::NAN };
    }
    let m = f64::from(n) + 1.0;
    let f = |ln_t: f64| {
        let t = ln_t.exp();
        let mut v = ln_s_profile(n, t);
        if weighted {
            v += f64::from(n).ln() - ln_t;
        }
        v
    };
    let grid = log_grid(1e-4 * m, 1e4 * m * m, 400);
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, f(t.ln())))
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (x, fx) = golden_section_max(f, lo, hi, 1e-10);
    SupResult { sup: fx.exp(), argmax_t: x.exp() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_kernel_z_rejects_negative_time() {
        assert_eq!(heat_kernel_z(-1.0, 0), Err(TreeError::InvalidTime(-1.0)));
        assert_eq!(heat_kernel_z(0.0, 0).unwrap(), 1.0);
    }

    #[test]
    fn phi_examples() {
        let v = phi(1.0).unwrap();
        assert!((v - (-0.467_160_024_646_447_97)).abs() < 1e-14);
        assert!(phi(2.0).unwrap() > v);
        let far = phi(1e6).unwrap();
        assert!(far < 0.0 && far > -1e-5);
        assert!(phi(0.0).is_err());
    }

    #[test]
    fn s_profile_at_zero_one() {
        // e^{-1+sqrt2} / ((1+sqrt2) 3^{1/4})
        let v = s_profile(0, 1.0).unwrap();
        assert!((v - 0.476_249_645_540_473_3).abs() < 1e-13);
    }

    #[test]
    fn weighted_sup_vanishes_for_n_zero() {
        assert_eq!(sup_profile(0, true).sup, 0.0);
    }
}
