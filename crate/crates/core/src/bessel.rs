//! Exponentially scaled modified Bessel functions of integer order, `e^{-t} I_nu(t)`.
//!
//! Four regimes:
//! - `t <= 20`: power series, summed in the log domain so large orders do not underflow early;
//! - `nu >= 50`: uniform (Debye) asymptotic expansion with 12 correction terms;
//! - `nu < 50`, `t > 2000`: Hankel large-argument expansion;
//! - otherwise: Miller's downward recurrence normalised by `I_0 + 2 sum I_k = e^t`.

use std::f64::consts::PI;
use std::sync::OnceLock;

pub const SERIES_MAX_T: f64 = 20.0;
pub const DEBYE_MIN_ORDER: u32 = 50;
pub const HANKEL_MIN_T: f64 = 2000.0;

const DEBYE_TERMS: usize = 12;

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(256);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..256u64 {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    if (n as usize) < table.len() {
        return table[n as usize];
    }
    // Stirling series
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `e^{-t} I_nu(t)` for `t >= 0`.
pub fn scaled_bessel_i(nu: u32, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        return if nu == 0 { 1.0 } else { 0.0 };
    }
    if t <= SERIES_MAX_T {
        series(nu, t)
    } else if nu >= DEBYE_MIN_ORDER {
        debye(nu, t)
    } else if t > HANKEL_MIN_T {
        hankel(nu, t).unwrap_or_else(|| miller_single(nu, t))
    } else {
        miller_single(nu, t)
    }
}

/// Power series `sum_k (t/2)^{nu+2k} / (k! (nu+k)!)`, scaled by `e^{-t}`.
pub fn series(nu: u32, t: f64) -> f64 {
    let nu_f = f64::from(nu);
    let ln_lead = nu_f * (0.5 * t).ln() - ln_factorial(u64::from(nu)) - t;
    if ln_lead < -745.0 - 2.0 * t {
        return 0.0;
    }
    let x = 0.25 * t * t;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0f64;
    loop {
        term *= x / (k * (nu_f + k));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    (ln_lead + sum.ln()).exp()
}

fn debye_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        // u_{k+1}(p) = p^2 (1 - p^2) u_k'(p) / 2 + (1/8) int_0^p (1 - 5 s^2) u_k(s) ds
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS {
            let u = &polys[k];
            let deg = u.len() + 3;
            let mut next = vec![0.0; deg];
            for (i, &c) in u.iter().enumerate() {
                if i >= 1 {
                    let d = c * i as f64;
                    // derivative term: d * p^{i-1} * (p^2 - p^4) / 2
                    next[i + 1] += 0.5 * d;
                    next[i + 3] -= 0.5 * d;
                }
                // integral term: c/8 * (p^{i+1}/(i+1) - 5 p^{i+3}/(i+3))
                next[i + 1] += c / 8.0 / (i as f64 + 1.0);
                next[i + 3] -= 5.0 * c / 8.0 / (i as f64 + 3.0);
            }
            polys.push(next);
        }
        polys
    })
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Uniform asymptotic expansion of `I_nu(nu z)` with `z = t / nu`.
pub fn debye(nu: u32, t: f64) -> f64 {
    ln_debye(nu, t).exp()
}

/// Natural log of `e^{-t} I_nu(t)` by the uniform expansion; accurate for `nu >= 50`.
pub fn ln_debye(nu: u32, t: f64) -> f64 {
    let nu_f = f64::from(nu);
    let z = t / nu_f;
    let root = (1.0 + z * z).sqrt();
    // nu * (sqrt(1+z^2) - z - asinh(1/z)) is nu * phi(z)
    let exponent = nu_f * (1.0 / (root + z) - (1.0 / z).asinh());
    let p = 1.0 / root;
    let polys = debye_polynomials();
    let inv_nu = 1.0 / nu_f;
    let mut correction = 0.0;
    let mut scale = 1.0;
    for poly in polys.iter() {
        correction += poly_eval(poly, p) * scale;
        scale *= inv_nu;
    }
    exponent - 0.5 * (2.0 * PI * nu_f).ln() + 0.5 * p.ln() + correction.ln()
}

/// Hankel expansion `e^{-t} I_nu(t) ~ (2 pi t)^{-1/2} sum_k (-1)^k a_k(nu) / t^k`.
/// Returns `None` if the terms stop decreasing before reaching double precision.
pub fn hankel(nu: u32, t: f64) -> Option<f64> {
    let mu = 4.0 * f64::from(nu) * f64::from(nu);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * t);
        if term == 0.0 {
            break;
        }
        if term.abs() > prev {
            return None;
        }
        prev = term.abs();
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Some(sum / (2.0 * PI * t).sqrt());
        }
    }
    Some(sum / (2.0 * PI * t).sqrt())
}

/// Starting order for the downward recurrence that makes `I_start / I_top` negligible.
fn miller_start(top: u32, t: f64) -> u32 {
    top + 20 + (9.0 * t.sqrt()).ceil() as u32
}

/// `e^{-t} I_k(t)` for `k = 0..=top` by Miller's algorithm.
pub fn miller_range(top: u32, t: f64) -> Vec<f64> {
    debug_assert!(t > 0.0);
    let start = miller_start(top, t);
    let mut out = vec![0.0; top as usize + 1];
    let mut next = 0.0f64; // I_{k+1}
    let mut cur = 1e-300f64; // I_k
    let mut norm = 0.0f64;
    let two_over_t = 2.0 / t;
    let mut k = start;
    while k > 0 {
        if k <= top {
            out[k as usize] = cur;
        }
        norm += 2.0 * cur;
        let prev = next + f64::from(k) * two_over_t * cur;
        next = cur;
        cur = prev;
        k -= 1;
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

fn miller_single(nu: u32, t: f64) -> f64 {
    miller_range(nu, t)[nu as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ln_factorial_matches_product_and_stirling_boundary() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        // continuity across the table boundary
        let a = ln_factorial(255);
        let b = ln_factorial(256);
        assert!((b - a - 256f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn debye_polynomials_match_known_low_orders() {
        let polys = debye_polynomials();
        let p: f64 = 0.37;
        let u1 = (3.0 * p - 5.0 * p.powi(3)) / 24.0;
        let u2 = (81.0 * p.powi(2) - 462.0 * p.powi(4) + 385.0 * p.powi(6)) / 1152.0;
        assert!((poly_eval(&polys[1], p) - u1).abs() < 1e-15);
        assert!((poly_eval(&polys[2], p) - u2).abs() < 1e-15);
    }

    #[test]
    fn regimes_agree_near_their_boundaries() {
        // Debye vs Miller at moderate arguments
        for &(nu, t) in &[(50u32, 25.0), (60, 100.0), (80, 500.0), (120, 1500.0)] {
            let a = debye(nu, t);
            let b = miller_single(nu, t);
            assert!(rel(a, b) < 1e-12, "nu={nu} t={t} debye={a} miller={b}");
        }
        // Hankel vs Miller
        for &(nu, t) in &[(0u32, 2000.0), (10, 2000.0), (49, 3000.0)] {
            let a = hankel(nu, t).unwrap();
            let b = miller_single(nu, t);
            assert!(rel(a, b) < 1e-12, "nu={nu} t={t}");
        }
        // series vs Miller just inside the series range
        for &nu in &[0u32, 1, 5, 30, 49] {
            let a = series(nu, 20.0);
            let b = miller_single(nu, 20.0);
            assert!(rel(a, b) < 1e-12, "nu={nu}");
        }
    }

    #[test]
    fn miller_is_normalised() {
        let v = miller_range(40, 30.0);
        let total: f64 = v[0] + 2.0 * v[1..].iter().sum::<f64>();
        assert!(total <= 1.0 + 1e-14);
        assert!(total > 1.0 - 1e-6);
    }

    #[test]
    fn zero_time_is_indicator() {
        assert_eq!(scaled_bessel_i(0, 0.0), 1.0);
        assert_eq!(scaled_bessel_i(3, 0.0), 0.0);
    }
}
