//! Normal distribution helpers and the log-gamma derivatives.

use crate::error::{Error, Result};

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// 1/sqrt(2 pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868_5;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_431;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, computed from `erfc` so both tails keep full
/// relative precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `log Phi(x)` without underflow in the far left tail, where the
/// asymptotic series `log phi(x) - log(-x) + log(1 - 1/x^2 + 3/x^4 - ...)`
/// takes over.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return if x > 0.0 {
            (-std_normal_sf(x)).ln_1p()
        } else {
            std_normal_cdf(x).ln()
        };
    }
    let r = 1.0 / (x * x);
    let series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - r * 105.0)));
    -0.5 * x * x + FRAC_1_SQRT_2PI.ln() - (-x).ln() + series.ln()
}

/// Standard normal quantile. A rational starting value (error below 5e-4)
/// is polished with Halley steps against [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if p == 1.0 {
            return Ok(f64::INFINITY);
        }
        return Err(Error::domain("std_normal_quantile", format!("p = {p}")));
    }
    let tail = p.min(1.0 - p);
    let t = (-2.0 * tail.ln()).sqrt();
    let mut x = t - (2.515517 + t * (0.802853 + t * 0.010328)) / (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
    // work in the lower tail, flip at the end
    for _ in 0..4 {
        let d = std_normal_pdf(x);
        if d <= 0.0 {
            break;
        }
        let r = (std_normal_sf(x) - tail) / d;
        let step = r / (1.0 - 0.5 * x * r);
        x += step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    Ok(if p < 0.5 { -x } else { x })
}

/// Returns `(digamma(x), trigamma(x))` for `x > 0`.
///
/// Small arguments are shifted up with `psi(x) = psi(x+1) - 1/x` and
/// `psi'(x) = psi'(x+1) + 1/x^2` until the asymptotic expansions are
/// accurate to double precision.
pub fn gamma_log_derivatives(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("gamma_log_derivatives", format!("x = {x}")));
    }
    let mut z = x;
    let mut di = 0.0;
    let mut tri = 0.0;
    while z < 12.0 {
        di -= 1.0 / z;
        tri += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    // Bernoulli-number tails.
    let di_tail = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0 - r2 / 12.0))))));
    di += z.ln() - 0.5 * r - di_tail;
    let tri_tail = r2
        * r
        * (1.0 / 6.0
            - r2 * (1.0 / 30.0
                - r2 * (1.0 / 42.0
                    - r2 * (1.0 / 30.0 - r2 * (5.0 / 66.0 - r2 * (691.0 / 2730.0 - r2 * 7.0 / 6.0))))));
    tri += r + 0.5 * r2 + tri_tail;
    Ok((di, tri))
}

pub fn digamma(x: f64) -> Result<f64> {
    gamma_log_derivatives(x).map(|d| d.0)
}

pub fn trigamma(x: f64) -> Result<f64> {
    gamma_log_derivatives(x).map(|d| d.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Maclaurin series for erf summed in long form; converges for the
    /// moderate arguments used below.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn cdf_symmetry_and_known_points() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.645) - 0.95).abs() < 5e-4);
        for &x in &[0.1, 0.7, 1.3, 2.2, 4.0, 7.5] {
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for &x in &[0.502, -0.3, 1.1, 2.5] {
            let oracle = 0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2));
            assert!((std_normal_cdf(x) - oracle).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn log_cdf_is_continuous_across_the_switch() {
        let direct = std_normal_cdf(-29.999).ln();
        let series = log_std_normal_cdf(-30.001);
        assert!((direct - series).abs() < 0.1);
        assert!((log_std_normal_cdf(-29.999) - direct).abs() < 1e-12);
        let inner = log_std_normal_cdf(-30.0 + 1e-9);
        let outer = log_std_normal_cdf(-30.0 - 1e-9);
        assert!((inner - outer).abs() < 1e-6);
        assert!(log_std_normal_cdf(-200.0).is_finite());
        assert!((log_std_normal_cdf(3.0) - std_normal_cdf(3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.05, 0.25, 0.5, 0.75, 0.975, 1.0 - 1e-9] {
            let x = std_normal_quantile(p).unwrap();
            let back = if p < 0.5 { std_normal_cdf(x) } else { 1.0 - std_normal_sf(x) };
            assert!((back - p).abs() < 1e-15 + 1e-13 * p, "p = {p}");
        }
        assert!(std_normal_quantile(-0.1).is_err());
    }

    #[test]
    fn digamma_and_trigamma_at_one() {
        let (d, t) = gamma_log_derivatives(1.0).unwrap();
        assert!((d + EULER_GAMMA).abs() < 1e-13);
        assert!((t - PI * PI / 6.0).abs() < 1e-13);
    }

    #[test]
    fn digamma_recurrence_from_half() {
        // psi(1/2) = -k - 2 ln 2 ; then step twice with psi(x+1) = psi(x) + 1/x
        let half = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        let oracle = half + 1.0 / 0.5 + 1.0 / 1.5;
        assert!((digamma(2.5).unwrap() - oracle).abs() < 1e-12);
        // trigamma(1/2) = pi^2 / 2
        assert!((trigamma(0.5).unwrap() - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_derivatives_reject_nonpositive() {
        assert!(gamma_log_derivatives(0.0).is_err());
        assert!(gamma_log_derivatives(-2.0).is_err());
    }

    #[test]
    fn digamma_matches_finite_difference_of_ln_gamma() {
        for &x in &[0.3, 1.7, 4.2, 30.0] {
            let h = 1e-5;
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((digamma(x).unwrap() - fd).abs() < 1e-8, "x = {x}");
        }
    }
}
