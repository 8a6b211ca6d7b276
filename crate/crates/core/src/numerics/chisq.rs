//! Central and noncentral chi-square distribution functions.

use super::special::{ln_gamma, std_normal_pdf, std_normal_sf};
#[cfg(test)]
use super::special::std_normal_cdf;
use crate::error::{Error, Result};

/// Relative size below which a Poisson-weighted term ends the series.
const SERIES_CUTOFF: f64 = 1e-14;

/// Central chi-square CDF for integer degrees of freedom.
///
/// Even `df` uses the finite Poisson sum; odd `df` starts from
/// `2 Phi(sqrt x) - 1` and adds the half-integer terms. Terms are formed in
/// log space so large `x` cannot overflow.
pub fn chisq_cdf(x: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("chisq_cdf", "df must be positive"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain("chisq_cdf", format!("x = {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let y = 0.5 * x;
    let mut upper = if df % 2 == 0 {
        // Q = e^{-y} sum_{j < df/2} y^j / j!
        let k = df / 2;
        let mut s = 0.0;
        for j in 0..k {
            let jf = j as f64;
            s += (-y + jf * y.ln() - ln_gamma(jf + 1.0)).exp();
        }
        s
    } else {
        let r = x.sqrt();
        let mut s = 2.0 * std_normal_sf(r);
        // + 2 phi(r) sum_{j=1}^{(df-1)/2} r^{2j-1} / (2j-1)!!
        let k = (df - 1) / 2;
        let lphi = std_normal_pdf(r).ln();
        for j in 1..=k {
            let jf = j as f64;
            // (2j-1)!! = (2j)! / (2^j j!)
            let ldf = ln_gamma(2.0 * jf + 1.0) - jf * std::f64::consts::LN_2 - ln_gamma(jf + 1.0);
            s += 2.0 * (lphi + (2.0 * jf - 1.0) * r.ln() - ldf).exp();
        }
        s
    };
    upper = upper.clamp(0.0, 1.0);
    Ok(1.0 - upper)
}

/// Noncentral chi-square CDF `Pr{chi2_df(ncp) <= x}`.
///
/// Poisson mixture of central terms. The central CDFs for `df + 2j` are
/// produced by the downward recurrence
/// `P(a+1, y) = P(a, y) - y^a e^{-y} / Gamma(a+1)` on the regularised
/// incomplete gamma function.
pub fn noncentral_chisq_cdf(x: f64, df: u32, ncp: f64) -> Result<f64> {
    if !(ncp >= 0.0) || !ncp.is_finite() {
        return Err(Error::domain("noncentral_chisq_cdf", format!("ncp = {ncp}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain("noncentral_chisq_cdf", format!("x = {x}")));
    }
    if ncp == 0.0 {
        return chisq_cdf(x, df);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let lam = 0.5 * ncp;
    let y = 0.5 * x;
    let ly = y.ln();
    let llam = lam.ln();
    let mut central = chisq_cdf(x, df)?;
    let mut a = 0.5 * df as f64;
    let mut sum = 0.0;
    let max_terms = 100_000usize + (10.0 * lam) as usize;
    for j in 0..max_terms {
        let jf = j as f64;
        let lw = -lam + jf * llam - ln_gamma(jf + 1.0);
        let term = lw.exp() * central;
        sum += term;
        if jf > lam && (term <= SERIES_CUTOFF * sum || central <= 0.0) {
            break;
        }
        central -= (a * ly - y - ln_gamma(a + 1.0)).exp();
        if central < 0.0 {
            central = 0.0;
        }
        a += 1.0;
    }
    Ok(sum.clamp(0.0, 1.0))
}

pub fn noncentral_chisq_sf(x: f64, df: u32, ncp: f64) -> Result<f64> {
    noncentral_chisq_cdf(x, df, ncp).map(|p| 1.0 - p)
}

/// Quantile of the central chi-square by bracketing and bisection to full
/// double precision.
pub fn chisq_quantile(p: f64, df: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("chisq_quantile", format!("p = {p}")));
    }
    let mut lo = 0.0;
    let mut hi = df.max(1) as f64;
    while chisq_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chisq_cdf(mid, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Lower regularised gamma by its power series, summed until the terms
    /// vanish.
    fn incomplete_gamma_series(a: f64, y: f64) -> f64 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = 1.0;
        while term > 1e-18 * sum {
            term *= y / (a + k);
            sum += term;
            k += 1.0;
        }
        (a * y.ln() - y - ln_gamma(a)).exp() * sum
    }

    #[test]
    fn central_one_df_is_two_sided_normal() {
        for &x in &[0.1f64, 1.0, 3.84, 9.0] {
            let expect = 2.0 * std_normal_cdf(x.sqrt()) - 1.0;
            assert!((chisq_cdf(x, 1).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn central_two_df_is_exponential() {
        for &x in &[0.2f64, 2.0, 7.0] {
            let expect = 1.0 - (-0.5 * x).exp();
            assert!((chisq_cdf(x, 2).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn central_matches_incomplete_gamma() {
        for df in 1..12u32 {
            for &x in &[0.05, 0.9, 2.0, 6.5, 15.0, 40.0] {
                let reference = incomplete_gamma_series(df as f64 / 2.0, x / 2.0);
                assert!((chisq_cdf(x, df).unwrap() - reference).abs() < 1e-12, "df {df} x {x}");
            }
        }
    }

    #[test]
    fn zero_ncp_reduces_to_central() {
        for &x in &[0.5, 2.0, 5.0] {
            assert_eq!(noncentral_chisq_cdf(x, 3, 0.0).unwrap(), chisq_cdf(x, 3).unwrap());
        }
    }

    #[test]
    fn noncentral_one_df_closed_form() {
        // chi2_1(l) is (N + sqrt l)^2.
        for &(x, l) in &[(1.96f64 * 1.96, 1.0f64), (0.3, 2.5), (10.0, 16.0)] {
            let r = x.sqrt();
            let s = l.sqrt();
            let expect = std_normal_cdf(r - s) - std_normal_cdf(-r - s);
            assert!((noncentral_chisq_cdf(x, 1, l).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn border_power_at_five_percent() {
        let sf = noncentral_chisq_sf(1.96 * 1.96, 1, 1.0).unwrap();
        assert!((sf - 0.170).abs() < 1e-3);
        assert!((chisq_cdf(2.0, 1).unwrap() - 0.843).abs() < 1e-3);
    }

    #[test]
    fn rejects_negative_x() {
        assert!(noncentral_chisq_cdf(-1.0, 1, 1.0).is_err());
        assert!(chisq_cdf(-0.1, 2).is_err());
    }

    #[test]
    fn quantile_roundtrip() {
        let q = chisq_quantile(0.95, 1).unwrap();
        assert!((q - 1.959_963_984_540_054f64.powi(2)).abs() < 1e-9);
        for df in 1..6 {
            let q = chisq_quantile(0.9, df).unwrap();
            assert!((chisq_cdf(q, df).unwrap() - 0.9).abs() < 1e-13);
        }
    }

    #[test]
    fn monotone_in_x_and_ncp() {
        for df in 1..5u32 {
            let mut prev_x = 0.0;
            for i in 0..60 {
                let x = 0.25 * i as f64;
                let v = noncentral_chisq_cdf(x, df, 1.7).unwrap();
                assert!(v >= prev_x - 1e-15);
                prev_x = v;
            }
            let mut prev_l = 1.0;
            for i in 0..40 {
                let l = 0.5 * i as f64;
                let v = noncentral_chisq_cdf(3.0, df, l).unwrap();
                assert!(v <= prev_l + 1e-15);
                prev_l = v;
            }
        }
    }
}
