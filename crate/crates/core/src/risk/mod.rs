//! Limit risk functions `R(a) = E_a {a_hat(Z) - a}^2` and what they imply.

mod coverage;
mod geometry;
mod l1;
mod profile;

pub use coverage::{ci_coverage, interval_risk, IntervalKind};
pub use geometry::{geometry_from_gradient, limit_geometry, limit_mse, LimitGeometry};
pub use l1::{l1_loss_fn, l1_risk, l1_tolerance};
pub use profile::{crossing_points, default_grid, grid, risk_profile, write_profiles_csv, RiskProfile};

use crate::error::{Error, Result};
use crate::estimators::{AEstimator, Rule};
use crate::numerics::{std_normal_cdf, std_normal_pdf, std_normal_sf, GaussianExpectation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// Squared error, the `R(a)` scale.
    L2,
    /// Absolute error normalised by `tau0`, with `rho = |b| kappa / tau0`.
    L1 { rho: f64 },
}

impl Loss {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("l2") {
            return Ok(Loss::L2);
        }
        if let Some(rest) = s.strip_prefix("l1:").or_else(|| s.strip_prefix("L1:")) {
            let rho: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad rho in loss '{s}'")))?;
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(Error::Parameter(format!("rho in loss '{s}' must be finite and non-negative")));
            }
            return Ok(Loss::L1 { rho });
        }
        Err(Error::Unknown {
            kind: "loss",
            name: s.to_string(),
        })
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Loss::L2 => write!(f, "l2"),
            Loss::L1 { rho } => write!(f, "l1:{rho}"),
        }
    }
}

/// `Phi(m + a) + Phi(m - a) - 1 = Pr(|Z| <= m)` for `Z ~ N(a, 1)`.
fn inside(m: f64, a: f64) -> f64 {
    let a = a.abs();
    // Phi(m + a) - Phi(a - m), using upper tails when both are far right
    if a - m > 0.0 {
        std_normal_sf(a - m) - std_normal_sf(a + m)
    } else {
        std_normal_cdf(m + a) - std_normal_cdf(a - m)
    }
}

pub fn has_closed_form(est: &AEstimator) -> bool {
    matches!(
        est.rule(),
        Rule::Narrow
            | Rule::Wide
            | Rule::Linear { .. }
            | Rule::Pretest { .. }
            | Rule::Restricted { .. }
            | Rule::EfronMorris { .. }
    )
}

/// Exact `R(a)` for the rules that have one.
pub fn risk_closed_form(est: &AEstimator, a: f64) -> Result<f64> {
    let pdf = std_normal_pdf;
    Ok(match *est.rule() {
        Rule::Narrow => a * a,
        Rule::Wide => 1.0,
        Rule::Linear { c } => c * c + (1.0 - c) * (1.0 - c) * a * a,
        Rule::Pretest { m } => {
            1.0 + (a * a - 1.0) * inside(m, a) + (m + a) * pdf(m + a) + (m - a) * pdf(m - a)
        }
        Rule::Restricted { m } => {
            inside(m, a) - (m - a) * pdf(m - a) - (m + a) * pdf(m + a)
                + (m - a).powi(2) * std_normal_sf(m - a)
                + (m + a).powi(2) * std_normal_sf(m + a)
        }
        Rule::EfronMorris { m } => {
            1.0 + m * m + (a * a - m * m - 1.0) * inside(m, a) - (m - a) * pdf(m + a) - (m + a) * pdf(m - a)
        }
        _ => {
            return Err(Error::Unknown {
                kind: "closed-form risk",
                name: est.name(),
            })
        }
    })
}

/// `R(a)` by quadrature: Gauss–Hermite for smooth rules, knot-split
/// adaptive integration for rules with jumps or kinks.
pub fn risk_numeric(est: &AEstimator, a: f64) -> Result<f64> {
    GaussianExpectation::default().expect(
        |z| (est.a_hat(z) - a).powi(2),
        a,
        est.smoothness(),
        &est.knots(),
    )
}

/// `R(a)`: closed form where available, quadrature otherwise.
pub fn risk(est: &AEstimator, a: f64) -> Result<f64> {
    if has_closed_form(est) {
        risk_closed_form(est, a)
    } else {
        risk_numeric(est, a)
    }
}

/// Risk under either loss.
pub fn risk_under(est: &AEstimator, a: f64, loss: Loss) -> Result<f64> {
    match loss {
        Loss::L2 => risk(est, a),
        Loss::L1 { rho } => l1_risk(est, a, rho),
    }
}

#[cfg(test)]
mod tests;
