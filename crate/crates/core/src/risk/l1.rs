use crate::error::Result;
use crate::estimators::{AEstimator, Rule};
use crate::numerics::{std_normal_pdf, std_normal_sf, GaussianExpectation};

/// `L(x) = E|x + N| = x + 2 phi(x) - 2x {1 - Phi(x)}`.
pub fn l1_loss_fn(x: f64) -> f64 {
    // even in x; the upper-tail form is accurate for x >= 0
    let x = x.abs();
    x + 2.0 * std_normal_pdf(x) - 2.0 * x * std_normal_sf(x)
}

/// `E_a L(rho {a_hat(Z) - a})`: the limit of `E|mu* - mu| / tau0` when
/// `rho = |b| kappa / tau0`.
pub fn l1_risk(est: &AEstimator, a: f64, rho: f64) -> Result<f64> {
    match est.rule() {
        Rule::Narrow => Ok(l1_loss_fn(rho * a)),
        Rule::Wide => Ok((1.0 + rho * rho).sqrt() * l1_loss_fn(0.0)),
        _ => GaussianExpectation::default().expect(
            |z| l1_loss_fn(rho * (est.a_hat(z) - a)),
            a,
            est.smoothness(),
            &est.knots(),
        ),
    }
}

/// `a0(rho)`: the narrow estimator has smaller L1 risk exactly when
/// `|a| <= a0`, i.e. where `L(rho a) <= (1 + rho^2)^{1/2} L(0)`.
pub fn l1_tolerance(rho: f64) -> f64 {
    let rho = rho.abs();
    if rho < 1e-3 {
        // a0^2 = 1 - rho^2/6 + O(rho^4) from the Taylor expansion of L
        return 1.0 - rho * rho / 12.0;
    }
    let target = (1.0 + rho * rho).sqrt() * l1_loss_fn(0.0);
    let g = |a: f64| l1_loss_fn(rho * a) - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
