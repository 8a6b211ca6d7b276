//! Narrow/wide fits and compromise estimators built from `c(z)`.

pub mod bayes;
pub mod fit;
pub mod rules;

pub use bayes::{bayes_posterior, Posterior, Prior};
pub use fit::{fit_narrow, fit_wide, fit_wide_from, FitResult};
pub use rules::{catalogue, qhat_weight, risk_table_estimators, AEstimator, Rule};

use crate::error::{Error, Result};
use crate::models::{Design, Estimand, Model};

/// `Z_n = sqrt(n) (gamma_hat - gamma0) / kappa_hat`.
pub fn z_statistic(gamma_hat: f64, gamma0: f64, kappa_hat: f64, n: usize) -> Result<f64> {
    if !(kappa_hat > 0.0) {
        return Err(Error::domain("z_statistic", format!("kappa_hat = {kappa_hat}")));
    }
    Ok((n as f64).sqrt() * (gamma_hat - gamma0) / kappa_hat)
}

/// `{1 - c(Z_n)} mu_narr + c(Z_n) mu_wide`.
pub fn compromise_estimate(mu_narrow: f64, mu_wide: f64, zn: f64, est: &AEstimator) -> f64 {
    let c = est.weight(zn);
    (1.0 - c) * mu_narrow + c * mu_wide
}

/// Geometric-scale compromise `exp{(1 - h) log mu_narr + h log mu_wide}`.
pub fn harmonic_compromise(mu_narrow: f64, mu_wide: f64, zn: f64, h: &dyn Fn(f64) -> f64) -> Result<f64> {
    if !(mu_narrow > 0.0 && mu_wide > 0.0) {
        return Err(Error::domain(
            "harmonic_compromise",
            format!("estimates must be positive, got {mu_narrow} and {mu_wide}"),
        ));
    }
    if mu_narrow == mu_wide {
        return Ok(mu_narrow);
    }
    let w = h(zn);
    Ok(((1.0 - w) * mu_narrow.ln() + w * mu_wide.ln()).exp())
}

/// Bias-corrected narrow estimate `mu_narr - b (gamma_hat - gamma0)`.
pub fn debias_estimate(mu_narrow: f64, b: f64, gamma_hat: f64, gamma0: f64) -> f64 {
    mu_narrow - b * (gamma_hat - gamma0)
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub estimand: String,
    pub narrow: FitResult,
    pub wide: FitResult,
    pub mu_narrow: f64,
    pub mu_wide: f64,
    pub kappa_hat: f64,
    pub zn: f64,
    /// Whether `|Z_n| <= 1`, the estimated tolerance verdict.
    pub narrow_within_tolerance: bool,
    /// `(estimator name, weight c(Z_n), mu*)`.
    pub compromises: Vec<(String, f64, f64)>,
}

/// Fit both models, then form every requested compromise.
pub fn estimate(
    model: &dyn Model,
    ys: &[f64],
    design: &Design,
    estimand: &Estimand,
    estimators: &[AEstimator],
) -> Result<EstimateReport> {
    if model.q() != 1 {
        return Err(Error::Dimension("compromise estimation needs q = 1".into()));
    }
    let narrow = fit_narrow(model, ys, design)?;
    let wide = fit_wide_from(model, ys, design, &narrow)?;
    let mu_narrow = estimand.value(&narrow.theta, model.gamma0());
    let mu_wide = estimand.value(&wide.theta, &wide.gamma);
    let kappa_hat = wide.kappa_hat(ys.len())?;
    let zn = z_statistic(wide.gamma[0], model.gamma0()[0], kappa_hat, ys.len())?;
    let compromises = estimators
        .iter()
        .map(|e| (e.name(), e.weight(zn), compromise_estimate(mu_narrow, mu_wide, zn, e)))
        .collect();
    Ok(EstimateReport {
        estimand: estimand.name.clone(),
        narrow,
        wide,
        mu_narrow,
        mu_wide,
        kappa_hat,
        zn,
        narrow_within_tolerance: zn.abs() <= 1.0,
        compromises,
    })
}
