use nalgebra::DVector;

use super::mse::{fit_both, plug_in_geometry};
use super::{check_study, replicate, simulate, StudyConfig};
use crate::error::{Error, Result};
use crate::models::information_at_null;
use crate::numerics::std_normal_quantile;
use crate::risk::{ci_coverage, limit_geometry};

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub delta: f64,
    pub n: usize,
    /// `narrow` or `wide`.
    pub interval: &'static str,
    pub coverage: f64,
    pub se: f64,
    /// Limit coverage: `ci_coverage(b delta / tau0, z)` for the narrow
    /// interval, the nominal level for the wide one.
    pub predicted: f64,
}

impl CoverageRow {
    pub fn write_csv<W: std::io::Write>(rows: &[CoverageRow], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["delta", "n", "interval", "coverage", "se", "predicted"])?;
        for r in rows {
            w.write_record([
                format!("{:.16e}", r.delta),
                r.n.to_string(),
                r.interval.to_string(),
                format!("{:.16e}", r.coverage),
                format!("{:.16e}", r.se),
                format!("{:.16e}", r.predicted),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Empirical coverage of `mu_hat +- z sd_hat / sqrt(n)` for the narrow and
/// wide estimates, with plug-in standard deviations.
pub fn coverage_study(config: &StudyConfig) -> Result<Vec<CoverageRow>> {
    let (model, _) = check_study(config)?;
    let estimand = model.estimand(&config.estimand)?;
    let z = std_normal_quantile(0.5 + 0.5 * config.level)?;
    let gamma0 = model.gamma0()[0];
    let mut out = Vec::new();
    let mut cell = 0;
    for &n in &config.ns {
        let design = model.default_design(n);
        let null_geom = limit_geometry(&information_at_null(model.as_ref(), &design)?, &estimand, model.as_ref())?;
        let root_n = (n as f64).sqrt();
        for &delta in &config.deltas {
            let gamma = [gamma0 + delta / root_n];
            let mu_true = estimand.value(model.theta0(), &gamma);
            let (hits, _) = replicate(config.seed, cell, config.replications, |rng| {
                let ys = simulate(model.as_ref(), &design, model.theta0(), &gamma, rng);
                let fits = fit_both(model.as_ref(), &estimand, &ys, n)?;
                // narrow: tau0 from the narrow fit alone
                let (dt, _) = estimand.gradient(&fits.narrow.theta, model.gamma0());
                let dt = DVector::from_vec(dt);
                let j11 = &fits.narrow.observed_information / n as f64;
                let tau0_sq = j11
                    .cholesky()
                    .map(|c| dt.dot(&c.solve(&dt)))
                    .ok_or_else(|| Error::NotPositiveDefinite {
                        block: crate::InfoBlock::Narrow,
                        detail: "observed narrow information".into(),
                    })?;
                let tau_sq = plug_in_geometry(&estimand, &fits.wide, n)?.tau_sq_sandwich;
                let hit = |mu: f64, var: f64| ((mu - mu_true).abs() <= z * (var / n as f64).sqrt()) as u8 as f64;
                Ok([hit(fits.mu_narrow, tau0_sq), hit(fits.mu_wide, tau_sq)])
            })?;
            let reps = hits.len() as f64;
            let shift = null_geom.b[0] * delta / null_geom.tau0_sq.sqrt();
            let predicted = [ci_coverage(shift, z)?, config.level];
            for (k, name) in ["narrow", "wide"].into_iter().enumerate() {
                let p = super::pairwise_sum(&hits.iter().map(|h| h[k]).collect::<Vec<_>>()) / reps;
                out.push(CoverageRow {
                    delta,
                    n,
                    interval: name,
                    coverage: p,
                    se: (p * (1.0 - p) / reps).sqrt(),
                    predicted: predicted[k],
                });
            }
            cell += 1;
        }
    }
    Ok(out)
}
