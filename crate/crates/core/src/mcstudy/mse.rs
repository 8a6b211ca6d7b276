use std::fmt;

use super::{check_study, mean_se, replicate, simulate, StudyConfig};
use crate::error::{Error, Result};
use crate::estimators::{compromise_estimate, debias_estimate, fit_narrow, fit_wide_from, z_statistic, AEstimator, FitResult};
use crate::models::{Estimand, Model};
use crate::numerics::PartitionedInfo;
use crate::risk::{geometry_from_gradient, LimitGeometry};

#[derive(Debug, Clone, PartialEq)]
pub enum StudyEstimator {
    Compromise(AEstimator),
    /// `mu_narr - b_hat (gamma_hat - gamma0)` with plug-in `b_hat`.
    Debias,
}

impl StudyEstimator {
    pub fn parse(spec: &str) -> Result<Self> {
        if spec.trim() == "debias" {
            Ok(StudyEstimator::Debias)
        } else {
            AEstimator::parse(spec).map(StudyEstimator::Compromise)
        }
    }
}

impl fmt::Display for StudyEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyEstimator::Compromise(e) => write!(f, "{e}"),
            StudyEstimator::Debias => write!(f, "debias"),
        }
    }
}

/// Everything one replication produces.
pub(crate) struct Fits {
    pub narrow: FitResult,
    pub wide: FitResult,
    pub mu_narrow: f64,
    pub mu_wide: f64,
    pub zn: f64,
}

pub(crate) fn fit_both(model: &dyn Model, estimand: &Estimand, ys: &[f64], n: usize) -> Result<Fits> {
    let design = model.default_design(n);
    let narrow = fit_narrow(model, ys, &design)?;
    let wide = fit_wide_from(model, ys, &design, &narrow)?;
    let mu_narrow = estimand.value(&narrow.theta, model.gamma0());
    let mu_wide = estimand.value(&wide.theta, &wide.gamma);
    let zn = z_statistic(wide.gamma[0], model.gamma0()[0], wide.kappa_hat(n)?, n)?;
    Ok(Fits {
        narrow,
        wide,
        mu_narrow,
        mu_wide,
        zn,
    })
}

/// Plug-in geometry from the wide fit's observed information per
/// observation and the estimand gradient at the wide estimate.
pub(crate) fn plug_in_geometry(estimand: &Estimand, wide: &FitResult, n: usize) -> Result<LimitGeometry> {
    let info = PartitionedInfo::from_full(&(&wide.observed_information / n as f64), wide.gamma.len())?;
    let (dt, dg) = estimand.gradient(&wide.theta, &wide.gamma);
    geometry_from_gradient(&info, dt, dg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub delta: f64,
    pub n: usize,
    pub estimator: String,
    /// `n` times the mean squared error.
    pub nmse: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<MseRow>,
    /// `(delta, n, failed fits)` per cell.
    pub failures: Vec<(f64, usize, usize)>,
    pub replications: usize,
}

impl StudyResult {
    pub fn get(&self, delta: f64, n: usize, estimator: &str) -> Option<&MseRow> {
        self.rows
            .iter()
            .find(|r| r.delta == delta && r.n == n && r.estimator == estimator)
    }

    /// Successful replications of a cell; with the failures this adds up to
    /// the configured count.
    pub fn successes(&self, delta: f64, n: usize) -> Option<usize> {
        self.failures
            .iter()
            .find(|(d, m, _)| *d == delta && *m == n)
            .map(|(_, _, f)| self.replications - f)
    }

    /// For each `n`, the `delta` values where the n-MSE curves of `first` and
    /// `second` cross, by linear interpolation between grid points.
    pub fn crossings(&self, first: &str, second: &str) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut out = Vec::new();
        for n in ns {
            let mut pts: Vec<(f64, f64)> = self
                .rows
                .iter()
                .filter(|r| r.n == n && r.estimator == first)
                .filter_map(|r| self.get(r.delta, n, second).map(|s| (r.delta, r.nmse - s.nmse)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pts.windows(2) {
                let ((d0, f0), (d1, f1)) = (w[0], w[1]);
                if f0 == 0.0 {
                    out.push((n, d0));
                } else if f0 * f1 < 0.0 {
                    out.push((n, d0 + (d1 - d0) * f0 / (f0 - f1)));
                }
            }
        }
        out
    }

    /// For each `n`, the crossing from a least-squares fit of
    /// `nmse(first) - nmse(second) = alpha + beta delta^2` over the whole
    /// grid, the shape the limit curves have. Uses every grid point, so it
    /// is steadier than `crossings` when the curves meet at a shallow angle.
    /// `None` when the fit has no real root.
    pub fn fitted_crossings(&self, first: &str, second: &str) -> Vec<(usize, Option<f64>)> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let pts: Vec<(f64, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| r.n == n && r.estimator == first)
                    .filter_map(|r| self.get(r.delta, n, second).map(|s| (r.delta * r.delta, r.nmse - s.nmse)))
                    .collect();
                let m = pts.len() as f64;
                let sx: f64 = pts.iter().map(|p| p.0).sum();
                let sy: f64 = pts.iter().map(|p| p.1).sum();
                let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
                let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
                let det = m * sxx - sx * sx;
                if pts.len() < 2 || det <= 0.0 {
                    return (n, None);
                }
                let beta = (m * sxy - sx * sy) / det;
                let alpha = (sy - beta * sx) / m;
                let root = -alpha / beta;
                (n, (beta != 0.0 && root >= 0.0).then(|| root.sqrt()))
            })
            .collect()
    }

    /// `delta,n,estimator,nmse,se`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["delta", "n", "estimator", "nmse", "se"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.16e}", r.delta),
                r.n.to_string(),
                r.estimator.clone(),
                format!("{:.16e}", r.nmse),
                format!("{:.16e}", r.se),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Finite-sample `n * MSE` of each estimator under `gamma0 + delta/sqrt(n)`.
pub fn finite_sample_mse(config: &StudyConfig) -> Result<StudyResult> {
    let (model, estimators) = check_study(config)?;
    let estimand = model.estimand(&config.estimand)?;
    let gamma0 = model.gamma0()[0];
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut cell = 0;
    for &n in &config.ns {
        let design = model.default_design(n);
        let root_n = (n as f64).sqrt();
        for &delta in &config.deltas {
            let gamma = [gamma0 + delta / root_n];
            let mu_true = estimand.value(model.theta0(), &gamma);
            let (errs, failed) = replicate(config.seed, cell, config.replications, |rng| {
                let ys = simulate(model.as_ref(), &design, model.theta0(), &gamma, rng);
                let fits = fit_both(model.as_ref(), &estimand, &ys, n)?;
                estimators
                    .iter()
                    .map(|e| {
                        let value = match e {
                            StudyEstimator::Compromise(a) => {
                                compromise_estimate(fits.mu_narrow, fits.mu_wide, fits.zn, a)
                            }
                            StudyEstimator::Debias => {
                                let g = plug_in_geometry(&estimand, &fits.wide, n)?;
                                debias_estimate(fits.mu_narrow, g.b[0], fits.wide.gamma[0], gamma0)
                            }
                        };
                        if value.is_finite() {
                            Ok(root_n * (value - mu_true))
                        } else {
                            Err(Error::NonFinite { at: delta, value })
                        }
                    })
                    .collect::<Result<Vec<f64>>>()
            })?;
            for (k, e) in estimators.iter().enumerate() {
                let sq: Vec<f64> = errs.iter().map(|v| v[k] * v[k]).collect();
                let (nmse, se) = mean_se(&sq);
                rows.push(MseRow {
                    delta,
                    n,
                    estimator: e.to_string(),
                    nmse,
                    se,
                });
            }
            failures.push((delta, n, failed));
            cell += 1;
        }
    }
    Ok(StudyResult {
        rows,
        failures,
        replications: config.replications,
    })
}
