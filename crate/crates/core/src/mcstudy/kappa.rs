use std::fmt;

use nalgebra::DMatrix;

use super::{check_study, pairwise_sum, replicate, simulate, StudyConfig};
use crate::error::{Error, Result};
use crate::estimators::{fit_narrow, fit_wide_from};
use crate::numerics::PartitionedInfo;

const JACKKNIFE_GROUPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMethod {
    /// Empirical covariance of the null scores, inverted.
    ScoreCov,
    /// Empirical covariance of `sqrt(n)` times the wide ML estimates.
    FullMlCov,
    /// Standard deviation of `sqrt(n)(gamma_hat - gamma0)`.
    GammaSd,
}

impl KappaMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "score-cov" | "i" => Ok(KappaMethod::ScoreCov),
            "full-ml-cov" | "ii" => Ok(KappaMethod::FullMlCov),
            "gamma-sd" | "iii" => Ok(KappaMethod::GammaSd),
            other => Err(Error::Unknown {
                kind: "kappa method",
                name: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for KappaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KappaMethod::ScoreCov => "score-cov",
            KappaMethod::FullMlCov => "full-ml-cov",
            KappaMethod::GammaSd => "gamma-sd",
        })
    }
}

#[derive(Debug, Clone)]
pub struct KappaEstimate {
    pub method: KappaMethod,
    pub n: usize,
    pub kappa: f64,
    /// Grouped-jackknife standard error.
    pub se: f64,
    pub replications: usize,
    pub failures: usize,
    /// Estimated wide information (score method).
    pub information: Option<PartitionedInfo>,
    /// Elementwise standard errors of `information`.
    pub information_se: Option<DMatrix<f64>>,
    /// Estimated covariance of `sqrt(n)` times the wide estimates, i.e. of
    /// `J^{-1}` (full ML method).
    pub covariance: Option<DMatrix<f64>>,
}

impl KappaEstimate {
    pub fn write_csv<W: std::io::Write>(rows: &[KappaEstimate], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "n", "kappa", "se", "replications", "failures"])?;
        for r in rows {
            w.write_record([
                r.method.to_string(),
                r.n.to_string(),
                format!("{:.16e}", r.kappa),
                format!("{:.16e}", r.se),
                r.replications.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column means of per-replication vectors.
fn means(xs: &[Vec<f64>]) -> Vec<f64> {
    let dim = xs[0].len();
    (0..dim)
        .map(|k| pairwise_sum(&xs.iter().map(|v| v[k]).collect::<Vec<_>>()) / xs.len() as f64)
        .collect()
}

/// Sample covariance (divisor `R - 1`) of per-replication vectors.
fn covariance(xs: &[Vec<f64>]) -> DMatrix<f64> {
    let mu = means(xs);
    let dim = mu.len();
    let r = xs.len() as f64;
    DMatrix::from_fn(dim, dim, |a, b| {
        let prods: Vec<f64> = xs.iter().map(|v| (v[a] - mu[a]) * (v[b] - mu[b])).collect();
        pairwise_sum(&prods) / (r - 1.0)
    })
}

fn kappa_from_scores(xs: &[Vec<f64>], dim: usize) -> Result<(f64, PartitionedInfo)> {
    let m = means(xs);
    let j = DMatrix::from_row_slice(dim, dim, &m);
    let info = PartitionedInfo::from_full(&j, 1)?;
    let k2 = info.partitioned_inverse()?.lower[(0, 0)];
    Ok((k2.sqrt(), info))
}

/// Delete-a-group jackknife over consecutive blocks of replications.
fn jackknife_se(xs: &[Vec<f64>], stat: impl Fn(&[Vec<f64>]) -> Result<f64>) -> Result<f64> {
    let g = JACKKNIFE_GROUPS.min(xs.len());
    let size = xs.len() / g;
    let mut vals = Vec::with_capacity(g);
    for k in 0..g {
        let lo = k * size;
        let hi = if k + 1 == g { xs.len() } else { lo + size };
        let rest: Vec<Vec<f64>> = xs[..lo].iter().chain(&xs[hi..]).cloned().collect();
        vals.push(stat(&rest)?);
    }
    let mean = pairwise_sum(&vals) / g as f64;
    let ss = pairwise_sum(&vals.iter().map(|v| (v - mean).powi(2)).collect::<Vec<_>>());
    Ok(((g as f64 - 1.0) / g as f64 * ss).sqrt())
}

/// Simulation estimate of `kappa` under the null, one per sample size.
pub fn kappa_by_simulation(config: &StudyConfig) -> Result<Vec<KappaEstimate>> {
    let (model, _) = check_study(config)?;
    let dim = model.p() + model.q();
    let mut out = Vec::new();
    for (cell, &n) in config.ns.iter().enumerate() {
        let design = model.default_design(n);
        let root_n = (n as f64).sqrt();
        let est = match config.kappa_method {
            KappaMethod::ScoreCov => {
                let (xs, failures) = replicate(config.seed, cell, config.replications, |rng| {
                    let ys = simulate(model.as_ref(), &design, model.theta0(), model.gamma0(), rng);
                    let mut acc = vec![0.0; dim * dim];
                    for (i, &y) in ys.iter().enumerate() {
                        let s = model.score_at_null(y, design.row(i));
                        for a in 0..dim {
                            for b in 0..dim {
                                acc[a * dim + b] += s[a] * s[b];
                            }
                        }
                    }
                    Ok(acc.into_iter().map(|v| v / n as f64).collect::<Vec<f64>>())
                })?;
                let (kappa, info) = kappa_from_scores(&xs, dim)?;
                let se = jackknife_se(&xs, |s| kappa_from_scores(s, dim).map(|r| r.0))?;
                let cov = covariance(&xs);
                let r = xs.len() as f64;
                let info_se = DMatrix::from_fn(dim, dim, |a, b| (cov[(a * dim + b, a * dim + b)] / r).sqrt());
                KappaEstimate {
                    method: config.kappa_method,
                    n,
                    kappa,
                    se,
                    replications: config.replications,
                    failures,
                    information: Some(info),
                    information_se: Some(info_se),
                    covariance: None,
                }
            }
            KappaMethod::FullMlCov | KappaMethod::GammaSd => {
                let (xs, failures) = replicate(config.seed, cell, config.replications, |rng| {
                    let ys = simulate(model.as_ref(), &design, model.theta0(), model.gamma0(), rng);
                    let narrow = fit_narrow(model.as_ref(), &ys, &design)?;
                    let wide = fit_wide_from(model.as_ref(), &ys, &design, &narrow)?;
                    let truth = model.theta0().iter().chain(model.gamma0());
                    Ok(wide
                        .theta
                        .iter()
                        .chain(&wide.gamma)
                        .zip(truth)
                        .map(|(e, t)| root_n * (e - t))
                        .collect::<Vec<f64>>())
                })?;
                let last = dim - 1;
                let stat = |s: &[Vec<f64>]| -> Result<f64> {
                    let g: Vec<Vec<f64>> = s.iter().map(|v| vec![v[last]]).collect();
                    Ok(covariance(&g)[(0, 0)].sqrt())
                };
                let kappa = stat(&xs)?;
                let se = jackknife_se(&xs, stat)?;
                let covariance = (config.kappa_method == KappaMethod::FullMlCov).then(|| covariance(&xs));
                KappaEstimate {
                    method: config.kappa_method,
                    n,
                    kappa,
                    se,
                    replications: config.replications,
                    failures,
                    information: None,
                    information_se: None,
                    covariance,
                }
            }
        };
        out.push(est);
    }
    Ok(out)
}
