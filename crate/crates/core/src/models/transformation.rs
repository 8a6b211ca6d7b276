//! Regression with errors `Z` such that `Phi^{-1}(Phi(Z)^lambda)` is standard
//! normal; `lambda = 1` is ordinary normal regression.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::design::CovariatePoint;
use super::{Column, Design, Estimand, Model};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate, GaussianExpectation};
use crate::numerics::rng::StreamRng;
use crate::numerics::{log_std_normal_cdf, std_normal_pdf, std_normal_quantile, PartitionedInfo};

/// `(E N log Phi(N), E{1 + N^2 log Phi(N)})` for `N ~ N(0, 1)`.
pub fn transformation_constants() -> (f64, f64) {
    static CONSTANTS: OnceLock<(f64, f64)> = OnceLock::new();
    *CONSTANTS.get_or_init(|| {
        let e = GaussianExpectation::default();
        let a = e.hermite(|z| z * log_std_normal_cdf(z), 0.0).expect("finite integrand");
        let b = e.hermite(|z| 1.0 + z * z * log_std_normal_cdf(z), 0.0).expect("finite integrand");
        (a, b)
    })
}

/// `Phi^{-1}(p)` for `log p` given, keeping the upper tail accurate when `p`
/// rounds to one.
fn quantile_from_log(lp: f64) -> f64 {
    let p = lp.exp();
    let q = if p < 0.5 {
        std_normal_quantile(p)
    } else {
        std_normal_quantile(-lp.exp_m1()).map(|x| -x)
    };
    q.unwrap_or(f64::NAN)
}

/// Location and scale summaries of the error distribution at `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSummaries {
    /// `Phi^{-1}(0.5^{1/lambda})`
    pub median_shift: f64,
    /// `Phi^{-1}(0.75^{1/lambda}) - Phi^{-1}(0.25^{1/lambda})`
    pub iqr_scale: f64,
    /// `e(lambda)`, the mean of `Z`.
    pub mean_shift: f64,
    /// `v(lambda)`, the standard deviation of `Z`.
    pub sd_scale: f64,
}

pub fn reparameterised_noise_summaries(lambda: f64) -> Result<NoiseSummaries> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain("reparameterised_noise_summaries", format!("lambda = {lambda}")));
    }
    let q = |p: f64| quantile_from_log(p.ln() / lambda);
    let median_shift = q(0.5);
    let iqr_scale = q(0.75) - q(0.25);
    // density lambda Phi(z)^{lambda-1} phi(z), in log space
    let log_density = |z: f64| lambda.ln() + (lambda - 1.0) * log_std_normal_cdf(z) - 0.5 * z * z - 0.918_938_533_204_672_8;
    let lo = -(12.0 + 12.0 / lambda.min(1.0).sqrt()).min(2000.0);
    let hi = 12.0 + (2.0 * lambda.max(1.0).ln()).sqrt();
    let moment = |k: i32| -> Result<f64> {
        let g = |z: f64| z.powi(k) * log_density(z).exp();
        let mut total = 0.0;
        let cuts = [lo, -5.0, 0.0, 5.0, hi];
        for w in cuts.windows(2) {
            total += integrate(&g, w[0], w[1])?;
        }
        Ok(total)
    };
    let mass = moment(0)?;
    let m1 = moment(1)? / mass;
    let m2 = moment(2)? / mass;
    Ok(NoiseSummaries {
        median_shift,
        iqr_scale,
        mean_shift: m1,
        sd_scale: (m2 - m1 * m1).max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone)]
pub struct Transformation {
    name: String,
    description: String,
    regressors: Vec<Column>,
    theta0: Vec<f64>,
    spread: f64,
}

impl Transformation {
    pub fn new(name: &str, description: &str, regressors: Vec<Column>, theta0: Vec<f64>, spread: f64) -> Result<Self> {
        if theta0.len() != regressors.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} regression coefficients plus sigma expected, got {} values",
                regressors.len(),
                theta0.len()
            )));
        }
        if !(theta0[regressors.len()] > 0.0) {
            return Err(Error::Parameter("sigma must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            description: description.into(),
            regressors,
            theta0,
            spread,
        })
    }

    fn k(&self) -> usize {
        self.regressors.len()
    }

    fn linear(&self, row: &[f64], theta: &[f64]) -> f64 {
        (0..self.k()).map(|j| theta[j] * row[j]).sum()
    }
}

impl Model for Transformation {
    fn name(&self) -> &str {
        &self.name
    }
    fn description(&self) -> &str {
        &self.description
    }
    fn p(&self) -> usize {
        self.k() + 1
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    fn gamma0(&self) -> &[f64] {
        &[1.0]
    }

    fn default_design(&self, n: usize) -> Design {
        Design::spaced(n, self.spread, n, &self.regressors)
    }

    fn log_density(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let sigma = theta[self.k()];
        let lam = gamma[0];
        if !(sigma > 0.0) || !(lam > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (y - self.linear(row, theta)) / sigma;
        lam.ln() + (lam - 1.0) * log_std_normal_cdf(z) + std_normal_pdf(z).ln() - sigma.ln()
    }

    fn score(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let k = self.k();
        let sigma = theta[k];
        let lam = gamma[0];
        let z = (y - self.linear(row, theta)) / sigma;
        let lcdf = log_std_normal_cdf(z);
        let mills = (-0.5 * z * z - 0.918_938_533_204_672_8 - lcdf).exp();
        let inner = z - (lam - 1.0) * mills;
        let mut out: Vec<f64> = row[..k].iter().map(|x| x / sigma * inner).collect();
        out.push(-1.0 / sigma + z / sigma * inner);
        out.push(1.0 / lam + lcdf);
        out
    }

    fn closed_form_info(&self, theta: &[f64], design: &Design) -> Option<Result<PartitionedInfo>> {
        let k = self.k();
        let sigma = theta[k];
        let (a, b) = transformation_constants();
        let mut j = DMatrix::<f64>::zeros(k + 2, k + 2);
        let n = design.rows().len().max(1) as f64;
        for row in design.rows() {
            for r in 0..k {
                for c in 0..k {
                    j[(r, c)] += row[r] * row[c] / (sigma * sigma * n);
                }
                j[(r, k + 1)] += a * row[r] / (sigma * n);
                j[(k + 1, r)] += a * row[r] / (sigma * n);
            }
        }
        j[(k, k)] = 2.0 / (sigma * sigma);
        j[(k, k + 1)] = b / sigma;
        j[(k + 1, k)] = b / sigma;
        j[(k + 1, k + 1)] = 1.0;
        Some(PartitionedInfo::from_full(&j, 1))
    }

    fn sample(&self, rng: &mut StreamRng, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let z = quantile_from_log(u.ln() / gamma[0]);
        self.linear(row, theta) + theta[self.k()] * z
    }

    fn null_expect(&self, f: &dyn Fn(f64) -> f64, row: &[f64], theta: &[f64]) -> Result<f64> {
        let mean = self.linear(row, theta);
        let sigma = theta[self.k()];
        GaussianExpectation::default().hermite(|z| f(mean + sigma * z), 0.0)
    }

    fn in_support(&self, y: f64) -> bool {
        y.is_finite()
    }

    fn params_valid(&self, theta: &[f64], gamma: &[f64]) -> bool {
        theta.iter().all(|v| v.is_finite()) && theta[self.k()] > 0.0 && gamma[0] > 0.0 && gamma[0].is_finite()
    }

    fn estimands(&self) -> Vec<Estimand> {
        let at = CovariatePoint {
            x: self.spread,
            spread: self.spread,
            z: 0.0,
            second_group: false,
        };
        let x0: Vec<f64> = self.regressors.iter().map(|c| c.value(&at)).collect();
        let k = self.k();
        let x1 = x0.clone();
        vec![
            Estimand::new("median-at-end", move |t, g| {
                let lin: f64 = (0..k).map(|j| t[j] * x0[j]).sum();
                lin + t[k] * quantile_from_log(0.5f64.ln() / g[0])
            }),
            Estimand::new("mean-at-end", move |t, g| {
                let lin: f64 = (0..k).map(|j| t[j] * x1[j]).sum();
                let e = reparameterised_noise_summaries(g[0]).map(|s| s.mean_shift).unwrap_or(f64::NAN);
                lin + t[k] * e
            }),
        ]
    }

    fn narrow_start(&self, ys: &[f64], design: &Design) -> Vec<f64> {
        let k = self.k();
        let n = ys.len();
        let x = DMatrix::from_fn(n, k, |i, j| design.row(i)[j]);
        let y = DVector::from_column_slice(ys);
        let beta = (x.transpose() * &x)
            .cholesky()
            .map(|c| c.solve(&(x.transpose() * &y)))
            .unwrap_or_else(|| DVector::zeros(k));
        let sigma = ((&y - &x * &beta).norm_squared() / n as f64).sqrt().max(1e-8);
        beta.iter().copied().chain(std::iter::once(sigma)).collect()
    }
}
