use nalgebra::DMatrix;
use rand::Rng;

use super::design::CovariatePoint;
use super::{Column, Design, Estimand, Model};
use crate::error::{Error, Result};
use crate::numerics::rng::StreamRng;
use crate::numerics::PartitionedInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogisticDeparture {
    /// `gamma t^2` added to the linear predictor; `gamma0 = 0`.
    Quadratic,
    /// `p(x) = L(beta'x)^eta`; `eta0 = 1`.
    Power,
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

#[derive(Debug, Clone)]
pub struct Logistic {
    name: String,
    description: String,
    regressors: Vec<Column>,
    departure: LogisticDeparture,
    theta0: Vec<f64>,
    gamma0: [f64; 1],
    spread: f64,
}

impl Logistic {
    pub fn new(
        name: &str,
        description: &str,
        regressors: Vec<Column>,
        departure: LogisticDeparture,
        theta0: Vec<f64>,
        spread: f64,
    ) -> Result<Self> {
        if theta0.len() != regressors.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients expected, got {}",
                regressors.len(),
                theta0.len()
            )));
        }
        let gamma0 = match departure {
            LogisticDeparture::Quadratic => [0.0],
            LogisticDeparture::Power => [1.0],
        };
        Ok(Self {
            name: name.into(),
            description: description.into(),
            regressors,
            departure,
            theta0,
            gamma0,
            spread,
        })
    }

    fn k(&self) -> usize {
        self.regressors.len()
    }

    fn columns(&self) -> Vec<Column> {
        let mut c = self.regressors.clone();
        if self.departure == LogisticDeparture::Quadratic {
            c.push(Column::T2);
        }
        c
    }

    fn eta(&self, row: &[f64], theta: &[f64]) -> f64 {
        (0..self.k()).map(|j| theta[j] * row[j]).sum()
    }

    /// `(log p, log(1 - p))` at a row.
    fn log_probs(&self, row: &[f64], theta: &[f64], gamma: &[f64]) -> (f64, f64) {
        let eta = self.eta(row, theta);
        match self.departure {
            LogisticDeparture::Quadratic => {
                let e = eta + gamma[0] * row[self.k()];
                (-softplus(-e), -softplus(e))
            }
            LogisticDeparture::Power => {
                let lp = -gamma[0] * softplus(-eta);
                (lp, (-lp.exp_m1()).ln())
            }
        }
    }

    /// Success probability at a row.
    pub fn prob(&self, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let eta = self.eta(row, theta);
        match self.departure {
            LogisticDeparture::Quadratic => logistic(eta + gamma[0] * row[self.k()]),
            LogisticDeparture::Power => logistic(eta).powf(gamma[0]),
        }
    }

    /// `dp/d(theta, gamma)`.
    fn dprob(&self, row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let k = self.k();
        let p = self.prob(row, theta, gamma);
        match self.departure {
            LogisticDeparture::Quadratic => {
                let w = p * (1.0 - p);
                row[..k + 1].iter().map(|x| w * x).collect()
            }
            LogisticDeparture::Power => {
                let eta = self.eta(row, theta);
                let one_minus_l = (-softplus(eta)).exp();
                let log_l = -softplus(-eta);
                let mut d: Vec<f64> = row[..k].iter().map(|x| gamma[0] * p * one_minus_l * x).collect();
                d.push(p * log_l);
                d
            }
        }
    }
}

impl Model for Logistic {
    fn name(&self) -> &str {
        &self.name
    }
    fn description(&self) -> &str {
        &self.description
    }
    fn p(&self) -> usize {
        self.k()
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    fn gamma0(&self) -> &[f64] {
        &self.gamma0
    }

    fn default_design(&self, n: usize) -> Design {
        Design::spaced(n, self.spread, n, &self.columns())
    }

    fn log_density(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        if self.departure == LogisticDeparture::Power && !(gamma[0] > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (lp, lq) = self.log_probs(row, theta, gamma);
        if y == 1.0 {
            lp
        } else {
            lq
        }
    }

    fn score(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let p = self.prob(row, theta, gamma);
        match self.departure {
            LogisticDeparture::Quadratic => row[..self.k() + 1].iter().map(|x| (y - p) * x).collect(),
            LogisticDeparture::Power => {
                let scale = (y - p) / (p * (1.0 - p));
                self.dprob(row, theta, gamma).into_iter().map(|d| scale * d).collect()
            }
        }
    }

    fn closed_form_info(&self, theta: &[f64], design: &Design) -> Option<Result<PartitionedInfo>> {
        let dim = self.k() + 1;
        let mut j = DMatrix::<f64>::zeros(dim, dim);
        for row in design.rows() {
            let p = self.prob(row, theta, &self.gamma0);
            let d = self.dprob(row, theta, &self.gamma0);
            let w = 1.0 / (p * (1.0 - p));
            for a in 0..dim {
                for b in 0..dim {
                    j[(a, b)] += w * d[a] * d[b];
                }
            }
        }
        j /= design.rows().len().max(1) as f64;
        Some(PartitionedInfo::from_full(&j, 1))
    }

    fn sample(&self, rng: &mut StreamRng, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let p = self.prob(row, theta, gamma);
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }

    fn null_expect(&self, f: &dyn Fn(f64) -> f64, row: &[f64], theta: &[f64]) -> Result<f64> {
        let p = self.prob(row, theta, &self.gamma0);
        Ok((1.0 - p) * f(0.0) + p * f(1.0))
    }

    fn in_support(&self, y: f64) -> bool {
        y == 0.0 || y == 1.0
    }

    fn params_valid(&self, theta: &[f64], gamma: &[f64]) -> bool {
        theta.iter().chain(gamma).all(|v| v.is_finite())
            && (self.departure == LogisticDeparture::Quadratic || gamma[0] > 0.0)
    }

    fn estimands(&self) -> Vec<Estimand> {
        let row_at = |x: f64| -> Vec<f64> {
            let at = CovariatePoint {
                x,
                spread: self.spread,
                z: 0.0,
                second_group: false,
            };
            self.columns().iter().map(|c| c.value(&at)).collect()
        };
        let me = self.clone();
        let end = row_at(self.spread);
        let me2 = self.clone();
        let centre = row_at(0.5 * self.spread);
        vec![
            Estimand::new("p-at-end", move |t, g| me.prob(&end, t, g)),
            Estimand::new("p-at-centre", move |t, g| me2.prob(&centre, t, g)),
        ]
    }

    fn narrow_start(&self, _ys: &[f64], _design: &Design) -> Vec<f64> {
        vec![0.0; self.k()]
    }
}
