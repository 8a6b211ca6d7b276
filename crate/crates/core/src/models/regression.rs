use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::design::CovariatePoint;
use super::{Column, Design, Estimand, Model};
use crate::error::{Error, Result};
use crate::numerics::quadrature::GaussianExpectation;
use crate::numerics::rng::StreamRng;
use crate::numerics::PartitionedInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepartureKind {
    /// `gamma c(x)` added to the mean.
    Mean,
    /// Variance `sigma^2 (1 + gamma c(x))`.
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub kind: DepartureKind,
    pub column: Column,
}

impl Departure {
    pub fn mean(column: Column) -> Self {
        Self {
            kind: DepartureKind::Mean,
            column,
        }
    }
    pub fn variance(column: Column) -> Self {
        Self {
            kind: DepartureKind::Variance,
            column,
        }
    }
}

/// `Y ~ N(beta'x + sum_mean gamma_j c_j, sigma^2 (1 + sum_var gamma_j c_j))`.
///
/// `theta = (beta, sigma)`; design rows hold the regressors followed by one
/// column per departure.
#[derive(Debug, Clone)]
pub struct NormalRegression {
    name: String,
    description: String,
    regressors: Vec<Column>,
    departures: Vec<Departure>,
    theta0: Vec<f64>,
    gamma0: Vec<f64>,
    spread: f64,
    first_group_fraction: Option<f64>,
}

impl NormalRegression {
    pub fn new(
        name: &str,
        description: &str,
        regressors: Vec<Column>,
        departures: Vec<Departure>,
        theta0: Vec<f64>,
        spread: f64,
    ) -> Result<Self> {
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
        if departures.is_empty() {
            return Err(Error::Dimension("at least one departure is needed".into()));
        }
        let q = departures.len();
        Ok(Self {
            name: name.into(),
            description: description.into(),
            regressors,
            departures,
            theta0,
            gamma0: vec![0.0; q],
            spread,
            first_group_fraction: None,
        })
    }

    /// Split observations into two groups, the first holding a share `r`.
    pub fn with_groups(mut self, r: f64) -> Self {
        self.first_group_fraction = Some(r);
        self
    }

    fn k(&self) -> usize {
        self.regressors.len()
    }

    fn is_two_sample(&self) -> bool {
        self.first_group_fraction.is_some()
    }

    /// Design with `m` observations in the first group and `n` in the second.
    pub fn two_sample_design(&self, m: usize, n: usize) -> Design {
        Design::spaced(m + n, self.spread, m, &self.columns())
    }

    fn columns(&self) -> Vec<Column> {
        self.regressors
            .iter()
            .copied()
            .chain(self.departures.iter().map(|d| d.column))
            .collect()
    }

    /// Mean and variance factor `1 + v` at a row.
    fn moments(&self, row: &[f64], theta: &[f64], gamma: &[f64]) -> (f64, f64) {
        let k = self.k();
        let mut mean: f64 = (0..k).map(|j| theta[j] * row[j]).sum();
        let mut v = 0.0;
        for (j, d) in self.departures.iter().enumerate() {
            let c = row[k + j];
            match d.kind {
                DepartureKind::Mean => mean += gamma[j] * c,
                DepartureKind::Variance => v += gamma[j] * c,
            }
        }
        (mean, 1.0 + v)
    }

    fn point(&self, x: f64, second_group: bool) -> CovariatePoint {
        CovariatePoint {
            x,
            spread: self.spread,
            z: 0.0,
            second_group,
        }
    }

    fn row_at(&self, at: &CovariatePoint) -> Vec<f64> {
        self.columns().iter().map(|c| c.value(at)).collect()
    }
}

impl Model for NormalRegression {
    fn name(&self) -> &str {
        &self.name
    }
    fn description(&self) -> &str {
        &self.description
    }
    fn p(&self) -> usize {
        self.k() + 1
    }
    fn q(&self) -> usize {
        self.departures.len()
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    fn gamma0(&self) -> &[f64] {
        &self.gamma0
    }

    fn default_design(&self, n: usize) -> Design {
        let first = match self.first_group_fraction {
            Some(r) => (r * n as f64).round() as usize,
            None => n,
        };
        Design::spaced(n, self.spread, first, &self.columns())
    }

    fn log_density(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let sigma = theta[self.k()];
        let (mean, f) = self.moments(row, theta, gamma);
        if !(sigma > 0.0) || !(f > 0.0) {
            return f64::NEG_INFINITY;
        }
        let r = y - mean;
        -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * f.ln() - r * r / (2.0 * sigma * sigma * f)
    }

    fn score(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let k = self.k();
        let sigma = theta[k];
        let (mean, f) = self.moments(row, theta, gamma);
        let r = y - mean;
        let s2 = sigma * sigma * f;
        let mut out = Vec::with_capacity(k + 1 + self.q());
        out.extend(row[..k].iter().map(|x| r * x / s2));
        out.push(-1.0 / sigma + r * r / (sigma * s2));
        for (j, d) in self.departures.iter().enumerate() {
            let c = row[k + j];
            out.push(match d.kind {
                DepartureKind::Mean => r * c / s2,
                DepartureKind::Variance => -0.5 * c / f + r * r * c / (2.0 * s2 * f),
            });
        }
        out
    }

    fn closed_form_info(&self, theta: &[f64], design: &Design) -> Option<Result<PartitionedInfo>> {
        let k = self.k();
        let q = self.q();
        let dim = k + 1 + q;
        let sigma = theta[k];
        let s2 = sigma * sigma;
        let mut j = DMatrix::<f64>::zeros(dim, dim);
        for row in design.rows() {
            for a in 0..k {
                for b in 0..k {
                    j[(a, b)] += row[a] * row[b] / s2;
                }
            }
            for (u, du) in self.departures.iter().enumerate() {
                let cu = row[k + u];
                let iu = k + 1 + u;
                match du.kind {
                    DepartureKind::Mean => {
                        for a in 0..k {
                            j[(a, iu)] += row[a] * cu / s2;
                            j[(iu, a)] += row[a] * cu / s2;
                        }
                    }
                    DepartureKind::Variance => {
                        j[(k, iu)] += cu / sigma;
                        j[(iu, k)] += cu / sigma;
                    }
                }
                for (w, dw) in self.departures.iter().enumerate() {
                    let cw = row[k + w];
                    let iw = k + 1 + w;
                    j[(iu, iw)] += match (du.kind, dw.kind) {
                        (DepartureKind::Mean, DepartureKind::Mean) => cu * cw / s2,
                        (DepartureKind::Variance, DepartureKind::Variance) => 0.5 * cu * cw,
                        _ => 0.0,
                    };
                }
            }
        }
        let n = design.rows().len().max(1) as f64;
        j /= n;
        j[(k, k)] = 2.0 / s2;
        Some(PartitionedInfo::from_full(&j, q))
    }

    fn sample(&self, rng: &mut StreamRng, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let sigma = theta[self.k()];
        let (mean, f) = self.moments(row, theta, gamma);
        let e: f64 = StandardNormal.sample(rng);
        mean + sigma * f.sqrt() * e
    }

    fn null_expect(&self, f: &dyn Fn(f64) -> f64, row: &[f64], theta: &[f64]) -> Result<f64> {
        let sigma = theta[self.k()];
        let (mean, _) = self.moments(row, theta, &self.gamma0);
        GaussianExpectation::default().hermite(|z| f(mean + sigma * z), 0.0)
    }

    fn in_support(&self, y: f64) -> bool {
        y.is_finite()
    }

    fn params_valid(&self, theta: &[f64], gamma: &[f64]) -> bool {
        theta.iter().chain(gamma).all(|v| v.is_finite()) && theta[self.k()] > 0.0
    }

    fn estimands(&self) -> Vec<Estimand> {
        if self.is_two_sample() {
            return two_sample_estimands();
        }
        let k = self.k();
        let mut out = Vec::new();
        let end = self.row_at(&self.point(self.spread, false));
        let deps = self.departures.clone();
        let mean_at = move |row: Vec<f64>, deps: Vec<Departure>| {
            move |t: &[f64], g: &[f64]| {
                let mut m: f64 = (0..k).map(|j| t[j] * row[j]).sum();
                for (j, d) in deps.iter().enumerate() {
                    if d.kind == DepartureKind::Mean {
                        m += g[j] * row[k + j];
                    }
                }
                m
            }
        };
        out.push(Estimand::new("mean-at-end", mean_at(end.clone(), deps.clone())));
        let mid = self.row_at(&self.point(0.5 * self.spread, false));
        out.push(Estimand::new("mean-at-centre", mean_at(mid, deps.clone())));
        if let Some(pos) = self.regressors.iter().position(|c| matches!(c, Column::X | Column::T)) {
            out.push(
                Estimand::new("slope", move |t, _| t[pos]).with_gradient(move |t, g| {
                    let mut dt = vec![0.0; t.len()];
                    dt[pos] = 1.0;
                    (dt, vec![0.0; g.len()])
                }),
            );
        }
        if deps.iter().any(|d| d.kind == DepartureKind::Variance) {
            out.push(Estimand::new("sd-at-end", move |t, g| {
                let mut v = 1.0;
                for (j, d) in deps.iter().enumerate() {
                    if d.kind == DepartureKind::Variance {
                        v += g[j] * end[k + j];
                    }
                }
                t[k] * v.max(0.0).sqrt()
            }));
        }
        out
    }

    fn narrow_start(&self, ys: &[f64], design: &Design) -> Vec<f64> {
        let k = self.k();
        let n = ys.len();
        let x = DMatrix::from_fn(n, k, |i, j| design.row(i)[j]);
        let y = DVector::from_column_slice(ys);
        let xtx = x.transpose() * &x;
        let beta = xtx
            .cholesky()
            .map(|c| c.solve(&(x.transpose() * &y)))
            .unwrap_or_else(|| DVector::zeros(k));
        let resid = &y - &x * &beta;
        let sigma = (resid.norm_squared() / n as f64).sqrt().max(1e-8);
        beta.iter().copied().chain(std::iter::once(sigma)).collect()
    }
}

/// Estimands for `(xi_1, xi_2, sigma)` with `sigma_2^2 = sigma^2 (1 + gamma)`.
fn two_sample_estimands() -> Vec<Estimand> {
    vec![
        // Delta = (nu^2 + omega^2)^{1/2}, nu = (xi_2 - xi_1)/sigma_bar,
        // omega^2 = 4 log(sigma_bar^2 / (sigma_1 sigma_2)).
        Estimand::new("delta", |t, g| {
            let s1sq = t[2] * t[2];
            let s2sq = s1sq * (1.0 + g[0]);
            let sbar2 = 0.5 * (s1sq + s2sq);
            let nu2 = (t[1] - t[0]).powi(2) / sbar2;
            let omega2 = 4.0 * (sbar2 / (s1sq * s2sq).sqrt()).ln();
            (nu2 + omega2).sqrt()
        }),
        Estimand::new("mean-diff", |t, _| t[1] - t[0])
            .with_gradient(|_, _| (vec![-1.0, 1.0, 0.0], vec![0.0])),
        Estimand::new("sd-ratio", |_, g| (1.0 + g[0]).sqrt())
            .with_gradient(|_, g| (vec![0.0, 0.0, 0.0], vec![0.5 / (1.0 + g[0]).sqrt()])),
    ]
}
