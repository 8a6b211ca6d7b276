use nalgebra::DMatrix;
use rand_distr::{Distribution, Gamma, Weibull};

use super::{Design, Estimand, Model};
use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate;
use crate::numerics::rng::StreamRng;
use crate::numerics::{gamma_log_derivatives, PartitionedInfo};

/// `E f(Y)` for `Y ~ Exp(theta)`. The unit interval of `u = theta y` is
/// mapped through `u = e^{-s}` so log singularities at zero become smooth.
pub(crate) fn exponential_expect(f: &dyn Fn(f64) -> f64, theta: f64) -> Result<f64> {
    let head = integrate(
        &|s: f64| {
            let u = (-s).exp();
            f(u / theta) * (-u).exp() * u
        },
        0.0,
        50.0,
    )?;
    let tail = integrate(&|u: f64| f(u / theta) * (-u).exp(), 1.0, 60.0)?;
    Ok(head + tail)
}

fn mean_positive(ys: &[f64]) -> f64 {
    ys.iter().sum::<f64>() / ys.len() as f64
}

fn check_rate(theta0: f64) -> Result<()> {
    if !(theta0 > 0.0) || !theta0.is_finite() {
        return Err(Error::Parameter(format!("rate must be positive, got {theta0}")));
    }
    Ok(())
}

/// Exponential inside the Weibull family
/// `f(y) = exp{-(theta y)^gamma} gamma (theta y)^{gamma-1} theta`.
#[derive(Debug, Clone)]
pub struct WeibullVsExp {
    theta0: [f64; 1],
}

impl WeibullVsExp {
    pub fn new(theta0: f64) -> Result<Self> {
        check_rate(theta0)?;
        Ok(Self { theta0: [theta0] })
    }
}

impl Model for WeibullVsExp {
    fn name(&self) -> &str {
        "weibull-vs-exp"
    }
    fn description(&self) -> &str {
        "exponential vs Weibull shape departure"
    }
    fn p(&self) -> usize {
        1
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    fn gamma0(&self) -> &[f64] {
        &[1.0]
    }
    fn default_design(&self, n: usize) -> Design {
        Design::iid(n)
    }

    fn log_density(&self, y: f64, _row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let (t, g) = (theta[0], gamma[0]);
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let ty = t * y;
        g.ln() + t.ln() + (g - 1.0) * ty.ln() - ty.powf(g)
    }

    fn score(&self, y: f64, _row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let (t, g) = (theta[0], gamma[0]);
        let ty = t * y;
        let lt = ty.ln();
        let tyg = ty.powf(g);
        vec![g / t * (1.0 - tyg), 1.0 / g + lt - tyg * lt]
    }

    fn closed_form_info(&self, theta: &[f64], _design: &Design) -> Option<Result<PartitionedInfo>> {
        let t = theta[0];
        Some(gamma_log_derivatives(1.0).and_then(|(psi1, trigamma1)| {
            let one_minus_k = 1.0 + psi1;
            PartitionedInfo::scalar(
                DMatrix::from_element(1, 1, 1.0 / (t * t)),
                vec![one_minus_k / t],
                trigamma1 + one_minus_k * one_minus_k,
            )
        }))
    }

    fn sample(&self, rng: &mut StreamRng, _row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        Weibull::new(1.0 / theta[0], gamma[0])
            .expect("validated Weibull parameters")
            .sample(rng)
    }

    fn null_expect(&self, f: &dyn Fn(f64) -> f64, _row: &[f64], theta: &[f64]) -> Result<f64> {
        exponential_expect(f, theta[0])
    }

    fn in_support(&self, y: f64) -> bool {
        y > 0.0 && y.is_finite()
    }

    fn params_valid(&self, theta: &[f64], gamma: &[f64]) -> bool {
        theta[0] > 0.0 && gamma[0] > 0.0 && theta[0].is_finite() && gamma[0].is_finite()
    }

    fn estimands(&self) -> Vec<Estimand> {
        let ln2 = std::f64::consts::LN_2;
        vec![
            Estimand::new("median", move |t, g| ln2.powf(1.0 / g[0]) / t[0]).with_gradient(move |t, g| {
                let mu = ln2.powf(1.0 / g[0]) / t[0];
                (vec![-mu / t[0]], vec![-mu * ln2.ln() / (g[0] * g[0])])
            }),
            Estimand::new("mean", |t, g| libm::tgamma(1.0 + 1.0 / g[0]) / t[0]).with_gradient(|t, g| {
                let mu = libm::tgamma(1.0 + 1.0 / g[0]) / t[0];
                let psi = gamma_log_derivatives(1.0 + 1.0 / g[0]).map(|d| d.0).unwrap_or(f64::NAN);
                (vec![-mu / t[0]], vec![-mu * psi / (g[0] * g[0])])
            }),
            Estimand::new("survival-at-1", |t, g| (-(t[0]).powf(g[0])).exp()),
        ]
    }

    fn narrow_start(&self, ys: &[f64], _design: &Design) -> Vec<f64> {
        vec![1.0 / mean_positive(ys)]
    }
}

/// Exponential inside the gamma family
/// `f(y) = theta^gamma / Gamma(gamma) y^{gamma-1} e^{-theta y}`.
#[derive(Debug, Clone)]
pub struct GammaVsExp {
    theta0: [f64; 1],
}

impl GammaVsExp {
    pub fn new(theta0: f64) -> Result<Self> {
        check_rate(theta0)?;
        Ok(Self { theta0: [theta0] })
    }
}

impl Model for GammaVsExp {
    fn name(&self) -> &str {
        "gamma-vs-exp"
    }
    fn description(&self) -> &str {
        "exponential vs gamma shape departure"
    }
    fn p(&self) -> usize {
        1
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    fn gamma0(&self) -> &[f64] {
        &[1.0]
    }
    fn default_design(&self, n: usize) -> Design {
        Design::iid(n)
    }

    fn log_density(&self, y: f64, _row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        let (t, g) = (theta[0], gamma[0]);
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        g * t.ln() - libm::lgamma(g) + (g - 1.0) * y.ln() - t * y
    }

    fn score(&self, y: f64, _row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64> {
        let (t, g) = (theta[0], gamma[0]);
        let psi = gamma_log_derivatives(g).map(|d| d.0).unwrap_or(f64::NAN);
        vec![g / t - y, (t * y).ln() - psi]
    }

    fn closed_form_info(&self, theta: &[f64], _design: &Design) -> Option<Result<PartitionedInfo>> {
        let t = theta[0];
        Some(gamma_log_derivatives(1.0).and_then(|(_, trigamma1)| {
            PartitionedInfo::scalar(DMatrix::from_element(1, 1, 1.0 / (t * t)), vec![-1.0 / t], trigamma1)
        }))
    }

    fn sample(&self, rng: &mut StreamRng, _row: &[f64], theta: &[f64], gamma: &[f64]) -> f64 {
        Gamma::new(gamma[0], 1.0 / theta[0])
            .expect("validated gamma parameters")
            .sample(rng)
    }

    fn null_expect(&self, f: &dyn Fn(f64) -> f64, _row: &[f64], theta: &[f64]) -> Result<f64> {
        exponential_expect(f, theta[0])
    }

    fn in_support(&self, y: f64) -> bool {
        y > 0.0 && y.is_finite()
    }

    fn params_valid(&self, theta: &[f64], gamma: &[f64]) -> bool {
        theta[0] > 0.0 && gamma[0] > 0.0 && theta[0].is_finite() && gamma[0].is_finite()
    }

    fn estimands(&self) -> Vec<Estimand> {
        vec![
            Estimand::new("mean", |t, g| g[0] / t[0])
                .with_gradient(|t, g| (vec![-g[0] / (t[0] * t[0])], vec![1.0 / t[0]])),
            Estimand::new("sd", |t, g| g[0].sqrt() / t[0]).with_gradient(|t, g| {
                let s = g[0].sqrt();
                (vec![-s / (t[0] * t[0])], vec![0.5 / (s * t[0])])
            }),
        ]
    }

    fn narrow_start(&self, ys: &[f64], _design: &Design) -> Vec<f64> {
        vec![1.0 / mean_positive(ys)]
    }
}
