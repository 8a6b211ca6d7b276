//! Narrow/wide model pairs: densities, scores, information at the null,
//! estimands, and the built-in catalogue of worked examples.

mod design;
mod lifetime;
mod logistic;
mod regression;
mod transformation;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::rng::StreamRng;
use crate::numerics::PartitionedInfo;

pub use design::{Column, Design};
pub use lifetime::{GammaVsExp, WeibullVsExp};
pub use logistic::{Logistic, LogisticDeparture};
pub use regression::{Departure, DepartureKind, NormalRegression};
pub use transformation::{reparameterised_noise_summaries, transformation_constants, NoiseSummaries, Transformation};

/// A narrow model `f(y, theta, gamma0)` inside a wide model `f(y, theta, gamma)`.
///
/// Observations are scalar responses `y`, optionally paired with a design row.
/// Parameters are ordered `(theta, gamma)` everywhere: in scores, in the
/// information matrix and in fits.
pub trait Model: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn description(&self) -> &str;
    /// Narrow-parameter count.
    fn p(&self) -> usize;
    /// Departure count.
    fn q(&self) -> usize {
        1
    }
    fn theta0(&self) -> &[f64];
    fn gamma0(&self) -> &[f64];
    fn default_design(&self, n: usize) -> Design;
    fn log_density(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64;
    /// Gradient of the log density with respect to `(theta, gamma)`.
    fn score(&self, y: f64, row: &[f64], theta: &[f64], gamma: &[f64]) -> Vec<f64>;
    /// Information at `(theta, gamma0)` averaged over the design, when known
    /// in closed form.
    fn closed_form_info(&self, _theta: &[f64], _design: &Design) -> Option<Result<PartitionedInfo>> {
        None
    }
    fn sample(&self, rng: &mut StreamRng, row: &[f64], theta: &[f64], gamma: &[f64]) -> f64;
    /// `E f(Y)` for `Y` drawn from the narrow model at `theta` given `row`.
    fn null_expect(&self, f: &dyn Fn(f64) -> f64, row: &[f64], theta: &[f64]) -> Result<f64>;
    fn in_support(&self, y: f64) -> bool;
    fn params_valid(&self, theta: &[f64], gamma: &[f64]) -> bool;
    fn estimands(&self) -> Vec<Estimand>;
    /// Starting point (ideally the exact ML solution) for the narrow fit.
    fn narrow_start(&self, ys: &[f64], design: &Design) -> Vec<f64>;

    fn estimand(&self, name: &str) -> Result<Estimand> {
        self.estimands()
            .into_iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Unknown {
                kind: "estimand",
                name: format!("{name} (model {})", self.name()),
            })
    }

    /// `(U(y), V(y))` stacked: the wide score at the null.
    fn score_at_null(&self, y: f64, row: &[f64]) -> Vec<f64> {
        self.score(y, row, self.theta0(), self.gamma0())
    }
}

pub type SharedModel = Arc<dyn Model>;

type ParamFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// A focus parameter `mu(theta, gamma)`.
#[derive(Clone)]
pub struct Estimand {
    pub name: String,
    mu: Arc<ParamFn>,
    grad: Option<Arc<GradFn>>,
}

impl std::fmt::Debug for Estimand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Estimand")
            .field("name", &self.name)
            .field("closed_form_gradient", &self.grad.is_some())
            .finish()
    }
}

impl Estimand {
    pub fn new(name: impl Into<String>, mu: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            mu: Arc::new(mu),
            grad: None,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn value(&self, theta: &[f64], gamma: &[f64]) -> f64 {
        (self.mu)(theta, gamma)
    }

    pub fn has_closed_form_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// `(dmu/dtheta, dmu/dgamma)`, closed form when registered.
    pub fn gradient(&self, theta: &[f64], gamma: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.grad {
            Some(g) => g(theta, gamma),
            None => self.fd_gradient(theta, gamma),
        }
    }

    /// Central differences with step `1e-6 (1 + |parameter|)`.
    pub fn fd_gradient(&self, theta: &[f64], gamma: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let diff = |which: usize, i: usize| {
            let mut t = theta.to_vec();
            let mut g = gamma.to_vec();
            let slot = if which == 0 { &mut t[i] } else { &mut g[i] };
            let base = *slot;
            let h = 1e-6 * (1.0 + base.abs());
            *slot = base + h;
            let up = self.value(&t, &g);
            let slot = if which == 0 { &mut t[i] } else { &mut g[i] };
            *slot = base - h;
            let down = self.value(&t, &g);
            (up - down) / (2.0 * h)
        };
        (
            (0..theta.len()).map(|i| diff(0, i)).collect(),
            (0..gamma.len()).map(|i| diff(1, i)).collect(),
        )
    }
}

/// Wide-model information at the null: the closed form when the model has
/// one, otherwise per-row score covariances averaged over the design.
pub fn information_at_null(model: &dyn Model, design: &Design) -> Result<PartitionedInfo> {
    match model.closed_form_info(model.theta0(), design) {
        Some(r) => r.map_err(|e| explain_indefinite(model, e)),
        None => numeric_information(model, design),
    }
}

/// Per-row `E_0[S S']` by quadrature (or support summation), averaged.
pub fn numeric_information(model: &dyn Model, design: &Design) -> Result<PartitionedInfo> {
    let k = model.p() + model.q();
    let theta = model.theta0();
    let mut acc = DMatrix::<f64>::zeros(k, k);
    let rows = design.rows_or_empty();
    for row in &rows {
        for i in 0..k {
            for j in i..k {
                let v = model.null_expect(
                    &|y| {
                        let s = model.score_at_null(y, row);
                        s[i] * s[j]
                    },
                    row,
                    theta,
                )?;
                acc[(i, j)] += v;
                if i != j {
                    acc[(j, i)] += v;
                }
            }
        }
    }
    acc /= rows.len() as f64;
    PartitionedInfo::from_full(&acc, model.q()).map_err(|e| explain_indefinite(model, e))
}

fn explain_indefinite(model: &dyn Model, e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { block, detail } => Error::NotPositiveDefinite {
            block,
            detail: format!(
                "{detail}; model '{}': try a larger or more varied design, or check the declared scores",
                model.name()
            ),
        },
        other => other,
    }
}

/// Names of the built-in models, in catalogue order.
pub const CATALOGUE_NAMES: [&str; 13] = [
    "weibull-vs-exp",
    "gamma-vs-exp",
    "linreg-quadratic",
    "linreg-quadratic-intercept",
    "linreg-covariate",
    "linreg-varhet",
    "linreg-quad-varhet",
    "transformation-mean",
    "transformation-centered",
    "transformation-regression",
    "logistic-quadratic",
    "logistic-power",
    "two-sample",
];

/// Options for building a catalogue family at a non-default null point or
/// design.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOptions {
    pub theta0: Option<Vec<f64>>,
    /// Width `b` of the covariate range `x_i = b i/(n+1)`.
    pub spread: Option<f64>,
    /// Share of observations in the first group (two-sample).
    pub first_group_fraction: Option<f64>,
}

pub fn builtin_catalogue() -> Vec<SharedModel> {
    CATALOGUE_NAMES
        .iter()
        .map(|n| build_model(n, &ModelOptions::default()).expect("catalogue entries build"))
        .collect()
}

pub fn model_by_name(name: &str) -> Result<SharedModel> {
    build_model(name, &ModelOptions::default())
}

pub fn build_model(name: &str, opts: &ModelOptions) -> Result<SharedModel> {
    let spread = opts.spread.unwrap_or(1.0);
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::Parameter(format!("spread must be positive, got {spread}")));
    }
    let theta = |default: Vec<f64>| -> Result<Vec<f64>> {
        match &opts.theta0 {
            None => Ok(default),
            Some(t) if t.len() == default.len() => Ok(t.clone()),
            Some(t) => Err(Error::Dimension(format!(
                "model '{name}' needs {} null parameters, got {}",
                default.len(),
                t.len()
            ))),
        }
    };
    use Column::*;
    let m: SharedModel = match name {
        "weibull-vs-exp" => Arc::new(WeibullVsExp::new(theta(vec![1.0])?[0])?),
        "gamma-vs-exp" => Arc::new(GammaVsExp::new(theta(vec![1.0])?[0])?),
        "linreg-quadratic" => Arc::new(NormalRegression::new(
            name,
            "linear regression through the centred covariate vs added quadratic term",
            vec![T],
            vec![Departure::mean(T2)],
            theta(vec![1.0, 1.0])?,
            spread,
        )?),
        "linreg-quadratic-intercept" => Arc::new(NormalRegression::new(
            name,
            "linear regression with intercept vs added quadratic term",
            vec![One, T],
            vec![Departure::mean(T2)],
            theta(vec![0.0, 1.0, 1.0])?,
            spread,
        )?),
        "linreg-covariate" => Arc::new(NormalRegression::new(
            name,
            "linear regression vs an omitted second covariate",
            vec![One, X],
            vec![Departure::mean(Z)],
            theta(vec![0.0, 1.0, 1.0])?,
            spread,
        )?),
        "linreg-varhet" => Arc::new(NormalRegression::new(
            name,
            "linear regression vs variance sigma^2 (1 + gamma x)",
            vec![One, X],
            vec![Departure::variance(X)],
            theta(vec![0.0, 1.0, 1.0])?,
            spread,
        )?),
        "linreg-quad-varhet" => Arc::new(NormalRegression::new(
            name,
            "linear regression vs quadratic term and variance heterogeneity jointly",
            vec![One, T],
            vec![Departure::mean(T2), Departure::variance(X)],
            theta(vec![0.0, 1.0, 1.0])?,
            spread,
        )?),
        "transformation-mean" => Arc::new(Transformation::new(
            name,
            "normal sample vs the lambda-transformation family, constant mean",
            vec![One],
            theta(vec![0.0, 1.0])?,
            spread,
        )?),
        "transformation-centered" => Arc::new(Transformation::new(
            name,
            "regression through the centred covariate vs the lambda-transformation family",
            vec![T],
            theta(vec![1.0, 1.0])?,
            spread,
        )?),
        "transformation-regression" => Arc::new(Transformation::new(
            name,
            "linear regression with intercept vs the lambda-transformation family",
            vec![One, X],
            theta(vec![0.0, 1.0, 1.0])?,
            spread,
        )?),
        "logistic-quadratic" => Arc::new(Logistic::new(
            name,
            "logistic regression vs added quadratic term in the centred covariate",
            vec![One, T],
            LogisticDeparture::Quadratic,
            theta(vec![0.0, 1.0])?,
            opts.spread.unwrap_or(4.0),
        )?),
        "logistic-power" => Arc::new(Logistic::new(
            name,
            "logistic regression vs p(x)^eta",
            vec![One, X],
            LogisticDeparture::Power,
            theta(vec![-1.0, 0.5])?,
            opts.spread.unwrap_or(4.0),
        )?),
        "two-sample" => {
            let r = opts.first_group_fraction.unwrap_or(0.5);
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Parameter(format!("group fraction must lie in (0, 1), got {r}")));
            }
            Arc::new(
                NormalRegression::new(
                    name,
                    "two normal samples, equal variances vs sigma_2^2 = sigma^2 (1 + gamma)",
                    vec![NotG, G],
                    vec![Departure::variance(G)],
                    theta(vec![0.0, 1.0, 1.0])?,
                    spread,
                )?
                .with_groups(r),
            )
        }
        _ => {
            return Err(Error::Unknown {
                kind: "model",
                name: name.to_string(),
            })
        }
    };
    Ok(m)
}
