//! Estimators `a_hat(z) = c(z) z` of `a` from one observation `Z ~ N(a, 1)`.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;

use super::bayes::{bayes_posterior, two_point_mean, uniform_mean, Prior};
use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate;
use crate::numerics::Smoothness;

/// Pre-test cut-off matching AIC: `Z^2 > 2`.
pub const PRETEST_AIC: f64 = std::f64::consts::SQRT_2;
/// Upper 10% point of `|N(0,1)|`, i.e. of chi-square(1) on the `Z` scale.
pub const PRETEST_TEN_PERCENT: f64 = 1.644_853_626_951_472_2;
/// Shared parameter for the limited-translation and arctan rules; both then
/// reach a worst-case risk of about 1.252.
pub const DEFAULT_M: f64 = 0.502;
pub const DEFAULT_QHAT_EPS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    Narrow,
    Wide,
    Linear { c: f64 },
    /// Wide when `|z| > m`, narrow otherwise.
    Pretest { m: f64 },
    /// `c(z) = z^2 / (1 + z^2)`.
    EmpiricalBayes,
    /// Posterior mean of `q` under a log-uniform scale prior truncated at `eps`.
    Qhat { eps: f64 },
    Bayes { prior: Prior },
    EpsilonBayes { eps: f64, sigma: f64 },
    /// `m tanh(m z)`.
    TanhTwoPoint { m: f64 },
    /// Bayes under the `cos^2` prior on `[-m, m]`.
    Bickel { m: f64 },
    /// `z` clipped to `[-m, m]`.
    Restricted { m: f64 },
    /// Limited translation: 0 on `[-m, m]`, `z -+ m` outside.
    EfronMorris { m: f64 },
    /// `z - m (2/pi) arctan z`.
    Atan { m: f64 },
    UniformBayes { m: f64 },
    /// `c(z) = (z^2 - 1)_+ / z^2`.
    MlPlus,
    /// `c(z) = (z^2 - l)_+ / (z^2 + 1 - l)`.
    QTilde { l: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AEstimator {
    rule: Rule,
}

fn check(ok: bool, what: &'static str, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::domain(what, detail()))
    }
}

fn positive(m: f64, name: &'static str) -> Result<()> {
    check(m > 0.0 && m.is_finite(), name, || format!("m must be positive, got {m}"))
}

impl AEstimator {
    pub fn new(rule: Rule) -> Result<Self> {
        match &rule {
            Rule::Linear { c } => check(c.is_finite(), "linear", || format!("c = {c}"))?,
            Rule::Pretest { m } => check(*m >= 0.0 && m.is_finite(), "pretest", || format!("m = {m}"))?,
            Rule::Qhat { eps } => check(*eps > 0.0 && *eps < 1.0, "qhat", || format!("eps = {eps} not in (0, 1)"))?,
            Rule::Bayes { prior } => prior.validate()?,
            Rule::EpsilonBayes { eps, sigma } => {
                check(*eps > 0.0 && *eps <= 1.0, "epsilon_bayes", || format!("eps = {eps} not in (0, 1]"))?;
                check(*sigma > 0.0 && sigma.is_finite(), "epsilon_bayes", || format!("sigma = {sigma}"))?;
            }
            Rule::TanhTwoPoint { m } => positive(*m, "tanh_twopoint")?,
            Rule::Bickel { m } => positive(*m, "bickel")?,
            Rule::Restricted { m } => positive(*m, "restricted")?,
            Rule::EfronMorris { m } => positive(*m, "efron_morris")?,
            Rule::Atan { m } => check(*m >= 0.0 && m.is_finite(), "atan", || format!("m = {m}"))?,
            Rule::UniformBayes { m } => positive(*m, "uniform_bayes")?,
            Rule::QTilde { l } => check((0.0..=1.0).contains(l), "qtilde", || format!("l = {l} not in [0, 1]"))?,
            Rule::Narrow | Rule::Wide | Rule::EmpiricalBayes | Rule::MlPlus => {}
        }
        Ok(Self { rule })
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    /// Canonical spec string, parseable by [`AEstimator::parse`].
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Parse `name[:key=value,...]`. Hyphens and underscores are
    /// interchangeable in names.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n, a),
            None => (spec, ""),
        };
        let name = name.trim().replace('-', "_");
        let mut params: Vec<(String, String)> = Vec::new();
        for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("'{part}' in '{spec}' is not key=value")))?;
            params.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut p = Params { spec, params };
        let rule = match name.as_str() {
            "narrow" => Rule::Narrow,
            "wide" => Rule::Wide,
            "linear" => Rule::Linear { c: p.required("c")? },
            "pretest" => Rule::Pretest {
                m: p.take_with("m", |v| match v {
                    "aic" => Some(PRETEST_AIC),
                    "p10" => Some(PRETEST_TEN_PERCENT),
                    _ => None,
                })?
                .unwrap_or(1.0),
            },
            "eb" => Rule::EmpiricalBayes,
            "qhat" => Rule::Qhat {
                eps: p.optional("eps")?.unwrap_or(DEFAULT_QHAT_EPS),
            },
            "bayes" => Rule::Bayes {
                prior: Prior::Normal {
                    sigma: p.optional("sigma")?.unwrap_or(1.0),
                },
            },
            "epsilon_bayes" => Rule::EpsilonBayes {
                eps: p.optional("eps")?.unwrap_or(0.5),
                sigma: p.optional("sigma")?.unwrap_or(1.0),
            },
            "tanh_twopoint" | "tanh" => Rule::TanhTwoPoint {
                m: p.optional("m")?.unwrap_or(1.0),
            },
            "bickel" => Rule::Bickel {
                m: p.optional("m")?.unwrap_or(1.0),
            },
            "restricted" => Rule::Restricted {
                m: p.optional("m")?.unwrap_or(1.0),
            },
            "efron_morris" => Rule::EfronMorris {
                m: p.optional("m")?.unwrap_or(DEFAULT_M),
            },
            "atan" => Rule::Atan {
                m: p.optional("m")?.unwrap_or(DEFAULT_M),
            },
            "uniform_bayes" => Rule::UniformBayes {
                m: p.optional("m")?.unwrap_or(1.0),
            },
            "mlplus" => Rule::MlPlus,
            "qtilde" => Rule::QTilde { l: p.required("l")? },
            _ => {
                return Err(Error::Unknown {
                    kind: "estimator",
                    name: spec.to_string(),
                })
            }
        };
        p.finish()?;
        Self::new(rule)
    }

    /// `a_hat(z)`. NaN if an inner integral fails, which the risk
    /// quadrature reports as a non-finite integrand.
    pub fn a_hat(&self, z: f64) -> f64 {
        match &self.rule {
            Rule::Narrow => 0.0,
            Rule::Wide => z,
            Rule::Restricted { m } => z.clamp(-m, *m),
            Rule::EfronMorris { m } => {
                if z.abs() <= *m {
                    0.0
                } else {
                    z - m.copysign(z)
                }
            }
            Rule::Atan { m } => z - m * FRAC_2_PI * z.atan(),
            Rule::TanhTwoPoint { m } => two_point_mean(*m, z),
            Rule::UniformBayes { m } => uniform_mean(*m, z),
            Rule::Bickel { m } => bayes_mean(&Prior::CosineSquared { m: *m }, z),
            Rule::Bayes { prior } => bayes_mean(prior, z),
            Rule::EpsilonBayes { eps, sigma } => {
                let s2 = sigma * sigma;
                let b = (s2 + 1.0).sqrt() * (-0.5 * s2 / (s2 + 1.0) * z * z).exp();
                eps / (eps + (1.0 - eps) * b) * s2 / (s2 + 1.0) * z
            }
            _ => self.weight(z) * z,
        }
    }

    /// `c(z) = a_hat(z) / z`, with `c(0)` the limit as `z -> 0`.
    pub fn weight(&self, z: f64) -> f64 {
        match &self.rule {
            Rule::Narrow => 0.0,
            Rule::Wide => 1.0,
            Rule::Linear { c } => *c,
            Rule::Pretest { m } => {
                if z.abs() > *m {
                    1.0
                } else {
                    0.0
                }
            }
            Rule::EmpiricalBayes => {
                let z2 = z * z;
                z2 / (1.0 + z2)
            }
            Rule::Qhat { eps } => qhat_weight(z, *eps),
            Rule::MlPlus => {
                let z2 = z * z;
                if z2 <= 1.0 {
                    0.0
                } else {
                    (z2 - 1.0) / z2
                }
            }
            Rule::QTilde { l } => {
                let z2 = z * z;
                (z2 - l).max(0.0) / (z2 + 1.0 - l)
            }
            _ if z == 0.0 => self.weight_at_zero(),
            _ => self.a_hat(z) / z,
        }
    }

    fn weight_at_zero(&self) -> f64 {
        match &self.rule {
            Rule::Restricted { .. } => 1.0,
            Rule::EfronMorris { .. } => 0.0,
            Rule::Atan { m } => 1.0 - 2.0 * m / PI,
            Rule::TanhTwoPoint { m } => m * m,
            Rule::EpsilonBayes { eps, sigma } => {
                let s2 = sigma * sigma;
                let b = (s2 + 1.0).sqrt();
                eps / (eps + (1.0 - eps) * b) * s2 / (s2 + 1.0)
            }
            // d/dz E(a | z) = Var(a | z); for priors symmetric about 0 the
            // mean vanishes at 0 so this is the limit of a_hat(z)/z
            Rule::Bayes { prior } => posterior_variance(prior, 0.0),
            Rule::Bickel { m } => posterior_variance(&Prior::CosineSquared { m: *m }, 0.0),
            Rule::UniformBayes { m } => posterior_variance(&Prior::Uniform { lo: -m, hi: *m }, 0.0),
            _ => self.weight(0.0),
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self.rule {
            Rule::Pretest { .. }
            | Rule::Restricted { .. }
            | Rule::EfronMorris { .. }
            | Rule::MlPlus
            | Rule::QTilde { .. } => Smoothness::Piecewise,
            _ => Smoothness::Smooth,
        }
    }

    /// Points where `a_hat` jumps or has a kink.
    pub fn knots(&self) -> Vec<f64> {
        match self.rule {
            Rule::Pretest { m } | Rule::Restricted { m } | Rule::EfronMorris { m } => vec![-m, m],
            Rule::MlPlus => vec![-1.0, 1.0],
            Rule::QTilde { l } => vec![-l.sqrt(), l.sqrt()],
            _ => Vec::new(),
        }
    }

    /// All built-in rules are odd: `a_hat(-z) = -a_hat(z)`.
    pub fn is_symmetric(&self) -> bool {
        match &self.rule {
            Rule::Bayes { prior } => prior_is_symmetric(prior),
            _ => true,
        }
    }
}

fn prior_is_symmetric(prior: &Prior) -> bool {
    match prior {
        Prior::Normal { .. } | Prior::CosineSquared { .. } => true,
        Prior::PointMass { at } => *at == 0.0,
        Prior::Uniform { lo, hi } => *lo == -hi,
        Prior::Discrete { points, weights } => points.iter().zip(weights).all(|(p, w)| {
            points
                .iter()
                .zip(weights)
                .any(|(p2, w2)| *p2 == -p && w2 == w)
        }),
        Prior::Mixture(parts) => parts.iter().all(|(_, p)| prior_is_symmetric(p)),
    }
}

fn bayes_mean(prior: &Prior, z: f64) -> f64 {
    bayes_posterior(prior, z).map(|p| p.mean).unwrap_or(f64::NAN)
}

fn posterior_variance(prior: &Prior, z: f64) -> f64 {
    bayes_posterior(prior, z).map(|p| p.variance).unwrap_or(f64::NAN)
}

/// `q_hat(z)`: ratio of `int_eps^1 (1-q)^{-1/2} e^{-(1-q) z^2/2} dq` to the
/// same integral with an extra `1/q`.
///
/// Written in `s = sqrt(1 - q)` both integrands are bounded:
/// `2 e^{-s^2 z^2/2}` and `2 e^{-s^2 z^2/2} / (1 - s^2)` on `[0, sqrt(1-eps)]`.
pub fn qhat_weight(z: f64, eps: f64) -> f64 {
    let top = (1.0 - eps).sqrt();
    if z == 0.0 {
        return 2.0 * top / ((1.0 + top) / (1.0 - top)).ln();
    }
    let z2 = z * z;
    let num = |s: f64| 2.0 * (-0.5 * s * s * z2).exp();
    let den = |s: f64| 2.0 * (-0.5 * s * s * z2).exp() / (1.0 - s * s);
    // the mass sits within a few 1/|z| of the origin
    let split = (6.0 / z.abs()).min(top);
    let both = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(integrate(&f, 0.0, split)? + integrate(&f, split, top)?)
    };
    match (both(&num), both(&den)) {
        (Ok(n), Ok(d)) => n / d,
        _ => f64::NAN,
    }
}

struct Params<'a> {
    spec: &'a str,
    params: Vec<(String, String)>,
}

impl Params<'_> {
    fn take_with(&mut self, key: &str, named: impl Fn(&str) -> Option<f64>) -> Result<Option<f64>> {
        let Some(pos) = self.params.iter().position(|(k, _)| k == key) else {
            return Ok(None);
        };
        let (_, v) = self.params.remove(pos);
        if let Some(x) = named(&v) {
            return Ok(Some(x));
        }
        v.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Parameter(format!("{key}={v} in '{}' is not a number", self.spec)))
    }

    fn optional(&mut self, key: &str) -> Result<Option<f64>> {
        self.take_with(key, |_| None)
    }

    fn required(&mut self, key: &str) -> Result<f64> {
        self.optional(key)?
            .ok_or_else(|| Error::Parameter(format!("'{}' needs {key}=<value>", self.spec)))
    }

    fn finish(self) -> Result<()> {
        match self.params.first() {
            None => Ok(()),
            Some((k, _)) => Err(Error::Parameter(format!("unknown parameter '{k}' in '{}'", self.spec))),
        }
    }
}

impl fmt::Display for AEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Rule::Narrow => write!(f, "narrow"),
            Rule::Wide => write!(f, "wide"),
            Rule::Linear { c } => write!(f, "linear:c={c}"),
            Rule::Pretest { m } => write!(f, "pretest:m={m}"),
            Rule::EmpiricalBayes => write!(f, "eb"),
            Rule::Qhat { eps } => write!(f, "qhat:eps={eps}"),
            Rule::Bayes { prior } => match prior {
                Prior::Normal { sigma } => write!(f, "bayes:sigma={sigma}"),
                other => write!(f, "bayes[{other:?}]"),
            },
            Rule::EpsilonBayes { eps, sigma } => write!(f, "epsilon_bayes:eps={eps},sigma={sigma}"),
            Rule::TanhTwoPoint { m } => write!(f, "tanh_twopoint:m={m}"),
            Rule::Bickel { m } => write!(f, "bickel:m={m}"),
            Rule::Restricted { m } => write!(f, "restricted:m={m}"),
            Rule::EfronMorris { m } => write!(f, "efron_morris:m={m}"),
            Rule::Atan { m } => write!(f, "atan:m={m}"),
            Rule::UniformBayes { m } => write!(f, "uniform_bayes:m={m}"),
            Rule::MlPlus => write!(f, "mlplus"),
            Rule::QTilde { l } => write!(f, "qtilde:l={l}"),
        }
    }
}

/// One member of every family at its default parameters.
pub fn catalogue() -> Vec<AEstimator> {
    [
        Rule::Narrow,
        Rule::Wide,
        Rule::Linear { c: 0.5 },
        Rule::Pretest { m: 1.0 },
        Rule::EmpiricalBayes,
        Rule::Qhat { eps: DEFAULT_QHAT_EPS },
        Rule::Bayes {
            prior: Prior::Normal { sigma: 1.0 },
        },
        Rule::EpsilonBayes { eps: 0.5, sigma: 1.0 },
        Rule::TanhTwoPoint { m: 1.0 },
        Rule::Bickel { m: 1.0 },
        Rule::Restricted { m: 1.0 },
        Rule::EfronMorris { m: DEFAULT_M },
        Rule::Atan { m: DEFAULT_M },
        Rule::UniformBayes { m: 1.0 },
        Rule::MlPlus,
        Rule::QTilde { l: 0.5 },
    ]
    .into_iter()
    .map(|r| AEstimator::new(r).expect("catalogue parameters are valid"))
    .collect()
}

/// The seven rules whose limit risks make up the reference risk table, in
/// table order.
pub fn risk_table_estimators() -> Vec<AEstimator> {
    ["wide", "narrow", "eb", "qhat", "pretest", "efron_morris", "atan"]
        .iter()
        .map(|s| AEstimator::parse(s).expect("built-in spec"))
        .collect()
}
