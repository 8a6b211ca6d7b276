//! Maximum likelihood for the narrow and wide models.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{Design, Model};

pub const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Vec<f64>,
    /// Fitted departure parameters; `gamma0` for a narrow fit.
    pub gamma: Vec<f64>,
    pub wide: bool,
    pub log_likelihood: f64,
    /// Negative Hessian of the log-likelihood over the free parameters.
    pub observed_information: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl FitResult {
    /// Plug-in `kappa^2`: `n` times the departure block of the inverse
    /// observed information. Wide fits only.
    pub fn kappa_squared(&self, n: usize) -> Result<DMatrix<f64>> {
        if !self.wide {
            return Err(Error::Parameter("kappa needs a wide fit".into()));
        }
        let p = self.theta.len();
        let q = self.gamma.len();
        let inv = self
            .observed_information
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotPositiveDefinite {
                block: crate::InfoBlock::Assembled,
                detail: "observed information is singular at the wide fit".into(),
            })?;
        Ok(inv.view((p, p), (q, q)).into_owned() * n as f64)
    }

    pub fn kappa_hat(&self, n: usize) -> Result<f64> {
        let k2 = self.kappa_squared(n)?;
        if k2.nrows() != 1 {
            return Err(Error::Dimension("scalar kappa needs q = 1".into()));
        }
        if !(k2[(0, 0)] > 0.0) {
            return Err(Error::NotPositiveDefinite {
                block: crate::InfoBlock::Schur,
                detail: format!("plug-in kappa^2 = {}", k2[(0, 0)]),
            });
        }
        Ok(k2[(0, 0)].sqrt())
    }
}

struct Objective<'a> {
    model: &'a dyn Model,
    ys: &'a [f64],
    design: &'a Design,
    wide: bool,
}

impl Objective<'_> {
    fn split<'v>(&self, x: &'v [f64]) -> (&'v [f64], std::borrow::Cow<'v, [f64]>) {
        let p = self.model.p();
        if self.wide {
            (&x[..p], std::borrow::Cow::Borrowed(&x[p..]))
        } else {
            (x, std::borrow::Cow::Owned(self.model.gamma0().to_vec()))
        }
    }

    fn valid(&self, x: &[f64]) -> bool {
        let (t, g) = self.split(x);
        x.iter().all(|v| v.is_finite()) && self.model.params_valid(t, &g)
    }

    fn log_lik(&self, x: &[f64]) -> f64 {
        if !self.valid(x) {
            return f64::NEG_INFINITY;
        }
        let (t, g) = self.split(x);
        let mut acc = 0.0;
        for (i, &y) in self.ys.iter().enumerate() {
            acc += self.model.log_density(y, self.design.row(i), t, &g);
        }
        if acc.is_nan() {
            f64::NEG_INFINITY
        } else {
            acc
        }
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let (t, g) = self.split(x);
        let dim = x.len();
        let mut acc = DVector::zeros(dim);
        for (i, &y) in self.ys.iter().enumerate() {
            let s = self.model.score(y, self.design.row(i), t, &g);
            for k in 0..dim {
                acc[k] += s[k];
            }
        }
        acc
    }

    /// Hessian by central differences of the analytic gradient.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let dim = x.len();
        let mut h = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let step = 1e-5 * (1.0 + x[k].abs());
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[k] += step;
            dn[k] -= step;
            // stay inside the parameter space near a boundary
            let (gu, gd, width) = match (self.valid(&up), self.valid(&dn)) {
                (true, true) => (self.gradient(&up), self.gradient(&dn), 2.0 * step),
                (true, false) => (self.gradient(&up), self.gradient(x), step),
                (false, true) => (self.gradient(x), self.gradient(&dn), step),
                (false, false) => (self.gradient(x), self.gradient(x), 1.0),
            };
            let col = (gu - gd) / width;
            h.set_column(k, &col);
        }
        0.5 * (&h + h.transpose())
    }
}

const DECREMENT_FLOOR: f64 = 1e-14;

fn tolerance(ll: f64) -> f64 {
    1e-8 * (1.0 + ll.abs())
}

fn newton(obj: &Objective, start: Vec<f64>) -> Result<FitResult> {
    let mut x = start;
    let mut ll = obj.log_lik(&x);
    if !ll.is_finite() {
        return Err(Error::domain("fit", format!("log-likelihood is {ll} at the starting point {x:?}")));
    }
    let mut trace = String::new();
    let mut grad = obj.gradient(&x);
    for iter in 0..=MAX_ITERATIONS {
        let gnorm = grad.norm();
        let _ = writeln!(trace, "iter {iter}: loglik {ll:.12e} |grad| {gnorm:.3e}");
        let neg_h = -obj.hessian(&x);
        let direction = newton_direction(&neg_h, &grad);
        // Newton decrement: the predicted gain of a full step. Below the
        // resolution of `ll` the gradient is rounding noise.
        let stalled = neg_h.clone().cholesky().is_some()
            && 0.5 * grad.dot(&direction) <= DECREMENT_FLOOR * (1.0 + ll.abs());
        if gnorm <= tolerance(ll) || stalled {
            let (theta, gamma) = {
                let (t, g) = obj.split(&x);
                (t.to_vec(), g.into_owned())
            };
            return Ok(FitResult {
                theta,
                gamma,
                wide: obj.wide,
                log_likelihood: ll,
                observed_information: neg_h,
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        if iter == MAX_ITERATIONS {
            break;
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = x.iter().zip(direction.iter()).map(|(a, d)| a + step * d).collect();
            let cll = obj.log_lik(&cand);
            if cll.is_finite() && cll >= ll {
                x = cand;
                ll = cll;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        grad = obj.gradient(&x);
        if !moved {
            let gnorm = grad.norm();
            let _ = writeln!(trace, "line search failed at iter {iter} (|grad| {gnorm:.3e})");
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                grad_norm: gnorm,
                trace,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        grad_norm: grad.norm(),
        trace,
    })
}

/// Newton direction when `-H` is positive definite, otherwise a ridge-
/// regularised one that still points uphill.
fn newton_direction(neg_h: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = neg_h.clone().cholesky() {
        return ch.solve(grad);
    }
    let scale = neg_h.diagonal().abs().max().max(1.0);
    let mut ridge = 1e-6 * scale;
    let dim = grad.len();
    for _ in 0..40 {
        let m = neg_h + DMatrix::identity(dim, dim) * ridge;
        if let Some(ch) = m.cholesky() {
            return ch.solve(grad);
        }
        ridge *= 10.0;
    }
    grad / scale
}

fn check_data(model: &dyn Model, ys: &[f64], design: &Design) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::Parameter("no observations".into()));
    }
    design.check_len(ys.len())?;
    if let Some((i, y)) = ys.iter().enumerate().find(|(_, y)| !model.in_support(**y)) {
        return Err(Error::domain(
            "data",
            format!("observation {} = {y} is outside the support of {}", i + 1, model.name()),
        ));
    }
    Ok(())
}

pub fn fit_narrow(model: &dyn Model, ys: &[f64], design: &Design) -> Result<FitResult> {
    check_data(model, ys, design)?;
    let obj = Objective {
        model,
        ys,
        design,
        wide: false,
    };
    newton(&obj, model.narrow_start(ys, design))
}

/// Wide fit started from the narrow fit with `gamma = gamma0`, so the result
/// never has a lower log-likelihood than the narrow one.
pub fn fit_wide(model: &dyn Model, ys: &[f64], design: &Design) -> Result<FitResult> {
    let narrow = fit_narrow(model, ys, design)?;
    fit_wide_from(model, ys, design, &narrow)
}

pub fn fit_wide_from(model: &dyn Model, ys: &[f64], design: &Design, narrow: &FitResult) -> Result<FitResult> {
    check_data(model, ys, design)?;
    let obj = Objective {
        model,
        ys,
        design,
        wide: true,
    };
    let mut start = narrow.theta.clone();
    start.extend_from_slice(model.gamma0());
    newton(&obj, start)
}
