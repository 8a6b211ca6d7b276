use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{Estimand, Model};
use crate::numerics::PartitionedInfo;

/// Local limit quantities for one estimand at the null.
#[derive(Debug, Clone)]
pub struct LimitGeometry {
    /// `J21 J11^{-1} dmu/dtheta - dmu/dgamma`, one entry per departure.
    pub b: Vec<f64>,
    /// `J^22`; `kappa^2` in the 1x1 case.
    pub lower: DMatrix<f64>,
    /// `(dmu/dtheta)' J11^{-1} dmu/dtheta`.
    pub tau0_sq: f64,
    /// `g' J^{-1} g` with the full gradient `g`, computed independently of
    /// `tau0_sq + b' J^22 b`.
    pub tau_sq_sandwich: f64,
}

impl LimitGeometry {
    /// Scalar geometry from its three defining numbers.
    pub fn scalar(b: f64, kappa: f64, tau0_sq: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(tau0_sq >= 0.0) {
            return Err(Error::domain("limit geometry", format!("kappa = {kappa}, tau0^2 = {tau0_sq}")));
        }
        let k2 = kappa * kappa;
        Ok(Self {
            b: vec![b],
            lower: DMatrix::from_element(1, 1, k2),
            tau0_sq,
            tau_sq_sandwich: tau0_sq + b * b * k2,
        })
    }

    pub fn kappa(&self) -> Result<f64> {
        if self.b.len() != 1 {
            return Err(Error::Dimension("scalar kappa needs q = 1".into()));
        }
        Ok(self.lower[(0, 0)].sqrt())
    }

    /// `b' J^22 b`; `b^2 kappa^2` when q = 1.
    pub fn bias_variance_scale(&self) -> f64 {
        let b = DVector::from_column_slice(&self.b);
        b.dot(&(&self.lower * &b))
    }

    /// `tau^2 = tau0^2 + b' J^22 b`, the wide limit variance.
    pub fn tau_sq(&self) -> f64 {
        self.tau0_sq + self.bias_variance_scale()
    }

    /// Relative disagreement between the two routes to `tau^2`.
    pub fn consistency_gap(&self) -> f64 {
        (self.tau_sq() - self.tau_sq_sandwich).abs() / self.tau_sq().max(f64::MIN_POSITIVE)
    }
}

/// Geometry for `estimand` at the null point of `model`.
pub fn limit_geometry(info: &PartitionedInfo, estimand: &Estimand, model: &dyn Model) -> Result<LimitGeometry> {
    let (dt, dg) = estimand.gradient(model.theta0(), model.gamma0());
    geometry_from_gradient(info, dt, dg)
}

/// Geometry from an information matrix and the estimand gradient
/// `(dmu/dtheta, dmu/dgamma)`; with fitted values this gives plug-in
/// estimates.
pub fn geometry_from_gradient(info: &PartitionedInfo, dt: Vec<f64>, dg: Vec<f64>) -> Result<LimitGeometry> {
    if dt.len() != info.p() || dg.len() != info.q() {
        return Err(Error::Dimension(format!(
            "estimand gradient has ({}, {}) entries, information is ({}, {})",
            dt.len(),
            dg.len(),
            info.p(),
            info.q()
        )));
    }
    let inv = info.partitioned_inverse()?;
    let dt = DVector::from_vec(dt);
    let dg = DVector::from_vec(dg);
    let j11_inv_dt = &inv.narrow_inverse * &dt;
    let tau0_sq = dt.dot(&j11_inv_dt);
    let b = info.j21() * &j11_inv_dt - &dg;

    let full: DVector<f64> = DVector::from_iterator(dt.len() + dg.len(), dt.iter().chain(dg.iter()).copied());
    let tau_sq_sandwich = full.dot(&(inv.assembled() * &full));

    Ok(LimitGeometry {
        b: b.iter().copied().collect(),
        lower: inv.lower,
        tau0_sq,
        tau_sq_sandwich,
    })
}

/// `b' J^22 b R + tau0^2`: limit mean squared error of `sqrt(n)(mu* - mu)`
/// for an estimator with limit risk `R` at `a = delta/kappa`.
pub fn limit_mse(geom: &LimitGeometry, risk: f64) -> f64 {
    geom.bias_variance_scale() * risk + geom.tau0_sq
}
