use super::LimitGeometry;
use crate::error::{Error, Result};
use crate::numerics::{std_normal_cdf, std_normal_sf};

/// `Pr(-z <= N(shift, 1) <= z)`.
pub fn ci_coverage(shift: f64, z_quantile: f64) -> Result<f64> {
    if !(z_quantile > 0.0) {
        return Err(Error::domain("ci_coverage", format!("quantile {z_quantile} must be positive")));
    }
    Ok(std_normal_cdf(z_quantile - shift) - std_normal_cdf(-z_quantile - shift))
}

/// `Pr(|N(shift, 1)| > z)`, kept accurate in both tails.
fn miss(shift: f64, z: f64) -> f64 {
    std_normal_sf(z - shift) + std_normal_cdf(-z - shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    Narrow,
    Wide,
}

/// Miss probability plus `w` times the interval length, on the
/// `sqrt(n)` scale, for an interval `estimate +- z * sd`.
pub fn interval_risk(kind: IntervalKind, z: f64, w: f64, geom: &LimitGeometry, delta: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::domain("interval_risk", format!("weight {w} must be nonnegative")));
    }
    if !(z > 0.0) {
        return Err(Error::domain("interval_risk", format!("quantile {z} must be positive")));
    }
    let b = match geom.b.as_slice() {
        [b] => *b,
        _ => return Err(Error::Dimension("interval risk needs q = 1".into())),
    };
    let tau0 = geom.tau0_sq.sqrt();
    Ok(match kind {
        IntervalKind::Narrow => {
            if !(tau0 > 0.0) {
                return Err(Error::domain("interval_risk", "tau0 = 0".to_string()));
            }
            miss(b * delta / tau0, z) + 2.0 * w * z * tau0
        }
        IntervalKind::Wide => miss(0.0, z) + 2.0 * w * z * geom.tau_sq().sqrt(),
    })
}
