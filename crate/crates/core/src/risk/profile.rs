use rayon::prelude::*;

use super::{risk_under, Loss};
use crate::error::{Error, Result};
use crate::estimators::AEstimator;

/// `a = 0, 0.05, ..., 5`.
pub fn default_grid() -> Vec<f64> {
    grid(0.0, 5.0, 0.05)
}

/// Inclusive grid `lo, lo + step, ..., hi`, built from integer multiples so
/// the points do not drift.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| lo + step * i as f64).collect()
}

#[derive(Debug, Clone)]
pub struct RiskProfile {
    pub estimator: AEstimator,
    pub loss: Loss,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl RiskProfile {
    /// `(argmax a, max R)` over the grid; the first maximiser on ties.
    pub fn max(&self) -> (f64, f64) {
        self.grid
            .iter()
            .zip(&self.values)
            .fold((f64::NAN, f64::NEG_INFINITY), |best, (&a, &r)| if r > best.1 { (a, r) } else { best })
    }

    pub fn eval(&self, a: f64) -> Result<f64> {
        risk_under(&self.estimator, a, self.loss)
    }
}

/// Risk over a grid. Grid points are evaluated in parallel and assembled
/// in grid order.
pub fn risk_profile(est: &AEstimator, grid: &[f64], loss: Loss) -> Result<RiskProfile> {
    let values = grid
        .par_iter()
        .map(|&a| risk_under(est, a, loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskProfile {
        estimator: est.clone(),
        loss,
        grid: grid.to_vec(),
        values,
    })
}

/// Where `R1 - R2` changes sign inside the grid hull, refined by bisection
/// to `1e-4` or better. Grid points where the difference is exactly zero are
/// reported as they are.
pub fn crossing_points(r1: &RiskProfile, r2: &RiskProfile) -> Result<Vec<f64>> {
    if r1.grid != r2.grid {
        return Err(Error::Dimension("risk profiles must share a grid".into()));
    }
    let diff: Vec<f64> = r1.values.iter().zip(&r2.values).map(|(a, b)| a - b).collect();
    let f = |a: f64| -> Result<f64> { Ok(r1.eval(a)? - r2.eval(a)?) };
    let mut out = Vec::new();
    for i in 0..diff.len() {
        if diff[i] == 0.0 {
            let prev_nonzero = (0..i).rev().map(|j| diff[j]).find(|d| *d != 0.0);
            let next_nonzero = diff[i + 1..].iter().copied().find(|d| *d != 0.0);
            if let (Some(p), Some(n)) = (prev_nonzero, next_nonzero) {
                if p * n < 0.0 && !(i > 0 && diff[i - 1] == 0.0) {
                    out.push(r1.grid[i]);
                }
            }
            continue;
        }
        if i + 1 < diff.len() && diff[i] * diff[i + 1] < 0.0 {
            let (mut lo, mut hi) = (r1.grid[i], r1.grid[i + 1]);
            let mut flo = diff[i];
            while hi - lo > 1e-7 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm * flo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    Ok(out)
}

/// CSV with header `a,<estimator>...` and one row per grid point, values
/// in `{:.16e}` so that parsing them back is exact.
pub fn write_profiles_csv<W: std::io::Write>(profiles: &[RiskProfile], out: W) -> Result<()> {
    let Some(first) = profiles.first() else {
        return Err(Error::Parameter("no risk profiles to write".into()));
    };
    if profiles.iter().any(|p| p.grid != first.grid) {
        return Err(Error::Dimension("risk profiles must share a grid".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["a".to_string()];
    header.extend(profiles.iter().map(|p| match p.loss {
        Loss::L2 => p.estimator.name(),
        loss => format!("{}[{loss}]", p.estimator.name()),
    }));
    w.write_record(&header)?;
    for (i, a) in first.grid.iter().enumerate() {
        let mut row = vec![format!("{a:.16e}")];
        row.extend(profiles.iter().map(|p| format!("{:.16e}", p.values[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
