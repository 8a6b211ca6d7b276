//! Tolerance radius and the scalar diagnostics attached to a narrow model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{information_at_null, Design, Model};
use crate::numerics::{chisq_quantile, noncentral_chisq_cdf, noncentral_chisq_sf, PartitionedInfo};

/// `kappa` for one departure direction, the full `J^22` block otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Kappa {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl Kappa {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Kappa::Scalar(k) => Some(*k),
            Kappa::Matrix(_) => None,
        }
    }

    /// `J^22` (a 1x1 matrix holding `kappa^2` when q = 1).
    pub fn lower_block(&self) -> DMatrix<f64> {
        match self {
            Kappa::Scalar(k) => DMatrix::from_element(1, 1, k * k),
            Kappa::Matrix(m) => m.clone(),
        }
    }
}

pub fn kappa(info: &PartitionedInfo) -> Result<Kappa> {
    let lower = info.partitioned_inverse()?.lower;
    Ok(if info.q() == 1 {
        Kappa::Scalar(lower[(0, 0)].sqrt())
    } else {
        Kappa::Matrix(lower)
    })
}

pub fn kappa_scalar(info: &PartitionedInfo) -> Result<f64> {
    kappa(info)?
        .scalar()
        .ok_or_else(|| Error::Dimension(format!("scalar kappa needs q = 1, model has q = {}", info.q())))
}

/// Noncentrality `delta' (J^22)^{-1} delta`; `(delta/kappa)^2` when q = 1.
pub fn noncentrality(info: &PartitionedInfo, delta: &[f64]) -> Result<f64> {
    if delta.len() != info.q() {
        return Err(Error::Dimension(format!("delta has {} entries, q = {}", delta.len(), info.q())));
    }
    let lower = info.partitioned_inverse()?.lower;
    let d = DVector::from_column_slice(delta);
    let sol = lower
        .cholesky()
        .map(|c| c.solve(&d))
        .ok_or_else(|| Error::NotPositiveDefinite {
            block: crate::InfoBlock::Schur,
            detail: "J^22 is not positive definite".into(),
        })?;
    Ok(d.dot(&sol))
}

/// Whether the narrow estimator is at least as good as the wide one.
///
/// q = 1: `|delta| <= kappa`. q > 1 without an estimand: the ellipsoid
/// `delta' (J^22)^{-1} delta <= 1`, which covers every estimand at once.
/// With an estimand gradient `b`: the band `(b'delta)^2 <= b' J^22 b`.
pub fn narrow_better(info: &PartitionedInfo, delta: &[f64], b: Option<&[f64]>) -> Result<bool> {
    let q = info.q();
    if delta.len() != q {
        return Err(Error::Dimension(format!("delta has {} entries, q = {q}", delta.len())));
    }
    if q == 1 {
        let k = kappa_scalar(info)?;
        return Ok(delta[0].abs() <= k);
    }
    match b {
        None => Ok(noncentrality(info, delta)? <= 1.0),
        Some(b) => {
            if b.len() != q {
                return Err(Error::Dimension(format!("b has {} entries, q = {q}", b.len())));
            }
            let lower = info.partitioned_inverse()?.lower;
            let bv = DVector::from_column_slice(b);
            let bd = bv.dot(&DVector::from_column_slice(delta));
            Ok(bd * bd <= bv.dot(&(&lower * &bv)))
        }
    }
}

/// `(d, rho^2)` with `d = kappa^2 J22` and `rho^2 = 1 - 1/d`.
pub fn danger_index(info: &PartitionedInfo) -> Result<(f64, f64)> {
    let k = kappa_scalar(info)?;
    let d = k * k * info.j22()[(0, 0)];
    Ok((d, 1.0 - 1.0 / d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorderDistances {
    pub kullback_leibler: f64,
    pub l1: f64,
    pub weighted_l2: f64,
}

/// `E_0 |V(Y)|` averaged over the design: the L1 distance per unit of
/// `delta/sqrt(n)`.
pub fn mean_abs_departure_score(model: &dyn Model, design: &Design) -> Result<f64> {
    if model.q() != 1 {
        return Err(Error::Dimension("L1 distance needs q = 1".into()));
    }
    let idx = model.p();
    let rows = design.rows_or_empty();
    let mut acc = 0.0;
    for row in &rows {
        acc += model.null_expect(&|y| model.score_at_null(y, row)[idx].abs(), row, model.theta0())?;
    }
    Ok(acc / rows.len() as f64)
}

/// Leading-order distances between the null and `gamma0 + delta/sqrt(n)`.
pub fn border_distances(
    model: &dyn Model,
    info: &PartitionedInfo,
    design: &Design,
    n: usize,
    delta: f64,
) -> Result<BorderDistances> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    if info.q() != 1 {
        return Err(Error::Dimension("border distances need q = 1".into()));
    }
    let nf = n as f64;
    let j22 = info.j22()[(0, 0)];
    let ev = if delta == 0.0 {
        0.0
    } else {
        mean_abs_departure_score(model, design)?
    };
    Ok(BorderDistances {
        kullback_leibler: 0.5 * delta * delta * j22 / nf,
        l1: delta.abs() / nf.sqrt() * ev,
        weighted_l2: delta * delta * j22 / nf,
    })
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", format!("{level} is not in (0, 1)")));
    }
    Ok(())
}

/// Power of the level-`level` chi-square test when the noncentrality is `ncp`.
pub fn detection_power_ncp(ncp: f64, level: f64, q: u32) -> Result<f64> {
    check_level(level)?;
    let crit = chisq_quantile(1.0 - level, q)?;
    noncentral_chisq_sf(crit, q, ncp)
}

/// Power at `a = delta/kappa` (q = 1) or at noncentrality `a^2` for q > 1,
/// where `a = 1` marks the border of the tolerance ellipsoid.
pub fn detection_power(a: f64, level: f64, q: u32) -> Result<f64> {
    detection_power_ncp(a * a, level, q)
}

/// `Pr{chi2_q(ncp) <= 2q}`: AIC keeps the narrow model.
pub fn aic_narrow_prob(ncp: f64, q: u32) -> Result<f64> {
    noncentral_chisq_cdf(2.0 * q as f64, q, ncp)
}

/// `Pr{chi2_q(ncp) <= q log n}`: the Schwarz criterion keeps the narrow model.
pub fn schwarz_narrow_prob(ncp: f64, q: u32, n: f64) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::domain("schwarz_narrow_prob", format!("n = {n}")));
    }
    noncentral_chisq_cdf(q as f64 * n.ln(), q, ncp)
}

pub const POWER_LEVELS: [f64; 4] = [0.01, 0.05, 0.10, 0.20];

#[derive(Debug, Clone)]
pub struct ToleranceReport {
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub kappa: Kappa,
    /// `kappa/sqrt(n)` per departure direction.
    pub radius: Vec<f64>,
    /// `(d, rho^2)`, q = 1 only.
    pub danger: Option<(f64, f64)>,
    /// Distances at `|delta| = kappa`, q = 1 only.
    pub border: Option<BorderDistances>,
    /// `E_0|V|`, q = 1 only.
    pub mean_abs_v: Option<f64>,
    /// `(level, power)` at the border.
    pub power: Vec<(f64, f64)>,
    /// AIC narrow probability at the null and at the border.
    pub aic: (f64, f64),
    /// Schwarz narrow probability at the null and at the border, for this n.
    pub schwarz: Option<(f64, f64)>,
}

impl ToleranceReport {
    /// `(quantity, value)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        match &self.kappa {
            Kappa::Scalar(k) => out.push(("kappa".to_string(), *k)),
            Kappa::Matrix(m) => {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        out.push((format!("J22_inv[{},{}]", i + 1, j + 1), m[(i, j)]));
                    }
                }
            }
        }
        for (i, r) in self.radius.iter().enumerate() {
            let key = if self.q == 1 {
                "radius".to_string()
            } else {
                format!("radius[{}]", i + 1)
            };
            out.push((key, *r));
        }
        if let Some((d, rho2)) = self.danger {
            out.push(("d".into(), d));
            out.push(("rho2".into(), rho2));
        }
        if let Some(b) = self.border {
            out.push(("kl_border".into(), b.kullback_leibler));
            out.push(("l1_border".into(), b.l1));
            out.push(("weighted_l2_border".into(), b.weighted_l2));
        }
        if let Some(v) = self.mean_abs_v {
            out.push(("mean_abs_v".into(), v));
        }
        for (level, pw) in &self.power {
            out.push((format!("power_border@{level}"), *pw));
        }
        out.push(("aic_narrow@null".into(), self.aic.0));
        out.push(("aic_narrow@border".into(), self.aic.1));
        if let Some((s0, s1)) = self.schwarz {
            out.push(("schwarz_narrow@null".into(), s0));
            out.push(("schwarz_narrow@border".into(), s1));
        }
        out
    }
}

pub fn tolerance_report(model: &dyn Model, design: &Design) -> Result<ToleranceReport> {
    let n = design.n();
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let info = information_at_null(model, design)?;
    let kap = kappa(&info)?;
    let lower = kap.lower_block();
    let radius = (0..info.q()).map(|i| (lower[(i, i)] / n as f64).sqrt()).collect();
    let q = info.q() as u32;
    let (danger, border, mean_abs_v) = if info.q() == 1 {
        let k = lower[(0, 0)].sqrt();
        let ev = mean_abs_departure_score(model, design)?;
        let b = border_distances(model, &info, design, n, k)?;
        (Some(danger_index(&info)?), Some(b), Some(ev))
    } else {
        (None, None, None)
    };
    let power = POWER_LEVELS
        .iter()
        .map(|&l| detection_power(1.0, l, q).map(|p| (l, p)))
        .collect::<Result<Vec<_>>>()?;
    let aic = (aic_narrow_prob(0.0, q)?, aic_narrow_prob(1.0, q)?);
    let schwarz = if n >= 2 {
        Some((
            schwarz_narrow_prob(0.0, q, n as f64)?,
            schwarz_narrow_prob(1.0, q, n as f64)?,
        ))
    } else {
        None
    };
    Ok(ToleranceReport {
        model: model.name().to_string(),
        n,
        p: info.p(),
        q: info.q(),
        kappa: kap,
        radius,
        danger,
        border,
        mean_abs_v,
        power,
        aic,
        schwarz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_catalogue, model_by_name};
    use crate::numerics::std_normal_cdf;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn info_of(name: &str) -> PartitionedInfo {
        let m = model_by_name(name).unwrap();
        information_at_null(m.as_ref(), &m.default_design(1)).unwrap()
    }

    #[test]
    fn kappa_golden_values() {
        let k = kappa_scalar(&info_of("weibull-vs-exp")).unwrap();
        assert!((k - (6.0 / (PI * PI)).sqrt()).abs() < 1e-12);
        // the published 0.779 is truncated, not rounded
        assert_eq!((k * 1000.0).floor() / 1000.0, 0.779);
        let k = kappa_scalar(&info_of("gamma-vs-exp")).unwrap();
        assert!((k - 1.245).abs() < 5e-4);
    }

    #[test]
    fn orthogonal_departure() {
        let info = PartitionedInfo::scalar(DMatrix::from_element(1, 1, 2.0), vec![0.0], 4.0).unwrap();
        assert!((kappa_scalar(&info).unwrap() - 0.5).abs() < 1e-15);
        let (d, rho2) = danger_index(&info).unwrap();
        assert!((d - 1.0).abs() < 1e-15 && rho2.abs() < 1e-15);
    }

    #[test]
    fn danger_indices() {
        let (d, r) = danger_index(&info_of("weibull-vs-exp")).unwrap();
        assert!((d - 1.109).abs() < 1e-3 && (r - 0.098).abs() < 1e-3);
        let (d, r) = danger_index(&info_of("gamma-vs-exp")).unwrap();
        assert!((d - 2.551).abs() < 1e-3 && (r - 0.608).abs() < 1e-3);
    }

    #[test]
    fn boundary_is_inclusive() {
        let info = info_of("weibull-vs-exp");
        let k = kappa_scalar(&info).unwrap();
        assert!(narrow_better(&info, &[k], None).unwrap());
        assert!(narrow_better(&info, &[-k], None).unwrap());
        assert!(narrow_better(&info, &[0.0], None).unwrap());
        assert!(!narrow_better(&info, &[k * (1.0 + 1e-12)], None).unwrap());
        assert!(narrow_better(&info, &[1.0, 2.0], None).is_err());
    }

    #[test]
    fn ellipsoid_and_band() {
        // J = identity gives J^22 = I
        let info = PartitionedInfo::from_full(&DMatrix::identity(3, 3), 2).unwrap();
        assert!(!narrow_better(&info, &[1.0, 1.0], None).unwrap());
        assert!(narrow_better(&info, &[1.0, 1.0], Some(&[1.0, 0.0])).unwrap());
        assert!(!narrow_better(&info, &[1.0, 1.0], Some(&[1.0, 1.0])).unwrap());
    }

    #[test]
    fn border_distances_weibull() {
        let m = model_by_name("weibull-vs-exp").unwrap();
        let d = m.default_design(1);
        let ev = mean_abs_departure_score(m.as_ref(), &d).unwrap();
        assert!((ev - 0.923).abs() < 3e-3, "E|V| = {ev}");
        let info = information_at_null(m.as_ref(), &d).unwrap();
        let k = kappa_scalar(&info).unwrap();
        let b = border_distances(m.as_ref(), &info, &d, 100, k).unwrap();
        assert!((b.l1 - k * ev / 10.0).abs() < 1e-15);
        let zero = border_distances(m.as_ref(), &info, &d, 100, 0.0).unwrap();
        assert_eq!((zero.kullback_leibler, zero.l1, zero.weighted_l2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gamma_border_kl() {
        let m = model_by_name("gamma-vs-exp").unwrap();
        let d = m.default_design(1);
        let info = information_at_null(m.as_ref(), &d).unwrap();
        let k = kappa_scalar(&info).unwrap();
        let b = border_distances(m.as_ref(), &info, &d, 25, k).unwrap();
        assert!((b.kullback_leibler * 2.0 * 25.0 - 2.551).abs() < 1e-3);
        assert!((b.weighted_l2 - 2.0 * b.kullback_leibler).abs() < 1e-15);
    }

    #[test]
    fn power_and_selection_constants() {
        assert!((detection_power(1.0, 0.05, 1).unwrap() - 0.170).abs() < 1e-3);
        assert!((detection_power(0.0, 0.05, 1).unwrap() - 0.05).abs() < 1e-12);
        for &(l, p) in &[(0.01, 0.057), (0.10, 0.264), (0.20, 0.400)] {
            assert!((detection_power(1.0, l, 1).unwrap() - p).abs() < 1e-3, "level {l}");
        }
        assert!((detection_power(1.0, 0.05, 2).unwrap() - 0.133).abs() < 1e-3);
        assert!((detection_power(1.0, 0.05, 3).unwrap() - 0.116).abs() < 1e-3);
        for (q, (a0, a1)) in [(0.843, 0.653), (0.865, 0.731), (0.888, 0.788), (0.908, 0.830)].iter().enumerate() {
            let q = q as u32 + 1;
            assert!((aic_narrow_prob(0.0, q).unwrap() - a0).abs() < 1e-3, "q {q}");
            assert!((aic_narrow_prob(1.0, q).unwrap() - a1).abs() < 1e-3, "q {q}");
        }
    }

    #[test]
    fn schwarz_probabilities() {
        let e2 = (2.0f64).exp();
        assert!((schwarz_narrow_prob(0.0, 1, e2).unwrap() - aic_narrow_prob(0.0, 1).unwrap()).abs() < 1e-12);
        // one degree of freedom: Phi(r - s) - Phi(-r - s)
        let r = (100f64).ln().sqrt();
        let oracle = std_normal_cdf(r - 1.0) - std_normal_cdf(-r - 1.0);
        assert!((schwarz_narrow_prob(1.0, 1, 100.0).unwrap() - oracle).abs() < 1e-12);
        assert!(schwarz_narrow_prob(1.0, 1, 1e6).unwrap() > 0.99);
        assert!(schwarz_narrow_prob(1.0, 1, 1.0).is_err());
    }

    #[test]
    fn power_increases_and_aic_decreases() {
        for q in 1..4 {
            let mut prev_p = 0.0;
            let mut prev_a = 1.0;
            for i in 0..40 {
                let a = 0.1 * i as f64;
                let p = detection_power(a, 0.05, q).unwrap();
                let s = aic_narrow_prob(a * a, q).unwrap();
                if i > 0 {
                    assert!(p > prev_p && s < prev_a);
                }
                prev_p = p;
                prev_a = s;
            }
        }
    }

    #[test]
    fn danger_index_at_least_one_for_catalogue() {
        for m in builtin_catalogue().into_iter().filter(|m| m.q() == 1) {
            let info = information_at_null(m.as_ref(), &m.default_design(100)).unwrap();
            let (d, rho2) = danger_index(&info).unwrap();
            assert!(d >= 1.0 && (0.0..1.0).contains(&rho2), "{}", m.name());
            assert!((rho2 - (1.0 - 1.0 / d)).abs() == 0.0);
        }
    }

    #[test]
    fn report_for_two_sample() {
        let m = model_by_name("two-sample").unwrap();
        let r = tolerance_report(m.as_ref(), &m.default_design(100)).unwrap();
        assert!((r.radius[0] - 2.0 / 50f64.sqrt()).abs() < 1e-12);
    }

    /// Largest correlation of `a'U` with `V` over many directions, using the
    /// covariance structure carried by the information matrix.
    fn max_correlation(info: &PartitionedInfo, dirs: &[Vec<f64>]) -> f64 {
        let j11 = info.j11();
        let j12 = info.j12().column(0).into_owned();
        let j22 = info.j22()[(0, 0)];
        let corr2 = |a: &DVector<f64>| {
            let c = a.dot(&j12);
            c * c / (a.dot(&(j11 * a)) * j22)
        };
        let analytic = j11.clone().cholesky().unwrap().solve(&j12);
        dirs.iter()
            .map(|d| corr2(&DVector::from_column_slice(d)))
            .fold(corr2(&analytic), f64::max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn rho2_is_maximal_squared_correlation(
            model_idx in 0usize..10,
            dirs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1000),
        ) {
            let models: Vec<_> = builtin_catalogue().into_iter().filter(|m| m.q() == 1).collect();
            let m = &models[model_idx % models.len()];
            let info = information_at_null(m.as_ref(), &m.default_design(60)).unwrap();
            let p = info.p();
            let dirs: Vec<Vec<f64>> = dirs.into_iter().map(|d| d.into_iter().cycle().take(p).collect()).collect();
            let best = max_correlation(&info, &dirs);
            let (_, rho2) = danger_index(&info).unwrap();
            prop_assert!((best - rho2).abs() < 1e-8, "{}: {} vs {}", m.name(), best, rho2);
        }
    }
}
