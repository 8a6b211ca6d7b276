//! Posterior for `a` given one observation `Z ~ N(a, 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate;
use crate::numerics::{log_std_normal_cdf, std_normal_cdf, std_normal_pdf};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// `N(0, sigma^2)`.
    Normal { sigma: f64 },
    PointMass { at: f64 },
    /// Atoms with (unnormalised) weights.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `cos^2(pi a / 2m) / m` on `[-m, m]`.
    CosineSquared { m: f64 },
    /// `sum_k w_k pi_k` with weights normalised internally.
    Mixture(Vec<(f64, Prior)>),
}

impl Prior {
    pub fn two_point(m: f64) -> Self {
        Prior::Discrete {
            points: vec![-m, m],
            weights: vec![0.5, 0.5],
        }
    }

    /// `(1 - eps) I_0 + eps N(0, sigma^2)`.
    pub fn epsilon_normal(eps: f64, sigma: f64) -> Self {
        Prior::Mixture(vec![(1.0 - eps, Prior::PointMass { at: 0.0 }), (eps, Prior::Normal { sigma })])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::domain("prior", detail));
        match self {
            Prior::Normal { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => bad(format!("sigma = {sigma}")),
            Prior::PointMass { at } if !at.is_finite() => bad(format!("atom at {at}")),
            Prior::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return bad(format!("{} points and {} weights", points.len(), weights.len()));
                }
                if points.iter().any(|p| !p.is_finite()) || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return bad("atoms must be finite with nonnegative weights".into());
                }
                Ok(())
            }
            Prior::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                bad(format!("uniform on [{lo}, {hi}]"))
            }
            Prior::CosineSquared { m } if !(*m > 0.0 && m.is_finite()) => bad(format!("m = {m}")),
            Prior::Mixture(parts) => {
                if parts.is_empty() || parts.iter().any(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
                    return bad("mixture weights must be nonnegative".into());
                }
                parts.iter().try_for_each(|(_, p)| p.validate())
            }
            _ => Ok(()),
        }
    }

    /// Density of the absolutely continuous part (atoms excluded).
    pub fn density(&self, a: f64) -> f64 {
        match self {
            Prior::Normal { sigma } => std_normal_pdf(a / sigma) / sigma,
            Prior::PointMass { .. } | Prior::Discrete { .. } => 0.0,
            Prior::Uniform { lo, hi } => {
                if a >= *lo && a <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Prior::CosineSquared { m } => {
                if a.abs() <= *m {
                    (PI * a / (2.0 * m)).cos().powi(2) / m
                } else {
                    0.0
                }
            }
            Prior::Mixture(parts) => {
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                parts.iter().map(|(w, p)| w / total * p.density(a)).sum()
            }
        }
    }
}

/// Posterior summaries at one `z`.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub z: f64,
    pub mean: f64,
    pub variance: f64,
    /// `log int phi(z - a) pi(da)`.
    pub log_evidence: f64,
    /// Posterior probabilities of the prior atoms, as `(location, weight)`.
    pub atoms: Vec<(f64, f64)>,
    /// Posterior mass of the continuous part.
    pub continuous_mass: f64,
    prior: Prior,
}

impl Posterior {
    /// Posterior density of the continuous part at `a`.
    pub fn density(&self, a: f64) -> f64 {
        let log_lik = -0.5 * (self.z - a).powi(2) - LN_SQRT_2PI;
        let dens = self.prior.density(a);
        if dens == 0.0 {
            0.0
        } else {
            (log_lik - self.log_evidence).exp() * dens
        }
    }
}

/// Per-component summary: log evidence, mean, second moment, atoms with
/// their log posterior numerators.
struct Piece {
    log_ev: f64,
    mean: f64,
    second: f64,
    atoms: Vec<(f64, f64)>,
    continuous: bool,
}

fn log_phi(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Moments of `pi(a) phi(z - a)` on a bounded support, scaled by the
/// likelihood at its maximiser so nothing underflows for large `|z|`.
fn bounded_piece(density: &dyn Fn(f64) -> f64, lo: f64, hi: f64, z: f64) -> Result<Piece> {
    let peak = z.clamp(lo, hi);
    let base = log_phi(z - peak);
    let w = |a: f64| density(a) * (-0.5 * (z - a).powi(2) + 0.5 * (z - peak).powi(2)).exp();
    let mut parts = [0.0; 3];
    let mut edges = vec![lo];
    if peak > lo && peak < hi {
        edges.push(peak);
    }
    edges.push(hi);
    for e in edges.windows(2) {
        parts[0] += integrate(&w, e[0], e[1])?;
        parts[1] += integrate(&|a| a * w(a), e[0], e[1])?;
        parts[2] += integrate(&|a| a * a * w(a), e[0], e[1])?;
    }
    if !(parts[0] > 0.0) {
        return Err(Error::ZeroEvidence { z });
    }
    Ok(Piece {
        log_ev: base + parts[0].ln(),
        mean: parts[1] / parts[0],
        second: parts[2] / parts[0],
        atoms: Vec::new(),
        continuous: true,
    })
}

fn piece(prior: &Prior, z: f64) -> Result<Piece> {
    Ok(match prior {
        Prior::Normal { sigma } => {
            let s2 = sigma * sigma;
            let v = s2 + 1.0;
            let shrink = s2 / v;
            let mean = shrink * z;
            Piece {
                log_ev: log_phi(z / v.sqrt()) - 0.5 * v.ln(),
                mean,
                second: shrink + mean * mean,
                atoms: Vec::new(),
                continuous: true,
            }
        }
        Prior::PointMass { at } => Piece {
            log_ev: log_phi(z - at),
            mean: *at,
            second: at * at,
            atoms: vec![(*at, 0.0)],
            continuous: false,
        },
        Prior::Discrete { points, weights } => {
            let total: f64 = weights.iter().sum();
            let logs: Vec<f64> = points
                .iter()
                .zip(weights)
                .map(|(p, w)| (w / total).ln() + log_phi(z - p))
                .collect();
            let log_ev = log_sum_exp(logs.iter().copied());
            if log_ev == f64::NEG_INFINITY {
                return Err(Error::ZeroEvidence { z });
            }
            let post: Vec<f64> = logs.iter().map(|l| (l - log_ev).exp()).collect();
            Piece {
                log_ev,
                mean: points.iter().zip(&post).map(|(p, w)| p * w).sum(),
                second: points.iter().zip(&post).map(|(p, w)| p * p * w).sum(),
                atoms: points.iter().zip(&logs).map(|(p, l)| (*p, l - log_ev)).collect(),
                continuous: false,
            }
        }
        Prior::Uniform { lo, hi } => bounded_piece(&|a| prior.density(a), *lo, *hi, z)?,
        Prior::CosineSquared { m } => bounded_piece(&|a| prior.density(a), -m, *m, z)?,
        Prior::Mixture(parts) => {
            let total: f64 = parts.iter().map(|(w, _)| w).sum();
            let pieces = parts
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, p)| piece(p, z).map(|pc| ((w / total).ln(), pc)))
                .collect::<Result<Vec<_>>>()?;
            let log_ev = log_sum_exp(pieces.iter().map(|(lw, pc)| lw + pc.log_ev));
            if log_ev == f64::NEG_INFINITY {
                return Err(Error::ZeroEvidence { z });
            }
            let mut mean = 0.0;
            let mut second = 0.0;
            let mut atoms = Vec::new();
            for (lw, pc) in &pieces {
                let share = (lw + pc.log_ev - log_ev).exp();
                mean += share * pc.mean;
                second += share * pc.second;
                // atom numerators are relative to their component's evidence
                atoms.extend(pc.atoms.iter().map(|(p, l)| (*p, l + lw + pc.log_ev - log_ev)));
            }
            Piece {
                log_ev,
                mean,
                second,
                atoms,
                continuous: pieces.iter().any(|(_, pc)| pc.continuous),
            }
        }
    })
}

/// Posterior of `a` given `Z = z`.
pub fn bayes_posterior(prior: &Prior, z: f64) -> Result<Posterior> {
    prior.validate()?;
    if !z.is_finite() {
        return Err(Error::ZeroEvidence { z });
    }
    let pc = piece(prior, z)?;
    let atoms: Vec<(f64, f64)> = pc.atoms.iter().map(|(p, l)| (*p, l.exp())).collect();
    let atom_mass: f64 = atoms.iter().map(|(_, w)| w).sum();
    Ok(Posterior {
        z,
        mean: pc.mean,
        variance: (pc.second - pc.mean * pc.mean).max(0.0),
        log_evidence: pc.log_ev,
        continuous_mass: if pc.continuous { 1.0 - atom_mass } else { 0.0 },
        atoms,
        prior: prior.clone(),
    })
}

/// `m tanh(m z)`: posterior mean under the two-point prior at `+-m`.
pub fn two_point_mean(m: f64, z: f64) -> f64 {
    m * (m * z).tanh()
}

/// Posterior mean under the uniform prior on `[-m, m]`, in closed form.
pub fn uniform_mean(m: f64, z: f64) -> f64 {
    // mean of N(z, 1) truncated to [-m, m]; for z > m both bounds sit in the
    // lower tail, where the ratio is rewritten with Phi(x)/phi(x)
    let (s, z) = if z < 0.0 { (-1.0, -z) } else { (1.0, z) };
    let lo = -m - z;
    let hi = m - z;
    let shift = if hi >= 0.0 {
        (std_normal_pdf(lo) - std_normal_pdf(hi)) / (std_normal_cdf(hi) - std_normal_cdf(lo))
    } else {
        let mills = |x: f64| (log_std_normal_cdf(x) + 0.5 * x * x + LN_SQRT_2PI).exp();
        let e = (-0.5 * (lo * lo - hi * hi)).exp();
        (e - 1.0) / (mills(hi) - mills(lo) * e)
    };
    s * (z + shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn priors() -> Vec<Prior> {
        vec![
            Prior::Normal { sigma: 1.7 },
            Prior::two_point(1.3),
            Prior::Uniform { lo: -2.0, hi: 2.0 },
            Prior::CosineSquared { m: 1.5 },
            Prior::epsilon_normal(0.3, 2.0),
            Prior::Mixture(vec![(0.4, Prior::Uniform { lo: -1.0, hi: 3.0 }), (0.6, Prior::two_point(0.5))]),
        ]
    }

    #[test]
    fn normal_prior_shrinks_linearly() {
        for &z in &[-3.0, 0.0, 0.7, 5.0] {
            let p = bayes_posterior(&Prior::Normal { sigma: 2.0 }, z).unwrap();
            assert!((p.mean - 0.8 * z).abs() < 1e-14);
            assert!((p.variance - 0.8).abs() < 1e-14);
        }
    }

    #[test]
    fn point_mass_gives_zero() {
        for &z in &[-4.0, 0.0, 2.5] {
            let p = bayes_posterior(&Prior::PointMass { at: 0.0 }, z).unwrap();
            assert_eq!(p.mean, 0.0);
            assert_eq!(p.atoms, vec![(0.0, 1.0)]);
        }
    }

    #[test]
    fn two_point_prior_gives_tanh() {
        for &z in &[-2.0, 0.1, 1.0, 9.0] {
            let p = bayes_posterior(&Prior::two_point(1.2), z).unwrap();
            assert!((p.mean - two_point_mean(1.2, z)).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_closed_form_matches_quadrature() {
        for &z in &[-30.0, -3.0, -0.4, 0.0, 0.9, 2.5, 12.0, 40.0] {
            let p = bayes_posterior(&Prior::Uniform { lo: -1.5, hi: 1.5 }, z).unwrap();
            assert!((p.mean - uniform_mean(1.5, z)).abs() < 1e-9, "z = {z}");
        }
    }

    #[test]
    fn posterior_is_normalised() {
        for prior in priors() {
            for &z in &[-2.3, 0.0, 0.8, 4.0] {
                let p = bayes_posterior(&prior, z).unwrap();
                let atom_mass: f64 = p.atoms.iter().map(|(_, w)| w).sum();
                let cont = if p.continuous_mass > 0.0 {
                    let f = |a: f64| p.density(a);
                    integrate(&f, -40.0, z.min(0.0))
                        .and_then(|lo| integrate(&f, z.min(0.0), z.max(0.0)).map(|m| lo + m))
                        .and_then(|lm| integrate(&f, z.max(0.0), 40.0).map(|hi| lm + hi))
                        .unwrap()
                } else {
                    0.0
                };
                assert!((atom_mass + cont - 1.0).abs() < 1e-10, "{prior:?} z {z}: {}", atom_mass + cont);
                assert!((cont - p.continuous_mass).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn posterior_mean_satisfies_score_identity() {
        for prior in priors() {
            for &z in &[-1.9, 0.3, 2.2] {
                let h = 1e-4;
                let up = bayes_posterior(&prior, z + h).unwrap().log_evidence;
                let dn = bayes_posterior(&prior, z - h).unwrap().log_evidence;
                let tweedie = z + (up - dn) / (2.0 * h);
                let mean = bayes_posterior(&prior, z).unwrap().mean;
                assert!((mean - tweedie).abs() < 1e-6, "{prior:?} z {z}: {mean} vs {tweedie}");
            }
        }
    }

    #[test]
    fn epsilon_mixture_matches_direct_formula() {
        let (eps, sigma, z) = (0.5f64, 3.0f64, 2.0f64);
        let s2 = sigma * sigma;
        let b = (s2 + 1.0).sqrt() * (-0.5 * s2 / (s2 + 1.0) * z * z).exp();
        let direct = eps / (eps + (1.0 - eps) * b) * s2 / (s2 + 1.0) * z;
        let p = bayes_posterior(&Prior::epsilon_normal(eps, sigma), z).unwrap();
        assert!((p.mean - direct).abs() < 1e-13);
    }

    #[test]
    fn empty_support_is_an_error() {
        let prior = Prior::Discrete {
            points: vec![1.0],
            weights: vec![0.0],
        };
        assert!(matches!(bayes_posterior(&prior, 0.0), Err(Error::ZeroEvidence { .. })));
        assert!(bayes_posterior(&Prior::Normal { sigma: -1.0 }, 0.0).is_err());
    }
}
