//! Gaussian expectations and adaptive integration.
//!
//! Two rules are provided and cross-checked against each other in the tests:
//! a Gauss–Hermite rule for smooth integrands and an adaptive Gauss–Kronrod
//! rule on a truncated window, split at caller-supplied knots, for integrands
//! with jumps or kinks.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use super::special::std_normal_pdf;
use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 200;
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;

const ADAPTIVE_ABS_TOL: f64 = 1e-13;
const ADAPTIVE_REL_TOL: f64 = 1e-12;
const MAX_INTERVALS: usize = 4000;

/// Whether a weight function may be integrated with the Gauss–Hermite rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    /// Jumps or kinks at known points.
    Piecewise,
}

/// Nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`; weights sum to one.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite
    /// polynomials (off-diagonal `sqrt(k)`).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jac[(k - 1, k)] = b;
            jac[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrise: the rule is exact for odd functions only if nodes pair up.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn default_rule() -> &'static HermiteRule {
        static RULE: OnceLock<HermiteRule> = OnceLock::new();
        RULE.get_or_init(|| HermiteRule::new(DEFAULT_NODES))
    }
}

/// Expectation operator over `Z ~ N(a, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianExpectation {
    pub nodes: usize,
    /// Truncation half-width of the adaptive window, in z-units.
    pub half_width: f64,
}

impl Default for GaussianExpectation {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            half_width: DEFAULT_HALF_WIDTH,
        }
    }
}

impl GaussianExpectation {
    fn rule(&self) -> std::borrow::Cow<'static, HermiteRule> {
        if self.nodes == DEFAULT_NODES {
            std::borrow::Cow::Borrowed(HermiteRule::default_rule())
        } else {
            std::borrow::Cow::Owned(HermiteRule::new(self.nodes))
        }
    }

    /// `E_a f(Z)` by Gauss–Hermite, using `E_a f(Z) = E_0 f(Z + a)`.
    pub fn hermite<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<f64> {
        let rule = self.rule();
        let mut acc = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let z = x + a;
            let v = f(z);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: z, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// `E_a f(Z)` by adaptive integration of `f(z) phi(z - a)` over
    /// `[a - w, a + w]`, split at every knot inside the window.
    pub fn adaptive<F: Fn(f64) -> f64>(&self, f: F, a: f64, knots: &[f64]) -> Result<f64> {
        let lo = a - self.half_width;
        let hi = a + self.half_width;
        let mut cuts: Vec<f64> = knots.iter().copied().filter(|&k| k > lo && k < hi).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(lo);
        edges.extend(cuts);
        edges.push(hi);
        let g = |z: f64| f(z) * std_normal_pdf(z - a);
        let mut total = 0.0;
        for w in edges.windows(2) {
            total += integrate(&g, w[0], w[1])?;
        }
        Ok(total)
    }

    /// Dispatch on smoothness: Gauss–Hermite for smooth integrands, the
    /// knot-split adaptive rule otherwise.
    pub fn expect<F: Fn(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        smoothness: Smoothness,
        knots: &[f64],
    ) -> Result<f64> {
        match smoothness {
            Smoothness::Smooth => self.hermite(f, a),
            Smoothness::Piecewise => self.adaptive(f, a, knots),
        }
    }
}

/// `E f(Z)` for `Z ~ N(a, 1)` with the default 200-node rule.
pub fn expect_under_shifted_normal<F: Fn(f64) -> f64>(f: F, a: f64) -> Result<f64> {
    GaussianExpectation::default().hermite(f, a)
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let check = |z: f64| -> Result<f64> {
        let v = f(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { at: z, value: v })
        }
    };
    let fc = check(c)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = check(c - dx)? + check(c + dx)?;
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    integrate_tol(f, a, b, ADAPTIVE_ABS_TOL, ADAPTIVE_REL_TOL)
}

pub fn integrate_tol<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(f, a, b)?;
    // (lo, hi, value, error)
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                error: err,
                intervals: parts.len(),
            });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further; accept what we have.
            parts.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (v1, e1) = gk15(f, lo, mid)?;
        let (v2, e2) = gk15(f, mid, hi)?;
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // Re-sum to shed the running-update roundoff.
    Ok(parts.iter().map(|p| p.2).sum())
}
