//! Monte Carlo checks of the limit results at finite `n`.
//!
//! Replication `r` of study cell `c` draws from the random stream
//! `(seed, c << 32 | r)`. Replications run in parallel and their outputs are
//! reduced in replication order, so results are bit-identical for any number
//! of worker threads.

mod coverage;
mod kappa;
mod mse;

pub use coverage::{coverage_study, CoverageRow};
pub use kappa::{kappa_by_simulation, KappaEstimate, KappaMethod};
pub use mse::{finite_sample_mse, MseRow, StudyEstimator, StudyResult};

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{build_model, Design, Model, ModelOptions, SharedModel};
use crate::numerics::rng::{stream_id, stream_rng, StreamRng};

pub const DEFAULT_REPLICATIONS: usize = 2000;
pub const MIN_REPLICATIONS: usize = 100;
/// Studies abort when more than this share of replications fail to fit.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: String,
    pub options: ModelOptions,
    pub estimand: String,
    /// Departures `delta`; the truth is `gamma0 + delta / sqrt(n)`.
    pub deltas: Vec<f64>,
    pub ns: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Estimator specs, plus `debias`.
    pub estimators: Vec<String>,
    pub kappa_method: KappaMethod,
    /// Nominal coverage for interval studies.
    pub level: f64,
}

impl StudyConfig {
    pub fn new(model: &str, estimand: &str, seed: u64) -> Self {
        Self {
            model: model.to_string(),
            options: ModelOptions::default(),
            estimand: estimand.to_string(),
            deltas: vec![0.0],
            ns: vec![100],
            replications: DEFAULT_REPLICATIONS,
            seed,
            estimators: vec!["narrow".into(), "wide".into()],
            kappa_method: KappaMethod::GammaSd,
            level: 0.9,
        }
    }

    /// Every problem with the configuration, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.replications < MIN_REPLICATIONS {
            out.push(format!(
                "replications = {} is below the minimum of {MIN_REPLICATIONS}",
                self.replications
            ));
        }
        if self.replications > u32::MAX as usize {
            out.push("replications exceeds the stream address space".into());
        }
        if self.ns.is_empty() {
            out.push("n list is empty".into());
        }
        if let Some(n) = self.ns.iter().find(|n| **n < 10) {
            out.push(format!("n = {n} is too small to fit the wide model"));
        }
        if self.deltas.is_empty() {
            out.push("delta grid is empty".into());
        }
        if let Some(d) = self.deltas.iter().find(|d| !d.is_finite()) {
            out.push(format!("delta = {d} is not finite"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            out.push(format!("level = {} is not in (0, 1)", self.level));
        }
        match build_model(&self.model, &self.options) {
            Err(e) => out.push(e.to_string()),
            Ok(m) => {
                if m.q() != 1 {
                    out.push(format!("model '{}' has q = {}; studies need q = 1", self.model, m.q()));
                }
                if let Err(e) = m.estimand(&self.estimand) {
                    out.push(e.to_string());
                }
            }
        }
        for spec in &self.estimators {
            if let Err(e) = StudyEstimator::parse(spec) {
                out.push(e.to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(problems.join("; ")))
        }
    }

    pub fn build_model(&self) -> Result<SharedModel> {
        build_model(&self.model, &self.options)
    }

    pub fn parsed_estimators(&self) -> Result<Vec<StudyEstimator>> {
        self.estimators.iter().map(|s| StudyEstimator::parse(s)).collect()
    }

    /// Plain-text record of everything that determines the output.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "misspec-core {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "model = {}", self.model);
        if let Some(t) = &self.options.theta0 {
            let _ = writeln!(s, "theta0 = {t:?}");
        }
        if let Some(b) = self.options.spread {
            let _ = writeln!(s, "spread = {b}");
        }
        if let Some(r) = self.options.first_group_fraction {
            let _ = writeln!(s, "first_group_fraction = {r}");
        }
        let _ = writeln!(s, "estimand = {}", self.estimand);
        let _ = writeln!(s, "deltas = {:?}", self.deltas);
        let _ = writeln!(s, "ns = {:?}", self.ns);
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "estimators = {:?}", self.estimators);
        let _ = writeln!(s, "kappa_method = {}", self.kappa_method);
        let _ = writeln!(s, "level = {}", self.level);
        let _ = writeln!(s, "rng = ChaCha8, stream = cell << 32 | replication");
        s
    }
}

/// Responses at every design row for parameters `(theta, gamma)`.
pub fn simulate(model: &dyn Model, design: &Design, theta: &[f64], gamma: &[f64], rng: &mut StreamRng) -> Vec<f64> {
    (0..design.n())
        .map(|i| model.sample(rng, design.row(i), theta, gamma))
        .collect()
}

/// Run `f` for every replication of a cell, in parallel, returning results
/// in replication order. Failures are counted; too many abort the study.
pub(crate) fn replicate<T: Send>(
    seed: u64,
    cell: usize,
    reps: usize,
    f: impl Fn(&mut StreamRng) -> Result<T> + Sync,
) -> Result<(Vec<T>, usize)> {
    let cell = u32::try_from(cell).map_err(|_| Error::Parameter("too many study cells".into()))?;
    let outcomes: Vec<Result<T>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, stream_id(cell, r as u32));
            f(&mut rng)
        })
        .collect();
    let mut ok = Vec::with_capacity(reps);
    let mut failures = 0;
    let mut first = None;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                failures += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * reps as f64 {
        return Err(Error::TooManyFailures {
            failures,
            total: reps,
            first: first.unwrap_or_default(),
        });
    }
    Ok((ok, failures))
}

/// Pairwise summation; the order is fixed by the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_study(config: &StudyConfig) -> Result<(SharedModel, Vec<StudyEstimator>)> {
    config.validate()?;
    Ok((config.build_model()?, config.parsed_estimators()?))
}
