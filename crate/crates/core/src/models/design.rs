use crate::error::{Error, Result};

/// Building blocks for a design row. The covariate is evenly spread,
/// `x_i = b i/(n+1)`, so its mean is exactly `b/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    /// Intercept.
    One,
    /// Raw covariate `x`.
    X,
    /// Centred covariate `t = x - b/2`.
    T,
    /// `t^2`.
    T2,
    /// A second covariate, a low-discrepancy sequence on `[-1/2, 1/2)` that
    /// is close to uncorrelated with `x`.
    Z,
    /// Second-group indicator.
    G,
    /// First-group indicator.
    NotG,
}

/// Point at which a column is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct CovariatePoint {
    pub x: f64,
    pub spread: f64,
    pub z: f64,
    pub second_group: bool,
}

impl Column {
    pub fn value(self, at: &CovariatePoint) -> f64 {
        let t = at.x - 0.5 * at.spread;
        let g = if at.second_group { 1.0 } else { 0.0 };
        match self {
            Column::One => 1.0,
            Column::X => at.x,
            Column::T => t,
            Column::T2 => t * t,
            Column::Z => at.z,
            Column::G => g,
            Column::NotG => 1.0 - g,
        }
    }
}

const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;

/// Covariate rows, one per observation. Models without covariates use an
/// empty design that only records `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    rows: Vec<Vec<f64>>,
    n: usize,
}

impl Design {
    pub fn iid(n: usize) -> Self {
        Self { rows: Vec::new(), n }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let w = first.len();
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != w) {
                return Err(Error::Dimension(format!("design row {i} has {} entries, expected {w}", r.len())));
            }
        }
        let n = rows.len();
        Ok(Self { rows, n })
    }

    /// Evenly spread design; observations `i > first_group` (1-based) form the
    /// second group.
    pub fn spaced(n: usize, spread: f64, first_group: usize, columns: &[Column]) -> Self {
        let rows = (1..=n)
            .map(|i| {
                let at = CovariatePoint {
                    x: spread * i as f64 / (n as f64 + 1.0),
                    spread,
                    z: (i as f64 * GOLDEN_FRACTION).fract() - 0.5,
                    second_group: i > first_group,
                };
                columns.iter().map(|c| c.value(&at)).collect()
            })
            .collect();
        Self { rows, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_rows(&self) -> bool {
        !self.rows.is_empty()
    }

    /// Row for observation `i`; empty for i.i.d. designs.
    pub fn row(&self, i: usize) -> &[f64] {
        if self.rows.is_empty() {
            &[]
        } else {
            &self.rows[i]
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The distinct rows to average over: all rows, or a single empty row for
    /// i.i.d. designs.
    pub fn rows_or_empty(&self) -> Vec<&[f64]> {
        if self.rows.is_empty() {
            vec![&[]]
        } else {
            self.rows.iter().map(|r| r.as_slice()).collect()
        }
    }

    /// Check that a data set of `len` responses fits this design.
    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Dimension(format!("{len} responses for a design of size {}", self.n)));
        }
        Ok(())
    }
}
