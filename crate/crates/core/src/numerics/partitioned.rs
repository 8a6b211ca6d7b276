use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, InfoBlock, Result};

const PD_REL_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-9;

/// Wide-model information at the null, split into the narrow block `J11`
/// (p x p), the cross block `J12` (p x q) and the departure block `J22`
/// (q x q). `J21` is the transpose of `J12`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedInfo {
    j11: DMatrix<f64>,
    j12: DMatrix<f64>,
    j22: DMatrix<f64>,
}

/// Blocks of the inverse of the assembled information matrix.
#[derive(Debug, Clone)]
pub struct InverseBlocks {
    /// `J^11`
    pub upper: DMatrix<f64>,
    /// `J^12 = -J11^{-1} J12 J^22`
    pub cross: DMatrix<f64>,
    /// `J^22 = (J22 - J21 J11^{-1} J12)^{-1}`; `kappa^2` when q = 1.
    pub lower: DMatrix<f64>,
    /// `J11^{-1}`, kept because the risk geometry needs it.
    pub narrow_inverse: DMatrix<f64>,
}

impl PartitionedInfo {
    pub fn new(j11: DMatrix<f64>, j12: DMatrix<f64>, j22: DMatrix<f64>) -> Result<Self> {
        let p = j11.nrows();
        let q = j22.nrows();
        if j11.ncols() != p || j22.ncols() != q || j12.nrows() != p || j12.ncols() != q {
            return Err(Error::Dimension(format!(
                "J11 {}x{}, J12 {}x{}, J22 {}x{}",
                j11.nrows(),
                j11.ncols(),
                j12.nrows(),
                j12.ncols(),
                j22.nrows(),
                j22.ncols()
            )));
        }
        if p == 0 || q == 0 {
            return Err(Error::Dimension("p and q must be positive".into()));
        }
        let info = Self { j11, j12, j22 };
        let full = info.assembled();
        let scale = full.amax().max(1.0);
        if (&full - full.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(Error::NotPositiveDefinite {
                block: InfoBlock::Assembled,
                detail: "matrix is not symmetric".into(),
            });
        }
        check_pd(&full, InfoBlock::Assembled)?;
        info.partitioned_inverse()?;
        Ok(info)
    }

    /// Build from an assembled `(p+q) x (p+q)` matrix whose last `q` rows
    /// belong to the departure parameters.
    pub fn from_full(full: &DMatrix<f64>, q: usize) -> Result<Self> {
        let n = full.nrows();
        if full.ncols() != n || q == 0 || q >= n {
            return Err(Error::Dimension(format!("{}x{} matrix with q = {q}", n, full.ncols())));
        }
        let p = n - q;
        let sym = 0.5 * (full + full.transpose());
        Self::new(
            sym.view((0, 0), (p, p)).into_owned(),
            sym.view((0, p), (p, q)).into_owned(),
            sym.view((p, p), (q, q)).into_owned(),
        )
    }

    /// Scalar-departure convenience constructor.
    pub fn scalar(j11: DMatrix<f64>, j12: Vec<f64>, j22: f64) -> Result<Self> {
        let p = j11.nrows();
        Self::new(j11, DMatrix::from_vec(p, 1, j12), DMatrix::from_element(1, 1, j22))
    }

    pub fn p(&self) -> usize {
        self.j11.nrows()
    }
    pub fn q(&self) -> usize {
        self.j22.nrows()
    }
    pub fn j11(&self) -> &DMatrix<f64> {
        &self.j11
    }
    pub fn j12(&self) -> &DMatrix<f64> {
        &self.j12
    }
    pub fn j21(&self) -> DMatrix<f64> {
        self.j12.transpose()
    }
    pub fn j22(&self) -> &DMatrix<f64> {
        &self.j22
    }

    pub fn assembled(&self) -> DMatrix<f64> {
        let (p, q) = (self.p(), self.q());
        let mut m = DMatrix::zeros(p + q, p + q);
        m.view_mut((0, 0), (p, p)).copy_from(&self.j11);
        m.view_mut((0, p), (p, q)).copy_from(&self.j12);
        m.view_mut((p, 0), (q, p)).copy_from(&self.j12.transpose());
        m.view_mut((p, p), (q, q)).copy_from(&self.j22);
        m
    }

    /// Block inverse via the Schur complement of `J11`.
    pub fn partitioned_inverse(&self) -> Result<InverseBlocks> {
        let j11_inv = spd_inverse(&self.j11, InfoBlock::Narrow)?;
        let schur = &self.j22 - self.j12.transpose() * &j11_inv * &self.j12;
        let lower = spd_inverse(&schur, InfoBlock::Schur)?;
        let proj = &j11_inv * &self.j12;
        let cross = -(&proj * &lower);
        let upper = &j11_inv + &proj * &lower * proj.transpose();
        Ok(InverseBlocks {
            upper,
            cross,
            lower,
            narrow_inverse: j11_inv,
        })
    }
}

impl InverseBlocks {
    pub fn assembled(&self) -> DMatrix<f64> {
        let p = self.upper.nrows();
        let q = self.lower.nrows();
        let mut m = DMatrix::zeros(p + q, p + q);
        m.view_mut((0, 0), (p, p)).copy_from(&self.upper);
        m.view_mut((0, p), (p, q)).copy_from(&self.cross);
        m.view_mut((p, 0), (q, p)).copy_from(&self.cross.transpose());
        m.view_mut((p, p), (q, q)).copy_from(&self.lower);
        m
    }
}

fn check_pd(m: &DMatrix<f64>, block: InfoBlock) -> Result<()> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if !(min > PD_REL_TOL * max) {
        return Err(Error::NotPositiveDefinite {
            block,
            detail: format!("eigenvalues in [{min:e}, {max:e}]"),
        });
    }
    Ok(())
}

fn spd_inverse(m: &DMatrix<f64>, block: InfoBlock) -> Result<DMatrix<f64>> {
    let sym = 0.5 * (m + m.transpose());
    check_pd(&sym, block)?;
    match Cholesky::new(sym) {
        Some(c) => Ok(c.inverse()),
        None => Err(Error::NotPositiveDefinite {
            block,
            detail: "Cholesky factorisation failed".into(),
        }),
    }
}

pub fn partitioned_inverse(info: &PartitionedInfo) -> Result<InverseBlocks> {
    info.partitioned_inverse()
}
