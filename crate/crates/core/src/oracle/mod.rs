//! Brute-force reference simulation in the full `2^N`-dimensional space.
//!
//! Nothing here uses the collective scatter formulas: operators are built
//! site by site, dissipators are applied literally, and results are mapped
//! back through an explicit Clebsch–Gordan basis.

mod basis;
mod dynamics;
mod equivalence;
mod sparse;

pub use basis::{cg_irrep_basis, local_op_full, symmetric_sum_full, IrrepBasis, IrrepLabel};
pub use dynamics::{evolve_full, FullChannel, FullModel, FullObservable};
pub use equivalence::{oracle_equivalence, oracle_equivalence_with, EquivalenceCase, EquivalenceReport};
pub use sparse::SparseMatrix;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{LocalOperatorCoeffs, C64, ZERO};

/// Largest `n` for which full-space operators are built.
pub const MAX_OPERATOR_N: u32 = 12;
/// Largest `n` for which full-space states are evolved.
pub const MAX_STATE_N: u32 = 10;

pub(crate) fn check_operator_size(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if n > MAX_OPERATOR_N {
        return Err(Error::OracleTooLarge { n, limit: MAX_OPERATOR_N });
    }
    Ok(())
}

pub(crate) fn check_state_size(n: u32) -> Result<()> {
    check_operator_size(n)?;
    if n > MAX_STATE_N {
        return Err(Error::OracleTooLarge { n, limit: MAX_STATE_N });
    }
    Ok(())
}

/// Density matrix of `n` spins in the product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    n: u32,
    rho: DMatrix<C64>,
}

impl FullState {
    pub fn from_ket(n: u32, psi: DVector<C64>) -> Result<Self> {
        check_state_size(n)?;
        if psi.len() != 1 << n {
            return Err(Error::SpecMismatch { left: psi.len() as u32, right: 1 << n });
        }
        let norm_sq = psi.norm_squared();
        if (norm_sq - 1.0).abs() > crate::state::KET_NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { n, rho: &psi * psi.adjoint() })
    }

    pub fn from_density(n: u32, rho: DMatrix<C64>) -> Result<Self> {
        check_state_size(n)?;
        if rho.nrows() != 1 << n || rho.ncols() != 1 << n {
            return Err(Error::SpecMismatch { left: rho.nrows() as u32, right: 1 << n });
        }
        Ok(Self { n, rho })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn density(&self) -> DMatrix<C64> {
        self.rho.clone()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|v| v.re).sum()
    }
}

/// Collective `J_x`, `J_y`, `J_z` in the product space.
pub fn collective_spin_full(n: u32) -> Result<[SparseMatrix; 3]> {
    let h = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    let jx = LocalOperatorCoeffs::new(ZERO, h, h, ZERO);
    let jy = LocalOperatorCoeffs::new(ZERO, ih, -ih, ZERO);
    Ok([
        symmetric_sum_full(n, &jx)?,
        symmetric_sum_full(n, &jy)?,
        symmetric_sum_full(n, &LocalOperatorCoeffs::spin_z())?,
    ])
}

/// `-iΛ(J_+² - J_-²)` in the product space.
pub fn counter_twisting_full(n: u32, lambda: f64) -> Result<SparseMatrix> {
    let jp = symmetric_sum_full(n, &LocalOperatorCoeffs::sigma_plus())?;
    let jm = symmetric_sum_full(n, &LocalOperatorCoeffs::sigma_minus())?;
    let diff = jp.mul(&jp).add(&jm.mul(&jm).scale(C64::new(-1.0, 0.0)));
    Ok(diff.scale(C64::new(0.0, -lambda)))
}
