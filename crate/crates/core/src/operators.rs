//! Block-diagonal collective operators.
//!
//! Every operator here commutes with the irrep decomposition, so it is stored
//! as one dense `(2J+1)×(2J+1)` block per total angular momentum. Within a
//! block, row/column `r` carries `M = J - r` (M descending).

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::irrep::{a_raw, Component, EnsembleSpec, JLabel};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// `2M` of row `r` in a block of total angular momentum `j`.
pub fn twice_m_of_row(j: JLabel, row: usize) -> i32 {
    j.twice() as i32 - 2 * row as i32
}

/// Row holding `2M`, if `|M| <= J` and the parity matches.
pub fn row_of_twice_m(j: JLabel, twice_m: i32) -> Option<usize> {
    let tj = j.twice() as i32;
    if twice_m.abs() > tj || (tj - twice_m) % 2 != 0 {
        return None;
    }
    Some(((tj - twice_m) / 2) as usize)
}

fn block_offsets(spec: &EnsembleSpec) -> Arc<[usize]> {
    let mut offsets = Vec::with_capacity(spec.num_blocks() + 1);
    let mut acc = 0;
    offsets.push(0);
    for j in spec.j_range() {
        acc += j.dim() * j.dim();
        offsets.push(acc);
    }
    offsets.into()
}

/// A block-diagonal operator on the collective space (one block per `J`).
///
/// Blocks are stored back to back in ascending `J`, each in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    spec: EnsembleSpec,
    pub(crate) offsets: Arc<[usize]>,
    data: Vec<C64>,
}

impl BlockOperator {
    pub fn zeros(spec: &EnsembleSpec) -> Self {
        let offsets = block_offsets(spec);
        let len = *offsets.last().unwrap();
        Self { spec: *spec, offsets, data: vec![ZERO; len] }
    }

    pub fn identity(spec: &EnsembleSpec) -> Self {
        let mut op = Self::zeros(spec);
        for b in 0..op.num_blocks() {
            for r in 0..op.block_dim(b) {
                op.set(b, r, r, ONE);
            }
        }
        op
    }

    /// Build from explicit blocks in ascending-J order.
    pub fn from_blocks(spec: &EnsembleSpec, blocks: &[DMatrix<C64>]) -> Result<Self> {
        let mut op = Self::zeros(spec);
        if blocks.len() != op.num_blocks() {
            return Err(Error::InvalidJ { n: spec.n(), j: format!("{} blocks", blocks.len()) });
        }
        for (b, m) in blocks.iter().enumerate() {
            let d = op.block_dim(b);
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::InvalidJ { n: spec.n(), j: spec.block_j(b).to_string() });
            }
            op.block_mut(b).copy_from(m);
        }
        Ok(op)
    }

    pub(crate) fn from_raw(spec: &EnsembleSpec, data: Vec<C64>) -> Self {
        let offsets = block_offsets(spec);
        assert_eq!(data.len(), *offsets.last().unwrap());
        Self { spec: *spec, offsets, data }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn block_j(&self, block: usize) -> JLabel {
        self.spec.block_j(block)
    }

    pub fn block_dim(&self, block: usize) -> usize {
        self.spec.block_j(block).dim()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    /// Flat index of entry `(row, col)` of `block`.
    #[inline]
    pub fn index(&self, block: usize, row: usize, col: usize) -> usize {
        self.offsets[block] + col * self.block_dim(block) + row
    }

    pub fn get(&self, block: usize, row: usize, col: usize) -> C64 {
        self.data[self.index(block, row, col)]
    }

    pub fn set(&mut self, block: usize, row: usize, col: usize, value: C64) {
        let i = self.index(block, row, col);
        self.data[i] = value;
    }

    /// Entry `⟨J, M|X|J, M'⟩`, or `None` when the labels are invalid.
    pub fn entry(&self, j: JLabel, twice_m: i32, twice_m2: i32) -> Option<C64> {
        let b = self.spec.block_index(j).ok()?;
        let r = row_of_twice_m(j, twice_m)?;
        let c = row_of_twice_m(j, twice_m2)?;
        Some(self.get(b, r, c))
    }

    pub fn block(&self, block: usize) -> DMatrixView<'_, C64> {
        let d = self.block_dim(block);
        let s = &self.data[self.offsets[block]..self.offsets[block + 1]];
        DMatrixView::from_slice(s, d, d)
    }

    pub fn block_mut(&mut self, block: usize) -> DMatrixViewMut<'_, C64> {
        let d = self.block_dim(block);
        let (lo, hi) = (self.offsets[block], self.offsets[block + 1]);
        DMatrixViewMut::from_slice(&mut self.data[lo..hi], d, d)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub(crate) fn check_spec(&self, other: &EnsembleSpec) -> Result<()> {
        if self.spec != *other {
            return Err(Error::SpecMismatch { left: self.spec.n(), right: other.n() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_spec(&other.spec)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= c);
        out
    }

    /// Blockwise matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_spec(&other.spec)?;
        let mut out = Self::zeros(&self.spec);
        for b in 0..self.num_blocks() {
            let prod = self.block(b) * other.block(b);
            out.block_mut(b).copy_from(&prod);
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(&self.spec);
        for b in 0..self.num_blocks() {
            let adj = self.block(b).adjoint();
            out.block_mut(b).copy_from(&adj);
        }
        out
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn trace(&self) -> C64 {
        (0..self.num_blocks()).map(|b| self.block(b).trace()).sum()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_spec(&other.spec)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint()).unwrap()
    }

    /// Replace every block by `(X + X†)/2`.
    pub fn hermitize(&mut self) {
        hermitize_blocks(&self.spec, &self.offsets, &mut self.data);
    }
}

pub(crate) fn hermitize_blocks(spec: &EnsembleSpec, offsets: &[usize], data: &mut [C64]) {
    for b in 0..spec.num_blocks() {
        let d = spec.block_j(b).dim();
        let blk = &mut data[offsets[b]..offsets[b + 1]];
        for c in 0..d {
            blk[c * d + c].im = 0.0;
            for r in (c + 1)..d {
                let lo = r + c * d;
                let hi = c + r * d;
                let avg = 0.5 * (blk[lo] + blk[hi].conj());
                blk[lo] = avg;
                blk[hi] = avg.conj();
            }
        }
    }
}

/// Named collective operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollectiveOp {
    Jz,
    Jplus,
    Jminus,
    Jx,
    Jy,
    Identity,
}

fn ladder(spec: &EnsembleSpec, q: Component) -> BlockOperator {
    let mut op = BlockOperator::zeros(spec);
    for b in 0..op.num_blocks() {
        let j = op.block_j(b);
        for r in 0..j.dim() {
            let tm = twice_m_of_row(j, r);
            let value = a_raw(q, j.value(), tm as f64 / 2.0);
            if let Some(target) = row_of_twice_m(j, tm + q.twice_shift()) {
                if q == Component::Z || value != 0.0 {
                    op.set(b, target, r, C64::new(value, 0.0));
                }
            }
        }
    }
    op
}

/// Collective angular momentum operator.
pub fn collective_op(spec: &EnsembleSpec, which: CollectiveOp) -> BlockOperator {
    match which {
        CollectiveOp::Jz => ladder(spec, Component::Z),
        CollectiveOp::Jplus => ladder(spec, Component::Plus),
        CollectiveOp::Jminus => ladder(spec, Component::Minus),
        CollectiveOp::Jx => {
            let p = ladder(spec, Component::Plus);
            let m = ladder(spec, Component::Minus);
            p.add(&m).unwrap().scale(C64::new(0.5, 0.0))
        }
        CollectiveOp::Jy => {
            let p = ladder(spec, Component::Plus);
            let m = ladder(spec, Component::Minus);
            p.sub(&m).unwrap().scale(C64::new(0.0, -0.5))
        }
        CollectiveOp::Identity => BlockOperator::identity(spec),
    }
}

/// Counter-twisting Hamiltonian `H = -iΛ(J_+² - J_-²)`.
pub fn counter_twisting_hamiltonian(spec: &EnsembleSpec, lambda: f64) -> BlockOperator {
    let p = ladder(spec, Component::Plus);
    let m = ladder(spec, Component::Minus);
    let p2 = p.mul(&p).unwrap();
    let m2 = m.mul(&m).unwrap();
    let mut h = p2.sub(&m2).unwrap().scale(C64::new(0.0, -lambda));
    h.hermitize();
    h
}

/// Coefficients of a single-particle operator in the basis `{1, b_-, b_+, b_z}`.
///
/// `b_-` and `b_+` are the spin-1/2 ladder operators with unit matrix element
/// and `b_z = diag(1/2, -1/2)`, so that `Σ_n b_q^(n)` is exactly `J_q`. The
/// Pauli matrix `σ_z` is `2 b_z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalOperatorCoeffs {
    pub c0: C64,
    pub cm: C64,
    pub cp: C64,
    pub cz: C64,
}

impl LocalOperatorCoeffs {
    pub fn new(c0: C64, cm: C64, cp: C64, cz: C64) -> Self {
        Self { c0, cm, cp, cz }
    }

    pub fn real(c0: f64, cm: f64, cp: f64, cz: f64) -> Self {
        Self::new(c0.into(), cm.into(), cp.into(), cz.into())
    }

    pub fn identity() -> Self {
        Self::real(1.0, 0.0, 0.0, 0.0)
    }

    pub fn sigma_minus() -> Self {
        Self::real(0.0, 1.0, 0.0, 0.0)
    }

    pub fn sigma_plus() -> Self {
        Self::real(0.0, 0.0, 1.0, 0.0)
    }

    /// `b_z = σ_z / 2`.
    pub fn spin_z() -> Self {
        Self::real(0.0, 0.0, 0.0, 1.0)
    }

    /// Pauli `σ_z = 2 b_z`.
    pub fn pauli_z() -> Self {
        Self::real(0.0, 0.0, 0.0, 2.0)
    }

    /// Coefficient multiplying `b_q`.
    pub fn component(&self, q: Component) -> C64 {
        match q {
            Component::Minus => self.cm,
            Component::Plus => self.cp,
            Component::Z => self.cz,
        }
    }

    /// 2×2 matrix in the `(↑, ↓)` basis.
    pub fn to_matrix(&self) -> [[C64; 2]; 2] {
        let h = C64::new(0.5, 0.0);
        [[self.c0 + h * self.cz, self.cp], [self.cm, self.c0 - h * self.cz]]
    }

    /// Unique expansion of a 2×2 matrix.
    pub fn from_matrix(m: [[C64; 2]; 2]) -> Self {
        Self {
            c0: 0.5 * (m[0][0] + m[1][1]),
            cm: m[1][0],
            cp: m[0][1],
            cz: m[0][0] - m[1][1],
        }
    }

    pub fn adjoint(&self) -> Self {
        Self { c0: self.c0.conj(), cm: self.cp.conj(), cp: self.cm.conj(), cz: self.cz.conj() }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        let a = self.to_matrix();
        let b = other.to_matrix();
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][k] + a[i][1] * b[1][k];
            }
        }
        Self::from_matrix(out)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { c0: self.c0 * c, cm: self.cm * c, cp: self.cp * c, cz: self.cz * c }
    }

    pub fn is_traceless(&self) -> bool {
        self.c0.norm() == 0.0
    }
}

/// Collective embedding `Σ_n s^(n) = c0·N·1 + cm·J_- + cp·J_+ + cz·J_z`.
pub fn symmetric_sum_collective(spec: &EnsembleSpec, c: &LocalOperatorCoeffs) -> BlockOperator {
    let terms = [
        (c.c0 * spec.n() as f64, CollectiveOp::Identity),
        (c.cm, CollectiveOp::Jminus),
        (c.cp, CollectiveOp::Jplus),
        (c.cz, CollectiveOp::Jz),
    ];
    let mut out = BlockOperator::zeros(spec);
    for (coef, which) in terms {
        if coef != ZERO {
            out = out.add(&collective_op(spec, which).scale(coef)).unwrap();
        }
    }
    out
}
