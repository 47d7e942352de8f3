//! Collective kets and density operators, and the observables defined on them.
//!
//! A collective density operator is a direct sum `ρ_C = ⊕_J ρ_J` with no
//! coherences between different `J`, so it shares the block layout of
//! [`BlockOperator`]. All cross-block sums run in ascending `J`.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::irrep::{half_integer_string, EnsembleSpec, JLabel};
use crate::operators::{
    collective_op, row_of_twice_m, BlockOperator, CollectiveOp, C64, ONE, ZERO,
};

/// Tolerance on `|Σ|c|² - 1|` accepted by ket constructors.
pub const KET_NORM_TOL: f64 = 1e-12;

/// Threshold on `|⟨J_z⟩|` below which the squeezing parameter is undefined.
pub const SQUEEZING_JZ_FLOOR: f64 = 1e-12;

/// A pure collective state `Σ_{J,M} c_{J,M} |J, M⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockedKet {
    spec: EnsembleSpec,
    /// One vector per block, ascending `J`, entries ordered `M = J, …, -J`.
    blocks: Vec<DVector<C64>>,
}

impl BlockedKet {
    /// Build from explicit blocks; rejects wrong shapes and unnormalized input.
    pub fn from_blocks(spec: &EnsembleSpec, blocks: Vec<DVector<C64>>) -> Result<Self> {
        if blocks.len() != spec.num_blocks() {
            return Err(Error::InvalidJ { n: spec.n(), j: format!("{} blocks", blocks.len()) });
        }
        for (b, v) in blocks.iter().enumerate() {
            if v.len() != spec.block_j(b).dim() {
                return Err(Error::InvalidJ { n: spec.n(), j: spec.block_j(b).to_string() });
            }
        }
        let ket = Self { spec: *spec, blocks };
        let norm_sq = ket.norm_sq();
        if (norm_sq - 1.0).abs() > KET_NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(ket)
    }

    fn zeros(spec: &EnsembleSpec) -> Self {
        let blocks = spec.j_range().iter().map(|j| DVector::zeros(j.dim())).collect();
        Self { spec: *spec, blocks }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn block(&self, block: usize) -> &DVector<C64> {
        &self.blocks[block]
    }

    /// Coefficient `c_{J,M}`.
    pub fn coefficient(&self, j: JLabel, twice_m: i32) -> Option<C64> {
        let b = self.spec.block_index(j).ok()?;
        let r = row_of_twice_m(j, twice_m)?;
        Some(self.blocks[b][r])
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(|v| v.norm_squared()).sum()
    }
}

fn check_jm(spec: &EnsembleSpec, j: JLabel, twice_m: i32) -> Result<(usize, usize)> {
    let b = spec.block_index(j)?;
    let r = row_of_twice_m(j, twice_m).ok_or_else(|| Error::InvalidM {
        j: j.to_string(),
        m: half_integer_string(twice_m as i64),
    })?;
    Ok((b, r))
}

/// Effective Dicke ket `|J, M⟩`.
pub fn dicke_state(spec: &EnsembleSpec, j: JLabel, twice_m: i32) -> Result<BlockedKet> {
    let (b, r) = check_jm(spec, j, twice_m)?;
    let mut ket = BlockedKet::zeros(spec);
    ket.blocks[b][r] = ONE;
    Ok(ket)
}

/// `(|N/2, N/2⟩ + |N/2, -N/2⟩)/√2`.
pub fn cat_state(spec: &EnsembleSpec) -> BlockedKet {
    let mut ket = BlockedKet::zeros(spec);
    let top = spec.num_blocks() - 1;
    let d = spec.j_max().dim();
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ket.blocks[top][0] = amp;
    ket.blocks[top][d - 1] = amp;
    ket
}

/// The fully polarized state `|N/2, N/2⟩`.
pub fn coherent_pole_state(spec: &EnsembleSpec) -> BlockedKet {
    dicke_state(spec, spec.j_max(), spec.n() as i32).expect("top state always exists")
}

/// Collective density operator `ρ_C = ⊕_J ρ_J`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockedDensity {
    op: BlockOperator,
}

/// Outcome of [`BlockedDensity::validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalityReport {
    pub hermiticity_defect: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
}

impl PhysicalityReport {
    pub fn is_physical(&self) -> bool {
        self.hermiticity_defect <= 1e-10 && self.trace_deviation <= 1e-9 && self.min_eigenvalue >= -1e-9
    }
}

impl BlockedDensity {
    /// Wrap a block operator without checks (used for intermediate and truncated states).
    pub fn from_operator_unchecked(op: BlockOperator) -> Self {
        Self { op }
    }

    /// Wrap a block operator, requiring Hermiticity, unit trace and positivity.
    pub fn from_operator(op: BlockOperator) -> Result<Self> {
        let rho = Self { op };
        let report = rho.validate();
        if !report.is_physical() {
            return Err(Error::Physicality {
                t: f64::NAN,
                trace_dev: report.trace_deviation,
                min_eig: report.min_eigenvalue,
            });
        }
        Ok(rho)
    }

    pub fn spec(&self) -> &EnsembleSpec {
        self.op.spec()
    }

    pub fn as_operator(&self) -> &BlockOperator {
        &self.op
    }

    pub fn into_operator(self) -> BlockOperator {
        self.op
    }

    pub fn validate(&self) -> PhysicalityReport {
        PhysicalityReport {
            hermiticity_defect: self.op.hermiticity_defect(),
            trace_deviation: (self.trace() - 1.0).abs(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.op.num_blocks())
            .map(|b| {
                let blk = self.op.block(b).into_owned();
                let blk = (&blk + blk.adjoint()) * C64::new(0.5, 0.0);
                blk.symmetric_eigenvalues().min()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// `⟨k|ρ|k⟩ = Σ_J ⟨k_J|ρ_J|k_J⟩`.
    pub fn fidelity(&self, ket: &BlockedKet) -> Result<f64> {
        self.op.check_spec(ket.spec())?;
        let mut acc = 0.0;
        for b in 0..self.op.num_blocks() {
            let k = &ket.blocks[b];
            if k.iter().all(|c| *c == ZERO) {
                continue;
            }
            let rk = self.op.block(b) * k;
            acc += k.dotc(&rk).re;
        }
        Ok(acc)
    }

    /// `tr(ρ O)`.
    pub fn expectation(&self, op: &BlockOperator) -> Result<C64> {
        self.op.check_spec(op.spec())?;
        Ok(trace_product(&self.op, op))
    }

    /// `⟨O²⟩ - ⟨O⟩²` (real part).
    pub fn variance(&self, op: &BlockOperator) -> Result<f64> {
        let mean = self.expectation(op)?;
        let sq = self.expectation(&op.mul(op)?)?;
        Ok((sq - mean * mean).re)
    }

    /// Block populations `N_J = tr ρ_J` in ascending `J`.
    pub fn irrep_populations(&self) -> BTreeMap<JLabel, f64> {
        (0..self.op.num_blocks())
            .map(|b| (self.op.block_j(b), self.op.block(b).trace().re))
            .collect()
    }

    pub fn population(&self, j: JLabel) -> Result<f64> {
        let b = self.spec().block_index(j)?;
        Ok(self.op.block(b).trace().re)
    }

    /// `ξ² = N Var(J_y) / ⟨J_z⟩²`, or `None` when `|⟨J_z⟩|` is below [`SQUEEZING_JZ_FLOOR`].
    pub fn squeezing_parameter(&self) -> Option<f64> {
        let spec = *self.spec();
        let jy = collective_op(&spec, CollectiveOp::Jy);
        let jz = collective_op(&spec, CollectiveOp::Jz);
        squeezing_from_parts(spec.n(), self.variance(&jy).ok()?, self.expectation(&jz).ok()?.re)
    }

    /// Zero every block with `J < j_min_keep`; returns the removed population.
    ///
    /// The result is not renormalized.
    pub fn truncate(&self, j_min_keep: JLabel) -> Result<(Self, f64)> {
        let keep_from = self.spec().block_index(j_min_keep)?;
        let mut op = self.op.clone();
        let mut dropped = 0.0;
        for b in 0..keep_from {
            dropped += op.block(b).trace().re;
            op.block_mut(b).fill(ZERO);
        }
        Ok((Self { op }, dropped))
    }
}

pub(crate) fn squeezing_from_parts(n: u32, var_y: f64, mean_z: f64) -> Option<f64> {
    if mean_z.abs() < SQUEEZING_JZ_FLOOR {
        return None;
    }
    Some(n as f64 * var_y / (mean_z * mean_z))
}

/// `tr(A B)` summed blockwise in ascending `J`.
pub(crate) fn trace_product(a: &BlockOperator, b: &BlockOperator) -> C64 {
    let mut acc = ZERO;
    for blk in 0..a.num_blocks() {
        let d = a.block_dim(blk);
        let off = a.offset(blk);
        let (xa, xb) = (&a.data()[off..off + d * d], &b.data()[off..off + d * d]);
        // Σ_{r,c} A[r,c] B[c,r]
        for c in 0..d {
            for r in 0..d {
                acc += xa[c * d + r] * xb[r * d + c];
            }
        }
    }
    acc
}

/// Per-block outer products `|k_J⟩⟨k_J|`; cross-J coherences are dropped.
pub fn ket_to_density(ket: &BlockedKet) -> BlockedDensity {
    let mut op = BlockOperator::zeros(ket.spec());
    for (b, k) in ket.blocks.iter().enumerate() {
        let outer = k * k.adjoint();
        op.block_mut(b).copy_from(&outer);
    }
    BlockedDensity { op }
}

/// Incoherent mixture `Σ_J p_J ρ_J` of per-block densities with the given weights.
pub fn block_mixture(spec: &EnsembleSpec, parts: &[(f64, &BlockedDensity)]) -> Result<BlockedDensity> {
    let mut op = BlockOperator::zeros(spec);
    for (w, rho) in parts {
        op = op.add(&rho.op.scale(C64::new(*w, 0.0)))?;
    }
    Ok(BlockedDensity { op })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn spec(n: u32) -> EnsembleSpec {
        EnsembleSpec::new(n).unwrap()
    }

    fn j(twice: u32) -> JLabel {
        JLabel::from_twice(twice)
    }

    fn three_block_mixture() -> BlockedDensity {
        let s = spec(4);
        let a = ket_to_density(&dicke_state(&s, j(0), 0).unwrap());
        let b = ket_to_density(&dicke_state(&s, j(2), 2).unwrap());
        let c = ket_to_density(&cat_state(&s));
        block_mixture(&s, &[(0.25, &a), (0.25, &b), (0.5, &c)]).unwrap()
    }

    #[test]
    fn dicke_constructor() {
        let s = spec(4);
        let k = dicke_state(&s, j(4), 4).unwrap();
        assert_eq!(k.coefficient(j(4), 4), Some(ONE));
        assert_eq!(k.norm_sq(), 1.0);
        let singlet = dicke_state(&spec(2), j(0), 0).unwrap();
        assert_eq!(singlet.norm_sq(), 1.0);
        assert!(matches!(dicke_state(&s, j(2), 4), Err(Error::InvalidM { .. })));
        assert!(dicke_state(&s, j(3), 1).is_err());
    }

    #[test]
    fn cat_and_pole_states() {
        let k = cat_state(&spec(2));
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        assert_eq!(k.coefficient(j(2), 2), Some(h));
        assert_eq!(k.coefficient(j(2), -2), Some(h));
        assert_eq!(k.coefficient(j(2), 0), Some(ZERO));
        let k1 = cat_state(&spec(1));
        assert_eq!(k1.coefficient(j(1), 1), Some(h));
        assert_eq!(k1.coefficient(j(1), -1), Some(h));
        for n in 1..12 {
            assert!((cat_state(&spec(n)).norm_sq() - 1.0).abs() < 1e-15);
        }
        let p = coherent_pole_state(&spec(100));
        assert_eq!(p.coefficient(j(100), 100), Some(ONE));
    }

    #[test]
    fn density_from_kets() {
        let rho = ket_to_density(&dicke_state(&spec(2), j(2), 2).unwrap());
        assert_eq!(rho.as_operator().entry(j(2), 2, 2), Some(ONE));
        assert_eq!(rho.as_operator().max_abs(), 1.0);
        let cat = ket_to_density(&cat_state(&spec(2)));
        let b = 1;
        for (r, c) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert!((cat.as_operator().get(b, r, c).re - 0.5).abs() < 1e-15);
        }
        assert!(cat.validate().is_physical());

        // Mixed-block ket with weights p_J.
        let s = spec(4);
        let mut blocks: Vec<DVector<C64>> = s.j_range().iter().map(|j| DVector::zeros(j.dim())).collect();
        blocks[0][0] = C64::new(0.5f64.sqrt(), 0.0);
        blocks[2][1] = C64::new(0.0, 0.5f64.sqrt());
        let k = BlockedKet::from_blocks(&s, blocks).unwrap();
        let pops = ket_to_density(&k).irrep_populations();
        assert!((pops[&j(0)] - 0.5).abs() < 1e-15);
        assert!((pops[&j(4)] - 0.5).abs() < 1e-15);
        assert_eq!(pops[&j(2)], 0.0);
    }

    #[test]
    fn unnormalized_ket_rejected() {
        let s = spec(2);
        let blocks = vec![DVector::from_element(1, ONE), DVector::from_element(3, ONE)];
        assert!(matches!(BlockedKet::from_blocks(&s, blocks), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn observables() {
        let s = spec(100);
        let rho = ket_to_density(&coherent_pole_state(&s));
        let jz = collective_op(&s, CollectiveOp::Jz);
        let jy = collective_op(&s, CollectiveOp::Jy);
        assert!((rho.expectation(&jz).unwrap().re - 50.0).abs() < 1e-12);
        assert!((rho.variance(&jy).unwrap() - 25.0).abs() < 1e-10);
        let cat = cat_state(&spec(6));
        assert!((ket_to_density(&cat).fidelity(&cat).unwrap() - 1.0).abs() < 1e-15);
        assert!(rho.fidelity(&cat).is_err());
    }

    #[test]
    fn squeezing_of_pole_state_is_one() {
        for n in [2, 10, 100] {
            let rho = ket_to_density(&coherent_pole_state(&spec(n)));
            let xi = rho.squeezing_parameter().unwrap();
            assert!((xi - 1.0).abs() < 1e-9, "n={n}: {xi}");
        }
        let eq = ket_to_density(&dicke_state(&spec(10), j(10), 0).unwrap());
        assert_eq!(eq.squeezing_parameter(), None);
    }

    #[test]
    fn populations_and_truncation() {
        let rho = three_block_mixture();
        let pops = rho.irrep_populations();
        for (got, want) in pops.values().zip([0.25, 0.25, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((pops.values().sum::<f64>() - rho.trace()).abs() < 1e-15);

        let (t, dropped) = rho.truncate(j(4)).unwrap();
        assert!((dropped - 0.5).abs() < 1e-15);
        assert!((rho.trace() - t.trace() - dropped).abs() < 1e-12);

        let cat = ket_to_density(&cat_state(&spec(4)));
        let (t, dropped) = cat.truncate(j(4)).unwrap();
        assert_eq!(dropped, 0.0);
        assert_eq!(t, cat);
        assert!(cat.truncate(j(3)).is_err());
    }
}
