use nalgebra::{DMatrix, DVector};

use super::sparse::SparseMatrix;
use super::{check_operator_size, check_state_size, FullState};
use crate::error::{Error, Result};
use crate::irrep::{EnsembleSpec, JLabel};
use crate::operators::{row_of_twice_m, twice_m_of_row, BlockOperator, LocalOperatorCoeffs, C64, ZERO};
use crate::state::{BlockedDensity, BlockedKet};

/// Bit position of 1-based `site`; site 1 is the most significant bit.
fn bit_of_site(n: u32, site: u32) -> u32 {
    n - site
}

/// `s` acting on `site` (1-based) of an `n`-spin product space.
///
/// Basis index bits are `0 = ↑`, `1 = ↓`.
pub fn local_op_full(n: u32, site: u32, s: &LocalOperatorCoeffs) -> Result<SparseMatrix> {
    check_operator_size(n)?;
    if site == 0 || site > n {
        return Err(Error::InvalidSite { site, n });
    }
    let m = s.to_matrix();
    let bit = bit_of_site(n, site);
    let dim = 1usize << n;
    let mut trip = Vec::new();
    for i in 0..dim {
        let b = (i >> bit) & 1;
        for (a, row) in m.iter().enumerate() {
            let v = row[b];
            if v != ZERO {
                let out = (i & !(1 << bit)) | (a << bit);
                trip.push((out, i, v));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(dim, trip))
}

/// `Σ_n s^(n)` in the product space.
pub fn symmetric_sum_full(n: u32, s: &LocalOperatorCoeffs) -> Result<SparseMatrix> {
    let mut acc = SparseMatrix::zeros(1 << n);
    for site in 1..=n {
        acc = acc.add(&local_op_full(n, site, s)?);
    }
    Ok(acc)
}

/// One basis vector `|J, M, i⟩` of the coupled basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct IrrepLabel {
    pub j: JLabel,
    /// Copy index `i` in `0..d_J`.
    pub copy: usize,
    pub twice_m: i32,
}

/// Orthonormal coupled basis of the `n`-spin product space.
///
/// Columns are ordered by `J` ascending, then copy, then `M` descending, so
/// each `(J, copy)` multiplet occupies a contiguous range of `2J+1` columns.
#[derive(Clone, Debug)]
pub struct IrrepBasis {
    spec: EnsembleSpec,
    vectors: DMatrix<f64>,
    labels: Vec<IrrepLabel>,
    /// `(J block index, first column)` for every multiplet.
    multiplets: Vec<(usize, usize)>,
}

struct Family {
    twice_j: u32,
    /// `vecs[r]` has `M = J - r`.
    vecs: Vec<DVector<f64>>,
}

/// Coupled basis built by adding spins left to right with Condon–Shortley
/// Clebsch–Gordan coefficients.
pub fn cg_irrep_basis(n: u32) -> Result<IrrepBasis> {
    check_state_size(n)?;
    let spec = EnsembleSpec::new(n)?;
    let up = DVector::from_vec(vec![1.0, 0.0]);
    let down = DVector::from_vec(vec![0.0, 1.0]);
    let mut families = vec![Family { twice_j: 1, vecs: vec![up, down] }];
    for k in 1..n as usize {
        let dim = 1usize << (k + 1);
        let mut next = Vec::new();
        for fam in &families {
            let j1 = fam.twice_j as f64 / 2.0;
            let mut targets = vec![fam.twice_j + 1];
            if fam.twice_j >= 1 {
                targets.push(fam.twice_j - 1);
            }
            for tj in targets {
                let j = JLabel::from_twice(tj);
                let mut vecs = Vec::with_capacity(j.dim());
                for r in 0..j.dim() {
                    let m = twice_m_of_row(j, r) as f64 / 2.0;
                    let mut v = DVector::zeros(dim);
                    // (bit, m_s, coefficient)
                    let terms = if tj > fam.twice_j {
                        [
                            (0usize, 0.5, ((j1 + m + 0.5) / (2.0 * j1 + 1.0)).max(0.0).sqrt()),
                            (1, -0.5, ((j1 - m + 0.5) / (2.0 * j1 + 1.0)).max(0.0).sqrt()),
                        ]
                    } else {
                        [
                            (0usize, 0.5, -((j1 - m + 0.5) / (2.0 * j1 + 1.0)).max(0.0).sqrt()),
                            (1, -0.5, ((j1 + m + 0.5) / (2.0 * j1 + 1.0)).max(0.0).sqrt()),
                        ]
                    };
                    for (bit, ms, c) in terms {
                        let m1 = m - ms;
                        if c == 0.0 || m1.abs() > j1 + 1e-9 {
                            continue;
                        }
                        let r1 = (j1 - m1).round() as usize;
                        for (idx, x) in fam.vecs[r1].iter().enumerate() {
                            if *x != 0.0 {
                                v[2 * idx + bit] += c * x;
                            }
                        }
                    }
                    vecs.push(v);
                }
                next.push(Family { twice_j: tj, vecs });
            }
        }
        families = next;
    }

    let dim = 1usize << n;
    let mut vectors = DMatrix::zeros(dim, dim);
    let mut labels = Vec::with_capacity(dim);
    let mut multiplets = Vec::new();
    for (b, j) in spec.j_range().into_iter().enumerate() {
        let mut copy = 0;
        for fam in families.iter().filter(|f| f.twice_j == j.twice()) {
            multiplets.push((b, labels.len()));
            for (r, v) in fam.vecs.iter().enumerate() {
                vectors.set_column(labels.len(), v);
                labels.push(IrrepLabel { j, copy, twice_m: twice_m_of_row(j, r) });
            }
            copy += 1;
        }
    }
    debug_assert_eq!(labels.len(), dim);
    Ok(IrrepBasis { spec, vectors, labels, multiplets })
}

impl IrrepBasis {
    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Columns are the basis vectors.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> &[IrrepLabel] {
        &self.labels
    }

    /// Number of copies of each block.
    pub fn copies(&self, block: usize) -> usize {
        self.multiplets.iter().filter(|(b, _)| *b == block).count()
    }

    fn complex_vectors(&self) -> DMatrix<C64> {
        self.vectors.map(|x| C64::new(x, 0.0))
    }

    /// Projector onto total angular momentum `j`.
    pub fn jsq_projector(&self, j: JLabel) -> Result<DMatrix<f64>> {
        let b = self.spec.block_index(j)?;
        let mut p = DMatrix::zeros(self.dim(), self.dim());
        for &(mb, start) in &self.multiplets {
            if mb == b {
                let cols = self.vectors.columns(start, j.dim());
                p += &cols * cols.transpose();
            }
        }
        Ok(p)
    }

    /// Full-space density whose blocks are `ρ_J / d_J` on every copy.
    pub fn embed_density(&self, rho: &BlockedDensity) -> Result<DMatrix<C64>> {
        rho.as_operator().check_spec(&self.spec)?;
        let mut r = DMatrix::from_element(self.dim(), self.dim(), ZERO);
        for &(b, start) in &self.multiplets {
            let d = self.copies(b) as f64;
            let blk = rho.as_operator().block(b);
            let k = blk.nrows();
            let mut view = r.view_mut((start, start), (k, k));
            view.copy_from(&blk);
            view /= C64::new(d, 0.0);
        }
        let u = self.complex_vectors();
        Ok(&u * r * u.transpose())
    }

    /// Pure state `Σ_{J,M} c_{J,M} d_J^{-1/2} Σ_i |J, M, i⟩`.
    pub fn embed_ket(&self, ket: &BlockedKet) -> Result<FullState> {
        if ket.spec() != &self.spec {
            return Err(Error::SpecMismatch { left: ket.spec().n(), right: self.spec.n() });
        }
        let mut coeffs = DVector::from_element(self.dim(), ZERO);
        for &(b, start) in &self.multiplets {
            let d = self.copies(b) as f64;
            for (r, c) in ket.block(b).iter().enumerate() {
                coeffs[start + r] = c / d.sqrt();
            }
        }
        let psi = self.complex_vectors() * coeffs;
        FullState::from_ket(self.spec.n(), psi)
    }

    /// Projector `Σ_{J,i} |ψ_{J,i}⟩⟨ψ_{J,i}|` with `|ψ_{J,i}⟩ = Σ_M c_{J,M}|J, M, i⟩`.
    ///
    /// Its expectation in an embedded density equals the collective fidelity.
    pub fn collective_projector(&self, ket: &BlockedKet) -> Result<DMatrix<C64>> {
        if ket.spec() != &self.spec {
            return Err(Error::SpecMismatch { left: ket.spec().n(), right: self.spec.n() });
        }
        let u = self.complex_vectors();
        let mut p = DMatrix::from_element(self.dim(), self.dim(), ZERO);
        for &(b, start) in &self.multiplets {
            let blk = ket.block(b);
            if blk.iter().all(|c| *c == ZERO) {
                continue;
            }
            let v = u.columns(start, blk.len()) * blk;
            p += &v * v.adjoint();
        }
        Ok(p)
    }

    /// Rotate a full-space density into the coupled basis.
    pub fn to_irrep_basis(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let u = self.complex_vectors();
        u.transpose() * rho * u
    }

    /// Sum the multiplet blocks over copies; also return the Frobenius distance
    /// between `rho` and the re-embedding of the result.
    pub fn project(&self, rho: &DMatrix<C64>) -> Result<(BlockedDensity, f64)> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::SpecMismatch { left: rho.nrows() as u32, right: self.dim() as u32 });
        }
        let r = self.to_irrep_basis(rho);
        let mut op = BlockOperator::zeros(&self.spec);
        for &(b, start) in &self.multiplets {
            let k = op.block_dim(b);
            let mut blk = op.block_mut(b);
            blk += r.view((start, start), (k, k));
        }
        let mut re_embedded = DMatrix::from_element(self.dim(), self.dim(), ZERO);
        for &(b, start) in &self.multiplets {
            let d = self.copies(b) as f64;
            let k = op.block_dim(b);
            let mut view = re_embedded.view_mut((start, start), (k, k));
            view.copy_from(&op.block(b));
            view /= C64::new(d, 0.0);
        }
        let residual = (r - re_embedded).norm();
        Ok((BlockedDensity::from_operator_unchecked(op), residual))
    }

    /// Coefficient of column `label` in the block layout, if it exists.
    pub fn column_of(&self, label: IrrepLabel) -> Option<usize> {
        let b = self.spec.block_index(label.j).ok()?;
        let row = row_of_twice_m(label.j, label.twice_m)?;
        self.multiplets.iter().filter(|(mb, _)| *mb == b).nth(label.copy).map(|(_, s)| s + row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irrep::degeneracy;
    use crate::operators::{collective_op, CollectiveOp};
    use crate::state::{cat_state, dicke_state, ket_to_density};

    #[test]
    fn local_operator_placement() {
        // site 1 is the most significant bit: σ_-^(1)|↑↑⟩ = |↓↑⟩ = index 2
        let m = local_op_full(2, 1, &LocalOperatorCoeffs::sigma_minus()).unwrap();
        assert_eq!(m.get(2, 0), C64::new(1.0, 0.0));
        assert_eq!(m.nnz(), 2);
        let z = local_op_full(3, 3, &LocalOperatorCoeffs::spin_z()).unwrap();
        assert_eq!(z.get(1, 1), C64::new(-0.5, 0.0));
        assert!(local_op_full(3, 4, &LocalOperatorCoeffs::spin_z()).is_err());
        assert!(local_op_full(13, 1, &LocalOperatorCoeffs::spin_z()).is_err());
    }

    #[test]
    fn basis_is_orthonormal_with_correct_multiplicities() {
        for n in 1..=6 {
            let basis = cg_irrep_basis(n).unwrap();
            let u = basis.vectors();
            let e = (u.transpose() * u - DMatrix::identity(u.nrows(), u.nrows())).amax();
            assert!(e < 1e-12, "n={n}: {e}");
            for (b, j) in basis.spec().j_range().into_iter().enumerate() {
                let d = degeneracy(basis.spec(), j).unwrap().to_u64().unwrap() as usize;
                assert_eq!(basis.copies(b), d);
            }
        }
    }

    #[test]
    fn basis_vectors_are_jz_and_casimir_eigenvectors() {
        let n = 5;
        let basis = cg_irrep_basis(n).unwrap();
        let jz = symmetric_sum_full(n, &LocalOperatorCoeffs::spin_z()).unwrap().to_dense();
        let jp = symmetric_sum_full(n, &LocalOperatorCoeffs::sigma_plus()).unwrap().to_dense();
        let jm = symmetric_sum_full(n, &LocalOperatorCoeffs::sigma_minus()).unwrap().to_dense();
        let half = C64::new(0.5, 0.0);
        let casimir = &jz * &jz + (&jp * &jm + &jm * &jp) * half;
        for (col, label) in basis.labels().iter().enumerate() {
            let v = basis.vectors().column(col).map(|x| C64::new(x, 0.0));
            let j = label.j.value();
            let m = label.twice_m as f64 / 2.0;
            assert!((&jz * &v - &v * C64::new(m, 0.0)).norm() < 1e-12);
            assert!((&casimir * &v - &v * C64::new(j * (j + 1.0), 0.0)).norm() < 1e-11);
            // Condon–Shortley phase: J_+|J,M,i⟩ = +√(J(J+1)-M(M+1)) |J,M+1,i⟩
            if label.twice_m < label.j.twice() as i32 {
                let up = IrrepLabel { twice_m: label.twice_m + 2, ..*label };
                let w = basis.vectors().column(basis.column_of(up).unwrap()).map(|x| C64::new(x, 0.0));
                let c = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                assert!((&jp * &v - &w * C64::new(c, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_then_project_round_trips() {
        let n = 4;
        let basis = cg_irrep_basis(n).unwrap();
        let spec = basis.spec();
        let ket = dicke_state(spec, JLabel::from_twice(2), 0).unwrap();
        let rho = ket_to_density(&ket);
        let full = basis.embed_density(&rho).unwrap();
        let tr: C64 = full.diagonal().sum();
        assert!((tr.re - 1.0).abs() < 1e-12);
        let (back, residual) = basis.project(&full).unwrap();
        assert!(residual < 1e-12);
        assert!(back.as_operator().max_abs_diff(rho.as_operator()).unwrap() < 1e-12);
        // the pure embedding projects to the same collective density
        let psi = basis.embed_ket(&ket).unwrap();
        let (back2, _) = basis.project(&psi.density()).unwrap();
        assert!(back2.as_operator().max_abs_diff(rho.as_operator()).unwrap() < 1e-12);
        let p = basis.collective_projector(&ket).unwrap();
        let f: C64 = (&p * &full).trace();
        assert!((f.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collective_operators_match_symmetric_sums() {
        let n = 4;
        let basis = cg_irrep_basis(n).unwrap();
        let spec = basis.spec();
        let cat = ket_to_density(&cat_state(spec));
        let full = basis.embed_density(&cat).unwrap();
        for (which, s) in [
            (CollectiveOp::Jz, LocalOperatorCoeffs::spin_z()),
            (CollectiveOp::Jminus, LocalOperatorCoeffs::sigma_minus()),
        ] {
            let op = collective_op(spec, which);
            let x = crate::state::trace_product(cat.as_operator(), &op);
            let y = symmetric_sum_full(n, &s).unwrap().trace_with(&full);
            assert!((x - y).norm() < 1e-12);
        }
        let p = basis.jsq_projector(spec.j_max()).unwrap();
        let pf: f64 = (p.map(|x| C64::new(x, 0.0)) * &full).trace().re;
        assert!((pf - 1.0).abs() < 1e-12);
    }
}
