//! Banded kernels for the generator hot loops.
//!
//! Collective operators connect `M` values a bounded distance apart, so every
//! block (or block-to-block map) is stored as a few shifted diagonals.
//! Matrices are column-major, matching [`BlockOperator`] storage.

use std::sync::Arc;

use crate::operators::{BlockOperator, C64, ZERO};

/// `rows × cols` matrix with `A[a, a + o] = values[a]` for each diagonal `(o, values)`.
#[derive(Clone, Debug)]
pub(crate) struct Banded {
    rows: usize,
    cols: usize,
    /// `(offset, first row, values)`; `values[i]` sits at row `first + i`.
    diags: Vec<(isize, usize, Vec<C64>)>,
}

impl Banded {
    /// Build from `(row, col, value)` entries; empty diagonals are dropped.
    pub fn from_entries(rows: usize, cols: usize, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut by_offset: std::collections::BTreeMap<isize, Vec<C64>> = Default::default();
        for (r, c, v) in entries {
            debug_assert!(r < rows && c < cols);
            if v == ZERO {
                continue;
            }
            by_offset.entry(c as isize - r as isize).or_insert_with(|| vec![ZERO; rows])[r] += v;
        }
        let mut diags = Vec::new();
        for (o, vals) in by_offset {
            let first = vals.iter().position(|v| *v != ZERO);
            let last = vals.iter().rposition(|v| *v != ZERO);
            if let (Some(a), Some(b)) = (first, last) {
                diags.push((o, a, vals[a..=b].to_vec()));
            }
        }
        Self { rows, cols, diags }
    }

    pub fn is_empty(&self) -> bool {
        self.diags.is_empty()
    }

    /// `out = A X` for `X` of shape `cols × n`; `out` is `rows × n`.
    pub fn left(&self, x: &[C64], n: usize, out: &mut Vec<C64>) {
        out.clear();
        out.resize(self.rows * n, ZERO);
        self.left_add(x, n, out);
    }

    /// `out += A X` for `X` of shape `cols × n`.
    pub fn left_add(&self, x: &[C64], n: usize, out: &mut [C64]) {
        for c in 0..n {
            let xc = &x[c * self.cols..(c + 1) * self.cols];
            let oc = &mut out[c * self.rows..(c + 1) * self.rows];
            for (o, first, vals) in &self.diags {
                let start = (*first as isize + o) as usize;
                let dst = &mut oc[*first..*first + vals.len()];
                let src = &xc[start..start + vals.len()];
                for ((d, v), s) in dst.iter_mut().zip(vals).zip(src) {
                    *d += v * s;
                }
            }
        }
    }

    /// `out += w · Y A†` for `Y` of shape `m × cols`; `out` is `m × rows`.
    #[cfg(test)]
    pub fn right_adjoint_add(&self, y: &[C64], m: usize, w: C64, out: &mut [C64]) {
        self.right_adjoint_add_rows(y, m, w, out, |_| m);
    }

    /// As [`Banded::right_adjoint_add`] for square results, upper triangle only.
    pub fn right_adjoint_add_upper(&self, y: &[C64], m: usize, w: C64, out: &mut [C64]) {
        self.right_adjoint_add_rows(y, m, w, out, |r| r + 1);
    }

    fn right_adjoint_add_rows(&self, y: &[C64], m: usize, w: C64, out: &mut [C64], len: impl Fn(usize) -> usize) {
        for (o, first, vals) in &self.diags {
            for (i, v) in vals.iter().enumerate() {
                let r = first + i;
                let k = (r as isize + o) as usize;
                let coef = v.conj() * w;
                let l = len(r);
                let src = &y[k * m..k * m + l];
                let dst = &mut out[r * m..r * m + l];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * coef;
                }
            }
        }
    }

    /// `tr(w · Y A†)` for square `Y A†` (`Y` is `rows × cols`).
    pub fn trace_right_adjoint(&self, y: &[C64], w: C64) -> C64 {
        let mut t = ZERO;
        for (o, first, vals) in &self.diags {
            for (i, v) in vals.iter().enumerate() {
                let r = first + i;
                let k = (r as isize + o) as usize;
                t += y[k * self.rows + r] * v.conj();
            }
        }
        t * w
    }
}

/// Block-diagonal operator in banded form.
#[derive(Clone, Debug)]
pub(crate) struct BandedBlocks {
    blocks: Vec<Banded>,
    offsets: Arc<[usize]>,
}

impl BandedBlocks {
    pub fn new(op: &BlockOperator) -> Self {
        let blocks = (0..op.num_blocks())
            .map(|b| {
                let d = op.block_dim(b);
                let blk = op.block(b);
                Banded::from_entries(d, d, (0..d).flat_map(|c| (0..d).map(move |r| (r, c))).map(|(r, c)| (r, c, blk[(r, c)])))
            })
            .collect();
        Self { blocks, offsets: op.offsets.clone() }
    }

    fn block_range(&self, b: usize) -> (usize, usize) {
        let d = self.blocks[b].rows;
        (self.offsets[b], d)
    }

    /// Upper triangle of `out += A·X + X·A†` for Hermitian `X`, blocks `first_block..`.
    pub fn add_left_and_adjoint_right_upper(&self, x: &[C64], out: &mut [C64], scratch: &mut Vec<C64>, first_block: usize) {
        for b in first_block..self.blocks.len() {
            let a = &self.blocks[b];
            if a.is_empty() {
                continue;
            }
            let (off, d) = self.block_range(b);
            a.left(&x[off..off + d * d], d, scratch);
            let ob = &mut out[off..off + d * d];
            for c in 0..d {
                for r in 0..=c {
                    ob[c * d + r] += scratch[c * d + r] + scratch[r * d + c].conj();
                }
            }
        }
    }

    /// Upper triangle of `out += A·X·A†`, blocks `first_block..`.
    pub fn add_sandwich_upper(&self, x: &[C64], out: &mut [C64], scratch: &mut Vec<C64>, first_block: usize) {
        for b in first_block..self.blocks.len() {
            let a = &self.blocks[b];
            if a.is_empty() {
                continue;
            }
            let (off, d) = self.block_range(b);
            a.left(&x[off..off + d * d], d, scratch);
            a.right_adjoint_add_upper(scratch, d, C64::new(1.0, 0.0), &mut out[off..off + d * d]);
        }
    }
}

/// Fill the strict lower triangle of each block from the upper one and
/// drop the imaginary part of the diagonal.
pub(crate) fn mirror_upper(offsets: &[usize], dims: impl Iterator<Item = usize>, data: &mut [C64]) {
    for (off, d) in offsets.iter().zip(dims) {
        let blk = &mut data[*off..off + d * d];
        for c in 0..d {
            blk[c * d + c].im = 0.0;
            for r in 0..c {
                blk[r * d + c] = blk[c * d + r].conj();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irrep::EnsembleSpec;
    use crate::operators::{collective_op, counter_twisting_hamiltonian, CollectiveOp};
    use nalgebra::DMatrix;

    fn test_matrix(rows: usize, cols: usize, seed: f64) -> DMatrix<C64> {
        DMatrix::from_fn(rows, cols, |r, c| {
            let t = seed + (r * cols + c) as f64;
            C64::new((t * 0.37).sin(), (t * 0.11).cos())
        })
    }

    #[test]
    fn rectangular_kernels_match_dense() {
        let (rows, cols) = (4, 6);
        let a = DMatrix::from_fn(rows, cols, |r, c| {
            if c == r + 1 || c == r + 2 || (r == 3 && c == 0) {
                C64::new(r as f64 + 1.0, c as f64 - 2.0)
            } else {
                ZERO
            }
        });
        let band = Banded::from_entries(rows, cols, (0..cols).flat_map(|c| (0..rows).map(move |r| (r, c))).map(|(r, c)| (r, c, a[(r, c)])));
        let x = test_matrix(cols, cols, 0.5);
        let mut ax = Vec::new();
        band.left(x.as_slice(), cols, &mut ax);
        assert!((DMatrix::from_vec(rows, cols, ax.clone()) - &a * &x).norm() < 1e-12);
        let mut out = vec![ZERO; rows * rows];
        let w = C64::new(0.5, -1.0);
        band.right_adjoint_add(&ax, rows, w, &mut out);
        let expect = &a * &x * a.adjoint() * w;
        assert!((DMatrix::from_vec(rows, rows, out) - &expect).norm() < 1e-12);
        assert!((band.trace_right_adjoint(&ax, w) - expect.trace()).norm() < 1e-12);
    }

    #[test]
    fn block_kernels_match_dense() {
        let s = EnsembleSpec::new(5).unwrap();
        let a = counter_twisting_hamiltonian(&s, 0.4)
            .add(&collective_op(&s, CollectiveOp::Jminus).scale(C64::new(0.2, 0.7)))
            .unwrap();
        let mut x = BlockOperator::zeros(&s);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        }
        let x = x.add(&x.adjoint()).unwrap();
        let banded = BandedBlocks::new(&a);
        let dims = || (0..s.num_blocks()).map(|b| s.block_j(b).dim());
        let mut out = vec![ZERO; x.data().len()];
        banded.add_left_and_adjoint_right_upper(x.data(), &mut out, &mut Vec::new(), 0);
        mirror_upper(&x.offsets, dims(), &mut out);
        let expect = a.mul(&x).unwrap().add(&x.mul(&a.adjoint()).unwrap()).unwrap();
        assert!(BlockOperator::from_raw(&s, out).max_abs_diff(&expect).unwrap() < 1e-12);

        let mut out = vec![ZERO; x.data().len()];
        banded.add_sandwich_upper(x.data(), &mut out, &mut Vec::new(), 0);
        mirror_upper(&x.offsets, dims(), &mut out);
        let expect = a.mul(&x).unwrap().mul(&a.adjoint()).unwrap();
        assert!(BlockOperator::from_raw(&s, out).max_abs_diff(&expect).unwrap() < 1e-12);
    }
}
