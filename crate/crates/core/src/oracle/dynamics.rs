use std::collections::VecDeque;
use std::ops::Mul;

use nalgebra::DMatrix;

use super::basis::{local_op_full, symmetric_sum_full, IrrepBasis};
use super::sparse::SparseMatrix;
use super::{check_state_size, collective_spin_full, FullState};
use crate::error::{Error, Result};
use crate::integrator::{
    population_column, rk4_advance, Rk4Workspace, TimeGrid, TrajectoryRecord, NEGATIVITY_ABORT, TRACE_ABORT,
};
use crate::liouvillian::{ChannelKind, ChannelSpec, Generator, Scalar};
use crate::operators::{LocalOperatorCoeffs, C64, ZERO};

/// Lindblad channel in the product space: `Γ Σ_k D[L_k]`.
#[derive(Clone, Debug)]
pub struct FullChannel {
    rate: f64,
    jumps: Vec<SparseMatrix>,
}

impl FullChannel {
    pub fn new(rate: f64, jumps: Vec<SparseMatrix>) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(Self { rate, jumps })
    }

    /// One jump per site for local channels; one summed jump for collective ones.
    pub fn from_spec(n: u32, ch: &ChannelSpec) -> Result<Self> {
        let jumps = match ch.kind() {
            ChannelKind::Local => {
                (1..=n).map(|site| local_op_full(n, site, ch.coeffs())).collect::<Result<Vec<_>>>()?
            }
            ChannelKind::Collective => vec![symmetric_sum_full(n, ch.coeffs())?],
        };
        Self::new(ch.rate(), jumps)
    }

    /// `s` acting on a single site only, which breaks permutation symmetry.
    pub fn single_site(n: u32, site: u32, s: &LocalOperatorCoeffs, rate: f64) -> Result<Self> {
        Self::new(rate, vec![local_op_full(n, site, s)?])
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// `dρ/dt = Aρ + ρA† + Σ_k L_k ρ L_k†` with `A = -iH - ½ Σ_k L_k† L_k`.
#[derive(Clone, Debug)]
pub struct FullModel {
    n: u32,
    drift: SparseMatrix,
    jumps: Vec<SparseMatrix>,
}

impl FullModel {
    pub fn new(n: u32, hamiltonian: Option<&SparseMatrix>, channels: &[FullChannel]) -> Result<Self> {
        check_state_size(n)?;
        let dim = 1usize << n;
        let mut drift = SparseMatrix::zeros(dim);
        if let Some(h) = hamiltonian {
            if h.dim() != dim {
                return Err(Error::SpecMismatch { left: h.dim() as u32, right: dim as u32 });
            }
            drift = drift.add(&h.scale(C64::new(0.0, -1.0)));
        }
        let mut jumps = Vec::new();
        for ch in channels {
            if ch.rate == 0.0 {
                continue;
            }
            for l in &ch.jumps {
                if l.dim() != dim {
                    return Err(Error::SpecMismatch { left: l.dim() as u32, right: dim as u32 });
                }
                let scaled = l.scale(C64::new(ch.rate.sqrt(), 0.0));
                drift = drift.add(&scaled.adjoint().mul(&scaled).scale(C64::new(-0.5, 0.0)));
                jumps.push(scaled);
            }
        }
        Ok(Self { n, drift, jumps })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    fn is_real(&self) -> bool {
        std::iter::once(&self.drift).chain(&self.jumps).all(|m| m.triplets().all(|(_, _, v)| v.im == 0.0))
    }

    /// `L ρ` on a dense density.
    pub fn apply_dense(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let a = self.drift.to_dense();
        let mut out = &a * rho + rho * a.adjoint();
        for l in &self.jumps {
            let l = l.to_dense();
            out += &l * rho * l.adjoint();
        }
        out
    }
}

trait Entry: Scalar + Mul<Output = Self> {
    fn from_c64(v: C64) -> Self;
    fn to_c64(self) -> C64;
}

impl Entry for f64 {
    fn from_c64(v: C64) -> Self {
        v.re
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Entry for C64 {
    fn from_c64(v: C64) -> Self {
        v
    }
    fn to_c64(self) -> C64 {
        self
    }
}

/// Vectorized superoperator restricted to density entries reachable from
/// the initial support.
///
/// With `symmetric` set, only entries `(i, j)` with `i <= j` are stored; this
/// is exact for real generators acting on real symmetric densities.
struct SupportGenerator<T> {
    dim: usize,
    symmetric: bool,
    keys: Vec<(usize, usize)>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    /// Index of the transposed entry (unused when `symmetric`).
    partner: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl<T: Entry> SupportGenerator<T> {
    fn new(model: &FullModel, rho0: &DMatrix<C64>, symmetric: bool) -> Self {
        let dim = 1usize << model.n;
        let key = |i: usize, j: usize| if symmetric && i > j { (j, i) } else { (i, j) };
        let drift_t = model.drift.adjoint();
        let jumps_t: Vec<SparseMatrix> = model.jumps.iter().map(|l| l.adjoint()).collect();

        let mut index = vec![ABSENT; dim * dim];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        let visit = |i: usize, j: usize, index: &mut Vec<u32>, queue: &mut VecDeque<(usize, usize)>| {
            let (i, j) = key(i, j);
            if index[i * dim + j] == ABSENT {
                index[i * dim + j] = 0;
                queue.push_back((i, j));
            }
        };
        for i in 0..dim {
            for j in 0..dim {
                if rho0[(i, j)] != ZERO {
                    visit(i, j, &mut index, &mut queue);
                }
            }
        }
        while let Some((a, b)) = queue.pop_front() {
            order.push((a, b));
            for (i, _) in drift_t.row(a) {
                visit(i, b, &mut index, &mut queue);
            }
            for (j, _) in drift_t.row(b) {
                visit(a, j, &mut index, &mut queue);
            }
            for lt in &jumps_t {
                for (i, _) in lt.row(a) {
                    for (j, _) in lt.row(b) {
                        visit(i, j, &mut index, &mut queue);
                    }
                }
            }
        }
        order.sort_unstable();
        for (k, &(i, j)) in order.iter().enumerate() {
            index[i * dim + j] = k as u32;
        }
        let lookup = |i: usize, j: usize| {
            let (i, j) = key(i, j);
            index[i * dim + j]
        };

        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut acc: Vec<(u32, C64)> = Vec::new();
        for &(i, j) in &order {
            acc.clear();
            for (a, v) in model.drift.row(i) {
                acc.push((lookup(a, j), v));
            }
            for (b, v) in model.drift.row(j) {
                acc.push((lookup(i, b), v.conj()));
            }
            for l in &model.jumps {
                for (a, va) in l.row(i) {
                    for (b, vb) in l.row(j) {
                        acc.push((lookup(a, b), va * vb.conj()));
                    }
                }
            }
            acc.retain(|(c, _)| *c != ABSENT);
            acc.sort_unstable_by_key(|(c, _)| *c);
            let mut last: Option<(u32, C64)> = None;
            for &(c, v) in acc.iter() {
                match last.as_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => {
                        if let Some((lc, lv)) = last.take() {
                            if lv != ZERO {
                                cols.push(lc);
                                vals.push(T::from_c64(lv));
                            }
                        }
                        last = Some((c, v));
                    }
                }
            }
            if let Some((lc, lv)) = last {
                if lv != ZERO {
                    cols.push(lc);
                    vals.push(T::from_c64(lv));
                }
            }
            row_ptr.push(cols.len());
        }
        let partner = if symmetric { Vec::new() } else { order.iter().map(|&(i, j)| lookup(j, i)).collect() };
        Self { dim, symmetric, keys: order, row_ptr, cols, vals, partner }
    }

    fn pack(&self, rho: &DMatrix<C64>) -> Vec<T> {
        self.keys.iter().map(|&(i, j)| T::from_c64(rho[(i, j)])).collect()
    }

    fn unpack(&self, x: &[T]) -> DMatrix<C64> {
        let mut rho = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (&(i, j), v) in self.keys.iter().zip(x) {
            let v = v.to_c64();
            rho[(i, j)] = v;
            if self.symmetric {
                rho[(j, i)] = v;
            }
        }
        rho
    }
}

impl<T: Entry> Generator for SupportGenerator<T> {
    type Scalar = T;

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = T::default();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *o = acc;
        }
    }

    fn post_step(&self, x: &mut [T]) {
        if self.symmetric {
            return;
        }
        for k in 0..x.len() {
            let p = self.partner[k] as usize;
            if p > k {
                let a = x[k].to_c64();
                let b = x[p].to_c64();
                let m = (a + b.conj()) * 0.5;
                x[k] = T::from_c64(m);
                x[p] = T::from_c64(m.conj());
            } else if p == k {
                x[k] = T::from_c64(C64::new(x[k].to_c64().re, 0.0));
            }
        }
    }
}

/// Quantities recorded along a full-space trajectory.
#[derive(Clone, Debug)]
pub enum FullObservable {
    /// `tr(P ρ)` for a projector `P`, in column `name`.
    Fidelity { name: String, projector: DMatrix<C64> },
    Jx,
    Jy,
    Jz,
    /// One column `N_<J>` per total angular momentum.
    Populations,
    Trace,
    MinEigenvalue,
    /// Distance from the set of embedded collective densities.
    Residual,
}

struct Recorder<'a> {
    basis: &'a IrrepBasis,
    observables: &'a [FullObservable],
    spins: [SparseMatrix; 3],
    pops: Vec<DMatrix<f64>>,
}

impl<'a> Recorder<'a> {
    fn new(basis: &'a IrrepBasis, observables: &'a [FullObservable]) -> Result<Self> {
        let n = basis.spec().n();
        let pops = if observables.iter().any(|o| matches!(o, FullObservable::Populations)) {
            basis.spec().j_range().into_iter().map(|j| basis.jsq_projector(j)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self { basis, observables, spins: collective_spin_full(n)?, pops })
    }

    fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for o in self.observables {
            match o {
                FullObservable::Fidelity { name, .. } => names.push(name.clone()),
                FullObservable::Jx => names.push("jx".into()),
                FullObservable::Jy => names.push("jy".into()),
                FullObservable::Jz => names.push("jz".into()),
                FullObservable::Populations => {
                    names.extend(self.basis.spec().j_range().into_iter().map(population_column))
                }
                FullObservable::Trace => names.push("trace".into()),
                FullObservable::MinEigenvalue => names.push("min_eig".into()),
                FullObservable::Residual => names.push("residual".into()),
            }
        }
        names
    }

    fn evaluate(&self, rho: &DMatrix<C64>, min_eig: f64, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for o in self.observables {
            match o {
                FullObservable::Fidelity { projector, .. } => {
                    out.push(projector.iter().zip(rho.transpose().iter()).map(|(p, r)| p * r).sum::<C64>().re)
                }
                FullObservable::Jx => out.push(self.spins[0].trace_with(rho).re),
                FullObservable::Jy => out.push(self.spins[1].trace_with(rho).re),
                FullObservable::Jz => out.push(self.spins[2].trace_with(rho).re),
                FullObservable::Populations => {
                    for p in &self.pops {
                        out.push(p.iter().zip(rho.transpose().iter()).map(|(a, r)| r.re * a).sum());
                    }
                }
                FullObservable::Trace => out.push(rho.diagonal().iter().map(|v| v.re).sum()),
                FullObservable::MinEigenvalue => out.push(min_eig),
                FullObservable::Residual => out.push(self.basis.project(rho)?.1),
            }
        }
        Ok(())
    }
}

fn min_eigenvalue(rho: &DMatrix<C64>) -> f64 {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().min()
}

/// Evolve a full-space density with fixed-step RK4.
///
/// Real generators acting on real densities take a real symmetric fast path;
/// the iterates are the same as the complex ones up to rounding.
pub fn evolve_full(
    basis: &IrrepBasis,
    rho0: &FullState,
    model: &FullModel,
    grid: &TimeGrid,
    observables: &[FullObservable],
) -> Result<TrajectoryRecord> {
    if rho0.n() != model.n() || basis.spec().n() != model.n() {
        return Err(Error::SpecMismatch { left: rho0.n(), right: model.n() });
    }
    let real = model.is_real() && rho0.as_matrix().iter().all(|v| v.im == 0.0);
    if real {
        run(SupportGenerator::<f64>::new(model, rho0.as_matrix(), true), basis, rho0, grid, observables)
    } else {
        run(SupportGenerator::<C64>::new(model, rho0.as_matrix(), false), basis, rho0, grid, observables)
    }
}

fn run<T: Entry>(
    g: SupportGenerator<T>,
    basis: &IrrepBasis,
    rho0: &FullState,
    grid: &TimeGrid,
    observables: &[FullObservable],
) -> Result<TrajectoryRecord> {
    let recorder = Recorder::new(basis, observables)?;
    let mut record = TrajectoryRecord::with_names(recorder.names());
    let want_eig = observables.iter().any(|o| matches!(o, FullObservable::MinEigenvalue));
    let mut x = g.pack(rho0.as_matrix());
    let mut ws = Rk4Workspace::default();
    let mut row = Vec::new();
    let steps = grid.steps();
    for step in 0..=steps {
        if step > 0 {
            rk4_advance(&g, &mut x, grid.dt, &mut ws);
        }
        if step % grid.record_stride == 0 || step == steps {
            let t = grid.time(step);
            let rho = g.unpack(&x);
            let trace_dev = (rho.diagonal().iter().map(|v| v.re).sum::<f64>() - 1.0).abs();
            let min_eig = if want_eig { min_eigenvalue(&rho) } else { f64::NAN };
            record.max_trace_deviation = record.max_trace_deviation.max(trace_dev);
            if want_eig {
                record.min_eigenvalue = record.min_eigenvalue.min(min_eig);
            }
            if !(trace_dev <= TRACE_ABORT) || min_eig < NEGATIVITY_ABORT {
                return Err(Error::Physicality { t, trace_dev, min_eig });
            }
            recorder.evaluate(&rho, min_eig, &mut row)?;
            record.push_row(t, &row);
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::cg_irrep_basis;
    use crate::state::{cat_state, ket_to_density};

    fn rand_density(dim: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(dim, dim, |_, _| C64::new(next(), next()));
        let r = &a * a.adjoint();
        let tr = r.trace();
        r / tr
    }

    #[test]
    fn support_generator_matches_dense_superoperator() {
        let n = 3;
        let h = crate::oracle::counter_twisting_full(n, 0.4).unwrap();
        let s = LocalOperatorCoeffs::new(ZERO, C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.5, 0.0));
        let ch = [
            FullChannel::from_spec(n, &ChannelSpec::local(s, 0.7).unwrap()).unwrap(),
            FullChannel::from_spec(n, &ChannelSpec::collective(LocalOperatorCoeffs::sigma_minus(), 0.2).unwrap())
                .unwrap(),
        ];
        let model = FullModel::new(n, Some(&h), &ch).unwrap();
        let rho = rand_density(8, 3);
        let g = SupportGenerator::<C64>::new(&model, &rho, false);
        assert_eq!(g.len(), 64);
        let mut out = vec![ZERO; 64];
        g.apply(&g.pack(&rho), &mut out);
        let diff = (g.unpack(&out) - model.apply_dense(&rho)).camax();
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn real_path_matches_complex_path() {
        let n = 3;
        let ch = [FullChannel::from_spec(
            n,
            &ChannelSpec::local(LocalOperatorCoeffs::real(0.0, 1.0, 0.0, 1.0), 1.0).unwrap(),
        )
        .unwrap()];
        let model = FullModel::new(n, None, &ch).unwrap();
        let rho = rand_density(8, 5).map(|v| C64::new(v.re, 0.0));
        let rho = (&rho + rho.transpose()) * C64::new(0.5, 0.0);
        let gr = SupportGenerator::<f64>::new(&model, &rho, true);
        let gc = SupportGenerator::<C64>::new(&model, &rho, false);
        assert_eq!(gr.len(), 36);
        let mut xr = gr.pack(&rho);
        let mut xc = gc.pack(&rho);
        rk4_advance(&gr, &mut xr, 0.01, &mut Rk4Workspace::default());
        rk4_advance(&gc, &mut xc, 0.01, &mut Rk4Workspace::default());
        assert!((gr.unpack(&xr) - gc.unpack(&xc)).camax() < 1e-15);
    }

    #[test]
    fn dephasing_support_stays_small() {
        let n = 6;
        let basis = cg_irrep_basis(n).unwrap();
        let cat = cat_state(basis.spec());
        let rho0 = FullState::from_density(n, basis.embed_density(&ket_to_density(&cat)).unwrap()).unwrap();
        let ch = [FullChannel::from_spec(n, &ChannelSpec::local(LocalOperatorCoeffs::spin_z(), 1.0).unwrap())
            .unwrap()];
        let model = FullModel::new(n, None, &ch).unwrap();
        let g = SupportGenerator::<f64>::new(&model, rho0.as_matrix(), true);
        assert_eq!(g.len(), 3);
        let grid = TimeGrid::new(0.0, 0.5, 1e-3, 100).unwrap();
        let proj = basis.collective_projector(&cat).unwrap();
        let obs = [FullObservable::Fidelity { name: "fidelity".into(), projector: proj }, FullObservable::Trace];
        let rec = evolve_full(&basis, &rho0, &model, &grid, &obs).unwrap();
        for (t, f) in rec.times.iter().zip(rec.column("fidelity").unwrap()) {
            assert!((f - (0.5 + 0.5 * (-(n as f64) * t / 2.0).exp())).abs() < 1e-9);
        }
    }
}
