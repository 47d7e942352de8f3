//! Fixed-step RK4 time evolution with observable recording.
//!
//! The stepper works on any [`Generator`], so the collective simulator and the
//! full-space oracle advance with bit-for-bit the same scheme.

use log::warn;

use crate::error::{Error, Result};
use crate::irrep::JLabel;
use crate::liouvillian::{ChannelKind, ChannelSpec, Generator, Liouvillian, Scalar};
use crate::operators::{collective_op, symmetric_sum_collective, BlockOperator, CollectiveOp, C64};
use crate::state::{squeezing_from_parts, trace_product, BlockedDensity, BlockedKet};

/// Trace drift that aborts an evolution.
pub const TRACE_ABORT: f64 = 1e-6;
/// Negativity that aborts an evolution.
pub const NEGATIVITY_ABORT: f64 = -1e-6;

const TRUNCATION_MARGIN: usize = 4;

/// Uniform time grid; `t1` is rounded to the nearest multiple of `dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub record_stride: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64, record_stride: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::InvalidGrid(format!("need t1 > t0, got t0 = {t0}, t1 = {t1}")));
        }
        if !(dt > 0.0 && dt <= t1 - t0) {
            return Err(Error::InvalidGrid(format!("need 0 < dt <= t1 - t0, got dt = {dt}")));
        }
        if record_stride == 0 {
            return Err(Error::InvalidGrid("record_stride must be positive".into()));
        }
        Ok(Self { t0, t1, dt, record_stride })
    }

    pub fn steps(&self) -> usize {
        (((self.t1 - self.t0) / self.dt).round() as usize).max(1)
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    fn records(&self, step: usize) -> bool {
        step % self.record_stride == 0 || step == self.steps()
    }
}

/// Scratch buffers for [`rk4_advance`].
#[derive(Clone, Debug, Default)]
pub struct Rk4Workspace<T = C64> {
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4Workspace<T> {
    fn ensure(&mut self, len: usize) {
        for v in self.k.iter_mut().chain(std::iter::once(&mut self.tmp)) {
            if v.len() != len {
                v.clear();
                v.resize(len, T::default());
            }
        }
    }
}

/// One classical RK4 step of `dx/dt = L x`, followed by the generator's
/// post-step projection.
pub fn rk4_advance<G: Generator + ?Sized>(
    g: &G,
    x: &mut [G::Scalar],
    dt: f64,
    ws: &mut Rk4Workspace<G::Scalar>,
) {
    let n = g.len();
    debug_assert_eq!(x.len(), n);
    ws.ensure(n);
    let Rk4Workspace { k, tmp } = ws;
    let [k1, k2, k3, k4] = k;

    g.apply(x, k1);
    for i in 0..n {
        tmp[i] = x[i] + k1[i] * (0.5 * dt);
    }
    g.apply(tmp, k2);
    for i in 0..n {
        tmp[i] = x[i] + k2[i] * (0.5 * dt);
    }
    g.apply(tmp, k3);
    for i in 0..n {
        tmp[i] = x[i] + k3[i] * dt;
    }
    g.apply(tmp, k4);
    let c = dt / 6.0;
    for i in 0..n {
        x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * c;
    }
    g.post_step(x);
}

/// One RK4 step of a collective density under `rhs`, re-Hermitized.
pub fn rk4_step<F>(rho: &BlockedDensity, rhs: F, dt: f64) -> Result<BlockedDensity>
where
    F: Fn(&BlockOperator) -> Result<BlockOperator>,
{
    let x = rho.as_operator();
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = rhs(x)?;
    let k2 = rhs(&x.add(&k1.scale(half))?)?;
    let k3 = rhs(&x.add(&k2.scale(half))?)?;
    let k4 = rhs(&x.add(&k3.scale(C64::new(dt, 0.0)))?)?;
    let incr = k1.add(&k2.scale(C64::new(2.0, 0.0)))?.add(&k3.scale(C64::new(2.0, 0.0)))?.add(&k4)?;
    let mut out = x.add(&incr.scale(C64::new(dt / 6.0, 0.0)))?;
    out.hermitize();
    Ok(BlockedDensity::from_operator_unchecked(out))
}

/// Quantities recorded along a collective trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// `⟨ψ|ρ|ψ⟩` against a reference ket, in column `name`.
    Fidelity { name: String, reference: BlockedKet },
    Jx,
    Jy,
    Jz,
    /// `ξ²`; `+inf` where `⟨J_z⟩` vanishes.
    Squeezing,
    /// One column `N_<J>` per block.
    Populations,
    Trace,
    MinEigenvalue,
}

impl Observable {
    pub fn fidelity(reference: BlockedKet) -> Self {
        Self::Fidelity { name: "fidelity".into(), reference }
    }
}

/// Column name of the population of block `j`.
pub fn population_column(j: JLabel) -> String {
    format!("N_{j}")
}

/// Recorded observables, one column per name, sharing `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    /// Largest `|tr ρ + dropped - 1|` seen at a recorded time.
    pub max_trace_deviation: f64,
    /// Smallest block eigenvalue seen at a recorded time.
    pub min_eigenvalue: f64,
    /// Population removed by truncation at the final time.
    pub dropped_weight: f64,
}

impl TrajectoryRecord {
    pub(crate) fn with_names(names: Vec<String>) -> Self {
        Self {
            times: Vec::new(),
            columns: names.into_iter().map(|n| (n, Vec::new())).collect(),
            max_trace_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
            dropped_weight: 0.0,
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub(crate) fn push_row(&mut self, t: f64, values: &[f64]) {
        self.times.push(t);
        for ((_, col), v) in self.columns.iter_mut().zip(values) {
            col.push(*v);
        }
    }
}

/// Adaptive truncation of low-`J` blocks.
///
/// Only blocks from the lowest active one upward evolve. The active range
/// always extends four blocks (one per RK4 stage) below the lowest block
/// holding more than `threshold`, so dropped inflow passes through nearly
/// empty blocks. Block-diagonal generators need no margin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub threshold: f64,
}

struct ReducedObservers {
    observables: Vec<Observable>,
    jx: BlockOperator,
    jy: BlockOperator,
    jy2: BlockOperator,
    jz: BlockOperator,
}

impl ReducedObservers {
    fn new(spec: &crate::EnsembleSpec, observables: &[Observable]) -> Self {
        let jy = collective_op(spec, CollectiveOp::Jy);
        Self {
            observables: observables.to_vec(),
            jx: collective_op(spec, CollectiveOp::Jx),
            jy2: jy.mul(&jy).unwrap(),
            jy,
            jz: collective_op(spec, CollectiveOp::Jz),
        }
    }

    fn names(&self, spec: &crate::EnsembleSpec) -> Vec<String> {
        let mut names = Vec::new();
        for o in &self.observables {
            match o {
                Observable::Fidelity { name, .. } => names.push(name.clone()),
                Observable::Jx => names.push("jx".into()),
                Observable::Jy => names.push("jy".into()),
                Observable::Jz => names.push("jz".into()),
                Observable::Squeezing => names.push("xi2".into()),
                Observable::Populations => names.extend(spec.j_range().into_iter().map(population_column)),
                Observable::Trace => names.push("trace".into()),
                Observable::MinEigenvalue => names.push("min_eig".into()),
            }
        }
        names
    }

    fn evaluate(&self, rho: &BlockedDensity, min_eig: f64, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let op = rho.as_operator();
        for o in &self.observables {
            match o {
                Observable::Fidelity { reference, .. } => out.push(rho.fidelity(reference)?),
                Observable::Jx => out.push(trace_product(op, &self.jx).re),
                Observable::Jy => out.push(trace_product(op, &self.jy).re),
                Observable::Jz => out.push(trace_product(op, &self.jz).re),
                Observable::Squeezing => {
                    let my = trace_product(op, &self.jy).re;
                    let var = trace_product(op, &self.jy2).re - my * my;
                    let mz = trace_product(op, &self.jz).re;
                    out.push(squeezing_from_parts(rho.spec().n(), var, mz).unwrap_or(f64::INFINITY));
                }
                Observable::Populations => out.extend(rho.irrep_populations().into_values()),
                Observable::Trace => out.push(rho.trace()),
                Observable::MinEigenvalue => out.push(min_eig),
            }
        }
        Ok(())
    }
}

/// Upper bound on `‖H‖` from block row sums.
fn row_sum_norm(op: &BlockOperator) -> f64 {
    let mut best: f64 = 0.0;
    for b in 0..op.num_blocks() {
        let blk = op.block(b);
        for r in 0..blk.nrows() {
            best = best.max(blk.row(r).iter().map(|v| v.norm()).sum());
        }
    }
    best
}

/// Largest `dt·stiffness` evolved without a warning.
pub const STEP_WARNING: f64 = 0.1;

/// Rough bound on the generator's spectral radius: `‖H‖` plus, per channel,
/// `Γ N ‖s‖²` (local) or `Γ ‖S‖²` (collective), with row-sum norms.
pub fn stiffness_estimate(
    spec: &crate::EnsembleSpec,
    hamiltonian: Option<&BlockOperator>,
    channels: &[ChannelSpec],
) -> f64 {
    let mut total = hamiltonian.map(row_sum_norm).unwrap_or(0.0);
    for ch in channels {
        let c = ch.coeffs();
        total += ch.rate()
            * match ch.kind() {
                ChannelKind::Local => {
                    let m = c.to_matrix();
                    let norm = (0..2).map(|r| m[r][0].norm() + m[r][1].norm()).fold(0.0, f64::max);
                    spec.n() as f64 * norm * norm
                }
                ChannelKind::Collective => row_sum_norm(&symmetric_sum_collective(spec, c)).powi(2),
            };
    }
    total
}

/// Evolve a collective density under `-i[H, ρ] + Σ Γ D(ρ)` with fixed-step RK4.
pub fn evolve(
    rho0: &BlockedDensity,
    hamiltonian: Option<&BlockOperator>,
    channels: &[ChannelSpec],
    grid: &TimeGrid,
    observables: &[Observable],
) -> Result<TrajectoryRecord> {
    let mut liouvillian = Liouvillian::new(rho0.spec(), hamiltonian, channels)?;
    let stiffness = stiffness_estimate(rho0.spec(), hamiltonian, channels);
    if grid.dt * stiffness > STEP_WARNING {
        warn!("dt·stiffness = {:.3} exceeds {STEP_WARNING}; consider a smaller step", grid.dt * stiffness);
    }
    evolve_with(rho0, &mut liouvillian, grid, observables, None)
}

/// Evolve with a precompiled generator and optional truncation.
pub fn evolve_with(
    rho0: &BlockedDensity,
    liouvillian: &mut Liouvillian,
    grid: &TimeGrid,
    observables: &[Observable],
    truncation: Option<Truncation>,
) -> Result<TrajectoryRecord> {
    let spec = *rho0.spec();
    rho0.as_operator().check_spec(liouvillian.spec())?;
    let observers = ReducedObservers::new(&spec, observables);
    let mut names = observers.names(&spec);
    if truncation.is_some() {
        names.push("dropped".into());
    }
    let mut record = TrajectoryRecord::with_names(names);
    let mut x = liouvillian.pack(rho0.as_operator());
    let mut ws = Rk4Workspace::default();
    let mut row = Vec::new();
    let n = liouvillian.density_len();

    // Without local channels no population moves between blocks.
    let margin = if liouvillian.scatter_len() == 0 { 0 } else { TRUNCATION_MARGIN };
    if let Some(tr) = truncation {
        let pops = rho0.irrep_populations();
        let lowest = pops.values().position(|p| *p > tr.threshold).unwrap_or(spec.num_blocks() - 1);
        liouvillian.set_active_from(lowest.saturating_sub(margin));
        liouvillian.drop_inactive(&mut x);
    } else {
        liouvillian.set_active_from(0);
    }

    for step in 0..=grid.steps() {
        if step > 0 {
            rk4_advance(liouvillian, &mut x, grid.dt, &mut ws);
        }
        if let Some(tr) = truncation {
            let from = liouvillian.active_from();
            let lowest = (from..spec.num_blocks())
                .find(|&b| liouvillian.block_trace(&x, b) > tr.threshold)
                .unwrap_or(from);
            liouvillian.set_active_from(from.min(lowest.saturating_sub(margin)));
        }
        if grid.records(step) {
            let t = grid.time(step);
            let (op, dropped) = liouvillian.unpack(&x);
            let rho = BlockedDensity::from_operator_unchecked(op);
            let min_eig = rho.min_eigenvalue();
            let trace_dev = (rho.trace() + dropped - 1.0).abs();
            record.max_trace_deviation = record.max_trace_deviation.max(trace_dev);
            record.min_eigenvalue = record.min_eigenvalue.min(min_eig);
            record.dropped_weight = dropped;
            if trace_dev > TRACE_ABORT || min_eig < NEGATIVITY_ABORT || !trace_dev.is_finite() {
                return Err(Error::Physicality { t, trace_dev, min_eig });
            }
            observers.evaluate(&rho, min_eig, &mut row)?;
            if truncation.is_some() {
                row.push(dropped);
            }
            record.push_row(t, &row);
        }
    }
    debug_assert!(x.len() == n + 1);
    Ok(record)
}

/// Column names produced by [`evolve_with`] for the given observables.
pub fn record_names(spec: &crate::EnsembleSpec, observables: &[Observable], truncated: bool) -> Vec<String> {
    let mut names = ReducedObservers::new(spec, observables).names(spec);
    if truncated {
        names.push("dropped".into());
    }
    names
}

/// Result of a step-halving study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// Largest difference between the `dt` and `dt/2` runs over all common columns and times.
    pub max_difference: f64,
    /// Richardson estimate of the `dt/2` run's error, `max_difference / 15`.
    pub richardson_error: f64,
}

/// Compare two trajectories recorded on the same times.
pub fn max_record_difference(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    let mut worst: f64 = 0.0;
    for (name, va) in &a.columns {
        if let Some(vb) = b.column(name) {
            for (x, y) in va.iter().zip(vb) {
                if x.is_finite() && y.is_finite() {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    worst
}

/// Evolve with `dt` and `dt/2` (recording at the same physical times) and compare.
pub fn convergence_check(
    rho0: &BlockedDensity,
    hamiltonian: Option<&BlockOperator>,
    channels: &[ChannelSpec],
    grid: &TimeGrid,
    observables: &[Observable],
) -> Result<ConvergenceReport> {
    let coarse = evolve(rho0, hamiltonian, channels, grid, observables)?;
    let fine_grid = TimeGrid { dt: grid.dt / 2.0, record_stride: grid.record_stride * 2, ..*grid };
    let fine = evolve(rho0, hamiltonian, channels, &fine_grid, observables)?;
    let max_difference = max_record_difference(&coarse, &fine);
    Ok(ConvergenceReport { max_difference, richardson_error: max_difference / 15.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irrep::EnsembleSpec;
    use crate::liouvillian::liouvillian_apply;
    use crate::operators::{counter_twisting_hamiltonian, LocalOperatorCoeffs, ONE};
    use crate::state::{cat_state, coherent_pole_state, ket_to_density};

    fn spec(n: u32) -> EnsembleSpec {
        EnsembleSpec::new(n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0.1, 1).is_ok());
        assert!(TimeGrid::new(1.0, 1.0, 0.1, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 2.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.1, 0).is_err());
        assert_eq!(TimeGrid::new(0.0, 1.0, 0.1, 3).unwrap().steps(), 10);
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let rho = ket_to_density(&cat_state(&spec(4)));
        let zero = |x: &BlockOperator| Ok(BlockOperator::zeros(x.spec()));
        let out = rk4_step(&rho, zero, 0.1).unwrap();
        assert!(out.as_operator().max_abs_diff(rho.as_operator()).unwrap() < 1e-15);
    }

    #[test]
    fn pure_jz_rotation_matches_exact_phase() {
        let s = spec(2);
        let rho = ket_to_density(&cat_state(&s));
        let h = collective_op(&s, CollectiveOp::Jz);
        let dt = 1e-3;
        let rhs = |x: &BlockOperator| liouvillian_apply(x, Some(&h), &[]);
        let out = rk4_step(&rho, rhs, dt).unwrap();
        // ρ_{1,-1}(dt) = ρ_{1,-1} e^{-i ΔM dt}, ΔM = 2
        let expect = rho.as_operator().get(1, 0, 2) * C64::new(0.0, -2.0 * dt).exp();
        assert!((out.as_operator().get(1, 0, 2) - expect).norm() < 1e-10);
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        let s = spec(2);
        let rho = ket_to_density(&cat_state(&s));
        let h = collective_op(&s, CollectiveOp::Jz);
        let rhs = |x: &BlockOperator| liouvillian_apply(x, Some(&h), &[]);
        let err = |dt: f64| {
            let out = rk4_step(&rho, rhs, dt).unwrap();
            let expect = rho.as_operator().get(1, 0, 2) * C64::new(0.0, -2.0 * dt).exp();
            (out.as_operator().get(1, 0, 2) - expect).norm()
        };
        // Single-step error is O(dt^5); the ratio on halving sits near 32 (at least 16).
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 16.0 && ratio < 40.0, "ratio {ratio}");
    }

    #[test]
    fn generic_stepper_matches_block_stepper() {
        let s = spec(5);
        let h = counter_twisting_hamiltonian(&s, 0.3);
        let ch = [ChannelSpec::local(LocalOperatorCoeffs::sigma_minus(), 0.5).unwrap()];
        let rho = ket_to_density(&coherent_pole_state(&s));
        let a = rk4_step(&rho, |x| liouvillian_apply(x, Some(&h), &ch), 1e-2).unwrap();
        let l = Liouvillian::new(&s, Some(&h), &ch).unwrap();
        let mut x = l.pack(rho.as_operator());
        rk4_advance(&l, &mut x, 1e-2, &mut Rk4Workspace::default());
        let (b, _) = l.unpack(&x);
        assert!(a.as_operator().max_abs_diff(&b).unwrap() < 1e-13);
    }

    #[test]
    fn initial_jz_slope_matches_finite_difference() {
        let s = spec(6);
        let h = counter_twisting_hamiltonian(&s, 1.0);
        let rho = ket_to_density(&coherent_pole_state(&s));
        let rhs = liouvillian_apply(rho.as_operator(), Some(&h), &[]).unwrap();
        let jz = collective_op(&s, CollectiveOp::Jz);
        let slope = trace_product(&rhs, &jz).re;
        let fd_error = |dt: f64| {
            let grid = TimeGrid::new(0.0, dt, dt, 1).unwrap();
            let rec = evolve(&rho, Some(&h), &[], &grid, &[Observable::Jz]).unwrap();
            let jzc = rec.column("jz").unwrap();
            (jzc[1] - jzc[0]) / dt - slope
        };
        // The forward difference is first-order accurate.
        let ratio = fd_error(1e-3) / fd_error(5e-4);
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn unitary_counter_twisting_conserves_trace_and_block() {
        let s = spec(10);
        let h = counter_twisting_hamiltonian(&s, 1.0);
        let rho = ket_to_density(&coherent_pole_state(&s));
        let grid = TimeGrid::new(0.0, 0.5, 1e-3, 50).unwrap();
        let rec =
            evolve(&rho, Some(&h), &[], &grid, &[Observable::Trace, Observable::Populations]).unwrap();
        for (t, n5) in rec.column("trace").unwrap().iter().zip(rec.column("N_5").unwrap()) {
            assert!((t - 1.0).abs() < 1e-9);
            assert!((n5 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cat_dephasing_trajectories() {
        for (n, kind_collective, rate) in [(10u32, true, 50.0), (10, false, 5.0)] {
            let s = spec(n);
            let ch = if kind_collective {
                ChannelSpec::collective(LocalOperatorCoeffs::spin_z(), 1.0).unwrap()
            } else {
                ChannelSpec::local(LocalOperatorCoeffs::spin_z(), 1.0).unwrap()
            };
            let cat = cat_state(&s);
            let grid = TimeGrid::new(0.0, 0.1, 1e-4, 100).unwrap();
            let rec = evolve(&ket_to_density(&cat), None, &[ch], &grid, &[Observable::fidelity(cat)]).unwrap();
            for (t, f) in rec.times.iter().zip(rec.column("fidelity").unwrap()) {
                let expect = 0.5 + 0.5 * (-rate * t).exp();
                assert!((f - expect).abs() < 1e-6, "t={t}: {f} vs {expect}");
            }
        }
    }

    #[test]
    fn physicality_abort_on_unstable_step() {
        let s = spec(10);
        let ch = [ChannelSpec::collective(LocalOperatorCoeffs::spin_z(), 1.0).unwrap()];
        let cat = cat_state(&s);
        // dt·50 = 5 is outside the RK4 stability region.
        let grid = TimeGrid::new(0.0, 4.0, 0.1, 1).unwrap();
        let err = evolve(&ket_to_density(&cat), None, &ch, &grid, &[Observable::Trace]);
        assert!(matches!(err, Err(Error::Physicality { .. })), "{err:?}");
    }

    #[test]
    fn evolution_is_deterministic() {
        let s = spec(8);
        let h = counter_twisting_hamiltonian(&s, 1.0);
        let ch = [ChannelSpec::local(LocalOperatorCoeffs::sigma_minus(), 0.5).unwrap()];
        let rho = ket_to_density(&coherent_pole_state(&s));
        let grid = TimeGrid::new(0.0, 0.2, 1e-3, 10).unwrap();
        let obs = [Observable::Squeezing, Observable::Populations, Observable::MinEigenvalue];
        let a = evolve(&rho, Some(&h), &ch, &grid, &obs).unwrap();
        let b = evolve(&rho, Some(&h), &ch, &grid, &obs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_tracks_dropped_weight() {
        let s = spec(12);
        let ch = [ChannelSpec::local(LocalOperatorCoeffs::sigma_minus(), 1.0).unwrap()];
        let rho = ket_to_density(&cat_state(&s));
        let grid = TimeGrid::new(0.0, 0.5, 1e-3, 50).unwrap();
        let obs = [Observable::Trace, Observable::Populations];
        let full = evolve(&rho, None, &ch, &grid, &obs).unwrap();
        let mut l = Liouvillian::new(&s, None, &ch).unwrap();
        let trunc = evolve_with(&rho, &mut l, &grid, &obs, Some(Truncation { threshold: 1e-3 })).unwrap();
        let dropped = trunc.column("dropped").unwrap();
        let trace = trunc.column("trace").unwrap();
        for (d, t) in dropped.iter().zip(trace) {
            assert!((d + t - 1.0).abs() < 1e-9);
            assert!(*d >= -1e-15);
        }
        assert!(trunc.dropped_weight > 0.0);
        // Top-block population error is bounded by the dropped weight.
        let top = population_column(s.j_max());
        for ((a, b), d) in full.column(&top).unwrap().iter().zip(trunc.column(&top).unwrap()).zip(dropped) {
            assert!((a - b).abs() <= d + 1e-12);
        }
        let _ = ONE;
    }

    #[test]
    fn convergence_utility() {
        let s = spec(4);
        let cat = cat_state(&s);
        let ch = [ChannelSpec::collective(LocalOperatorCoeffs::spin_z(), 1.0).unwrap()];
        let grid = TimeGrid::new(0.0, 1.0, 1e-3, 100).unwrap();
        let rep = convergence_check(&ket_to_density(&cat), None, &ch, &grid, &[Observable::fidelity(cat)]).unwrap();
        assert!(rep.max_difference < 1e-9);
        assert!(rep.richardson_error <= rep.max_difference);
    }
}
