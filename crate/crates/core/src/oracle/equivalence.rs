use super::basis::cg_irrep_basis;
use super::dynamics::{evolve_full, FullChannel, FullModel, FullObservable};
use super::{counter_twisting_full, FullState};
use crate::error::{Error, Result};
use crate::integrator::{evolve_with, Observable, TimeGrid, TrajectoryRecord};
use crate::liouvillian::{ChannelSpec, Liouvillian};
use crate::operators::counter_twisting_hamiltonian;
use crate::state::{ket_to_density, BlockedKet};

/// One collective-versus-full comparison run.
#[derive(Clone, Debug)]
pub struct EquivalenceCase {
    pub initial: BlockedKet,
    /// Counter-twisting strength, if any.
    pub lambda: Option<f64>,
    pub channels: Vec<ChannelSpec>,
    pub grid: TimeGrid,
}

/// Largest discrepancies between the two representations over all recorded times.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub n: u32,
    pub fidelity: f64,
    pub spin: f64,
    pub populations: f64,
    /// Largest distance of the full trajectory from the collective manifold.
    pub residual: f64,
}

impl EquivalenceReport {
    /// Worst observable discrepancy.
    pub fn max_difference(&self) -> f64 {
        self.fidelity.max(self.spin).max(self.populations)
    }
}

fn max_column_diff(a: &TrajectoryRecord, b: &TrajectoryRecord, pick: impl Fn(&str) -> bool) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (name, va) in a.columns.iter().filter(|(n, _)| pick(n)) {
        let vb = b.column(name).ok_or_else(|| Error::InvalidGrid(format!("missing column {name}")))?;
        for (x, y) in va.iter().zip(vb) {
            let d = (x - y).abs();
            worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        }
    }
    Ok(worst)
}

/// Evolve `case` in both representations and compare observables.
pub fn oracle_equivalence(case: &EquivalenceCase) -> Result<EquivalenceReport> {
    oracle_equivalence_with(case, |_| {})
}

/// As [`oracle_equivalence`], with a hook to modify the collective generator first.
pub fn oracle_equivalence_with(
    case: &EquivalenceCase,
    modify: impl FnOnce(&mut Liouvillian),
) -> Result<EquivalenceReport> {
    let spec = *case.initial.spec();
    let n = spec.n();
    let basis = cg_irrep_basis(n)?;

    let h = case.lambda.map(|l| counter_twisting_hamiltonian(&spec, l));
    let mut liouvillian = Liouvillian::new(&spec, h.as_ref(), &case.channels)?;
    modify(&mut liouvillian);
    let rho0 = ket_to_density(&case.initial);
    let reduced_obs = [
        Observable::fidelity(case.initial.clone()),
        Observable::Jx,
        Observable::Jy,
        Observable::Jz,
        Observable::Populations,
    ];
    let reduced = evolve_with(&rho0, &mut liouvillian, &case.grid, &reduced_obs, None)?;

    let h_full = case.lambda.map(|l| counter_twisting_full(n, l)).transpose()?;
    let channels =
        case.channels.iter().map(|c| FullChannel::from_spec(n, c)).collect::<Result<Vec<_>>>()?;
    let model = FullModel::new(n, h_full.as_ref(), &channels)?;
    let full0 = FullState::from_density(n, basis.embed_density(&rho0)?)?;
    let full_obs = [
        FullObservable::Fidelity { name: "fidelity".into(), projector: basis.collective_projector(&case.initial)? },
        FullObservable::Jx,
        FullObservable::Jy,
        FullObservable::Jz,
        FullObservable::Populations,
        FullObservable::Residual,
    ];
    let full = evolve_full(&basis, &full0, &model, &case.grid, &full_obs)?;

    Ok(EquivalenceReport {
        n,
        fidelity: max_column_diff(&reduced, &full, |c| c == "fidelity")?,
        spin: max_column_diff(&reduced, &full, |c| c.starts_with('j'))?,
        populations: max_column_diff(&reduced, &full, |c| c.starts_with("N_"))?,
        residual: full.column("residual").unwrap().iter().cloned().fold(0.0, f64::max),
    })
}
