//! Ready-made experiments: cat-state decoherence and two-axis squeezing.

use crate::error::{Error, Result};
use crate::integrator::{evolve_with, stiffness_estimate, Observable, TimeGrid, TrajectoryRecord, Truncation};
use crate::irrep::EnsembleSpec;
use crate::liouvillian::{ChannelSpec, Liouvillian};
use crate::operators::{counter_twisting_hamiltonian, BlockOperator, LocalOperatorCoeffs};
use crate::state::{cat_state, coherent_pole_state, ket_to_density, BlockedKet};

/// Block-activation threshold used by the cat presets.
pub const PRESET_TRUNCATION: f64 = 1e-12;

/// Largest default step.
pub const MAX_DEFAULT_DT: f64 = 1e-3;

/// One evolution: initial ket, optional counter-twisting, channels.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub label: String,
    pub initial: BlockedKet,
    pub lambda: Option<f64>,
    pub channels: Vec<ChannelSpec>,
    pub truncation: Option<Truncation>,
}

/// Record times shared by several runs: `0, Δ, 2Δ, …, t_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub t_max: f64,
    pub record_interval: f64,
}

impl Schedule {
    pub fn new(t_max: f64, record_interval: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite() && record_interval > 0.0 && record_interval <= t_max) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < record interval <= t_max, got {record_interval} and {t_max}"
            )));
        }
        Ok(Self { t_max, record_interval })
    }

    /// Grid with the largest step `<= dt_max` that divides the record interval.
    pub fn grid(&self, dt_max: f64) -> Result<TimeGrid> {
        if !(dt_max > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt_max}")));
        }
        let stride = ((self.record_interval / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = self.record_interval / stride as f64;
        let records = (self.t_max / self.record_interval).round().max(1.0);
        TimeGrid::new(0.0, records * self.record_interval, dt, stride)
    }
}

impl Scenario {
    pub fn spec(&self) -> &EnsembleSpec {
        self.initial.spec()
    }

    pub fn hamiltonian(&self) -> Option<BlockOperator> {
        self.lambda.map(|l| counter_twisting_hamiltonian(self.spec(), l))
    }

    /// `min(1e-3, 0.1 / stiffness)`.
    pub fn default_dt(&self) -> f64 {
        let s = stiffness_estimate(self.spec(), self.hamiltonian().as_ref(), &self.channels);
        if s > 0.0 {
            MAX_DEFAULT_DT.min(0.1 / s)
        } else {
            MAX_DEFAULT_DT
        }
    }

    pub fn run(&self, grid: &TimeGrid, observables: &[Observable]) -> Result<TrajectoryRecord> {
        let h = self.hamiltonian();
        let mut l = Liouvillian::new(self.spec(), h.as_ref(), &self.channels)?;
        evolve_with(&ket_to_density(&self.initial), &mut l, grid, observables, self.truncation)
    }
}

fn channel(local: bool, coeffs: LocalOperatorCoeffs, gamma: f64) -> Result<ChannelSpec> {
    if local {
        ChannelSpec::local(coeffs, gamma)
    } else {
        ChannelSpec::collective(coeffs, gamma)
    }
}

/// Cat state under local `b_-`, collective `J_-`, local `b_z` and collective `J_z`.
pub fn cat_fidelity(spec: &EnsembleSpec, gamma: f64) -> Result<Vec<Scenario>> {
    let cat = cat_state(spec);
    let runs = [
        ("local_sigma_minus", true, LocalOperatorCoeffs::sigma_minus()),
        ("collective_j_minus", false, LocalOperatorCoeffs::sigma_minus()),
        ("local_spin_z", true, LocalOperatorCoeffs::spin_z()),
        ("collective_j_z", false, LocalOperatorCoeffs::spin_z()),
    ];
    runs.into_iter()
        .map(|(label, local, c)| {
            Ok(Scenario {
                label: label.into(),
                initial: cat.clone(),
                lambda: None,
                channels: vec![channel(local, c, gamma)?],
                truncation: Some(Truncation { threshold: PRESET_TRUNCATION }),
            })
        })
        .collect()
}

/// Cat state under local `b_-`, for irrep populations.
pub fn cat_leakage(spec: &EnsembleSpec, gamma: f64) -> Result<Scenario> {
    Ok(Scenario {
        label: "local_sigma_minus".into(),
        initial: cat_state(spec),
        lambda: None,
        channels: vec![ChannelSpec::local(LocalOperatorCoeffs::sigma_minus(), gamma)?],
        truncation: Some(Truncation { threshold: PRESET_TRUNCATION }),
    })
}

/// Column label for a rate.
pub fn rate_label(gamma: f64) -> String {
    format!("g{gamma}")
}

/// Counter-twisting from the pole state: free, then local `b_-` and collective
/// `J_-` for every rate.
pub fn squeeze(spec: &EnsembleSpec, lambda: f64, gammas: &[f64]) -> Result<Vec<Scenario>> {
    let pole = coherent_pole_state(spec);
    let base = |label: String, channels| Scenario {
        label,
        initial: pole.clone(),
        lambda: Some(lambda),
        channels,
        truncation: None,
    };
    let mut out = vec![base("free".into(), Vec::new())];
    for &g in gammas {
        out.push(base(
            format!("local_{}", rate_label(g)),
            vec![ChannelSpec::local(LocalOperatorCoeffs::sigma_minus(), g)?],
        ));
        out.push(base(
            format!("collective_{}", rate_label(g)),
            vec![ChannelSpec::collective(LocalOperatorCoeffs::sigma_minus(), g)?],
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_grids_align() {
        let s = Schedule::new(1.0, 0.05).unwrap();
        let g = s.grid(1e-3).unwrap();
        assert_eq!(g.record_stride, 50);
        assert_eq!(g.steps(), 1000);
        let g = s.grid(0.03).unwrap();
        assert_eq!(g.record_stride, 2);
        assert!((g.dt - 0.025).abs() < 1e-15);
        assert!(Schedule::new(1.0, 2.0).is_err());
    }

    #[test]
    fn preset_shapes() {
        let spec = EnsembleSpec::new(10).unwrap();
        assert_eq!(cat_fidelity(&spec, 1.0).unwrap().len(), 4);
        let sq = squeeze(&spec, 1.0, &[0.2, 1.0, 5.0]).unwrap();
        assert_eq!(sq.len(), 7);
        assert_eq!(sq[1].label, "local_g0.2");
        assert_eq!(cat_fidelity(&spec, 1.0).unwrap()[3].default_dt(), MAX_DEFAULT_DT);
        // ‖J_z‖² = 2500 at N = 100
        let big = cat_fidelity(&EnsembleSpec::new(100).unwrap(), 1.0).unwrap();
        assert!((big[3].default_dt() - 4e-5).abs() < 1e-15);
    }
}
