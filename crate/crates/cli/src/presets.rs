//! Ready-made figure runs.
//!
//! Cat presets default to `Γ = 1` over `Γt ∈ [0, 2]` at `N = 10` and
//! `N = 100`. The squeezing preset defaults to `N = 100`, `Λ = 1`,
//! `Γ ∈ {0.2, 1, 5}`, `t ≤ 0.03` and `dt = 1e-4`.

use std::thread;

use collective_core::integrator::{population_column, stiffness_estimate, Observable, TrajectoryRecord, STEP_WARNING};
use collective_core::scenarios::{cat_fidelity, cat_leakage, squeeze, Scenario, Schedule};
use collective_core::state::cat_state;
use collective_core::EnsembleSpec;
use log::{info, warn};

use crate::table::Table;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PresetName {
    CatFidelity,
    CatLeakage,
    Squeeze,
}

/// Command-line overrides; `None` keeps the preset default.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PresetOptions {
    pub n: Option<u32>,
    pub gamma: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
}

const CAT_NS: [u32; 2] = [10, 100];
const CAT_HORIZON: f64 = 2.0;
const CAT_RECORDS: f64 = 200.0;
const SQUEEZE_N: u32 = 100;
const SQUEEZE_LAMBDA: f64 = 1.0;
const SQUEEZE_GAMMAS: [f64; 3] = [0.2, 1.0, 5.0];
const SQUEEZE_T_MAX: f64 = 0.03;
const SQUEEZE_DT: f64 = 1e-4;
const SQUEEZE_RECORDS: f64 = 60.0;

/// Output files (name, contents) of one preset.
pub fn run_preset(name: PresetName, opts: &PresetOptions) -> Result<Vec<(String, Table)>, CliError> {
    let gamma = opts.gamma.unwrap_or(1.0);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CliError::Usage(format!("--gamma must be positive, got {gamma}")));
    }
    match name {
        PresetName::CatFidelity | PresetName::CatLeakage => {
            let ns = opts.n.map_or(CAT_NS.to_vec(), |n| vec![n]);
            let t_max = opts.t_max.unwrap_or(CAT_HORIZON / gamma);
            let schedule = Schedule::new(t_max, t_max / CAT_RECORDS)?;
            let mut files = Vec::new();
            for n in ns {
                let spec = EnsembleSpec::new(n)?;
                let cat = cat_state(&spec);
                if name == PresetName::CatFidelity {
                    let runs = cat_fidelity(&spec, gamma)?;
                    let obs = [Observable::fidelity(cat), Observable::Trace];
                    let records = run_all(&runs, &schedule, opts.dt, &obs)?;
                    let mut t = Table::new(schedule_times(&schedule, &records[0]));
                    for (s, r) in runs.iter().zip(&records) {
                        t.push(s.label.clone(), r.column("fidelity").unwrap().to_vec());
                    }
                    push_traces(&mut t, &runs, &records);
                    files.push((format!("cat_fidelity_n{n}.csv"), t));
                } else {
                    let runs = [cat_leakage(&spec, gamma)?];
                    let records = run_all(&runs, &schedule, opts.dt, &[Observable::Populations, Observable::Trace])?;
                    let r = &records[0];
                    let mut t = Table::new(schedule_times(&schedule, r));
                    for j in spec.j_range().into_iter().rev() {
                        let col = population_column(j);
                        t.push(col.clone(), r.column(&col).unwrap().to_vec());
                    }
                    t.push("trace", r.column("trace").unwrap().to_vec());
                    files.push((format!("cat_leakage_n{n}.csv"), t));
                }
            }
            Ok(files)
        }
        PresetName::Squeeze => {
            let n = opts.n.unwrap_or(SQUEEZE_N);
            let spec = EnsembleSpec::new(n)?;
            let gammas = opts.gamma.map_or(SQUEEZE_GAMMAS.to_vec(), |g| vec![g]);
            let t_max = opts.t_max.unwrap_or(SQUEEZE_T_MAX);
            let schedule = Schedule::new(t_max, t_max / SQUEEZE_RECORDS)?;
            let runs = squeeze(&spec, SQUEEZE_LAMBDA, &gammas)?;
            let dt = Some(opts.dt.unwrap_or(SQUEEZE_DT));
            let records = run_all(&runs, &schedule, dt, &[Observable::Squeezing, Observable::Trace])?;
            let mut t = Table::new(schedule_times(&schedule, &records[0]));
            for (s, r) in runs.iter().zip(&records) {
                t.push(s.label.clone(), r.column("xi2").unwrap().to_vec());
            }
            push_traces(&mut t, &runs, &records);
            Ok(vec![(format!("squeeze_n{n}.csv"), t)])
        }
    }
}

fn push_traces(t: &mut Table, runs: &[Scenario], records: &[TrajectoryRecord]) {
    for (s, r) in runs.iter().zip(records) {
        t.push(format!("trace_{}", s.label), r.column("trace").unwrap().to_vec());
    }
}

/// Record times as exact multiples of the record interval.
fn schedule_times(schedule: &Schedule, record: &TrajectoryRecord) -> Vec<f64> {
    (0..record.times.len()).map(|k| k as f64 * schedule.record_interval).collect()
}

/// Run independent scenarios on separate threads; results keep input order.
fn run_all(
    runs: &[Scenario],
    schedule: &Schedule,
    dt: Option<f64>,
    observables: &[Observable],
) -> Result<Vec<TrajectoryRecord>, CliError> {
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|s| {
                scope.spawn(move || {
                    let grid = schedule.grid(dt.unwrap_or_else(|| s.default_dt()))?;
                    warn_if_stiff(s, grid.dt);
                    info!("{} (N = {}): {} steps of {:e}", s.label, s.spec().n(), grid.steps(), grid.dt);
                    s.run(&grid, observables)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("preset worker panicked")).collect()
    });
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

pub(crate) fn warn_if_stiff(s: &Scenario, dt: f64) {
    let stiffness = stiffness_estimate(s.spec(), s.hamiltonian().as_ref(), &s.channels);
    if dt * stiffness > STEP_WARNING {
        warn!("{}: dt·stiffness = {:.3} exceeds {STEP_WARNING}; RK4 may be inaccurate", s.label, dt * stiffness);
    }
}
