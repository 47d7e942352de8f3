//! Command-line front end for collective-state ensemble simulations.

pub mod config;
pub mod presets;
pub mod table;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use collective_core::irrep::{collective_density_len, collective_dim, dimension_checksum, dimension_table, Degeneracy};
use collective_core::validation::{
    analytic_dephasing, collective_preservation, combinatorics, integrator_convergence, oracle_equivalence_suite,
    perturbed_equivalence_suite, scatter_calibration, CheckOutcome,
};
use collective_core::EnsembleSpec;
use thiserror::Error;

use config::{ConfigError, ExperimentConfig};
use table::Table;

/// Largest `N` accepted by `dims`.
pub const DIMS_MAX_N: u32 = 10_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(collective_core::Error),

    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

impl From<collective_core::Error> for CliError {
    fn from(e: collective_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// 1 usage or configuration, 2 physicality abort, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(collective_core::Error::Physicality { .. }) => 2,
            CliError::Verification(_) => 3,
            _ => 1,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    ExperimentConfig::parse(&text).map_err(|source| CliError::Config { path: path.display().to_string(), source })
}

/// Evolve one configured experiment.
pub fn run_config(config: &ExperimentConfig) -> Result<Table, CliError> {
    let wrap = |source| CliError::Config { path: "config".into(), source };
    let scenario = config.scenario().map_err(wrap)?;
    let grid = config.grid().map_err(wrap)?;
    presets::warn_if_stiff(&scenario, grid.dt);
    let record = scenario.run(&grid, &config.observables().map_err(wrap)?)?;
    Ok(Table::from_record(&record))
}

pub fn run(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let table = run_config(&config)?;
    table.save(out).map_err(io_error(out))
}

pub fn preset(name: presets::PresetName, opts: &presets::PresetOptions, outdir: &Path) -> Result<Vec<String>, CliError> {
    let files = presets::run_preset(name, opts)?;
    fs::create_dir_all(outdir).map_err(io_error(outdir))?;
    let mut written = Vec::new();
    for (file, table) in files {
        let path = outdir.join(&file);
        table.save(&path).map_err(io_error(&path))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifyLevel {
    Quick,
    Full,
}

/// Run the verification checks of `level`, printing one line per check.
///
/// `scatter_scale` multiplies the local scatter weights in the oracle
/// comparison, to confirm that the comparison notices the change.
pub fn verify(level: VerifyLevel, scatter_scale: f64, mut emit: impl FnMut(&CheckOutcome)) -> Result<(), CliError> {
    let mut checks: Vec<Box<dyn Fn() -> CheckOutcome>> = vec![Box::new(scatter_calibration)];
    let ns: &'static [u32] = match level {
        VerifyLevel::Quick => &[2, 3, 4],
        VerifyLevel::Full => &[2, 3, 4, 6, 8],
    };
    if scatter_scale == 1.0 {
        checks.push(Box::new(move || oracle_equivalence_suite(ns, 1e-4, 1e-8)));
    } else {
        checks.push(Box::new(move || perturbed_equivalence_suite(ns, 1e-4, 1e-8, scatter_scale)));
    }
    checks.push(Box::new(|| analytic_dephasing(&[4, 10])));
    checks.push(Box::new(|| combinatorics(30, 1000)));
    if level == VerifyLevel::Full {
        checks.push(Box::new(|| collective_preservation(&[2, 3, 4, 5, 6, 7, 8])));
        checks.push(Box::new(integrator_convergence));
    }
    let mut failed = Vec::new();
    for c in checks {
        let outcome = c();
        emit(&outcome);
        if !outcome.passed {
            failed.push(format!("{} {}", outcome.id, outcome.title));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed))
    }
}

fn fmt_count(d: &Degeneracy) -> String {
    match d.to_u64() {
        Some(v) => v.to_string(),
        None => {
            let log10 = d.log_value / std::f64::consts::LN_10;
            let exp = log10.floor();
            format!("{:.6}e{}", 10f64.powf(log10 - exp), exp as i64)
        }
    }
}

/// Degeneracy table for `N` particles, `J` descending.
pub fn dims(n: u32) -> Result<String, CliError> {
    if n > DIMS_MAX_N {
        return Err(CliError::Usage(format!("--n must be at most {DIMS_MAX_N}, got {n}")));
    }
    let spec = EnsembleSpec::new(n)?;
    let rows = dimension_table(&spec);
    let mut out = String::new();
    writeln!(out, "N = {n}").unwrap();
    writeln!(out, "{:>8}  {:>22}  {:>22}  {:>6}", "J", "d", "alpha", "2J+1").unwrap();
    for r in rows.iter().rev() {
        writeln!(
            out,
            "{:>8}  {:>22}  {:>22}  {:>6}",
            r.j.to_string(),
            fmt_count(&r.degeneracy),
            fmt_count(&r.alpha),
            r.j.dim()
        )
        .unwrap();
    }
    writeln!(out, "collective dimension {} (blocks {})", collective_dim(&spec), rows.len()).unwrap();
    writeln!(out, "stored density entries {}", collective_density_len(&spec)).unwrap();
    let ok = if dimension_checksum(&rows, n) { "✓" } else { "✗" };
    if n < 64 {
        writeln!(out, "checksum Σ d(2J+1) = {} = 2^{n} {ok}", 1u64 << n).unwrap();
    } else {
        writeln!(out, "checksum Σ d(2J+1) = 2^{n} {ok}").unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_small() {
        let t = dims(4).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        let cells = |l: &str| l.split_whitespace().map(String::from).collect::<Vec<_>>();
        assert_eq!(cells(lines[2]), ["2", "1", "1", "5"]);
        assert_eq!(cells(lines[3]), ["1", "3", "4", "3"]);
        assert_eq!(cells(lines[4]), ["0", "2", "6", "1"]);
        assert!(t.contains("collective dimension 9"));
        assert!(t.contains("= 16 = 2^4 ✓"));

        let t = dims(3).unwrap();
        assert!(t.contains("     3/2                       1"));
        assert!(t.contains("     1/2                       2"));
        assert!(t.contains("= 8 = 2^3 ✓"));
    }

    #[test]
    fn dims_large() {
        assert!(dims(100).unwrap().contains("collective dimension 2601"));
        let t = dims(200).unwrap();
        assert!(t.contains("e"));
        assert!(t.contains("2^200 ✓"));
        assert_eq!(dims(DIMS_MAX_N + 1).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn exit_codes() {
        let phys = CliError::Core(collective_core::Error::Physicality { t: 0.0, trace_dev: 1.0, min_eig: 0.0 });
        assert_eq!(phys.exit_code(), 2);
        assert_eq!(CliError::Verification(vec![]).exit_code(), 3);
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
    }
}
