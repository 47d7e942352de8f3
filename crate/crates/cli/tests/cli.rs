use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collective_cli::config::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collective-sim"))
}

fn example_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/cat_local_decay.conf")
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.conf");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn example_config_parses_and_round_trips() {
    let text = fs::read_to_string(example_config()).unwrap();
    let c = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(c.n_particles, 10);
    assert_eq!(ExperimentConfig::parse(&c.to_string()).unwrap(), c);
}

#[test]
fn run_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example_config()).unwrap().replace("t_max = 2.0", "t_max = 0.2");
    let cfg = write_config(dir.path(), &text);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = exec(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let (header, rows) = read_csv(&a);
    assert_eq!(header[..2], ["t", "fidelity"]);
    for j in 0..=5 {
        col(&header, &format!("N_{j}"));
    }
    assert_eq!(rows.len(), 21);
    let (f, tr) = (col(&header, "fidelity"), col(&header, "trace"));
    assert!((rows[0][f] - 1.0).abs() < 1e-12);
    assert!(rows[20][f] < 0.8);
    assert!(rows.iter().all(|r| (r[tr] - 1.0).abs() < 1e-9));
}

#[test]
fn no_dynamics_gives_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_particles = 5\ninitial_state = dicke(3/2, 1/2)\nt_max = 0.1\ndt = 0.01\noutputs = fidelity, jz, trace\n",
    );
    let out = dir.path().join("c.csv");
    let o = exec(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "fidelity", "jz", "trace"]);
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(r[1..], rows[0][1..]);
    }
    assert_eq!(rows[0][2], 0.5);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_particles = 4\ninitial_state = cat\nt_mx = 1\ndt = 0.1\n");
    let o = exec(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("t_mx"), "{err}");
}

#[test]
fn unstable_step_aborts_with_physicality_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_particles = 6\ninitial_state = cat\nt_max = 5\ndt = 0.5\n\n[channel]\noperator = pauli_z\nkind = collective\ngamma = 10\n",
    );
    let o = exec(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(exec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(exec(&["dims"]).status.code(), Some(1));
    assert_eq!(exec(&["dims", "--n", "20000"]).status.code(), Some(1));
    assert_eq!(exec(&["--help"]).status.code(), Some(0));
}

#[test]
fn dims_prints_table() {
    let o = exec(&["dims", "--n", "4"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("collective dimension 9"));
    assert!(text.contains("2^4 ✓"));
}

#[test]
fn cat_fidelity_preset() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().to_str().unwrap();
    let args = ["preset", "cat-fidelity", "--n", "10", "--tmax", "0.5", "--outdir", outdir];
    assert!(exec(&args).status.success());
    let path = dir.path().join("cat_fidelity_n10.csv");
    let first = fs::read(&path).unwrap();
    assert!(exec(&args).status.success());
    assert_eq!(fs::read(&path).unwrap(), first);

    let (header, rows) = read_csv(&path);
    let labels = ["local_sigma_minus", "collective_j_minus", "local_spin_z", "collective_j_z"];
    for l in labels {
        let (f, tr) = (col(&header, l), col(&header, &format!("trace_{l}")));
        assert!((rows[0][f] - 1.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| (r[tr] - 1.0).abs() < 1e-9));
    }
    assert_eq!(header.len(), 1 + 2 * labels.len());
    let last = rows.last().unwrap();
    assert!((last[0] - 0.5).abs() < 1e-12);
    // local b_z dephasing of the cat: ½ + ½ e^{-Nt/2}
    let expect = 0.5 + 0.5 * (-10.0f64 * 0.5 / 2.0).exp();
    assert!((last[col(&header, "local_spin_z")] - expect).abs() < 1e-6);
}

#[test]
fn cat_leakage_preset_conserves_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(&["preset", "cat-leakage", "--n", "10", "--outdir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&dir.path().join("cat_leakage_n10.csv"));
    assert_eq!(header.len(), 1 + 6 + 1);
    assert_eq!(rows.len(), 201);
    for r in &rows {
        let sum: f64 = r[1..7].iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    assert!(rows[100][col(&header, "N_0")] < rows[100][col(&header, "N_4")]);
}

#[test]
fn squeeze_preset_has_seven_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        exec(&["preset", "squeeze", "--n", "20", "--tmax", "0.06", "--dt", "0.0005", "--outdir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("squeeze_n20.csv"));
    let curves: Vec<&String> = header[1..].iter().filter(|h| !h.starts_with("trace_")).collect();
    assert_eq!(curves.len(), 7);
    assert_eq!(curves[0], "free");
    for c in curves {
        assert!((rows[0][col(&header, c)] - 1.0).abs() < 1e-9);
    }
    let free = col(&header, "free");
    assert!(rows[10][free] < 1.0);
}

#[test]
fn verify_quick_passes_and_mutation_fails() {
    let o = exec(&["verify", "--level", "quick"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    for id in ["A1 PASS", "A2 PASS", "A4 PASS", "A5 PASS"] {
        assert!(text.contains(id), "{text}");
    }

    let o = exec(&["verify", "--perturb-scatter", "1.001"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(3), "{text}");
    assert!(text.contains("A2 FAIL"), "{text}");
    assert!(text.contains("verification failed: A2 oracle equivalence"), "{text}");
}
