//! Acceptance suite: one line per criterion.
//!
//! Exits nonzero on any failure not listed in [`KNOWN_FAILURES`].

use collective_core::validation::{
    analytic_dephasing, cat_decay_properties, collective_preservation, combinatorics, integrator_convergence,
    oracle_equivalence_suite, scaling, scatter_calibration, squeezing_properties, CheckOutcome,
};

/// Criteria that fail for physical reasons, with the reason printed after the line.
const KNOWN_FAILURES: &[(&str, &str)] = &[(
    "A6",
    "amplitude damping drives the cat toward |↓…↓⟩, which has overlap ½ with it, so the \
     σ_- and J_- fidelities dip below ½ and then rise; property (i) cannot hold for those curves",
)];

fn main() {
    let checks: Vec<fn() -> CheckOutcome> = vec![
        scatter_calibration,
        || oracle_equivalence_suite(&[2, 3, 4, 6, 8], 1e-4, 1e-8),
        || collective_preservation(&[2, 3, 4, 5, 6, 7, 8]),
        || analytic_dephasing(&[4, 10]),
        || combinatorics(30, 1000),
        cat_decay_properties,
        || squeezing_properties(1e-4),
        integrator_convergence,
        scaling,
    ];
    let (mut failed, mut unexpected) = (0, 0);
    for c in checks {
        let outcome = c();
        println!("{outcome}");
        if !outcome.passed {
            failed += 1;
            match KNOWN_FAILURES.iter().find(|(id, _)| *id == outcome.id) {
                Some((_, why)) => println!("   known failure: {why}"),
                None => unexpected += 1,
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed, {unexpected} unexpected failures", 9 - failed);
    if unexpected > 0 {
        std::process::exit(1);
    }
}
