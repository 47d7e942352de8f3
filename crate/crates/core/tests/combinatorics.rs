use collective_core::irrep::{
    collective_dim, degeneracy, dimension_checksum, dimension_table, DegeneracyTable,
};
use collective_core::EnsembleSpec;
use num_traits::ToPrimitive;

#[test]
fn log_degeneracy_matches_exact() {
    for n in 1..=300 {
        let spec = EnsembleSpec::new(n).unwrap();
        for j in spec.j_range() {
            let d = degeneracy(&spec, j).unwrap();
            let exact = d.exact.to_f64().unwrap();
            assert!((d.log_value - exact.ln()).abs() < 1e-10 * exact.ln().abs().max(1.0), "N={n} J={j}");
        }
    }
}

#[test]
fn multiplicity_tables_are_consistent() {
    for n in 1..=300 {
        let spec = EnsembleSpec::new(n).unwrap();
        let rows = dimension_table(&spec);
        assert!(dimension_checksum(&rows, n), "N={n}");
        assert_eq!(collective_dim(&spec), ((n as u64 + 2).pow(2) / 4), "N={n}");
        assert_eq!(rows.last().unwrap().degeneracy.exact, 1u32.into());
        // α decreases strictly with J
        for w in rows.windows(2) {
            assert!(w[0].alpha.exact > w[1].alpha.exact);
        }
        // α^{J+1} / d^J = (N/2 - J) / (2J + 1)
        let table = DegeneracyTable::new(&spec);
        for (b, r) in rows.iter().enumerate() {
            let k = (n - r.j.twice()) as f64 / 2.0;
            let expect = k / (r.j.twice() + 1) as f64;
            let got = table.alpha_next_over_d(b);
            assert!((got - expect).abs() <= 1e-10 * expect.max(1.0), "N={n} J={}: {got} vs {expect}", r.j);
        }
    }
}
