//! Combinatorics of the SU(2) decomposition of `N` spin-1/2 particles.
//!
//! The joint space of `N` qubits splits into irreducible blocks of total
//! angular momentum `J`, with `J` running from `N mod 2 / 2` up to `N/2` in
//! unit steps. Each `J` appears with multiplicity `d^J_N`. Angular momenta are
//! stored as twice-J integers so half-integer values stay exact.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// An ensemble of `N` spin-1/2 particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EnsembleSpec {
    n: u32,
}

impl EnsembleSpec {
    pub fn new(n_particles: u32) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self { n: n_particles })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn j_min(&self) -> JLabel {
        JLabel(self.n % 2)
    }

    pub fn j_max(&self) -> JLabel {
        JLabel(self.n)
    }

    /// Number of distinct total-J blocks.
    pub fn num_blocks(&self) -> usize {
        (self.n / 2 + 1) as usize
    }

    pub fn contains(&self, j: JLabel) -> bool {
        j.0 <= self.n && j.0 % 2 == self.n % 2
    }

    /// Position of `j` in the ascending block order.
    pub fn block_index(&self, j: JLabel) -> Result<usize> {
        if !self.contains(j) {
            return Err(Error::InvalidJ { n: self.n, j: j.to_string() });
        }
        Ok(((j.0 - self.n % 2) / 2) as usize)
    }

    /// Inverse of [`block_index`](Self::block_index). Panics when out of range.
    pub fn block_j(&self, block: usize) -> JLabel {
        assert!(block < self.num_blocks(), "block {block} out of range");
        JLabel(self.n % 2 + 2 * block as u32)
    }

    pub fn j_range(&self) -> Vec<JLabel> {
        j_range(self)
    }
}

/// Total angular momentum, stored as `2J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JLabel(u32);

impl JLabel {
    pub const fn from_twice(twice_j: u32) -> Self {
        Self(twice_j)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Dimension `2J + 1` of the irrep.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// Parse `"2"`, `"3/2"` or `"1.5"`.
    pub fn parse(s: &str) -> Option<Self> {
        parse_half_integer(s).and_then(|t| u32::try_from(t).ok()).map(Self)
    }
}

impl fmt::Display for JLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_half_integer(self.0 as i64, f)
    }
}

/// Write a twice-valued quantity as `k` or `k/2`.
pub(crate) fn fmt_half_integer(twice: i64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if twice % 2 == 0 {
        write!(f, "{}", twice / 2)
    } else {
        write!(f, "{twice}/2")
    }
}

pub(crate) fn half_integer_string(twice: i64) -> String {
    struct H(i64);
    impl fmt::Display for H {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            fmt_half_integer(self.0, f)
        }
    }
    H(twice).to_string()
}

/// Parse a half-integer in `k`, `k/2` or decimal notation, returning twice its value.
pub fn parse_half_integer(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        match den.trim() {
            "2" => Some(num),
            "1" => Some(2 * num),
            _ => None,
        }
    } else if let Ok(k) = s.parse::<i64>() {
        Some(2 * k)
    } else {
        let x: f64 = s.parse().ok()?;
        let twice = (2.0 * x).round();
        ((2.0 * x - twice).abs() < 1e-12).then_some(twice as i64)
    }
}

/// Allowed total angular momenta, ascending.
pub fn j_range(spec: &EnsembleSpec) -> Vec<JLabel> {
    (0..spec.num_blocks()).map(|b| spec.block_j(b)).collect()
}

/// Sum of block dimensions: `(N+2)²/4` for even `N`, `(N+1)(N+3)/4` for odd `N`.
pub fn collective_dim(spec: &EnsembleSpec) -> u64 {
    j_range(spec).iter().map(|j| j.dim() as u64).sum()
}

/// Sum of squared block dimensions: the number of stored density entries.
pub fn collective_density_len(spec: &EnsembleSpec) -> u64 {
    j_range(spec).iter().map(|j| (j.dim() as u64).pow(2)).sum()
}

/// A multiplicity held both exactly and as a natural logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct Degeneracy {
    pub exact: BigUint,
    /// `ln(exact)`; `-inf` when `exact` is zero.
    pub log_value: f64,
}

impl Degeneracy {
    /// Exact value when it fits in 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        self.exact.to_u64()
    }

    pub fn to_f64(&self) -> f64 {
        self.log_value.exp()
    }
}

/// `C(n, k)` by the multiplicative recurrence.
fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Natural log of `d^J_N = N!(2J+1)/((N/2-J)!(N/2+J+1)!)` via log-gamma.
pub(crate) fn log_degeneracy(n: u32, j: JLabel) -> f64 {
    let n = n as u64;
    let k = (n - j.twice() as u64) / 2;
    ln_factorial(n) + ((j.twice() + 1) as f64).ln() - ln_factorial(k) - ln_factorial(n - k + 1)
}

/// Number of degenerate copies of the spin-`J` irrep among `N` qubits.
pub fn degeneracy(spec: &EnsembleSpec, j: JLabel) -> Result<Degeneracy> {
    spec.block_index(j)?;
    let n = spec.n() as u64;
    // d^J_N = C(N, k) - C(N, k-1) with k = N/2 - J.
    let k = (n - j.twice() as u64) / 2;
    let exact = if k == 0 {
        BigUint::one()
    } else {
        binomial(n, k) - binomial(n, k - 1)
    };
    Ok(Degeneracy { exact, log_value: log_degeneracy(spec.n(), j) })
}

/// Reduced degeneracy `α^J_N = Σ_{J' >= J} d^{J'}_N`.
///
/// `J = N/2 + 1` is accepted and yields zero.
pub fn alpha(spec: &EnsembleSpec, j: JLabel) -> Result<Degeneracy> {
    if j.twice() == spec.n() + 2 {
        return Ok(Degeneracy { exact: BigUint::zero(), log_value: f64::NEG_INFINITY });
    }
    let first = spec.block_index(j)?;
    let mut exact = BigUint::zero();
    for b in first..spec.num_blocks() {
        exact += degeneracy(spec, spec.block_j(b))?.exact;
    }
    let logs: Vec<f64> =
        (first..spec.num_blocks()).map(|b| log_degeneracy(spec.n(), spec.block_j(b))).collect();
    Ok(Degeneracy { exact, log_value: log_sum_exp(&logs) })
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Per-`J` multiplicities of one ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionRow {
    pub j: JLabel,
    pub degeneracy: Degeneracy,
    pub alpha: Degeneracy,
}

/// `d^J_N` and `α^J_N` for every `J`, ascending, with one pass of
/// binomial updates.
pub fn dimension_table(spec: &EnsembleSpec) -> Vec<DimensionRow> {
    let n = spec.n() as u64;
    let mut rows: Vec<DimensionRow> = Vec::with_capacity(spec.num_blocks());
    // k = N/2 - J runs downward from J_max.
    let mut prev = BigUint::zero();
    let mut cur = BigUint::one();
    let mut alpha = BigUint::zero();
    let mut logs = Vec::new();
    for b in (0..spec.num_blocks()).rev() {
        let j = spec.block_j(b);
        let k = (n - j.twice() as u64) / 2;
        if k > 0 {
            prev = cur.clone();
            cur = cur * (n - k + 1) / k;
        }
        let d = &cur - &prev;
        alpha += &d;
        let log_d = log_degeneracy(spec.n(), j);
        logs.push(log_d);
        rows.push(DimensionRow {
            j,
            degeneracy: Degeneracy { exact: d, log_value: log_d },
            alpha: Degeneracy { exact: alpha.clone(), log_value: log_sum_exp(&logs) },
        });
    }
    rows.reverse();
    rows
}

/// Whether `Σ_J d^J_N (2J+1) = 2^N` holds exactly.
pub fn dimension_checksum(rows: &[DimensionRow], n: u32) -> bool {
    let total: BigUint = rows.iter().map(|r| &r.degeneracy.exact * BigUint::from(r.j.dim())).sum();
    total == BigUint::one() << n as usize
}

/// Floating-point degeneracy data for every block of one ensemble.
///
/// Raw degeneracies overflow fixed-width integers well before `N = 100`, but
/// the scatter weights only need the ratios `α^{J+1}/d^J` and `α^J/d^J`,
/// which are bounded by `N` and are evaluated here in log domain.
#[derive(Clone, Debug)]
pub struct DegeneracyTable {
    spec: EnsembleSpec,
    log_d: Vec<f64>,
    /// `ln α` per block plus one trailing `-inf` entry for `J = N/2 + 1`.
    log_alpha: Vec<f64>,
}

impl DegeneracyTable {
    pub fn new(spec: &EnsembleSpec) -> Self {
        let nb = spec.num_blocks();
        let log_d: Vec<f64> = (0..nb).map(|b| log_degeneracy(spec.n(), spec.block_j(b))).collect();
        let mut log_alpha = vec![f64::NEG_INFINITY; nb + 1];
        for b in (0..nb).rev() {
            log_alpha[b] = log_sum_exp(&[log_d[b], log_alpha[b + 1]]);
        }
        Self { spec: *spec, log_d, log_alpha }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn log_degeneracy(&self, block: usize) -> f64 {
        self.log_d[block]
    }

    pub fn log_alpha(&self, block: usize) -> f64 {
        self.log_alpha[block]
    }

    /// `α^{J+1}_N / d^J_N`; zero for the top block.
    pub fn alpha_next_over_d(&self, block: usize) -> f64 {
        (self.log_alpha[block + 1] - self.log_d[block]).exp()
    }

    /// `α^J_N / d^J_N`.
    pub fn alpha_over_d(&self, block: usize) -> f64 {
        (self.log_alpha[block] - self.log_d[block]).exp()
    }
}

/// Single-particle operator direction in the `{b_-, b_+, b_z}` basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Minus,
    Plus,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Minus, Component::Plus, Component::Z];

    /// Change of `2M` produced by the operator.
    pub fn twice_shift(self) -> i32 {
        match self {
            Component::Minus => -2,
            Component::Plus => 2,
            Component::Z => 0,
        }
    }
}

fn sqrt_or_zero(x: f64) -> f64 {
    if x > 0.0 {
        x.sqrt()
    } else {
        0.0
    }
}

fn check_m(j: JLabel, twice_m: i32) -> Result<()> {
    if twice_m.unsigned_abs() > j.twice() || (twice_m - j.twice() as i32) % 2 != 0 {
        return Err(Error::InvalidM {
            j: j.to_string(),
            m: half_integer_string(twice_m as i64),
        });
    }
    Ok(())
}

// Unchecked coefficient kernels on real J, M; shared with the scatter builder.

pub(crate) fn a_raw(q: Component, j: f64, m: f64) -> f64 {
    match q {
        Component::Plus => sqrt_or_zero((j - m) * (j + m + 1.0)),
        Component::Minus => sqrt_or_zero((j + m) * (j - m + 1.0)),
        Component::Z => m,
    }
}

pub(crate) fn b_raw(q: Component, j: f64, m: f64) -> f64 {
    match q {
        Component::Plus => sqrt_or_zero((j - m) * (j - m - 1.0)),
        Component::Minus => -sqrt_or_zero((j + m) * (j + m - 1.0)),
        Component::Z => sqrt_or_zero((j + m) * (j - m)),
    }
}

pub(crate) fn d_raw(q: Component, j: f64, m: f64) -> f64 {
    match q {
        Component::Plus => -sqrt_or_zero((j + m + 1.0) * (j + m + 2.0)),
        Component::Minus => sqrt_or_zero((j - m + 1.0) * (j - m + 2.0)),
        Component::Z => sqrt_or_zero((j + m + 1.0) * (j - m + 1.0)),
    }
}

/// Same-irrep coupling coefficient `A_q^{J,M}`.
pub fn coeff_a(q: Component, j: JLabel, twice_m: i32) -> Result<f64> {
    check_m(j, twice_m)?;
    Ok(a_raw(q, j.value(), twice_m as f64 / 2.0))
}

/// Coupling coefficient `B_q^{J,M}` into the `J - 1` irrep.
pub fn coeff_b(q: Component, j: JLabel, twice_m: i32) -> Result<f64> {
    check_m(j, twice_m)?;
    Ok(b_raw(q, j.value(), twice_m as f64 / 2.0))
}

/// Coupling coefficient `D_q^{J,M}` into the `J + 1` irrep.
pub fn coeff_d(q: Component, j: JLabel, twice_m: i32) -> Result<f64> {
    check_m(j, twice_m)?;
    Ok(d_raw(q, j.value(), twice_m as f64 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: u32) -> EnsembleSpec {
        EnsembleSpec::new(n).unwrap()
    }

    fn j(twice: u32) -> JLabel {
        JLabel::from_twice(twice)
    }

    #[test]
    fn j_ranges() {
        assert_eq!(j_range(&spec(1)), vec![j(1)]);
        assert_eq!(j_range(&spec(4)), vec![j(0), j(2), j(4)]);
        assert_eq!(j_range(&spec(5)), vec![j(1), j(3), j(5)]);
        assert_eq!(spec(6).j_min(), j(0));
        assert!(EnsembleSpec::new(0).is_err());
    }

    #[test]
    fn degeneracies_n4() {
        let s = spec(4);
        assert_eq!(degeneracy(&s, j(4)).unwrap().to_u64(), Some(1));
        assert_eq!(degeneracy(&s, j(2)).unwrap().to_u64(), Some(3));
        assert_eq!(degeneracy(&s, j(0)).unwrap().to_u64(), Some(2));
        assert!(degeneracy(&s, j(1)).is_err());
        assert!(degeneracy(&s, j(6)).is_err());
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(&spec(2), j(2)).unwrap().to_u64(), Some(1));
        let top = alpha(&spec(2), j(4)).unwrap();
        assert_eq!(top.to_u64(), Some(0));
        assert_eq!(top.log_value, f64::NEG_INFINITY);
        assert_eq!(alpha(&spec(4), j(2)).unwrap().to_u64(), Some(4));
        assert!(alpha(&spec(4), j(8)).is_err());
    }

    #[test]
    fn dims() {
        assert_eq!(collective_dim(&spec(4)), 9);
        assert_eq!(collective_dim(&spec(2)), 4);
        assert_eq!(collective_dim(&spec(5)), 12);
        assert_eq!(collective_dim(&spec(100)), 2601);
    }

    #[test]
    fn dimension_table_matches_direct() {
        for n in [1, 2, 7, 12, 33] {
            let s = spec(n);
            let rows = dimension_table(&s);
            assert_eq!(rows.len(), s.num_blocks());
            for r in &rows {
                assert_eq!(r.degeneracy.exact, degeneracy(&s, r.j).unwrap().exact);
                let a = alpha(&s, r.j).unwrap();
                assert_eq!(r.alpha.exact, a.exact);
                assert!((r.alpha.log_value - a.log_value).abs() < 1e-9);
            }
            assert!(dimension_checksum(&rows, n));
        }
    }

    #[test]
    fn coefficient_examples() {
        let s2 = std::f64::consts::SQRT_2;
        assert!((coeff_a(Component::Plus, j(2), 0).unwrap() - s2).abs() < 1e-15);
        assert!((coeff_b(Component::Minus, j(2), 2).unwrap() + s2).abs() < 1e-15);
        assert!((coeff_d(Component::Z, j(2), 2).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(coeff_a(Component::Minus, j(2), -2).unwrap(), 0.0);
        assert_eq!(coeff_a(Component::Z, j(3), -1).unwrap(), -0.5);
        assert!(coeff_a(Component::Plus, j(2), 4).is_err());
        assert!(coeff_a(Component::Plus, j(2), 1).is_err());
    }

    #[test]
    fn half_integer_parsing() {
        assert_eq!(JLabel::parse("3/2"), Some(j(3)));
        assert_eq!(JLabel::parse("2"), Some(j(4)));
        assert_eq!(JLabel::parse("0.5"), Some(j(1)));
        assert_eq!(JLabel::parse("-1"), None);
        assert_eq!(parse_half_integer("-3/2"), Some(-3));
        assert_eq!(parse_half_integer("x"), None);
        assert_eq!(j(3).to_string(), "3/2");
        assert_eq!(j(4).to_string(), "2");
    }

    #[test]
    fn ratio_table_matches_exact_rationals() {
        // alpha^J_N telescopes to C(N, N/2 - J), so alpha^{J+1}/d^J = (N/2 - J)/(2J + 1).
        for n in 1..=120u32 {
            let s = spec(n);
            let table = DegeneracyTable::new(&s);
            for b in 0..s.num_blocks() {
                let jj = s.block_j(b);
                let k = (n - jj.twice()) as f64 / 2.0;
                let expect_next = k / (jj.twice() as f64 + 1.0);
                let got = table.alpha_next_over_d(b);
                assert!(
                    (got - expect_next).abs() <= 1e-12 * expect_next.max(1.0),
                    "n={n} J={jj}: {got} vs {expect_next}"
                );
                let got_here = table.alpha_over_d(b);
                assert!((got_here - (1.0 + expect_next)).abs() <= 1e-12 * (1.0 + expect_next));
            }
        }
    }
}
