//! Master-equation generators on the collective space.
//!
//! A symmetric local jump `Σ_n s^(n) ρ s^(n)†` maps a collective density to a
//! collective density. Expanding `s = Σ_q s_q b_q` in the ladder basis, each
//! entry `ρ_{J,M;J,M'}` scatters into the `J`, `J-1` and `J+1` blocks at
//! `(M + δ_q, M' + δ_r)` with weights built from the `A`, `B`, `D` coupling
//! coefficients and the degeneracy ratios `α^{J+1}/d^J`, `α^J/d^J`.
//!
//! Anticommutator terms never need the identity rows of that map: `s†s` is
//! expanded in `{1, b_-, b_+, b_z}` and summed over sites exactly through
//! [`symmetric_sum_collective`], which is block diagonal.

use crate::error::{Error, Result};
use crate::irrep::{a_raw, b_raw, d_raw, Component, DegeneracyTable, EnsembleSpec, JLabel};
use crate::operators::{
    row_of_twice_m, symmetric_sum_collective, twice_m_of_row, BlockOperator, LocalOperatorCoeffs,
    C64, I, ZERO,
};
use crate::banded::{mirror_upper, Banded, BandedBlocks};
use crate::state::BlockedDensity;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    /// `Σ_n L[s^(n)]`: identical but independent action on every particle.
    Local,
    /// `L[Σ_n s^(n)]`: one collective jump operator.
    Collective,
}

/// A decoherence channel `Γ·L[s]` with traceless single-particle operator `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    coeffs: LocalOperatorCoeffs,
    kind: ChannelKind,
    rate: f64,
}

impl ChannelSpec {
    pub fn new(coeffs: LocalOperatorCoeffs, kind: ChannelKind, rate: f64) -> Result<Self> {
        if !coeffs.is_traceless() {
            return Err(Error::NotTraceless { c0: coeffs.c0.to_string() });
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(Self { coeffs, kind, rate })
    }

    pub fn local(coeffs: LocalOperatorCoeffs, rate: f64) -> Result<Self> {
        Self::new(coeffs, ChannelKind::Local, rate)
    }

    pub fn collective(coeffs: LocalOperatorCoeffs, rate: f64) -> Result<Self> {
        Self::new(coeffs, ChannelKind::Collective, rate)
    }

    pub fn coeffs(&self) -> &LocalOperatorCoeffs {
        &self.coeffs
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Matrix-element label `(J, 2M, 2M')`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementLabel {
    pub j: JLabel,
    pub twice_m: i32,
    pub twice_m2: i32,
}

/// One image term of `Σ_n b_q^(n) |J,M⟩⟨J,M'| b_r^(n)†`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GScatterEntry {
    pub source: ElementLabel,
    pub target: ElementLabel,
    pub weight: f64,
}

/// Image of the element `|J,M⟩⟨J,M'|` under `Σ_n b_q^(n) · b_r^(n)†`.
pub fn g_scatter(
    spec: &EnsembleSpec,
    j: JLabel,
    twice_m: i32,
    twice_m2: i32,
    q: Component,
    r: Component,
) -> Result<Vec<GScatterEntry>> {
    g_scatter_with(&DegeneracyTable::new(spec), j, twice_m, twice_m2, q, r)
}

/// [`g_scatter`] with a precomputed degeneracy table.
pub fn g_scatter_with(
    table: &DegeneracyTable,
    j: JLabel,
    twice_m: i32,
    twice_m2: i32,
    q: Component,
    r: Component,
) -> Result<Vec<GScatterEntry>> {
    let spec = table.spec();
    let b = spec.block_index(j)?;
    for tm in [twice_m, twice_m2] {
        if row_of_twice_m(j, tm).is_none() {
            return Err(Error::InvalidM { j: j.to_string(), m: crate::irrep::half_integer_string(tm as i64) });
        }
    }
    let source = ElementLabel { j, twice_m, twice_m2 };
    let jv = j.value();
    let (m, m2) = (twice_m as f64 / 2.0, twice_m2 as f64 / 2.0);
    let (tq, tr) = (twice_m + q.twice_shift(), twice_m2 + r.twice_shift());
    let mut out = Vec::with_capacity(3);
    let mut push = |target_j: JLabel, weight: f64| {
        if weight == 0.0 {
            return;
        }
        if row_of_twice_m(target_j, tq).is_some() && row_of_twice_m(target_j, tr).is_some() {
            out.push(GScatterEntry {
                source,
                target: ElementLabel { j: target_j, twice_m: tq, twice_m2: tr },
                weight,
            });
        } else {
            debug_assert!(weight.abs() < 1e-12, "nonzero weight {weight} on out-of-range target");
        }
    };

    let ratio_next = table.alpha_next_over_d(b);
    if j.twice() > 0 {
        let same = 0.5 * a_raw(q, jv, m) * a_raw(r, jv, m2) / jv
            * (1.0 + ratio_next * (2.0 * jv + 1.0) / (jv + 1.0));
        push(j, same);
        if b > 0 {
            let down = 0.5 * b_raw(q, jv, m) * b_raw(r, jv, m2) * table.alpha_over_d(b) / jv;
            push(JLabel::from_twice(j.twice() - 2), down);
        }
    }
    if b + 1 < spec.num_blocks() {
        let up = 0.5 * ratio_next * d_raw(q, jv, m) * d_raw(r, jv, m2) / (jv + 1.0);
        push(JLabel::from_twice(j.twice() + 2), up);
    }
    Ok(out)
}

/// Nonzero bilinear weights `s_q·conj(s_r)` of a jump operator.
fn bilinear_pairs(s: &LocalOperatorCoeffs) -> Vec<(Component, Component, C64)> {
    let mut pairs = Vec::new();
    for q in Component::ALL {
        for r in Component::ALL {
            let w = s.component(q) * s.component(r).conj();
            if w != ZERO {
                pairs.push((q, r, w));
            }
        }
    }
    pairs
}

/// `Σ_n s^(n) ρ s^(n)†` in blocked form (reference implementation).
pub fn apply_local_jump(rho: &BlockOperator, s: &LocalOperatorCoeffs) -> Result<BlockOperator> {
    if !s.is_traceless() {
        return Err(Error::NotTraceless { c0: s.c0.to_string() });
    }
    let spec = *rho.spec();
    let table = DegeneracyTable::new(&spec);
    let pairs = bilinear_pairs(s);
    let mut out = BlockOperator::zeros(&spec);
    for b in 0..spec.num_blocks() {
        let j = spec.block_j(b);
        for col in 0..j.dim() {
            for row in 0..j.dim() {
                let x = rho.get(b, row, col);
                if x == ZERO {
                    continue;
                }
                let (tm, tm2) = (twice_m_of_row(j, row), twice_m_of_row(j, col));
                for &(q, r, w) in &pairs {
                    for e in g_scatter_with(&table, j, tm, tm2, q, r)? {
                        let tb = spec.block_index(e.target.j)?;
                        let tr = row_of_twice_m(e.target.j, e.target.twice_m).unwrap();
                        let tc = row_of_twice_m(e.target.j, e.target.twice_m2).unwrap();
                        let i = out.index(tb, tr, tc);
                        out.data_mut()[i] += x * w * e.weight;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn anticommutator(k: &BlockOperator, rho: &BlockOperator) -> Result<BlockOperator> {
    k.mul(rho)?.add(&rho.mul(k)?)
}

/// Collective embedding of `s†s` summed over sites.
fn local_anticommutator_operator(spec: &EnsembleSpec, s: &LocalOperatorCoeffs) -> BlockOperator {
    symmetric_sum_collective(spec, &s.adjoint().compose(s))
}

/// `L[s]ρ = Σ_n s^(n) ρ s^(n)† - ½{s†s^(n), ρ}` (rate not included).
pub fn symmetric_local_dissipator(rho: &BlockOperator, ch: &ChannelSpec) -> Result<BlockOperator> {
    if ch.kind != ChannelKind::Local {
        return Err(Error::WrongChannelKind { op: "symmetric_local_dissipator", expected: "local" });
    }
    let jump = apply_local_jump(rho, &ch.coeffs)?;
    let k = local_anticommutator_operator(rho.spec(), &ch.coeffs);
    jump.sub(&anticommutator(&k, rho)?.scale(C64::new(0.5, 0.0)))
}

/// `L[S]ρ = SρS† - ½{S†S, ρ}` with `S = Σ_n s^(n)` (rate not included).
pub fn collective_dissipator(rho: &BlockOperator, ch: &ChannelSpec) -> Result<BlockOperator> {
    if ch.kind != ChannelKind::Collective {
        return Err(Error::WrongChannelKind { op: "collective_dissipator", expected: "collective" });
    }
    let s = symmetric_sum_collective(rho.spec(), &ch.coeffs);
    let sd = s.adjoint();
    let jump = s.mul(rho)?.mul(&sd)?;
    jump.sub(&anticommutator(&sd.mul(&s)?, rho)?.scale(C64::new(0.5, 0.0)))
}

/// `-i[H, ρ] + Σ_ch Γ_ch D_ch(ρ)` (reference implementation).
pub fn liouvillian_apply(
    rho: &BlockOperator,
    hamiltonian: Option<&BlockOperator>,
    channels: &[ChannelSpec],
) -> Result<BlockOperator> {
    let spec = *rho.spec();
    let mut out = BlockOperator::zeros(&spec);
    if let Some(h) = hamiltonian {
        out = out.add(&h.commutator(rho)?.scale(-I))?;
    }
    for ch in channels {
        let d = match ch.kind {
            ChannelKind::Local => symmetric_local_dissipator(rho, ch)?,
            ChannelKind::Collective => collective_dissipator(rho, ch)?,
        };
        out = out.add(&d.scale(C64::new(ch.rate, 0.0)))?;
    }
    Ok(out)
}

/// Arithmetic needed by the RK4 stepper.
pub trait Scalar:
    Copy + Default + std::ops::Add<Output = Self> + std::ops::Mul<f64, Output = Self> + std::ops::AddAssign
{
}

impl Scalar for f64 {}
impl Scalar for C64 {}

/// A right-hand side `dx/dt = L x` acting on flat vectors.
pub trait Generator {
    type Scalar: Scalar;

    /// Length of the state vector.
    fn len(&self) -> usize;

    /// `out = L·x`; `out` is overwritten.
    fn apply(&self, x: &[Self::Scalar], out: &mut [Self::Scalar]);

    /// Projection applied after each integration step (defaults to none).
    fn post_step(&self, _x: &mut [Self::Scalar]) {}
}

/// `coef · K X_src K†` added to block `dst`.
#[derive(Clone, Debug)]
struct ScatterMap {
    src: usize,
    dst: usize,
    coef: C64,
    k: Banded,
}

/// Precompiled master-equation generator on the collective space.
///
/// The right-hand side is `A ρ + ρ A† + Σ_k S_k ρ S_k† + scatter(ρ)` with the
/// drift `A = -iH - ½ Σ Γ Σ_n[s†s]^(n) - ½ Σ Γ S†S` and collective jumps
/// `√Γ S`. The local jump term factorizes per source block into three
/// sandwiches `c K ρ_J K†` landing in `J`, `J-1` and `J+1`, with
/// `K = Σ_q s_q X_q` and `X_q` built from the `A`, `B`, `D` coefficients.
/// The state vector is the flat block data followed by one slot that
/// accumulates population dropped by truncation. Inputs to
/// [`Generator::apply`] must be Hermitian block by block.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    spec: EnsembleSpec,
    offsets: Vec<usize>,
    drift: BandedBlocks,
    jumps: Vec<BandedBlocks>,
    scatter: Vec<ScatterMap>,
    active_from: usize,
}

impl Liouvillian {
    pub fn new(
        spec: &EnsembleSpec,
        hamiltonian: Option<&BlockOperator>,
        channels: &[ChannelSpec],
    ) -> Result<Self> {
        let mut drift = BlockOperator::zeros(spec);
        if let Some(h) = hamiltonian {
            h.check_spec(spec)?;
            drift = drift.add(&h.scale(-I))?;
        }
        let mut jumps = Vec::new();
        let mut scatter = Vec::new();
        let table = DegeneracyTable::new(spec);
        for ch in channels {
            if ch.rate == 0.0 {
                continue;
            }
            let half_rate = C64::new(-0.5 * ch.rate, 0.0);
            match ch.kind {
                ChannelKind::Local => {
                    let k = local_anticommutator_operator(spec, &ch.coeffs);
                    drift = drift.add(&k.scale(half_rate))?;
                    compile_scatter(&table, &ch.coeffs, ch.rate, &mut scatter);
                }
                ChannelKind::Collective => {
                    let s = symmetric_sum_collective(spec, &ch.coeffs);
                    let sds = s.adjoint().mul(&s)?;
                    drift = drift.add(&sds.scale(half_rate))?;
                    jumps.push(BandedBlocks::new(&s.scale(C64::new(ch.rate.sqrt(), 0.0))));
                }
            }
        }
        let layout = BlockOperator::zeros(spec);
        let offsets = (0..=spec.num_blocks())
            .map(|b| if b < spec.num_blocks() { layout.offset(b) } else { layout.data().len() })
            .collect();
        Ok(Self {
            spec: *spec,
            offsets,
            drift: BandedBlocks::new(&drift),
            jumps,
            scatter,
            active_from: 0,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    /// Number of stored density entries (state length minus the dropped slot).
    pub fn density_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Number of block-to-block scatter maps.
    pub fn scatter_len(&self) -> usize {
        self.scatter.len()
    }

    /// Lowest block that receives scattered population.
    pub fn active_from(&self) -> usize {
        self.active_from
    }

    /// Exclude blocks below `block` from the dynamics; their inflow is
    /// accumulated in the dropped slot instead.
    pub fn set_active_from(&mut self, block: usize) {
        self.active_from = block.min(self.spec.num_blocks() - 1);
    }

    /// Multiply every local scatter weight by `factor` (mutation testing).
    pub fn scale_scatter(&mut self, factor: f64) {
        for m in &mut self.scatter {
            m.coef *= factor;
        }
    }

    /// Trace of block `block` within a state vector.
    pub fn block_trace(&self, x: &[C64], block: usize) -> f64 {
        let d = self.spec.block_j(block).dim();
        let off = self.offsets[block];
        (0..d).map(|r| x[off + r * d + r].re).sum()
    }

    /// Zero the blocks below the active range, moving their trace into the dropped slot.
    pub fn drop_inactive(&self, x: &mut [C64]) {
        let n = self.density_len();
        let dropped: f64 = (0..self.active_from).map(|b| self.block_trace(x, b)).sum();
        x[..self.offsets[self.active_from]].fill(ZERO);
        x[n] += dropped;
    }

    /// Pack a density into a state vector (dropped slot zero).
    pub fn pack(&self, rho: &BlockOperator) -> Vec<C64> {
        let mut x = rho.data().to_vec();
        x.push(ZERO);
        x
    }

    /// Split a state vector into the density and the dropped population.
    pub fn unpack(&self, x: &[C64]) -> (BlockOperator, f64) {
        let n = self.density_len();
        (BlockOperator::from_raw(&self.spec, x[..n].to_vec()), x[n].re)
    }

    /// `L ρ` as a block operator (dropped inflow discarded).
    pub fn apply_to(&self, rho: &BlockOperator) -> Result<BlockOperator> {
        rho.check_spec(&self.spec)?;
        let x = self.pack(rho);
        let mut out = vec![ZERO; x.len()];
        self.apply(&x, &mut out);
        Ok(self.unpack(&out).0)
    }
}

fn compile_scatter(table: &DegeneracyTable, s: &LocalOperatorCoeffs, rate: f64, out: &mut Vec<ScatterMap>) {
    let spec = table.spec();
    let nb = spec.num_blocks();
    let comps: Vec<(Component, C64)> =
        Component::ALL.into_iter().map(|q| (q, s.component(q))).filter(|(_, c)| *c != ZERO).collect();
    for b in 0..nb {
        let j = spec.block_j(b);
        let jv = j.value();
        let ratio_next = table.alpha_next_over_d(b);
        // (target block, coefficient, kernel)
        let mut targets: Vec<(usize, f64, fn(Component, f64, f64) -> f64)> = Vec::new();
        if j.twice() > 0 {
            targets.push((b, 0.5 / jv * (1.0 + ratio_next * (2.0 * jv + 1.0) / (jv + 1.0)), a_raw));
            if b > 0 {
                targets.push((b - 1, 0.5 * table.alpha_over_d(b) / jv, b_raw));
            }
        }
        if b + 1 < nb {
            targets.push((b + 1, 0.5 * ratio_next / (jv + 1.0), d_raw));
        }
        for (tb, coef, kernel) in targets {
            if coef == 0.0 {
                continue;
            }
            let tj = spec.block_j(tb);
            let mut entries = Vec::new();
            for k in 0..j.dim() {
                let tm = twice_m_of_row(j, k);
                for &(q, c) in &comps {
                    let v = kernel(q, jv, tm as f64 / 2.0);
                    if v == 0.0 {
                        continue;
                    }
                    match row_of_twice_m(tj, tm + q.twice_shift()) {
                        Some(a) => entries.push((a, k, c * v)),
                        None => debug_assert!(v.abs() < 1e-12, "nonzero kernel {v} on out-of-range target"),
                    }
                }
            }
            let k = Banded::from_entries(tj.dim(), j.dim(), entries);
            out.push(ScatterMap { src: b, dst: tb, coef: C64::new(rate * coef, 0.0), k });
        }
    }
}

impl Generator for Liouvillian {
    type Scalar = C64;

    fn len(&self) -> usize {
        self.density_len() + 1
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        let n = self.density_len();
        out.fill(ZERO);
        let first = self.active_from;
        let (xd, od) = (&x[..n], &mut out[..n]);
        let mut scratch = Vec::new();
        self.drift.add_left_and_adjoint_right_upper(xd, od, &mut scratch, first);
        for s in &self.jumps {
            s.add_sandwich_upper(xd, od, &mut scratch, first);
        }
        let mut dropped = ZERO;
        for m in self.scatter.iter().filter(|m| m.src >= first) {
            let (so, ds) = (self.offsets[m.src], self.spec.block_j(m.src).dim());
            m.k.left(&xd[so..so + ds * ds], ds, &mut scratch);
            if m.dst < first {
                dropped += m.k.trace_right_adjoint(&scratch, m.coef);
            } else {
                let (to, te) = (self.offsets[m.dst], self.offsets[m.dst + 1]);
                let dd = self.spec.block_j(m.dst).dim();
                m.k.right_adjoint_add_upper(&scratch, dd, m.coef, &mut od[to..te]);
            }
        }
        let dims = (first..self.spec.num_blocks()).map(|b| self.spec.block_j(b).dim());
        mirror_upper(&self.offsets[first..], dims, od);
        out[n] = dropped;
    }

    fn post_step(&self, x: &mut [C64]) {
        let n = self.density_len();
        crate::operators::hermitize_blocks(&self.spec, &self.offsets, &mut x[..n]);
        x[n].im = 0.0;
    }
}

/// Convenience: `L ρ` for a density.
pub fn liouvillian_apply_compiled(
    rho: &BlockedDensity,
    hamiltonian: Option<&BlockOperator>,
    channels: &[ChannelSpec],
) -> Result<BlockOperator> {
    Liouvillian::new(rho.spec(), hamiltonian, channels)?.apply_to(rho.as_operator())
}
