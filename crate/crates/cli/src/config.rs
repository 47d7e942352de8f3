//! Experiment configuration files.
//!
//! Flat `key = value` lines, `#` comments, and one `[channel]` section per
//! decoherence channel:
//!
//! ```text
//! n_particles = 10
//! initial_state = cat
//! t_max = 2
//! dt = 0.001
//!
//! [channel]
//! operator = sigma_minus
//! kind = local
//! gamma = 1
//! ```
//!
//! Top-level keys come before the first section. [`ExperimentConfig`]
//! prints back in the same format.

use std::fmt;
use std::str::FromStr;

use collective_core::integrator::{Observable, TimeGrid, Truncation};
use collective_core::irrep::parse_half_integer;
use collective_core::scenarios::Scenario;
use collective_core::state::{cat_state, coherent_pole_state, dicke_state};
use collective_core::{BlockedKet, ChannelKind, ChannelSpec, EnsembleSpec, JLabel, LocalOperatorCoeffs};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: unknown section `[{name}]`")]
    UnknownSection { line: usize, name: String },

    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },

    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, reason: String },

    #[error("missing required key `{key}`{}", section_suffix(*.section))]
    MissingKey { key: &'static str, section: Option<usize> },

    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn section_suffix(section: Option<usize>) -> String {
    section.map(|l| format!(" in [channel] starting at line {l}")).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Cat,
    CoherentPole,
    /// `|J, M⟩`, both stored doubled.
    Dicke { twice_j: u32, twice_m: i32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Hamiltonian {
    None,
    CounterTwisting(f64),
}

/// Single-particle jump operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorSpec {
    SigmaMinus,
    SigmaPlus,
    /// `σ_z = 2 b_z`.
    PauliZ,
    /// `cm b_- + cp b_+ + cz b_z`.
    Custom { cm: f64, cp: f64, cz: f64 },
}

impl OperatorSpec {
    pub fn coeffs(&self) -> LocalOperatorCoeffs {
        match *self {
            Self::SigmaMinus => LocalOperatorCoeffs::sigma_minus(),
            Self::SigmaPlus => LocalOperatorCoeffs::sigma_plus(),
            Self::PauliZ => LocalOperatorCoeffs::real(0.0, 0.0, 0.0, 2.0),
            Self::Custom { cm, cp, cz } => LocalOperatorCoeffs::real(0.0, cm, cp, cz),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    pub operator: OperatorSpec,
    pub kind: ChannelKind,
    pub gamma: f64,
}

/// Recordable observable names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    Fidelity,
    Jx,
    Jy,
    Jz,
    Xi2,
    Populations,
    Trace,
    MinEig,
}

impl Output {
    pub const ALL: [Output; 8] = [
        Output::Fidelity,
        Output::Jx,
        Output::Jy,
        Output::Jz,
        Output::Xi2,
        Output::Populations,
        Output::Trace,
        Output::MinEig,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::Fidelity => "fidelity",
            Output::Jx => "jx",
            Output::Jy => "jy",
            Output::Jz => "jz",
            Output::Xi2 => "xi2",
            Output::Populations => "populations",
            Output::Trace => "trace",
            Output::MinEig => "min_eig",
        }
    }

    fn observable(self, initial: &BlockedKet) -> Observable {
        match self {
            Output::Fidelity => Observable::fidelity(initial.clone()),
            Output::Jx => Observable::Jx,
            Output::Jy => Observable::Jy,
            Output::Jz => Observable::Jz,
            Output::Xi2 => Observable::Squeezing,
            Output::Populations => Observable::Populations,
            Output::Trace => Observable::Trace,
            Output::MinEig => Observable::MinEigenvalue,
        }
    }
}

impl FromStr for Output {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Output::ALL.into_iter().find(|o| o.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Output::ALL.iter().map(|o| o.name()).collect();
            format!("unknown observable `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_particles: u32,
    pub initial_state: InitialState,
    pub hamiltonian: Hamiltonian,
    pub channels: Vec<ChannelConfig>,
    pub t_max: f64,
    pub dt: f64,
    pub record_stride: usize,
    pub truncation: Option<f64>,
    pub outputs: Vec<Output>,
}

pub const DEFAULT_OUTPUTS: [Output; 6] =
    [Output::Fidelity, Output::Jx, Output::Jy, Output::Jz, Output::Populations, Output::Trace];

const TOP_KEYS: [&str; 8] =
    ["n_particles", "initial_state", "hamiltonian", "t_max", "dt", "record_stride", "truncation", "outputs"];

/// Split `name(a, b, ...)` into the name and its arguments.
fn call(s: &str) -> Option<(&str, Vec<&str>)> {
    let (name, rest) = s.split_once('(')?;
    let args = rest.strip_suffix(')')?;
    let args = if args.trim().is_empty() { Vec::new() } else { args.split(',').map(str::trim).collect() };
    Some((name.trim(), args))
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_initial(s: &str) -> Result<InitialState, String> {
    match s {
        "cat" => return Ok(InitialState::Cat),
        "coherent_pole" => return Ok(InitialState::CoherentPole),
        _ => {}
    }
    match call(s) {
        Some(("dicke", args)) if args.len() == 2 => {
            let twice_j = JLabel::parse(args[0]).ok_or_else(|| format!("`{}` is not a valid J", args[0]))?.twice();
            let twice_m = parse_half_integer(args[1])
                .and_then(|m| i32::try_from(m).ok())
                .ok_or_else(|| format!("`{}` is not a valid M", args[1]))?;
            Ok(InitialState::Dicke { twice_j, twice_m })
        }
        _ => Err(format!("`{s}` (expected cat, coherent_pole or dicke(J, M))")),
    }
}

fn parse_hamiltonian(s: &str) -> Result<Hamiltonian, String> {
    if s == "none" {
        return Ok(Hamiltonian::None);
    }
    match call(s) {
        Some(("counter_twisting", args)) if args.len() == 1 => Ok(Hamiltonian::CounterTwisting(number(args[0])?)),
        _ => Err(format!("`{s}` (expected none or counter_twisting(lambda))")),
    }
}

fn parse_operator(s: &str) -> Result<OperatorSpec, String> {
    match s {
        "sigma_minus" => return Ok(OperatorSpec::SigmaMinus),
        "sigma_plus" => return Ok(OperatorSpec::SigmaPlus),
        "pauli_z" => return Ok(OperatorSpec::PauliZ),
        _ => {}
    }
    match call(s) {
        Some(("custom", args)) if args.len() == 3 => {
            Ok(OperatorSpec::Custom { cm: number(args[0])?, cp: number(args[1])?, cz: number(args[2])? })
        }
        _ => Err(format!("`{s}` (expected sigma_minus, sigma_plus, pauli_z or custom(cm, cp, cz))")),
    }
}

fn parse_kind(s: &str) -> Result<ChannelKind, String> {
    match s {
        "local" => Ok(ChannelKind::Local),
        "collective" => Ok(ChannelKind::Collective),
        _ => Err(format!("`{s}` (expected local or collective)")),
    }
}

fn parse_outputs(s: &str) -> Result<Vec<Output>, String> {
    let outputs = s.split(',').map(|p| p.trim().parse()).collect::<Result<Vec<Output>, String>>()?;
    if outputs.is_empty() {
        return Err("no observables listed".into());
    }
    Ok(outputs)
}

#[derive(Default)]
struct ChannelDraft {
    start: usize,
    operator: Option<OperatorSpec>,
    kind: Option<ChannelKind>,
    gamma: Option<f64>,
}

impl ChannelDraft {
    fn finish(self) -> Result<ChannelConfig, ConfigError> {
        let missing = |key| ConfigError::MissingKey { key, section: Some(self.start) };
        Ok(ChannelConfig {
            operator: self.operator.ok_or_else(|| missing("operator"))?,
            kind: self.kind.ok_or_else(|| missing("kind"))?,
            gamma: self.gamma.ok_or_else(|| missing("gamma"))?,
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut n_particles = None;
        let mut initial_state = None;
        let mut hamiltonian = None;
        let mut t_max = None;
        let mut dt = None;
        let mut record_stride = None;
        let mut truncation = None;
        let mut outputs = None;
        let mut channels = Vec::new();
        let mut current: Option<ChannelDraft> = None;
        let mut seen: Vec<&str> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
                let name = name.trim();
                if name != "channel" {
                    return Err(ConfigError::UnknownSection { line, name: name.into() });
                }
                if let Some(d) = current.take() {
                    channels.push(d.finish()?);
                }
                current = Some(ChannelDraft { start: line, ..Default::default() });
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: content.into() });
            };
            let (key, value) = (key.trim(), value.trim());
            let invalid = |reason: String| ConfigError::InvalidValue { line, key: key.into(), reason };
            let duplicate = || ConfigError::DuplicateKey { line, key: key.into() };

            if let Some(draft) = current.as_mut() {
                match key {
                    "operator" if draft.operator.is_some() => return Err(duplicate()),
                    "kind" if draft.kind.is_some() => return Err(duplicate()),
                    "gamma" if draft.gamma.is_some() => return Err(duplicate()),
                    "operator" => draft.operator = Some(parse_operator(value).map_err(invalid)?),
                    "kind" => draft.kind = Some(parse_kind(value).map_err(invalid)?),
                    "gamma" => {
                        let g = number(value).map_err(invalid)?;
                        if g < 0.0 {
                            return Err(invalid(format!("rate must be non-negative, got {g}")));
                        }
                        draft.gamma = Some(g);
                    }
                    _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                }
                continue;
            }

            let Some(&known) = TOP_KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            };
            if seen.contains(&known) {
                return Err(duplicate());
            }
            seen.push(known);
            match known {
                "n_particles" => {
                    n_particles = Some(value.parse::<u32>().map_err(|_| invalid(format!("`{value}` is not a positive integer")))?)
                }
                "initial_state" => initial_state = Some(parse_initial(value).map_err(invalid)?),
                "hamiltonian" => hamiltonian = Some(parse_hamiltonian(value).map_err(invalid)?),
                "t_max" => t_max = Some(number(value).map_err(invalid)?),
                "dt" => dt = Some(number(value).map_err(invalid)?),
                "record_stride" => {
                    let s = value.parse::<usize>().ok().filter(|s| *s > 0);
                    record_stride = Some(s.ok_or_else(|| invalid(format!("`{value}` is not a positive integer")))?)
                }
                "truncation" => {
                    truncation = Some(if value == "none" { None } else { Some(number(value).map_err(invalid)?) })
                }
                "outputs" => outputs = Some(parse_outputs(value).map_err(invalid)?),
                _ => unreachable!(),
            }
        }
        if let Some(d) = current.take() {
            channels.push(d.finish()?);
        }

        let missing = |key| ConfigError::MissingKey { key, section: None };
        let config = Self {
            n_particles: n_particles.ok_or_else(|| missing("n_particles"))?,
            initial_state: initial_state.ok_or_else(|| missing("initial_state"))?,
            hamiltonian: hamiltonian.unwrap_or(Hamiltonian::None),
            channels,
            t_max: t_max.ok_or_else(|| missing("t_max"))?,
            dt: dt.ok_or_else(|| missing("dt"))?,
            record_stride: record_stride.unwrap_or(1),
            truncation: truncation.flatten(),
            outputs: outputs.unwrap_or_else(|| DEFAULT_OUTPUTS.to_vec()),
        };
        config.validate()?;
        Ok(config)
    }

    /// Check every referenced quantity against `n_particles`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario().map(|_| ())?;
        self.grid().map(|_| ())?;
        if let Some(t) = self.truncation {
            if !(0.0..1.0).contains(&t) {
                return Err(ConfigError::Invalid(format!("truncation threshold must lie in [0, 1), got {t}")));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<EnsembleSpec, ConfigError> {
        EnsembleSpec::new(self.n_particles).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn initial_ket(&self) -> Result<BlockedKet, ConfigError> {
        let spec = self.spec()?;
        Ok(match self.initial_state {
            InitialState::Cat => cat_state(&spec),
            InitialState::CoherentPole => coherent_pole_state(&spec),
            InitialState::Dicke { twice_j, twice_m } => dicke_state(&spec, JLabel::from_twice(twice_j), twice_m)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        })
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let channels = self
            .channels
            .iter()
            .map(|c| ChannelSpec::new(c.operator.coeffs(), c.kind, c.gamma))
            .collect::<collective_core::Result<Vec<_>>>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Scenario {
            label: "run".into(),
            initial: self.initial_ket()?,
            lambda: match self.hamiltonian {
                Hamiltonian::None => None,
                Hamiltonian::CounterTwisting(l) => Some(l),
            },
            channels,
            truncation: self.truncation.map(|threshold| Truncation { threshold }),
        })
    }

    pub fn grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::new(0.0, self.t_max, self.dt, self.record_stride).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn observables(&self) -> Result<Vec<Observable>, ConfigError> {
        let ket = self.initial_ket()?;
        Ok(self.outputs.iter().map(|o| o.observable(&ket)).collect())
    }
}

fn fmt_twice(twice: i64) -> String {
    if twice % 2 == 0 {
        format!("{}", twice / 2)
    } else {
        format!("{twice}/2")
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialState::Cat => write!(f, "cat"),
            InitialState::CoherentPole => write!(f, "coherent_pole"),
            InitialState::Dicke { twice_j, twice_m } => {
                write!(f, "dicke({}, {})", fmt_twice(twice_j as i64), fmt_twice(twice_m as i64))
            }
        }
    }
}

impl fmt::Display for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hamiltonian::None => write!(f, "none"),
            Hamiltonian::CounterTwisting(l) => write!(f, "counter_twisting({l:?})"),
        }
    }
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorSpec::SigmaMinus => write!(f, "sigma_minus"),
            OperatorSpec::SigmaPlus => write!(f, "sigma_plus"),
            OperatorSpec::PauliZ => write!(f, "pauli_z"),
            OperatorSpec::Custom { cm, cp, cz } => write!(f, "custom({cm:?}, {cp:?}, {cz:?})"),
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_particles = {}", self.n_particles)?;
        writeln!(f, "initial_state = {}", self.initial_state)?;
        writeln!(f, "hamiltonian = {}", self.hamiltonian)?;
        writeln!(f, "t_max = {:?}", self.t_max)?;
        writeln!(f, "dt = {:?}", self.dt)?;
        writeln!(f, "record_stride = {}", self.record_stride)?;
        match self.truncation {
            Some(t) => writeln!(f, "truncation = {t:?}")?,
            None => writeln!(f, "truncation = none")?,
        }
        let names: Vec<&str> = self.outputs.iter().map(|o| o.name()).collect();
        writeln!(f, "outputs = {}", names.join(", "))?;
        for c in &self.channels {
            writeln!(f)?;
            writeln!(f, "[channel]")?;
            writeln!(f, "operator = {}", c.operator)?;
            let kind = match c.kind {
                ChannelKind::Local => "local",
                ChannelKind::Collective => "collective",
            };
            writeln!(f, "kind = {kind}")?;
            writeln!(f, "gamma = {:?}", c.gamma)?;
        }
        Ok(())
    }
}
