use thiserror::Error;

/// Errors raised by the collective-state library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ensemble must contain at least one particle")]
    EmptyEnsemble,

    #[error("J = {j} is not a valid total angular momentum for N = {n}")]
    InvalidJ { n: u32, j: String },

    #[error("M = {m} is outside the range |M| <= J = {j}")]
    InvalidM { j: String, m: String },

    #[error("ensemble mismatch: left has N = {left}, right has N = {right}")]
    SpecMismatch { left: u32, right: u32 },

    #[error("state is not normalized (norm² = {norm_sq:.3e})")]
    NotNormalized { norm_sq: f64 },

    #[error("channel operator must be traceless (identity coefficient {c0})")]
    NotTraceless { c0: String },

    #[error("channel rate must be non-negative and finite, got {0}")]
    InvalidRate(f64),

    #[error("{op} expects a {expected} channel")]
    WrongChannelKind { op: &'static str, expected: &'static str },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(
        "physicality violated at t = {t}: trace deviation {trace_dev:.3e}, \
         minimum eigenvalue {min_eig:.3e}"
    )]
    Physicality { t: f64, trace_dev: f64, min_eig: f64 },

    #[error("oracle size limit exceeded: n = {n} > {limit}")]
    OracleTooLarge { n: u32, limit: u32 },

    #[error("site {site} out of range for n = {n}")]
    InvalidSite { site: u32, n: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
