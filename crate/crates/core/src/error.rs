use alloc::string::String;
use core::fmt;

/// Which adversarial player an error or update refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Hedger,
    Generator,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Hedger => f.write_str("hedger"),
            Player::Generator => f.write_str("generator"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported primitive `{0}`")]
    Unsupported(String),
    #[error("primitive `{op}` expects {expected} argument(s), got {got}")]
    Arity {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("domain error in `{op}` at node {node:?}: argument {value}")]
    Domain {
        op: &'static str,
        node: Option<usize>,
        value: f64,
    },
    #[error("tape has no output node; call `finalize` first")]
    NotFinalized,
    #[error("non-finite gradient for parameter {param}")]
    NonFiniteGradient { param: String },
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("non-finite {player} update at cycle {cycle}: {detail}")]
    NonFiniteUpdate {
        player: Player,
        cycle: usize,
        detail: String,
    },
    #[error("generator emitted a non-finite price at step {step}")]
    NonFiniteEmission { step: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        detail: detail.into(),
    }
}
