use crate::stepper::DiagnosticsRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("field belongs to a different domain than the transform plan or partner field")]
    DomainMismatch,

    #[error("grid shape {got:?} does not match padded grid {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("mode ({m}, {n}) outside truncation {mx}x{my}")]
    ModeOutOfRange {
        m: usize,
        n: usize,
        mx: usize,
        my: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Non-finite values appeared in the state. `records` holds the
    /// diagnostics collected before the failure, when available.
    #[error("solution blew up at t = {time}")]
    BlowUp {
        time: f64,
        records: Vec<DiagnosticsRecord>,
    },

    #[error("dissipativity condition r + pi*nu/|D| > beta/2 (|D|/pi + 1) fails (margin {margin})")]
    ConditionNotSatisfied { margin: f64 },

    #[error("epsilon = {epsilon} is not below the condition margin {margin}; alpha would be non-positive")]
    EpsilonTooLarge { epsilon: f64, margin: f64 },

    #[error("alpha = {0} is not positive; no Gronwall envelope exists")]
    NonPositiveAlpha(f64),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("decay rate {0} is not positive; periodic response is not unique")]
    NoDecay(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Format(String),
}
