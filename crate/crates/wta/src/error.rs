use crate::semifield::Semifield;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("semifield mismatch: expected {expected}, got {found}")]
    SemifieldMismatch {
        expected: Semifield,
        found: Semifield,
    },

    #[error("inverse of zero in the {0} semifield")]
    InverseOfZero(Semifield),

    #[error("invalid {semifield} value: {message}")]
    InvalidValue {
        semifield: Semifield,
        message: String,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("symbol `{symbol}` has rank {expected} but {found} argument(s) were given")]
    RankMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },

    #[error("automaton is not deterministic")]
    NotDeterministic,

    #[error("automaton is not accessible: state `{0}` is unreachable")]
    NotAccessible(String),

    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for parse errors.
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
