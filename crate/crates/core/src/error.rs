use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed workload or calibration text.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("layer `{layer}`: invalid field `{field}`: {reason}")]
    InvalidLayer {
        layer: String,
        field: &'static str,
        reason: String,
    },

    #[error("layer `{layer}`: unsupported word-length {bits} bit")]
    UnsupportedWordLength { layer: String, bits: u32 },

    #[error("network `{0}` has no layers")]
    EmptyNetwork(String),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("invalid PE configuration: {0}")]
    InvalidPeConfig(String),

    #[error("operand out of range: {0}")]
    OperandOutOfRange(String),

    #[error("accumulator overflow: value {value} does not fit in {width} bit")]
    AccumulatorOverflow { value: i64, width: u32 },

    #[error("missing calibration entry: {0}")]
    MissingCalibration(String),

    #[error("invalid array dimensions: {0}")]
    InvalidDims(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no feasible design: {0}")]
    Infeasible(String),

    #[error("division by zero: {0}")]
    ZeroDenominator(&'static str),
}

impl Error {
    pub(crate) fn from_json(err: &serde_json::Error) -> Self {
        Error::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
