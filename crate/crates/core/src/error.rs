use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch { op: &'static str, left_rows: usize, left_cols: usize, right_rows: usize, right_cols: usize },

    #[error("32-bit accumulator overflow at row {row}, column {col}")]
    Overflow { row: usize, col: usize },

    #[error("value {value} does not fit a {bits}-bit signed field")]
    ValueOutOfRange { value: i64, bits: u32 },

    #[error("invalid fixed-point format: {0}")]
    InvalidFormat(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("column {col} out of range for tile width {width}")]
    ColumnOutOfRange { col: usize, width: usize },

    #[error("malformed stream: {0}")]
    Stream(#[from] StreamError),

    #[error("bank conflict in cycle {cycle}, replica group {group}: bank {bank} asked for rows {first} and {second}")]
    Arbitration { cycle: usize, group: usize, bank: usize, first: usize, second: usize },

    #[error("schedule does not match its operands: {0}")]
    ScheduleMismatch(String),

    #[error("{source_name}:{line}: {msg}")]
    Parse { source_name: String, line: usize, msg: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    VersionMismatch(u16),
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("header field out of range: {0}")]
    BadHeader(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
