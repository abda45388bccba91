use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedInput { line: u64, message: String },

    #[error("line {line}: non-positive price {value} for {symbol}")]
    NonPositivePrice {
        line: u64,
        symbol: String,
        value: f64,
    },

    #[error("line {line}: duplicate date {date} for {symbol}")]
    DuplicateDate {
        line: u64,
        symbol: String,
        date: NaiveDate,
    },

    #[error("series {symbol} has fewer than two observations")]
    EmptySeries { symbol: String },

    #[error("series {symbol} has {len} observations, at least 2 required")]
    SeriesTooShort { symbol: String, len: usize },

    #[error("series {symbol}: {message}")]
    InvalidSeries { symbol: String, message: String },

    #[error("unknown symbol {0}")]
    UnknownSymbol(String),

    #[error("duplicate symbol {0}")]
    DuplicateSymbol(String),

    #[error("series {symbol} is {found}, expected {expected}")]
    KindMismatch {
        symbol: String,
        expected: String,
        found: String,
    },

    #[error("no series supplied")]
    EmptyPanel,

    #[error("sequence lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("{len} samples, at least {required} required")]
    TooFewSamples { len: usize, required: usize },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("pair ({a}, {b}) overlaps on {overlap} observations, {required} required")]
    InsufficientOverlap {
        a: String,
        b: String,
        overlap: usize,
        required: usize,
    },

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: String, value: f64 },

    #[error("{len} points, at least {required} required")]
    TooFewPoints { len: usize, required: usize },

    #[error("degenerate neighborhood around x = {0}")]
    DegenerateNeighborhood(f64),

    #[error("duplicate abscissa x = {0}")]
    DuplicateAbscissa(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no finite smoothed value")]
    AllUndefined,

    #[error("matrix has {0} assets, at least 2 required")]
    MatrixTooSmall(usize),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("trees span different symbol sets")]
    SymbolSetMismatch,

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("singular regression design: {0}")]
    SingularDesign(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error after stripping context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
