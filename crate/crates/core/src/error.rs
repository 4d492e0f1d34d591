use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible fields: {0}")]
    GridMismatch(String),

    #[error("invalid size: need n >= {min}, got {got}")]
    InvalidSize { min: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("matrix shape error: {0}")]
    Shape(String),

    #[error("coupling assumption violated: {0}")]
    Assumption(String),

    #[error("coupling graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate damping: b must be > 0, got {0}")]
    DegenerateDamping(f64),

    #[error("non-finite state at step {step} (t = {t}) in node {node}")]
    BlowUp { step: usize, t: f64, node: usize },

    #[error("time step {dt} exceeds stability bound {max_dt}")]
    Stability { dt: f64, max_dt: f64 },

    #[error(
        "invalid bracket: g_lo = {g_lo} (synchronized: {lo_sync}), g_hi = {g_hi} (synchronized: {hi_sync})"
    )]
    Bracket {
        g_lo: f64,
        lo_sync: bool,
        g_hi: f64,
        hi_sync: bool,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in single-line CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InvalidSize { .. } => "invalid_size",
            Error::InvalidParam(_) => "invalid_param",
            Error::Shape(_) => "shape",
            Error::Assumption(_) => "assumption_violation",
            Error::Disconnected { .. } => "connectivity",
            Error::Parse { .. } => "parse",
            Error::DegenerateDamping(_) => "degenerate_damping",
            Error::BlowUp { .. } => "blow_up",
            Error::Stability { .. } => "stability",
            Error::Bracket { .. } => "bracket",
            Error::InsufficientData(_) => "insufficient_data",
            Error::EmptyTrace => "empty_trace",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
