use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An audio file uses an encoding we do not read (e.g. 24-bit PCM, ADPCM).
    #[error("{path}: unsupported wav encoding: {detail}")]
    WavEncoding { path: PathBuf, detail: String },

    /// Structurally broken wav data; `offset` is the byte position where
    /// parsing stopped making sense.
    #[error("{path}: malformed wav at byte {offset}: {detail}")]
    WavParse {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    /// A malformed row or header in a CSV input. `line` is 1-based.
    #[error("{path}:{line}: {detail}")]
    CsvParse {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    /// Two contours that must share a time base do not.
    #[error("contour alignment: {0}")]
    Alignment(String),

    /// A value outside the mathematical domain of an operation
    /// (non-positive frequency, empty input, out-of-range index, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// Invalid tracker or search configuration.
    #[error("config: {0}")]
    Config(String),

    /// The requested decay time cannot be realized for this room geometry.
    #[error(
        "infeasible room: requested t60 {requested} s, minimum achievable \
         for this geometry is {minimum} s"
    )]
    InfeasibleRoom { requested: f64, minimum: f64 },

    /// A batch-run step failed on a specific input file.
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }
}
