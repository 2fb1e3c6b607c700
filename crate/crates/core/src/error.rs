use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {expected:?} vs {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("fixation ({x}, {y}) outside {width}x{height} frame")]
    OutOfFrame {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("empty fixation set")]
    EmptyFixations,
    #[error("degenerate prediction: {0}")]
    DegeneratePrediction(String),
    #[error("non-positive value in probability map")]
    NonPositiveDensity,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("map {got:?} too small for {layers}-layer extractor")]
    MapTooSmall { got: (usize, usize), layers: usize },
    #[error("term `{term}` failed: {source}")]
    Term {
        term: String,
        #[source]
        source: Box<Error>,
    },
    #[error("term `{0}` requires a feature extractor")]
    MissingExtractor(String),
    #[error("term `{0}` requires a fixation set")]
    MissingFixations(String),
    #[error("center-bias term requires a bias map")]
    MissingCenterBias,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("bad combination spec: {0}")]
    ParseSpec(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("optimization diverged at iteration {iteration}")]
    Diverged { iteration: usize, trace: Vec<f64> },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the combination term it came from.
    pub fn in_term(self, term: impl Into<String>) -> Self {
        Error::Term {
            term: term.into(),
            source: Box::new(self),
        }
    }
}
