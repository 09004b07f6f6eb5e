use std::path::PathBuf;

/// Errors raised across the library.
///
/// Variants are split into input problems (bad files, bad arguments,
/// violated preconditions on user data) and computation problems
/// (numerical failure, degenerate datasets). The CLI maps the two groups
/// to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid language pair: {0}")]
    InvalidPair(String),
    #[error("unknown language code `{0}` for this pair")]
    UnknownLanguage(String),
    #[error("script tagging inapplicable: {0}")]
    ScriptTaggingInapplicable(String),
    #[error("utterance `{0}` has no token in either language")]
    AllOther(String),
    #[error("utterance `{0}` is not code-switched")]
    NotCodeSwitched(String),
    #[error("language mismatch: expected `{expected}`, found `{found}`")]
    LanguageMismatch { expected: String, found: String },
    #[error("no function-word lexicon for language `{0}`")]
    MissingLexicon(String),
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("missing posterior for utterance `{0}`")]
    MissingPosterior(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("no overlapping determined items between `{0}` and `{1}`")]
    NoOverlap(String, String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the data or arguments supplied by the caller.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::SingleClass | Error::NonFinite(_) | Error::NoOverlap(..)
        )
    }
}

/// Flushes an in-memory CSV writer into a string.
pub(crate) fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
