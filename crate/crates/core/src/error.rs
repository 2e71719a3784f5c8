use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input text. `offset` is a byte offset into the input when known.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Well-formed input of the wrong kind, e.g. a LineString where a Polygon was expected.
    #[error("type error: {0}")]
    Type(String),

    #[error("singular error matrix: group {group} is degenerate")]
    Degenerate { group: String },

    #[error("provider query #{index} failed after {attempts} attempts: {message}")]
    Adapter {
        index: usize,
        attempts: u32,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; wraps the underlying error with its stage and input.
    #[error("stage `{stage}` failed ({input}): {source}")]
    Stage {
        stage: &'static str,
        input: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse(offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error was caused by the caller's input or configuration
    /// rather than an internal failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_input_error(),
            Error::Adapter { .. } => false,
            _ => true,
        }
    }

    pub fn in_stage(self, stage: &'static str, input: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            input: input.into(),
            source: Box::new(self),
        }
    }
}

/// Converts a serde_json error into a parse error carrying a byte offset into `text`.
pub(crate) fn json_error(text: &str, err: &serde_json::Error) -> Error {
    Error::parse(byte_offset(text, err.line(), err.column()), err.to_string())
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_offsets_point_into_the_text() {
        let text = "{\n  \"a\": [1, 2,\n";
        let err = serde_json::from_str::<serde_json::Value>(text).unwrap_err();
        match json_error(text, &err) {
            Error::Parse { offset, .. } => assert!(offset <= text.len() && offset > 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
