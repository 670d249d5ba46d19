//! Crate-wide error type.
//!
//! Every fallible public API returns [`DygppError`]. The variants are grouped
//! by how the CLI reports them: usage problems, malformed or inconsistent
//! data, numeric failures during training, and gradient-check failures.

use thiserror::Error;

/// Unified error type for the dygpp crate.
#[derive(Debug, Error)]
pub enum DygppError {
    /// Bad command-line usage, unknown config keys, out-of-range options.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed input files or internally inconsistent data.
    #[error("data error: {0}")]
    Data(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A non-finite value surfaced where a finite number is required.
    #[error("numeric error: non-finite value in {context}")]
    NonFinite { context: String },

    /// Checkpoint bytes do not describe a loadable parameter set.
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    /// Checkpoint parameter shape differs from what the model expects.
    #[error("checkpoint shape mismatch for `{name}`: expected {expected_rows}x{expected_cols}, found {found_rows}x{found_cols}")]
    CheckpointShape {
        name: String,
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    /// Analytic and finite-difference gradients disagree beyond tolerance.
    #[error("gradient check failed: block `{block}` max relative error {max_rel_err:.3e} exceeds {tolerance:.3e}")]
    GradCheck {
        block: String,
        max_rel_err: f64,
        tolerance: f64,
    },
}

impl DygppError {
    /// Process exit code the CLI maps this error to.
    ///
    /// 0 is success; 1 usage; 2 data/io; 3 numeric; 4 gradient check.
    pub fn exit_code(&self) -> i32 {
        match self {
            DygppError::Usage(_) => 1,
            DygppError::Data(_) | DygppError::Io { .. } => 2,
            DygppError::CheckpointFormat(_) | DygppError::CheckpointShape { .. } => 2,
            DygppError::NonFinite { .. } => 3,
            DygppError::GradCheck { .. } => 4,
        }
    }

    /// Convenience constructor for I/O errors tagged with the offending path.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DygppError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, DygppError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_by_category() {
        assert_eq!(DygppError::Usage("x".into()).exit_code(), 1);
        assert_eq!(DygppError::Data("x".into()).exit_code(), 2);
        assert_eq!(
            DygppError::io("f", std::io::Error::new(std::io::ErrorKind::NotFound, "gone"))
                .exit_code(),
            2
        );
        assert_eq!(
            DygppError::NonFinite {
                context: "p".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(
            DygppError::GradCheck {
                block: "b".into(),
                max_rel_err: 1.0,
                tolerance: 1e-4
            }
            .exit_code(),
            4
        );
    }

    #[test]
    fn messages_name_the_offender() {
        let e = DygppError::CheckpointShape {
            name: "proj_weight".into(),
            expected_rows: 4,
            expected_cols: 2,
            found_rows: 3,
            found_cols: 2,
        };
        let msg = e.to_string();
        assert!(msg.contains("proj_weight"));
        assert!(msg.contains("4x2"));
        assert!(msg.contains("3x2"));
    }
}
