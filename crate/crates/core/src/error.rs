//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors raised by solver and model operations.
///
/// Model *validation* findings are not errors; see
/// [`crate::model::Violation`].
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument was built for a different stage than required.
    StageMismatch { expected: usize, got: usize },
    /// An index was outside the alphabet or table it addresses.
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    /// Pure-prescription enumeration would exceed the configured cap.
    EnumerationTooLarge { count: u128, cap: usize },
    /// The belief grid would exceed the configured cap.
    GridTooLarge { count: u128, cap: usize },
    /// No built-in game with this name.
    UnknownBuiltin(String),
    /// The operation needs one-sided CIB control (or some other structural
    /// property) that this model does not have.
    UnsupportedStructure(&'static str),
    /// A stage solve produced a non-finite intermediate value.
    NonFinite { stage: usize },
    /// Instance exceeds the size bounds of a brute-force oracle.
    SizeBounds(&'static str),
    /// A policy or table does not match the model it is used with.
    Mismatch(&'static str),
    /// A supplied probability vector is not a distribution.
    InvalidDistribution(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::StageMismatch { expected, got } => {
                write!(f, "stage mismatch: expected {expected}, got {got}")
            }
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::EnumerationTooLarge { count, cap } => {
                write!(f, "pure prescription count {count} exceeds cap {cap}")
            }
            Error::GridTooLarge { count, cap } => {
                write!(f, "belief grid size {count} exceeds cap {cap}")
            }
            Error::UnknownBuiltin(name) => write!(f, "unknown builtin game `{name}`"),
            Error::UnsupportedStructure(what) => write!(f, "unsupported structure: {what}"),
            Error::NonFinite { stage } => {
                write!(f, "non-finite value in stage {stage} solve")
            }
            Error::SizeBounds(what) => write!(f, "oracle size bounds exceeded: {what}"),
            Error::Mismatch(what) => write!(f, "mismatched arguments: {what}"),
            Error::InvalidDistribution(what) => write!(f, "invalid distribution: {what}"),
        }
    }
}

impl core::error::Error for Error {}
