//! Error type shared by all core operations.

use alloc::string::String;
use core::fmt;

/// Errors raised by tensor ops, the network, and the data synthesis helpers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two tensors (or a tensor and a parameter set) disagree on shape.
    /// Carries both shapes so the message names them.
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    /// A scalar parameter is outside its documented range.
    InvalidParam {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// Input content makes the operation meaningless (e.g. constant depth).
    DegenerateInput { context: &'static str },
    /// A gradient became non-finite during an optimizer step.
    NonFiniteGradient { param: String },
    /// The training loss became non-finite.
    NonFiniteLoss { epoch: usize, batch: usize },
    /// A scalar that must be finite was not.
    NonFiniteValue { context: &'static str },
    /// A weight store does not match the network configuration.
    LayerMismatch { layer: String, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(f, "{context}: expected shape {expected}, got {got}"),
            Error::InvalidParam {
                name,
                value,
                constraint,
            } => write!(f, "parameter {name} = {value} violates {constraint}"),
            Error::DegenerateInput { context } => write!(f, "degenerate input: {context}"),
            Error::NonFiniteGradient { param } => {
                write!(f, "non-finite gradient for parameter {param}")
            }
            Error::NonFiniteLoss { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::NonFiniteValue { context } => {
                write!(f, "non-finite value in {context}")
            }
            Error::LayerMismatch { layer, detail } => {
                write!(f, "layer {layer}: {detail}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
