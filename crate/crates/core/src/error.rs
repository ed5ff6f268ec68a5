use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree.
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// An argument is outside its valid range.
    Argument(String),
    /// A NaN or infinity would have been stored.
    NonFinite { op: &'static str },
    /// Training failed at the given (zero-based) epoch.
    Training { epoch: usize, reason: String },
    /// A network cannot be converted.
    Conversion { layer: usize, reason: String },
    /// Soft-reset bookkeeping drifted beyond floating-point rounding.
    ChargeConservation {
        layer: usize,
        neuron: usize,
        residual: f64,
        tolerance: f64,
    },
    /// Exhaustive enumeration would exceed the ordering budget.
    TooManyOrderings { orderings: u128, limit: u128 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite { op } => write!(f, "{op}: non-finite value produced"),
            Error::Training { epoch, reason } => {
                write!(f, "training failed at epoch {epoch}: {reason}")
            }
            Error::Conversion { layer, reason } => {
                write!(f, "cannot convert layer {layer}: {reason}")
            }
            Error::ChargeConservation {
                layer,
                neuron,
                residual,
                tolerance,
            } => write!(
                f,
                "charge conservation violated at layer {layer}, neuron {neuron}: \
                 residual {residual:e} exceeds rounding bound {tolerance:e}"
            ),
            Error::TooManyOrderings { orderings, limit } => write!(
                f,
                "{orderings} spike orderings exceed the enumeration limit of {limit}; \
                 use a sampling estimate instead"
            ),
        }
    }
}

impl core::error::Error for Error {}
