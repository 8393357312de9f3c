use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands do not conform for the named operation.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// Shape extents do not multiply out to the number of values supplied.
    InvalidShape { shape: Vec<usize>, len: usize },
    /// `backward` was called on a tensor with more than one element.
    NonScalarLoss { shape: Vec<usize> },
    /// A configuration or argument is out of its valid range.
    InvalidConfig(String),
    /// An input that must be nonempty was empty.
    EmptyInput(&'static str),
    /// A loss term or its gradient became NaN or infinite.
    NonFinite { term: String },
    /// The two halves handed to the feature-critic loss differ in row count.
    UnequalPivotHalves { source: usize, target: usize },
    /// Labels contain a single class where both are required.
    SingleClass,
    /// A label lies outside `0..num_classes`.
    LabelOutOfRange { label: usize, num_classes: usize },
    /// An epoch observer failed (typically an IO failure in the caller).
    Observer(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: shape mismatch between {left:?} and {right:?}")
            }
            Error::InvalidShape { shape, len } => {
                write!(f, "shape {shape:?} does not hold {len} values")
            }
            Error::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::EmptyInput(what) => write!(f, "{what} must not be empty"),
            Error::NonFinite { term } => write!(f, "non-finite value in {term}"),
            Error::UnequalPivotHalves { source, target } => write!(
                f,
                "pivot halves differ in size: {source} source rows vs {target} target rows"
            ),
            Error::SingleClass => write!(f, "labels contain a single class; metric undefined"),
            Error::LabelOutOfRange { label, num_classes } => {
                write!(f, "label {label} outside 0..{num_classes}")
            }
            Error::Observer(msg) => write!(f, "epoch observer failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
