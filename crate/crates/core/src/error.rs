use thiserror::Error;

/// Errors shared across the simulator modules.
#[derive(Error, Debug)]
pub enum Error {
    /// A constructor was handed a geometry or parameter set that violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument was out of range or inconsistent with its peers.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The device power protocol was violated (e.g. reading a powered-off array,
    /// or a startup read on an array that is already on).
    #[error("device protocol violation: {0}")]
    Protocol(String),

    /// Bit vectors of mismatched lengths were combined.
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    /// Enrollment produced fewer stable cells than the requested ID length.
    #[error("enrollment deficit: {required} cells required, {available} available")]
    EnrollmentDeficit { required: usize, available: usize },

    /// A test was given an input shorter than its minimum.
    #[error("{test}: input of {got} bits is below the minimum of {min}")]
    InputTooShort {
        test: &'static str,
        got: usize,
        min: usize,
    },

    /// A debiasing pipeline consumed its block budget without producing output.
    #[error("pipeline starved: stage `{stage}` produced no output over {blocks} source blocks")]
    Starved { stage: String, blocks: usize },

    /// Malformed serialized input (bitstream files, descriptors).
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
