use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network shape: {0}")]
    InvalidShape(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sensor index {index} out of range for {n_sensors} sensors")]
    IndexOutOfRange { index: usize, n_sensors: usize },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("projected noise covariance is singular: invalid projector/noise pair")]
    SingularProjectedCovariance,

    #[error("constraint does not identify the model")]
    ConstraintNotIdentifying,

    #[error("no constraint needed: Fisher information has full rank")]
    NoConstraintNeeded,

    #[error("degenerate Fisher information: nothing is identifiable")]
    DegenerateFisher,

    #[error("unidentifiable: constraint does not complete the model")]
    Unidentifiable,

    #[error("feasible projection undefined: constraint gradient is orthogonal to the common mode")]
    ProjectionUndefined,

    #[error("empty estimate collection")]
    EmptyCollection,

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures caused by singular or ill-posed linear systems, as
    /// opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularProjectedCovariance
                | Error::ConstraintNotIdentifying
                | Error::DegenerateFisher
                | Error::Unidentifiable
                | Error::ProjectionUndefined
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
