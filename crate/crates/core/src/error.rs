use thiserror::Error;

/// Every failure the library can report.
///
/// [`Error::name`] gives the stable kebab-case identifier that the CLI prints
/// on stderr; the CLI maps variants to exit codes through [`Error::is_resource_limit`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource limit exceeded: {what} needs {requested}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty region: Hausdorff distance is undefined for an empty set")]
    EmptyRegion,

    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: &'static str },

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("point lies in the essential spectrum: distance {distance:.3e} to the symbol curve")]
    PointInEssentialSpectrum { distance: f64 },

    #[error("winding refinement did not converge within {cap} samples")]
    WindingNotResolved { cap: usize },

    #[error("gapless certificate: smallest |eigenvalue| {gap:.3e} is below the threshold")]
    GaplessCertificate { gap: f64 },

    #[error("no obstruction: certificate index is zero")]
    NoObstruction,
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::ResourceLimit { .. } => "resource-limit",
            Error::EmptyInput(_) => "empty-input",
            Error::EmptyRegion => "empty-region",
            Error::UnsupportedDimension { .. } => "unsupported-dimension",
            Error::InvalidWitness(_) => "invalid-witness",
            Error::PointInEssentialSpectrum { .. } => "point-in-essential-spectrum",
            Error::WindingNotResolved { .. } => "winding-not-resolved",
            Error::GaplessCertificate { .. } => "gapless-certificate",
            Error::NoObstruction => "no-obstruction",
        }
    }

    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::ResourceLimit { .. } | Error::WindingNotResolved { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
