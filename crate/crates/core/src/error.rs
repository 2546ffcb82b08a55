use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The kinetic energy does not cover the potential; the wave does not propagate.
    #[error("evanescent regime: {0}")]
    EvanescentRegime(String),

    #[error("total internal reflection: sin(theta2) = {sin_theta2} > 1")]
    TotalInternalReflection { sin_theta2: f64 },

    /// `1 + alpha_v (omega/n) dn/domega` vanishes, so the worldline would be vertical.
    #[error("degenerate dispersion: group-velocity denominator {denominator:e} is zero")]
    DegenerateDispersion { denominator: f64 },

    #[error("non-incident wave: k = {0} must be positive")]
    NonIncidentWave(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("region norm {norm:e} is too small for a centroid")]
    EmptyRegion { norm: f64 },

    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),

    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("unknown preset `{0}` (expected fig2, fig3 or fig4)")]
    UnknownPreset(String),

    #[error("degenerate field: reference density is zero")]
    DegenerateField,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EvanescentRegime(_) => "evanescent_regime",
            Error::TotalInternalReflection { .. } => "total_internal_reflection",
            Error::DegenerateDispersion { .. } => "degenerate_dispersion",
            Error::NonIncidentWave(_) => "non_incident_wave",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::EmptyRegion { .. } => "empty_region",
            Error::IllConditionedFit(_) => "ill_conditioned_fit",
            Error::Schema { .. } => "schema",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::DegenerateField => "degenerate_field",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit status: 2 config, 3 numerical domain, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } | Error::UnknownPreset(_) | Error::InvalidParameter(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
