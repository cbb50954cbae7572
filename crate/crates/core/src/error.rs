use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {lambda_um} µm is below the Sellmeier validity bound λ_min = {bound_um} µm")]
    BelowValidity { lambda_um: f64, bound_um: f64 },

    #[error("wavelength {lambda_um} µm is above the Sellmeier validity bound λ_max = {bound_um} µm")]
    AboveValidity { lambda_um: f64, bound_um: f64 },

    #[error("total internal reflection at the exit face (n·sin θ = {0})")]
    TotalInternalReflection(f64),

    #[error(
        "no phase matching for internal angles {from_deg}°..{to_deg}° \
         (residual range {min_residual:.6e}..{max_residual:.6e} µm⁻¹)"
    )]
    NoPhaseMatching {
        from_deg: f64,
        to_deg: f64,
        min_residual: f64,
        max_residual: f64,
    },

    #[error("emission cones do not intersect: {0}")]
    NoConeIntersection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("accidental rate {accidentals} s⁻¹ is not below the mean coincidence rate {mean} s⁻¹")]
    AccidentalsExceedSignal { accidentals: f64, mean: f64 },

    #[error("invalid crystal data: {0}")]
    CrystalData(String),

    #[error("line {line}: {message}")]
    Record { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from bad input or configuration rather than
    /// from a computation that failed on valid input.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::CrystalData(_)
                | Error::Record { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
