use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The angular correlation is only known on the `phi = 0` and `theta = 180°` slices.
    #[error("unsupported detection geometry: theta = {theta_deg}°, phi = {phi_deg}° (g(θ, φ) is only known for φ = 0 or θ = 180°)")]
    UnsupportedGeometry { theta_deg: f64, phi_deg: f64 },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// The per-pair outcome distribution has a negative cell.
    #[error("inconsistent config: cell {cell} = {value:e} is negative{}", .delta_deg.map(|d| format!(" at setting difference {d}°")).unwrap_or_default())]
    InconsistentConfig {
        cell: String,
        value: f64,
        delta_deg: Option<f64>,
    },

    #[error("incomplete probability bundle: missing {0}")]
    IncompleteBundle(String),

    #[error("degenerate denominator: the (r, s) coincidence sum is zero")]
    DegenerateDenominator,

    #[error("invalid theorem instance: {0}")]
    InvalidInstance(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
