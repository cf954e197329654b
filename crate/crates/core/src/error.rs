use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("profile already has area >= 4pi (integral {integral}); no stretch needed")]
    AlreadyNormalized { integral: f64 },
    #[error("magnetic curvature not positive at m = {m} (min K_m = {min_km})")]
    KmNotPositive { m: f64, min_km: f64 },
    #[error("level I = {level} outside ({lo}, {hi})")]
    LevelOutOfRange { level: f64, lo: f64, hi: f64 },
    #[error("latitude at t = {t} has vanishing derivative of gamma")]
    Equator { t: f64 },
    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("trajectory reached the pole guard at t = {t}")]
    PoleProximity { t: f64 },
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("h = {h} <= 0: not a contact primitive")]
    NotContactPrimitive { h: f64 },
    #[error("symplecticity defect {defect:e}")]
    SymplecticDefect { defect: f64 },
    #[error("winding: {0}")]
    Winding(String),
    #[error("quaternion is not unit (norm {norm})")]
    NonUnit { norm: f64 },
    #[error("vector is not tangent to S^3 (inner product {dot:e})")]
    NotTangent { dot: f64 },
    #[error("knots too close (distance {distance:e})")]
    KnotsTooClose { distance: f64 },
    #[error("path resolution too coarse: {0}")]
    Resolution(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
