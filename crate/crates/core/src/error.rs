use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid volume density: {0}")]
    InvalidDensity(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("point {point:?} lies outside the chart")]
    OutOfDomain { point: Vec<f64> },
    #[error("invalid exponent p = {0} (need 1 <= p < inf)")]
    InvalidExponent(f64),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("field kind mismatch: {0}")]
    KindMismatch(String),
    #[error("region does not fit: {0}")]
    Region(String),
    #[error("step budget exceeded: {0}")]
    StepBudget(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("degenerate vector field: {0}")]
    DegenerateField(String),
    #[error("singular jacobian at {point:?} (det = {det:e})")]
    SingularJacobian { point: Vec<f64>, det: f64 },
    #[error("{clipped} node images left the chart (margin violation)")]
    MarginViolation { clipped: usize },
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("budget exhausted after {balls} balls; best achieved error {best:e}")]
    Budget { balls: usize, best: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
