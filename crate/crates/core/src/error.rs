use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid torus: {0}")]
    InvalidSpec(String),

    #[error("kernel specs differ: {0} vs {1}")]
    SpecMismatch(String, String),

    #[error("massless Green function undefined on torus")]
    MasslessUndefined,

    #[error("invalid direction {0} for dimension {1}")]
    BadDirection(i32, usize),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("unknown window family `{0}`")]
    UnknownWindow(String),

    #[error("memory budget exceeded: need {need} bytes, budget {budget}")]
    MemoryBudget { need: u64, budget: u64 },

    #[error("scale {j} out of range (valid {lo}..={hi})")]
    ScaleOutOfRange { j: usize, lo: usize, hi: usize },

    #[error("too few usable scales: {0} (need at least 3)")]
    TooFewScales(usize),

    #[error("beta limit requires m2 = 0, got {0}")]
    NotMassless(f64),

    #[error("outside invertibility ball: {0}")]
    OutsideBall(String),

    #[error("flow left perturbative regime at scale {j}: |{coord}| = {value:e}")]
    Divergence { j: usize, coord: &'static str, value: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
