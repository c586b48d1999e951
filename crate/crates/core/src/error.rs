use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate lattice: omega3/omega1 = {tau} has (near) zero imaginary part")]
    DegenerateLattice { tau: Complex64 },

    #[error("point {x} lies within {radius:e} of the lattice point {nearest}")]
    PoleProximity {
        x: Complex64,
        nearest: Complex64,
        radius: f64,
    },

    #[error("branch consistency failure at {x}: square roots disagree by {defect:e}")]
    BranchConsistency { x: Complex64, defect: f64 },

    #[error("expressions belong to different lattices")]
    LatticeMismatch,

    #[error("division by the zero expression")]
    DivisionByZero,

    #[error("expression has odd s-parts and cannot be shifted by a half period")]
    UnsupportedOddPart,

    #[error("rational part has a pole at wp = {p}")]
    Pole { p: Complex64 },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid Heun parameters: {0}")]
    InvalidParams(String),

    #[error("dimension parameter d = {d} is not a non-negative integer; use the integral transformation for general d")]
    NonIntegerDimension { d: f64 },

    #[error("unsupported sign choice: {0}")]
    UnsupportedSign(String),

    #[error("invariant-space violation: residual {residual:e}")]
    InvarianceViolation { residual: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("path rejected near {point}: {reason}")]
    PathRejected { point: Complex64, reason: String },

    #[error("step size underflow at arclength {s} (h = {h:e})")]
    StepSizeUnderflow { s: f64, h: f64 },

    #[error("step budget of {budget} exhausted")]
    StepBudget { budget: usize },

    #[error("invalid coupling pair: {0}")]
    InvalidPair(String),

    #[error("contour crowding: {0}")]
    Crowding(String),

    #[error("inadmissible chain: {0}")]
    InadmissibleChain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
