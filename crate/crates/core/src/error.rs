use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input that produces a zero vector or an otherwise undefined object,
    /// e.g. an odd cat state with vanishing amplitude.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("integrator step size underflow at t = {time:e} s (h = {step:e} s)")]
    StepSizeUnderflow { time: f64, step: f64 },

    #[error("Fock truncation overflow: population {population:e} in the top two levels")]
    TruncationOverflow { population: f64 },

    #[error("cannot fit decay: {0}")]
    Fit(String),

    #[error("dispersive regime violated: {0}")]
    DispersiveRegime(String),

    #[error("{what} did not converge: {detail}")]
    NotConverged { what: &'static str, detail: String },

    #[error("no sign change of the rate difference in [{lo} km, {hi} km]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("missing fidelity for operation `{0}`")]
    MissingFidelity(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
