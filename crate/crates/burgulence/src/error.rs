use thiserror::Error;

/// Errors produced by the solver and statistics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two >= 4")]
    GridSize(usize),

    #[error("grid mean {mean:.3e} exceeds the zero-mean tolerance {tol:.3e}")]
    NonzeroMean { mean: f64, tol: f64 },

    #[error("grid of {n} points cannot carry modes up to k = {truncation} (need n >= {needed})")]
    Resolution {
        n: usize,
        truncation: usize,
        needed: usize,
    },

    #[error("spectral truncation must be >= 1")]
    EmptyTruncation,

    #[error("L_p exponent must be positive and finite, got {0}")]
    InvalidExponent(f64),

    #[error("viscosity must be positive, got {0}")]
    NonpositiveViscosity(f64),

    #[error("wavenumber must be nonzero")]
    ZeroWavenumber,

    #[error("time step {dt:.3e} violates the bound {bound:.3e} ({what})")]
    StepSize { dt: f64, bound: f64, what: String },

    #[error("solution blew up at t = {t:.6} (dt = {dt:.3e}); likely a CFL breach")]
    BlowUp { t: f64, dt: f64 },

    #[error("forcing band extends to |s| = {s_max}, beyond the active truncation {k_active}")]
    ForcingBand { s_max: usize, k_active: usize },

    #[error("initial data too rough: grid under-resolves the heat kernel seed (n = {n})")]
    OracleResolution { n: usize },

    #[error("stream samples [{t_first:.3}, {t_last:.3}] do not cover the window [{lo:.3}, {hi:.3}]")]
    WindowCoverage {
        t_first: f64,
        t_last: f64,
        lo: f64,
        hi: f64,
    },

    #[error("averaging window: need t_start >= 1 and sigma >= {sigma_min}, got t_start = {t_start}, sigma = {sigma}")]
    WindowSpec {
        t_start: f64,
        sigma: f64,
        sigma_min: f64,
    },

    #[error("shift {l} is not an integer multiple of the grid spacing 1/{n}")]
    ShiftAlignment { l: f64, n: usize },

    #[error("layer [{lo}, {hi}] exceeds the spectral truncation {truncation}")]
    LayerRange { lo: usize, hi: usize, truncation: usize },

    #[error("power-law fit needs >= {min} strictly positive points inside the window, found {found}")]
    FitDomain { min: usize, found: usize },

    #[error("no spectral breakpoint found below k = {k_max}; spectrum under-resolved")]
    NoBreakpoint { k_max: usize },

    #[error("time grids misaligned: |{a:.6} - {b:.6}| > {tol:.3e}")]
    TimeAlignment { a: f64, b: f64, tol: f64 },

    #[error("observable {0} was not recorded for this stream")]
    MissingProbe(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
