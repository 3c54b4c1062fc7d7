use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by all simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("spectral grid too coarse: spacing {spacing_mhz} MHz does not resolve {required_mhz} MHz")]
    GridTooCoarse { spacing_mhz: f64, required_mhz: f64 },

    #[error("pump sweep [{lo_mhz}, {hi_mhz}] MHz addresses no transition inside the grid window")]
    SweepOutsideGrid { lo_mhz: f64, hi_mhz: f64 },

    #[error("grid window too narrow: optical depth steps by {jump} between the window edges")]
    WindowTooNarrow { jump: f64 },

    #[error("no periodic comb structure detected: {0}")]
    NoCombStructure(String),

    #[error("field bandwidth exceeds the grid window ({field_mhz} MHz vs {window_mhz} MHz)")]
    FieldOutsideWindow { field_mhz: f64, window_mhz: f64 },

    #[error("aliasing detected: {frac:.3e} of the output energy sits in the last 5% of the time record")]
    Aliasing { frac: f64 },

    #[error("analysis window [{lo_us}, {hi_us}] µs overlaps the input pulse support")]
    WindowOverlapsInput { lo_us: f64, hi_us: f64 },

    #[error("Bloch integration unstable: state norm drifted by {drift:.3e}")]
    NormDrift { drift: f64 },

    #[error("noise anchors are infeasible: {0}")]
    InfeasibleAnchors(String),

    #[error("noise model is not calibrated")]
    Uncalibrated,

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("root bracketing failed: {0}")]
    NoBracket(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
