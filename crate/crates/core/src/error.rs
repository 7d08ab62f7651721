use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("point ({x}, {y}) is within tolerance of an interface circle")]
    OnInterface { x: f64, y: f64 },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("invalid media: {0}")]
    InvalidMedia(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("map evaluated at its excluded point ({x}, {y})")]
    ExcludedPoint { x: f64, y: f64 },

    #[error("singular Jacobian (|det| = {det:e}) at ({x}, {y})")]
    SingularJacobian { x: f64, y: f64, det: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("mode {n}: matching matrix is singular (pivot ratio {pivot_ratio:e}); resonant mode")]
    ResonantMode { n: u32, pivot_ratio: f64 },

    #[error("missing modes in limit assembly: {0:?}")]
    MissingModes(Vec<u32>),

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("refused: {0}")]
    Refused(String),

    #[error("raster of {pixels} pixels exceeds the cap of {cap}")]
    RasterTooLarge { pixels: usize, cap: usize },

    #[error("parse: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
