use thiserror::Error;

/// Errors produced anywhere in the meshing, solve and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("raster is empty")]
    EmptyRaster,
    #[error("raster is not square: {width}x{height}")]
    NonSquare { width: usize, height: usize },
    #[error("pixel ({row}, {col}) has color {color} which is not in the palette")]
    UnknownColor { color: String, row: usize, col: usize },
    #[error("pixel index ({row}, {col}) out of range for a {width}x{width} grid")]
    IndexOutOfRange { row: usize, col: usize, width: usize },
    #[error("physical size must be positive, got {0}")]
    InvalidPhysicalSize(f64),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("palette: {0}")]
    Palette(String),
    #[error("phase {0} has no material assigned")]
    MissingMaterial(u32),
    #[error("invalid material{}: {reason}", phase.map(|p| format!(" for phase {p}")).unwrap_or_default())]
    InvalidMaterial { phase: Option<u32>, reason: String },
    #[error("degenerate element geometry (det J = {0})")]
    DegenerateElement(f64),
    #[error("periodic coupling requires a square domain")]
    NonSquareDomain,
    #[error("singular or indefinite system: {0}")]
    SingularSystem(String),
    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverBreakdown { residual: f64, iterations: usize },
    #[error("singular patch matrix ({samples} samples, {terms} terms)")]
    SingularPatch { samples: usize, terms: usize },
    #[error("patch for node {node} could not be resolved")]
    UnresolvablePatch { node: usize },
    #[error("recovered field is inconsistent: negative error integral {0:.3e}")]
    NegativeIntegral(f64),
    #[error("geometry mismatch between meshes: {0}")]
    GeometryMismatch(String),
    #[error("true error is zero; effectivity index undefined")]
    ZeroTrueError,
    #[error("homogenized tensor is not positive definite")]
    NotPositiveDefinite,
    #[error("field '{name}' has {got} entries, expected {expected}")]
    FieldLength { name: String, got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
