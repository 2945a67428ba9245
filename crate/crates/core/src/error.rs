use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closest-point projection did not converge after {iterations} iterations (last iterate {last:?}, |phi| = {residual:e})")]
    DivergedProjection {
        iterations: usize,
        last: [f64; 3],
        residual: f64,
    },

    #[error("level-set gradient degenerate at {at:?}: |grad phi| = {norm:e} < {threshold:e}")]
    DegenerateGradient {
        at: [f64; 3],
        norm: f64,
        threshold: f64,
    },

    #[error("surface does not intersect the background mesh")]
    SurfaceOutsideMesh,

    #[error("surface crosses the mesh boundary (vertex {vertex} has value {value:e}); enlarge the box")]
    SurfaceNotContained { vertex: usize, value: f64 },

    #[error("level-set value exactly zero at a tetrahedron vertex; values must be snapped first")]
    UnsnappedZero,

    #[error("degenerate tetrahedron (volume {volume:e})")]
    DegenerateTet { volume: f64 },

    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(u32),

    #[error("surface cell refers to tetrahedron {0} which is not active")]
    CellNotActive(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive semidefinite (curvature {curvature:e} at iteration {iteration})")]
    NotPositiveSemidefinite { iteration: usize, curvature: f64 },

    #[error("all eigenvalues are below the zero threshold")]
    ZeroMatrix,

    #[error("kernel mismatch: {detected} additional near-zero eigenvalues after deflating the known kernel")]
    KernelMismatch { detected: usize },

    #[error("dense path limited to n <= {limit}, got n = {n}")]
    TooLargeForDense { n: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps the error with a stage tag, e.g. `"level 3 / solve"`.
    pub fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error below any stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage<S: Into<String>>(self, stage: impl FnOnce() -> S) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage<S: Into<String>>(self, stage: impl FnOnce() -> S) -> Result<T> {
        self.map_err(|e| e.at_stage(stage()))
    }
}
