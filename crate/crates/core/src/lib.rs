//! Trace finite element discretization of the Laplace–Beltrami operator on
//! implicitly defined closed surfaces in 3D.
//!
//! A structured tetrahedral background mesh is cut by the zero level set of
//! the piecewise linear interpolant of `φ`. The P1 space on the cut ("active")
//! tetrahedra is restricted to the discrete surface and the resulting
//! bilinear forms are optionally stabilized, either by a full gradient term
//! on the active tets or by normal-gradient jumps over interior faces.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

pub mod assembly;
pub mod cut;
pub mod element;
pub mod error;
pub mod geom;
pub mod level_set;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod scalar;
pub mod solve;
pub mod spectrum;
pub mod sparse;
pub mod study;

pub use assembly::{FormRecipe, GradientForm, SparseSystem, Stabilization};
pub use cut::{CutPolygon, SurfaceCell};
pub use error::{Error, Result};
pub use geom::{Aabb, Mat3, Vec3};
pub use level_set::{ImplicitSurface, LevelSetFunction, SurfacePoint};
pub use manufactured::{ErrorNorms, ManufacturedProblem};
pub use mesh::{ActiveMesh, BoxMesh, InteriorFace};
pub use scalar::Real;
pub use solve::{CgOptions, SolveReport};
pub use spectrum::{SpectrumOptions, SpectrumReport};
pub use sparse::{CooMatrix, CsrMatrix};
pub use study::{ConvergenceConfig, ConvergenceRow, SweepConfig};

pub type Point = Vec3<f64>;
pub type Surface = ImplicitSurface<f64>;
pub type Mesh = BoxMesh<f64>;
pub type Matrix = CsrMatrix<f64>;
pub type Recipe = FormRecipe<f64>;
pub type System = SparseSystem<f64>;
