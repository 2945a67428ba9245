//! Linear (P1) shape functions on a tetrahedron.

use crate::error::{Error, Result};
use crate::geom::{tet_signed_volume, Vec3};
use crate::scalar::Real;

/// Affine map data of a tetrahedron: its vertices, volume and the constant
/// gradients of the four barycentric coordinates.
#[derive(Clone, Copy, Debug)]
pub struct P1Tet<T> {
    pub vertices: [Vec3<T>; 4],
    pub volume: T,
    pub gradients: [Vec3<T>; 4],
}

impl<T: Real> P1Tet<T> {
    /// Fails on (numerically) zero or negative volume.
    pub fn new(vertices: [Vec3<T>; 4]) -> Result<Self> {
        let [a, b, c, d] = vertices;
        let volume = tet_signed_volume(a, b, c, d);
        let scale = [b - a, c - a, d - a]
            .iter()
            .map(|e| e.norm())
            .fold(T::zero(), T::max);
        if !(volume > T::epsilon() * T::lit(16.0) * scale * scale * scale) {
            return Err(Error::DegenerateTet {
                volume: volume.to_f64_lossy(),
            });
        }
        let (e1, e2, e3) = (b - a, c - a, d - a);
        let det = volume * T::lit(6.0);
        let g1 = e2.cross(e3) * (T::one() / det);
        let g2 = e3.cross(e1) * (T::one() / det);
        let g3 = e1.cross(e2) * (T::one() / det);
        let g0 = -(g1 + g2 + g3);
        Ok(Self {
            vertices,
            volume,
            gradients: [g0, g1, g2, g3],
        })
    }

    /// Barycentric coordinates (values of the four hat functions) at `x`.
    #[inline]
    pub fn barycentric(&self, x: Vec3<T>) -> [T; 4] {
        // λ_i vanishes at every vertex other than i, in particular at vertex (i+1) % 4
        std::array::from_fn(|i| self.gradients[i].dot(x - self.vertices[(i + 1) % 4]))
    }

    /// Gradient of `Σ c_i λ_i`.
    pub fn gradient_of(&self, coefficients: [T; 4]) -> Vec3<T> {
        (0..4).map(|i| self.gradients[i] * coefficients[i]).sum()
    }

    pub fn evaluate(&self, coefficients: [T; 4], x: Vec3<T>) -> T {
        let l = self.barycentric(x);
        (0..4).map(|i| l[i] * coefficients[i]).sum()
    }
}
