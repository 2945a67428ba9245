//! Quadrature on flat triangles, surface cells and tetrahedra.

use crate::element::P1Tet;
use crate::error::{Error, Result};
use crate::geom::{triangle_area, Vec3};
use crate::scalar::Real;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<Vec3<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn integrate(&self, f: impl Fn(Vec3<T>) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn measure(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Barycentric points and weights (summing to 1) on the reference triangle.
fn triangle_table(degree: u32) -> Result<&'static [([f64; 3], f64)]> {
    const CENTROID: [([f64; 3], f64); 1] = [([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];
    const MIDPOINTS: [([f64; 3], f64); 3] = [
        ([0.5, 0.5, 0.0], 1.0 / 3.0),
        ([0.0, 0.5, 0.5], 1.0 / 3.0),
        ([0.5, 0.0, 0.5], 1.0 / 3.0),
    ];
    // Dunavant degree-4 rule
    const A: f64 = 0.445_948_490_915_965;
    const WA: f64 = 0.223_381_589_678_011;
    const B: f64 = 0.091_576_213_509_771;
    const WB: f64 = 0.109_951_743_655_322;
    const SIX: [([f64; 3], f64); 6] = [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ];
    match degree {
        1 => Ok(&CENTROID),
        2 => Ok(&MIDPOINTS),
        4 => Ok(&SIX),
        d => Err(Error::UnsupportedDegree(d)),
    }
}

/// Rule on the flat triangle `(a, b, c)` exact for polynomials of `degree`
/// (1: centroid, 2: edge midpoints, 4: six points).
pub fn triangle_quadrature<T: Real>(tri: [Vec3<T>; 3], degree: u32) -> Result<QuadratureRule<T>> {
    let mut rule = QuadratureRule::default();
    push_triangle(&mut rule, tri, degree)?;
    Ok(rule)
}

pub(crate) fn push_triangle<T: Real>(
    rule: &mut QuadratureRule<T>,
    [a, b, c]: [Vec3<T>; 3],
    degree: u32,
) -> Result<()> {
    let area = triangle_area(a, b, c);
    for &(l, w) in triangle_table(degree)? {
        rule.points
            .push(a * T::lit(l[0]) + b * T::lit(l[1]) + c * T::lit(l[2]));
        rule.weights.push(area * T::lit(w));
    }
    Ok(())
}

/// Rule on a tetrahedron, degree 1 (centroid) or 2 (four points).
pub fn tet_quadrature<T: Real>(vertices: [Vec3<T>; 4], degree: u32) -> Result<QuadratureRule<T>> {
    let tet = P1Tet::new(vertices)?;
    let quarter = T::lit(0.25);
    match degree {
        1 => Ok(QuadratureRule {
            points: vec![vertices.iter().copied().sum::<Vec3<T>>() * quarter],
            weights: vec![tet.volume],
        }),
        2 => {
            let a = T::lit(0.585_410_196_624_968_5);
            let b = T::lit(0.138_196_601_125_010_5);
            let points = (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| vertices[j] * if i == j { a } else { b })
                        .sum()
                })
                .collect();
            Ok(QuadratureRule {
                points,
                weights: vec![tet.volume * quarter; 4],
            })
        }
        d => Err(Error::UnsupportedDegree(d)),
    }
}
