//! Intersection of active tetrahedra with the zero set of the piecewise
//! linear level set, giving the flat facets `K = Γ_h ∩ T` of the discrete surface.

use std::io::Write;

use crate::element::P1Tet;
use crate::error::{Error, Result};
use crate::geom::{triangle_area, Vec3};
use crate::mesh::ActiveMesh;
use crate::quadrature::{push_triangle, QuadratureRule};
use crate::scalar::Real;

/// Planar triangle or quadrilateral where a linear function vanishes in a tet.
#[derive(Clone, Debug, PartialEq)]
pub struct CutPolygon<T> {
    /// Vertices ordered counter-clockwise around `normal`.
    pub points: Vec<Vec3<T>>,
    /// Fan triangulation into one or two triangles.
    pub triangles: Vec<[usize; 3]>,
    pub area: T,
    /// Unit normal along the gradient of the linear interpolant.
    pub normal: Vec3<T>,
}

impl<T: Real> CutPolygon<T> {
    pub fn triangle(&self, i: usize) -> [Vec3<T>; 3] {
        self.triangles[i].map(|k| self.points[k])
    }

    pub fn centroid(&self) -> Vec3<T> {
        let n = T::from_usize_lossy(self.points.len());
        self.points.iter().copied().sum::<Vec3<T>>() * (T::one() / n)
    }
}

/// Facet of `Γ_h` inside one active tet.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceCell<T> {
    /// Global index of the background tet.
    pub parent_tet: usize,
    /// Index of the parent tet in [`ActiveMesh::active_tets`].
    pub active_index: usize,
    pub cut: CutPolygon<T>,
}

impl<T: Real> SurfaceCell<T> {
    pub fn area(&self) -> T {
        self.cut.area
    }

    pub fn normal(&self) -> Vec3<T> {
        self.cut.normal
    }
}

/// Zero set of the linear interpolant of `values` on the tet `coords`.
///
/// Edge points are interpolated from the negative to the positive endpoint,
/// so neighbouring tets reproduce shared points bit for bit. Quadrilaterals
/// are split along the shorter diagonal (the 0–2 diagonal on ties).
pub fn cut_tet<T: Real>(coords: [Vec3<T>; 4], values: [T; 4]) -> Result<Option<CutPolygon<T>>> {
    if values.iter().any(|v| *v == T::zero()) {
        return Err(Error::UnsnappedZero);
    }
    let neg: Vec<usize> = (0..4).filter(|&i| values[i] < T::zero()).collect();
    let pos: Vec<usize> = (0..4).filter(|&i| values[i] > T::zero()).collect();
    if neg.is_empty() || pos.is_empty() {
        return Ok(None);
    }
    let tet = P1Tet::new(coords)?;
    let normal = tet
        .gradient_of(values)
        .normalized()
        .ok_or(Error::DegenerateTet { volume: tet.volume.to_f64_lossy() })?;

    let mut points = Vec::with_capacity(4);
    for &i in &neg {
        for &j in &pos {
            let t = values[i] / (values[i] - values[j]);
            points.push(coords[i] + (coords[j] - coords[i]) * t);
        }
    }

    let triangles = if points.len() == 3 {
        if (points[1] - points[0]).cross(points[2] - points[0]).dot(normal) < T::zero() {
            points.swap(1, 2);
        }
        vec![[0, 1, 2]]
    } else {
        sort_ccw(&mut points, normal);
        if (points[0] - points[2]).norm() <= (points[1] - points[3]).norm() {
            vec![[0, 1, 2], [0, 2, 3]]
        } else {
            vec![[1, 2, 3], [1, 3, 0]]
        }
    };
    let area = triangles
        .iter()
        .map(|t| triangle_area(points[t[0]], points[t[1]], points[t[2]]))
        .sum();
    Ok(Some(CutPolygon {
        points,
        triangles,
        area,
        normal,
    }))
}

/// Orders coplanar points by angle around their centroid, counter-clockwise about `normal`.
fn sort_ccw<T: Real>(points: &mut [Vec3<T>], normal: Vec3<T>) {
    let n = T::from_usize_lossy(points.len());
    let c = points.iter().copied().sum::<Vec3<T>>() * (T::one() / n);
    let e1 = (points[0] - c).reject(normal).normalized().unwrap_or_else(|| {
        let helper = if normal.x.abs() < T::lit(0.9) { Vec3::unit(0) } else { Vec3::unit(1) };
        normal.cross(helper).normalized().expect("non-parallel helper")
    });
    let e2 = normal.cross(e1);
    let angle = |p: Vec3<T>| {
        let d = p - c;
        let a = d.dot(e2).atan2(d.dot(e1));
        if a < T::zero() {
            a + T::PI() + T::PI()
        } else {
            a
        }
    };
    points.sort_by(|a, b| angle(*a).partial_cmp(&angle(*b)).expect("finite angles"));
}

/// One surface cell per active tet, in active-tet order.
pub fn extract_surface_cells<T: Real>(active: &ActiveMesh<'_, T>) -> Result<Vec<SurfaceCell<T>>> {
    let mut cells = Vec::with_capacity(active.n_active_tets());
    for (l, &t) in active.active_tets().iter().enumerate() {
        if let Some(cut) = cut_tet(active.tet_coords(l), active.tet_values(l))? {
            cells.push(SurfaceCell {
                parent_tet: t,
                active_index: l,
                cut,
            });
        }
    }
    Ok(cells)
}

/// Surface quadrature of `degree` (1, 2 or 4) over the triangles of a cell.
pub fn surface_quadrature<T: Real>(cell: &CutPolygon<T>, degree: u32) -> Result<QuadratureRule<T>> {
    let mut rule = QuadratureRule::default();
    for i in 0..cell.triangles.len() {
        push_triangle(&mut rule, cell.triangle(i), degree)?;
    }
    Ok(rule)
}

pub fn total_area<T: Real>(cells: &[SurfaceCell<T>]) -> T {
    cells.iter().map(|c| c.area()).sum()
}

/// Plain-text dump of surface cells, one per line:
/// `parent_tet area nx ny nz npoints x0 y0 z0 x1 y1 z1 ...`.
pub fn write_cells<T: Real>(cells: &[SurfaceCell<T>], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "# parent_tet area nx ny nz npoints x0 y0 z0 ...")?;
    for c in cells {
        let [nx, ny, nz] = c.normal().to_f64();
        write!(
            w,
            "{} {:.17e} {nx:.17e} {ny:.17e} {nz:.17e} {}",
            c.parent_tet,
            c.area().to_f64_lossy(),
            c.cut.points.len()
        )?;
        for p in &c.cut.points {
            let [x, y, z] = p.to_f64();
            write!(w, " {x:.17e} {y:.17e} {z:.17e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
