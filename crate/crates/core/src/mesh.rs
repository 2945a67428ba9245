//! Structured tetrahedral background mesh of a box, level-set interpolation and
//! extraction of the active mesh (tetrahedra cut by the discrete surface).

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geom::{tet_signed_volume, Aabb, Vec3};
use crate::level_set::ImplicitSurface;
use crate::scalar::Real;

/// Kuhn split of the unit cube: corner bitmask (bit 0 = x, 1 = y, 2 = z) of
/// the four vertices of each tet, ordered for positive volume. All six tets
/// share the diagonal 0 → 7, which makes the split conforming across cells.
const KUHN: [[usize; 4]; 6] = kuhn_table();

const fn kuhn_table() -> [[usize; 4]; 6] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];
    let mut out = [[0usize; 4]; 6];
    let mut i = 0;
    while i < 6 {
        let [a, b, _] = PERMS[i];
        let v1 = 1 << a;
        let v2 = v1 | (1 << b);
        // odd permutations (last three) get two vertices swapped
        out[i] = if i < 3 { [0, v1, v2, 7] } else { [0, v2, v1, 7] };
        i += 1;
    }
    out
}

/// Structured mesh of an axis-aligned box, each cell split into six tets.
///
/// Tets and vertices are generated on demand from their indices; tet `t`
/// lives in cell `t / 6`.
#[derive(Clone, Debug)]
pub struct BoxMesh<T> {
    bounds: Aabb<T>,
    n_cells: [usize; 3],
    spacing: Vec3<T>,
    h: T,
}

impl<T: Real> BoxMesh<T> {
    pub fn new(bounds: Aabb<T>, n_cells: [usize; 3]) -> Result<Self> {
        if n_cells.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig(format!("n_cells must be >= 1, got {n_cells:?}")));
        }
        if bounds.is_degenerate() {
            return Err(Error::InvalidConfig("degenerate mesh bounds".into()));
        }
        let e = bounds.extent();
        let spacing = Vec3::new(
            e.x / T::from_usize_lossy(n_cells[0]),
            e.y / T::from_usize_lossy(n_cells[1]),
            e.z / T::from_usize_lossy(n_cells[2]),
        );
        Ok(Self {
            bounds,
            n_cells,
            spacing,
            // longest edge of a Kuhn tet is the cell diagonal
            h: spacing.norm(),
        })
    }

    /// Uniform `n³` mesh of `[-a, a]³`.
    pub fn cube(half_width: T, n: usize) -> Result<Self> {
        Self::new(Aabb::cube(half_width), [n; 3])
    }

    pub fn bounds(&self) -> Aabb<T> {
        self.bounds
    }

    pub fn n_cells(&self) -> [usize; 3] {
        self.n_cells
    }

    /// Cell widths along each axis.
    pub fn spacing(&self) -> Vec3<T> {
        self.spacing
    }

    /// Mesh size: longest tet edge.
    pub fn h(&self) -> T {
        self.h
    }

    /// Shortest tet edge.
    pub fn min_edge(&self) -> T {
        self.spacing.x.min(self.spacing.y).min(self.spacing.z)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_cells.iter().map(|n| n + 1).product()
    }

    pub fn n_cells_total(&self) -> usize {
        self.n_cells.iter().product()
    }

    pub fn n_tets(&self) -> usize {
        6 * self.n_cells_total()
    }

    #[inline]
    pub fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.n_cells;
        i + (nx + 1) * (j + (ny + 1) * k)
    }

    #[inline]
    pub fn vertex_ijk(&self, v: usize) -> [usize; 3] {
        let [nx, ny, _] = self.n_cells;
        let i = v % (nx + 1);
        let r = v / (nx + 1);
        [i, r % (ny + 1), r / (ny + 1)]
    }

    #[inline]
    pub fn vertex(&self, v: usize) -> Vec3<T> {
        let [i, j, k] = self.vertex_ijk(v);
        Vec3::new(
            self.bounds.min.x + T::from_usize_lossy(i) * self.spacing.x,
            self.bounds.min.y + T::from_usize_lossy(j) * self.spacing.y,
            self.bounds.min.z + T::from_usize_lossy(k) * self.spacing.z,
        )
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vec3<T>> + '_ {
        (0..self.n_vertices()).map(|v| self.vertex(v))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let ijk = self.vertex_ijk(v);
        (0..3).any(|a| ijk[a] == 0 || ijk[a] == self.n_cells[a])
    }

    /// The eight corner vertices of cell `c`, indexed by corner bitmask.
    #[inline]
    pub fn cell_corners(&self, c: usize) -> [usize; 8] {
        let [nx, ny, _] = self.n_cells;
        let i = c % nx;
        let j = (c / nx) % ny;
        let k = c / (nx * ny);
        std::array::from_fn(|b| self.vertex_index(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)))
    }

    #[inline]
    pub fn tet(&self, t: usize) -> [usize; 4] {
        let corners = self.cell_corners(t / 6);
        KUHN[t % 6].map(|b| corners[b])
    }

    pub fn tets(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        (0..self.n_tets()).map(|t| self.tet(t))
    }

    #[inline]
    pub fn tet_coords(&self, t: usize) -> [Vec3<T>; 4] {
        self.tet(t).map(|v| self.vertex(v))
    }

    pub fn tet_volume(&self, t: usize) -> T {
        let [a, b, c, d] = self.tet_coords(t);
        tet_signed_volume(a, b, c, d)
    }

    /// Nodal values `φ(x_i)` of the level set. Values with `|φ| < snap_tol`
    /// (`snap_tol = 1e-10 h`) are moved to `±snap_tol`, zero going to `+snap_tol`.
    pub fn interpolate_levelset(&self, surface: &ImplicitSurface<T>) -> Vec<T> {
        let snap = self.snap_tol();
        self.vertices()
            .map(|x| snap_value(surface.value(x), snap))
            .collect()
    }

    pub fn snap_tol(&self) -> T {
        T::tol_floor(1e-10) * self.h
    }
}

#[inline]
fn snap_value<T: Real>(v: T, snap: T) -> T {
    if v.abs() >= snap {
        v
    } else if v < T::zero() {
        -snap
    } else {
        snap
    }
}

/// Face shared by two active tets. `plus` and `minus` index into
/// [`ActiveMesh::active_tets`]; `vertices` are global vertex ids, ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorFace {
    pub plus: usize,
    pub minus: usize,
    pub vertices: [usize; 3],
}

/// Tetrahedra of the background mesh on which the interpolated level set
/// changes sign, with their interior faces and a dof numbering of their vertices.
#[derive(Clone, Debug)]
pub struct ActiveMesh<'m, T> {
    mesh: &'m BoxMesh<T>,
    active_tets: Vec<usize>,
    tet_dofs: Vec<[usize; 4]>,
    interior_faces: Vec<InteriorFace>,
    active_vertices: Vec<usize>,
    dof_of_vertex: HashMap<usize, usize>,
    vertex_values: Vec<T>,
}

fn sign_split<T: Real>(vals: impl IntoIterator<Item = T>) -> bool {
    let (mut pos, mut neg) = (false, false);
    for v in vals {
        if v > T::zero() {
            pos = true;
        } else {
            neg = true;
        }
    }
    pos && neg
}

impl<'m, T: Real> ActiveMesh<'m, T> {
    /// Collects the tets whose vertex values are not all of one sign.
    ///
    /// Fails if a value is exactly zero (values must be snapped), if the
    /// surface crosses the box boundary, or if nothing is cut.
    pub fn extract(mesh: &'m BoxMesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| *v == T::zero()) {
            return Err(Error::UnsnappedZero);
        }
        check_contained(mesh, &values)?;

        let mut active_tets = Vec::new();
        for c in 0..mesh.n_cells_total() {
            let corners = mesh.cell_corners(c);
            if !sign_split(corners.iter().map(|&v| values[v])) {
                continue;
            }
            for (l, local) in KUHN.iter().enumerate() {
                if sign_split(local.iter().map(|&b| values[corners[b]])) {
                    active_tets.push(6 * c + l);
                }
            }
        }
        if active_tets.is_empty() {
            return Err(Error::SurfaceOutsideMesh);
        }

        let tet_vertices: Vec<[usize; 4]> = active_tets.iter().map(|&t| mesh.tet(t)).collect();

        let mut active_vertices: Vec<usize> = tet_vertices.iter().flatten().copied().collect();
        active_vertices.sort_unstable();
        active_vertices.dedup();
        let dof_of_vertex: HashMap<usize, usize> =
            active_vertices.iter().enumerate().map(|(d, &v)| (v, d)).collect();
        let tet_dofs = tet_vertices
            .iter()
            .map(|tv| tv.map(|v| dof_of_vertex[&v]))
            .collect();

        let mut faces: HashMap<[usize; 3], (usize, Option<usize>)> = HashMap::new();
        for (local, tv) in tet_vertices.iter().enumerate() {
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut m = 0;
                for (i, &v) in tv.iter().enumerate() {
                    if i != skip {
                        f[m] = v;
                        m += 1;
                    }
                }
                f.sort_unstable();
                faces
                    .entry(f)
                    .and_modify(|e| e.1 = Some(local))
                    .or_insert((local, None));
            }
        }
        let mut interior_faces: Vec<InteriorFace> = faces
            .into_iter()
            .filter_map(|(vertices, (plus, minus))| {
                minus.map(|minus| InteriorFace {
                    plus,
                    minus,
                    vertices,
                })
            })
            .collect();
        interior_faces.sort_unstable_by_key(|f| (f.plus, f.minus, f.vertices));

        Ok(Self {
            mesh,
            active_tets,
            tet_dofs,
            interior_faces,
            active_vertices,
            dof_of_vertex,
            vertex_values: values,
        })
    }

    /// Interpolates `surface` onto `mesh` and extracts the active mesh.
    pub fn from_surface(mesh: &'m BoxMesh<T>, surface: &ImplicitSurface<T>) -> Result<Self> {
        Self::extract(mesh, mesh.interpolate_levelset(surface))
    }

    pub fn mesh(&self) -> &'m BoxMesh<T> {
        self.mesh
    }

    /// Global indices of active tets, ascending.
    pub fn active_tets(&self) -> &[usize] {
        &self.active_tets
    }

    pub fn n_active_tets(&self) -> usize {
        self.active_tets.len()
    }

    /// Dofs of the vertices of the `local`-th active tet, in tet vertex order.
    pub fn tet_dofs(&self, local: usize) -> [usize; 4] {
        self.tet_dofs[local]
    }

    pub fn tet_coords(&self, local: usize) -> [Vec3<T>; 4] {
        self.mesh.tet_coords(self.active_tets[local])
    }

    pub fn tet_values(&self, local: usize) -> [T; 4] {
        self.mesh.tet(self.active_tets[local]).map(|v| self.vertex_values[v])
    }

    /// Position of global tet `t` in the active list.
    pub fn local_index(&self, t: usize) -> Option<usize> {
        self.active_tets.binary_search(&t).ok()
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn active_vertices(&self) -> &[usize] {
        &self.active_vertices
    }

    pub fn n_dofs(&self) -> usize {
        self.active_vertices.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex.get(&v).copied()
    }

    pub fn vertex_values(&self) -> &[T] {
        &self.vertex_values
    }

    pub fn dof_position(&self, dof: usize) -> Vec3<T> {
        self.mesh.vertex(self.active_vertices[dof])
    }

    pub fn h(&self) -> T {
        self.mesh.h()
    }

    /// Nodal interpolant of `f` on the active vertices.
    pub fn interpolate(&self, f: impl Fn(Vec3<T>) -> T) -> Vec<T> {
        (0..self.n_dofs()).map(|d| f(self.dof_position(d))).collect()
    }

    /// Legacy VTK ASCII unstructured grid of the active tets.
    ///
    /// Points are the active vertices in dof order, cells are VTK_TETRA (10)
    /// referencing dof indices, and the point data array `levelset` holds the
    /// snapped nodal level-set values.
    pub fn write_vtk(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "active mesh")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.n_dofs())?;
        for d in 0..self.n_dofs() {
            let [x, y, z] = self.dof_position(d).to_f64();
            writeln!(w, "{x:.17e} {y:.17e} {z:.17e}")?;
        }
        let nt = self.n_active_tets();
        writeln!(w, "CELLS {} {}", nt, 5 * nt)?;
        for dofs in &self.tet_dofs {
            writeln!(w, "4 {} {} {} {}", dofs[0], dofs[1], dofs[2], dofs[3])?;
        }
        writeln!(w, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(w, "10")?;
        }
        writeln!(w, "POINT_DATA {}", self.n_dofs())?;
        writeln!(w, "SCALARS levelset double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &v in &self.active_vertices {
            writeln!(w, "{:.17e}", self.vertex_values[v].to_f64_lossy())?;
        }
        Ok(())
    }
}

fn check_contained<T: Real>(mesh: &BoxMesh<T>, values: &[T]) -> Result<()> {
    let [nx, ny, nz] = mesh.n_cells();
    let mut reference: Option<bool> = None;
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                if !(i == 0 || j == 0 || k == 0 || i == nx || j == ny || k == nz) {
                    continue;
                }
                let v = mesh.vertex_index(i, j, k);
                let positive = values[v] > T::zero();
                match reference {
                    None => reference = Some(positive),
                    Some(r) if r != positive => {
                        return Err(Error::SurfaceNotContained {
                            vertex: v,
                            value: values[v].to_f64_lossy(),
                        })
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}
