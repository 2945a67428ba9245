//! Assembly of the discrete bilinear and linear forms over the active mesh.
//!
//! All forms are assembled for the P1 space on the active tets, with one dof
//! per active vertex:
//!
//! * tangential stiffness `(∇_Γh v, ∇_Γh w)_Kh` and full stiffness `(∇v, ∇w)_Kh`,
//! * full gradient stabilization `h^p (∇v, ∇w)_Th` over the active tets,
//! * face stabilization `(n_F·[∇v], n_F·[∇w])_Fh` over interior faces,
//! * surface mass `(v, w)_Kh` and load `(f^e, v)_Kh`.

use std::collections::BTreeSet;
use std::fmt;

use crate::cut::{surface_quadrature, SurfaceCell};
use crate::element::P1Tet;
use crate::error::{Error, Result};
use crate::geom::{triangle_area, Vec3};
use crate::mesh::ActiveMesh;
use crate::scalar::Real;
use crate::sparse::{CooMatrix, CsrMatrix};

/// Quadrature degree of the surface mass matrix (exact for P1 × P1).
pub const MASS_DEGREE: u32 = 2;
/// Quadrature degree of the load vector.
pub const LOAD_DEGREE: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientForm {
    /// `(∇_Γh v, ∇_Γh w)_Kh`
    Tangential,
    /// `(∇v, ∇w)_Kh`
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stabilization {
    None,
    /// `h^p (∇v, ∇w)` over the active tets.
    FullGradient,
    /// Normal-gradient jumps over interior faces of the active mesh.
    Face,
}

impl fmt::Display for GradientForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientForm::Tangential => "tangential",
            GradientForm::Full => "full",
        })
    }
}

impl fmt::Display for Stabilization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stabilization::None => "none",
            Stabilization::FullGradient => "fullgrad",
            Stabilization::Face => "face",
        })
    }
}

/// Which forms make up the system matrix `a_h + τ·stab (+ mass)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormRecipe<T> {
    pub gradient: GradientForm,
    pub stabilization: Stabilization,
    pub tau: T,
    pub include_mass: bool,
    /// Exponent `p` of the `h^p` weight of the full gradient stabilization.
    pub stab_power: i32,
    /// Exponent of an optional `h` weight on the face stabilization.
    pub face_h_power: i32,
}

impl<T: Real> FormRecipe<T> {
    pub fn new(gradient: GradientForm, stabilization: Stabilization, tau: T) -> Self {
        Self {
            gradient,
            stabilization,
            tau,
            include_mass: false,
            stab_power: 1,
            face_h_power: 0,
        }
    }

    pub fn with_mass(mut self, include_mass: bool) -> Self {
        self.include_mass = include_mass;
        self
    }

    pub fn with_stab_power(mut self, p: i32) -> Self {
        self.stab_power = p;
        self
    }

    pub fn with_face_h_power(mut self, p: i32) -> Self {
        self.face_h_power = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= T::zero()) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!("tau must be >= 0, got {}", self.tau)));
        }
        Ok(())
    }

    /// Whether the assembled matrix has the constants in its kernel.
    pub fn has_constant_kernel(&self) -> bool {
        !self.include_mass
    }
}

/// Assembled linear system over the active dofs.
#[derive(Clone, Debug)]
pub struct SparseSystem<T> {
    pub n: usize,
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub recipe: FormRecipe<T>,
    /// `w_j = ∫_Γh φ_j`, so that `w · v = ∫_Γh v`.
    pub surface_weights: Vec<T>,
}

fn elements<T: Real>(active: &ActiveMesh<'_, T>) -> Result<Vec<P1Tet<T>>> {
    (0..active.n_active_tets())
        .map(|l| P1Tet::new(active.tet_coords(l)))
        .collect()
}

fn check_cell<T: Real>(active: &ActiveMesh<'_, T>, cell: &SurfaceCell<T>) -> Result<()> {
    match active.active_tets().get(cell.active_index) {
        Some(&t) if t == cell.parent_tet => Ok(()),
        _ => Err(Error::CellNotActive(cell.parent_tet)),
    }
}

/// Surface-integrated stiffness with gradients mapped by `project` (constant per cell).
fn cell_stiffness<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
    project: impl Fn(Vec3<T>, Vec3<T>) -> Vec3<T>,
) -> Result<CsrMatrix<T>> {
    let n = active.n_dofs();
    let mut coo = CooMatrix::new(n, n);
    for cell in cells {
        check_cell(active, cell)?;
        let tet = P1Tet::new(active.tet_coords(cell.active_index))?;
        let g = tet.gradients.map(|g| project(g, cell.normal()));
        let mut block = [[T::zero(); 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                block[a][b] = cell.area() * g[a].dot(g[b]);
            }
        }
        coo.push_block(&active.tet_dofs(cell.active_index), &block);
    }
    Ok(coo.to_csr())
}

/// `a¹_h(v, w) = (P_Γh ∇v, P_Γh ∇w)_Kh` with `P_Γh = I - n_h ⊗ n_h`.
pub fn assemble_tangential_stiffness<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
) -> Result<CsrMatrix<T>> {
    cell_stiffness(active, cells, |g, n| g.reject(n))
}

/// `a²_h(v, w) = (∇v, ∇w)_Kh`.
pub fn assemble_full_stiffness<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
) -> Result<CsrMatrix<T>> {
    cell_stiffness(active, cells, |g, _| g)
}

/// `(n_h·∇v, n_h·∇w)_Kh`, the normal part completing `a¹_h` to `a²_h`.
pub fn assemble_normal_gradient<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
) -> Result<CsrMatrix<T>> {
    cell_stiffness(active, cells, |g, n| n * g.dot(n))
}

/// `s_h(v, w) = h^p (∇v, ∇w)_Th`, integrated over whole active tets.
pub fn assemble_full_gradient_stabilization<T: Real>(
    active: &ActiveMesh<'_, T>,
    stab_power: i32,
) -> Result<CsrMatrix<T>> {
    let n = active.n_dofs();
    let weight = active.h().powi(stab_power);
    let mut coo = CooMatrix::new(n, n);
    for (l, tet) in elements(active)?.iter().enumerate() {
        let g = tet.gradients;
        let mut block = [[T::zero(); 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                block[a][b] = weight * tet.volume * g[a].dot(g[b]);
            }
        }
        coo.push_block(&active.tet_dofs(l), &block);
    }
    Ok(coo.to_csr())
}

/// `j_h(v, w) = h^q (n_F·[∇v], n_F·[∇w])_Fh` with `[∇v] = ∇v|T⁺ - ∇v|T⁻`
/// (`q = 0` by default).
pub fn assemble_face_stabilization<T: Real>(
    active: &ActiveMesh<'_, T>,
    h_power: i32,
) -> Result<CsrMatrix<T>> {
    let n = active.n_dofs();
    let weight = active.h().powi(h_power);
    let elems = elements(active)?;
    let mesh = active.mesh();
    let mut coo = CooMatrix::new(n, n);
    let mut dofs: Vec<usize> = Vec::with_capacity(5);
    let mut jumps: Vec<T> = Vec::with_capacity(5);
    let mut block: Vec<T> = Vec::with_capacity(25);
    for face in active.interior_faces() {
        let [p0, p1, p2] = face.vertices.map(|v| mesh.vertex(v));
        let area = triangle_area(p0, p1, p2);
        let n_f = (p1 - p0)
            .cross(p2 - p0)
            .normalized()
            .ok_or(Error::DegenerateTet { volume: 0.0 })?;

        dofs.clear();
        jumps.clear();
        for (side, sign) in [(face.plus, T::one()), (face.minus, -T::one())] {
            let tet = &elems[side];
            for (k, &d) in active.tet_dofs(side).iter().enumerate() {
                let j = sign * n_f.dot(tet.gradients[k]);
                match dofs.iter().position(|&e| e == d) {
                    Some(pos) => jumps[pos] += j,
                    None => {
                        dofs.push(d);
                        jumps.push(j);
                    }
                }
            }
        }
        block.clear();
        for a in 0..dofs.len() {
            for b in 0..dofs.len() {
                block.push(weight * area * jumps[a] * jumps[b]);
            }
        }
        coo.push_block_dyn(&dofs, &block);
    }
    Ok(coo.to_csr())
}

/// `(v, w)_Kh` by degree-2 surface quadrature.
pub fn assemble_surface_mass<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
) -> Result<CsrMatrix<T>> {
    let n = active.n_dofs();
    let mut coo = CooMatrix::new(n, n);
    for cell in cells {
        check_cell(active, cell)?;
        let tet = P1Tet::new(active.tet_coords(cell.active_index))?;
        let q = surface_quadrature(&cell.cut, MASS_DEGREE)?;
        let mut block = [[T::zero(); 4]; 4];
        for (&x, &w) in q.points.iter().zip(&q.weights) {
            let phi = tet.barycentric(x);
            for a in 0..4 {
                for b in 0..4 {
                    block[a][b] += w * phi[a] * phi[b];
                }
            }
        }
        coo.push_block(&active.tet_dofs(cell.active_index), &block);
    }
    Ok(coo.to_csr())
}

/// `l_h(v) = (f^e, v)_Kh` by degree-4 surface quadrature. `f_extended` is
/// evaluated at quadrature points on `Γ_h` and must extend `f` off `Γ`.
pub fn assemble_load<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
    f_extended: &dyn Fn(Vec3<T>) -> Result<T>,
) -> Result<Vec<T>> {
    let mut rhs = vec![T::zero(); active.n_dofs()];
    for cell in cells {
        check_cell(active, cell)?;
        let tet = P1Tet::new(active.tet_coords(cell.active_index))?;
        let dofs = active.tet_dofs(cell.active_index);
        let q = surface_quadrature(&cell.cut, LOAD_DEGREE)?;
        let mut local = [T::zero(); 4];
        for (&x, &w) in q.points.iter().zip(&q.weights) {
            let f = f_extended(x)?;
            let phi = tet.barycentric(x);
            for a in 0..4 {
                local[a] += w * f * phi[a];
            }
        }
        for a in 0..4 {
            rhs[dofs[a]] += local[a];
        }
    }
    Ok(rhs)
}

/// Assembles `a_h + τ·stab (+ mass)` and the load vector.
///
/// Without a source the right-hand side is zero.
pub fn combine<T: Real>(
    recipe: &FormRecipe<T>,
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
    source: Option<&dyn Fn(Vec3<T>) -> Result<T>>,
) -> Result<SparseSystem<T>> {
    recipe.validate()?;
    let n = active.n_dofs();
    let mut matrix = match recipe.gradient {
        GradientForm::Tangential => assemble_tangential_stiffness(active, cells)?,
        GradientForm::Full => assemble_full_stiffness(active, cells)?,
    };
    let stab = match recipe.stabilization {
        Stabilization::None => None,
        Stabilization::FullGradient => Some(assemble_full_gradient_stabilization(active, recipe.stab_power)?),
        Stabilization::Face => Some(assemble_face_stabilization(active, recipe.face_h_power)?),
    };
    if let Some(s) = stab {
        matrix = matrix.add_scaled(recipe.tau, &s)?;
    }
    let mass = assemble_surface_mass(active, cells)?;
    let surface_weights = mass.mul_vec(&vec![T::one(); n]);
    if recipe.include_mass {
        matrix = matrix.add_scaled(T::one(), &mass)?;
    }
    let rhs = match source {
        Some(f) => assemble_load(active, cells, f)?,
        None => vec![T::zero(); n],
    };
    Ok(SparseSystem {
        n,
        matrix,
        rhs,
        recipe: *recipe,
        surface_weights,
    })
}

/// Pairs of dofs sharing an active tet, sorted.
pub fn vertex_adjacency_pattern<T: Real>(active: &ActiveMesh<'_, T>) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for l in 0..active.n_active_tets() {
        let d = active.tet_dofs(l);
        for a in d {
            for b in d {
                set.insert((a, b));
            }
        }
    }
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::extract_surface_cells;
    use crate::geom::Aabb;
    use crate::level_set::ImplicitSurface;
    use crate::mesh::BoxMesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_setup(n: usize) -> (BoxMesh<f64>, ImplicitSurface<f64>) {
        (BoxMesh::cube(1.6, n).unwrap(), ImplicitSurface::unit_sphere())
    }

    /// A background mesh whose single cut cell is the reference-like Kuhn tet
    /// with one negative corner.
    fn single_corner_cut() -> (BoxMesh<f64>, Vec<f64>) {
        let m = BoxMesh::new(Aabb::new(Vec3::splat(-1.0), Vec3::splat(2.0)), [3, 3, 3]).unwrap();
        let mut vals = vec![1.0; m.n_vertices()];
        vals[m.vertex_index(1, 1, 1)] = -1.0;
        (m, vals)
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn constants_in_kernels() {
        let (m, s) = sphere_setup(6);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let ones = vec![1.0; a.n_dofs()];
        for mat in [
            assemble_tangential_stiffness(&a, &cells).unwrap(),
            assemble_full_stiffness(&a, &cells).unwrap(),
            assemble_full_gradient_stabilization(&a, 1).unwrap(),
            assemble_face_stabilization(&a, 0).unwrap(),
        ] {
            let r = mat.mul_vec(&ones);
            let scale = mat.max_abs();
            assert!(r.iter().all(|v| v.abs() <= 1e-12 * scale));
            assert!(mat.asymmetry() <= 1e-12 * scale);
        }
    }

    #[test]
    fn hand_computed_corner_tet() {
        // reference-tet configuration: P∇φ₀ vanishes, |∇φ₀|² = 3
        let r: [Vec3<f64>; 4] = [Vec3::zero(), Vec3::unit(0), Vec3::unit(1), Vec3::unit(2)];
        let tet = P1Tet::new(r).unwrap();
        let cut = crate::cut::cut_tet(r, [-1.0, 1.0, 1.0, 1.0]).unwrap().unwrap();
        let g0 = tet.gradients[0];
        assert!(g0.reject(cut.normal).norm() < 1e-15);
        assert!((cut.area * g0.norm_squared() - 3f64.sqrt() / 8.0 * 3.0).abs() < 1e-15);

        // the same configuration through the assembly routines
        let (m, vals) = single_corner_cut();
        let a = ActiveMesh::extract(&m, vals).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let k1 = assemble_tangential_stiffness(&a, &cells).unwrap();
        let k2 = assemble_full_stiffness(&a, &cells).unwrap();
        let d = a.dof_of_vertex(m.vertex_index(1, 1, 1)).unwrap();
        assert!(k1.get(d, d).abs() < 1e-14);
        // Σ over the cut cells around the vertex of area · |∇φ|²
        let want: f64 = cells
            .iter()
            .map(|c| {
                let t = P1Tet::new(a.tet_coords(c.active_index)).unwrap();
                let k = a.tet_dofs(c.active_index).iter().position(|&e| e == d).unwrap();
                c.area() * t.gradients[k].norm_squared()
            })
            .sum();
        assert!((k2.get(d, d) - want).abs() < 1e-14);
    }

    #[test]
    fn stabilization_of_linear_function_on_single_tet() {
        // v = x on the tet: s_h(v, v) = h · vol
        let r: [Vec3<f64>; 4] = [Vec3::zero(), Vec3::unit(0), Vec3::unit(1), Vec3::unit(2)];
        let tet = P1Tet::new(r).unwrap();
        let coeffs = r.map(|p| p.x);
        let g = tet.gradient_of(coeffs);
        let h: f64 = 2f64.sqrt();
        assert!((h * tet.volume * g.norm_squared() - h / 6.0).abs() < 1e-15);

        let (m, s) = sphere_setup(5);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let sh = assemble_full_gradient_stabilization(&a, 1).unwrap();
        let v = a.interpolate(|p| p.x);
        let vol: f64 = (0..a.n_active_tets()).map(|l| m.tet_volume(a.active_tets()[l])).sum();
        assert!((sh.quadratic_form(&v) - m.h() * vol).abs() < 1e-12 * vol);
    }

    #[test]
    fn face_jump_vanishes_for_affine_functions() {
        let (m, s) = sphere_setup(6);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let j = assemble_face_stabilization(&a, 0).unwrap();
        let v = a.interpolate(|p| 0.3 + 2.0 * p.x - p.y + 0.5 * p.z);
        assert!(j.quadratic_form(&v).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            assert!(j.quadratic_form(&random_vec(a.n_dofs(), &mut rng)) >= -1e-12);
        }
    }

    #[test]
    fn two_tet_face_jump_hand_oracle() {
        // T⁺ = 0,e₁,e₂,e₃ and T⁻ = e₁,e₂,e₃,(1,1,1) share F = (e₁,e₂,e₃)
        let plus = P1Tet::new([Vec3::zero(), Vec3::unit(0), Vec3::unit(1), Vec3::unit(2)]).unwrap();
        let minus = P1Tet::new([Vec3::unit(0), Vec3::unit(1), Vec3::unit(2), Vec3::splat(1.0)]).unwrap();
        let n_f = Vec3::splat(1.0f64 / 3f64.sqrt());
        let area: f64 = triangle_area(Vec3::unit(0), Vec3::unit(1), Vec3::unit(2));
        assert!((area - 3f64.sqrt() / 2.0).abs() < 1e-15);
        // hat of the origin lives only in T⁺: j = area · (n_F·(-1,-1,-1))² = 3√3/2
        let jump = n_f.dot(plus.gradients[0]);
        assert!((area * jump * jump - 1.5 * 3f64.sqrt()).abs() < 1e-14);
        // hat of e₁ in T⁻ solves λ(e₁)=1, λ(e₂)=λ(e₃)=λ(1,1,1)=0:
        // λ = a·x + b·y + c·z + d with a + d = 1, b + d = 0, c + d = 0, a + b + c + d = 0
        // → a = d = 1/2, b = c = -1/2
        let g_minus = Vec3::new(0.5, -0.5, -0.5);
        assert!((minus.gradients[0] - g_minus).norm() < 1e-15);
        assert!((plus.gradients[1] - Vec3::unit(0)).norm() < 1e-15);
        // jump of the e₁ hat: n_F·(e₁ - g_minus) = (1/2 + 1/2 + 1/2)/√3
        let jump_shared = n_f.dot(plus.gradients[1] - minus.gradients[0]);
        assert!((jump_shared - 1.5 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pythagorean_split_and_ordering() {
        let (m, s) = sphere_setup(7);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let k1 = assemble_tangential_stiffness(&a, &cells).unwrap();
        let k2 = assemble_full_stiffness(&a, &cells).unwrap();
        let kn = assemble_normal_gradient(&a, &cells).unwrap();
        let sh = assemble_full_gradient_stabilization(&a, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let v = random_vec(a.n_dofs(), &mut rng);
            let (q1, q2, qn) = (k1.quadratic_form(&v), k2.quadratic_form(&v), kn.quadratic_form(&v));
            assert!((q1 + qn - q2).abs() <= 1e-12 * q2.abs());
            assert!(q2 >= q1);
            assert!(sh.quadratic_form(&v) >= 0.0);
        }
    }

    #[test]
    fn mass_and_weights() {
        let (m, s) = sphere_setup(8);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let recipe = FormRecipe::new(GradientForm::Full, Stabilization::None, 0.0);
        let sys = combine(&recipe, &a, &cells, None).unwrap();
        let area = crate::cut::total_area(&cells);
        let total: f64 = sys.surface_weights.iter().sum();
        assert!((total - area).abs() < 1e-12 * area);
        let mass = assemble_surface_mass(&a, &cells).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert!(mass.quadratic_form(&random_vec(a.n_dofs(), &mut rng)) >= 0.0);
        }
    }

    #[test]
    fn mass_single_flat_triangle() {
        // unit-area triangle, constant basis 1 → ∫ 1·1 = 1
        let tri: [Vec3<f64>; 3] = [Vec3::zero(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let q = crate::quadrature::triangle_quadrature(tri, MASS_DEGREE).unwrap();
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn load_partition_of_unity_and_odd_symmetry() {
        let (m, s) = sphere_setup(8);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let one = assemble_load(&a, &cells, &|_| Ok(1.0)).unwrap();
        let area = crate::cut::total_area(&cells);
        assert!((one.iter().sum::<f64>() - area).abs() < 1e-12 * area);
        let zero = assemble_load(&a, &cells, &|_| Ok(0.0)).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stencils() {
        let (m, s) = sphere_setup(7);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let adj = vertex_adjacency_pattern(&a);
        let sh = assemble_full_gradient_stabilization(&a, 1).unwrap();
        let k2 = assemble_full_stiffness(&a, &cells).unwrap();
        let j = assemble_face_stabilization(&a, 0).unwrap();
        assert_eq!(sh.pattern(), adj);
        assert_eq!(k2.add_scaled(1.0, &sh).unwrap().pattern(), adj);
        let with_j = k2.add_scaled(1.0, &j).unwrap().pattern();
        assert!(with_j.len() > adj.len());
        let set: BTreeSet<_> = with_j.into_iter().collect();
        assert!(adj.iter().all(|p| set.contains(p)));
    }

    #[test]
    fn combine_without_stabilization_is_bare_stiffness() {
        let (m, s) = sphere_setup(6);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let r = FormRecipe::new(GradientForm::Tangential, Stabilization::None, 0.0);
        let sys = combine(&r, &a, &cells, None).unwrap();
        assert_eq!(sys.matrix, assemble_tangential_stiffness(&a, &cells).unwrap());
        let rm = r.with_mass(true);
        let sys = combine(&rm, &a, &cells, None).unwrap();
        let want = assemble_tangential_stiffness(&a, &cells)
            .unwrap()
            .add_scaled(1.0, &assemble_surface_mass(&a, &cells).unwrap())
            .unwrap();
        assert_eq!(sys.matrix, want);
        let bad = FormRecipe::new(GradientForm::Full, Stabilization::FullGradient, -1.0);
        assert!(combine(&bad, &a, &cells, None).is_err());
    }

    #[test]
    fn cells_must_belong_to_active_mesh() {
        let (m, s) = sphere_setup(6);
        let a = ActiveMesh::from_surface(&m, &s).unwrap();
        let mut cells = extract_surface_cells(&a).unwrap();
        cells[0].parent_tet += 1;
        assert!(matches!(
            assemble_full_stiffness(&a, &cells),
            Err(Error::CellNotActive(_))
        ));
    }
}
