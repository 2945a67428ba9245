//! Manufactured solutions, derived right-hand sides and discrete error norms.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cut::{surface_quadrature, SurfaceCell};
use crate::element::P1Tet;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::level_set::ImplicitSurface;
use crate::mesh::ActiveMesh;
use crate::scalar::Real;

/// Quadrature degree of the error integrals.
pub const ERROR_DEGREE: u32 = 4;

/// Smooth function on `R³` with analytic first and second derivatives.
pub trait ScalarField<T: Real>: Send + Sync {
    fn value(&self, x: Vec3<T>) -> T;
    fn gradient(&self, x: Vec3<T>) -> Vec3<T>;
    fn hessian(&self, x: Vec3<T>) -> Mat3<T>;
}

/// `sin(πx/2) sin(πy/2) sin(πz/2)`
#[derive(Clone, Copy, Debug, Default)]
pub struct SineProduct;

impl<T: Real> ScalarField<T> for SineProduct {
    fn value(&self, x: Vec3<T>) -> T {
        let a = T::FRAC_PI_2();
        (a * x.x).sin() * (a * x.y).sin() * (a * x.z).sin()
    }

    fn gradient(&self, x: Vec3<T>) -> Vec3<T> {
        let a = T::FRAC_PI_2();
        let (s, c) = (x.to_array().map(|v| (a * v).sin()), x.to_array().map(|v| (a * v).cos()));
        Vec3::new(a * c[0] * s[1] * s[2], a * s[0] * c[1] * s[2], a * s[0] * s[1] * c[2])
    }

    fn hessian(&self, x: Vec3<T>) -> Mat3<T> {
        let a = T::FRAC_PI_2();
        let (s, c) = (x.to_array().map(|v| (a * v).sin()), x.to_array().map(|v| (a * v).cos()));
        let a2 = a * a;
        let u = s[0] * s[1] * s[2];
        let mut h = Mat3::diagonal(-a2 * u);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let k = 3 - i - j;
                    h.0[i][j] = a2 * c[i] * c[j] * s[k];
                }
            }
        }
        h
    }
}

/// `xy - 5y + z + xz`
#[derive(Clone, Copy, Debug, Default)]
pub struct Quadratic;

impl<T: Real> ScalarField<T> for Quadratic {
    fn value(&self, x: Vec3<T>) -> T {
        x.x * x.y - T::lit(5.0) * x.y + x.z + x.x * x.z
    }

    fn gradient(&self, x: Vec3<T>) -> Vec3<T> {
        Vec3::new(x.y + x.z, x.x - T::lit(5.0), T::one() + x.x)
    }

    fn hessian(&self, _: Vec3<T>) -> Mat3<T> {
        let (o, z) = (T::one(), T::zero());
        Mat3([[z, o, o], [o, z, z], [o, z, z]])
    }
}

/// `c + a·x`
#[derive(Clone, Copy, Debug)]
pub struct Affine<T> {
    pub constant: T,
    pub slope: Vec3<T>,
}

impl<T: Real> ScalarField<T> for Affine<T> {
    fn value(&self, x: Vec3<T>) -> T {
        self.constant + self.slope.dot(x)
    }

    fn gradient(&self, _: Vec3<T>) -> Vec3<T> {
        self.slope
    }

    fn hessian(&self, _: Vec3<T>) -> Mat3<T> {
        Mat3::zero()
    }
}

/// How `tr(∇n)` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureMode {
    /// From the level-set Hessian when available, else finite differences.
    Analytic,
    FiniteDifference,
}

/// Exact solution `u` on a surface, with `f = -Δ_Γ u + u`.
#[derive(Clone)]
pub struct ManufacturedProblem<T: Real> {
    name: String,
    surface: ImplicitSurface<T>,
    field: Arc<dyn ScalarField<T>>,
    curvature: CurvatureMode,
    fd_step: T,
}

impl<T: Real> fmt::Debug for ManufacturedProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("name", &self.name)
            .field("surface", &self.surface.name())
            .field("curvature", &self.curvature)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

pub const PROBLEM_NAMES: [&str; 2] = ["example1", "example2"];

impl<T: Real> ManufacturedProblem<T> {
    pub fn new(name: impl Into<String>, surface: ImplicitSurface<T>, field: Arc<dyn ScalarField<T>>) -> Self {
        let fd_step = T::lit(1e-6) * surface.bounding_box().diameter();
        Self {
            name: name.into(),
            surface,
            field,
            curvature: CurvatureMode::Analytic,
            fd_step,
        }
    }

    /// Unit sphere with `u = sin(πx/2) sin(πy/2) sin(πz/2)`.
    pub fn example1() -> Self {
        Self::new("example1", ImplicitSurface::unit_sphere(), Arc::new(SineProduct))
    }

    /// Sextic blob with `u = xy - 5y + z + xz`.
    pub fn example2() -> Self {
        Self::new("example2", ImplicitSurface::blob(), Arc::new(Quadratic))
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "example1" => Some(Self::example1()),
            "example2" => Some(Self::example2()),
            _ => None,
        }
    }

    /// The problem posed on a named surface ("sphere" or "blob").
    pub fn for_surface(surface: &str) -> Option<Self> {
        match surface {
            "sphere" => Some(Self::example1()),
            "blob" => Some(Self::example2()),
            _ => None,
        }
    }

    pub fn with_curvature(mut self, mode: CurvatureMode) -> Self {
        self.curvature = mode;
        self
    }

    /// Step of the finite differences used for `tr(∇n)` and `∇u^e`.
    pub fn with_fd_step(mut self, step: T) -> Self {
        self.fd_step = step;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn surface(&self) -> &ImplicitSurface<T> {
        &self.surface
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn exact_u(&self, x: Vec3<T>) -> T {
        self.field.value(x)
    }

    pub fn exact_grad_u(&self, x: Vec3<T>) -> Vec3<T> {
        self.field.gradient(x)
    }

    /// `u^e(x) = u(p(x))`
    pub fn extended_u(&self, x: Vec3<T>) -> Result<T> {
        self.surface.extend_scalar(|y| self.field.value(y), x)
    }

    /// `∇u^e(x)` by central differences through the projection.
    pub fn extended_grad_u(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        self.surface
            .extended_gradient(|y| self.field.value(y), x, self.fd_step)
    }

    /// `tr(∇n)` at `x`, `n = ∇φ/|∇φ|`.
    pub fn normal_divergence(&self, x: Vec3<T>) -> Result<T> {
        let hessian = match self.curvature {
            CurvatureMode::Analytic => self.surface.hessian(x),
            CurvatureMode::FiniteDifference => None,
        };
        match hessian {
            Some(h) => {
                let g = self.surface.gradient(x);
                let n = self.surface.normal(x)?;
                Ok((h.trace() - h.bilinear(n, n)) / g.norm())
            }
            None => {
                let s = self.fd_step;
                let mut div = T::zero();
                for i in 0..3 {
                    let e = Vec3::unit(i) * s;
                    div += (self.surface.normal(x + e)?[i] - self.surface.normal(x - e)?[i]) / (s + s);
                }
                Ok(div)
            }
        }
    }

    /// `Δ_Γ u = Δu - n·(∇⊗∇u)n - tr(∇n)(∇u·n)` at a point `x` on `Γ`.
    pub fn laplace_beltrami_at(&self, x: Vec3<T>) -> Result<T> {
        let n = self.surface.normal(x)?;
        let hu = self.field.hessian(x);
        let gu = self.field.gradient(x);
        Ok(hu.trace() - hu.bilinear(n, n) - self.normal_divergence(x)? * gu.dot(n))
    }

    /// `f^e(x) = (-Δ_Γ u + u)(p(x))`
    pub fn rhs(&self, x: Vec3<T>) -> Result<T> {
        let p = self.surface.closest_point(x)?.position;
        Ok(self.field.value(p) - self.laplace_beltrami_at(p)?)
    }

    /// `(-Δ_Γ u)(p(x))`, the source of the pure Laplace–Beltrami problem.
    pub fn pure_rhs(&self, x: Vec3<T>) -> Result<T> {
        let p = self.surface.closest_point(x)?.position;
        Ok(-self.laplace_beltrami_at(p)?)
    }
}

/// `‖u_h - u^e‖` and `‖u_h - u^e‖₁` over the surface cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms<T> {
    pub l2: T,
    pub h1: T,
}

/// Both error norms in one pass.
///
/// The gradient part uses `P_Γh (∇u_h - ∇u^e)` with the cell normal, or the
/// unprojected difference when `full_gradient` is set.
pub fn error_norms<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
    coefficients: &[T],
    problem: &ManufacturedProblem<T>,
    full_gradient: bool,
) -> Result<ErrorNorms<T>> {
    if coefficients.len() != active.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: active.n_dofs(),
            got: coefficients.len(),
        });
    }
    let per_cell: Vec<(T, T)> = cells
        .par_iter()
        .map(|cell| {
            let tet = P1Tet::new(active.tet_coords(cell.active_index))?;
            let c = active.tet_dofs(cell.active_index).map(|d| coefficients[d]);
            let grad_h = tet.gradient_of(c);
            let q = surface_quadrature(&cell.cut, ERROR_DEGREE)?;
            let (mut l2, mut semi) = (T::zero(), T::zero());
            for (&x, &w) in q.points.iter().zip(&q.weights) {
                let e = tet.evaluate(c, x) - problem.extended_u(x)?;
                let mut g = grad_h - problem.extended_grad_u(x)?;
                if !full_gradient {
                    g = g.reject(cell.normal());
                }
                l2 += w * e * e;
                semi += w * g.norm_squared();
            }
            Ok((l2, semi))
        })
        .collect::<Result<_>>()?;
    let (l2, semi) = per_cell
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), (c, d)| (a + *c, b + *d));
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
    })
}

pub fn l2_error<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
    coefficients: &[T],
    problem: &ManufacturedProblem<T>,
) -> Result<T> {
    Ok(error_norms(active, cells, coefficients, problem, false)?.l2)
}

pub fn h1_error<T: Real>(
    active: &ActiveMesh<'_, T>,
    cells: &[SurfaceCell<T>],
    coefficients: &[T],
    problem: &ManufacturedProblem<T>,
    full_gradient: bool,
) -> Result<T> {
    Ok(error_norms(active, cells, coefficients, problem, full_gradient)?.h1)
}

/// `EOC(k) = log(E_{k-1}/E_k) / log 2` for `k = 1..`.
pub fn eoc<T: Real>(errors: &[T]) -> Vec<T> {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).ln() / T::LN_2())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::extract_surface_cells;
    use crate::mesh::BoxMesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if let Some(u) = v.normalized().filter(|_| v.norm() > 0.1) {
                return u;
            }
        }
    }

    /// Points of `Γ` obtained by descending from random band points.
    fn surface_points(s: &ImplicitSurface<f64>, n: usize, seed: u64) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bb = s.bounding_box();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = Vec3::new(
                rng.gen_range(bb.min.x..bb.max.x),
                rng.gen_range(bb.min.y..bb.max.y),
                rng.gen_range(bb.min.z..bb.max.z),
            );
            if s.value(x).abs() < s.band_half_width() {
                out.push(s.descend(x, 1e-14, 100, |_| {}).unwrap());
            }
        }
        out
    }

    fn coordinate_problem(i: usize) -> ManufacturedProblem<f64> {
        let field = Affine {
            constant: 0.0,
            slope: Vec3::unit(i),
        };
        ManufacturedProblem::new("coordinate", ImplicitSurface::unit_sphere(), Arc::new(field))
    }

    /// Second derivatives in a chart whose metric is the identity to first
    /// order at the base point give `Δ_Γ f = f_ss + f_tt` there.
    fn chart_laplacian(f: impl Fn(f64, f64) -> f64, eta: f64) -> f64 {
        let f0 = f(0.0, 0.0);
        (f(eta, 0.0) - 2.0 * f0 + f(-eta, 0.0) + f(0.0, eta) - 2.0 * f0 + f(0.0, -eta)) / (eta * eta)
    }

    /// Graph chart over the tangent plane at `x0`: the point of `Γ` on the
    /// normal line through `x0 + s e₁ + t e₂`, found by Newton's method on `φ`.
    fn graph_chart(surface: &ImplicitSurface<f64>, x0: Vec3<f64>) -> impl Fn(f64, f64) -> Vec3<f64> + '_ {
        let n = surface.normal(x0).unwrap();
        let a = if n.x.abs() < 0.9 { Vec3::unit(0) } else { Vec3::unit(1) };
        let e1 = a.reject(n).normalized().unwrap();
        let e2 = n.cross(e1);
        move |s, t| {
            let base = x0 + e1 * s + e2 * t;
            let mut lam = 0.0;
            for _ in 0..60 {
                let y = base + n * lam;
                let d = surface.value(y) / surface.gradient(y).dot(n);
                lam -= d;
                if d.abs() < 1e-17 {
                    break;
                }
            }
            base + n * lam
        }
    }

    #[test]
    fn eigenfunction_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..3 {
            let analytic = coordinate_problem(i);
            let fd = coordinate_problem(i).with_curvature(CurvatureMode::FiniteDifference);
            for _ in 0..100 {
                let x = random_unit(&mut rng);
                let want = -2.0 * x[i];
                assert!((analytic.laplace_beltrami_at(x).unwrap() - want).abs() < 1e-8);
                assert!((fd.laplace_beltrami_at(x).unwrap() - want).abs() < 1e-5);
            }
        }
        let p = coordinate_problem(0);
        assert!(p.laplace_beltrami_at(Vec3::unit(1)).unwrap().abs() < 1e-15);
        assert!((p.laplace_beltrami_at(Vec3::unit(0)).unwrap() + 2.0).abs() < 1e-15);
        assert!((p.rhs(Vec3::unit(0)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rhs_is_constant_along_normals() {
        for problem in [ManufacturedProblem::<f64>::example1(), ManufacturedProblem::example2()] {
            let s = problem.surface().clone();
            for p in surface_points(&s, 20, 12) {
                let q = p + s.normal(p).unwrap() * 0.02;
                let (a, b) = (problem.rhs(q).unwrap(), problem.rhs(p).unwrap());
                assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn example1_matches_spherical_chart() {
        // longitude/latitude chart at (1,0,0): Δ_Γ f = f_ss + f_tt there
        let p = ManufacturedProblem::<f64>::example1();
        let f = |s: f64, t: f64| p.exact_u(Vec3::new(s.cos() * t.cos(), s.sin() * t.cos(), t.sin()));
        let oracle = chart_laplacian(f, 1e-3);
        let got = p.laplace_beltrami_at(Vec3::unit(0)).unwrap();
        assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
        let fd = p.clone().with_curvature(CurvatureMode::FiniteDifference);
        assert!((fd.laplace_beltrami_at(Vec3::unit(0)).unwrap() - oracle).abs() < 1e-5);
        // same oracle at generic points through the graph chart
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let x0 = random_unit(&mut rng);
            let chart = graph_chart(p.surface(), x0);
            let oracle = chart_laplacian(|s, t| p.exact_u(chart(s, t)), 1e-3);
            assert!((p.laplace_beltrami_at(x0).unwrap() - oracle).abs() < 1e-5);
        }
    }

    #[test]
    fn example2_matches_graph_chart() {
        let p = ManufacturedProblem::<f64>::example2();
        let s = p.surface().clone();
        for x0 in surface_points(&s, 10, 14) {
            let chart = graph_chart(&s, x0);
            let oracle = -chart_laplacian(|a, b| p.exact_u(chart(a, b)), 1e-3) + p.exact_u(x0);
            let got = p.rhs(x0).unwrap();
            assert!((got - oracle).abs() < 1e-4 * (1.0 + oracle.abs()), "{got} vs {oracle}");
        }
    }

    #[test]
    fn field_derivatives_match_differences() {
        let fields: [Arc<dyn ScalarField<f64>>; 2] = [Arc::new(SineProduct), Arc::new(Quadratic)];
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let step = 1e-5;
        for f in fields {
            for _ in 0..50 {
                let x = random_unit(&mut rng) * rng.gen_range(0.5..2.0);
                let g = f.gradient(x);
                let h = f.hessian(x);
                for j in 0..3 {
                    let e = Vec3::unit(j) * step;
                    let d = (f.value(x + e) - f.value(x - e)) / (2.0 * step);
                    assert!((d - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()));
                    let col = (f.gradient(x + e) - f.gradient(x - e)) * (0.5 / step);
                    for i in 0..3 {
                        assert!((col[i] - h.0[i][j]).abs() < 1e-6 * (1.0 + h.0[i][j].abs()));
                    }
                }
            }
        }
    }

    fn interpolant_errors(n: usize) -> ErrorNorms<f64> {
        let m = BoxMesh::cube(1.6, n).unwrap();
        let p = ManufacturedProblem::example1();
        let a = ActiveMesh::from_surface(&m, p.surface()).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let c: Vec<f64> = (0..a.n_dofs())
            .map(|d| p.extended_u(a.dof_position(d)).unwrap())
            .collect();
        error_norms(&a, &cells, &c, &p, false).unwrap()
    }

    #[test]
    fn interpolant_rates() {
        let coarse = interpolant_errors(10);
        let fine = interpolant_errors(20);
        let l2_ratio = coarse.l2 / fine.l2;
        let h1_ratio = coarse.h1 / fine.h1;
        assert!((3.4..=4.6).contains(&l2_ratio), "L2 ratio {l2_ratio}");
        assert!((1.7..=2.3).contains(&h1_ratio), "H1 ratio {h1_ratio}");
        assert!(fine.h1 >= fine.l2);
    }

    #[test]
    fn trivial_error_values() {
        let m = BoxMesh::<f64>::cube(1.6, 8).unwrap();
        let one = Affine {
            constant: 1.0,
            slope: Vec3::zero(),
        };
        let p = ManufacturedProblem::new("one", ImplicitSurface::unit_sphere(), Arc::new(one));
        let a = ActiveMesh::from_surface(&m, p.surface()).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let e = error_norms(&a, &cells, &vec![1.0; a.n_dofs()], &p, false).unwrap();
        assert!(e.l2 < 1e-14 && e.h1 < 1e-8);
        let zero = error_norms(&a, &cells, &vec![0.0; a.n_dofs()], &p, true).unwrap();
        let area = crate::cut::total_area(&cells);
        assert!((zero.l2 - f64::sqrt(area)).abs() < 1e-12);
        assert!(zero.h1 >= zero.l2);
    }

    #[test]
    fn errors_independent_of_cell_order() {
        let m = BoxMesh::cube(1.6, 8).unwrap();
        let p = ManufacturedProblem::example1();
        let a = ActiveMesh::from_surface(&m, p.surface()).unwrap();
        let cells = extract_surface_cells(&a).unwrap();
        let c: Vec<f64> = (0..a.n_dofs()).map(|d| f64::cos(a.dof_position(d).x)).collect();
        let base = error_norms(&a, &cells, &c, &p, false).unwrap();
        let mut reversed = cells.clone();
        reversed.reverse();
        let again = error_norms(&a, &cells, &c, &p, false).unwrap();
        let rev = error_norms(&a, &reversed, &c, &p, false).unwrap();
        assert_eq!(base, again);
        assert!(f64::abs(base.l2 - rev.l2) < 1e-14 && f64::abs(base.h1 - rev.h1) < 1e-13);
    }

    #[test]
    fn eoc_values() {
        let r = eoc(&[0.4f64, 0.1]);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-15);
        assert_eq!(format!("{:.2}", eoc(&[9.59e-2f64, 4.80e-2])[0]), "1.00");
        assert_eq!(format!("{:.2}", eoc(&[1.13e-3f64, 2.83e-4])[0]), "2.00");
    }
}
