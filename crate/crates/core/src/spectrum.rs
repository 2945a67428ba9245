//! Condition numbers of assembled matrices and sweeps over surface positions.
//!
//! Spectra are computed densely in `f64`. Eigenvalues of modulus at most
//! `zero_threshold_rel·|λ_max|` are counted as kernel; the condition number
//! is the ratio of the largest to the smallest remaining modulus.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{combine, FormRecipe};
use crate::cut::extract_surface_cells;
use crate::error::{Error, Result, StageExt};
use crate::geom::Vec3;
use crate::level_set::ImplicitSurface;
use crate::mesh::{ActiveMesh, BoxMesh};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Largest matrix dimension accepted by the dense eigensolver.
pub const DENSE_SPECTRUM_LIMIT: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    pub zero_threshold_rel: f64,
    /// Turn a kernel mismatch after known-kernel deflation into an error.
    pub strict: bool,
    /// Analyze `D^{-1/2} A D^{-1/2}` instead of `A`.
    pub diagonal_scaling: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            zero_threshold_rel: 1e-9,
            strict: false,
            diagonal_scaling: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub n: usize,
    /// Largest eigenvalue modulus.
    pub lambda_max: f64,
    /// Smallest eigenvalue modulus above the zero threshold.
    pub lambda_min_nonzero: f64,
    /// Smallest (signed) eigenvalue, including the kernel.
    pub lambda_min: f64,
    pub kernel_dim_detected: usize,
    pub kappa: f64,
    /// A known kernel was deflated but near-zero eigenvalues remained.
    pub kernel_mismatch: bool,
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Restriction of `a` to the orthogonal complement of `v`, via the
/// Householder reflection mapping `v` to a multiple of `e₁`.
pub fn deflate_vector(a: &DMatrix<f64>, v: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    let mut u = DVector::from_column_slice(v);
    let nv = u.norm();
    if !(nv > 0.0) {
        return Err(Error::InvalidConfig("known kernel vector is zero".into()));
    }
    u /= nv;
    // w = u + sign(u₁)·e₁ never cancels; H = I - 2wwᵀ/|w|² maps u to -sign(u₁)·e₁
    u[0] += if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let w = &u / u.norm();
    let h = DMatrix::identity(n, n) - (&w * w.transpose()) * 2.0;
    let r = &h * a * &h;
    Ok(r.view((1, 1), (n - 1, n - 1)).into_owned())
}

/// Condition number from a dense symmetric eigendecomposition.
pub fn condition_number<T: Real>(
    matrix: &CsrMatrix<T>,
    known_kernel: Option<&[T]>,
    options: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let n = matrix.n_rows();
    if n > DENSE_SPECTRUM_LIMIT {
        return Err(Error::TooLargeForDense {
            n,
            limit: DENSE_SPECTRUM_LIMIT,
        });
    }
    let scaled;
    let m = if options.diagonal_scaling {
        scaled = matrix.diagonally_scaled();
        &scaled
    } else {
        matrix
    };
    let mut a = m.to_dense_f64();
    if let Some(v) = known_kernel {
        let v: Vec<f64> = v.iter().map(|x| x.to_f64_lossy()).collect();
        a = deflate_vector(&a, &v)?;
    }
    let report = spectrum_report(&symmetric_eigenvalues(a), options.zero_threshold_rel)?;
    if known_kernel.is_some() && report.kernel_dim_detected > 0 {
        if options.strict {
            return Err(Error::KernelMismatch {
                detected: report.kernel_dim_detected,
            });
        }
        return Ok(SpectrumReport {
            kernel_mismatch: true,
            ..report
        });
    }
    Ok(report)
}

/// Kernel detection and condition number from a list of eigenvalues.
pub fn spectrum_report(eigenvalues: &[f64], zero_threshold_rel: f64) -> Result<SpectrumReport> {
    let lambda_max = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = zero_threshold_rel * lambda_max;
    let nonzero: Vec<f64> = eigenvalues
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > threshold)
        .collect();
    if nonzero.is_empty() {
        return Err(Error::ZeroMatrix);
    }
    let lambda_min_nonzero = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SpectrumReport {
        n: eigenvalues.len(),
        lambda_max,
        lambda_min_nonzero,
        lambda_min: eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        kernel_dim_detected: eigenvalues.len() - nonzero.len(),
        kappa: lambda_max / lambda_min_nonzero,
        kernel_mismatch: false,
    })
}

/// Unit sphere translated by `δ·(step, step, step)`.
pub fn translated_unit_sphere<T: Real>(delta: T, step: T) -> ImplicitSurface<T> {
    ImplicitSurface::sphere(Vec3::splat(delta * step), T::one())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub n_dofs: usize,
    pub outcome: std::result::Result<SpectrumReport, String>,
    /// `h²κ`, NaN when the position failed.
    pub h2_kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub h: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Min, max and mean of `h²κ` over the successful positions.
    pub fn summary(&self) -> SweepSummary {
        let ok: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.outcome.is_ok())
            .map(|r| r.h2_kappa)
            .collect();
        let n_ok = ok.len();
        SweepSummary {
            min: ok.iter().copied().fold(f64::INFINITY, f64::min),
            max: ok.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: ok.iter().sum::<f64>() / n_ok as f64,
            n_ok,
            n_failed: self.rows.len() - n_ok,
        }
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|s| s.kappa))
            .collect()
    }

    pub fn max_kappa(&self) -> f64 {
        self.kappas().into_iter().fold(f64::NAN, f64::max)
    }

    pub fn min_kappa(&self) -> f64 {
        self.kappas().into_iter().fold(f64::NAN, f64::min)
    }
}

/// Pure operator matrix (no mass) of `recipe` for one surface.
pub fn operator_matrix<T: Real>(
    surface: &ImplicitSurface<T>,
    mesh: &BoxMesh<T>,
    recipe: &FormRecipe<T>,
) -> Result<CsrMatrix<T>> {
    let active = ActiveMesh::from_surface(mesh, surface).stage(|| "active mesh")?;
    let cells = extract_surface_cells(&active).stage(|| "cut cells")?;
    let recipe = recipe.with_mass(false);
    Ok(combine(&recipe, &active, &cells, None).stage(|| "assembly")?.matrix)
}

/// Condition numbers of the pure operator over the surfaces `family(δ)`.
///
/// Failed positions are kept as rows with an error message; `h2_kappa`
/// uses the mesh size `h` of `mesh`.
pub fn condition_sweep<T: Real>(
    family: &(dyn Fn(T) -> ImplicitSurface<T> + Sync),
    mesh: &BoxMesh<T>,
    recipe: &FormRecipe<T>,
    deltas: &[T],
    options: &SpectrumOptions,
) -> SweepResult {
    let h = mesh.h().to_f64_lossy();
    let rows = deltas
        .par_iter()
        .map(|&delta| {
            let matrix = operator_matrix(&family(delta), mesh, recipe);
            let n_dofs = matrix.as_ref().map(|m| m.n_rows()).unwrap_or(0);
            let outcome = matrix
                .and_then(|m| condition_number(&m, None, options).stage(|| "spectrum"))
                .map_err(|e| e.to_string());
            let h2_kappa = outcome.as_ref().map(|r| h * h * r.kappa).unwrap_or(f64::NAN);
            SweepRow {
                delta: delta.to_f64_lossy(),
                n_dofs,
                outcome,
                h2_kappa,
            }
        })
        .collect();
    SweepResult { h, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{GradientForm, Stabilization};

    #[test]
    fn textbook_spectra() {
        let opts = SpectrumOptions::default();
        for n in [1, 4, 9] {
            let r = condition_number(&CsrMatrix::<f64>::identity(n), None, &opts).unwrap();
            assert_eq!(r.kappa, 1.0);
            assert_eq!(r.kernel_dim_detected, 0);
        }
        let d = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 4.0)]);
        assert!((condition_number(&d, None, &opts).unwrap().kappa - 4.0).abs() < 1e-14);
        let path = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 2, -1.0), (2, 1, -1.0)],
        );
        let r = condition_number(&path, None, &opts).unwrap();
        assert_eq!(r.kernel_dim_detected, 1);
        assert!((r.kappa - 3.0).abs() < 1e-13);
        // deflating the known kernel leaves {1, 3}
        let r = condition_number(&path, Some(&[1.0, 1.0, 1.0]), &opts).unwrap();
        assert_eq!(r.kernel_dim_detected, 0);
        assert!(!r.kernel_mismatch);
        assert!((r.kappa - 3.0).abs() < 1e-13);
        assert!((r.lambda_min_nonzero - 1.0).abs() < 1e-13);
    }

    #[test]
    fn kernel_mismatch_and_zero_matrix() {
        // two disconnected 2-node paths: kernel dimension 2
        let a = CsrMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0), (2, 2, 1.0), (3, 3, 1.0), (2, 3, -1.0), (3, 2, -1.0)],
        );
        let ones = [1.0; 4];
        let lax = condition_number(&a, Some(&ones), &SpectrumOptions::default()).unwrap();
        assert!(lax.kernel_mismatch);
        let strict = SpectrumOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            condition_number(&a, Some(&ones), &strict),
            Err(Error::KernelMismatch { detected: 1 })
        ));
        assert!(matches!(
            condition_number(&CsrMatrix::<f64>::zeros(3, 3), None, &strict),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn scaling_covariance() {
        let m = BoxMesh::cube(1.6, 5).unwrap();
        let r = FormRecipe::new(GradientForm::Full, Stabilization::FullGradient, 1.0);
        let a = operator_matrix(&ImplicitSurface::unit_sphere(), &m, &r).unwrap();
        let opts = SpectrumOptions::default();
        let k1 = condition_number(&a, None, &opts).unwrap().kappa;
        let k2 = condition_number(&a.scaled(2.0), None, &opts).unwrap().kappa;
        assert!((k1 - k2).abs() <= 1e-12 * k1);
    }

    #[test]
    fn diagonal_scaling_option() {
        let d = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 4.0)]);
        let opts = SpectrumOptions {
            diagonal_scaling: true,
            ..Default::default()
        };
        assert!((condition_number(&d, None, &opts).unwrap().kappa - 1.0).abs() < 1e-14);
    }

    #[test]
    fn householder_deflation_preserves_complement_spectrum() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        for v in [[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]] {
            let r = deflate_vector(&a, &v).unwrap();
            let ev = symmetric_eigenvalues(r);
            assert!((ev[0] - 3.0).abs() < 1e-13 && (ev[1] - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn translated_family() {
        let s = translated_unit_sphere(0.5f64, 0.32);
        assert!((s.value(Vec3::splat(0.16)) + 1.0).abs() < 1e-15);
        let sweep = condition_sweep(
            &|d| translated_unit_sphere(d, 0.64),
            &BoxMesh::cube(1.6, 5).unwrap(),
            &FormRecipe::new(GradientForm::Full, Stabilization::FullGradient, 1.0),
            &[0.0, 0.5],
            &SpectrumOptions::default(),
        );
        assert_eq!(sweep.rows.len(), 2);
        assert_eq!(sweep.rows[1].delta, 0.5);
        let s = sweep.summary();
        assert_eq!(s.n_ok, 2);
        assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn failed_positions_are_recorded() {
        // a sphere far outside the box fails, the sweep goes on
        let sweep = condition_sweep(
            &|d| translated_unit_sphere(d, 10.0),
            &BoxMesh::cube(1.6, 5).unwrap(),
            &FormRecipe::new(GradientForm::Full, Stabilization::FullGradient, 1.0),
            &[0.0, 1.0],
            &SpectrumOptions::default(),
        );
        assert!(sweep.rows[0].outcome.is_ok());
        assert!(sweep.rows[1].outcome.is_err());
        assert!(sweep.rows[1].h2_kappa.is_nan());
        assert_eq!(sweep.summary().n_failed, 1);
    }

    /// Number of eigenvalues of the symmetric tridiagonal `(alpha, beta)`
    /// below `x` (Sturm sequence).
    fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..alpha.len() {
            let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
            d = alpha[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bisect(alpha: &[f64], beta: &[f64], k: usize, lo: f64, hi: f64) -> f64 {
        // k-th smallest eigenvalue (0-based)
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(alpha, beta, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn stabilized_sphere_matches_lanczos_oracle() {
        let m = BoxMesh::cube(1.6, 5).unwrap();
        let r = FormRecipe::new(GradientForm::Full, Stabilization::FullGradient, 1.0);
        let a = operator_matrix(&ImplicitSurface::unit_sphere(), &m, &r).unwrap();
        let n = a.n_rows();
        let report = condition_number(&a, None, &SpectrumOptions::default()).unwrap();
        assert_eq!(report.kernel_dim_detected, 1);

        // Lanczos with full reorthogonalization on the complement of the constants
        let steps = n - 1;
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        let project = |v: &mut Vec<f64>, q: &[f64]| {
            let c: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        };
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut q: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        project(&mut q, &ones);
        let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.iter_mut().for_each(|v| *v /= nq);
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        for _ in 0..steps {
            let mut w = a.mul_vec(&q);
            alpha.push(w.iter().zip(&q).map(|(a, b)| a * b).sum());
            basis.push(q.clone());
            for _ in 0..2 {
                project(&mut w, &ones);
                for b in &basis {
                    project(&mut w, b);
                }
            }
            let b = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if b < 1e-12 * report.lambda_max {
                break;
            }
            beta.push(b);
            q = w.into_iter().map(|v| v / b).collect();
        }
        beta.truncate(alpha.len() - 1);
        let bound = 2.0 * a.max_abs() * 30.0;
        let lmin = bisect(&alpha, &beta, 0, -bound, bound);
        let lmax = bisect(&alpha, &beta, alpha.len() - 1, -bound, bound);
        let kappa = lmax / lmin;
        assert!((report.lambda_max - lmax).abs() <= 1e-9 * lmax);
        assert!((report.kappa - kappa).abs() <= 1e-6 * kappa, "{} vs {}", report.kappa, kappa);
    }
}
