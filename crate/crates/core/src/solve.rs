//! Linear solvers for the assembled systems.
//!
//! Pure Laplace–Beltrami forms have the constant vector in their kernel. For
//! those systems the conjugate gradient iteration runs in the complement
//! `{v : 1·v = 0}` and the result is normalized afterwards to zero mean with
//! respect to the surface-weighted functional `v ↦ w·v`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::assembly::SparseSystem;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Largest system handled by [`dense_solve`].
pub const DENSE_LIMIT: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions<T> {
    /// Target relative residual `‖b - Ax‖/‖b‖`.
    pub tol: T,
    /// Iteration cap; `None` means `10·n`.
    pub max_iter: Option<usize>,
    /// Iterate in the complement of the constant vector.
    pub deflate_constants: bool,
}

impl<T: Real> Default for CgOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol_floor(1e-10),
            max_iter: None,
            deflate_constants: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub coefficients: Vec<T>,
    pub iterations: usize,
    pub relative_residual: T,
    /// Whether the iteration ran in the complement of the constants.
    pub deflated: bool,
    /// Whether the right-hand side had to be projected onto the range.
    pub rhs_projected: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Removes the algebraic mean: `v - (1·v / n)·1`.
fn project_out_constants<T: Real>(v: &mut [T]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len());
    v.iter_mut().for_each(|x| *x -= mean);
}

/// `v - (w·v / w·1)·1`, the representative with zero surface-weighted mean.
pub fn enforce_zero_mean<T: Real>(coefficients: &[T], surface_weights: &[T]) -> Result<Vec<T>> {
    if coefficients.len() != surface_weights.len() {
        return Err(Error::DimensionMismatch {
            expected: surface_weights.len(),
            got: coefficients.len(),
        });
    }
    let total: T = surface_weights.iter().copied().sum();
    if !(total.abs() > T::zero()) {
        return Err(Error::InvalidConfig("surface weights sum to zero".into()));
    }
    let c = dot(surface_weights, coefficients) / total;
    Ok(coefficients.iter().map(|v| *v - c).collect())
}

/// Jacobi-preconditioned conjugate gradients.
///
/// `monitor` receives the iteration count, the current relative residual
/// and the current iterate after every step.
pub fn pcg<T: Real>(
    matrix: &CsrMatrix<T>,
    rhs: &[T],
    options: &CgOptions<T>,
    monitor: &mut dyn FnMut(usize, T, &[T]),
) -> Result<SolveReport<T>> {
    let n = matrix.n_rows();
    if matrix.n_cols() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let max_iter = options.max_iter.unwrap_or(10 * n.max(1));
    let mut b = rhs.to_vec();
    let mut rhs_projected = false;
    if options.deflate_constants {
        let b_norm = norm(&b);
        let sum: T = b.iter().copied().sum();
        if sum.abs() > options.tol * b_norm * T::from_usize_lossy(n).sqrt() {
            rhs_projected = true;
        }
        project_out_constants(&mut b);
    }
    let b_norm = norm(&b);
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        return Ok(SolveReport {
            coefficients: x,
            iterations: 0,
            relative_residual: T::zero(),
            deflated: options.deflate_constants,
            rhs_projected,
        });
    }
    let inv_diag: Vec<T> = matrix
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let precondition = |r: &[T], z: &mut Vec<T>| {
        z.clear();
        z.extend(r.iter().zip(&inv_diag).map(|(a, b)| *a * *b));
        if options.deflate_constants {
            project_out_constants(z);
        }
    };

    let mut r = b.clone();
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut rel = T::one();
    for it in 1..=max_iter {
        matrix.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > T::zero()) {
            return Err(Error::NotPositiveSemidefinite {
                iteration: it,
                curvature: curvature.to_f64_lossy(),
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if options.deflate_constants {
            project_out_constants(&mut r);
        }
        rel = norm(&r) / b_norm;
        monitor(it, rel, &x);
        if rel <= options.tol {
            // report the true residual of the final iterate
            let mut ax = matrix.mul_vec(&x);
            ax.iter_mut().zip(&b).for_each(|(a, bi)| *a = *bi - *a);
            if options.deflate_constants {
                project_out_constants(&mut ax);
            }
            return Ok(SolveReport {
                coefficients: x,
                iterations: it,
                relative_residual: norm(&ax) / b_norm,
                deflated: options.deflate_constants,
                rhs_projected,
            });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: rel.to_f64_lossy(),
    })
}

/// Solves an assembled system. Systems without mass are solved in the
/// complement of the constants and returned with zero surface-weighted mean.
pub fn solve<T: Real>(system: &SparseSystem<T>, tol: T, max_iter: Option<usize>) -> Result<SolveReport<T>> {
    let deflate = system.recipe.has_constant_kernel();
    let options = CgOptions {
        tol,
        max_iter,
        deflate_constants: deflate,
    };
    let mut report = pcg(&system.matrix, &system.rhs, &options, &mut |_, _, _| {})?;
    if deflate {
        report.coefficients = enforce_zero_mean(&report.coefficients, &system.surface_weights)?;
    }
    Ok(report)
}

/// Dense symmetric solve in `f64`.
///
/// With `deflate_constants` the minimum-norm solution on the complement of
/// the constant vector is returned (pseudo-inverse restricted to `1⊥`);
/// otherwise a Cholesky factorization is used.
pub fn dense_solve<T: Real>(matrix: &CsrMatrix<T>, rhs: &[T], deflate_constants: bool) -> Result<Vec<f64>> {
    let n = matrix.n_rows();
    if n > DENSE_LIMIT {
        return Err(Error::TooLargeForDense { n, limit: DENSE_LIMIT });
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let a = matrix.to_dense_f64();
    let mut b = DVector::from_iterator(n, rhs.iter().map(|v| v.to_f64_lossy()));
    if !deflate_constants {
        let chol = a.cholesky().ok_or(Error::NotPositiveSemidefinite {
            iteration: 0,
            curvature: f64::NAN,
        })?;
        return Ok(chol.solve(&b).iter().copied().collect());
    }
    let mean = b.mean();
    b.add_scalar_mut(-mean);
    // A + 1·1ᵀ is nonsingular when ker A = span{1}; its inverse agrees with
    // the pseudo-inverse on 1⊥.
    let shifted: DMatrix<f64> = &a + DMatrix::from_element(n, n, 1.0);
    let eig = SymmetricEigen::new(shifted);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = DVector::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > 1e-13 * lmax {
            let q = eig.eigenvectors.column(k);
            x += q * (q.dot(&b) / lambda);
        }
    }
    let mean = x.mean();
    x.add_scalar_mut(-mean);
    Ok(x.iter().copied().collect())
}
