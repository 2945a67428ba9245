//! Implicitly defined closed surfaces `Γ = {φ = 0}`, closest-point projection
//! and extension of surface functions into a tubular neighbourhood.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Mat3, Vec3};
use crate::scalar::Real;

/// A smooth level-set function `φ: R³ → R`.
pub trait LevelSetFunction<T: Real>: Send + Sync {
    fn value(&self, x: Vec3<T>) -> T;

    fn gradient(&self, x: Vec3<T>) -> Vec3<T>;

    fn hessian(&self, _x: Vec3<T>) -> Option<Mat3<T>> {
        None
    }

    /// Closed-form closest point on the zero set, if one exists.
    fn exact_closest_point(&self, _x: Vec3<T>) -> Option<Vec3<T>> {
        None
    }
}

/// `φ(x) = |x - c|² - r²`.
#[derive(Clone, Copy, Debug)]
pub struct Sphere<T> {
    pub center: Vec3<T>,
    pub radius: T,
}

impl<T: Real> LevelSetFunction<T> for Sphere<T> {
    fn value(&self, x: Vec3<T>) -> T {
        (x - self.center).norm_squared() - self.radius * self.radius
    }

    fn gradient(&self, x: Vec3<T>) -> Vec3<T> {
        (x - self.center) * T::lit(2.0)
    }

    fn hessian(&self, _x: Vec3<T>) -> Option<Mat3<T>> {
        Some(Mat3::diagonal(T::lit(2.0)))
    }

    fn exact_closest_point(&self, x: Vec3<T>) -> Option<Vec3<T>> {
        let d = (x - self.center).normalized()?;
        Some(self.center + d * self.radius)
    }
}

/// The sextic surface
/// `Σ (x_i² - 1)² + Σ_{i<j} (x_i² + x_j² - 4)² - 16`,
/// a smooth closed surface of genus greater than zero that is not a distance function.
#[derive(Clone, Copy, Debug, Default)]
pub struct Blob;

impl<T: Real> LevelSetFunction<T> for Blob {
    fn value(&self, p: Vec3<T>) -> T {
        let one = T::one();
        let four = T::lit(4.0);
        let (x2, y2, z2) = (p.x * p.x, p.y * p.y, p.z * p.z);
        let sq = |t: T| t * t;
        sq(x2 - one) + sq(y2 - one) + sq(z2 - one) + sq(x2 + y2 - four) + sq(x2 + z2 - four)
            + sq(y2 + z2 - four)
            - T::lit(16.0)
    }

    fn gradient(&self, p: Vec3<T>) -> Vec3<T> {
        let one = T::one();
        let four = T::lit(4.0);
        let (x2, y2, z2) = (p.x * p.x, p.y * p.y, p.z * p.z);
        // d/dx_i = 4 x_i [ (x_i² - 1) + (x_i² + x_j² - 4) + (x_i² + x_k² - 4) ]
        let c = |a: T, b: T, d: T| (a - one) + (a + b - four) + (a + d - four);
        Vec3::new(
            T::lit(4.0) * p.x * c(x2, y2, z2),
            T::lit(4.0) * p.y * c(y2, x2, z2),
            T::lit(4.0) * p.z * c(z2, x2, y2),
        )
    }

    fn hessian(&self, p: Vec3<T>) -> Option<Mat3<T>> {
        let one = T::one();
        let four = T::lit(4.0);
        let v = [p.x, p.y, p.z];
        let s = [p.x * p.x, p.y * p.y, p.z * p.z];
        let mut h = Mat3::zero();
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let c = (s[i] - one) + (s[i] + s[j] - four) + (s[i] + s[k] - four);
            // d/dx_i [4 x_i c] = 4 c + 4 x_i * 6 x_i
            h.0[i][i] = four * c + T::lit(24.0) * s[i];
            // d/dx_j [4 x_i c] = 4 x_i * 2 x_j
            h.0[i][j] = T::lit(8.0) * v[i] * v[j];
            h.0[i][k] = T::lit(8.0) * v[i] * v[k];
        }
        Some(h)
    }
}

/// Point on Γ with its unit normal `∇φ/|∇φ|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint<T> {
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
}

/// A closed surface given as the zero set of a level-set function.
#[derive(Clone)]
pub struct ImplicitSurface<T: Real> {
    name: String,
    function: Arc<dyn LevelSetFunction<T>>,
    bounding_box: Aabb<T>,
    g_min: T,
    band_half_width: T,
}

impl<T: Real> fmt::Debug for ImplicitSurface<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitSurface")
            .field("name", &self.name)
            .field("bounding_box", &self.bounding_box)
            .field("g_min", &self.g_min)
            .field("band_half_width", &self.band_half_width)
            .finish()
    }
}

/// Names accepted by [`ImplicitSurface::by_name`].
pub const SURFACE_NAMES: [&str; 2] = ["sphere", "blob"];

impl<T: Real> ImplicitSurface<T> {
    /// `band_half_width` bounds `|φ|` on the band where `|∇φ| >= g_min` holds.
    pub fn new(
        name: impl Into<String>,
        function: Arc<dyn LevelSetFunction<T>>,
        bounding_box: Aabb<T>,
        g_min: T,
        band_half_width: T,
    ) -> Self {
        Self {
            name: name.into(),
            function,
            bounding_box,
            g_min,
            band_half_width,
        }
    }

    /// Unit sphere `x² + y² + z² - 1`.
    pub fn unit_sphere() -> Self {
        Self::sphere(Vec3::zero(), T::one())
    }

    pub fn sphere(center: Vec3<T>, radius: T) -> Self {
        let r = Vec3::splat(radius);
        Self::new(
            "sphere",
            Arc::new(Sphere { center, radius }),
            Aabb::new(center - r, center + r),
            // |∇φ| = 2|x - c| >= r whenever |φ| < 3r²/4
            radius,
            T::lit(0.75) * radius * radius,
        )
    }

    pub fn blob() -> Self {
        // extents and gradient bound measured on a 241³ sample grid:
        // Γ ⊂ [-2.02, 2.02]³ and |∇φ| >= 13.4 where |φ| < 0.5
        Self::new(
            "blob",
            Arc::new(Blob),
            Aabb::cube(T::lit(2.05)),
            T::lit(10.0),
            T::lit(0.5),
        )
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "sphere" => Some(Self::unit_sphere()),
            "blob" => Some(Self::blob()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounding_box(&self) -> Aabb<T> {
        self.bounding_box
    }

    pub fn g_min(&self) -> T {
        self.g_min
    }

    pub fn band_half_width(&self) -> T {
        self.band_half_width
    }

    pub fn function(&self) -> &dyn LevelSetFunction<T> {
        self.function.as_ref()
    }

    #[inline]
    pub fn value(&self, x: Vec3<T>) -> T {
        self.function.value(x)
    }

    #[inline]
    pub fn gradient(&self, x: Vec3<T>) -> Vec3<T> {
        self.function.gradient(x)
    }

    pub fn hessian(&self, x: Vec3<T>) -> Option<Mat3<T>> {
        self.function.hessian(x)
    }

    /// `∇φ/|∇φ|`, failing where the gradient is below `g_min/2`.
    pub fn normal(&self, x: Vec3<T>) -> Result<Vec3<T>> {
        let g = self.gradient(x);
        let norm = g.norm();
        let threshold = self.g_min * T::lit(0.5);
        if !(norm >= threshold) {
            return Err(Error::DegenerateGradient {
                at: x.to_f64(),
                norm: norm.to_f64_lossy(),
                threshold: threshold.to_f64_lossy(),
            });
        }
        Ok(g * (T::one() / norm))
    }

    /// Default projection tolerance `1e-12 · diam`, floored at `100 ε · diam`.
    pub fn default_proj_tol(&self) -> T {
        T::tol_floor(1e-12) * self.bounding_box.diameter()
    }

    /// Default finite-difference step `1e-7 · diam` (`√ε · diam` in lower precision).
    pub fn default_fd_step(&self) -> T {
        T::lit(1e-7).max(T::epsilon().sqrt()) * self.bounding_box.diameter()
    }

    pub const DEFAULT_MAX_ITER: usize = 50;

    /// Closest point with default tolerance and iteration limit.
    pub fn closest_point(&self, x: Vec3<T>) -> Result<SurfacePoint<T>> {
        self.closest_point_with(x, self.default_proj_tol(), Self::DEFAULT_MAX_ITER)
    }

    /// Closest point projection `p(x) = x - ρ(x) n(p(x))`.
    ///
    /// Alternates damped first-order steps onto the zero set with tangential
    /// corrections that make `x - p` parallel to the normal at `p`. Spheres use
    /// the analytic radial projection.
    pub fn closest_point_with(
        &self,
        x: Vec3<T>,
        proj_tol: T,
        max_iter: usize,
    ) -> Result<SurfacePoint<T>> {
        let max_iter = max_iter.max(1);
        if let Some(position) = self.function.exact_closest_point(x) {
            let normal = self.normal(position)?;
            return Ok(SurfacePoint { position, normal });
        }

        // sin of the admissible angle between x - p and n(p)
        let angle_tol = T::tol_floor(1e-8);
        let dist_tol = proj_tol / self.g_min;

        let mut p = self.descend(x, proj_tol, max_iter, |_| {})?;
        let mut multiplier = None;
        for _ in 0..max_iter {
            let normal = self.normal(p)?;
            let tangential = (x - p).reject(normal);
            let residual = tangential.norm();
            if residual <= angle_tol * (x - p).norm() + dist_tol {
                return Ok(SurfacePoint {
                    position: p,
                    normal,
                });
            }
            let newton = self
                .newton_step(x, p, multiplier)
                .and_then(|(q, mu)| Some((self.descend(q, proj_tol, max_iter, |_| {}).ok()?, mu)))
                .filter(|(q, _)| {
                    self.normal(*q)
                        .map(|n| (x - *q).reject(n).norm() < residual)
                        .unwrap_or(false)
                });
            (p, multiplier) = match newton {
                Some((q, mu)) => (q, Some(mu)),
                None => (self.tangential_step(x, p, tangential, proj_tol, max_iter)?, None),
            };
        }
        Err(Error::DivergedProjection {
            iterations: max_iter,
            last: p.to_f64(),
            residual: self.value(p).abs().to_f64_lossy(),
        })
    }

    /// `p + λ t` pulled back to the zero set. `λ` is halved until the distance
    /// to `x` decreases, or doubled while it keeps decreasing: beyond a focal
    /// point the full step overshoots, close to one it undershoots.
    fn tangential_step(
        &self,
        x: Vec3<T>,
        p: Vec3<T>,
        t: Vec3<T>,
        proj_tol: T,
        max_iter: usize,
    ) -> Result<Vec3<T>> {
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let dist = |q: Vec3<T>| (x - q).norm_squared();
        let at = |lambda: T| self.descend(p + t * lambda, proj_tol, max_iter, |_| {});
        let mut lambda = T::one();
        let mut q = at(lambda)?;
        if dist(q) < dist(p) {
            for _ in 0..8 {
                let wider = at(lambda * two)?;
                if dist(wider) >= dist(q) {
                    break;
                }
                lambda = lambda * two;
                q = wider;
            }
        } else {
            for _ in 0..30 {
                lambda = lambda * half;
                q = at(lambda)?;
                if dist(q) < dist(p) {
                    break;
                }
            }
        }
        Ok(q)
    }

    /// One Newton step on `p - x + μ∇φ(p) = 0, φ(p) = 0` from `(p, μ)`; `μ` is
    /// fitted to `p` when not given. Needs the Hessian.
    fn newton_step(&self, x: Vec3<T>, p: Vec3<T>, multiplier: Option<f64>) -> Option<(Vec3<T>, f64)> {
        let h = self.hessian(p)?;
        let g = self.gradient(p).to_f64();
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let d = (x - p).to_f64();
        let mu = multiplier.unwrap_or(-(d[0] * g[0] + d[1] * g[1] + d[2] * g[2]) / g2);
        let mut jac = nalgebra::Matrix4::<f64>::zeros();
        let mut rhs = nalgebra::Vector4::<f64>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                jac[(i, j)] = mu * h.0[i][j].to_f64_lossy() + if i == j { 1.0 } else { 0.0 };
            }
            jac[(i, 3)] = g[i];
            jac[(3, i)] = g[i];
            rhs[i] = d[i] - mu * g[i];
        }
        rhs[3] = -self.value(p).to_f64_lossy();
        let step = jac.lu().solve(&rhs)?;
        let q = p + Vec3::from_f64([step[0], step[1], step[2]]);
        let mu = mu + step[3];
        (q.is_finite() && mu.is_finite()).then_some((q, mu))
    }

    /// Damped steps `x ← x - λ φ ∇φ/|∇φ|²` until `|φ| <= tol`; `λ` is halved
    /// until `|φ|` decreases. `on_step` observes `|φ|` after each accepted step.
    pub fn descend(
        &self,
        x: Vec3<T>,
        tol: T,
        max_iter: usize,
        mut on_step: impl FnMut(T),
    ) -> Result<Vec3<T>> {
        let min_lambda = T::lit(1.0 / 1024.0 / 1024.0);
        let mut x = x;
        let mut v = self.value(x);
        for _ in 0..max_iter {
            if v.abs() <= tol {
                return Ok(x);
            }
            let g = self.gradient(x);
            let g2 = g.norm_squared();
            let threshold = self.g_min * T::lit(0.5);
            // off the band small gradients are legitimate; the line search guards the step
            let guarded = v.abs() <= self.band_half_width || !(g2 > T::zero());
            if guarded && !(g2.sqrt() >= threshold) {
                return Err(Error::DegenerateGradient {
                    at: x.to_f64(),
                    norm: g2.sqrt().to_f64_lossy(),
                    threshold: threshold.to_f64_lossy(),
                });
            }
            let step = g * (v / g2);
            let mut lambda = T::one();
            loop {
                let xn = x - step * lambda;
                let vn = self.value(xn);
                if vn.abs() < v.abs() {
                    x = xn;
                    v = vn;
                    break;
                }
                lambda = lambda * T::lit(0.5);
                if lambda < min_lambda {
                    return Err(Error::DivergedProjection {
                        iterations: max_iter,
                        last: x.to_f64(),
                        residual: v.abs().to_f64_lossy(),
                    });
                }
            }
            on_step(v.abs());
        }
        if v.abs() <= tol {
            Ok(x)
        } else {
            Err(Error::DivergedProjection {
                iterations: max_iter,
                last: x.to_f64(),
                residual: v.abs().to_f64_lossy(),
            })
        }
    }

    /// Extension by pull back: `u^e(x) = u(p(x))`.
    pub fn extend_scalar(&self, u: impl Fn(Vec3<T>) -> T, x: Vec3<T>) -> Result<T> {
        Ok(u(self.closest_point(x)?.position))
    }

    /// Central finite-difference gradient of `u^e` with step `fd_step`.
    pub fn extended_gradient(
        &self,
        u: impl Fn(Vec3<T>) -> T,
        x: Vec3<T>,
        fd_step: T,
    ) -> Result<Vec3<T>> {
        let mut g = Vec3::zero();
        let two_h = fd_step + fd_step;
        for i in 0..3 {
            let e = Vec3::unit(i) * fd_step;
            let fp = self.extend_scalar(&u, x + e)?;
            let fm = self.extend_scalar(&u, x - e)?;
            g[i] = (fp - fm) / two_h;
        }
        Ok(g)
    }
}
