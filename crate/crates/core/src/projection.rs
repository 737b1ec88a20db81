//! Euclidean projection onto an ellipsoid.
//!
//! For the axis-aligned set `{ y : Σ wᵢ² (yᵢ - rᵢ)² <= ε² }` the projection
//! of an exterior point `x` is `gᵢ = (xᵢ + λ wᵢ² rᵢ) / (1 + λ wᵢ²)`, where `λ`
//! is the unique positive root of
//!
//! ```text
//! ψ(λ) = Σ wᵢ² (xᵢ - rᵢ)² / (1 + λ wᵢ²)² - ε²
//! ```
//!
//! `ψ` is convex and decreasing on `λ >= 0`, so Newton's method from `λ = 0`
//! increases monotonically to the root. Rotated ellipsoids are handled by
//! moving into the principal-axis frame and back.

use thiserror::Error;

use crate::geometry::Ellipsoid;
use crate::linalg::{mat3_mul_vec, mat3_tr_mul_vec, Vec3};

pub const NEWTON_MAX_ITER: usize = 100;
/// Newton stops once `|ψ| <= NEWTON_TOL * ε²`.
pub const NEWTON_TOL: f64 = 1e-12;
/// `|Σ wᵢ²(xᵢ - rᵢ)² - ε²| <= BOUNDARY_TOL * ε²` counts as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProjectionError {
    #[error("point is not strictly outside the ellipsoid")]
    NotExterior,
    #[error("newton iteration did not converge in {0} steps")]
    MaxIterationsExceeded(usize),
    #[error("invalid projection set (weights and radius must be finite and positive)")]
    InvalidSet,
}

/// Root of `ψ` together with the Newton iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonRoot {
    pub lambda: f64,
    pub iterations: usize,
}

/// An axis-aligned ellipsoid `{ y : Σ wᵢ² (yᵢ - rᵢ)² <= ε² }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAlignedSet {
    pub weights: [f64; 3],
    pub center: Vec3,
    pub epsilon: f64,
}

impl AxisAlignedSet {
    pub fn new(weights: [f64; 3], center: Vec3, epsilon: f64) -> Result<Self, ProjectionError> {
        let ok = weights.iter().all(|w| *w > 0.0 && w.is_finite()) && epsilon > 0.0 && epsilon.is_finite();
        if !ok {
            return Err(ProjectionError::InvalidSet);
        }
        Ok(AxisAlignedSet { weights, center, epsilon })
    }

    /// `Σ wᵢ² (xᵢ - rᵢ)²`
    pub fn level(&self, x: Vec3) -> f64 {
        (0..3)
            .map(|i| {
                let d = self.weights[i] * (x[i] - self.center[i]);
                d * d
            })
            .sum()
    }

    pub fn psi(&self, x: Vec3, lambda: f64) -> f64 {
        let (value, _) = self.psi_and_slope(x, lambda);
        value
    }

    fn psi_and_slope(&self, x: Vec3, lambda: f64) -> (f64, f64) {
        let mut value = -self.epsilon * self.epsilon;
        let mut slope = 0.0;
        for i in 0..3 {
            let w2 = self.weights[i] * self.weights[i];
            let d = x[i] - self.center[i];
            let num = w2 * d * d;
            let den = 1.0 + lambda * w2;
            value += num / (den * den);
            slope -= 2.0 * num * w2 / (den * den * den);
        }
        (value, slope)
    }

    /// Runs Newton from `λ = 0`, reporting every iterate (including `λ₀`).
    pub fn newton_lambda_with(
        &self,
        x: Vec3,
        mut visit: impl FnMut(f64),
    ) -> Result<NewtonRoot, ProjectionError> {
        let eps2 = self.epsilon * self.epsilon;
        if !(self.level(x) > eps2) {
            return Err(ProjectionError::NotExterior);
        }
        let mut lambda = 0.0;
        visit(lambda);
        for it in 0..NEWTON_MAX_ITER {
            let (psi, slope) = self.psi_and_slope(x, lambda);
            if psi.abs() <= NEWTON_TOL * eps2 {
                return Ok(NewtonRoot { lambda, iterations: it });
            }
            let next = lambda - psi / slope;
            // Monotone from the left; a non-increasing step means we are at
            // the rounding floor of ψ.
            if !(next > lambda) {
                return Ok(NewtonRoot { lambda, iterations: it });
            }
            lambda = next;
            visit(lambda);
        }
        let (psi, _) = self.psi_and_slope(x, lambda);
        if psi.abs() <= NEWTON_TOL * eps2 {
            return Ok(NewtonRoot { lambda, iterations: NEWTON_MAX_ITER });
        }
        Err(ProjectionError::MaxIterationsExceeded(NEWTON_MAX_ITER))
    }

    pub fn newton_lambda(&self, x: Vec3) -> Result<NewtonRoot, ProjectionError> {
        self.newton_lambda_with(x, |_| {})
    }

    /// Points inside or on the boundary are returned unchanged.
    pub fn project(&self, x: Vec3) -> Result<Vec3, ProjectionError> {
        let eps2 = self.epsilon * self.epsilon;
        if self.level(x) <= eps2 * (1.0 + BOUNDARY_TOL) {
            return Ok(x);
        }
        let root = self.newton_lambda(x)?;
        Ok(self.boundary_point(x, root.lambda))
    }

    fn boundary_point(&self, x: Vec3, lambda: f64) -> Vec3 {
        let mut g = [0.0; 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let w2 = self.weights[i] * self.weights[i];
            *gi = (x[i] + lambda * w2 * self.center[i]) / (1.0 + lambda * w2);
        }
        Vec3(g)
    }
}

/// Positive root of `ψ` for the set `(w, r, ε)` and exterior point `x`.
pub fn newton_lambda(w: [f64; 3], r: Vec3, x: Vec3, epsilon: f64) -> Result<NewtonRoot, ProjectionError> {
    AxisAlignedSet::new(w, r, epsilon)?.newton_lambda(x)
}

pub fn project_axis_aligned(w: [f64; 3], r: Vec3, x: Vec3, epsilon: f64) -> Result<Vec3, ProjectionError> {
    AxisAlignedSet::new(w, r, epsilon)?.project(x)
}

/// Euclidean projection of `x` onto a general ellipsoid.
pub fn project_ellipsoid(e: &Ellipsoid, x: Vec3) -> Result<Vec3, ProjectionError> {
    let offset = x - e.center();
    if e.shape().quad_form(offset) <= 1.0 + BOUNDARY_TOL {
        return Ok(x);
    }
    let axes = e.principal_axes();
    let local = mat3_tr_mul_vec(&axes.vectors, offset);
    let set = AxisAlignedSet {
        weights: axes.values.map(f64::sqrt),
        center: Vec3::ZERO,
        epsilon: 1.0,
    };
    let g = match set.project(local) {
        Ok(g) => g,
        // Rounding in the rotation can put a boundary point just inside.
        Err(ProjectionError::NotExterior) => local,
        Err(err) => return Err(err),
    };
    Ok(e.center() + mat3_mul_vec(&axes.vectors, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat3;

    const ONES: [f64; 3] = [1.0, 1.0, 1.0];

    #[test]
    fn newton_sphere_roots() {
        let r = newton_lambda(ONES, Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), 1.0).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-12);
        let r = newton_lambda(ONES, Vec3::ZERO, Vec3::new(0.0, 5.0, 0.0), 1.0).unwrap();
        assert!((r.lambda - 4.0).abs() < 1e-12);
    }

    #[test]
    fn newton_requires_exterior_point() {
        assert_eq!(
            newton_lambda(ONES, Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0), 1.0),
            Err(ProjectionError::NotExterior)
        );
        assert_eq!(
            newton_lambda([1.0, 0.0, 1.0], Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), 1.0),
            Err(ProjectionError::InvalidSet)
        );
    }

    #[test]
    fn project_sphere_radially() {
        let g = project_axis_aligned(ONES, Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), 1.0).unwrap();
        assert!((g - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn project_center_is_fixed() {
        let r = Vec3::new(1.0, -2.0, 3.0);
        assert_eq!(project_axis_aligned([1.0, 0.5, 2.0], r, r, 0.3).unwrap(), r);
    }

    #[test]
    fn project_ellipsoid_sphere_and_interior() {
        let e = Ellipsoid::sphere(Vec3::ZERO, 1.0).unwrap();
        let g = project_ellipsoid(&e, Vec3::new(0.0, 0.0, 3.0)).unwrap();
        assert!((g - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let inside = Vec3::new(0.1, -0.2, 0.3);
        assert_eq!(project_ellipsoid(&e, inside).unwrap(), inside);
    }

    #[test]
    fn projection_lands_on_boundary() {
        let set = AxisAlignedSet::new([3.0, 0.2, 1.0], Vec3::new(1.0, 2.0, -1.0), 0.7).unwrap();
        let x = Vec3::new(10.0, -40.0, 3.0);
        let g = set.project(x).unwrap();
        let eps2 = set.epsilon * set.epsilon;
        assert!((set.level(g) - eps2).abs() <= 1e-10 * eps2);
    }

    #[test]
    fn far_points_converge_within_cap() {
        let e = Ellipsoid::from_covariance(Vec3::ZERO, SymMat3::diag(1e-4, 100.0, 1.0)).unwrap();
        let g = project_ellipsoid(&e, Vec3::new(1e4, -3e3, 2e3)).unwrap();
        assert!(e.contains(g, 1e-9));
    }
}
