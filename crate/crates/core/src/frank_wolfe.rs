//! Centralized margin solver: Frank-Wolfe with exact line search.
//!
//! Both sub-steps are closed form. The linear minimization over an
//! ellipsoid with covariance `Σ` in direction `d` is attained at
//! `center + Σd / ‖d‖_Σ`, and the step along `(s₁ - x, s₂ - y)` minimizes a
//! scalar quadratic, clipped to `[0, 1]`. Iterates stay feasible without any
//! projection.

use thiserror::Error;

use crate::geometry::{Conjunction, MarginResult, Method};
use crate::linalg::{SymMat3, Vec3};
use crate::overlap::{overlap_test, pencil_center, OverlapError};

/// Iterates closer than this are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FwError {
    #[error("iterates coincide; the gradient vanishes")]
    CoincidentIterates,
    #[error("search direction is degenerate; any step is optimal")]
    DegenerateDirection,
}

/// Linear-minimization vertices for the chaser and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmoPair {
    pub s1: Vec3,
    pub s2: Vec3,
}

/// `argmin` of `⟨s₁, x - y⟩ + ⟨s₂, y - x⟩` over the two ellipsoids.
pub fn lmo(c: &Conjunction, x: Vec3, y: Vec3) -> Result<LmoPair, FwError> {
    let d = y - x;
    if d.norm() < COINCIDENCE_TOL {
        return Err(FwError::CoincidentIterates);
    }
    let s1 = support_point(c.chaser.center(), c.chaser.covariance(), d);
    let s2 = support_point(c.target.center(), c.target.covariance(), -d);
    Ok(LmoPair { s1, s2 })
}

fn support_point(center: Vec3, covariance: &SymMat3, direction: Vec3) -> Vec3 {
    let sd = covariance.mul_vec(direction);
    let norm = direction.dot(sd).sqrt();
    center + sd * (1.0 / norm)
}

/// Exact minimizer over `[0, 1]` of `‖(x - y) + α((s₁ - s₂) - (x - y))‖²`.
pub fn line_search_alpha(x: Vec3, y: Vec3, s1: Vec3, s2: Vec3) -> Result<f64, FwError> {
    let r = x - y;
    let p = s1 - s2;
    let u = r - p;
    let denom = u.norm_sq();
    if u.norm() < COINCIDENCE_TOL {
        return Err(FwError::DegenerateDirection);
    }
    Ok((u.dot(r) / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    /// Stop once neither point moves more than this (km).
    pub tol_step: f64,
    pub max_iter: usize,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions { tol_step: 1e-3, max_iter: 10_000 }
    }
}

/// One completed iteration, reported to observers of [`solve_fw_observed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwIterate {
    pub k: usize,
    pub x: Vec3,
    pub y: Vec3,
    /// `‖x - y‖²` after the step.
    pub objective: f64,
    /// Duality gap `∇f(z)ᵀ(z - s)` evaluated before the step.
    pub gap: f64,
    pub alpha: f64,
}

pub fn solve_fw(c: &Conjunction, opts: &FwOptions) -> Result<MarginResult, OverlapError> {
    solve_fw_observed(c, opts, |_| {})
}

/// Like [`solve_fw`], calling `observe` after every iteration.
pub fn solve_fw_observed(
    c: &Conjunction,
    opts: &FwOptions,
    mut observe: impl FnMut(&FwIterate),
) -> Result<MarginResult, OverlapError> {
    let report = overlap_test(c)?;
    if report.overlapping {
        let point = pencil_center(&c.chaser, &c.target, report.lambda_star)?;
        return Ok(MarginResult::overlapping(point, 0, Method::OverlapOnly));
    }

    // Iterate in a frame centered on the chaser so that differences of
    // nearby points do not cancel against large absolute coordinates.
    let origin = c.chaser.center();
    let target_center = c.target.center() - origin;
    let (chaser_cov, target_cov) = (c.chaser.covariance(), c.target.covariance());
    let done = |x: Vec3, y: Vec3, k: usize, converged: bool| {
        MarginResult::from_points(x + origin, y + origin, k, converged, Method::FrankWolfe)
    };

    let mut x = Vec3::ZERO;
    let mut y = target_center;
    for k in 0..opts.max_iter {
        let d = y - x;
        if d.norm() < COINCIDENCE_TOL {
            return Ok(done(x, y, k, true));
        }
        let s1 = support_point(Vec3::ZERO, chaser_cov, d);
        let s2 = support_point(target_center, target_cov, -d);
        let r = x - y;
        let gap = 2.0 * r.dot(r - (s1 - s2));
        let alpha = match line_search_alpha(x, y, s1, s2) {
            Ok(a) => a,
            Err(_) => return Ok(done(x, y, k, true)),
        };
        let dx = (s1 - x) * alpha;
        let dy = (s2 - y) * alpha;
        x += dx;
        y += dy;
        observe(&FwIterate {
            k: k + 1,
            x: x + origin,
            y: y + origin,
            objective: (x - y).norm_sq(),
            gap,
            alpha,
        });
        if dx.norm().max(dy.norm()) <= opts.tol_step {
            return Ok(done(x, y, k + 1, true));
        }
    }
    Ok(done(x, y, opts.max_iter, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ellipsoid;

    fn spheres(d: f64) -> Conjunction {
        Conjunction::pair(
            Ellipsoid::sphere(Vec3::ZERO, 1.0).unwrap(),
            Ellipsoid::sphere(Vec3::new(d, 0.0, 0.0), 1.0).unwrap(),
        )
    }

    #[test]
    fn lmo_on_spheres() {
        let c = spheres(3.0);
        let pair = lmo(&c, Vec3::ZERO, Vec3::new(3.0, 0.0, 0.0)).unwrap();
        assert!((pair.s1 - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((pair.s2 - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lmo_axis_aligned() {
        let chaser = Ellipsoid::from_covariance(Vec3::ZERO, SymMat3::diag(4.0, 1.0, 1.0)).unwrap();
        let c = Conjunction::pair(chaser, Ellipsoid::sphere(Vec3::new(0.0, 5.0, 0.0), 1.0).unwrap());
        let pair = lmo(&c, Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((pair.s1 - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lmo_rejects_coincident_points() {
        let c = spheres(3.0);
        let p = Vec3::new(0.5, 0.0, 0.0);
        assert_eq!(lmo(&c, p, p), Err(FwError::CoincidentIterates));
    }

    #[test]
    fn line_search_clips_to_one() {
        // r = (-3,0,0), p = (-1,0,0): unclipped step 1.5
        let alpha = line_search_alpha(
            Vec3::ZERO,
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn line_search_stationary_is_degenerate() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(2.0, 0.0, 0.0);
        assert_eq!(line_search_alpha(x, y, x, y), Err(FwError::DegenerateDirection));
    }

    #[test]
    fn spheres_converge_immediately() {
        let r = solve_fw(&spheres(3.0), &FwOptions::default()).unwrap();
        assert!((r.margin - 1.0).abs() < 1e-6);
        assert!(r.iterations <= 2);
        assert!(r.converged && !r.overlap);
        assert_eq!(r.method, Method::FrankWolfe);
    }

    #[test]
    fn identical_ellipsoids_take_overlap_path() {
        let r = solve_fw(&spheres(0.0), &FwOptions::default()).unwrap();
        assert_eq!(r.margin, 0.0);
        assert!(r.overlap);
        assert_eq!(r.x_star, r.y_star);
    }
}
