//! Reference margin by alternating projections.
//!
//! Starting from the chaser center, project onto the target, then back onto
//! the chaser, and repeat. For disjoint compact convex sets the pair
//! converges to a pair of closest points, and at the fixed point each point
//! is the projection of the other. Slow but simple, and it only trusts the
//! projection module.

use crate::geometry::{Conjunction, MarginResult, Method};
use crate::overlap::{overlap_test, pencil_center, OverlapError};
use crate::projection::{project_ellipsoid, ProjectionError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Stop once neither point moves more than this (km).
    pub tol: f64,
    pub max_iter: usize,
    /// Return margin 0 right away when the overlap test says the sets meet.
    pub overlap_shortcut: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { tol: 1e-9, max_iter: 1_000_000, overlap_shortcut: true }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

pub fn solve_oracle(c: &Conjunction, opts: &OracleOptions) -> Result<MarginResult, OracleError> {
    if opts.overlap_shortcut {
        let report = overlap_test(c)?;
        if report.overlapping {
            let point = pencil_center(&c.chaser, &c.target, report.lambda_star)?;
            return Ok(MarginResult::overlapping(point, 0, Method::OverlapOnly));
        }
    }
    let mut x = c.chaser.center();
    let mut y = project_ellipsoid(&c.target, x)?;
    for k in 1..=opts.max_iter {
        let x_next = project_ellipsoid(&c.chaser, y)?;
        let y_next = project_ellipsoid(&c.target, x_next)?;
        let step = x_next.distance(x).max(y_next.distance(y));
        x = x_next;
        y = y_next;
        if step <= opts.tol {
            return Ok(MarginResult::from_points(x, y, k, true, Method::Oracle));
        }
    }
    Ok(MarginResult::from_points(x, y, opts.max_iter, false, Method::Oracle))
}

/// Signed estimation error `estimate - truth` in km.
pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    estimate - truth
}
