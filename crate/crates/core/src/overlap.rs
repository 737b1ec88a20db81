//! Ellipsoid intersection test.
//!
//! For `λ ∈ [0, 1]` let `Σ_λ = λB + (1-λ)C` and
//!
//! ```text
//! K(λ) = 1 - λ(1-λ) (c-b)ᵀ C Σ_λ⁻¹ B (c-b)
//! ```
//!
//! where `(b, B)` and `(c, C)` are the chaser and target center/shape. `K`
//! is convex with `K(0) = K(1) = 1`; the ellipsoids are disjoint exactly when
//! its minimum over `[0, 1]` is negative.

use thiserror::Error;

use crate::geometry::{Conjunction, Ellipsoid};
use crate::linalg::{LinalgError, Vec3};

/// `min K >= -K_TOLERANCE` counts as overlapping (touching included).
pub const K_TOLERANCE: f64 = 1e-12;
/// Absolute tolerance on λ for the Brent search.
pub const LAMBDA_TOLERANCE: f64 = 1e-10;
pub const BRENT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverlapError {
    #[error("Σ_λ is not positive definite at λ = {lambda}: {source}")]
    SingularSigmaLambda { lambda: f64, source: LinalgError },
    #[error("brent minimization did not converge in {0} iterations")]
    MaxIterationsExceeded(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapReport {
    pub overlapping: bool,
    pub lambda_star: f64,
    pub k_min: f64,
    pub evaluations: usize,
}

impl OverlapReport {
    /// `|min K|` below `band` (but not overlapping) marks an instance whose
    /// margin is too close to zero for reliable reference solutions.
    pub fn near_tangent(&self, band: f64) -> bool {
        self.k_min.abs() < band
    }
}

/// `K(λ)` for the chaser/target pair of `c`.
pub fn k_of_lambda(c: &Conjunction, lambda: f64) -> Result<f64, OverlapError> {
    k_of_lambda_pair(&c.chaser, &c.target, lambda)
}

pub fn k_of_lambda_pair(chaser: &Ellipsoid, target: &Ellipsoid, lambda: f64) -> Result<f64, OverlapError> {
    let b = chaser.shape();
    let cm = target.shape();
    let d = target.center() - chaser.center();
    let weight = lambda * (1.0 - lambda);
    if weight == 0.0 {
        return Ok(1.0);
    }
    let sigma = b.scale(lambda).add(&cm.scale(1.0 - lambda));
    let chol = sigma
        .cholesky()
        .map_err(|source| OverlapError::SingularSigmaLambda { lambda, source })?;
    let z = chol.solve(b.mul_vec(d));
    Ok(1.0 - weight * cm.mul_vec(d).dot(z))
}

/// `m_λ = Σ_λ⁻¹ (λ B b + (1-λ) C c)`, the center of the pencil ellipsoid.
/// When `K(λ*) >= 0` at the minimizer it lies in both ellipsoids.
pub fn pencil_center(chaser: &Ellipsoid, target: &Ellipsoid, lambda: f64) -> Result<Vec3, OverlapError> {
    let b = chaser.shape();
    let cm = target.shape();
    let sigma = b.scale(lambda).add(&cm.scale(1.0 - lambda));
    let chol = sigma
        .cholesky()
        .map_err(|source| OverlapError::SingularSigmaLambda { lambda, source })?;
    let rhs = b.mul_vec(chaser.center()) * lambda + cm.mul_vec(target.center()) * (1.0 - lambda);
    Ok(chol.solve(rhs))
}

/// Outcome of a scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub argmin: f64,
    pub min: f64,
    pub evaluations: usize,
}

/// Brent's derivative-free minimization of `f` on `[lo, hi]`.
///
/// Golden-section steps safeguard parabolic interpolation. `tol` is an
/// absolute tolerance on the abscissa.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<ScalarMin, OverlapError>
where
    F: FnMut(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - √5) / 2
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };

    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for evaluations in 1..=max_iter {
        let m = 0.5 * (a + b);
        let tol1 = 2.0 * f64::EPSILON * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(ScalarMin { argmin: x, min: fx, evaluations });
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // Trial parabolic fit through x, w, v.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(OverlapError::MaxIterationsExceeded(max_iter))
}

/// Minimizes `K` on `[0, 1]` and classifies the pair.
pub fn overlap_test(c: &Conjunction) -> Result<OverlapReport, OverlapError> {
    overlap_test_pair(&c.chaser, &c.target)
}

pub fn overlap_test_pair(chaser: &Ellipsoid, target: &Ellipsoid) -> Result<OverlapReport, OverlapError> {
    let mut failure = None;
    let found = brent_minimize(
        |lambda| match k_of_lambda_pair(chaser, target, lambda) {
            Ok(k) => k,
            Err(err) => {
                failure.get_or_insert(err);
                f64::INFINITY
            }
        },
        0.0,
        1.0,
        LAMBDA_TOLERANCE,
        BRENT_MAX_ITER,
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(OverlapReport {
        overlapping: found.min >= -K_TOLERANCE,
        lambda_star: found.argmin.clamp(0.0, 1.0),
        k_min: found.min,
        evaluations: found.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat3;

    fn spheres(d: f64) -> Conjunction {
        Conjunction::pair(
            Ellipsoid::sphere(Vec3::ZERO, 1.0).unwrap(),
            Ellipsoid::sphere(Vec3::new(d, 0.0, 0.0), 1.0).unwrap(),
        )
    }

    #[test]
    fn k_on_spheres_matches_closed_form() {
        for d in [0.0, 1.0, 2.0, 3.0, 7.5] {
            let c = spheres(d);
            for lambda in [0.1, 0.37, 0.5, 0.9] {
                let want = 1.0 - lambda * (1.0 - lambda) * d * d;
                assert!((k_of_lambda(&c, lambda).unwrap() - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn k_endpoints_are_one() {
        let c = spheres(4.0);
        assert_eq!(k_of_lambda(&c, 0.0).unwrap(), 1.0);
        assert_eq!(k_of_lambda(&c, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn k_agrees_with_expanded_form() {
        let chaser = Ellipsoid::from_covariance(
            Vec3::new(1.0, -2.0, 0.5),
            SymMat3::new(4.0, 0.3, -0.1, 1.0, 0.2, 0.25),
        )
        .unwrap();
        let target = Ellipsoid::from_covariance(
            Vec3::new(4.0, 1.0, -1.5),
            SymMat3::new(0.5, -0.1, 0.05, 2.0, 0.4, 1.5),
        )
        .unwrap();
        let lambda = 0.37;
        // K = 1 - λ bᵀBb - (1-λ) cᵀCc + m_λᵀ Σ_λ m_λ
        let (b, bm) = (chaser.center(), chaser.shape());
        let (c, cm) = (target.center(), target.shape());
        let sigma = bm.scale(lambda).add(&cm.scale(1.0 - lambda));
        let m = pencil_center(&chaser, &target, lambda).unwrap();
        let expanded = 1.0 - lambda * bm.quad_form(b) - (1.0 - lambda) * cm.quad_form(c) + sigma.quad_form(m);
        let direct = k_of_lambda(&Conjunction::pair(chaser, target), lambda).unwrap();
        assert!((expanded - direct).abs() < 1e-10, "{expanded} vs {direct}");
    }

    #[test]
    fn brent_quadratic() {
        let r = brent_minimize(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10, 200).unwrap();
        assert!((r.argmin - 0.3).abs() < 1e-8);
        assert_eq!(r.min, (r.argmin - 0.3) * (r.argmin - 0.3));
    }

    #[test]
    fn brent_sphere_k() {
        let r = brent_minimize(|l| 1.0 - 9.0 * l * (1.0 - l), 0.0, 1.0, 1e-10, 200).unwrap();
        assert!((r.argmin - 0.5).abs() < 1e-8);
        assert!((r.min + 1.25).abs() < 1e-12);
    }

    #[test]
    fn brent_boundary_minimum() {
        let r = brent_minimize(|l| l, 0.0, 1.0, 1e-10, 200).unwrap();
        assert!(r.argmin.abs() < 1e-9, "{}", r.argmin);
    }

    #[test]
    fn brent_iteration_cap() {
        let r = brent_minimize(|x| (x - 0.3f64).abs().sqrt(), 0.0, 1.0, 1e-10, 3);
        assert_eq!(r, Err(OverlapError::MaxIterationsExceeded(3)));
    }

    #[test]
    fn overlap_test_sphere_cases() {
        let far = overlap_test(&spheres(3.0)).unwrap();
        assert!(!far.overlapping);
        assert!((far.k_min + 1.25).abs() < 1e-12);
        assert!((far.lambda_star - 0.5).abs() < 1e-8);

        let near = overlap_test(&spheres(1.0)).unwrap();
        assert!(near.overlapping);
        assert!((near.k_min - 0.75).abs() < 1e-12);

        let touching = overlap_test(&spheres(2.0)).unwrap();
        assert!(touching.overlapping);
        assert!(touching.k_min.abs() < 1e-12);
    }
}
