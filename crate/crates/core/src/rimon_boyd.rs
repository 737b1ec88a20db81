//! Eigenvalue-based margin estimate (Rimon & Boyd).
//!
//! Map the chaser ellipsoid to the unit ball with `z = B^{1/2}(p - b)`. The
//! target becomes an ellipsoid with shape `C̄ = B^{-1/2} C B^{-1/2}` centered
//! at `c̄ = B^{1/2}(c - b)`. Its point nearest the origin is
//! `λ₁ (λ₁I - C̃)⁻¹ c̄` with `C̃ = C̄⁻¹`, where `λ₁` is the smallest eigenvalue
//! of the non-normal 6×6 matrix
//!
//! ```text
//! [  C̃      -I ]
//! [ -c̃c̃ᵀ    C̃  ]      c̃ = C̄^{-1/2} c̄
//! ```
//!
//! Mapping back gives `y*`; the chaser point nearest `y*` comes from the same
//! construction with `(B̃ = B⁻¹, b̃ = B^{-1/2}(b - y*))`.
//!
//! The eigenproblem is solved without any stabilization. Errors in `λ₁`
//! propagate straight into the margin; this module is a benchmark and never
//! a reference.

use thiserror::Error;

use crate::geometry::{Conjunction, MarginResult, Method};
use crate::linalg::{LinalgError, Mat3, Mat6, SymMat3, SymPower, Vec3};
use crate::overlap::{overlap_test, pencil_center, OverlapError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RbError {
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
}

/// Which reading of the published formulas to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RbReading {
    /// `y* = b + λ₁ B^{-1/2}(λ₁I - C̃)⁻¹ c̄` with `c̄ = B^{1/2}(c - b)`, and
    /// `x* = y* + μ₁(μ₁I - B̃)⁻¹(b - y*)` with `b̃ = B^{-1/2}(b - y*)`. This is
    /// the reading that follows from the point-to-ellipsoid derivation.
    #[default]
    Derived,
    /// The symbols exactly as typeset: `c̄` taken as `c̃`, `b̃ = B̃^{-1/2} b`,
    /// and `x* = y* + μ₁(μ₁I - B̃)⁻¹ b`. Kept to show that it fails even on
    /// spheres that are not centered at the origin.
    AsPrinted,
}

/// Every intermediate quantity of the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbIntermediates {
    pub c_bar: SymMat3,
    pub c_tilde: SymMat3,
    /// `B^{1/2}(c - b)`
    pub c_bar_vec: Vec3,
    pub c_tilde_vec: Vec3,
    pub b_tilde: SymMat3,
    pub b_tilde_vec: Vec3,
    pub lambda1: f64,
    pub mu1: f64,
    pub m1: Mat6,
    pub m2: Mat6,
    pub x_star: Vec3,
    pub y_star: Vec3,
}

fn neg_identity() -> Mat3 {
    [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
}

/// `[[Ã, -I], [-ããᵀ, Ã]]`
pub fn pencil_matrix(a_tilde: &SymMat3, a_vec: Vec3) -> Mat6 {
    let a = a_tilde.to_mat3();
    let mut outer = a_vec.outer(a_vec);
    for v in outer.iter_mut().flatten() {
        *v = -*v;
    }
    Mat6::from_blocks(&a, &neg_identity(), &outer, &a)
}

/// `λ (λI - Ã)⁻¹ v`
fn scaled_resolvent(lambda: f64, a_tilde: &SymMat3, v: Vec3) -> Result<Vec3, LinalgError> {
    let shifted = SymMat3::identity().scale(lambda).sub(a_tilde);
    Ok(shifted.inverse_general()?.mul_vec(v) * lambda)
}

pub fn rb_intermediates(c: &Conjunction, reading: RbReading) -> Result<RbIntermediates, RbError> {
    let b = c.chaser.center();
    let b_shape = c.chaser.shape();
    let target_center = c.target.center();
    let c_shape = c.target.shape();

    let b_sqrt = b_shape.pow(SymPower::Sqrt)?;
    let b_inv_sqrt = b_shape.pow(SymPower::InverseSqrt)?;
    let c_bar = b_inv_sqrt.sandwich(c_shape);
    let c_tilde = c_bar.pow(SymPower::Inverse)?;
    let c_bar_vec = b_sqrt.mul_vec(target_center - b);
    let c_tilde_vec = c_bar.pow(SymPower::InverseSqrt)?.mul_vec(c_bar_vec);

    let m1 = pencil_matrix(&c_tilde, c_tilde_vec);
    let lambda1 = m1.min_real_eigenvalue()?;
    let rhs = match reading {
        RbReading::Derived => c_bar_vec,
        RbReading::AsPrinted => c_tilde_vec,
    };
    let y_star = b + b_inv_sqrt.mul_vec(scaled_resolvent(lambda1, &c_tilde, rhs)?);

    let b_tilde = b_shape.pow(SymPower::Inverse)?;
    let (offset, b_tilde_vec) = match reading {
        RbReading::Derived => {
            let offset = b - y_star;
            (offset, b_inv_sqrt.mul_vec(offset))
        }
        // B̃^{-1/2} = B^{1/2}
        RbReading::AsPrinted => (b, b_sqrt.mul_vec(b)),
    };
    let m2 = pencil_matrix(&b_tilde, b_tilde_vec);
    let mu1 = m2.min_real_eigenvalue()?;
    let x_star = y_star + scaled_resolvent(mu1, &b_tilde, offset)?;

    Ok(RbIntermediates {
        c_bar,
        c_tilde,
        c_bar_vec,
        c_tilde_vec,
        b_tilde,
        b_tilde_vec,
        lambda1,
        mu1,
        m1,
        m2,
        x_star,
        y_star,
    })
}

/// Margin by the eigenvalue construction, with the overlap pre-check.
///
/// The result is reported as computed: it is not clamped to the miss
/// distance or otherwise repaired. A numerical breakdown (no real
/// eigenvalue, a singular resolvent, or a matrix power that loses
/// definiteness) is reported as a non-converged result with a NaN margin.
pub fn rb_margin(c: &Conjunction) -> Result<MarginResult, RbError> {
    rb_margin_with(c, RbReading::default())
}

pub fn rb_margin_with(c: &Conjunction, reading: RbReading) -> Result<MarginResult, RbError> {
    let report = overlap_test(c)?;
    if report.overlapping {
        let point = pencil_center(&c.chaser, &c.target, report.lambda_star)?;
        return Ok(MarginResult::overlapping(point, 0, Method::OverlapOnly));
    }
    match rb_intermediates(c, reading) {
        Ok(rb) => Ok(MarginResult::from_points(rb.x_star, rb.y_star, 0, true, Method::RimonBoyd)),
        Err(RbError::Linalg(_)) => {
            let mut r = MarginResult::from_points(c.chaser.center(), c.target.center(), 0, false, Method::RimonBoyd);
            r.margin = f64::NAN;
            Ok(r)
        }
        Err(err) => Err(err),
    }
}

/// `‖M₁M₁ᵀ - M₁ᵀM₁‖_F` for the first pencil matrix. Strictly positive for
/// every conjunction, since the rank-one block can never square to `I`.
pub fn rb_nonnormality_witness(c: &Conjunction) -> Result<f64, RbError> {
    let b_shape = c.chaser.shape();
    let b_sqrt = b_shape.pow(SymPower::Sqrt)?;
    let b_inv_sqrt = b_shape.pow(SymPower::InverseSqrt)?;
    let c_bar = b_inv_sqrt.sandwich(c.target.shape());
    let c_tilde = c_bar.pow(SymPower::Inverse)?;
    let c_tilde_vec = c_bar
        .pow(SymPower::InverseSqrt)?
        .mul_vec(b_sqrt.mul_vec(c.target.center() - c.chaser.center()));
    Ok(commutator_norm(&pencil_matrix(&c_tilde, c_tilde_vec)))
}

pub fn commutator_norm(m: &Mat6) -> f64 {
    let mt = m.transpose();
    m.mul(&mt).sub(&mt.mul(m)).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ellipsoid;

    fn spheres(a: Vec3, ra: f64, b: Vec3, rb: f64) -> Conjunction {
        Conjunction::pair(Ellipsoid::sphere(a, ra).unwrap(), Ellipsoid::sphere(b, rb).unwrap())
    }

    #[test]
    fn unit_spheres_three_apart() {
        let c = spheres(Vec3::ZERO, 1.0, Vec3::new(3.0, 0.0, 0.0), 1.0);
        let r = rb_margin(&c).unwrap();
        assert!((r.margin - 1.0).abs() < 1e-6, "{}", r.margin);
        assert_eq!(r.method, Method::RimonBoyd);
    }

    #[test]
    fn off_origin_spheres_need_the_derived_reading() {
        let c = spheres(Vec3::new(10.0, -4.0, 2.0), 1.5, Vec3::new(13.0, 0.0, 2.0), 0.5);
        let want = 5.0 - 2.0;
        let derived = rb_margin_with(&c, RbReading::Derived).unwrap();
        assert!((derived.margin - want).abs() < 1e-6, "{}", derived.margin);
        let printed = rb_margin_with(&c, RbReading::AsPrinted).unwrap();
        assert!((printed.margin - want).abs() > 1e-3 || printed.margin.is_nan());
    }

    #[test]
    fn overlapping_is_zero() {
        let c = spheres(Vec3::ZERO, 1.0, Vec3::new(1.0, 0.0, 0.0), 1.0);
        let r = rb_margin(&c).unwrap();
        assert_eq!(r.margin, 0.0);
        assert!(r.overlap);
    }

    #[test]
    fn anisotropic_points_are_on_the_boundaries() {
        let chaser = Ellipsoid::from_covariance(
            Vec3::new(1.0, 2.0, -1.0),
            SymMat3::new(4.0, 0.5, 0.2, 1.0, -0.1, 0.5),
        )
        .unwrap();
        let target = Ellipsoid::from_covariance(
            Vec3::new(8.0, -3.0, 2.0),
            SymMat3::new(0.5, 0.1, 0.0, 2.0, 0.3, 1.0),
        )
        .unwrap();
        let c = Conjunction::pair(chaser, target);
        let rb = rb_intermediates(&c, RbReading::Derived).unwrap();
        assert!((chaser.level(rb.x_star) - 1.0).abs() < 1e-8);
        assert!((target.level(rb.y_star) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn witness_positive_for_distinct_centers() {
        let c = spheres(Vec3::ZERO, 1.0, Vec3::new(3.0, 1.0, 0.0), 1.0);
        assert!(rb_nonnormality_witness(&c).unwrap() > 0.0);
    }

    #[test]
    fn witness_vanishes_on_a_symmetric_placeholder() {
        // [[A, -I], [-I, A]] is symmetric, hence normal.
        let a = SymMat3::diag(2.0, 3.0, 4.0).to_mat3();
        let m = Mat6::from_blocks(&a, &neg_identity(), &neg_identity(), &a);
        assert_eq!(commutator_norm(&m), 0.0);
        // c̃ = 0 alone does not make the pencil normal.
        assert!(commutator_norm(&pencil_matrix(&SymMat3::diag(2.0, 3.0, 4.0), Vec3::ZERO)) > 0.0);
    }
}
