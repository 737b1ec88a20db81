//! Ellipsoids, conjunctions and solver results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, SymEigen, SymMat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("covariance or shape matrix is not positive definite: {0}")]
    NotPositiveDefinite(#[from] LinalgError),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("sigma must be finite and > 0, got {0}")]
    InvalidSigma(f64),
    #[error("hard-body radius must be finite and >= 0, got {0}")]
    InvalidRadius(f64),
    #[error("risk is log10 of a probability and must be <= 0, got {0}")]
    InvalidRisk(f64),
}

/// `{ p : (p - center)ᵀ shape (p - center) <= 1 }`.
///
/// The covariance (`shape⁻¹`) and the principal-axis decomposition of the
/// shape are cached since every solver needs one or the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    center: Vec3,
    shape: SymMat3,
    covariance: SymMat3,
    axes: SymEigen,
}

impl Ellipsoid {
    /// From a position covariance `Σ` (km²); the shape is `Σ⁻¹`.
    pub fn from_covariance(center: Vec3, covariance: SymMat3) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::NonFinite("center"));
        }
        if !covariance.is_finite() {
            return Err(GeometryError::NonFinite("covariance"));
        }
        let shape = covariance.cholesky()?.inverse();
        Self::assemble(center, shape, covariance)
    }

    /// From a shape matrix `A` (km⁻²) directly.
    pub fn from_shape(center: Vec3, shape: SymMat3) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::NonFinite("center"));
        }
        if !shape.is_finite() {
            return Err(GeometryError::NonFinite("shape"));
        }
        let covariance = shape.cholesky()?.inverse();
        Self::assemble(center, shape, covariance)
    }

    pub fn sphere(center: Vec3, radius: f64) -> Result<Self, GeometryError> {
        let r2 = radius * radius;
        Self::from_covariance(center, SymMat3::diag(r2, r2, r2))
    }

    fn assemble(center: Vec3, shape: SymMat3, covariance: SymMat3) -> Result<Self, GeometryError> {
        shape.cholesky()?;
        let axes = shape.eigen();
        if let Some((i, &v)) = axes.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(LinalgError::NotPositiveDefinite { pivot: i, value: v }.into());
        }
        Ok(Ellipsoid { center, shape, covariance, axes })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn shape(&self) -> &SymMat3 {
        &self.shape
    }

    pub fn covariance(&self) -> &SymMat3 {
        &self.covariance
    }

    /// Eigen-decomposition of the shape matrix; the columns are the
    /// principal axes.
    pub fn principal_axes(&self) -> &SymEigen {
        &self.axes
    }

    /// Semi-axis lengths, longest first.
    pub fn semi_axes(&self) -> [f64; 3] {
        self.axes.values.map(|v| 1.0 / v.sqrt())
    }

    /// `(p - center)ᵀ shape (p - center)`
    pub fn level(&self, p: Vec3) -> f64 {
        self.shape.quad_form(p - self.center)
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        self.level(p) <= 1.0 + tol
    }

    /// Scales to a `sigma`-level ellipsoid: semi-axes grow by `sigma`.
    pub fn scale_sigma(&self, sigma: f64) -> Result<Ellipsoid, GeometryError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(GeometryError::InvalidSigma(sigma));
        }
        if sigma == 1.0 {
            return Ok(*self);
        }
        let s2 = sigma * sigma;
        let mut axes = self.axes;
        axes.values = axes.values.map(|v| v / s2);
        Ok(Ellipsoid {
            center: self.center,
            shape: self.shape.scale(1.0 / s2),
            covariance: self.covariance.scale(s2),
            axes,
        })
    }
}

/// A chaser/target ellipsoid pair with hard-body radii.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjunction {
    pub id: String,
    pub chaser: Ellipsoid,
    pub target: Ellipsoid,
    pub chaser_radius: f64,
    pub target_radius: f64,
    /// log₁₀ of the collision probability, when known.
    pub risk: Option<f64>,
}

impl Conjunction {
    pub fn new(
        id: impl Into<String>,
        chaser: Ellipsoid,
        target: Ellipsoid,
        chaser_radius: f64,
        target_radius: f64,
        risk: Option<f64>,
    ) -> Result<Self, GeometryError> {
        for r in [chaser_radius, target_radius] {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(GeometryError::InvalidRadius(r));
            }
        }
        if let Some(risk) = risk {
            if !(risk <= 0.0) {
                return Err(GeometryError::InvalidRisk(risk));
            }
        }
        Ok(Conjunction {
            id: id.into(),
            chaser,
            target,
            chaser_radius,
            target_radius,
            risk,
        })
    }

    /// A conjunction with zero radii and no risk, for solver-only use.
    pub fn pair(chaser: Ellipsoid, target: Ellipsoid) -> Self {
        Conjunction {
            id: String::new(),
            chaser,
            target,
            chaser_radius: 0.0,
            target_radius: 0.0,
            risk: None,
        }
    }

    pub fn miss_distance(&self) -> f64 {
        miss_distance(self)
    }

    pub fn combined_radius(&self) -> f64 {
        self.chaser_radius + self.target_radius
    }

    pub fn scale_sigma(&self, sigma: f64) -> Result<Conjunction, GeometryError> {
        Ok(Conjunction {
            chaser: self.chaser.scale_sigma(sigma)?,
            target: self.target.scale_sigma(sigma)?,
            ..self.clone()
        })
    }
}

pub fn miss_distance(c: &Conjunction) -> f64 {
    c.chaser.center().distance(c.target.center())
}

pub fn scale_sigma(e: &Ellipsoid, sigma: f64) -> Result<Ellipsoid, GeometryError> {
    e.scale_sigma(sigma)
}

pub fn contains(e: &Ellipsoid, p: Vec3, tol: f64) -> bool {
    e.contains(p, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OverlapOnly,
    RimonBoyd,
    FrankWolfe,
    Fista,
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::OverlapOnly => "overlap_only",
            Method::RimonBoyd => "rimon_boyd",
            Method::FrankWolfe => "frank_wolfe",
            Method::Fista => "fista",
            Method::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output of every margin solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginResult {
    /// km; exactly 0 when `overlap` is set.
    pub margin: f64,
    /// Closest point in the chaser ellipsoid.
    pub x_star: Vec3,
    /// Closest point in the target ellipsoid.
    pub y_star: Vec3,
    pub iterations: usize,
    pub converged: bool,
    pub overlap: bool,
    pub method: Method,
}

impl MarginResult {
    pub(crate) fn from_points(x: Vec3, y: Vec3, iterations: usize, converged: bool, method: Method) -> Self {
        MarginResult {
            margin: x.distance(y),
            x_star: x,
            y_star: y,
            iterations,
            converged,
            overlap: false,
            method,
        }
    }

    pub(crate) fn overlapping(point: Vec3, iterations: usize, method: Method) -> Self {
        MarginResult {
            margin: 0.0,
            x_star: point,
            y_star: point,
            iterations,
            converged: true,
            overlap: true,
            method,
        }
    }
}
