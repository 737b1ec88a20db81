//! Reproducible random conjunctions for testing and benchmarking.
//!
//! Ellipsoids get log-uniform semi-axes with a bounded axis ratio (so the
//! covariance condition number is at most `max_axis_ratio²`) and a uniformly
//! random orientation. The target center sits at a uniformly drawn distance
//! from the chaser center, in a uniformly random direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Conjunction, Ellipsoid};
use crate::linalg::{Mat3, SymMat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Semi-axis range (km), sampled log-uniformly.
    pub semi_axis_min: f64,
    pub semi_axis_max: f64,
    /// Largest allowed ratio between semi-axes of one ellipsoid.
    pub max_axis_ratio: f64,
    /// Largest center separation (km).
    pub max_separation: f64,
    /// Chaser centers are drawn from `[-extent, extent]³` (km).
    pub position_extent: f64,
    /// Hard-body radius range (km).
    pub radius_min: f64,
    pub radius_max: f64,
    /// Draw a log₁₀ collision probability in `[risk_min, risk_max]`.
    pub risk: Option<(f64, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            semi_axis_min: 0.01,
            semi_axis_max: 10.0,
            max_axis_ratio: 100.0,
            max_separation: 50.0,
            position_extent: 7000.0,
            radius_min: 0.001,
            radius_max: 0.02,
            risk: None,
        }
    }
}

/// A sphere pair with its closed-form margin.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereCase {
    pub conjunction: Conjunction,
    pub chaser_sphere_radius: f64,
    pub target_sphere_radius: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct ConjunctionGenerator {
    rng: ChaCha8Rng,
    config: SynthConfig,
}

impl ConjunctionGenerator {
    pub fn new(seed: u64, config: SynthConfig) -> Self {
        ConjunctionGenerator { rng: ChaCha8Rng::seed_from_u64(seed), config }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self::new(seed, SynthConfig::default())
    }

    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.rng.gen_range(lo.ln()..=hi.ln())).exp()
    }

    pub fn semi_axes(&mut self) -> [f64; 3] {
        let SynthConfig { semi_axis_min: lo, semi_axis_max: hi, max_axis_ratio, .. } = self.config;
        loop {
            let axes = [self.log_uniform(lo, hi), self.log_uniform(lo, hi), self.log_uniform(lo, hi)];
            let max = axes.iter().cloned().fold(f64::MIN, f64::max);
            let min = axes.iter().cloned().fold(f64::MAX, f64::min);
            if max / min <= max_axis_ratio {
                return axes;
            }
        }
    }

    /// Uniform rotation from a random unit quaternion.
    pub fn rotation(&mut self) -> Mat3 {
        let (u1, u2, u3): (f64, f64, f64) = (self.rng.gen(), self.rng.gen(), self.rng.gen());
        let tau = std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (w, x, y, z) = (a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos());
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Uniform point in the ball of radius `r`.
    pub fn point_in_ball(&mut self, r: f64) -> Vec3 {
        loop {
            let v = Vec3::new(
                self.rng.gen_range(-1.0..=1.0),
                self.rng.gen_range(-1.0..=1.0),
                self.rng.gen_range(-1.0..=1.0),
            );
            if v.norm_sq() <= 1.0 {
                return v * r;
            }
        }
    }

    pub fn unit_vector(&mut self) -> Vec3 {
        loop {
            let v = self.point_in_ball(1.0);
            let n = v.norm();
            if n > 1e-3 {
                return v * (1.0 / n);
            }
        }
    }

    /// Covariance `R diag(a²) Rᵀ` for random semi-axes `a` and rotation `R`.
    pub fn covariance(&mut self) -> SymMat3 {
        let axes = self.semi_axes();
        let rot = self.rotation();
        SymMat3::from_eigen(axes.map(|a| a * a), &rot)
    }

    pub fn ellipsoid(&mut self, center: Vec3) -> Ellipsoid {
        loop {
            let cov = self.covariance();
            if let Ok(e) = Ellipsoid::from_covariance(center, cov) {
                return e;
            }
        }
    }

    pub fn conjunction(&mut self, id: impl Into<String>) -> Conjunction {
        let extent = self.config.position_extent;
        let chaser_center = Vec3::new(
            self.rng.gen_range(-extent..=extent),
            self.rng.gen_range(-extent..=extent),
            self.rng.gen_range(-extent..=extent),
        );
        let separation = self.rng.gen_range(0.0..=self.config.max_separation);
        let target_center = chaser_center + self.unit_vector() * separation;
        let chaser = self.ellipsoid(chaser_center);
        let target = self.ellipsoid(target_center);
        let (rmin, rmax) = (self.config.radius_min, self.config.radius_max);
        let cr = self.rng.gen_range(rmin..=rmax);
        let tr = self.rng.gen_range(rmin..=rmax);
        let risk = self.config.risk.map(|(lo, hi)| self.rng.gen_range(lo..=hi));
        Conjunction::new(id, chaser, target, cr, tr, risk).expect("generated parameters are valid")
    }

    /// Two spheres, radii in `[0.1, 5]` km, separation in `[0, 20]` km, so
    /// roughly a fifth of the cases overlap.
    pub fn sphere_case(&mut self, id: impl Into<String>) -> SphereCase {
        let r1 = self.rng.gen_range(0.1..=5.0);
        let r2 = self.rng.gen_range(0.1..=5.0);
        let d = self.rng.gen_range(0.0..=20.0);
        let dir = self.unit_vector();
        let b = self.point_in_ball(100.0);
        let c = b + dir * d;
        let chaser = Ellipsoid::sphere(b, r1).expect("positive radius");
        let target = Ellipsoid::sphere(c, r2).expect("positive radius");
        let conjunction = Conjunction::new(id, chaser, target, 0.0, 0.0, None).expect("valid radii");
        let margin = (c.distance(b) - r1 - r2).max(0.0);
        SphereCase { conjunction, chaser_sphere_radius: r1, target_sphere_radius: r2, margin }
    }
}

pub fn random_suite(seed: u64, n: usize) -> Vec<Conjunction> {
    random_suite_with(seed, n, SynthConfig::default())
}

pub fn random_suite_with(seed: u64, n: usize, config: SynthConfig) -> Vec<Conjunction> {
    let mut g = ConjunctionGenerator::new(seed, config);
    (0..n).map(|i| g.conjunction(format!("r{i:05}"))).collect()
}

pub fn sphere_suite(seed: u64, n: usize) -> Vec<SphereCase> {
    let mut g = ConjunctionGenerator::with_seed(seed);
    (0..n).map(|i| g.sphere_case(format!("s{i:05}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat3_mul, mat3_transpose, IDENTITY3};

    #[test]
    fn rotations_are_orthonormal() {
        let mut g = ConjunctionGenerator::with_seed(7);
        for _ in 0..100 {
            let r = g.rotation();
            let rtr = mat3_mul(&mat3_transpose(&r), &r);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((rtr[i][j] - IDENTITY3[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn suite_respects_bounds() {
        for c in random_suite(11, 200) {
            assert!(c.miss_distance() <= 50.0 + 1e-9);
            for e in [c.chaser, c.target] {
                let axes = e.semi_axes();
                let max = axes.iter().cloned().fold(f64::MIN, f64::max);
                let min = axes.iter().cloned().fold(f64::MAX, f64::min);
                assert!(min >= 0.01 * (1.0 - 1e-9) && max <= 10.0 * (1.0 + 1e-9));
                assert!(max / min <= 100.0 * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn same_seed_same_suite() {
        assert_eq!(random_suite(3, 20), random_suite(3, 20));
        assert_ne!(random_suite(3, 20), random_suite(4, 20));
    }

    #[test]
    fn sphere_cases_have_analytic_margin() {
        for s in sphere_suite(5, 50) {
            let d = s.conjunction.miss_distance();
            let want = (d - s.chaser_sphere_radius - s.target_sphere_radius).max(0.0);
            assert!((s.margin - want).abs() < 1e-12);
        }
    }
}
