//! Minimum distance ("margin") between the positional-uncertainty ellipsoids
//! of two objects in a conjunction.
//!
//! Solvers:
//! - [`frank_wolfe`]: centralized, projection-free, closed-form steps.
//! - [`fista`]: distributed; each agent knows only its own ellipsoid.
//! - [`rimon_boyd`]: closed-form eigenvalue construction, kept as a benchmark.
//! - [`oracle`]: alternating projections, the slow reference.
//!
//! [`overlap`] decides intersection exactly and short-circuits the solvers.

pub mod fista;
pub mod frank_wolfe;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod overlap;
pub mod projection;
pub mod rimon_boyd;
pub mod screening;
pub mod synth;

pub use fista::{solve_fista, FistaOptions};
pub use frank_wolfe::{solve_fw, FwOptions};
pub use geometry::{Conjunction, Ellipsoid, MarginResult, Method};
pub use linalg::{SymMat3, Vec3};
pub use oracle::{solve_oracle, OracleOptions};
pub use overlap::{overlap_test, OverlapReport};
pub use rimon_boyd::rb_margin;
