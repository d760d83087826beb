//! Core library for robust interval-valued multiobjective optimization.
//!
//! Models problems with interval objectives and constraint-wise data
//! uncertainty, and certifies or constructs approximate Pareto solutions of
//! the robust counterpart:
//!
//! - [`interval`]: closed-interval arithmetic and the LU order relations.
//! - [`expr`]: a small expression language over decision variables and
//!   uncertainty parameters, with evaluation and subdifferential surrogates.
//! - [`model`]: the problem data model (objectives, uncertain constraints,
//!   polyhedral ground set, precision vector) and its file format.
//! - [`setcalc`]: polytopes, polyhedral cones, and the distance from the
//!   origin to a weighted Minkowski sum plus a cone.
//! - [`classify`]: grid-falsification classification against the approximate
//!   solution concepts, and the theta-to-epsilon implication chain.
//! - [`kkt`]: KKT-pair-up-to-epsilon certificates.
//! - [`penalty`]: quadratic-penalty construction of candidate solutions and
//!   multipliers.
//! - [`convexity`]: generalized-convexity certification at a point.
//! - [`wolfe`]: the Wolfe-type dual problem and its duality checks.
//! - [`saddle`]: the epsilon-interval-valued vector Lagrangian and quasi
//!   Pareto saddle-point verification.
//! - [`harness`]: randomized property suites for the theorem-level claims.

pub mod classify;
pub mod convexity;
mod error;
pub mod expr;
pub mod harness;
pub mod interval;
pub mod kkt;
pub(crate) mod linalg;
pub mod model;
pub mod penalty;
pub mod saddle;
pub mod setcalc;
pub mod wolfe;

pub use classify::{Classification, Grid, Lemma32Report, Verdict};
pub use convexity::{ConvexityNotion, ConvexityVerdict};
pub use error::{Error, Result};
pub use expr::{Expr, SubdiffResult};
pub use interval::{Interval, IntervalVector};
pub use kkt::KktCertificate;
pub use model::{GroundSet, Precision, Problem, UncertaintySet};
pub use penalty::{PenaltyOptions, PenaltyRun};
pub use saddle::SaddleReport;
pub use setcalc::{DistWitness, PolyCone, Polytope};
pub use wolfe::{DualConfig, DualPoint};

/// Tolerances shared across certificates and classifiers.
///
/// Order relations on intervals are always exact; these tolerances belong to
/// the callers that map floating-point residuals onto logical verdicts.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Slack added to the inclusion allowance in KKT / dual-feasibility checks.
    pub tol_incl: f64,
    /// Feasibility slack on robust constraint values.
    pub tol_feas: f64,
    /// Absolute tolerance for active-branch and active-constraint detection.
    pub tol_active: f64,
    /// Tolerance for classifying the sign of a robust constraint value.
    pub tol_sign: f64,
    /// Threshold above which a multiplier counts as strictly positive.
    pub tol_pos: f64,
    /// Strictness slack in LU dominance scans (0 = exact comparisons).
    pub tol_strict: f64,
    /// Slack used to enforce strict reverse inequalities in falsified
    /// antecedents of the pseudo-quasi convexity notions.
    pub delta_strict: f64,
    /// Maximum constraint-row violation accepted by the convexity
    /// feasibility routine.
    pub tol_convex_feas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_incl: 1e-9,
            tol_feas: 1e-9,
            tol_active: 1e-9,
            tol_sign: 1e-9,
            tol_pos: 1e-12,
            tol_strict: 0.0,
            delta_strict: 1e-9,
            tol_convex_feas: 1e-7,
        }
    }
}
