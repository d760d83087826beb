//! Problem data model: interval objectives, uncertain constraints over
//! finite sample sets, a polyhedral ground set, and the precision vector.
//!
//! Compact uncertainty sets are represented by finite sample sets (boxes are
//! discretized by per-axis uniform grids declared in the problem file), so
//! the worst-case value and the active set are exactly computable; reports
//! flag that semi-infinite exactness is out of scope.
//!
//! # Problem files
//!
//! TOML with the following sections (see the repository README for the
//! normative description):
//!
//! ```toml
//! [problem]
//! n = 2
//!
//! [[objective]]
//! lower = "2*x1 - 1"
//! upper = "3*x2 + 2"
//!
//! [[constraint]]
//! expr = "-x1 + v1"
//! uncertainty = { box_lo = [0.0], box_hi = [1.0], grid = [11] }
//! # or: uncertainty = { points = [[0.0], [0.5], [1.0]] }
//!
//! [set]                    # halfspaces a . x <= b; omit for all of R^n
//! a = [[-1.0, 0.0], [0.0, -1.0]]
//! b = [0.0, 0.0]
//!
//! [epsilon]
//! eps = [[0.0, 0.5], [0.0, 0.5]]
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::interval::Interval;
use crate::linalg;
use crate::setcalc::{normal_cone, PolyCone};

/// Precision vector: one interval `[eps_i^L, eps_i^U]` per objective with
/// `0 <= lo <= hi` and a strictly positive total.
#[derive(Debug, Clone)]
pub struct Precision {
    eps: Vec<Interval>,
}

impl Precision {
    pub fn new(eps: Vec<Interval>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidPrecision("needs at least one entry".into()));
        }
        for (i, e) in eps.iter().enumerate() {
            if e.lo() < 0.0 {
                return Err(Error::InvalidPrecision(format!(
                    "entry {} has negative lower bound {}",
                    i + 1,
                    e.lo()
                )));
            }
        }
        let total: f64 = eps.iter().map(|e| e.lo() + e.hi()).sum();
        if total <= 0.0 {
            return Err(Error::InvalidPrecision(
                "the sum of all bounds must be strictly positive".into(),
            ));
        }
        Ok(Precision { eps })
    }

    pub fn eps(&self) -> &[Interval] {
        &self.eps
    }

    /// The aggregate precision: sum over objectives of both bounds.
    pub fn theta(&self) -> f64 {
        self.eps.iter().map(|e| e.lo() + e.hi()).sum()
    }

    pub fn sqrt_theta(&self) -> f64 {
        self.theta().sqrt()
    }
}

/// Finite sample representation of a compact uncertainty set, with optional
/// provenance when it was discretized from a box.
#[derive(Debug, Clone)]
pub struct UncertaintySet {
    points: Vec<Vec<f64>>,
    provenance: Option<BoxProvenance>,
}

/// The box and per-axis grid an uncertainty sample was generated from.
#[derive(Debug, Clone)]
pub struct BoxProvenance {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl UncertaintySet {
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return Err(Error::InvalidUncertainty("empty sample set".into())),
        };
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidUncertainty(
                "sample points have mixed dimensions".into(),
            ));
        }
        Ok(UncertaintySet {
            points,
            provenance: None,
        })
    }

    /// Uniform per-axis discretization of the box `[lo, hi]`, endpoints
    /// included. An axis with a single grid point must be degenerate.
    pub fn from_box(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(Error::InvalidUncertainty(
                "box_lo, box_hi, and grid must have equal lengths".into(),
            ));
        }
        if lo.is_empty() {
            return Err(Error::InvalidUncertainty("empty box".into()));
        }
        for k in 0..lo.len() {
            if lo[k] > hi[k] {
                return Err(Error::InvalidUncertainty(format!(
                    "axis {}: box_lo {} exceeds box_hi {}",
                    k + 1,
                    lo[k],
                    hi[k]
                )));
            }
            if counts[k] == 0 || (counts[k] == 1 && lo[k] != hi[k]) {
                return Err(Error::InvalidUncertainty(format!(
                    "axis {}: grid count {} cannot sample [{}, {}]",
                    k + 1,
                    counts[k],
                    lo[k],
                    hi[k]
                )));
            }
        }
        let axes: Vec<Vec<f64>> = (0..lo.len())
            .map(|k| axis_points(lo[k], hi[k], counts[k]))
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for &t in axis {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(UncertaintySet {
            points,
            provenance: Some(BoxProvenance { lo, hi, counts }),
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn provenance(&self) -> Option<&BoxProvenance> {
        self.provenance.as_ref()
    }
}

fn axis_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * (i as f64 / (count - 1) as f64))
        .collect()
}

/// Polyhedral ground set: an intersection of halfspaces `a . x <= b`.
/// Emptiness is not checked at construction.
#[derive(Debug, Clone, Default)]
pub struct GroundSet {
    halfspaces: Vec<(Vec<f64>, f64)>,
}

impl GroundSet {
    pub fn new(halfspaces: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if let Some((first, _)) = halfspaces.first() {
            let dim = first.len();
            for (a, _) in &halfspaces {
                if a.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: a.len(),
                    });
                }
            }
        }
        Ok(GroundSet { halfspaces })
    }

    /// All of space (no halfspaces).
    pub fn all() -> Self {
        GroundSet::default()
    }

    pub fn halfspaces(&self) -> &[(Vec<f64>, f64)] {
        &self.halfspaces
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|(a, b)| linalg::dot(a, x) <= b + tol)
    }

    /// Normal cone at `z`, generated by the active outward normals.
    pub fn normal_cone(&self, z: &[f64], tol_active: f64) -> Result<PolyCone> {
        normal_cone(&self.halfspaces, z, tol_active)
    }
}

/// One uncertain constraint: `g(x, v) <= 0` required for every `v` in the
/// sample set.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub expr: Expr,
    pub uncertainty: UncertaintySet,
}

/// A robust interval-valued multiobjective problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    objectives: Vec<(Expr, Expr)>,
    constraints: Vec<Constraint>,
    ground_set: GroundSet,
    precision: Precision,
}

impl Problem {
    pub fn new(
        n: usize,
        objectives: Vec<(Expr, Expr)>,
        constraints: Vec<Constraint>,
        ground_set: GroundSet,
        precision: Precision,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::ProblemFile("n must be at least 1".into()));
        }
        if objectives.is_empty() {
            return Err(Error::ProblemFile("at least one objective required".into()));
        }
        if precision.eps().len() != objectives.len() {
            return Err(Error::LengthMismatch {
                left: precision.eps().len(),
                right: objectives.len(),
            });
        }
        for (a, _) in ground_set.halfspaces() {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.len(),
                });
            }
        }
        for (lo, hi) in &objectives {
            for e in [lo, hi] {
                if e.var_dim() > n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: e.var_dim(),
                    });
                }
                if e.param_dim() > 0 {
                    return Err(Error::ProblemFile(
                        "objectives cannot reference uncertainty parameters".into(),
                    ));
                }
            }
        }
        for c in &constraints {
            if c.expr.var_dim() > n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.expr.var_dim(),
                });
            }
            if c.expr.param_dim() > c.uncertainty.dim() {
                return Err(Error::DimensionMismatch {
                    expected: c.uncertainty.dim(),
                    got: c.expr.param_dim(),
                });
            }
        }
        Ok(Problem {
            n,
            objectives,
            constraints,
            ground_set,
            precision,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of objectives.
    pub fn m(&self) -> usize {
        self.objectives.len()
    }

    /// Number of uncertain constraints.
    pub fn p(&self) -> usize {
        self.constraints.len()
    }

    pub fn objectives(&self) -> &[(Expr, Expr)] {
        &self.objectives
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn ground_set(&self) -> &GroundSet {
        &self.ground_set
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    pub fn theta(&self) -> f64 {
        self.precision.theta()
    }

    pub fn sqrt_theta(&self) -> f64 {
        self.precision.sqrt_theta()
    }

    /// Objective `i` as an interval at `x`; errors when the lower expression
    /// exceeds the upper one there.
    pub fn objective_interval(&self, i: usize, x: &[f64]) -> Result<Interval> {
        let (lo_e, hi_e) = &self.objectives[i];
        let lo = lo_e.eval(x, &[])?;
        let hi = hi_e.eval(x, &[])?;
        Interval::new(lo, hi).map_err(|_| Error::ObjectiveOrderViolated { index: i, lo, hi })
    }

    /// Worst-case value of constraint `j` over its uncertainty sample.
    pub fn robust_value(&self, j: usize, x: &[f64]) -> Result<f64> {
        let c = self
            .constraints
            .get(j)
            .ok_or(Error::ConstraintIndex(j))?;
        let mut worst = f64::NEG_INFINITY;
        for v in c.uncertainty.points() {
            worst = worst.max(c.expr.eval(x, v)?);
        }
        Ok(worst)
    }

    /// Sample points of constraint `j` achieving the worst-case value within
    /// `tol_active`. Nonempty by construction.
    pub fn active_set(&self, j: usize, x: &[f64], tol_active: f64) -> Result<Vec<Vec<f64>>> {
        let c = self
            .constraints
            .get(j)
            .ok_or(Error::ConstraintIndex(j))?;
        let worst = self.robust_value(j, x)?;
        let mut active = Vec::new();
        for v in c.uncertainty.points() {
            if c.expr.eval(x, v)? >= worst - tol_active {
                active.push(v.clone());
            }
        }
        Ok(active)
    }

    /// Membership in the ground set (exact halfspace comparisons).
    pub fn in_s(&self, x: &[f64]) -> bool {
        self.ground_set.contains(x, 0.0)
    }

    /// Membership in the robust feasible set: in the ground set with every
    /// worst-case constraint value at most `tol_feas`.
    pub fn in_omega(&self, x: &[f64], tol_feas: f64) -> Result<bool> {
        if !self.in_s(x) {
            return Ok(false);
        }
        for j in 0..self.p() {
            if self.robust_value(j, x)? > tol_feas {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Membership in the enlarged feasible set: worst-case values at most
    /// `sqrt(theta) + tol_feas`.
    pub fn in_omega_eps(&self, x: &[f64], tol_feas: f64) -> Result<bool> {
        if !self.in_s(x) {
            return Ok(false);
        }
        let slack = self.sqrt_theta();
        for j in 0..self.p() {
            if self.robust_value(j, x)? > slack + tol_feas {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Checks `lower <= upper` for every objective at every given point.
    pub fn validate_objectives(&self, points: &[Vec<f64>]) -> Result<()> {
        for x in points {
            for i in 0..self.m() {
                self.objective_interval(i, x)?;
            }
        }
        Ok(())
    }

    /// Loads a problem from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawProblemFile =
            toml::from_str(text).map_err(|e| Error::ProblemFile(e.to_string()))?;
        raw.build()
    }

    /// Loads a problem from a TOML file on disk.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ProblemFile(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Deserialize)]
struct RawProblemFile {
    problem: RawProblemSection,
    #[serde(default)]
    objective: Vec<RawObjective>,
    #[serde(default)]
    constraint: Vec<RawConstraint>,
    set: Option<RawSet>,
    epsilon: RawEpsilon,
}

#[derive(Deserialize)]
struct RawProblemSection {
    n: usize,
}

#[derive(Deserialize)]
struct RawObjective {
    lower: String,
    upper: String,
}

#[derive(Deserialize)]
struct RawConstraint {
    expr: String,
    uncertainty: RawUncertainty,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawUncertainty {
    Box {
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        grid: Vec<usize>,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

#[derive(Deserialize)]
struct RawSet {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
struct RawEpsilon {
    eps: Vec<[f64; 2]>,
}

impl RawProblemFile {
    fn build(self) -> Result<Problem> {
        let n = self.problem.n;
        let mut objectives = Vec::with_capacity(self.objective.len());
        for o in &self.objective {
            let lo = Expr::parse(&o.lower, n, 0)?;
            let hi = Expr::parse(&o.upper, n, 0)?;
            objectives.push((lo, hi));
        }
        let mut constraints = Vec::with_capacity(self.constraint.len());
        for c in &self.constraint {
            let uncertainty = match &c.uncertainty {
                RawUncertainty::Box {
                    box_lo,
                    box_hi,
                    grid,
                } => UncertaintySet::from_box(box_lo.clone(), box_hi.clone(), grid.clone())?,
                RawUncertainty::Points { points } => {
                    UncertaintySet::from_points(points.clone())?
                }
            };
            let expr = Expr::parse(&c.expr, n, uncertainty.dim())?;
            constraints.push(Constraint { expr, uncertainty });
        }
        let ground_set = match self.set {
            Some(s) => {
                if s.a.len() != s.b.len() {
                    return Err(Error::ProblemFile(format!(
                        "set: {} rows in a but {} entries in b",
                        s.a.len(),
                        s.b.len()
                    )));
                }
                GroundSet::new(s.a.into_iter().zip(s.b).collect())?
            }
            None => GroundSet::all(),
        };
        let eps = self
            .epsilon
            .eps
            .iter()
            .map(|&[lo, hi]| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidPrecision(e.to_string()))?;
        let precision = Precision::new(eps)?;
        Problem::new(n, objectives, constraints, ground_set, precision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    /// f1 = [x1-1, x2+1], f2 = [-x1, -x2+2], g_j = x_j - v_j with v in [1,2],
    /// S the nonnegative quadrant, eps = ([0,1/2], [0,1/2]).
    fn almost_pareto_problem() -> Problem {
        let text = r#"
            [problem]
            n = 2

            [[objective]]
            lower = "x1 - 1"
            upper = "x2 + 1"

            [[objective]]
            lower = "-x1"
            upper = "-x2 + 2"

            [[constraint]]
            expr = "x1 - v1"
            uncertainty = { box_lo = [1.0], box_hi = [2.0], grid = [11] }

            [[constraint]]
            expr = "x2 - v1"
            uncertainty = { box_lo = [1.0], box_hi = [2.0], grid = [11] }

            [set]
            a = [[-1.0, 0.0], [0.0, -1.0]]
            b = [0.0, 0.0]

            [epsilon]
            eps = [[0.0, 0.5], [0.0, 0.5]]
        "#;
        Problem::from_toml_str(text).unwrap()
    }

    #[test]
    fn theta_examples() {
        let p = Precision::new(vec![iv(0.0, 0.5), iv(0.0, 0.5)]).unwrap();
        assert_eq!(p.theta(), 1.0);
        let single = Precision::new(vec![iv(0.0, 1.0)]).unwrap();
        assert_eq!(single.theta(), 1.0);
        let other = Precision::new(vec![iv(0.1, 0.2), iv(0.3, 0.4)]).unwrap();
        assert!((other.theta() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn precision_rejects_invalid() {
        assert!(Precision::new(vec![iv(0.0, 0.0)]).is_err());
        assert!(Precision::new(vec![]).is_err());
        // Negative lower bound is rejected by Interval::new already when
        // inverted, and by Precision when negative.
        assert!(Precision::new(vec![Interval::new(-0.1, 0.5).unwrap()]).is_err());
    }

    #[test]
    fn robust_value_examples() {
        let p = almost_pareto_problem();
        // g1(x) = x1 - 1: maximum over v in [1,2] of x1 - v is at v = 1.
        assert_eq!(p.robust_value(0, &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(p.robust_value(1, &[1.0, 2.0]).unwrap(), 1.0);
        assert!(p.robust_value(5, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn robust_value_constant_in_v() {
        let text = r#"
            [problem]
            n = 1
            [[objective]]
            lower = "x1"
            upper = "x1"
            [[constraint]]
            expr = "3"
            uncertainty = { points = [[0.0], [1.0]] }
            [epsilon]
            eps = [[0.0, 1.0]]
        "#;
        let p = Problem::from_toml_str(text).unwrap();
        assert_eq!(p.robust_value(0, &[0.0]).unwrap(), 3.0);
        // Constant-in-v constraint: the entire sample set is active.
        assert_eq!(p.active_set(0, &[0.0], 1e-9).unwrap().len(), 2);
    }

    #[test]
    fn active_set_examples() {
        let p = almost_pareto_problem();
        let act = p.active_set(0, &[1.0, 2.0], 1e-9).unwrap();
        assert_eq!(act, vec![vec![1.0]]);

        // Unique interior maximizer: g(x, v) = -(v - 1/2)^2 over {0, 1/2, 1}.
        let text = r#"
            [problem]
            n = 1
            [[objective]]
            lower = "x1"
            upper = "x1"
            [[constraint]]
            expr = "-(v1 - 0.5)^2"
            uncertainty = { points = [[0.0], [0.5], [1.0]] }
            [epsilon]
            eps = [[0.0, 1.0]]
        "#;
        let q = Problem::from_toml_str(text).unwrap();
        assert_eq!(q.active_set(0, &[0.0], 1e-9).unwrap(), vec![vec![0.5]]);
    }

    #[test]
    fn feasible_set_memberships() {
        let p = almost_pareto_problem();
        // z = (1,2) is not robust feasible but lies in the enlarged set.
        assert!(!p.in_omega(&[1.0, 2.0], 1e-9).unwrap());
        assert!(p.in_omega_eps(&[1.0, 2.0], 1e-9).unwrap());
        assert!(p.in_omega(&[1.0, 1.0], 1e-9).unwrap());
        // Outside S all memberships fail.
        assert!(!p.in_s(&[-1.0, 0.0]));
        assert!(!p.in_omega(&[-1.0, 0.0], 1e-9).unwrap());
        assert!(!p.in_omega_eps(&[-1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn omega_subset_of_omega_eps_randomized() {
        let p = almost_pareto_problem();
        let mut t = 0.17f64;
        for _ in 0..500 {
            // Cheap deterministic pseudo-random points in [-1, 3]^2.
            t = (t * 997.13).fract();
            let a = -1.0 + 4.0 * t;
            t = (t * 613.7).fract();
            let b = -1.0 + 4.0 * t;
            let x = [a, b];
            if p.in_omega(&x, 1e-9).unwrap() {
                assert!(p.in_omega_eps(&x, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn robust_value_monotone_under_refinement() {
        let coarse = UncertaintySet::from_box(vec![0.0], vec![2.0], vec![3]).unwrap();
        let fine = UncertaintySet::from_box(vec![0.0], vec![2.0], vec![9]).unwrap();
        let expr = Expr::parse("x1 * v1 - v1^2", 1, 1).unwrap();
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let worst = |set: &UncertaintySet| {
                set.points()
                    .iter()
                    .map(|v| expr.eval(&[x], v).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            assert!(worst(&fine) >= worst(&coarse) - 1e-15);
        }
    }

    #[test]
    fn uncertainty_box_cartesian_product() {
        let set = UncertaintySet::from_box(vec![0.0, 1.0], vec![1.0, 2.0], vec![3, 2]).unwrap();
        assert_eq!(set.points().len(), 6);
        assert_eq!(set.dim(), 2);
        assert!(set.provenance().is_some());
        assert!(UncertaintySet::from_box(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(UncertaintySet::from_box(vec![1.0], vec![1.0], vec![1]).is_ok());
    }

    #[test]
    fn objective_validity_is_checked_on_demand() {
        let p = almost_pareto_problem();
        // Valid on [0,2]^2, violated at (5,0) where x1-1 > x2+1.
        assert!(p.validate_objectives(&[vec![0.0, 0.0], vec![2.0, 2.0]]).is_ok());
        assert!(matches!(
            p.validate_objectives(&[vec![5.0, 0.0]]),
            Err(Error::ObjectiveOrderViolated { .. })
        ));
    }
}
