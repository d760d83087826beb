//! The epsilon-interval-valued vector Lagrangian and quasi Pareto
//! saddle-point verification.
//!
//! The Lagrangian shifts each objective by the averaged multiplier penalty,
//! an epsilon-weighted displacement in `x` (Euclidean), and an
//! epsilon-weighted displacement in the multipliers (1-norm, as the
//! definition mandates). For multipliers far from the reference point the
//! lower bound can overtake the upper one, so the scan compares raw endpoint
//! pairs; the public evaluation returns validated intervals and is what the
//! exactness checks use.

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalVector};
use crate::linalg;
use crate::model::Problem;
use crate::Tolerances;

/// Endpoint pair (lower, upper) of one Lagrangian component; not
/// necessarily ordered.
type Endpoints = (f64, f64);

/// Evaluates the vector Lagrangian at `(x, lambda)` with reference point
/// `(y, mu)`. Errors on negative multipliers or when some component's
/// endpoints invert (which happens for multipliers far from `mu`).
pub fn lagrangian(
    prob: &Problem,
    x: &[f64],
    lambda: &[f64],
    y: &[f64],
    mu: &[f64],
) -> Result<IntervalVector> {
    let pairs = lagrangian_endpoints(prob, x, lambda, y, mu)?;
    let items = pairs
        .into_iter()
        .map(|(lo, hi)| Interval::new(lo, hi))
        .collect::<Result<Vec<_>>>()?;
    IntervalVector::new(items)
}

/// Raw endpoint pairs of the Lagrangian components.
pub(crate) fn lagrangian_endpoints(
    prob: &Problem,
    x: &[f64],
    lambda: &[f64],
    y: &[f64],
    mu: &[f64],
) -> Result<Vec<Endpoints>> {
    for l in [lambda, mu] {
        if l.len() != prob.p() {
            return Err(Error::LengthMismatch {
                left: l.len(),
                right: prob.p(),
            });
        }
        if let Some(&bad) = l.iter().find(|&&v| v < 0.0) {
            return Err(Error::NegativeMultiplier(bad));
        }
    }
    let mut penalty = 0.0;
    for j in 0..prob.p() {
        penalty += lambda[j] * prob.robust_value(j, x)?;
    }
    penalty /= 2.0 * prob.m() as f64;
    let x_dist = linalg::dist(x, y);
    let l_dist = linalg::norm1(&linalg::sub(lambda, mu));
    let sqrt_theta = prob.sqrt_theta();
    let mut out = Vec::with_capacity(prob.m());
    for i in 0..prob.m() {
        let (lo_e, hi_e) = &prob.objectives()[i];
        let eps = &prob.precision().eps()[i];
        let lo = lo_e.eval(x, &[])? + penalty + eps.lo() / sqrt_theta * x_dist
            - eps.lo() / sqrt_theta * l_dist;
        let hi = hi_e.eval(x, &[])? + penalty + eps.hi() / sqrt_theta * x_dist
            - eps.hi() / sqrt_theta * l_dist;
        out.push((lo, hi));
    }
    Ok(out)
}

/// Componentwise `a_i >=_LU b_i` with at least one strict, on raw endpoint
/// pairs. The strict component must win by more than `slack` (0 keeps the
/// comparison exact; callers scanning numeric candidates pass their noise
/// floor).
fn pairs_gt_lu(a: &[Endpoints], b: &[Endpoints], slack: f64) -> bool {
    let mut strict = false;
    for (pa, pb) in a.iter().zip(b) {
        if !(pa.0 >= pb.0 && pa.1 >= pb.1) {
            return false;
        }
        if pa.0 > pb.0 + slack || pa.1 > pb.1 + slack {
            strict = true;
        }
    }
    strict
}

/// Verdict for one saddle condition.
#[derive(Debug, Clone, PartialEq)]
pub enum SaddleVerdict {
    HoldsOnGrid,
    /// A scanned point whose Lagrangian comparison violates the condition.
    Refuted { witness: Vec<f64> },
}

impl SaddleVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, SaddleVerdict::HoldsOnGrid)
    }
}

/// Saddle-point verification report.
#[derive(Debug, Clone)]
pub struct SaddleReport {
    /// No scanned multiplier improves the Lagrangian at the candidate.
    pub cond_i: SaddleVerdict,
    /// No scanned point improves the Lagrangian in the decision variable.
    pub cond_ii: SaddleVerdict,
    pub lambda_points_scanned: usize,
    pub x_points_scanned: usize,
}

impl SaddleReport {
    pub fn holds(&self) -> bool {
        self.cond_i.holds() && self.cond_ii.holds()
    }
}

/// Scans multiplier and decision grids for violations of the two saddle
/// conditions at `(x_bar, lambda_bar)`.
///
/// The definition quantifies over the whole nonnegative orthant and all of
/// space; the scan covers the supplied finite point lists and reports carry
/// their sizes.
pub fn check_saddle(
    prob: &Problem,
    x_bar: &[f64],
    lambda_bar: &[f64],
    lambda_points: &[Vec<f64>],
    x_points: &[Vec<f64>],
    tols: &Tolerances,
) -> Result<SaddleReport> {
    let reference = lagrangian_endpoints(prob, x_bar, lambda_bar, x_bar, lambda_bar)?;

    let mut cond_i = SaddleVerdict::HoldsOnGrid;
    for l in lambda_points {
        if l.iter().any(|&v| v < 0.0) {
            continue;
        }
        let value = lagrangian_endpoints(prob, x_bar, l, x_bar, lambda_bar)?;
        if pairs_gt_lu(&value, &reference, tols.tol_strict) {
            cond_i = SaddleVerdict::Refuted { witness: l.clone() };
            break;
        }
    }

    let mut cond_ii = SaddleVerdict::HoldsOnGrid;
    for x in x_points {
        let value = lagrangian_endpoints(prob, x, lambda_bar, x_bar, lambda_bar)?;
        if pairs_gt_lu(&reference, &value, tols.tol_strict) {
            cond_ii = SaddleVerdict::Refuted { witness: x.clone() };
            break;
        }
    }

    Ok(SaddleReport {
        cond_i,
        cond_ii,
        lambda_points_scanned: lambda_points.len(),
        x_points_scanned: x_points.len(),
    })
}

/// Default multiplier grid: per-axis uniform grids on
/// `[0, 4 * max(lambda_bar_j, 1)]` plus the reference multiplier and the
/// unit bumps `lambda_bar + e_k` (the construction the membership argument
/// of the saddle-to-solution theorem uses).
pub fn default_lambda_points(lambda_bar: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let p = lambda_bar.len();
    if p == 0 {
        return vec![Vec::new()];
    }
    let steps = steps.max(2);
    let mut pts = vec![Vec::new()];
    for &l in lambda_bar {
        let hi = 4.0 * l.max(1.0);
        let axis: Vec<f64> = (0..steps)
            .map(|i| hi * (i as f64 / (steps - 1) as f64))
            .collect();
        let mut next = Vec::with_capacity(pts.len() * axis.len());
        for q in &pts {
            for &t in &axis {
                let mut r = q.clone();
                r.push(t);
                next.push(r);
            }
        }
        pts = next;
    }
    pts.push(lambda_bar.to_vec());
    for k in 0..p {
        let mut bump = lambda_bar.to_vec();
        bump[k] += 1.0;
        pts.push(bump);
    }
    pts
}

/// Report of the saddle-to-solution check.
#[derive(Debug, Clone)]
pub struct SaddleSolutionReport {
    /// Whether `g_j(x) <= g_j(x_bar)` held across the ground-set grid.
    pub hypothesis_holds: bool,
    pub hypothesis_violator: Option<(Vec<f64>, usize)>,
    pub saddle: SaddleReport,
    /// Classification verdict of the candidate as an almost epsilon-quasi
    /// Pareto solution, evaluated when hypothesis and saddle both hold.
    pub almost_eps_quasi: Option<crate::classify::Verdict>,
    /// False exactly when the antecedents hold but the classifier refutes
    /// the conclusion.
    pub consistent: bool,
}

/// Checks the monotone-constraint hypothesis on the grid, verifies the
/// saddle conditions, and when both pass asserts the candidate classifies
/// as an almost epsilon-quasi Pareto solution.
pub fn saddle_implies_solution(
    prob: &Problem,
    x_bar: &[f64],
    lambda_bar: &[f64],
    lambda_points: &[Vec<f64>],
    x_points: &[Vec<f64>],
    class_grid: &crate::classify::Grid,
    tols: &Tolerances,
) -> Result<SaddleSolutionReport> {
    let mut hypothesis_holds = true;
    let mut hypothesis_violator = None;
    for x in class_grid.points() {
        if !prob.in_s(&x) {
            continue;
        }
        for j in 0..prob.p() {
            if prob.robust_value(j, &x)? > prob.robust_value(j, x_bar)? + tols.tol_sign {
                hypothesis_holds = false;
                if hypothesis_violator.is_none() {
                    hypothesis_violator = Some((x.clone(), j));
                }
            }
        }
        if !hypothesis_holds && hypothesis_violator.is_some() {
            break;
        }
    }

    let saddle = check_saddle(prob, x_bar, lambda_bar, lambda_points, x_points, tols)?;

    let (almost_eps_quasi, consistent) = if hypothesis_holds && saddle.holds() {
        let c = crate::classify::classify_point(prob, x_bar, class_grid, tols)?;
        let ok = c.almost_eps_quasi.holds();
        (Some(c.almost_eps_quasi), ok)
    } else {
        (None, true)
    };

    Ok(SaddleSolutionReport {
        hypothesis_holds,
        hypothesis_violator,
        saddle,
        almost_eps_quasi,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Grid;
    use std::path::Path;

    fn fixture(name: &str) -> Problem {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name);
        Problem::load(&path).unwrap()
    }

    #[test]
    fn lagrangian_exact_values() {
        let p = fixture("saddle.toml");
        let l = lagrangian(&p, &[0.0], &[4.0], &[0.0], &[4.0]).unwrap();
        assert_eq!(l.items()[0].lo(), 1.0);
        assert_eq!(l.items()[0].hi(), 2.0);
        assert_eq!(l.items()[1].lo(), 1.0);
        assert_eq!(l.items()[1].hi(), 2.0);

        let l = lagrangian(&p, &[-2.0], &[4.0], &[0.0], &[4.0]).unwrap();
        assert_eq!(l.items()[0].lo(), -1.0);
        assert_eq!(l.items()[0].hi(), 1.0);
        assert_eq!(l.items()[1].lo(), -1.0);
        assert_eq!(l.items()[1].hi(), 1.0);
    }

    #[test]
    fn zero_displacements_reduce_to_penalized_objectives() {
        let p = fixture("saddle.toml");
        let x = [0.5];
        let lambda = [2.0];
        let l = lagrangian(&p, &x, &lambda, &x, &lambda).unwrap();
        let penalty = 0.25 * lambda[0] * p.robust_value(0, &x).unwrap();
        let f = p.objective_interval(0, &x).unwrap();
        assert_eq!(l.items()[0].lo(), f.lo() + penalty);
        assert_eq!(l.items()[0].hi(), f.hi() + penalty);
    }

    #[test]
    fn negative_multipliers_rejected() {
        let p = fixture("saddle.toml");
        assert!(matches!(
            lagrangian(&p, &[0.0], &[-1.0], &[0.0], &[4.0]),
            Err(Error::NegativeMultiplier(_))
        ));
    }

    #[test]
    fn saddle_refuted_in_x_with_hand_witness() {
        let p = fixture("saddle.toml");
        let tols = Tolerances::default();
        let lambda_points = default_lambda_points(&[4.0], 17);
        let x_points: Vec<Vec<f64>> = Grid::uniform(1, -2.0, 3.0, 26).unwrap().points();
        let report = check_saddle(&p, &[0.0], &[4.0], &lambda_points, &x_points, &tols).unwrap();
        assert!(report.cond_i.holds());
        match &report.cond_ii {
            SaddleVerdict::Refuted { witness } => assert_eq!(witness, &vec![-2.0]),
            other => panic!("expected refutation, got {other:?}"),
        }
        // The hand values behind the witness: the Lagrangian at the
        // candidate dominates the one at x = -2 in the LU order.
        let at_candidate = lagrangian(&p, &[0.0], &[4.0], &[0.0], &[4.0]).unwrap();
        let at_witness = lagrangian(&p, &[-2.0], &[4.0], &[0.0], &[4.0]).unwrap();
        assert!(at_candidate.gt_lu(&at_witness).unwrap());
    }

    #[test]
    fn self_comparison_grids_hold() {
        let p = fixture("saddle.toml");
        let tols = Tolerances::default();
        let report = check_saddle(
            &p,
            &[0.0],
            &[4.0],
            &[vec![4.0]],
            &[vec![0.0]],
            &tols,
        )
        .unwrap();
        assert!(report.holds());
    }

    #[test]
    fn cond_i_witnesses_satisfy_the_scalar_reduction() {
        // Any refutation of condition (i) must satisfy
        // sum_j (lambda_j - lambda_bar_j) g_j(x_bar) > sqrt(theta) * |lambda - lambda_bar|_1.
        // A single objective with a small precision vector and a strongly
        // violated constraint at the candidate admits such refutations.
        let text = r#"
            [problem]
            n = 1
            [[objective]]
            lower = "x1"
            upper = "x1 + 1"
            [[constraint]]
            expr = "-x1 + v1"
            uncertainty = { points = [[0.0], [1.0]] }
            [epsilon]
            eps = [[0.1, 0.2]]
        "#;
        let p = crate::model::Problem::from_toml_str(text).unwrap();
        let tols = Tolerances::default();
        let x_bar = [-2.0];
        let lambda_bar = [0.0];
        // g(x_bar) = 3 > sqrt(theta), so raising the multiplier pays off.
        let lambda_points = default_lambda_points(&lambda_bar, 33);
        let report = check_saddle(&p, &x_bar, &lambda_bar, &lambda_points, &[], &tols).unwrap();
        match &report.cond_i {
            SaddleVerdict::Refuted { witness } => {
                let g = p.robust_value(0, &x_bar).unwrap();
                let lhs = (witness[0] - lambda_bar[0]) * g;
                let rhs = p.sqrt_theta() * (witness[0] - lambda_bar[0]).abs();
                assert!(lhs > rhs, "witness {witness:?}: {lhs} vs {rhs}");
            }
            SaddleVerdict::HoldsOnGrid => panic!("expected a condition-(i) violation"),
        }
    }

    #[test]
    fn saddle_implies_solution_vacuous_on_refuted_saddle() {
        let p = fixture("saddle.toml");
        let tols = Tolerances::default();
        let lambda_points = default_lambda_points(&[4.0], 9);
        let x_points = Grid::uniform(1, -3.0, 3.0, 25).unwrap().points();
        let grid = Grid::uniform(1, -3.0, 3.0, 61).unwrap();
        let report = saddle_implies_solution(
            &p,
            &[0.0],
            &[4.0],
            &lambda_points,
            &x_points,
            &grid,
            &tols,
        )
        .unwrap();
        assert!(!report.saddle.holds());
        assert!(report.consistent);
        assert!(report.almost_eps_quasi.is_none());
    }

    #[test]
    fn saddle_implies_solution_on_constant_constraint_fixture() {
        // Constraint independent of x: the hypothesis holds trivially and
        // the classifier must agree with the saddle verdict.
        let text = r#"
            [problem]
            n = 1
            [[objective]]
            lower = "0"
            upper = "0"
            [[constraint]]
            expr = "v1 - 1"
            uncertainty = { points = [[0.0], [1.0]] }
            [set]
            a = [[-1.0]]
            b = [0.0]
            [epsilon]
            eps = [[0.1, 0.5]]
        "#;
        let p = crate::model::Problem::from_toml_str(text).unwrap();
        let tols = Tolerances::default();
        let lambda_points = default_lambda_points(&[0.0], 9);
        let x_points = Grid::uniform(1, -2.0, 2.0, 41).unwrap().points();
        let grid = Grid::uniform(1, 0.0, 2.0, 41).unwrap();
        let report =
            saddle_implies_solution(&p, &[0.0], &[0.0], &lambda_points, &x_points, &grid, &tols)
                .unwrap();
        assert!(report.hypothesis_holds);
        assert!(report.saddle.holds(), "saddle: {:?}", report.saddle);
        assert!(report.consistent);
        assert!(report.almost_eps_quasi.unwrap().holds());
    }
}
