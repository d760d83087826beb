//! The Wolfe-type dual problem: dual objective, dual feasibility, quasi
//! Pareto classification of dual points, and the converse duality check.
//!
//! The dual is anchored at a KKT pair `(z, lambda)` of the primal. Dual
//! feasibility of `(y, lambda)` is the same stationarity inclusion evaluated
//! at `y` (without the multiplier sign conditions) plus, in cap mode, the
//! bound `lambda_j <= lambda_j(anchor)` on the constraints whose worst-case
//! value at the anchor is positive. Cap mode is the stated definition and
//! the default; the cap-free variant is needed to reproduce instances where
//! the dual bound fails without generalized convexity.

use crate::classify::{dominates_eps_quasi, Grid};
use crate::convexity::{certify, ConvexityNotion, ConvexityVerdict};
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalVector};
use crate::kkt::{check_kkt_pair, stationarity_terms, KktCertificate};
use crate::linalg;
use crate::model::Problem;
use crate::setcalc::{dist_origin, DistWitness};
use crate::Tolerances;

/// A point of the dual variable space.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Anchor and cap behavior for the dual problem.
#[derive(Debug, Clone)]
pub struct DualConfig {
    anchor: DualPoint,
    cap_mode: bool,
    /// Constraints whose worst-case value at the anchor lies in
    /// `(0, sqrt(theta)]`; the cap applies to these.
    j_eps: Vec<usize>,
    anchor_certificate: KktCertificate,
}

impl DualConfig {
    /// Validates that the anchor passes the KKT check and precomputes the
    /// capped index set.
    pub fn new(
        prob: &Problem,
        anchor_z: Vec<f64>,
        anchor_lambda: Vec<f64>,
        cap_mode: bool,
        tols: &Tolerances,
    ) -> Result<Self> {
        let cert = check_kkt_pair(prob, &anchor_z, &anchor_lambda, tols)?;
        if !cert.verdict {
            return Err(Error::AnchorNotKkt(format!(
                "inclusion residual {} against allowance {}, feasible: {}",
                cert.inclusion_residual, cert.allowance, cert.feasible
            )));
        }
        let mut j_eps = Vec::new();
        for j in 0..prob.p() {
            let g = prob.robust_value(j, &anchor_z)?;
            if g > tols.tol_sign && g <= prob.sqrt_theta() + tols.tol_sign {
                j_eps.push(j);
            }
        }
        Ok(DualConfig {
            anchor: DualPoint {
                y: anchor_z,
                lambda: anchor_lambda,
            },
            cap_mode,
            j_eps,
            anchor_certificate: cert,
        })
    }

    pub fn anchor(&self) -> &DualPoint {
        &self.anchor
    }

    pub fn cap_mode(&self) -> bool {
        self.cap_mode
    }

    pub fn capped_constraints(&self) -> &[usize] {
        &self.j_eps
    }

    pub fn anchor_certificate(&self) -> &KktCertificate {
        &self.anchor_certificate
    }
}

/// Dual objective: each objective interval shifted by the common penalty
/// `(1/2m) sum_j lambda_j g_j(y)`.
pub fn dual_objective(prob: &Problem, y: &[f64], lambda: &[f64]) -> Result<IntervalVector> {
    if lambda.len() != prob.p() {
        return Err(Error::LengthMismatch {
            left: lambda.len(),
            right: prob.p(),
        });
    }
    if let Some(&bad) = lambda.iter().find(|&&l| l < 0.0) {
        return Err(Error::NegativeMultiplier(bad));
    }
    let mut penalty = 0.0;
    for j in 0..prob.p() {
        penalty += lambda[j] * prob.robust_value(j, y)?;
    }
    penalty /= 2.0 * prob.m() as f64;
    let mut items = Vec::with_capacity(prob.m());
    for i in 0..prob.m() {
        let f = prob.objective_interval(i, y)?;
        items.push(Interval::new(f.lo() + penalty, f.hi() + penalty)?);
    }
    IntervalVector::new(items)
}

/// Dual-feasibility certificate for a point `(y, lambda)`.
#[derive(Debug, Clone)]
pub struct DualFeasibility {
    pub member: bool,
    pub inclusion_residual: f64,
    pub allowance: f64,
    pub inclusion_ok: bool,
    /// True when no cap applies or every capped multiplier is within bound.
    pub cap_ok: bool,
    pub witness: Option<DistWitness>,
}

/// Tests membership of `(y, lambda)` in the dual feasible set. Errors when
/// `y` is outside the ground set.
pub fn in_omega_d(
    prob: &Problem,
    cfg: &DualConfig,
    y: &[f64],
    lambda: &[f64],
    tols: &Tolerances,
) -> Result<DualFeasibility> {
    if lambda.len() != prob.p() {
        return Err(Error::LengthMismatch {
            left: lambda.len(),
            right: prob.p(),
        });
    }
    if let Some(&bad) = lambda.iter().find(|&&l| l < 0.0) {
        return Err(Error::NegativeMultiplier(bad));
    }
    if !prob.ground_set().contains(y, tols.tol_active) {
        return Err(Error::NotInGroundSet);
    }
    let (terms, _) = stationarity_terms(prob, y, lambda, tols)?;
    let cone = prob.ground_set().normal_cone(y, tols.tol_active)?;
    let allowance = prob.sqrt_theta();
    let witness = dist_origin(&terms, &cone, allowance)?;
    let inclusion_ok = witness.dist <= allowance + tols.tol_incl;
    let cap_ok = if cfg.cap_mode {
        cfg.j_eps
            .iter()
            .all(|&j| lambda[j] <= cfg.anchor.lambda[j] + tols.tol_pos)
    } else {
        true
    };
    Ok(DualFeasibility {
        member: inclusion_ok && cap_ok,
        inclusion_residual: witness.dist,
        allowance,
        inclusion_ok,
        cap_ok,
        witness: Some(witness),
    })
}

/// Outcome of classifying a dual candidate as quasi Pareto for the
/// maximization problem.
#[derive(Debug, Clone)]
pub struct DualClassifyReport {
    /// A feasible sample dominating the candidate, when one exists on the
    /// sample list.
    pub refuted_by: Option<DualPoint>,
    pub samples_considered: usize,
    pub samples_feasible: usize,
}

impl DualClassifyReport {
    pub fn holds(&self) -> bool {
        self.refuted_by.is_none()
    }
}

/// Scans the samples for a dual-feasible point whose shifted dual objective
/// dominates the candidate's in the LU order (the lower component carries
/// the upper epsilon weight and vice versa). The candidate must be dual
/// feasible.
pub fn dual_classify(
    prob: &Problem,
    cfg: &DualConfig,
    candidate: &DualPoint,
    samples: &[DualPoint],
    tols: &Tolerances,
) -> Result<DualClassifyReport> {
    let feas = in_omega_d(prob, cfg, &candidate.y, &candidate.lambda, tols)?;
    if !feas.member {
        return Err(Error::NotDualFeasible(format!(
            "inclusion residual {} (allowance {}), cap ok: {}",
            feas.inclusion_residual, feas.allowance, feas.cap_ok
        )));
    }
    let anchor_value = dual_objective(prob, &candidate.y, &candidate.lambda)?;
    let sqrt_theta = prob.sqrt_theta();
    let mut feasible = 0;
    for s in samples {
        if !prob.ground_set().contains(&s.y, tols.tol_active) {
            continue;
        }
        let sf = in_omega_d(prob, cfg, &s.y, &s.lambda, tols)?;
        if !sf.member {
            continue;
        }
        feasible += 1;
        let value = dual_objective(prob, &s.y, &s.lambda)?;
        let d = linalg::dist(&s.y, &candidate.y);
        let mut shifted = Vec::with_capacity(prob.m());
        for (i, item) in value.items().iter().enumerate() {
            let shift = prob.precision().eps()[i].scale(d / sqrt_theta);
            shifted.push(item.sub(&shift));
        }
        let shifted = IntervalVector::new(shifted)?;
        if shifted.gt_lu(&anchor_value)? {
            return Ok(DualClassifyReport {
                refuted_by: Some(s.clone()),
                samples_considered: samples.len(),
                samples_feasible: feasible,
            });
        }
    }
    Ok(DualClassifyReport {
        refuted_by: None,
        samples_considered: samples.len(),
        samples_feasible: feasible,
    })
}

/// Report of the converse duality check at a dual-feasible point.
#[derive(Debug, Clone)]
pub struct ConverseDualityReport {
    /// Generalized-convexity certification at the dual point; when it fails
    /// the check is skipped (the conclusion needs the hypothesis).
    pub convexity: ConvexityVerdict,
    pub skipped: bool,
    /// Whether `g_j(x) <= g_j(y)` held for every feasible grid point and
    /// constraint.
    pub hypothesis_holds: bool,
    pub hypothesis_violator: Option<(Vec<f64>, usize)>,
    /// A feasible grid point satisfying the quasi domination of `y`, if any.
    pub domination_witness: Option<Vec<f64>>,
    /// False exactly when convexity and the hypothesis hold yet a dominator
    /// was found, which would contradict the converse duality statement.
    pub consistent: bool,
}

/// Verifies the monotone-constraint hypothesis on the grid and then searches
/// for a feasible point that quasi-dominates `y`.
pub fn converse_duality_check(
    prob: &Problem,
    cfg: &DualConfig,
    dual_point: &DualPoint,
    grid: &Grid,
    tols: &Tolerances,
) -> Result<ConverseDualityReport> {
    let feas = in_omega_d(prob, cfg, &dual_point.y, &dual_point.lambda, tols)?;
    if !feas.member {
        return Err(Error::NotDualFeasible(format!(
            "inclusion residual {} (allowance {})",
            feas.inclusion_residual, feas.allowance
        )));
    }

    let in_s_samples: Vec<Vec<f64>> = grid
        .points()
        .into_iter()
        .filter(|x| prob.in_s(x))
        .collect();
    let convexity = certify(
        prob,
        ConvexityNotion::Generalized,
        &dual_point.y,
        &in_s_samples,
        tols,
    )?;
    if !convexity.certified {
        return Ok(ConverseDualityReport {
            convexity,
            skipped: true,
            hypothesis_holds: false,
            hypothesis_violator: None,
            domination_witness: None,
            consistent: true,
        });
    }

    let mut hypothesis_holds = true;
    let mut hypothesis_violator = None;
    let mut domination_witness = None;
    for x in grid.points() {
        if !prob.in_omega(&x, tols.tol_feas)? {
            continue;
        }
        for j in 0..prob.p() {
            if prob.robust_value(j, &x)? > prob.robust_value(j, &dual_point.y)? + tols.tol_sign {
                hypothesis_holds = false;
                if hypothesis_violator.is_none() {
                    hypothesis_violator = Some((x.clone(), j));
                }
            }
        }
        if domination_witness.is_none() && dominates_eps_quasi(prob, &x, &dual_point.y, tols)? {
            domination_witness = Some(x.clone());
        }
    }
    let consistent = !(hypothesis_holds && domination_witness.is_some());
    Ok(ConverseDualityReport {
        convexity,
        skipped: false,
        hypothesis_holds,
        hypothesis_violator,
        domination_witness,
        consistent,
    })
}

/// Generates the cross product of ground-set grid points and per-axis
/// multiplier grids on `[0, lambda_max]`; membership filtering happens in
/// [`dual_classify`].
pub fn generate_dual_samples(
    prob: &Problem,
    y_grid: &Grid,
    lambda_max: f64,
    lambda_steps: usize,
) -> Vec<DualPoint> {
    let ys: Vec<Vec<f64>> = y_grid
        .points()
        .into_iter()
        .filter(|y| prob.in_s(y))
        .collect();
    let steps = lambda_steps.max(2);
    let axis: Vec<f64> = (0..steps)
        .map(|i| lambda_max * (i as f64 / (steps - 1) as f64))
        .collect();
    let mut lambdas = vec![Vec::new()];
    for _ in 0..prob.p() {
        let mut next = Vec::with_capacity(lambdas.len() * axis.len());
        for l in &lambdas {
            for &t in &axis {
                let mut q = l.clone();
                q.push(t);
                next.push(q);
            }
        }
        lambdas = next;
    }
    let mut out = Vec::with_capacity(ys.len() * lambdas.len());
    for y in &ys {
        for l in &lambdas {
            out.push(DualPoint {
                y: y.clone(),
                lambda: l.clone(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn fixture(name: &str) -> Problem {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name);
        Problem::load(&path).unwrap()
    }

    fn nonconvex_config(cap_mode: bool) -> (Problem, DualConfig) {
        let p = fixture("nonconvex.toml");
        let tols = Tolerances::default();
        let cfg = DualConfig::new(&p, vec![0.25], vec![8.0], cap_mode, &tols).unwrap();
        (p, cfg)
    }

    #[test]
    fn dual_objective_exact_values() {
        let p = fixture("nonconvex.toml");
        let l = dual_objective(&p, &[0.25], &[8.0]).unwrap();
        assert_eq!(l.items()[0].lo(), 17.0 / 8.0);
        assert_eq!(l.items()[0].hi(), 33.0 / 8.0);
        assert_eq!(l.items()[1].lo(), 17.0 / 8.0);
        assert_eq!(l.items()[1].hi(), 25.0 / 8.0);

        let l2 = dual_objective(&p, &[0.125], &[16.0]).unwrap();
        assert_eq!(l2.items()[0].lo(), 65.0 / 16.0);
        assert_eq!(l2.items()[0].hi(), 97.0 / 16.0);
        assert_eq!(l2.items()[1].lo(), 65.0 / 16.0);
        assert_eq!(l2.items()[1].hi(), 81.0 / 16.0);
    }

    #[test]
    fn dual_objective_with_zero_multiplier_is_the_objective() {
        let p = fixture("nonconvex.toml");
        let l = dual_objective(&p, &[0.5], &[0.0]).unwrap();
        let f0 = p.objective_interval(0, &[0.5]).unwrap();
        assert_eq!(l.items()[0], f0);
    }

    #[test]
    fn dual_membership_respects_cap_mode() {
        let (p, cap_off) = nonconvex_config(false);
        let tols = Tolerances::default();
        let f = in_omega_d(&p, &cap_off, &[0.125], &[16.0], &tols).unwrap();
        assert!(f.member, "residual {}", f.inclusion_residual);
        assert!(f.inclusion_residual <= 1e-9);

        let (_, cap_on) = nonconvex_config(true);
        assert_eq!(cap_on.capped_constraints(), &[0]);
        let f = in_omega_d(&p, &cap_on, &[0.125], &[16.0], &tols).unwrap();
        assert!(!f.member);
        assert!(f.inclusion_ok);
        assert!(!f.cap_ok);
    }

    #[test]
    fn anchor_is_self_feasible_in_both_modes() {
        let tols = Tolerances::default();
        for cap in [false, true] {
            let (p, cfg) = nonconvex_config(cap);
            let anchor = cfg.anchor().clone();
            let f = in_omega_d(&p, &cfg, &anchor.y, &anchor.lambda, &tols).unwrap();
            assert!(f.member, "cap {cap}: residual {}", f.inclusion_residual);
        }
    }

    #[test]
    fn anchor_validation_rejects_non_kkt_pairs() {
        let p = fixture("nonconvex.toml");
        let tols = Tolerances::default();
        assert!(matches!(
            DualConfig::new(&p, vec![0.25], vec![0.0], false, &tols),
            Err(Error::AnchorNotKkt(_))
        ));
    }

    #[test]
    fn dual_counterexample_without_cap() {
        let (p, cfg) = nonconvex_config(false);
        let tols = Tolerances::default();
        let anchor = cfg.anchor().clone();
        let witness = DualPoint {
            y: vec![0.125],
            lambda: vec![16.0],
        };
        let samples = vec![
            DualPoint {
                y: vec![0.5],
                lambda: vec![1.0],
            },
            witness.clone(),
        ];
        let report = dual_classify(&p, &cfg, &anchor, &samples, &tols).unwrap();
        assert_eq!(report.refuted_by, Some(witness));
    }

    #[test]
    fn cap_mode_filters_the_counterexample() {
        let (p, cfg) = nonconvex_config(true);
        let tols = Tolerances::default();
        let anchor = cfg.anchor().clone();
        let samples = vec![DualPoint {
            y: vec![0.125],
            lambda: vec![16.0],
        }];
        let report = dual_classify(&p, &cfg, &anchor, &samples, &tols).unwrap();
        assert!(report.holds());
        assert_eq!(report.samples_feasible, 0);
    }

    #[test]
    fn self_comparison_never_refutes() {
        let (p, cfg) = nonconvex_config(false);
        let tols = Tolerances::default();
        let anchor = cfg.anchor().clone();
        let report = dual_classify(&p, &cfg, &anchor, &[anchor.clone()], &tols).unwrap();
        assert!(report.holds());
        assert_eq!(report.samples_feasible, 1);
    }

    #[test]
    fn converse_duality_skips_on_nonconvex_instance() {
        let (p, cfg) = nonconvex_config(false);
        let tols = Tolerances::default();
        let grid = Grid::uniform(1, 0.0, 3.0, 31).unwrap();
        let anchor = cfg.anchor().clone();
        let report = converse_duality_check(&p, &cfg, &anchor, &grid, &tols).unwrap();
        assert!(report.skipped);
        assert!(!report.convexity.certified);
        assert!(report.consistent);
    }

    #[test]
    fn converse_duality_on_affine_fixture() {
        let p = fixture("affine_1d.toml");
        let tols = Tolerances::default();
        let cfg = DualConfig::new(&p, vec![0.0], vec![4.0], true, &tols).unwrap();
        let anchor = cfg.anchor().clone();
        let grid = Grid::uniform(1, 0.0, 3.0, 61).unwrap();
        let report = converse_duality_check(&p, &cfg, &anchor, &grid, &tols).unwrap();
        assert!(!report.skipped);
        // g(x) = 1 - x is decreasing while the feasible set needs x >= 1, so
        // g(x) <= g(0) = 1 holds on the feasible grid.
        assert!(report.hypothesis_holds);
        assert!(report.domination_witness.is_none());
        assert!(report.consistent);
    }

    #[test]
    fn dual_sample_generation_is_the_filtered_product() {
        let p = fixture("affine_1d.toml");
        let grid = Grid::uniform(1, -1.0, 1.0, 5).unwrap();
        let samples = generate_dual_samples(&p, &grid, 16.0, 5);
        // y in {0, 0.5, 1} after the ground-set filter; lambda has 5 values.
        assert_eq!(samples.len(), 15);
        assert!(samples
            .iter()
            .all(|s| s.y[0] >= 0.0 && s.lambda[0] <= 16.0));
    }
}
