//! Randomized property suites for the theorem-level claims: the
//! theta-to-epsilon implication chain, the sufficiency of KKT plus
//! generalized convexity, the dual lower bound, and the saddle-point
//! construction. Each suite runs seeded random affine instances (affine
//! objectives and constraints over a box ground set), where the convexity
//! hypotheses hold by construction and any violation points at an
//! implementation bug.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{classify_point, lemma32_check, Grid};
use crate::convexity::{certify, ConvexityNotion};
use crate::error::Result;
use crate::interval::Interval;
use crate::model::{Constraint, GroundSet, Precision, Problem, UncertaintySet};
use crate::penalty::{solve_penalty, PenaltyOptions};
use crate::saddle::{check_saddle, default_lambda_points};
use crate::wolfe::{dual_classify, DualConfig, DualPoint};
use crate::{Expr, Tolerances};

/// A generated instance together with its sampling box.
#[derive(Debug, Clone)]
pub struct AffineInstance {
    pub problem: Problem,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
}

/// Outcome of one property suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    /// Instances on which the suite's preconditions were established.
    pub checked: usize,
    pub violations: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn affine_expr(rng: &mut ChaCha8Rng, n: usize, slope_range: f64) -> (Vec<f64>, f64) {
    let slopes = (0..n)
        .map(|_| rng.gen_range(-slope_range..slope_range))
        .collect();
    let intercept = rng.gen_range(-1.0..1.0);
    (slopes, intercept)
}

fn render_affine(slopes: &[f64], intercept: f64, param_coeff: Option<f64>) -> String {
    let mut s = String::new();
    for (k, &a) in slopes.iter().enumerate() {
        s.push_str(&format!("{a}*x{} + ", k + 1));
    }
    if let Some(d) = param_coeff {
        s.push_str(&format!("{d}*v1 + "));
    }
    s.push_str(&format!("{intercept}"));
    s
}

/// Draws a random affine instance: `n <= 3` variables, up to three interval
/// objectives, up to two uncertain constraints with scalar uncertainty on
/// `[0, 1]`, and a box ground set. Constraint intercepts are shifted so the
/// box center is robustly feasible with margin.
pub fn random_affine_instance(seed: u64) -> AffineInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3usize);
    let m = rng.gen_range(1..=3usize);
    let p = rng.gen_range(0..=2usize);

    let box_lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..-0.5)).collect();
    let box_hi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let center: Vec<f64> = box_lo
        .iter()
        .zip(&box_hi)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();

    let mut objectives = Vec::with_capacity(m);
    for _ in 0..m {
        let (lo_s, lo_b) = affine_expr(&mut rng, n, 1.5);
        let (mut gap_s, mut gap_b): (Vec<f64>, f64) = (
            (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            rng.gen_range(0.0..1.0),
        );
        // Lift the upper bound so it dominates the lower one over the box:
        // the minimum of an affine gap over a box sits at a corner.
        let mut worst = f64::INFINITY;
        for c in 0..1usize << n {
            let mut val = gap_b;
            for k in 0..n {
                let x = if c >> k & 1 == 1 { box_hi[k] } else { box_lo[k] };
                val += gap_s[k] * x;
            }
            worst = worst.min(val);
        }
        if worst < 0.0 {
            gap_b += -worst + 0.01;
        }
        let hi_s: Vec<f64> = lo_s.iter().zip(&gap_s).map(|(a, d)| a + d).collect();
        let hi_b = lo_b + gap_b;
        gap_s.clear();
        let lower = Expr::parse(&render_affine(&lo_s, lo_b, None), n, 0).unwrap();
        let upper = Expr::parse(&render_affine(&hi_s, hi_b, None), n, 0).unwrap();
        objectives.push((lower, upper));
    }

    let mut constraints = Vec::with_capacity(p);
    for _ in 0..p {
        let (slopes, _) = affine_expr(&mut rng, n, 1.0);
        let param_coeff = rng.gen_range(-1.0..1.0f64);
        let uncertainty =
            UncertaintySet::from_box(vec![0.0], vec![1.0], vec![3]).unwrap();
        // Shift so the robust value at the center is -0.3.
        let mut robust_center = f64::NEG_INFINITY;
        for v in uncertainty.points() {
            let mut val = param_coeff * v[0];
            for k in 0..n {
                val += slopes[k] * center[k];
            }
            robust_center = robust_center.max(val);
        }
        let intercept = -robust_center - 0.3;
        let expr = Expr::parse(&render_affine(&slopes, intercept, Some(param_coeff)), n, 1)
            .unwrap();
        constraints.push(Constraint { expr, uncertainty });
    }

    let mut halfspaces = Vec::with_capacity(2 * n);
    for k in 0..n {
        let mut a = vec![0.0; n];
        a[k] = 1.0;
        halfspaces.push((a.clone(), box_hi[k]));
        a[k] = -1.0;
        halfspaces.push((a, -box_lo[k]));
    }
    let ground_set = GroundSet::new(halfspaces).unwrap();

    let eps = (0..m)
        .map(|_| {
            let hi = rng.gen_range(0.1..0.4);
            let lo = rng.gen_range(0.0..hi);
            Interval::new(lo, hi).unwrap()
        })
        .collect();
    let precision = Precision::new(eps).unwrap();

    let problem = Problem::new(n, objectives, constraints, ground_set, precision).unwrap();
    AffineInstance {
        problem,
        box_lo,
        box_hi,
    }
}

fn classification_grid(inst: &AffineInstance) -> Grid {
    let count = match inst.problem.n() {
        1 => 41,
        2 => 15,
        _ => 9,
    };
    Grid::new(
        inst.box_lo.clone(),
        inst.box_hi.clone(),
        vec![count; inst.problem.n()],
    )
    .unwrap()
}

fn light_penalty_opts(inst: &AffineInstance, seed: u64) -> PenaltyOptions {
    let mut opts = PenaltyOptions::over_box(inst.box_lo.clone(), inst.box_hi.clone());
    opts.starts = 4;
    opts.inner_iters = 2_000;
    opts.seed = seed;
    opts
}

/// Candidate points exercising the different feasibility strata: the box
/// center, a feasible grid point, a point of the enlarged set outside the
/// robust one when the grid has one, and an exterior point.
fn candidate_points(inst: &AffineInstance, grid: &Grid, tols: &Tolerances) -> Result<Vec<Vec<f64>>> {
    let prob = &inst.problem;
    let mut zs = Vec::new();
    let center: Vec<f64> = inst
        .box_lo
        .iter()
        .zip(&inst.box_hi)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    zs.push(center);
    let mut in_omega = None;
    let mut in_margin = None;
    for x in grid.points() {
        if in_omega.is_none() && prob.in_omega(&x, tols.tol_feas)? {
            in_omega = Some(x.clone());
        }
        if in_margin.is_none()
            && prob.in_omega_eps(&x, tols.tol_feas)?
            && !prob.in_omega(&x, tols.tol_feas)?
        {
            in_margin = Some(x.clone());
        }
        if in_omega.is_some() && in_margin.is_some() {
            break;
        }
    }
    zs.extend(in_omega);
    zs.extend(in_margin);
    let outside: Vec<f64> = inst.box_hi.iter().map(|b| b + 10.0).collect();
    zs.push(outside);
    Ok(zs)
}

/// The theta-to-epsilon implication chain must never be violated.
pub fn run_lemma32_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let tols = Tolerances::default();
    let mut violations = Vec::new();
    let mut checked = 0;
    for i in 0..instances {
        let inst = random_affine_instance(seed.wrapping_add(i as u64));
        let grid = classification_grid(&inst);
        for z in candidate_points(&inst, &grid, &tols)? {
            let report = lemma32_check(&inst.problem, &z, &grid, &tols)?;
            checked += 1;
            if !report.passed() {
                violations.push(format!("instance {i}: implication violated at z={z:?}"));
            }
        }
    }
    Ok(SuiteReport {
        name: "lemma32",
        instances,
        checked,
        violations,
    })
}

/// A penalty-constructed KKT pair on a generalized-convex instance must
/// classify as almost epsilon-quasi Pareto (sufficiency), and the penalty
/// run itself must reach its own success conditions.
///
/// Penalty candidates carry solver noise of about 1e-10, so the
/// classification runs with a strictness slack: a falsifier must win by
/// more than the noise floor, otherwise an exact minimizer perturbed by one
/// ulp would "dominate" itself.
pub fn run_sufficiency_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let tols = Tolerances {
        tol_strict: 1e-9,
        ..Tolerances::default()
    };
    let mut violations = Vec::new();
    let mut checked = 0;
    for i in 0..instances {
        let inst = random_affine_instance(seed.wrapping_add(i as u64));
        let opts = light_penalty_opts(&inst, seed.wrapping_add(1000 + i as u64));
        let run = solve_penalty(&inst.problem, &opts, &tols)?;
        if !run.success {
            violations.push(format!(
                "instance {i}: penalty construction failed ({:?})",
                run.warnings
            ));
            continue;
        }
        let grid = classification_grid(&inst);
        let samples: Vec<Vec<f64>> = grid
            .points()
            .into_iter()
            .filter(|x| inst.problem.in_s(x))
            .step_by(7)
            .collect();
        let conv = certify(&inst.problem, ConvexityNotion::Generalized, &run.z, &samples, &tols)?;
        if !conv.certified {
            violations.push(format!(
                "instance {i}: affine instance failed generalized-convexity certification at {:?}",
                run.z
            ));
            continue;
        }
        checked += 1;
        let c = classify_point(&inst.problem, &run.z, &grid, &tols)?;
        if !c.almost_eps_quasi.holds() {
            violations.push(format!(
                "instance {i}: KKT + generalized convexity but almost-eps-quasi refuted at {:?}: {:?}",
                run.z, c.almost_eps_quasi
            ));
        }
        // The construction also promises the theta-quasi property.
        if !c.almost_theta_quasi.holds() {
            violations.push(format!(
                "instance {i}: penalty candidate fails almost-theta-quasi at {:?}",
                run.z
            ));
        }
    }
    Ok(SuiteReport {
        name: "sufficiency",
        instances,
        checked,
        violations,
    })
}

/// With the cap enabled and generalized convexity holding, no dual-feasible
/// sample may dominate the anchor.
pub fn run_duality_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let tols = Tolerances::default();
    let mut violations = Vec::new();
    let mut checked = 0;
    for i in 0..instances {
        let inst = random_affine_instance(seed.wrapping_add(i as u64));
        let opts = light_penalty_opts(&inst, seed.wrapping_add(2000 + i as u64));
        let run = solve_penalty(&inst.problem, &opts, &tols)?;
        if !run.success {
            violations.push(format!("instance {i}: no anchor (penalty failed)"));
            continue;
        }
        let cfg = match DualConfig::new(
            &inst.problem,
            run.z.clone(),
            run.lambda.clone(),
            true,
            &tols,
        ) {
            Ok(cfg) => cfg,
            Err(e) => {
                violations.push(format!("instance {i}: anchor rejected: {e}"));
                continue;
            }
        };
        checked += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3000 + i as u64));
        let n = inst.problem.n();
        let mut samples = Vec::with_capacity(101);
        samples.push(cfg.anchor().clone());
        for _ in 0..100 {
            let y: Vec<f64> = (0..n)
                .map(|k| rng.gen_range(inst.box_lo[k]..=inst.box_hi[k]))
                .collect();
            let lambda: Vec<f64> = run
                .lambda
                .iter()
                .map(|&l| rng.gen_range(0.0..(2.0 * l + 2.0)))
                .collect();
            samples.push(DualPoint { y, lambda });
        }
        let report = dual_classify(&inst.problem, &cfg, &cfg.anchor().clone(), &samples, &tols)?;
        if let Some(w) = report.refuted_by {
            violations.push(format!(
                "instance {i}: anchor dominated in the capped dual by {w:?}"
            ));
        }
    }
    Ok(SuiteReport {
        name: "duality",
        instances,
        checked,
        violations,
    })
}

/// A KKT pair on a generalized-convex instance must pass the saddle check.
/// As in the sufficiency suite, the scan uses a strictness slack matching
/// the penalty solver's noise floor.
pub fn run_saddle_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let tols = Tolerances {
        tol_strict: 1e-9,
        ..Tolerances::default()
    };
    let mut violations = Vec::new();
    let mut checked = 0;
    for i in 0..instances {
        let inst = random_affine_instance(seed.wrapping_add(i as u64));
        let opts = light_penalty_opts(&inst, seed.wrapping_add(4000 + i as u64));
        let run = solve_penalty(&inst.problem, &opts, &tols)?;
        if !run.success {
            violations.push(format!("instance {i}: no KKT pair (penalty failed)"));
            continue;
        }
        let grid = classification_grid(&inst);
        let samples: Vec<Vec<f64>> = grid
            .points()
            .into_iter()
            .filter(|x| inst.problem.in_s(x))
            .step_by(7)
            .collect();
        let conv = certify(&inst.problem, ConvexityNotion::Generalized, &run.z, &samples, &tols)?;
        if !conv.certified {
            violations.push(format!(
                "instance {i}: generalized convexity failed at the anchor"
            ));
            continue;
        }
        checked += 1;
        let lambda_points = default_lambda_points(&run.lambda, 9);
        let x_points = grid.points();
        let report = check_saddle(
            &inst.problem,
            &run.z,
            &run.lambda,
            &lambda_points,
            &x_points,
            &tols,
        )?;
        if !report.holds() {
            violations.push(format!(
                "instance {i}: saddle conditions refuted at ({:?}, {:?}): {:?} / {:?}",
                run.z, run.lambda, report.cond_i, report.cond_ii
            ));
        }
    }
    Ok(SuiteReport {
        name: "saddle",
        instances,
        checked,
        violations,
    })
}

/// Runs all four suites with a shared instance count and seed.
pub fn run_all(instances: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        run_lemma32_suite(instances, seed)?,
        run_sufficiency_suite(instances, seed)?,
        run_duality_suite(instances, seed)?,
        run_saddle_suite(instances, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_and_valid() {
        let a = random_affine_instance(7);
        let b = random_affine_instance(7);
        assert_eq!(a.problem.n(), b.problem.n());
        assert_eq!(a.box_lo, b.box_lo);
        // Objective validity over the sampling box.
        let grid = classification_grid(&a);
        a.problem.validate_objectives(&grid.points()).unwrap();
        // The box center is robustly feasible by construction.
        let center: Vec<f64> = a
            .box_lo
            .iter()
            .zip(&a.box_hi)
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        assert!(a.problem.in_omega(&center, 1e-9).unwrap());
    }

    #[test]
    fn small_suite_run_passes() {
        for report in run_all(4, 42).unwrap() {
            assert!(
                report.passed(),
                "{} violations: {:?}",
                report.name,
                report.violations
            );
        }
    }
}
