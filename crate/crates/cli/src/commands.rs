//! Subcommand dispatch: wire parsed arguments into the core certifiers and
//! render their reports.

use std::process::ExitCode;

use rmop_core::classify::{classify_point, RefutationReason, Verdict};
use rmop_core::convexity::{certify, ConvexityNotion};
use rmop_core::kkt::{check_kkt_pair, SignRequirement};
use rmop_core::penalty::{solve_penalty, PenaltyOptions};
use rmop_core::saddle::{check_saddle, default_lambda_points, lagrangian, SaddleVerdict};
use rmop_core::wolfe::{
    dual_classify, dual_objective, generate_dual_samples, in_omega_d, DualConfig, DualPoint,
};
use rmop_core::{harness, Problem};

use crate::args::{CapMode, Cli, Command, Common, KeyValues};
use crate::output::{fmt_f64, Report};

pub fn dispatch(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.command {
        Command::Validate { kv } => validate(&cli.common, kv),
        Command::Classify { kv } => classify(&cli.common, kv),
        Command::Kkt { kv } => kkt(&cli.common, kv),
        Command::SolvePenalty { kv } => solve_penalty_cmd(&cli.common, kv),
        Command::Convexity { kv } => convexity(&cli.common, kv),
        Command::DualObjective { kv } => dual_objective_cmd(&cli.common, kv),
        Command::DualClassify { kv } => dual_classify_cmd(&cli.common, kv),
        Command::Saddle { kv } => saddle(&cli.common, kv),
        Command::Harness { kv } => harness_cmd(&cli.common, kv),
    }
}

fn load_problem(common: &Common) -> Result<Problem, String> {
    let path = common
        .problem
        .as_ref()
        .ok_or_else(|| "--problem FILE is required".to_string())?;
    Problem::load(path).map_err(|e| e.to_string())
}

fn push_problem_summary(report: &mut Report, prob: &Problem) {
    report.push("problem.n", prob.n().to_string());
    report.push("problem.objectives", prob.m().to_string());
    report.push("problem.constraints", prob.p().to_string());
    report.push_f64("theta", prob.theta());
    report.push_f64("sqrt_theta", prob.sqrt_theta());
}

fn push_verdict(report: &mut Report, key: &str, v: &Verdict) {
    match v {
        Verdict::HoldsOnGrid => report.push(key, "holds-on-grid"),
        Verdict::Refuted { witness, reason } => {
            report.push(key, "refuted");
            let reason_text = match reason {
                RefutationReason::DominatorFound => "dominator-found",
                RefutationReason::NotInRequiredFeasibleSet => "not-in-required-feasible-set",
            };
            report.push(&format!("{key}.reason"), reason_text);
            if let Some(w) = witness {
                report.push_vec(&format!("{key}.witness"), w);
            }
        }
    }
}

fn validate(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let _ = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let mut report = Report::new(common.format, "validate");
    push_problem_summary(&mut report, &prob);
    for (i, e) in prob.precision().eps().iter().enumerate() {
        report.push(
            &format!("epsilon.{}", i + 1),
            format!("{},{}", fmt_f64(e.lo()), fmt_f64(e.hi())),
        );
    }
    let mut ok = true;
    if common.grid.is_some() {
        let grid = common.parse_grid(prob.n())?;
        let points = grid.points();
        match prob.validate_objectives(&points) {
            Ok(()) => {
                report.push("objectives.checked_points", points.len().to_string());
                report.push_bool("objectives.valid_on_grid", true);
            }
            Err(e) => {
                report.push_bool("objectives.valid_on_grid", false);
                report.push("objectives.violation", e.to_string());
                ok = false;
            }
        }
    }
    report.push_bool("ok", ok);
    report.print();
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn classify(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let z = kv.require_vector("z")?;
    let grid = common.parse_grid(prob.n())?;
    let tols = common.tolerances();
    let c = classify_point(&prob, &z, &grid, &tols).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "classify");
    push_problem_summary(&mut report, &prob);
    report.push_vec("z", &z);
    report.push_vec("grid.lo", grid.lo());
    report.push_vec("grid.hi", grid.hi());
    report.push(
        "grid.counts",
        grid.counts()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    report.push_bool("z.in_s", prob.in_s(&z));
    report.push_bool(
        "z.in_omega",
        prob.in_omega(&z, tols.tol_feas).map_err(|e| e.to_string())?,
    );
    report.push_bool(
        "z.in_omega_eps",
        prob.in_omega_eps(&z, tols.tol_feas)
            .map_err(|e| e.to_string())?,
    );
    for (name, verdict) in c.flags() {
        push_verdict(&mut report, &format!("flag.{name}"), verdict);
    }
    report.push(
        "note",
        "holds-on-grid means no falsifier exists on the declared grid; \
         uncertainty sets are finite samples",
    );
    report.print();
    Ok(ExitCode::SUCCESS)
}

fn kkt(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let z = kv.require_vector("z")?;
    let lambda = kv.require_vector("lambda")?;
    let tols = common.tolerances();
    let cert = check_kkt_pair(&prob, &z, &lambda, &tols).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "kkt");
    push_problem_summary(&mut report, &prob);
    report.push_vec("z", &z);
    report.push_vec("lambda", &lambda);
    report.push_bool("feasible", cert.feasible);
    report.push_f64("inclusion.residual", cert.inclusion_residual);
    report.push_f64("inclusion.allowance", cert.allowance);
    report.push_bool("inclusion.ok", cert.inclusion_ok);
    for s in &cert.sign_report {
        let j = s.constraint + 1;
        report.push_f64(&format!("sign.{j}.g"), s.g_value);
        report.push(
            &format!("sign.{j}.required"),
            match s.required {
                SignRequirement::Zero => "zero",
                SignRequirement::Positive => "positive",
            },
        );
        report.push_f64(&format!("sign.{j}.lambda"), s.lambda);
        report.push_bool(&format!("sign.{j}.ok"), s.ok);
    }
    report.push_bool("surrogate_superset", cert.surrogate_superset);
    if cert.surrogate_superset {
        report.push(
            "note",
            "subdifferential surrogates are upper estimates; the verdict \
             certifies the computed surrogate sets",
        );
    }
    report.push_bool("verdict", cert.verdict);
    report.print();
    Ok(if cert.verdict {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn solve_penalty_cmd(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let grid = common.parse_grid(prob.n())?;
    let mut opts = PenaltyOptions::over_box(grid.lo().to_vec(), grid.hi().to_vec());
    if let Some(r0) = kv.scalar("r0")? {
        opts.r0 = r0;
    }
    if let Some(shrink) = kv.scalar("shrink")? {
        opts.shrink = shrink;
    }
    if let Some(starts) = kv.count("starts")? {
        opts.starts = starts;
    }
    if let Some(inner) = kv.count("inner")? {
        opts.inner_iters = inner;
    }
    if let Some(max_outer) = kv.count("max-outer")? {
        opts.max_outer = max_outer;
    }
    opts.seed = common.seed;
    let tols = common.tolerances();
    let run = solve_penalty(&prob, &opts, &tols).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "solve-penalty");
    push_problem_summary(&mut report, &prob);
    report.push_f64("options.r0", opts.r0);
    report.push_f64("options.shrink", opts.shrink);
    report.push("options.starts", opts.starts.to_string());
    report.push("options.seed", opts.seed.to_string());
    report.push("outer.iterations", run.history.len().to_string());
    for (t, h) in run.history.iter().enumerate() {
        report.push_f64(&format!("outer.{}.r", t + 1), h.r);
        report.push_vec(&format!("outer.{}.g_plus", t + 1), &h.g_plus);
        report.push_f64(&format!("outer.{}.stationarity", t + 1), h.stationarity);
    }
    report.push_vec("z", &run.z);
    report.push_vec("lambda", &run.lambda);
    report.push_vec("r", &run.r);
    if let Some(cert) = &run.kkt {
        report.push_bool("kkt.verdict", cert.verdict);
        report.push_f64("kkt.inclusion.residual", cert.inclusion_residual);
    }
    for (i, w) in run.warnings.iter().enumerate() {
        report.push(&format!("warning.{}", i + 1), w);
    }
    report.push_bool("success", run.success);
    report.print();
    Ok(if run.success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn convexity(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let z = kv.require_vector("z")?;
    let notion_name = kv
        .string("notion")
        .ok_or_else(|| "missing required argument notion=…".to_string())?;
    let notion = ConvexityNotion::from_name(notion_name).ok_or_else(|| {
        format!(
            "unknown notion '{notion_name}' (expected generalized, \
             theta_pseudo_quasi, or eps_pseudo_quasi)"
        )
    })?;
    let grid = common.parse_grid(prob.n())?;
    let samples: Vec<Vec<f64>> = grid.points().into_iter().filter(|x| prob.in_s(x)).collect();
    let tols = common.tolerances();
    let verdict = certify(&prob, notion, &z, &samples, &tols).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "convexity");
    push_problem_summary(&mut report, &prob);
    report.push("notion", notion.name());
    report.push_vec("z", &z);
    report.push("samples", samples.len().to_string());
    report.push(
        "status",
        if verdict.certified {
            "certified-on-samples"
        } else {
            "counterexample"
        },
    );
    if let Some(ce) = &verdict.counterexample {
        report.push_vec("counterexample.x", &ce.x);
        report.push("counterexample.selection", ce.selection.to_string());
        report.push_f64("counterexample.violation", ce.violation);
    }
    report.push(
        "note",
        "sampling semantics: certification covers the tested samples only",
    );
    report.print();
    Ok(if verdict.certified {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn dual_objective_cmd(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let y = kv.require_vector("y")?;
    let lambda = kv.require_vector("lambda")?;
    let value = dual_objective(&prob, &y, &lambda).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "dual-objective");
    push_problem_summary(&mut report, &prob);
    report.push_vec("y", &y);
    report.push_vec("lambda", &lambda);
    for (i, item) in value.items().iter().enumerate() {
        report.push_f64(&format!("L.{}.lo", i + 1), item.lo());
        report.push_f64(&format!("L.{}.hi", i + 1), item.hi());
    }
    report.print();
    Ok(ExitCode::SUCCESS)
}

fn dual_classify_cmd(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let anchor_z = kv.require_vector("anchor-z")?;
    let anchor_lambda = kv.require_vector("anchor-lambda")?;
    let cap_mode = common.cap_mode == CapMode::On;
    let tols = common.tolerances();
    let cfg = DualConfig::new(&prob, anchor_z, anchor_lambda, cap_mode, &tols)
        .map_err(|e| e.to_string())?;

    let candidate = match (kv.vector("y")?, kv.vector("lambda")?) {
        (Some(y), Some(lambda)) => DualPoint { y, lambda },
        (None, None) => cfg.anchor().clone(),
        _ => return Err("specify both y=… and lambda=… or neither".to_string()),
    };

    let grid = common.parse_grid(prob.n())?;
    let lambda_max = kv.scalar("lambda-max")?.unwrap_or_else(|| {
        4.0 * cfg
            .anchor()
            .lambda
            .iter()
            .cloned()
            .fold(1.0f64, f64::max)
    });
    let lambda_steps = kv.count("lambda-steps")?.unwrap_or(5);
    let samples = generate_dual_samples(&prob, &grid, lambda_max, lambda_steps);
    let report_data =
        dual_classify(&prob, &cfg, &candidate, &samples, &tols).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "dual-classify");
    push_problem_summary(&mut report, &prob);
    report.push_vec("anchor.z", &cfg.anchor().y);
    report.push_vec("anchor.lambda", &cfg.anchor().lambda);
    report.push_bool("cap_mode", cap_mode);
    report.push(
        "capped_constraints",
        cfg.capped_constraints()
            .iter()
            .map(|j| (j + 1).to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    report.push_vec("candidate.y", &candidate.y);
    report.push_vec("candidate.lambda", &candidate.lambda);
    report.push_f64("lambda_max", lambda_max);
    report.push("samples.considered", report_data.samples_considered.to_string());
    report.push("samples.feasible", report_data.samples_feasible.to_string());
    let holds = report_data.holds();
    match &report_data.refuted_by {
        Some(w) => {
            report.push("verdict", "refuted");
            report.push_vec("witness.y", &w.y);
            report.push_vec("witness.lambda", &w.lambda);
            // Echo the dual feasibility of the witness for replay.
            let feas = in_omega_d(&prob, &cfg, &w.y, &w.lambda, &tols)
                .map_err(|e| e.to_string())?;
            report.push_f64("witness.inclusion.residual", feas.inclusion_residual);
        }
        None => report.push("verdict", "holds-on-samples"),
    }
    report.print();
    Ok(if holds {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn saddle(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let prob = load_problem(common)?;
    let x_bar = kv.require_vector("x")?;
    let lambda_bar = kv.require_vector("lambda")?;
    let grid = common.parse_grid(prob.n())?;
    let lambda_steps = kv.count("lambda-steps")?.unwrap_or(17);
    let lambda_points = default_lambda_points(&lambda_bar, lambda_steps);
    let x_points = grid.points();
    let tols = common.tolerances();
    let result = check_saddle(&prob, &x_bar, &lambda_bar, &lambda_points, &x_points, &tols)
        .map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "saddle");
    push_problem_summary(&mut report, &prob);
    report.push_vec("x", &x_bar);
    report.push_vec("lambda", &lambda_bar);
    let reference =
        lagrangian(&prob, &x_bar, &lambda_bar, &x_bar, &lambda_bar).map_err(|e| e.to_string())?;
    for (i, item) in reference.items().iter().enumerate() {
        report.push_f64(&format!("lagrangian.{}.lo", i + 1), item.lo());
        report.push_f64(&format!("lagrangian.{}.hi", i + 1), item.hi());
    }
    report.push("lambda_points", result.lambda_points_scanned.to_string());
    report.push("x_points", result.x_points_scanned.to_string());
    for (key, verdict) in [("cond_i", &result.cond_i), ("cond_ii", &result.cond_ii)] {
        match verdict {
            SaddleVerdict::HoldsOnGrid => report.push(key, "holds-on-grid"),
            SaddleVerdict::Refuted { witness } => {
                report.push(key, "refuted");
                report.push_vec(&format!("{key}.witness"), witness);
            }
        }
    }
    report.print();
    Ok(if result.holds() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn harness_cmd(common: &Common, kv: &[String]) -> Result<ExitCode, String> {
    let kv = KeyValues::parse(kv)?;
    let instances = kv.count("instances")?.unwrap_or(100);
    let reports = harness::run_all(instances, common.seed).map_err(|e| e.to_string())?;

    let mut report = Report::new(common.format, "harness");
    report.push("instances", instances.to_string());
    report.push("seed", common.seed.to_string());
    let mut all_passed = true;
    for suite in &reports {
        report.push(&format!("suite.{}.checked", suite.name), suite.checked.to_string());
        report.push(
            &format!("suite.{}.violations", suite.name),
            suite.violations.len().to_string(),
        );
        for (i, v) in suite.violations.iter().enumerate() {
            report.push(&format!("suite.{}.violation.{}", suite.name, i + 1), v);
        }
        all_passed &= suite.passed();
    }
    report.push_bool("ok", all_passed);
    report.print();
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
