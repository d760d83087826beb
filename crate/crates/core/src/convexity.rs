//! Certification of the three generalized-convexity notions at a point over
//! a finite sample of the ground set.
//!
//! Each definition asks, for every comparison point and every subgradient
//! selection, for a direction `w` in the polar of the normal cone that links
//! function differences to subgradient inner products. That is a feasibility
//! system in `w`: linear rows from the notion, linear rows from the normal
//! cone generators, and the ball constraint `|w| <= |x - z|` (the exact
//! content of requiring `<b, w> <= |x - z|` for every unit vector `b`).
//! Feasibility is decided by a small quadratic routine that minimizes the
//! squared hinge violations over the ball; a handful of closed-form
//! candidate directions (zero and `x - z`) is tried first, which settles
//! every affine instance exactly.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Problem;
use crate::setcalc::Polytope;
use crate::Tolerances;

/// Cap on the number of subgradient vertex selections per sample.
const SELECTION_CAP: usize = 4096;

/// The three notions, ordered from strongest to weakest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexityNotion {
    /// Direct inequality rows for objectives and active constraints.
    Generalized,
    /// Aggregated implication on the scalarization plus constraint rows.
    ThetaPseudoQuasi,
    /// Per-objective implications with the epsilon weights plus constraint
    /// rows.
    EpsPseudoQuasi,
}

impl ConvexityNotion {
    pub fn name(&self) -> &'static str {
        match self {
            ConvexityNotion::Generalized => "generalized",
            ConvexityNotion::ThetaPseudoQuasi => "theta_pseudo_quasi",
            ConvexityNotion::EpsPseudoQuasi => "eps_pseudo_quasi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "generalized" => Some(ConvexityNotion::Generalized),
            "theta_pseudo_quasi" => Some(ConvexityNotion::ThetaPseudoQuasi),
            "eps_pseudo_quasi" => Some(ConvexityNotion::EpsPseudoQuasi),
            _ => None,
        }
    }
}

/// A sample certified feasible, with one witness direction per subgradient
/// selection.
#[derive(Debug, Clone)]
pub struct SampleWitness {
    pub x: Vec<f64>,
    pub omegas: Vec<Vec<f64>>,
}

/// A counterexample: a sample and subgradient selection whose feasibility
/// system admits no direction within tolerance.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub x: Vec<f64>,
    /// Index of the failing vertex selection (deterministic enumeration
    /// order), for replay.
    pub selection: usize,
    /// Smallest maximum row violation found.
    pub violation: f64,
}

/// Verdict of a certification run. Sampling semantics only: certification
/// says every tested sample admits a direction, not that the notion holds
/// over the whole ground set.
#[derive(Debug, Clone)]
pub struct ConvexityVerdict {
    pub notion: ConvexityNotion,
    pub certified: bool,
    pub witnesses: Vec<SampleWitness>,
    pub counterexample: Option<Counterexample>,
    pub samples_tested: usize,
}

/// Linear row `<c, w> <= d`.
struct Row {
    c: Vec<f64>,
    d: f64,
}

/// Certifies `notion` at `z` over the given samples of the ground set.
pub fn certify(
    prob: &Problem,
    notion: ConvexityNotion,
    z: &[f64],
    samples: &[Vec<f64>],
    tols: &Tolerances,
) -> Result<ConvexityVerdict> {
    if !prob.ground_set().contains(z, tols.tol_active) {
        return Err(Error::NotInGroundSet);
    }
    let n = prob.n();
    let cone = prob.ground_set().normal_cone(z, tols.tol_active)?;

    // Subdifferential polytopes at z: objective bounds, then one polytope
    // per active sample point of every constraint.
    let mut obj_polys: Vec<Polytope> = Vec::with_capacity(2 * prob.m());
    for (lo, hi) in prob.objectives() {
        for side in [lo, hi] {
            obj_polys.push(side.subdiff_tol(z, &[], tols.tol_active)?.polytope);
        }
    }
    // (constraint index, active v, polytope) triples.
    let mut con_entries: Vec<(usize, Vec<f64>, Polytope)> = Vec::new();
    for (j, c) in prob.constraints().iter().enumerate() {
        for v in prob.active_set(j, z, tols.tol_active)? {
            let poly = c.expr.subdiff_tol(z, &v, tols.tol_active)?.polytope;
            con_entries.push((j, v, poly));
        }
    }

    let selection_sizes: Vec<usize> = obj_polys
        .iter()
        .map(|p| p.vertices().len())
        .chain(con_entries.iter().map(|(_, _, p)| p.vertices().len()))
        .collect();
    let total_selections: usize = selection_sizes.iter().product();
    if total_selections > SELECTION_CAP {
        return Err(Error::SelectionBlowup {
            count: total_selections,
            cap: SELECTION_CAP,
        });
    }

    let sqrt_theta = prob.sqrt_theta();
    let mut witnesses = Vec::new();
    for x in samples {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let dx = linalg::dist(x, z);
        let mut omegas = Vec::with_capacity(total_selections);
        for sel in 0..total_selections {
            let picks = unrank_selection(sel, &selection_sizes);
            let mut rows: Vec<Row> = Vec::new();
            // Cone rows: w in the polar of the normal cone.
            for g in cone.generators() {
                rows.push(Row {
                    c: g.clone(),
                    d: 0.0,
                });
            }
            // Notion rows.
            match notion {
                ConvexityNotion::Generalized => {
                    for (i, poly) in obj_polys.iter().enumerate() {
                        let grad = &poly.vertices()[picks[i]];
                        let (obj, side) = (i / 2, i % 2);
                        let (lo_e, hi_e) = &prob.objectives()[obj];
                        let e = if side == 0 { lo_e } else { hi_e };
                        let diff = e.eval(x, &[])? - e.eval(z, &[])?;
                        rows.push(Row {
                            c: grad.clone(),
                            d: diff,
                        });
                    }
                    for (k, (j, v, poly)) in con_entries.iter().enumerate() {
                        let grad = &poly.vertices()[picks[obj_polys.len() + k]];
                        let e = &prob.constraints()[*j].expr;
                        let diff = e.eval(x, v)? - e.eval(z, v)?;
                        rows.push(Row {
                            c: grad.clone(),
                            d: diff,
                        });
                    }
                }
                ConvexityNotion::ThetaPseudoQuasi => {
                    // Aggregated antecedent must fail strictly whenever the
                    // consequent fails at x.
                    let phi_x = crate::classify::scalarize(prob, x)?;
                    let phi_z = crate::classify::scalarize(prob, z)?;
                    if !(phi_x >= phi_z - sqrt_theta * dx) {
                        let mut c = vec![0.0; n];
                        for (i, poly) in obj_polys.iter().enumerate() {
                            linalg::axpy(&mut c, 1.0, &poly.vertices()[picks[i]]);
                        }
                        rows.push(Row {
                            c,
                            d: -sqrt_theta * dx - tols.delta_strict,
                        });
                    }
                    push_constraint_implication_rows(
                        prob,
                        &con_entries,
                        &picks[obj_polys.len()..],
                        x,
                        z,
                        &mut rows,
                    )?;
                }
                ConvexityNotion::EpsPseudoQuasi => {
                    for (i, poly) in obj_polys.iter().enumerate() {
                        let grad = &poly.vertices()[picks[i]];
                        let (obj, side) = (i / 2, i % 2);
                        let eps = &prob.precision().eps()[obj];
                        // The lower bound carries the upper epsilon weight
                        // and vice versa.
                        let weight = if side == 0 { eps.hi() } else { eps.lo() };
                        let (lo_e, hi_e) = &prob.objectives()[obj];
                        let e = if side == 0 { lo_e } else { hi_e };
                        let shift = weight / sqrt_theta * dx;
                        let consequent = e.eval(x, &[])? >= e.eval(z, &[])? - shift;
                        if !consequent {
                            rows.push(Row {
                                c: grad.clone(),
                                d: -shift - tols.delta_strict,
                            });
                        }
                    }
                    push_constraint_implication_rows(
                        prob,
                        &con_entries,
                        &picks[obj_polys.len()..],
                        x,
                        z,
                        &mut rows,
                    )?;
                }
            }

            let displacement = linalg::sub(x, z);
            match solve_direction(&rows, dx, n, tols.tol_convex_feas, &displacement) {
                Some(w) => omegas.push(w),
                None => {
                    let violation = best_violation(&rows, dx, n, &displacement);
                    let samples_tested = witnesses.len() + 1;
                    return Ok(ConvexityVerdict {
                        notion,
                        certified: false,
                        witnesses,
                        counterexample: Some(Counterexample {
                            x: x.clone(),
                            selection: sel,
                            violation,
                        }),
                        samples_tested,
                    });
                }
            }
        }
        witnesses.push(SampleWitness {
            x: x.clone(),
            omegas,
        });
    }
    let tested = witnesses.len();
    Ok(ConvexityVerdict {
        notion,
        certified: true,
        witnesses,
        counterexample: None,
        samples_tested: tested,
    })
}

/// Rows from "g_j(x, v) <= g_j(z, v) implies <x*_v, w> <= 0" for the active
/// sample points.
fn push_constraint_implication_rows(
    prob: &Problem,
    con_entries: &[(usize, Vec<f64>, Polytope)],
    picks: &[usize],
    x: &[f64],
    z: &[f64],
    rows: &mut Vec<Row>,
) -> Result<()> {
    for (k, (j, v, poly)) in con_entries.iter().enumerate() {
        let e = &prob.constraints()[*j].expr;
        if e.eval(x, v)? <= e.eval(z, v)? {
            rows.push(Row {
                c: poly.vertices()[picks[k]].clone(),
                d: 0.0,
            });
        }
    }
    Ok(())
}

fn unrank_selection(mut rank: usize, sizes: &[usize]) -> Vec<usize> {
    let mut picks = vec![0; sizes.len()];
    for (i, &s) in sizes.iter().enumerate().rev() {
        picks[i] = rank % s;
        rank /= s;
    }
    picks
}

fn max_violation(rows: &[Row], radius: f64, w: &[f64]) -> f64 {
    let mut worst: f64 = (linalg::norm(w) - radius).max(0.0);
    for r in rows {
        worst = worst.max(linalg::dot(&r.c, w) - r.d);
    }
    worst
}

/// Finds `w` with `|w| <= radius` satisfying every row within `tol`, or
/// `None` if the quadratic violation minimization bottoms out above it.
///
/// The zero direction and the displacement `x - z` are tried first; they
/// settle affine instances exactly before any iteration runs.
fn solve_direction(
    rows: &[Row],
    radius: f64,
    n: usize,
    tol: f64,
    displacement: &[f64],
) -> Option<Vec<f64>> {
    let zero = vec![0.0; n];
    for cand in [&zero, &displacement.to_vec()] {
        if max_violation(rows, radius, cand) <= tol {
            return Some(cand.clone());
        }
    }
    let w = minimize_violation(rows, radius, n);
    if max_violation(rows, radius, &w) <= tol {
        Some(w)
    } else {
        None
    }
}

fn best_violation(rows: &[Row], radius: f64, n: usize, displacement: &[f64]) -> f64 {
    let zero = vec![0.0; n];
    let w = minimize_violation(rows, radius, n);
    [&zero, &displacement.to_vec(), &w]
        .into_iter()
        .map(|c| max_violation(rows, radius, c))
        .fold(f64::INFINITY, f64::min)
}

/// Minimizes the sum of squared hinge violations of the linear rows over
/// the ball of the given radius by projected gradient with momentum.
fn minimize_violation(rows: &[Row], radius: f64, n: usize) -> Vec<f64> {
    if rows.is_empty() || radius == 0.0 {
        return vec![0.0; n];
    }
    let lip: f64 = 2.0 * rows.iter().map(|r| linalg::dot(&r.c, &r.c)).sum::<f64>();
    if lip <= 0.0 {
        return vec![0.0; n];
    }
    let step = 1.0 / lip;
    let project = |w: &[f64]| -> Vec<f64> {
        let norm = linalg::norm(w);
        if norm <= radius {
            w.to_vec()
        } else {
            linalg::scale(radius / norm, w)
        }
    };
    let value = |w: &[f64]| -> f64 {
        rows.iter()
            .map(|r| {
                let h = (linalg::dot(&r.c, w) - r.d).max(0.0);
                h * h
            })
            .sum()
    };
    let grad = |w: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        for r in rows {
            let h = (linalg::dot(&r.c, w) - r.d).max(0.0);
            if h > 0.0 {
                linalg::axpy(&mut g, 2.0 * h, &r.c);
            }
        }
        g
    };

    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut fx = value(&x);
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let g = grad(&y);
        let mut cand = y.clone();
        linalg::axpy(&mut cand, -step, &g);
        let x_next = project(&cand);
        let moved = linalg::dist(&x_next, &y);
        if moved / step <= 1e-12 {
            x = x_next;
            break;
        }
        let f_next = value(&x_next);
        if f_next > fx {
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + beta * (xn - xo))
            .collect();
        x = x_next;
        fx = f_next;
        t = t_next;
    }
    x
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

    fn line_samples(lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
        Grid::uniform(1, lo, hi, count).unwrap().points()
    }

    #[test]
    fn nonconvex_instance_certifies_eps_pseudo_quasi() {
        let p = fixture("nonconvex.toml");
        let tols = Tolerances::default();
        let samples = line_samples(0.0, 3.0, 301);
        let v = certify(&p, ConvexityNotion::EpsPseudoQuasi, &[0.0], &samples, &tols).unwrap();
        assert!(v.certified, "counterexample: {:?}", v.counterexample);
        // The zero direction works at every sample.
        for w in &v.witnesses {
            assert!(w.omegas.iter().all(|o| linalg::norm(o) <= 1e-9));
        }
    }

    #[test]
    fn nonconvex_instance_refutes_generalized() {
        let p = fixture("nonconvex.toml");
        let tols = Tolerances::default();
        let samples = line_samples(0.0, 3.0, 301);
        let v = certify(&p, ConvexityNotion::Generalized, &[0.0], &samples, &tols).unwrap();
        assert!(!v.certified);
        let ce = v.counterexample.unwrap();
        // The failing row is the constraint row reading -x^2 >= 0.
        assert!(ce.x[0] > 0.0);
        assert!(ce.violation > tols.tol_convex_feas);
    }

    #[test]
    fn affine_instance_certifies_generalized_via_displacement() {
        let p = fixture("affine_2d.toml");
        let tols = Tolerances::default();
        let samples = Grid::uniform(2, 0.0, 2.0, 9).unwrap().points();
        let v = certify(
            &p,
            ConvexityNotion::Generalized,
            &[0.0, 0.0],
            &samples,
            &tols,
        )
        .unwrap();
        assert!(v.certified, "counterexample: {:?}", v.counterexample);
    }

    #[test]
    fn generalized_implies_eps_pseudo_quasi_on_affine_fixture() {
        let p = fixture("affine_1d.toml");
        let tols = Tolerances::default();
        let samples = line_samples(0.0, 3.0, 61);
        let gen = certify(&p, ConvexityNotion::Generalized, &[0.0], &samples, &tols).unwrap();
        let eps = certify(&p, ConvexityNotion::EpsPseudoQuasi, &[0.0], &samples, &tols).unwrap();
        assert!(gen.certified);
        assert!(eps.certified);
    }

    #[test]
    fn theta_pseudo_quasi_on_affine_fixture() {
        let p = fixture("affine_2d.toml");
        let tols = Tolerances::default();
        let samples = Grid::uniform(2, 0.0, 2.0, 7).unwrap().points();
        let v = certify(
            &p,
            ConvexityNotion::ThetaPseudoQuasi,
            &[0.0, 0.0],
            &samples,
            &tols,
        )
        .unwrap();
        assert!(v.certified, "counterexample: {:?}", v.counterexample);
    }

    #[test]
    fn counterexample_replays_deterministically() {
        let p = fixture("nonconvex.toml");
        let tols = Tolerances::default();
        let samples = line_samples(0.0, 3.0, 31);
        let first = certify(&p, ConvexityNotion::Generalized, &[0.0], &samples, &tols).unwrap();
        let second = certify(&p, ConvexityNotion::Generalized, &[0.0], &samples, &tols).unwrap();
        let (a, b) = (first.counterexample.unwrap(), second.counterexample.unwrap());
        assert_eq!(a.x, b.x);
        assert_eq!(a.selection, b.selection);
        assert_eq!(a.violation, b.violation);
    }

    #[test]
    fn z_outside_ground_set_errors() {
        let p = fixture("affine_1d.toml");
        let tols = Tolerances::default();
        assert!(matches!(
            certify(&p, ConvexityNotion::Generalized, &[-1.0], &[], &tols),
            Err(Error::NotInGroundSet)
        ));
    }
}
