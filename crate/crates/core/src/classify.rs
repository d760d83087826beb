//! Grid-falsification classification of a candidate point against the
//! approximate solution concepts, plus the implication chain that links the
//! scalarized theta-concepts to the epsilon-Pareto ones.
//!
//! "Holds on grid" means no falsifying point was found on the declared grid
//! intersected with the robust feasible set; the definitions quantify over
//! the whole feasible set, which is undecidable for general expressions, so
//! reports always carry the grid they were run on.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::linalg;
use crate::model::Problem;
use crate::Tolerances;

/// A finite axis-aligned evaluation grid.
#[derive(Debug, Clone)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    /// Requires `lo < hi` componentwise and at least two points per axis.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(Error::InvalidGrid(
                "lo, hi, and counts must have equal lengths".into(),
            ));
        }
        if lo.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for k in 0..lo.len() {
            if !(lo[k] < hi[k]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {}: lo {} must be below hi {}",
                    k + 1,
                    lo[k],
                    hi[k]
                )));
            }
            if counts[k] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {}: needs at least 2 points",
                    k + 1
                )));
            }
        }
        Ok(Grid { lo, hi, counts })
    }

    /// The same bounds on every axis.
    pub fn uniform(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Grid::new(vec![lo; dim], vec![hi; dim], vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All grid points in deterministic order (last axis fastest).
    /// Axis endpoints are produced exactly.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![Vec::new()];
        for k in 0..self.dim() {
            let axis: Vec<f64> = (0..self.counts[k])
                .map(|i| {
                    self.lo[k] + (self.hi[k] - self.lo[k]) * (i as f64 / (self.counts[k] - 1) as f64)
                })
                .collect();
            let mut next = Vec::with_capacity(pts.len() * axis.len());
            for p in &pts {
                for &t in &axis {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }
}

/// Why a flag was refuted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefutationReason {
    /// A grid point satisfies the defining domination system.
    DominatorFound,
    /// The candidate is not in the feasible set the concept requires.
    NotInRequiredFeasibleSet,
}

/// Verdict for one solution concept.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    HoldsOnGrid,
    Refuted {
        witness: Option<Vec<f64>>,
        reason: RefutationReason,
    },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::HoldsOnGrid)
    }

    fn dominated(witness: Vec<f64>) -> Self {
        Verdict::Refuted {
            witness: Some(witness),
            reason: RefutationReason::DominatorFound,
        }
    }

    fn infeasible() -> Self {
        Verdict::Refuted {
            witness: None,
            reason: RefutationReason::NotInRequiredFeasibleSet,
        }
    }
}

/// Verdicts for every solution concept at one candidate point.
#[derive(Debug, Clone)]
pub struct Classification {
    pub eps_pareto: Verdict,
    pub eps_quasi_pareto: Verdict,
    pub almost_eps_pareto: Verdict,
    pub almost_eps_quasi: Verdict,
    pub almost_regular: Verdict,
    pub almost_theta: Verdict,
    pub almost_theta_quasi: Verdict,
    pub almost_theta_regular: Verdict,
}

impl Classification {
    /// Field-name/verdict pairs in stable report order.
    pub fn flags(&self) -> [(&'static str, &Verdict); 8] {
        [
            ("eps_pareto", &self.eps_pareto),
            ("eps_quasi_pareto", &self.eps_quasi_pareto),
            ("almost_eps_pareto", &self.almost_eps_pareto),
            ("almost_eps_quasi", &self.almost_eps_quasi),
            ("almost_regular", &self.almost_regular),
            ("almost_theta", &self.almost_theta),
            ("almost_theta_quasi", &self.almost_theta_quasi),
            ("almost_theta_regular", &self.almost_theta_regular),
        ]
    }
}

/// Scalarization: the sum of all lower and upper objective values.
pub fn scalarize(prob: &Problem, x: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (lo, hi) in prob.objectives() {
        s += lo.eval(x, &[])?;
        s += hi.eval(x, &[])?;
    }
    Ok(s)
}

/// The epsilon-shifted LU domination system: `f_i(x) <=_LU f_i(z) - E_i`
/// for every objective with at least one strict component.
pub fn dominates_eps(prob: &Problem, x: &[f64], z: &[f64], tols: &Tolerances) -> Result<bool> {
    dominates_shifted(prob, x, z, 1.0, tols)
}

/// The quasi variant: the shift is scaled by `|x - z| / sqrt(theta)`.
pub fn dominates_eps_quasi(
    prob: &Problem,
    x: &[f64],
    z: &[f64],
    tols: &Tolerances,
) -> Result<bool> {
    let scale = linalg::dist(x, z) / prob.sqrt_theta();
    dominates_shifted(prob, x, z, scale, tols)
}

fn dominates_shifted(
    prob: &Problem,
    x: &[f64],
    z: &[f64],
    shift_scale: f64,
    tols: &Tolerances,
) -> Result<bool> {
    let mut strict = false;
    for i in 0..prob.m() {
        let fx = prob.objective_interval(i, x)?;
        let fz = prob.objective_interval(i, z)?;
        let shift = prob.precision().eps()[i].scale(shift_scale);
        let target = fz.sub(&shift);
        if !fx.leq_lu(&target) {
            return Ok(false);
        }
        let strict_target = if tols.tol_strict > 0.0 {
            target.sub(&Interval::point(tols.tol_strict)?)
        } else {
            target
        };
        if fx.lt_lu(&strict_target) {
            strict = true;
        }
    }
    Ok(strict)
}

/// Classifies `z` against all solution concepts by exhaustive search for a
/// falsifier over the grid intersected with the robust feasible set.
///
/// Epsilon-concepts additionally require membership of `z` in the robust
/// feasible set and almost-concepts in the enlarged set; otherwise the flag
/// is vacuously refuted with a membership reason.
pub fn classify_point(
    prob: &Problem,
    z: &[f64],
    grid: &Grid,
    tols: &Tolerances,
) -> Result<Classification> {
    let in_omega = prob.in_omega(z, tols.tol_feas)?;
    let in_omega_eps = prob.in_omega_eps(z, tols.tol_feas)?;

    let mut feasible = Vec::new();
    for x in grid.points() {
        if prob.in_omega(&x, tols.tol_feas)? {
            feasible.push(x);
        }
    }

    let scan = |quasi: bool| -> Result<Option<Vec<f64>>> {
        for x in &feasible {
            let hit = if quasi {
                dominates_eps_quasi(prob, x, z, tols)?
            } else {
                dominates_eps(prob, x, z, tols)?
            };
            if hit {
                return Ok(Some(x.clone()));
            }
        }
        Ok(None)
    };
    let verdict_of = |member: bool, witness: Option<Vec<f64>>| -> Verdict {
        if !member {
            Verdict::infeasible()
        } else {
            match witness {
                Some(w) => Verdict::dominated(w),
                None => Verdict::HoldsOnGrid,
            }
        }
    };

    // Every concept requires at least membership in the enlarged set, and
    // candidates outside it may sit where the objectives are not even
    // interval-valued, so the scans only run for members.
    let (dom_plain, dom_quasi) = if in_omega_eps {
        (scan(false)?, scan(true)?)
    } else {
        (None, None)
    };

    let eps_pareto = verdict_of(in_omega, dom_plain.clone());
    let eps_quasi_pareto = verdict_of(in_omega, dom_quasi.clone());
    let almost_eps_pareto = verdict_of(in_omega_eps, dom_plain);
    let almost_eps_quasi = verdict_of(in_omega_eps, dom_quasi);

    let mut theta_witness = None;
    let mut theta_quasi_witness = None;
    if in_omega_eps {
        let phi_z = scalarize(prob, z)?;
        let theta = prob.theta();
        let sqrt_theta = prob.sqrt_theta();
        for x in &feasible {
            let phi_x = scalarize(prob, x)?;
            if theta_witness.is_none() && phi_z > phi_x + theta + tols.tol_strict {
                theta_witness = Some(x.clone());
            }
            if theta_quasi_witness.is_none()
                && phi_z > phi_x + sqrt_theta * linalg::dist(x, z) + tols.tol_strict
            {
                theta_quasi_witness = Some(x.clone());
            }
            if theta_witness.is_some() && theta_quasi_witness.is_some() {
                break;
            }
        }
    }
    let almost_theta = verdict_of(in_omega_eps, theta_witness);
    let almost_theta_quasi = verdict_of(in_omega_eps, theta_quasi_witness);

    let both = |a: &Verdict, b: &Verdict| -> Verdict {
        if a.holds() && b.holds() {
            Verdict::HoldsOnGrid
        } else if !a.holds() {
            a.clone()
        } else {
            b.clone()
        }
    };
    let almost_regular = both(&almost_eps_pareto, &almost_eps_quasi);
    let almost_theta_regular = both(&almost_theta, &almost_theta_quasi);

    Ok(Classification {
        eps_pareto,
        eps_quasi_pareto,
        almost_eps_pareto,
        almost_eps_quasi,
        almost_regular,
        almost_theta,
        almost_theta_quasi,
        almost_theta_regular,
    })
}

/// One implication of the theta-to-epsilon chain.
#[derive(Debug, Clone)]
pub struct Implication {
    pub name: &'static str,
    pub antecedent_holds: bool,
    pub consequent_holds: bool,
    /// True when the antecedent failed, making the implication vacuous.
    pub vacuous: bool,
    /// True when the antecedent held but the consequent was refuted by a
    /// dominator; this would falsify the implementation, not the theory.
    pub violated: bool,
}

/// Result of checking the three theta-to-epsilon implications on a
/// classification.
#[derive(Debug, Clone)]
pub struct Lemma32Report {
    pub implications: Vec<Implication>,
}

impl Lemma32Report {
    pub fn passed(&self) -> bool {
        self.implications.iter().all(|i| !i.violated)
    }
}

/// Evaluates the implications: almost-theta implies almost-epsilon-Pareto,
/// almost-theta-quasi implies almost-epsilon-quasi, and the regular variants
/// likewise.
pub fn lemma32_check(
    prob: &Problem,
    z: &[f64],
    grid: &Grid,
    tols: &Tolerances,
) -> Result<Lemma32Report> {
    let c = classify_point(prob, z, grid, tols)?;
    let pairs = [
        ("theta_implies_eps_pareto", &c.almost_theta, &c.almost_eps_pareto),
        (
            "theta_quasi_implies_eps_quasi",
            &c.almost_theta_quasi,
            &c.almost_eps_quasi,
        ),
        (
            "theta_regular_implies_regular",
            &c.almost_theta_regular,
            &c.almost_regular,
        ),
    ];
    let implications = pairs
        .into_iter()
        .map(|(name, ante, cons)| Implication {
            name,
            antecedent_holds: ante.holds(),
            consequent_holds: cons.holds(),
            vacuous: !ante.holds(),
            violated: ante.holds() && !cons.holds(),
        })
        .collect();
    Ok(Lemma32Report { implications })
}
