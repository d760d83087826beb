//! Convex set calculus: polytopes as vertex lists, polyhedral cones as
//! generator lists, normal and polar cones of polyhedra, and the distance
//! from the origin to a weighted Minkowski sum of polytopes plus a cone.
//!
//! The distance routine is the workhorse behind every stationarity
//! inclusion check: membership of 0 in `sum_t w_t P_t + cone + r*B` is
//! decided by comparing the achieved distance against the allowance `r`.
//! Minkowski sums are never materialized vertex-by-vertex; the solver
//! optimizes over per-polytope convex weights directly.

use crate::error::{Error, Result};
use crate::linalg;

/// Convergence target for the gradient mapping of the distance solver.
pub const DIST_GRAD_TOL: f64 = 1e-10;
/// Iteration cap for the distance solver.
pub const DIST_MAX_ITERS: usize = 100_000;
/// Largest dimension supported by the polar-cone enumeration.
pub const POLAR_MAX_DIM: usize = 4;

/// A convex polytope given as the convex hull of a nonempty vertex list.
/// Duplicate vertices are permitted; the hull is unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Vec<Vec<f64>>,
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = match vertices.first() {
            Some(v) => v.len(),
            None => {
                return Err(Error::LengthMismatch { left: 0, right: 1 });
            }
        };
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        Ok(Polytope { vertices })
    }

    pub fn singleton(point: Vec<f64>) -> Self {
        Polytope {
            vertices: vec![point],
        }
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn is_singleton(&self) -> bool {
        self.vertices.len() == 1
    }

    /// Pointwise scaling of the set by `k`.
    pub fn scale(&self, k: f64) -> Polytope {
        Polytope {
            vertices: self.vertices.iter().map(|v| linalg::scale(k, v)).collect(),
        }
    }

    /// Minkowski sum, materialized vertex-by-vertex. Only used inside
    /// expression subdifferentials where vertex counts are small by
    /// construction; inclusion checks go through [`dist_origin`] instead.
    pub fn minkowski_sum(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut vertices = Vec::with_capacity(self.vertices.len() * other.vertices.len());
        for a in &self.vertices {
            for b in &other.vertices {
                let mut v = a.clone();
                linalg::axpy(&mut v, 1.0, b);
                vertices.push(v);
            }
        }
        Ok(Polytope {
            vertices: dedup_points(vertices),
        })
    }

    /// Centroid of the vertex list; an element of the hull.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for v in &self.vertices {
            linalg::axpy(&mut c, 1.0, v);
        }
        let k = self.vertices.len() as f64;
        c.iter_mut().for_each(|x| *x /= k);
        c
    }
}

/// A polyhedral cone given by generators: the set of nonnegative
/// combinations. An empty generator list is the trivial cone `{0}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolyCone {
    generators: Vec<Vec<f64>>,
    dim: usize,
}

impl PolyCone {
    pub fn new(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self> {
        for g in &generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: g.len(),
                });
            }
        }
        Ok(PolyCone { generators, dim })
    }

    pub fn trivial(dim: usize) -> Self {
        PolyCone {
            generators: Vec::new(),
            dim,
        }
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.is_empty()
    }
}

fn dedup_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        let dup = out
            .iter()
            .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-12));
        if !dup {
            out.push(p);
        }
    }
    out
}

/// Outward normal cone of the polyhedron `{x : a_k . x <= b_k}` at `z`:
/// the cone generated by the active outward normals. For a convex
/// polyhedron this is the limiting normal cone.
///
/// Errors if `z` violates some halfspace by more than `tol_active`.
pub fn normal_cone(halfspaces: &[(Vec<f64>, f64)], z: &[f64], tol_active: f64) -> Result<PolyCone> {
    let mut generators = Vec::new();
    for (a, b) in halfspaces {
        if a.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                got: a.len(),
            });
        }
        let slack = linalg::dot(a, z) - b;
        if slack > tol_active {
            return Err(Error::NotInGroundSet);
        }
        if slack >= -tol_active {
            generators.push(a.clone());
        }
    }
    PolyCone::new(z.len(), generators)
}

/// Polar cone `{y : <y, g> <= 0 for every generator g}` as a generator
/// list, computed by double description. Supported for `dim <= 4`.
///
/// The polar of the trivial cone is all of space, returned as the
/// +/- unit axes.
pub fn polar(cone: &PolyCone) -> Result<PolyCone> {
    let n = cone.dim();
    if n > POLAR_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: n,
            max: POLAR_MAX_DIM,
        });
    }
    // Start from a generator description of all of R^n and intersect with
    // one halfspace { y : <g, y> <= 0 } per generator.
    let mut rays: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rays.push(e.clone());
        e[i] = -1.0;
        rays.push(e);
    }
    for g in cone.generators() {
        rays = dd_halfspace_step(rays, g);
    }
    PolyCone::new(n, rays)
}

/// One double-description step: intersect the cone spanned by `rays` with
/// `{ y : <a, y> <= 0 }`.
fn dd_halfspace_step(rays: Vec<Vec<f64>>, a: &[f64]) -> Vec<Vec<f64>> {
    const TOL: f64 = 1e-12;
    let vals: Vec<f64> = rays.iter().map(|r| linalg::dot(a, r)).collect();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (r, &v) in rays.iter().zip(&vals) {
        if v <= TOL {
            kept.push(r.clone());
        }
    }
    // Pairs straddling the hyperplane generate new boundary rays.
    for (rp, &vp) in rays.iter().zip(&vals) {
        if vp <= TOL {
            continue;
        }
        for (rn, &vn) in rays.iter().zip(&vals) {
            if vn >= -TOL {
                continue;
            }
            // w = vp * rn - vn * rp satisfies <a, w> = 0.
            let mut w = linalg::scale(vp, rn);
            linalg::axpy(&mut w, -vn, rp);
            let norm = linalg::norm(&w);
            if norm > 1e-9 {
                kept.push(linalg::scale(1.0 / norm, &w));
            }
        }
    }
    dedup_points(kept)
}

/// Vertex-list union with hull semantics: the hull of the union is the
/// hull of the concatenated vertex lists, so no pruning is required.
pub fn hull_union(polytopes: &[Polytope]) -> Result<Polytope> {
    let first = polytopes
        .first()
        .ok_or(Error::LengthMismatch { left: 0, right: 1 })?;
    let dim = first.dim();
    let mut vertices = Vec::new();
    for p in polytopes {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        vertices.extend(p.vertices().iter().cloned());
    }
    Polytope::new(vertices)
}

/// Decomposition witness returned by [`dist_origin`].
#[derive(Debug, Clone)]
pub struct DistWitness {
    /// Convex weights per polytope, aligned with its vertex list.
    pub alpha: Vec<Vec<f64>>,
    /// Nonnegative cone coefficients, aligned with the generator list.
    pub mu: Vec<f64>,
    /// The achieved residual vector `sum_t w_t P_t alpha_t + G mu`.
    pub residual: Vec<f64>,
    /// Euclidean norm of the residual.
    pub dist: f64,
    /// Allowance the caller intends to compare against (echoed, not applied).
    pub allowance: f64,
    /// False when the iteration cap was hit before the gradient-mapping
    /// target; the best point found is still reported.
    pub converged: bool,
    pub iterations: usize,
}

/// Distance from the origin to `sum_t w_t conv(P_t) + cone(G)`.
///
/// Solved as a convex least-squares over the product of vertex simplices
/// and the nonnegative orthant by projected gradient with Nesterov
/// momentum and function-value restart, iterated until the gradient
/// mapping drops below [`DIST_GRAD_TOL`] or [`DIST_MAX_ITERS`] is reached.
///
/// The `allowance` is echoed in the witness for the caller's comparison;
/// it does not enter the minimization.
pub fn dist_origin(
    terms: &[(f64, Polytope)],
    cone: &PolyCone,
    allowance: f64,
) -> Result<DistWitness> {
    let dim = terms
        .first()
        .map(|(_, p)| p.dim())
        .unwrap_or_else(|| cone.dim());
    for (w, p) in terms {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        if *w < 0.0 {
            return Err(Error::NegativeMultiplier(*w));
        }
    }
    if !cone.is_trivial() && cone.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: cone.dim(),
        });
    }

    // Columns of the linear map: weighted vertices, then cone generators.
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut simplex_sizes = Vec::with_capacity(terms.len());
    for (w, p) in terms {
        simplex_sizes.push(p.vertices().len());
        for v in p.vertices() {
            cols.push(linalg::scale(*w, v));
        }
    }
    let n_alpha: usize = simplex_sizes.iter().sum();
    for g in cone.generators() {
        cols.push(g.clone());
    }
    let n_cols = cols.len();

    // Initial point: uniform simplex weights, zero cone coefficients.
    let mut u = vec![0.0; n_cols];
    {
        let mut off = 0;
        for &k in &simplex_sizes {
            for i in 0..k {
                u[off + i] = 1.0 / k as f64;
            }
            off += k;
        }
    }

    let residual_of = |u: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; dim];
        for (c, &ui) in cols.iter().zip(u) {
            if ui != 0.0 {
                linalg::axpy(&mut r, ui, c);
            }
        }
        r
    };

    if n_cols == 0 {
        return Ok(DistWitness {
            alpha: Vec::new(),
            mu: Vec::new(),
            residual: vec![0.0; dim],
            dist: 0.0,
            allowance,
            converged: true,
            iterations: 0,
        });
    }

    let lip = lipschitz_bound(&cols);
    if lip <= 0.0 {
        // All columns are zero: every feasible point yields the zero residual.
        let r = residual_of(&u);
        let dist = linalg::norm(&r);
        return Ok(finish(
            u,
            &simplex_sizes,
            n_alpha,
            r,
            dist,
            allowance,
            true,
            0,
        ));
    }
    let step = 1.0 / lip;

    let project = |u: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(u.len());
        let mut off = 0;
        for &k in &simplex_sizes {
            out.extend(linalg::project_simplex(&u[off..off + k]));
            off += k;
        }
        for &m in &u[n_alpha..] {
            out.push(m.max(0.0));
        }
        out
    };
    let grad = |r: &[f64]| -> Vec<f64> { cols.iter().map(|c| linalg::dot(c, r)).collect() };
    let value = |r: &[f64]| -> f64 { 0.5 * linalg::dot(r, r) };

    let mut x = project(&u);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = value(&residual_of(&x));
    let mut converged = false;
    let mut iters = 0;

    while iters < DIST_MAX_ITERS {
        iters += 1;
        let ry = residual_of(&y);
        let gy = grad(&ry);
        let mut cand = y.clone();
        linalg::axpy(&mut cand, -step, &gy);
        let x_next = project(&cand);

        // Gradient mapping at y.
        let gm: f64 = y
            .iter()
            .zip(&x_next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / step;
        if gm <= DIST_GRAD_TOL {
            x = x_next;
            converged = true;
            break;
        }

        let f_next = value(&residual_of(&x_next));
        if f_next > fx {
            // Restart the momentum sequence from the best point.
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
        y = project(&y);
        x = x_next;
        fx = f_next;
        t = t_next;
    }

    let r = residual_of(&x);
    let dist = linalg::norm(&r);
    Ok(finish(
        x,
        &simplex_sizes,
        n_alpha,
        r,
        dist,
        allowance,
        converged,
        iters,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    u: Vec<f64>,
    simplex_sizes: &[usize],
    n_alpha: usize,
    residual: Vec<f64>,
    dist: f64,
    allowance: f64,
    converged: bool,
    iterations: usize,
) -> DistWitness {
    let mut alpha = Vec::with_capacity(simplex_sizes.len());
    let mut off = 0;
    for &k in simplex_sizes {
        alpha.push(u[off..off + k].to_vec());
        off += k;
    }
    DistWitness {
        alpha,
        mu: u[n_alpha..].to_vec(),
        residual,
        dist,
        allowance,
        converged,
        iterations,
    }
}

/// Spectral-norm-squared bound for the column map via power iteration.
fn lipschitz_bound(cols: &[Vec<f64>]) -> f64 {
    let n = cols.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lam = 0.0;
    for _ in 0..60 {
        // w = M v, then v = M^T w (normalized).
        let dim = cols[0].len();
        let mut w = vec![0.0; dim];
        for (c, &vi) in cols.iter().zip(&v) {
            linalg::axpy(&mut w, vi, c);
        }
        let mut next: Vec<f64> = cols.iter().map(|c| linalg::dot(c, &w)).collect();
        let norm = linalg::norm(&next);
        if norm <= 1e-300 {
            return 0.0;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        lam = norm;
        v = next;
    }
    lam * 1.01
}

/// Exactly solvable cone reduction used by tests and the axis-aligned
/// fast path: distance from `v + cone(G)` to the origin when every
/// generator is a signed unit axis vector.
pub fn axis_cone_reduce(v: &[f64], cone: &PolyCone) -> Option<f64> {
    let mut down = vec![false; v.len()];
    let mut up = vec![false; v.len()];
    for g in cone.generators() {
        let mut nz = None;
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                if nz.is_some() {
                    return None;
                }
                nz = Some((i, gi));
            }
        }
        match nz {
            Some((i, gi)) if (gi - 1.0).abs() < 1e-12 => up[i] = true,
            Some((i, gi)) if (gi + 1.0).abs() < 1e-12 => down[i] = true,
            _ => return None,
        }
    }
    let mut s = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        let reachable_zero = (vi > 0.0 && down[i]) || (vi < 0.0 && up[i]) || vi == 0.0;
        if !reachable_zero {
            s += vi * vi;
        }
    }
    Some(s.sqrt())
}
