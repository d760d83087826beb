//! Scalar expressions in decision variables `x1..xN` and uncertainty
//! parameters `v1..vK`: parsing, evaluation, differentiation, and
//! subdifferentiation.
//!
//! Supported nonsmoothness is exactly `max`, `min`, and `abs` over smooth
//! subtrees. For those nodes the subdifferential surrogate is the convex
//! hull over active branches, an upper estimate of the limiting
//! subdifferential; certificates built on a superset are conservative for
//! membership checks, and every result carries an `is_exact` marker that is
//! false whenever an estimate rule fired with more than one active branch.
//!
//! Grammar (bit-exact contract for problem files):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | power
//! power   := atom ('^' integer)?
//! atom    := number | 'x'N | 'v'N | '(' expr ')'
//!          | 'max' '(' expr (',' expr)+ ')'
//!          | 'min' '(' expr (',' expr)+ ')'
//!          | 'abs' '(' expr ')'
//! ```
//!
//! Numbers are unsigned decimal literals with optional fraction and
//! exponent; variable numbering is 1-based in the surface syntax. Printing
//! and parsing round-trip: `parse(to_string(e)) == e` for every parsed `e`.

use crate::error::{Error, Result};
use crate::setcalc::{hull_union, Polytope};

/// Default absolute tolerance for active-branch detection.
pub const TOL_ACTIVE_DEFAULT: f64 = 1e-9;

/// An expression tree in canonical form: sums and products are flattened
/// n-ary nodes, and negation of a constant is folded into the constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based variable index (`x1` is `Var(0)`).
    Var(usize),
    /// 0-based uncertainty-parameter index (`v1` is `Param(0)`).
    Param(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    /// Integer power with exponent >= 1.
    Power(Box<Expr>, u32),
    Negate(Box<Expr>),
    Max(Vec<Expr>),
    Min(Vec<Expr>),
    Abs(Box<Expr>),
}

/// Subdifferential surrogate at a point: a polytope of subgradients and an
/// exactness marker.
#[derive(Debug, Clone)]
pub struct SubdiffResult {
    pub polytope: Polytope,
    /// True when the expression is differentiable at the point or a unique
    /// active branch was taken at every nonsmooth node.
    pub is_exact: bool,
}

impl Expr {
    /// Parses `text` against the grammar with `n_vars` decision variables
    /// and `n_params` uncertainty parameters.
    pub fn parse(text: &str, n_vars: usize, n_params: usize) -> Result<Expr> {
        Parser::new(text, n_vars, n_params).parse()
    }

    /// Standard recursive evaluation at `(x, v)`.
    pub fn eval(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => x.get(*i).copied().ok_or(Error::DimensionMismatch {
                expected: *i + 1,
                got: x.len(),
            }),
            Expr::Param(i) => v.get(*i).copied().ok_or(Error::DimensionMismatch {
                expected: *i + 1,
                got: v.len(),
            }),
            Expr::Sum(children) => children.iter().try_fold(0.0, |s, c| Ok(s + c.eval(x, v)?)),
            Expr::Product(children) => {
                children.iter().try_fold(1.0, |p, c| Ok(p * c.eval(x, v)?))
            }
            Expr::Power(base, k) => Ok(base.eval(x, v)?.powi(*k as i32)),
            Expr::Negate(inner) => Ok(-inner.eval(x, v)?),
            Expr::Max(children) => fold_extremum(children, x, v, f64::max),
            Expr::Min(children) => fold_extremum(children, x, v, f64::min),
            Expr::Abs(inner) => Ok(inner.eval(x, v)?.abs()),
        }
    }

    /// Subdifferential surrogate with respect to `x` at `(x, v)`, using the
    /// default active-branch tolerance.
    pub fn subdiff(&self, x: &[f64], v: &[f64]) -> Result<SubdiffResult> {
        self.subdiff_tol(x, v, TOL_ACTIVE_DEFAULT)
    }

    /// Subdifferential surrogate with an explicit active-branch tolerance.
    ///
    /// Smooth nodes propagate exact gradients; `max`/`min`/`abs` at a kink
    /// take the hull over active branches (`min` is treated as the negated
    /// `max` of negated children, which yields the same hull); sums take
    /// Minkowski sums of the child polytopes; products scale each child's
    /// polytope by the other factors' values, which is heuristic when more
    /// than one factor is nonsmooth at the point and marks the result
    /// inexact.
    pub fn subdiff_tol(&self, x: &[f64], v: &[f64], tol_active: f64) -> Result<SubdiffResult> {
        let node = self.subdiff_rec(x, v, tol_active)?;
        Ok(SubdiffResult {
            polytope: node.poly,
            is_exact: node.exact,
        })
    }

    fn subdiff_rec(&self, x: &[f64], v: &[f64], tol: f64) -> Result<SubNode> {
        let n = x.len();
        match self {
            Expr::Const(c) => Ok(SubNode::smooth(*c, zero_poly(n))),
            Expr::Param(i) => {
                let value = self.eval(x, v)?;
                let _ = i;
                Ok(SubNode::smooth(value, zero_poly(n)))
            }
            Expr::Var(i) => {
                let value = self.eval(x, v)?;
                let mut g = vec![0.0; n];
                g[*i] = 1.0;
                Ok(SubNode::smooth(value, Polytope::singleton(g)))
            }
            Expr::Sum(children) => {
                let mut value = 0.0;
                let mut poly = zero_poly(n);
                let mut exact = true;
                for c in children {
                    let node = c.subdiff_rec(x, v, tol)?;
                    value += node.value;
                    poly = poly.minkowski_sum(&node.poly)?;
                    exact &= node.exact;
                }
                Ok(SubNode { value, poly, exact })
            }
            Expr::Product(children) => {
                let nodes: Vec<SubNode> = children
                    .iter()
                    .map(|c| c.subdiff_rec(x, v, tol))
                    .collect::<Result<_>>()?;
                let value: f64 = nodes.iter().map(|nd| nd.value).product();
                let nonsmooth = nodes.iter().filter(|nd| !nd.poly.is_singleton()).count();
                let mut poly = zero_poly(n);
                for (i, node) in nodes.iter().enumerate() {
                    let coeff: f64 = nodes
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, o)| o.value)
                        .product();
                    poly = poly.minkowski_sum(&node.poly.scale(coeff))?;
                }
                let exact = nodes.iter().all(|nd| nd.exact) && nonsmooth <= 1;
                Ok(SubNode { value, poly, exact })
            }
            Expr::Power(base, k) => {
                let node = base.subdiff_rec(x, v, tol)?;
                let coeff = (*k as f64) * node.value.powi(*k as i32 - 1);
                Ok(SubNode {
                    value: node.value.powi(*k as i32),
                    poly: node.poly.scale(coeff),
                    exact: node.exact,
                })
            }
            Expr::Negate(inner) => {
                let node = inner.subdiff_rec(x, v, tol)?;
                Ok(SubNode {
                    value: -node.value,
                    poly: node.poly.scale(-1.0),
                    exact: node.exact,
                })
            }
            Expr::Abs(inner) => {
                let node = inner.subdiff_rec(x, v, tol)?;
                if node.value > tol {
                    Ok(node)
                } else if node.value < -tol {
                    Ok(SubNode {
                        value: -node.value,
                        poly: node.poly.scale(-1.0),
                        exact: node.exact,
                    })
                } else {
                    let poly = hull_union(&[node.poly.clone(), node.poly.scale(-1.0)])?;
                    Ok(SubNode {
                        value: node.value.abs(),
                        poly,
                        exact: false,
                    })
                }
            }
            Expr::Max(children) => active_branch_hull(children, x, v, tol, true),
            Expr::Min(children) => active_branch_hull(children, x, v, tol, false),
        }
    }

    /// True if some `max`/`min`/`abs` node has more than one active branch
    /// at `(x, v)` within the tolerance.
    pub fn has_active_kink(&self, x: &[f64], v: &[f64], tol: f64) -> Result<bool> {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => Ok(false),
            Expr::Sum(children) | Expr::Product(children) => {
                for c in children {
                    if c.has_active_kink(x, v, tol)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Expr::Power(base, _) => base.has_active_kink(x, v, tol),
            Expr::Negate(inner) => inner.has_active_kink(x, v, tol),
            Expr::Abs(inner) => {
                if inner.eval(x, v)?.abs() <= tol {
                    return Ok(true);
                }
                inner.has_active_kink(x, v, tol)
            }
            Expr::Max(children) | Expr::Min(children) => {
                let vals: Vec<f64> = children
                    .iter()
                    .map(|c| c.eval(x, v))
                    .collect::<Result<_>>()?;
                let best = match self {
                    Expr::Max(_) => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    _ => vals.iter().cloned().fold(f64::INFINITY, f64::min),
                };
                let active = vals.iter().filter(|&&t| (t - best).abs() <= tol).count();
                if active > 1 {
                    return Ok(true);
                }
                for c in children {
                    if c.has_active_kink(x, v, tol)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Maximum relative deviation between the gradient and central finite
    /// differences with step `h`. Errors when a kink is active at `x`.
    pub fn grad_check(&self, x: &[f64], v: &[f64], h: f64) -> Result<f64> {
        if self.has_active_kink(x, v, TOL_ACTIVE_DEFAULT)? {
            return Err(Error::KinkActive);
        }
        let sd = self.subdiff(x, v)?;
        let g = &sd.polytope.vertices()[0];
        let mut worst: f64 = 0.0;
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let fp = self.eval(&xp, v)?;
            xp[i] = x[i] - h;
            let fm = self.eval(&xp, v)?;
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            let dev = (g[i] - fd).abs() / g[i].abs().max(1.0);
            worst = worst.max(dev);
        }
        Ok(worst)
    }

    /// Largest variable index referenced, plus one (0 when none).
    pub fn var_dim(&self) -> usize {
        self.fold_indices(&|e| match e {
            Expr::Var(i) => Some(*i + 1),
            _ => None,
        })
    }

    /// Largest parameter index referenced, plus one (0 when none).
    pub fn param_dim(&self) -> usize {
        self.fold_indices(&|e| match e {
            Expr::Param(i) => Some(*i + 1),
            _ => None,
        })
    }

    fn fold_indices(&self, pick: &dyn Fn(&Expr) -> Option<usize>) -> usize {
        let own = pick(self).unwrap_or(0);
        let children: &[Expr] = match self {
            Expr::Sum(c) | Expr::Product(c) | Expr::Max(c) | Expr::Min(c) => c,
            Expr::Power(b, _) => std::slice::from_ref(b),
            Expr::Negate(b) | Expr::Abs(b) => std::slice::from_ref(b),
            _ => &[],
        };
        children
            .iter()
            .map(|c| c.fold_indices(pick))
            .fold(own, usize::max)
    }
}

struct SubNode {
    value: f64,
    poly: Polytope,
    exact: bool,
}

impl SubNode {
    fn smooth(value: f64, poly: Polytope) -> Self {
        SubNode {
            value,
            poly,
            exact: true,
        }
    }
}

fn zero_poly(n: usize) -> Polytope {
    Polytope::singleton(vec![0.0; n])
}

fn fold_extremum(
    children: &[Expr],
    x: &[f64],
    v: &[f64],
    op: fn(f64, f64) -> f64,
) -> Result<f64> {
    let mut it = children.iter();
    let first = it.next().expect("extremum arity >= 2").eval(x, v)?;
    it.try_fold(first, |acc, c| Ok(op(acc, c.eval(x, v)?)))
}

/// Hull over active branches of a max (or, with `is_max = false`, of a min,
/// which equals the negated max of the negated children and therefore uses
/// the same hull of the active children's subdifferentials).
fn active_branch_hull(
    children: &[Expr],
    x: &[f64],
    v: &[f64],
    tol: f64,
    is_max: bool,
) -> Result<SubNode> {
    let nodes: Vec<SubNode> = children
        .iter()
        .map(|c| c.subdiff_rec(x, v, tol))
        .collect::<Result<_>>()?;
    let best = nodes
        .iter()
        .map(|nd| nd.value)
        .fold(if is_max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
            if is_max {
                a.max(b)
            } else {
                a.min(b)
            }
        });
    let active: Vec<&SubNode> = nodes
        .iter()
        .filter(|nd| (nd.value - best).abs() <= tol)
        .collect();
    if active.len() == 1 {
        let nd = active[0];
        return Ok(SubNode {
            value: best,
            poly: nd.poly.clone(),
            exact: nd.exact,
        });
    }
    let polys: Vec<Polytope> = active.iter().map(|nd| nd.poly.clone()).collect();
    Ok(SubNode {
        value: best,
        poly: hull_union(&polys)?,
        exact: false,
    })
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    n_vars: usize,
    n_params: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, n_vars: usize, n_params: usize) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            n_vars,
            n_params,
        }
    }

    fn parse(mut self) -> Result<Expr> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(e)
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    terms.push(negate_node(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Product(factors)
        })
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(negate_node(self.factor()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a positive integer exponent"));
            }
            let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
            let k: u32 = digits
                .parse()
                .map_err(|_| self.err("exponent out of range"))?;
            if k == 0 {
                return Err(Error::Parse {
                    pos: start,
                    msg: "exponent must be >= 1".to_string(),
                });
            }
            return Ok(Expr::Power(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, variable, function call, or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.bytes.len() && (self.bytes[self.pos] | 32) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let digits_start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits_start {
                // Not an exponent after all (e.g. "2e" would be malformed);
                // rewind and let the identifier error surface.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            pos: start,
            msg: format!("malformed number '{text}'"),
        })?;
        Ok(Expr::Const(value))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match name {
            "max" | "min" => {
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                if args.len() < 2 {
                    return Err(Error::Parse {
                        pos: start,
                        msg: format!("{name} needs at least two arguments"),
                    });
                }
                Ok(if name == "max" {
                    Expr::Max(args)
                } else {
                    Expr::Min(args)
                })
            }
            "abs" => {
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(Expr::Abs(Box::new(arg)))
            }
            "x" | "v" => {
                let digit_start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if digit_start == self.pos {
                    return Err(Error::Parse {
                        pos: start,
                        msg: format!("expected an index after '{name}'"),
                    });
                }
                let digits = std::str::from_utf8(&self.bytes[digit_start..self.pos]).unwrap();
                let idx: usize = digits.parse().map_err(|_| Error::Parse {
                    pos: digit_start,
                    msg: "index out of range".to_string(),
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        pos: digit_start,
                        msg: "indices are 1-based".to_string(),
                    });
                }
                let (bound, kind) = if name == "x" {
                    (self.n_vars, "variable")
                } else {
                    (self.n_params, "parameter")
                };
                if idx > bound {
                    return Err(Error::Parse {
                        pos: start,
                        msg: format!(
                            "undeclared {kind} {name}{idx} (declared dimension {bound})"
                        ),
                    });
                }
                Ok(if name == "x" {
                    Expr::Var(idx - 1)
                } else {
                    Expr::Param(idx - 1)
                })
            }
            _ => Err(Error::Parse {
                pos: start,
                msg: format!("unknown identifier '{name}'"),
            }),
        }
    }
}

fn negate_node(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Negate(inner) => *inner,
        other => Expr::Negate(Box::new(other)),
    }
}

// ---------------------------------------------------------------------------
// Printing (round-trip stable against the parser)
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Sum(_) => 1,
        Expr::Product(_) => 2,
        Expr::Negate(_) => 3,
        Expr::Const(c) if *c < 0.0 => 3,
        Expr::Power(..) => 4,
        _ => 5,
    }
}

fn fmt_prec(e: &Expr, min_prec: u8, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    if prec(e) < min_prec {
        write!(f, "(")?;
        fmt_node(e, f)?;
        write!(f, ")")
    } else {
        fmt_node(e, f)
    }
}

fn fmt_node(e: &Expr, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    match e {
        Expr::Const(c) => write!(f, "{c}"),
        Expr::Var(i) => write!(f, "x{}", i + 1),
        Expr::Param(i) => write!(f, "v{}", i + 1),
        Expr::Sum(children) => {
            fmt_prec(&children[0], 2, f)?;
            for c in &children[1..] {
                match c {
                    Expr::Const(v) if *v < 0.0 => {
                        write!(f, " - ")?;
                        fmt_prec(&Expr::Const(-v), 2, f)?;
                    }
                    Expr::Negate(inner) => {
                        write!(f, " - ")?;
                        fmt_prec(inner, 2, f)?;
                    }
                    _ => {
                        write!(f, " + ")?;
                        fmt_prec(c, 2, f)?;
                    }
                }
            }
            Ok(())
        }
        Expr::Product(children) => {
            fmt_prec(&children[0], 3, f)?;
            for c in &children[1..] {
                write!(f, " * ")?;
                fmt_prec(c, 3, f)?;
            }
            Ok(())
        }
        Expr::Power(base, k) => {
            fmt_prec(base, 5, f)?;
            write!(f, "^{k}")
        }
        Expr::Negate(inner) => {
            write!(f, "-")?;
            fmt_prec(inner, 4, f)
        }
        Expr::Max(children) | Expr::Min(children) => {
            write!(f, "{}(", if matches!(e, Expr::Max(_)) { "max" } else { "min" })?;
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                fmt_node(c, f)?;
            }
            write!(f, ")")
        }
        Expr::Abs(inner) => {
            write!(f, "abs(")?;
            fmt_node(inner, f)?;
            write!(f, ")")
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt_node(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(text: &str) -> Expr {
        Expr::parse(text, 4, 4).unwrap()
    }

    #[test]
    fn parse_canonical_shapes() {
        assert_eq!(
            p("2*x1 - 1"),
            Expr::Sum(vec![
                Expr::Product(vec![Expr::Const(2.0), Expr::Var(0)]),
                Expr::Const(-1.0),
            ])
        );
        assert_eq!(
            p("max(x1, 0)"),
            Expr::Max(vec![Expr::Var(0), Expr::Const(0.0)])
        );
    }

    #[test]
    fn parse_rejects_undeclared_indices() {
        let err = Expr::parse("x3", 2, 0).unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("undeclared variable x3")),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(Expr::parse("v1", 2, 0).is_err());
        assert!(Expr::parse("x0", 2, 0).is_err());
    }

    #[test]
    fn parse_reports_positions() {
        match Expr::parse("x1 + ", 2, 0).unwrap_err() {
            Error::Parse { pos, .. } => assert_eq!(pos, 5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn eval_examples() {
        let g1 = Expr::parse("-x1 + v1", 2, 1).unwrap();
        assert_eq!(g1.eval(&[0.0, 0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(p("abs(x1)").eval(&[-3.0], &[]).unwrap(), 3.0);
        assert_eq!(p("max(x1, 2*x1)").eval(&[1.0], &[]).unwrap(), 2.0);
        assert_eq!(p("min(x1, 2*x1)").eval(&[1.0], &[]).unwrap(), 1.0);
        assert_eq!(p("x1^3").eval(&[2.0], &[]).unwrap(), 8.0);
    }

    #[test]
    fn eval_dimension_mismatch() {
        assert!(p("x2").eval(&[1.0], &[]).is_err());
    }

    #[test]
    fn subdiff_smooth_gradient() {
        let e = Expr::parse("2*x1 - 1", 2, 0).unwrap();
        let sd = e.subdiff(&[0.0, 0.0], &[]).unwrap();
        assert!(sd.is_exact);
        assert_eq!(sd.polytope.vertices(), &[vec![2.0, 0.0]]);
    }

    #[test]
    fn subdiff_abs_at_kink() {
        let sd = p("abs(x1)").subdiff(&[0.0], &[]).unwrap();
        assert!(!sd.is_exact);
        let mut vs = sd.polytope.vertices().to_vec();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vs, vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn subdiff_max_at_kink() {
        let sd = p("max(x1, 0)").subdiff(&[0.0], &[]).unwrap();
        assert!(!sd.is_exact);
        let mut vs = sd.polytope.vertices().to_vec();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vs, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn subdiff_max_unique_branch_is_exact() {
        let sd = p("max(x1, 0)").subdiff(&[2.0], &[]).unwrap();
        assert!(sd.is_exact);
        assert_eq!(sd.polytope.vertices(), &[vec![1.0]]);
    }

    #[test]
    fn subdiff_min_matches_negated_max_rewrite() {
        // min(a, b) = -max(-a, -b); both forms must produce the same hull.
        let direct = Expr::parse("min(x1, -x1)", 1, 0).unwrap();
        let rewritten = Expr::parse("-max(-x1, x1)", 1, 0).unwrap();
        let a = direct.subdiff(&[0.0], &[]).unwrap();
        let b = rewritten.subdiff(&[0.0], &[]).unwrap();
        let mut va = a.polytope.vertices().to_vec();
        let mut vb = b.polytope.vertices().to_vec();
        va.sort_by(|p, q| p.partial_cmp(q).unwrap());
        vb.sort_by(|p, q| p.partial_cmp(q).unwrap());
        assert_eq!(va, vb);
    }

    #[test]
    fn subdiff_sum_is_minkowski_sum() {
        let e = Expr::parse("abs(x1) + abs(x2)", 2, 0).unwrap();
        let sd = e.subdiff(&[0.0, 0.0], &[]).unwrap();
        assert_eq!(sd.polytope.vertices().len(), 4);
        assert!(!sd.is_exact);
    }

    #[test]
    fn grad_check_examples() {
        let e = p("x1^2");
        let dev = e.grad_check(&[3.0], &[], 1e-5).unwrap();
        assert!(dev < 1e-6, "deviation {dev}");

        let affine = Expr::parse("2*x1 - 1", 1, 0).unwrap();
        let dev = affine.grad_check(&[0.7], &[], 1e-5).unwrap();
        assert!(dev < 1e-10);

        let kinked = p("max(x1, 0)");
        assert!(matches!(
            kinked.grad_check(&[1e-12], &[], 1e-5),
            Err(Error::KinkActive)
        ));
    }

    #[test]
    fn display_round_trips_fixture_strings() {
        for text in [
            "2*x1 - 1",
            "max(x1, 0)",
            "abs(x1) + min(x2, x3, 1)",
            "-x1 + v1",
            "(x1 + 1)^2 * x2 - 3.5",
            "-(x1 + x2)",
            "x1 - -x2",
            "0.5*x1^3 + 1e-3",
        ] {
            let e = p(text);
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed, 4, 4).unwrap();
            assert_eq!(e, reparsed, "round trip failed for '{text}' -> '{printed}'");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..100, 1u32..100).prop_map(|(a, b)| Expr::Const(a as f64 / b as f64)),
            (0usize..3).prop_map(Expr::Var),
            (0usize..2).prop_map(Expr::Param),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 2..4).prop_map(Expr::Sum),
                proptest::collection::vec(inner.clone(), 2..3).prop_map(Expr::Product),
                (inner.clone(), 1u32..4).prop_map(|(e, k)| Expr::Power(Box::new(e), k)),
                inner.clone().prop_map(|e| negate_node(e)),
                proptest::collection::vec(inner.clone(), 2..3).prop_map(Expr::Max),
                proptest::collection::vec(inner.clone(), 2..3).prop_map(Expr::Min),
                inner.prop_map(|e| Expr::Abs(Box::new(e))),
            ]
        })
    }

    // Canonicalize the generated tree the way the parser would: flatten
    // nested sums/products so the round-trip comparison is fair.
    fn canon(e: Expr) -> Expr {
        match e {
            Expr::Sum(children) => {
                let mut out = Vec::new();
                for c in children.into_iter().map(canon) {
                    match c {
                        Expr::Sum(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                Expr::Sum(out)
            }
            Expr::Product(children) => {
                let mut out = Vec::new();
                for c in children.into_iter().map(canon) {
                    match c {
                        Expr::Product(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                Expr::Product(out)
            }
            Expr::Power(b, k) => Expr::Power(Box::new(canon(*b)), k),
            Expr::Negate(b) => negate_node(canon(*b)),
            Expr::Abs(b) => Expr::Abs(Box::new(canon(*b))),
            Expr::Max(c) => Expr::Max(c.into_iter().map(canon).collect()),
            Expr::Min(c) => Expr::Min(c.into_iter().map(canon).collect()),
            other => other,
        }
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let e = canon(e);
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed, 3, 2)
                .unwrap_or_else(|err| panic!("'{printed}' failed to reparse: {err}"));
            prop_assert_eq!(e, reparsed);
        }

        #[test]
        fn smooth_polynomials_match_finite_differences(
            coeffs in proptest::collection::vec(-3.0f64..3.0, 5),
            x in proptest::collection::vec(0.1f64..2.0, 2),
        ) {
            // c0 + c1 x1 + c2 x2 + c3 x1^2 x2 + c4 x1 x2^3
            let e = Expr::Sum(vec![
                Expr::Const(coeffs[0]),
                Expr::Product(vec![Expr::Const(coeffs[1]), Expr::Var(0)]),
                Expr::Product(vec![Expr::Const(coeffs[2]), Expr::Var(1)]),
                Expr::Product(vec![
                    Expr::Const(coeffs[3]),
                    Expr::Power(Box::new(Expr::Var(0)), 2),
                    Expr::Var(1),
                ]),
                Expr::Product(vec![
                    Expr::Const(coeffs[4]),
                    Expr::Var(0),
                    Expr::Power(Box::new(Expr::Var(1)), 3),
                ]),
            ]);
            let dev = e.grad_check(&x, &[], 1e-5).unwrap();
            prop_assert!(dev < 1e-5, "deviation {dev}");
        }

        #[test]
        fn unique_active_max_branch_equals_branch_subdiff(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            x in -2.0f64..2.0,
        ) {
            // max(a*x1, b*x1 + 1) away from the crossing point.
            let e = Expr::Max(vec![
                Expr::Product(vec![Expr::Const(a), Expr::Var(0)]),
                Expr::Sum(vec![
                    Expr::Product(vec![Expr::Const(b), Expr::Var(0)]),
                    Expr::Const(1.0),
                ]),
            ]);
            let va = a * x;
            let vb = b * x + 1.0;
            prop_assume!((va - vb).abs() > 1e-6);
            let sd = e.subdiff(&[x], &[]).unwrap();
            prop_assert!(sd.is_exact);
            let expect = if va > vb { a } else { b };
            prop_assert!((sd.polytope.vertices()[0][0] - expect).abs() < 1e-12);
        }
    }
}
