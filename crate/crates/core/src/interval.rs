//! Closed bounded real intervals and the LU order relations.
//!
//! Endpoint comparisons are exact floating comparisons throughout: the order
//! relations feed logical certificates, and any fuzz belongs to the callers'
//! tolerances, not in here.

use crate::error::{Error, Result};

/// A closed bounded interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Creates an interval, rejecting `lo > hi` (never silently swapping)
    /// and non-finite endpoints.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NonFiniteInterval { lo, hi });
        }
        if lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// The degenerate interval `[a, a]`, which embeds the real `a`.
    pub fn point(a: f64) -> Result<Self> {
        Interval::new(a, a)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `[a.lo + b.lo, a.hi + b.hi]`
    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    /// `[a.lo - b.hi, a.hi - b.lo]`
    pub fn sub(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo - other.hi,
            hi: self.hi - other.lo,
        }
    }

    /// `k >= 0` gives `[k*lo, k*hi]`; `k < 0` gives `[k*hi, k*lo]`.
    pub fn scale(&self, k: f64) -> Interval {
        if k >= 0.0 {
            Interval {
                lo: k * self.lo,
                hi: k * self.hi,
            }
        } else {
            Interval {
                lo: k * self.hi,
                hi: k * self.lo,
            }
        }
    }

    /// `a <=_LU b`: both endpoints componentwise below.
    pub fn leq_lu(&self, other: &Interval) -> bool {
        self.lo <= other.lo && self.hi <= other.hi
    }

    /// `a <_LU b`: `a <=_LU b` and `a != b`.
    pub fn lt_lu(&self, other: &Interval) -> bool {
        self.leq_lu(other) && self != other
    }

    /// `a <^s_LU b`: both endpoints strictly below.
    pub fn lt_s_lu(&self, other: &Interval) -> bool {
        self.lo < other.lo && self.hi < other.hi
    }

    pub fn geq_lu(&self, other: &Interval) -> bool {
        other.leq_lu(self)
    }

    pub fn gt_lu(&self, other: &Interval) -> bool {
        other.lt_lu(self)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// An ordered, nonempty list of intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    items: Vec<Interval>,
}

impl IntervalVector {
    pub fn new(items: Vec<Interval>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::LengthMismatch { left: 0, right: 1 });
        }
        Ok(IntervalVector { items })
    }

    pub fn items(&self) -> &[Interval] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Componentwise `a_i >=_LU b_i` for all i with `a_k >_LU b_k` for at
    /// least one k. Its negation realizes the "not greater" relation used by
    /// the saddle-point conditions.
    pub fn gt_lu(&self, other: &IntervalVector) -> Result<bool> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let mut strict = false;
        for (a, b) in self.items.iter().zip(&other.items) {
            if !a.geq_lu(b) {
                return Ok(false);
            }
            if a.gt_lu(b) {
                strict = true;
            }
        }
        Ok(strict)
    }
}

impl std::fmt::Display for IntervalVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, it) in self.items.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{it}")?;
        }
        write!(f, ")")
    }
}
