//! Finite unions of disjoint open intervals on the extended real line.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;

/// Sorted union of pairwise disjoint open intervals.
///
/// Endpoints may be infinite. Intervals that touch or overlap are merged on
/// construction, so consecutive intervals are always separated by a gap of
/// positive length. Open and closed endpoints are not distinguished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct IntervalSet<F: Real = f64> {
    intervals: Vec<(F, F)>,
}

impl<F: Real> Default for IntervalSet<F> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<F: Real> IntervalSet<F> {
    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    /// The whole real line.
    pub fn full() -> Self {
        Self {
            intervals: vec![(F::neg_infinity(), F::infinity())],
        }
    }

    /// Builds a normalized set from arbitrary `(lo, hi)` pairs.
    ///
    /// Pairs with `lo >= hi` are empty and dropped. NaN endpoints are rejected.
    pub fn new(pairs: impl IntoIterator<Item = (F, F)>) -> Result<Self> {
        let mut v: Vec<(F, F)> = Vec::new();
        for (lo, hi) in pairs {
            if lo.is_nan() || hi.is_nan() {
                return Err(invalid("interval endpoint is NaN"));
            }
            if lo < hi {
                v.push((lo, hi));
            }
        }
        Ok(Self::normalized(v))
    }

    /// `(lo, hi)` as a single interval.
    pub fn interval(lo: F, hi: F) -> Result<Self> {
        Self::new([(lo, hi)])
    }

    /// `(c, inf)`
    pub fn above(c: F) -> Self {
        Self::normalized(vec![(c, F::infinity())])
    }

    /// `(-inf, c)`
    pub fn below(c: F) -> Self {
        Self::normalized(vec![(F::neg_infinity(), c)])
    }

    /// `(-inf, -c) U (c, inf)` for `c >= 0`.
    pub fn two_sided(c: F) -> Self {
        let c = c.abs();
        Self::normalized(vec![(F::neg_infinity(), -c), (c, F::infinity())])
    }

    fn normalized(mut v: Vec<(F, F)>) -> Self {
        v.retain(|&(lo, hi)| lo < hi);
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN filtered"));
        let mut out: Vec<(F, F)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match out.last_mut() {
                Some(last) if lo <= last.1 => {
                    if hi > last.1 {
                        last.1 = hi;
                    }
                }
                _ => out.push((lo, hi)),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(F, F)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.intervals.len() == 1
            && self.intervals[0].0 == F::neg_infinity()
            && self.intervals[0].1 == F::infinity()
    }

    pub fn contains(&self, x: F) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < x && x < hi)
    }

    /// Image `{a x + b : x in self}`; intervals flip order when `a < 0`.
    pub fn affine_map(&self, a: F, b: F) -> Result<Self> {
        if a == F::zero() || !a.is_finite() || !b.is_finite() {
            return Err(invalid("affine_map needs finite a != 0 and finite b"));
        }
        let img = self.intervals.iter().map(|&(lo, hi)| {
            let (u, v) = (a * lo + b, a * hi + b);
            if a > F::zero() {
                (u, v)
            } else {
                (v, u)
            }
        });
        Ok(Self::normalized(img.collect()))
    }

    /// Reflection `{-x : x in self}`.
    pub fn negate(&self) -> Self {
        self.affine_map(-F::one(), F::zero())
            .expect("reflection is always a valid affine map")
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a0, a1) = self.intervals[i];
            let (b0, b1) = other.intervals[j];
            let lo = if a0 > b0 { a0 } else { b0 };
            let hi = if a1 < b1 { a1 } else { b1 };
            if lo < hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalized(out)
    }

    /// Part of the set strictly above zero.
    pub fn positive_part(&self) -> Self {
        self.intersect(&Self::above(F::zero()))
    }

    /// Smallest lower endpoint and largest upper endpoint, if non-empty.
    pub fn hull(&self) -> Option<(F, F)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }
}
