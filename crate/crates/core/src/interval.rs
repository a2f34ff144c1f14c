//! Finite unions of half-open subintervals of `[0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Sorted, disjoint, non-adjacent list of `[a, b)` with `0 <= a < b <= 1`.
///
/// A right endpoint equal to `1` means the set accumulates at the boundary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The whole radius range `[0, 1)`.
    pub fn full() -> Self {
        Self { intervals: vec![(0.0, 1.0)] }
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::from_intervals(vec![(a, b)])
    }

    /// Builds a set from arbitrary (possibly overlapping, unsorted) pieces.
    /// Empty pieces are dropped.
    pub fn from_intervals(pieces: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &pieces {
            if !(a.is_finite() && b.is_finite()) || a < 0.0 || b > 1.0 {
                return domain(format!("interval [{a}, {b}) not inside [0, 1]"));
            }
        }
        let mut pieces: Vec<(f64, f64)> = pieces.into_iter().filter(|(a, b)| a < b).collect();
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (a, b) in pieces {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Ok(Self { intervals: out })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::from_intervals(all).expect("union of valid sets")
    }

    /// Complement inside `[0, 1)`.
    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for &(a, b) in &self.intervals {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < 1.0 {
            out.push((cursor, 1.0));
        }
        Self { intervals: out }
    }

    pub fn intersect_interval(&self, lo: f64, hi: f64) -> Self {
        let intervals = self
            .intervals
            .iter()
            .filter_map(|&(a, b)| {
                let (a, b) = (a.max(lo), b.min(hi));
                (a < b).then_some((a, b))
            })
            .collect();
        Self { intervals }
    }

    pub fn contains(&self, r: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= r && r < b)
    }

    /// True when the closure of the set contains `1`.
    pub fn touches_boundary(&self) -> bool {
        self.intervals.last().is_some_and(|&(_, b)| b >= 1.0)
    }

    /// Supremum of the set, `0` when empty.
    pub fn sup(&self) -> f64 {
        self.intervals.last().map_or(0.0, |&(_, b)| b)
    }

    /// Lebesgue length.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}
