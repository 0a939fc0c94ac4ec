//! Closed intervals on the extended real line, finite unions of them, and the
//! quadratic-inequality kernel every selection event is reduced to.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Gaps narrower than this between consecutive parts are closed on normalisation.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Relative slack allowed when the inequality is checked at the expansion point.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

const DEGENERATE_COEFFICIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(alloc::format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(z: f64) -> Self {
        Interval { lo: z, hi: z }
    }

    #[inline]
    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Intersection with another interval that is known to overlap this one.
    #[inline]
    pub fn tighten(&mut self, other: Interval) {
        if other.lo > self.lo {
            self.lo = other.lo;
        }
        if other.hi < self.hi {
            self.hi = other.hi;
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Ordered union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    pub fn single(interval: Interval) -> Self {
        IntervalSet { parts: alloc::vec![interval] }
    }

    /// Sorts the parts and merges those that overlap or nearly touch.
    pub fn from_parts(mut parts: Vec<Interval>) -> Self {
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for p in parts {
            match merged.last_mut() {
                Some(last) if p.lo - last.hi < MERGE_TOLERANCE || p.lo <= last.hi => {
                    if p.hi > last.hi {
                        last.hi = p.hi;
                    }
                }
                _ => merged.push(p),
            }
        }
        IntervalSet { parts: merged }
    }

    pub fn normalized(&self) -> Self {
        IntervalSet::from_parts(self.parts.clone())
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn contains(&self, z: f64) -> bool {
        // parts are sorted, so a binary search on lo finds the candidate
        let idx = self.parts.partition_point(|p| p.lo <= z);
        idx > 0 && self.parts[idx - 1].contains(z)
    }

    /// Distance from `z` to the nearest part, zero when contained.
    pub fn distance(&self, z: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| {
                if p.contains(z) {
                    0.0
                } else if z < p.lo {
                    p.lo - z
                } else {
                    z - p.hi
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn intersect_interval(&self, window: &Interval) -> IntervalSet {
        IntervalSet { parts: self.parts.iter().filter_map(|p| p.intersect(window)).collect() }
    }

    pub fn is_subset_of(&self, other: &IntervalSet) -> bool {
        self.parts.iter().all(|p| {
            other.parts.iter().any(|q| q.lo <= p.lo + MERGE_TOLERANCE && p.hi <= q.hi + MERGE_TOLERANCE)
        })
    }
}

/// Largest interval containing `z` on which `alpha r² + beta r + gamma <= 0`.
///
/// The inequality must hold at `z`, up to `FEASIBILITY_TOLERANCE` relative to
/// the magnitude of the terms at `z`; when it is violated within tolerance,
/// `z` is treated as lying on the boundary.
pub fn solve_quadratic_inequality(alpha: f64, beta: f64, gamma: f64, z: f64) -> Result<Interval> {
    if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "non-finite quadratic ({alpha}, {beta}, {gamma}) at {z}"
        )));
    }
    let value = (alpha * z + beta) * z + gamma;
    let magnitude = 1f64
        .max(math::abs(gamma))
        .max(math::abs(beta * z))
        .max(math::abs(alpha * z * z));
    let tolerance = FEASIBILITY_TOLERANCE * magnitude;
    if value > tolerance {
        return Err(Error::InfeasibleAtPoint { value, tolerance });
    }

    let linear_scale = 1f64.max(math::abs(beta)).max(math::abs(gamma));
    if math::abs(alpha) <= DEGENERATE_COEFFICIENT * linear_scale {
        if math::abs(beta) <= DEGENERATE_COEFFICIENT * 1f64.max(math::abs(gamma)) {
            return Ok(Interval::REAL_LINE);
        }
        let root = -gamma / beta;
        return Ok(if beta > 0.0 {
            Interval { lo: f64::NEG_INFINITY, hi: root.max(z) }
        } else {
            Interval { lo: root.min(z), hi: f64::INFINITY }
        });
    }

    let disc = beta * beta - 4.0 * alpha * gamma;
    if alpha > 0.0 {
        if disc <= 0.0 {
            // only a tangency point can be feasible, and z is it
            return Ok(Interval::point(z));
        }
        let (r1, r2) = roots(alpha, beta, gamma, disc);
        Ok(Interval { lo: r1.min(z), hi: r2.max(z) })
    } else {
        if disc <= 0.0 {
            return Ok(Interval::REAL_LINE);
        }
        let (r1, r2) = roots(alpha, beta, gamma, disc);
        if z <= 0.5 * (r1 + r2) {
            Ok(Interval { lo: f64::NEG_INFINITY, hi: r1.max(z) })
        } else {
            Ok(Interval { lo: r2.min(z), hi: f64::INFINITY })
        }
    }
}

// Ordered roots of a quadratic with positive discriminant, avoiding cancellation.
fn roots(alpha: f64, beta: f64, gamma: f64, disc: f64) -> (f64, f64) {
    let s = math::sqrt(disc);
    let q = if beta >= 0.0 { -0.5 * (beta + s) } else { -0.5 * (beta - s) };
    let a = q / alpha;
    // q == 0 only when beta == 0 and gamma == 0, which has disc == 0
    let b = gamma / q;
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
