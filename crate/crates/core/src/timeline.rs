//! Per-node GPU occupancy over continuous time, and the capacity sweep used
//! to certify plans and simulated traces.

use alloc::vec::Vec;

use crate::TIME_EPS;

/// Busy intervals on one node.
#[derive(Debug, Clone)]
pub struct Occupancy {
    capacity: u32,
    intervals: Vec<(f64, f64, u32)>,
}

impl Occupancy {
    pub fn new(capacity: u32) -> Self {
        Occupancy {
            capacity,
            intervals: Vec::new(),
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn add(&mut self, start: f64, end: f64, gpus: u32) {
        if end > start {
            self.intervals.push((start, end, gpus));
        }
    }

    /// Peak usage over `[start, end)`.
    pub fn peak(&self, start: f64, end: f64) -> u32 {
        // Usage is piecewise constant; it peaks at `start` or at some interval start inside.
        let usage_at = |t: f64| -> u32 {
            self.intervals
                .iter()
                .filter(|&&(s, e, _)| s <= t + TIME_EPS && e > t + TIME_EPS)
                .map(|&(_, _, g)| g)
                .sum()
        };
        let mut peak = usage_at(start);
        for &(s, _, _) in &self.intervals {
            if s > start && s < end - TIME_EPS {
                peak = peak.max(usage_at(s));
            }
        }
        peak
    }

    /// Earliest `t >= ready` with `gpus` free over `[t, t + duration)`.
    pub fn earliest_fit(&self, gpus: u32, duration: f64, ready: f64) -> Option<f64> {
        if gpus > self.capacity {
            return None;
        }
        let mut candidates: Vec<f64> = Vec::with_capacity(self.intervals.len() + 1);
        candidates.push(ready);
        candidates.extend(self.intervals.iter().map(|&(_, e, _)| e).filter(|&e| e > ready));
        candidates.sort_by(f64::total_cmp);
        candidates
            .into_iter()
            .find(|&t| self.peak(t, t + duration) + gpus <= self.capacity)
    }
}

/// A `(node, start, end, gpus)` busy interval.
pub type Usage = (usize, f64, f64, u32);

/// First `(node, time)` at which usage exceeds capacity, if any. Intervals
/// are half-open, so a job may start the instant another ends.
pub fn capacity_violation(capacities: &[u32], usages: impl IntoIterator<Item = Usage>) -> Option<(usize, f64)> {
    // (node, time, delta) with releases ordered before acquisitions at equal times.
    let mut events: Vec<(usize, f64, i64)> = Vec::new();
    for (node, start, end, gpus) in usages {
        if end - start <= TIME_EPS {
            continue;
        }
        events.push((node, start, gpus as i64));
        events.push((node, end - TIME_EPS, -(gpus as i64)));
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut current = 0i64;
    let mut node = usize::MAX;
    for (n, t, d) in events {
        if n != node {
            node = n;
            current = 0;
        }
        current += d;
        if current > capacities.get(n).copied().unwrap_or(0) as i64 {
            return Some((n, t));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earliest_fit_waits_for_release() {
        let mut occ = Occupancy::new(4);
        occ.add(0.0, 10.0, 3);
        occ.add(5.0, 20.0, 1);
        assert_eq!(occ.earliest_fit(1, 3.0, 0.0), Some(0.0));
        // [0,5) has 3 busy, [5,10) has 4 busy
        assert_eq!(occ.earliest_fit(1, 6.0, 0.0), Some(10.0));
        assert_eq!(occ.earliest_fit(3, 1.0, 0.0), Some(10.0));
        assert_eq!(occ.earliest_fit(4, 1.0, 0.0), Some(20.0));
        assert_eq!(occ.earliest_fit(5, 1.0, 0.0), None);
    }

    #[test]
    fn back_to_back_is_not_a_violation() {
        assert_eq!(capacity_violation(&[2], [(0, 0.0, 10.0, 2), (0, 10.0, 12.0, 2)]), None);
        assert!(capacity_violation(&[2], [(0, 0.0, 10.0, 2), (0, 9.0, 12.0, 1)]).is_some());
        assert_eq!(
            capacity_violation(&[2, 2], [(0, 0.0, 10.0, 2), (1, 0.0, 10.0, 2)]),
            None
        );
    }
}
