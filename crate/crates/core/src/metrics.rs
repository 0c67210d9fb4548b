//! Per-second swarm observables.

use crate::geom::Point;

/// One row of the per-second series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsRecord {
    /// Whole seconds since the start of the run.
    pub t: u32,
    pub mean_cue: f64,
    pub ratio_within_rc: f64,
    /// Mean pairwise distance, metres.
    pub coherency_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub records: Vec<MetricsRecord>,
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    /// Record at whole second `t`, if present.
    pub fn at(&self, t: u32) -> Option<&MetricsRecord> {
        let first = self.records.first()?.t;
        let idx = t.checked_sub(first)? as usize;
        self.records.get(idx).filter(|r| r.t == t)
    }

    pub fn mean_cue(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_cue).collect()
    }

    pub fn ratio_within_rc(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ratio_within_rc).collect()
    }

    pub fn coherency_m(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.coherency_m).collect()
    }
}

/// Fraction of robots whose centre lies in the closed disc of radius `r_c`
/// around `center`. An empty swarm reports 0.
pub fn ratio_within(positions: &[Point], center: Point, r_c: f64) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let r2 = r_c * r_c;
    let inside = positions
        .iter()
        .filter(|p| p.distance_sq(center) <= r2)
        .count();
    inside as f64 / positions.len() as f64
}

/// Mean distance over all unordered robot pairs, converted from cm to m.
/// Fewer than two robots report 0.
pub fn coherency(positions: &[Point]) -> f64 {
    let n = positions.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            sum += a.distance(*b);
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    sum / pairs / 100.0
}
