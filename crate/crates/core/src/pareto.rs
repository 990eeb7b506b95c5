//! Cost/accuracy Pareto frontier computation.

use crate::gateway::Usd;
use serde::{Deserialize, Serialize};

/// One labeled (cost, accuracy) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub cost: Usd,
    pub accuracy: f64,
    /// Some other point has cost <= and accuracy >= this one, with at least
    /// one strict.
    pub dominated: bool,
}

impl ParetoPoint {
    pub fn new(label: impl Into<String>, cost: Usd, accuracy: f64) -> ParetoPoint {
        ParetoPoint {
            label: label.into(),
            cost,
            accuracy,
            dominated: false,
        }
    }
}

fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    a.cost <= b.cost && a.accuracy >= b.accuracy && (a.cost < b.cost || a.accuracy > b.accuracy)
}

/// Mark dominated points and return all points sorted by cost ascending
/// (accuracy descending, then label, within equal cost).
///
/// Implemented as a sort plus a single max-accuracy sweep rather than the
/// quadratic definition, which the tests cross-check.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<ParetoPoint> = points.to_vec();
    sorted.sort_by(|a, b| {
        a.cost
            .cmp(&b.cost)
            .then_with(|| {
                b.accuracy
                    .partial_cmp(&a.accuracy)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.label.cmp(&b.label))
    });

    // Walk cost groups in order; a point is non-dominated iff its accuracy
    // strictly exceeds the best accuracy of every cheaper point, or equals it
    // while no strictly-cheaper-or-better point beats it. Duplicate
    // (cost, accuracy) points do not dominate one another.
    let mut best_before = f64::NEG_INFINITY; // best accuracy at strictly lower cost
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].cost == sorted[i].cost {
            j += 1;
        }
        let group_best = sorted[i].accuracy; // group is accuracy-descending
        for p in &mut sorted[i..j] {
            let beaten_by_cheaper = p.accuracy <= best_before;
            let beaten_in_group = p.accuracy < group_best;
            p.dominated = beaten_by_cheaper || beaten_in_group;
        }
        best_before = best_before.max(group_best);
        i = j;
    }
    sorted
}

/// Quadratic dominance check, straight from the definition. Exposed so the
/// sweep implementation can be verified against it.
pub fn pareto_frontier_bruteforce(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut out: Vec<ParetoPoint> = points.to_vec();
    for p in &mut out {
        p.dominated = points.iter().any(|q| dominates(q, p));
    }
    out.sort_by(|a, b| {
        a.cost
            .cmp(&b.cost)
            .then_with(|| {
                b.accuracy
                    .partial_cmp(&a.accuracy)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.label.cmp(&b.label))
    });
    out
}
