//! Independent reference implementations the library is checked against.

#![allow(dead_code)]

use asim::fsm::feeding::*;

/// Tie set computed directly from integer scores: every index whose score is
/// within `tol` of the maximum.
pub fn tie_set(scores: &[i64], tol: i64) -> Vec<usize> {
    let best = *scores.iter().max().expect("non-empty");
    (0..scores.len())
        .filter(|&i| best - scores[i] <= tol)
        .collect()
}

/// Folds an outcome history into (positive, negative) weights with the
/// averaging rule on success and halving plus averaging on failure.
pub fn fold_outcomes(outcomes: &[bool]) -> (f64, f64) {
    outcomes.iter().fold((0.0, 0.0), |(p, n), &ok| {
        if ok {
            ((p + 1.0) / 2.0, n)
        } else {
            (p / 2.0, (n + 1.0) / 2.0)
        }
    })
}

/// Cluster count by repeated flood fill over the all-pairs distance graph.
pub fn brute_clusters(points: &[(f64, f64)], threshold: f64) -> usize {
    let n = points.len();
    let mut label = vec![usize::MAX; n];
    let mut clusters = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = clusters;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let d = ((points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2))
                    .sqrt();
                if label[j] == usize::MAX && d <= threshold {
                    label[j] = clusters;
                    stack.push(j);
                }
            }
        }
        clusters += 1;
    }
    clusters
}

/// Flat transition table for the feeding chart when the weight table
/// prefers the IR signal. State is (leaf, paths tried in this cycle).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatFeeding {
    pub leaf: &'static str,
    pub tried_signal: bool,
    pub tried_track: bool,
}

impl Default for FlatFeeding {
    fn default() -> Self {
        Self {
            leaf: INITIAL,
            tried_signal: false,
            tried_track: false,
        }
    }
}

impl FlatFeeding {
    /// Applies one event; returns whether `power_lower` was emitted.
    pub fn step(&mut self, event: &str) -> bool {
        match (self.leaf, event) {
            (INITIAL, POWER_LOW) => self.leaf = LOCATE_FOOD,
            (LOCATE_FOOD, SIGNAL_FOUND | TRACK_FOUND) => {
                self.leaf = FOLLOW_IR;
                self.tried_signal = true;
                self.tried_track = false;
            }
            (FOLLOW_IR, SIGNAL_LOST) if !self.tried_track => {
                self.leaf = FOLLOW_TRACK;
                self.tried_track = true;
            }
            (FOLLOW_TRACK, TRACK_LOST) if !self.tried_signal => {
                self.leaf = FOLLOW_IR;
                self.tried_signal = true;
            }
            (FOLLOW_IR, SIGNAL_LOST) | (FOLLOW_TRACK, TRACK_LOST) => {
                self.leaf = LOCATE_FOOD;
                return true;
            }
            (FOLLOW_IR | FOLLOW_TRACK, ENGAGE) => self.leaf = RECHARGE,
            (RECHARGE, WAIT_TIMER_EXPIRED) => self.leaf = FINAL,
            _ => {}
        }
        false
    }

    pub fn path(&self) -> Vec<&'static str> {
        match self.leaf {
            FOLLOW_IR | FOLLOW_TRACK => vec!["root", FIND_CHARGING_STATION, self.leaf],
            leaf => vec!["root", leaf],
        }
    }
}
