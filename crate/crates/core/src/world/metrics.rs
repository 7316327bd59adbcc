use std::collections::BTreeMap;

use super::geom::Vec2;
use super::WorldError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationMetrics<T> {
    pub mean_nearest_neighbor: T,
    pub clusters: usize,
    /// All agents form a single cluster.
    pub flock: bool,
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Mean nearest-neighbour distance and single-linkage cluster count, two
/// agents being linked when they are at most `threshold` apart.
pub fn aggregation<T: Real>(
    positions: &[Vec2<T>],
    threshold: T,
) -> Result<AggregationMetrics<T>, WorldError> {
    let n = positions.len();
    if n < 2 {
        return Err(WorldError::TooFewAgents(n));
    }
    let mut sets = DisjointSets::new(n);
    let mut total = T::zero();
    for i in 0..n {
        let mut nearest: Option<T> = None;
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = positions[i].dist(positions[j]);
            nearest = Some(match nearest {
                Some(m) if m <= d => m,
                _ => d,
            });
            if j > i && d <= threshold {
                sets.union(i, j);
            }
        }
        total = total + nearest.expect("n >= 2");
    }
    let clusters = (0..n).filter(|&i| sets.find(i) == i).count();
    Ok(AggregationMetrics {
        mean_nearest_neighbor: total / T::lit(n as f64),
        clusters,
        flock: clusters == 1,
    })
}

/// The agent pursued most often in `pursuits` (`(follower, target)` pairs),
/// or `None` when nobody was pursued or the top count is shared.
pub fn most_pursued(pursuits: impl IntoIterator<Item = (u32, u32)>) -> Option<u32> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for (follower, target) in pursuits {
        if follower != target {
            *counts.entry(target).or_default() += 1;
        }
    }
    let best = *counts.values().max()?;
    let mut top = counts.iter().filter(|(_, &c)| c == best);
    let (&leader, _) = top.next()?;
    top.next().is_none().then_some(leader)
}
