//! Weighted consequential choice between feeding paths.
//!
//! Every path carries a positive and a negative weight in `[0, 1]`. A success
//! averages the positive weight with one; a failure halves the positive weight
//! and averages the negative weight with one. The net score of a path is
//! `positive - negative`.
//!
//! [`WeightTable::choose`] picks the best-scoring path. Paths whose score lies
//! within the table tolerance of the best form a tie set that is resolved
//! uniformly at random; a table whose weights are all zero is resolved
//! uniformly at random over every path. Randomness is consumed only in those
//! two branches.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecisionError {
    #[error("decision requested from an empty weight table")]
    Empty,
    #[error("duplicate path id `{0}`")]
    DuplicatePath(PathId),
    #[error("unknown path `{0}`")]
    UnknownPath(PathId),
    #[error("path `{0}` has no hops")]
    NoHops(PathId),
    #[error("weight {value} for path `{path}` outside [0, 1]")]
    WeightOutOfRange { path: PathId, value: String },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(String);

impl PathId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PathId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// A route to a goal through ordered waypoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoicePath {
    pub id: PathId,
    pub hops: Vec<String>,
    pub goal: String,
}

impl ChoicePath {
    pub fn new(
        id: impl Into<String>,
        hops: impl IntoIterator<Item = impl Into<String>>,
        goal: impl Into<String>,
    ) -> Self {
        Self {
            id: PathId::new(id),
            hops: hops.into_iter().map(Into::into).collect(),
            goal: goal.into(),
        }
    }

    /// The two feeding paths: follow the IR signal or follow the track.
    pub fn feeding_pair() -> Vec<ChoicePath> {
        vec![
            ChoicePath::new("signal", ["x1", "x2"], "z0"),
            ChoicePath::new("track", ["y1", "y2"], "z0"),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEntry<S> {
    pub positive: S,
    pub negative: S,
    pub successes: u64,
    pub failures: u64,
}

impl<S: Scalar> WeightEntry<S> {
    pub fn zero() -> Self {
        Self {
            positive: S::zero(),
            negative: S::zero(),
            successes: 0,
            failures: 0,
        }
    }

    pub fn score(&self) -> S {
        self.positive - self.negative
    }

    pub fn is_zero(&self) -> bool {
        self.positive == S::zero() && self.negative == S::zero()
    }
}

/// Outcome of one decision, kept for post-hoc analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace<S> {
    pub chosen: PathId,
    /// Net scores in table order.
    pub scores: Vec<(PathId, S)>,
    pub tie_broken: bool,
    pub rng_draws: u32,
}

impl<S: Scalar> DecisionTrace<S> {
    pub fn score_of(&self, path: &str) -> Option<S> {
        self.scores
            .iter()
            .find(|(id, _)| id.as_str() == path)
            .map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable<S> {
    entries: Vec<(PathId, WeightEntry<S>)>,
    tolerance: S,
}

impl<S: Scalar> WeightTable<S> {
    pub fn default_tolerance() -> S {
        S::lit(0.1)
    }

    /// Zeroed table over `paths`, in the given order.
    pub fn init(paths: &[ChoicePath], tolerance: S) -> Result<Self, DecisionError> {
        if paths.is_empty() {
            return Err(DecisionError::Empty);
        }
        if !(tolerance > S::zero()) {
            return Err(DecisionError::InvalidTolerance(tolerance.to_string()));
        }
        let mut entries: Vec<(PathId, WeightEntry<S>)> = Vec::with_capacity(paths.len());
        for p in paths {
            if p.hops.is_empty() {
                return Err(DecisionError::NoHops(p.id.clone()));
            }
            if entries.iter().any(|(id, _)| *id == p.id) {
                return Err(DecisionError::DuplicatePath(p.id.clone()));
            }
            entries.push((p.id.clone(), WeightEntry::zero()));
        }
        Ok(Self { entries, tolerance })
    }

    pub fn tolerance(&self) -> S {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PathId, &WeightEntry<S>)> {
        self.entries.iter().map(|(id, e)| (id, e))
    }

    pub fn path_ids(&self) -> impl Iterator<Item = &PathId> {
        self.entries.iter().map(|(id, _)| id)
    }

    pub fn entry(&self, path: &str) -> Option<&WeightEntry<S>> {
        self.entries
            .iter()
            .find(|(id, _)| id.as_str() == path)
            .map(|(_, e)| e)
    }

    fn entry_mut(&mut self, path: &str) -> Result<&mut WeightEntry<S>, DecisionError> {
        self.entries
            .iter_mut()
            .find(|(id, _)| id.as_str() == path)
            .map(|(_, e)| e)
            .ok_or_else(|| DecisionError::UnknownPath(PathId::new(path)))
    }

    /// Overwrites both weight channels of a path, keeping its counters.
    pub fn set_weights(
        &mut self,
        path: &str,
        positive: S,
        negative: S,
    ) -> Result<(), DecisionError> {
        for value in [positive, negative] {
            if value < S::zero() || value > S::one() {
                return Err(DecisionError::WeightOutOfRange {
                    path: PathId::new(path),
                    value: value.to_string(),
                });
            }
        }
        let e = self.entry_mut(path)?;
        e.positive = positive;
        e.negative = negative;
        Ok(())
    }

    pub fn scores(&self) -> Vec<(PathId, S)> {
        self.entries
            .iter()
            .map(|(id, e)| (id.clone(), e.score()))
            .collect()
    }

    fn all_zero(&self) -> bool {
        self.entries.iter().all(|(_, e)| e.is_zero())
    }

    /// Paths whose score is within tolerance of the best score (closed boundary),
    /// or every path when all weights are zero.
    pub fn tie_set(&self) -> Result<Vec<PathId>, DecisionError> {
        if self.entries.is_empty() {
            return Err(DecisionError::Empty);
        }
        if self.all_zero() {
            return Ok(self.path_ids().cloned().collect());
        }
        let best = self
            .entries
            .iter()
            .map(|(_, e)| e.score())
            .fold(None, |acc: Option<S>, s| {
                Some(acc.map_or(s, |a| a.max_of(s)))
            })
            .expect("non-empty");
        let margin = self.tolerance + S::comparison_slack();
        Ok(self
            .entries
            .iter()
            .filter(|(_, e)| best - e.score() <= margin)
            .map(|(id, _)| id.clone())
            .collect())
    }

    /// Path ids by descending score; equal scores keep table order.
    pub fn ranked(&self) -> Vec<PathId> {
        let mut order: Vec<_> = self.entries.iter().collect();
        order.sort_by(|a, b| {
            b.1.score()
                .partial_cmp(&a.1.score())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order.into_iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DecisionTrace<S>, DecisionError> {
        self.choose_preferring(rng, None)
    }

    /// Like [`choose`](Self::choose), but a tie that contains `prefer` is
    /// resolved in its favour without consuming randomness.
    pub fn choose_preferring<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        prefer: Option<&PathId>,
    ) -> Result<DecisionTrace<S>, DecisionError> {
        let ties = self.tie_set()?;
        let scores = self.scores();
        let forced_random = self.all_zero();
        if ties.len() == 1 && !forced_random {
            return Ok(DecisionTrace {
                chosen: ties[0].clone(),
                scores,
                tie_broken: false,
                rng_draws: 0,
            });
        }
        if let Some(p) = prefer.filter(|p| ties.contains(p)) {
            return Ok(DecisionTrace {
                chosen: p.clone(),
                scores,
                tie_broken: true,
                rng_draws: 0,
            });
        }
        let pick = rng.random_range(0..ties.len());
        Ok(DecisionTrace {
            chosen: ties[pick].clone(),
            scores,
            tie_broken: true,
            rng_draws: 1,
        })
    }

    /// `positive' = (positive + 1) / 2`.
    pub fn record_success(&mut self, path: &str) -> Result<(), DecisionError> {
        let e = self.entry_mut(path)?;
        e.positive = (e.positive + S::one()).half();
        e.successes += 1;
        Ok(())
    }

    /// `positive' = positive / 2`, `negative' = (negative + 1) / 2`.
    pub fn record_failure(&mut self, path: &str) -> Result<(), DecisionError> {
        let e = self.entry_mut(path)?;
        e.positive = e.positive.half();
        e.negative = (e.negative + S::one()).half();
        e.failures += 1;
        Ok(())
    }
}
