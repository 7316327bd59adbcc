//! Energy store, metabolic bookkeeping and threshold events.
//!
//! An agent's charge drains every tick by a base amount plus the cost of the
//! action it took, and is replenished only at a charging station. Crossing the
//! low and critical thresholds downward raises [`VitalEventKind::PowerLow`] and
//! [`VitalEventKind::PowerCritical`]; reaching zero raises
//! [`VitalEventKind::Died`] once, after which the store rejects every further
//! operation. Upward crossings are silent.
//!
//! The amplifier gain of the agent falls with its charge following a
//! piecewise-linear [`GainCurve`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;

/// The action every store accepts without a configured cost.
pub const IDLE: &str = "idle";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VitalityError {
    #[error("unknown action kind `{0}`")]
    UnknownAction(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid energy configuration: {0}")]
    Config(String),
    #[error("operation rejected: agent is dead")]
    Dead,
}

/// Piecewise-linear map from charge fraction to gain through `(0, 0)`,
/// `(knee_charge, knee_gain)` and `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCurve<S> {
    knee_charge: S,
    knee_gain: S,
}

impl<S: Scalar> GainCurve<S> {
    pub fn linear() -> Self {
        Self {
            knee_charge: S::lit(0.5),
            knee_gain: S::lit(0.5),
        }
    }

    pub fn with_knee(knee_charge: S, knee_gain: S) -> Result<Self, VitalityError> {
        if !(knee_charge > S::zero() && knee_charge < S::one()) {
            return Err(VitalityError::Config(format!(
                "gain knee charge must lie in (0, 1), got {knee_charge}"
            )));
        }
        if !(knee_gain >= S::zero() && knee_gain <= S::one()) {
            return Err(VitalityError::Config(format!(
                "gain knee value must lie in [0, 1], got {knee_gain}"
            )));
        }
        Ok(Self {
            knee_charge,
            knee_gain,
        })
    }

    pub fn knee(&self) -> (S, S) {
        (self.knee_charge, self.knee_gain)
    }

    /// Gain at a charge fraction; the fraction is clamped to `[0, 1]`.
    pub fn eval(&self, fraction: S) -> S {
        let f = fraction.clamp_to(S::zero(), S::one());
        // Each segment is clamped to its range so rounding cannot cross the knee.
        if f <= self.knee_charge {
            (self.knee_gain * f / self.knee_charge).clamp_to(S::zero(), self.knee_gain)
        } else {
            let rise = S::one() - self.knee_gain;
            let run = S::one() - self.knee_charge;
            (S::one() - rise * (S::one() - f) / run).clamp_to(self.knee_gain, S::one())
        }
    }
}

/// Static energy parameters, shared between snapshots of the same store.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams<S> {
    pub capacity: S,
    pub base_drain: S,
    pub action_costs: BTreeMap<String, S>,
    /// Fraction of capacity.
    pub low_threshold: S,
    /// Fraction of capacity, below `low_threshold`.
    pub critical_threshold: S,
    pub gain_curve: GainCurve<S>,
}

impl<S: Scalar> EnergyParams<S> {
    pub fn new(capacity: S, base_drain: S) -> Self {
        Self {
            capacity,
            base_drain,
            action_costs: BTreeMap::new(),
            low_threshold: S::lit(0.3),
            critical_threshold: S::lit(0.1),
            gain_curve: GainCurve::linear(),
        }
    }

    pub fn with_cost(mut self, action: &str, cost: S) -> Self {
        self.action_costs.insert(action.to_owned(), cost);
        self
    }

    pub fn with_thresholds(mut self, low: S, critical: S) -> Self {
        self.low_threshold = low;
        self.critical_threshold = critical;
        self
    }

    pub fn with_gain_curve(mut self, curve: GainCurve<S>) -> Self {
        self.gain_curve = curve;
        self
    }

    pub fn validate(&self) -> Result<(), VitalityError> {
        if !(self.capacity > S::zero()) || !self.capacity.is_finite_value() {
            return Err(VitalityError::Config(format!(
                "capacity must be positive, got {}",
                self.capacity
            )));
        }
        // A zero base drain is accepted so the identity case is expressible.
        if self.base_drain < S::zero() {
            return Err(VitalityError::Config(format!(
                "base drain must be non-negative, got {}",
                self.base_drain
            )));
        }
        if let Some((name, cost)) = self.action_costs.iter().find(|(_, c)| **c < S::zero()) {
            return Err(VitalityError::Config(format!(
                "cost of action `{name}` must be non-negative, got {cost}"
            )));
        }
        let (low, crit) = (self.low_threshold, self.critical_threshold);
        if !(crit > S::zero() && crit < low && low < S::one()) {
            return Err(VitalityError::Config(format!(
                "thresholds must satisfy 0 < critical < low < 1, got critical={crit} low={low}"
            )));
        }
        Ok(())
    }

    fn cost_of(&self, action: &str) -> Result<S, VitalityError> {
        match self.action_costs.get(action) {
            Some(c) => Ok(*c),
            None if action == IDLE => Ok(S::zero()),
            None => Err(VitalityError::UnknownAction(action.to_owned())),
        }
    }

    pub fn low_level(&self) -> S {
        self.low_threshold * self.capacity
    }

    pub fn critical_level(&self) -> S {
        self.critical_threshold * self.capacity
    }
}

/// Lifetime counters. Every field only ever grows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetabolicLedger<S> {
    /// Energy actually removed.
    pub total_drained: S,
    /// Energy actually added.
    pub total_recharged: S,
    /// Requested drain that the zero floor swallowed.
    pub drain_clamped: S,
    /// Offered charge that the capacity ceiling refused.
    pub recharge_clamped: S,
    /// Percepts absorbed from the environment.
    pub info_inflow: u64,
    pub ticks_alive: u64,
}

impl<S: Scalar> Default for MetabolicLedger<S> {
    fn default() -> Self {
        Self {
            total_drained: S::zero(),
            total_recharged: S::zero(),
            drain_clamped: S::zero(),
            recharge_clamped: S::zero(),
            info_inflow: 0,
            ticks_alive: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStore<S> {
    params: Arc<EnergyParams<S>>,
    charge: S,
    ledger: MetabolicLedger<S>,
    dead: bool,
}

impl<S: Scalar> EnergyStore<S> {
    pub fn new(params: Arc<EnergyParams<S>>, charge: S) -> Result<Self, VitalityError> {
        params.validate()?;
        if charge < S::zero() || charge > params.capacity {
            return Err(VitalityError::InvalidArgument(format!(
                "initial charge {charge} outside [0, {}]",
                params.capacity
            )));
        }
        Ok(Self {
            params,
            charge,
            ledger: MetabolicLedger::default(),
            dead: charge == S::zero(),
        })
    }

    pub fn full(params: Arc<EnergyParams<S>>) -> Result<Self, VitalityError> {
        let capacity = params.capacity;
        Self::new(params, capacity)
    }

    pub fn params(&self) -> &Arc<EnergyParams<S>> {
        &self.params
    }

    pub fn charge(&self) -> S {
        self.charge
    }

    pub fn capacity(&self) -> S {
        self.params.capacity
    }

    pub fn fraction(&self) -> S {
        self.charge / self.params.capacity
    }

    pub fn ledger(&self) -> &MetabolicLedger<S> {
        &self.ledger
    }

    pub fn is_dead(&self) -> bool {
        self.dead
    }

    pub fn is_low(&self) -> bool {
        self.charge < self.params.low_level()
    }

    pub fn is_critical(&self) -> bool {
        self.charge < self.params.critical_level()
    }

    /// Spends one tick: `charge' = max(0, charge - base_drain - cost(action))`.
    pub fn drain(&mut self, action: &str) -> Result<(), VitalityError> {
        if self.dead {
            return Err(VitalityError::Dead);
        }
        let requested = self.params.base_drain + self.params.cost_of(action)?;
        let taken = requested.min_of(self.charge);
        self.charge = if requested >= self.charge {
            S::zero()
        } else {
            self.charge - requested
        };
        self.ledger.total_drained = self.ledger.total_drained + taken;
        self.ledger.drain_clamped = self.ledger.drain_clamped + (requested - taken);
        self.ledger.ticks_alive += 1;
        if self.charge == S::zero() {
            self.dead = true;
        }
        Ok(())
    }

    /// Adds `rate * dt`, saturating at capacity. Returns whether the store is full.
    pub fn recharge(&mut self, rate: S, dt: u64) -> Result<bool, VitalityError> {
        if self.dead {
            return Err(VitalityError::Dead);
        }
        if rate < S::zero() || !rate.is_finite_value() {
            return Err(VitalityError::InvalidArgument(format!(
                "recharge rate must be non-negative, got {rate}"
            )));
        }
        let offered = rate * scalar_from_ticks::<S>(dt);
        let room = self.params.capacity - self.charge;
        let added = offered.min_of(room);
        self.charge = if offered >= room {
            self.params.capacity
        } else {
            self.charge + offered
        };
        self.ledger.total_recharged = self.ledger.total_recharged + added;
        self.ledger.recharge_clamped = self.ledger.recharge_clamped + (offered - added);
        Ok(self.charge == self.params.capacity)
    }

    pub fn gain(&self) -> S {
        self.params.gain_curve.eval(self.fraction())
    }

    pub fn absorb_percepts(&mut self, count: u64) {
        self.ledger.info_inflow += count;
    }
}

fn scalar_from_ticks<S: Scalar>(dt: u64) -> S {
    // Exact for every dt a run can reach with f64; rationals go through i64.
    S::lit(dt as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VitalEventKind {
    PowerLow,
    PowerLower,
    PowerCritical,
    Died,
    Recharged,
}

impl VitalEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VitalEventKind::PowerLow => "power_low",
            VitalEventKind::PowerLower => "power_lower",
            VitalEventKind::PowerCritical => "power_critical",
            VitalEventKind::Died => "died",
            VitalEventKind::Recharged => "recharged",
        }
    }
}

impl fmt::Display for VitalEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VitalEvent {
    pub kind: VitalEventKind,
    pub tick: u64,
}

/// Threshold events between two snapshots of one store, in severity order.
pub fn vital_events<S: Scalar>(
    before: &EnergyStore<S>,
    after: &EnergyStore<S>,
    tick: u64,
) -> Vec<VitalEvent> {
    let p = &after.params;
    let crossed_down = |level: S| before.charge >= level && after.charge < level;
    let mut out = Vec::new();
    let mut push = |kind| out.push(VitalEvent { kind, tick });
    if crossed_down(p.low_level()) {
        push(VitalEventKind::PowerLow);
    }
    if crossed_down(p.critical_level()) {
        push(VitalEventKind::PowerCritical);
    }
    if before.charge > S::zero() && after.charge == S::zero() {
        push(VitalEventKind::Died);
    }
    if before.charge < p.capacity && after.charge == p.capacity {
        push(VitalEventKind::Recharged);
    }
    out
}

/// `PowerLower` for a failed feeding cycle, raised only while below the low threshold.
pub fn feeding_failure_event<S: Scalar>(store: &EnergyStore<S>, tick: u64) -> Option<VitalEvent> {
    (!store.dead && store.is_low()).then_some(VitalEvent {
        kind: VitalEventKind::PowerLower,
        tick,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn params(capacity: f64, drain: f64, mv: f64) -> Arc<EnergyParams<f64>> {
        Arc::new(EnergyParams::new(capacity, drain).with_cost("move", mv))
    }

    #[test]
    fn drain_subtracts_base_and_action_cost() {
        let mut s = EnergyStore::new(params(20.0, 0.1, 0.4), 10.0).unwrap();
        s.drain("move").unwrap();
        assert!((s.charge() - 9.5).abs() < 1e-12);
        assert!((s.ledger().total_drained - 0.5).abs() < 1e-12);
    }

    #[test]
    fn drain_exact_in_rationals() {
        let p = Arc::new(
            EnergyParams::new(Exact::from_integer(20), Exact::new(1, 10))
                .with_cost("move", Exact::new(2, 5)),
        );
        let mut s = EnergyStore::new(p, Exact::from_integer(10)).unwrap();
        s.drain("move").unwrap();
        assert_eq!(s.charge(), Exact::new(19, 2));
    }

    #[test]
    fn drain_clamps_at_zero_and_dies() {
        let mut s = EnergyStore::new(params(20.0, 0.1, 0.4), 0.3).unwrap();
        s.drain("move").unwrap();
        assert_eq!(s.charge(), 0.0);
        assert!(s.is_dead());
        assert!((s.ledger().drain_clamped - 0.2).abs() < 1e-12);
        assert_eq!(s.drain("move"), Err(VitalityError::Dead));
        assert_eq!(s.recharge(1.0, 1), Err(VitalityError::Dead));
    }

    #[test]
    fn idle_without_drain_is_identity() {
        let mut s = EnergyStore::new(params(20.0, 0.0, 0.4), 7.25).unwrap();
        s.drain(IDLE).unwrap();
        assert_eq!(s.charge(), 7.25);
    }

    #[test]
    fn unknown_action_names_the_action() {
        let mut s = EnergyStore::full(params(20.0, 0.1, 0.4)).unwrap();
        let err = s.drain("dance").unwrap_err();
        assert_eq!(err, VitalityError::UnknownAction("dance".into()));
        assert!(err.to_string().contains("dance"));
    }

    #[test]
    fn recharge_adds_and_saturates() {
        let mut s = EnergyStore::new(params(10.0, 0.1, 0.0), 2.0).unwrap();
        assert!(!s.recharge(1.0, 3).unwrap());
        assert_eq!(s.charge(), 5.0);

        let mut s = EnergyStore::new(params(10.0, 0.1, 0.0), 9.5).unwrap();
        assert!(s.recharge(1.0, 3).unwrap());
        assert_eq!(s.charge(), 10.0);
        assert_eq!(s.ledger().recharge_clamped, 2.5);

        let mut s = EnergyStore::new(params(10.0, 0.1, 0.0), 4.0).unwrap();
        s.recharge(0.0, 100).unwrap();
        assert_eq!(s.charge(), 4.0);
    }

    #[test]
    fn recharge_rejects_negative_rate() {
        let mut s = EnergyStore::new(params(10.0, 0.1, 0.0), 4.0).unwrap();
        assert!(matches!(
            s.recharge(-1.0, 1),
            Err(VitalityError::InvalidArgument(_))
        ));
    }

    #[test]
    fn gain_boundaries_and_linear_midpoint() {
        let p = params(10.0, 0.1, 0.0);
        let full = EnergyStore::full(p.clone()).unwrap();
        assert_eq!(full.gain(), 1.0);
        let half = EnergyStore::new(p.clone(), 5.0).unwrap();
        assert_eq!(half.gain(), 0.5);
        let empty = EnergyStore::new(p, 0.0).unwrap();
        assert_eq!(empty.gain(), 0.0);
    }

    #[test]
    fn knee_curve_passes_through_knee() {
        let c = GainCurve::with_knee(0.25, 0.75).unwrap();
        assert_eq!(c.eval(0.25), 0.75);
        assert_eq!(c.eval(0.0), 0.0);
        assert_eq!(c.eval(1.0), 1.0);
        assert!(GainCurve::with_knee(1.0, 0.5).is_err());
        assert!(GainCurve::with_knee(0.5, 1.5).is_err());
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let p = EnergyParams::new(10.0, 0.1).with_thresholds(0.2, 0.3);
        assert!(p.validate().is_err());
        let p = EnergyParams::new(10.0, 0.1).with_thresholds(1.0, 0.3);
        assert!(p.validate().is_err());
    }

    fn thresholds_store(charge: f64) -> EnergyStore<f64> {
        let p = Arc::new(EnergyParams::new(1.0, 0.01).with_thresholds(0.30, 0.10));
        EnergyStore::new(p, charge).unwrap()
    }

    #[test]
    fn downward_low_crossing_emits_power_low() {
        let ev = vital_events(&thresholds_store(0.30), &thresholds_store(0.29), 7);
        assert_eq!(
            ev,
            vec![VitalEvent {
                kind: VitalEventKind::PowerLow,
                tick: 7
            }]
        );
    }

    #[test]
    fn upward_crossing_is_silent() {
        assert!(vital_events(&thresholds_store(0.29), &thresholds_store(0.31), 1).is_empty());
    }

    #[test]
    fn reaching_zero_emits_died_after_thresholds() {
        let kinds: Vec<_> = vital_events(&thresholds_store(0.5), &thresholds_store(0.0), 3)
            .into_iter()
            .map(|e| e.kind)
            .collect();
        assert_eq!(
            kinds,
            vec![
                VitalEventKind::PowerLow,
                VitalEventKind::PowerCritical,
                VitalEventKind::Died
            ]
        );
    }

    #[test]
    fn feeding_failure_only_below_low() {
        assert!(feeding_failure_event(&thresholds_store(0.5), 0).is_none());
        assert_eq!(
            feeding_failure_event(&thresholds_store(0.2), 4).map(|e| e.kind),
            Some(VitalEventKind::PowerLower)
        );
    }
}
