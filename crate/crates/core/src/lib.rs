//! Deterministic simulator of energy-constrained agents that learn which
//! path to a charging source to trust.
//!
//! The numeric core is generic over [`Scalar`]; the aliases below fix the
//! common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decision;
pub mod fsm;
pub mod harness;
pub mod kv;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod vitality;
pub mod world;

pub use scalar::{Exact, Real, Scalar};

pub type EnergyStore64 = vitality::EnergyStore<f64>;
pub type EnergyStore32 = vitality::EnergyStore<f32>;
pub type ExactEnergyStore = vitality::EnergyStore<Exact>;
pub type WeightTable64 = decision::WeightTable<f64>;
pub type WeightTable32 = decision::WeightTable<f32>;
pub type ExactWeightTable = decision::WeightTable<Exact>;

pub type World64 = world::World<f64>;
pub type World32 = world::World<f32>;
