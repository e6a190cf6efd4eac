//! Shielded Q-learning for remote electrical tilt.
//!
//! An agent learns per-cell tilt changes on a simulated network. Operator
//! intents are LTL formulas over thresholded KPIs; after an unshielded
//! exploration phase the experience is abstracted into a labeled model,
//! model-checked against the negated intent, and a runtime shield blocks
//! actions whose probability of entering a violating product state reaches
//! a threshold.
//!
//! Numeric code is generic over [`num::Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod abstraction;
pub mod action;
pub mod agent;
pub mod control;
pub mod feature;
pub mod graph;
pub mod ltl;
pub mod modelcheck;
pub mod num;
pub mod shield;
pub mod simnet;

pub type SimulationF32 = simnet::Simulation<f32>;
pub type SimulationF64 = simnet::Simulation<f64>;
pub type AgentF32 = agent::Agent<f32>;
pub type AgentF64 = agent::Agent<f64>;
pub type CmdpF32 = abstraction::Cmdp<f32>;
pub type CmdpF64 = abstraction::Cmdp<f64>;
pub type ShieldF32 = shield::Shield<f32>;
pub type ShieldF64 = shield::Shield<f64>;
