//! Restless hidden Markov bandits with linear rewards.
//!
//! A hidden Markov chain moves at every step whatever the learner does. The
//! learner pulls an arm `b` and plays an action `a` from a polytope; the
//! reward is `<a, theta>` where `theta` is drawn from a finite family that
//! depends on the arm and on the state the chain just entered. Only the
//! reward is observed.
//!
//! The crate provides the generative model ([`env`]), the action polytope
//! ([`geometry`]), counters and confidence lengths ([`inference`]), the
//! optimistic learner and two baselines ([`agent`]), exact model quantities
//! ([`oracle`]), reference implementations for testing ([`selfcheck`]) and a
//! Monte Carlo harness ([`harness`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the harness uses.

pub mod agent;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod oracle;
pub mod scalar;
pub mod selfcheck;

pub use agent::{AgentKind, Learner};
pub use env::{ArmId, InitialState, StateId};
pub use error::{Error, Result};
pub use inference::{ConfidenceParams, CountTables};
pub use scalar::Scalar;

pub type Polytope = geometry::Polytope<f64>;
pub type PerturbationSchedule = geometry::PerturbationSchedule<f64>;
pub type TransitionMatrix = env::TransitionMatrix<f64>;
pub type ThetaSet = env::ThetaSet<f64>;
pub type ThetaFamily = env::ThetaFamily<f64>;
pub type EnvironmentSpec = env::EnvironmentSpec<f64>;
pub type ModelKnowledge = env::ModelKnowledge<f64>;
pub type Hucrl = agent::Hucrl<f64>;
pub type JointConf = agent::JointConf<f64>;
pub type FlatUcrl = agent::FlatUcrl<f64>;
pub type RoundPolicy = agent::RoundPolicy<f64>;
pub type OptimalPolicy = oracle::OptimalPolicy<f64>;
pub type ModelConstants = oracle::ModelConstants<f64>;
