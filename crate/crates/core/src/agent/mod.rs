//! Learners for the hidden restless bandit and the machinery they share:
//! reward-based state recovery, round bookkeeping and the per-step event
//! stream consumed by the harness.

pub mod baseline;
pub mod hucrl;
pub mod optimistic;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{ArmId, StateId};
use crate::scalar::{dot, Scalar};

pub use baseline::{FlatUcrl, JointConf};
pub use hucrl::{compute_policy, round_should_end, Hucrl, RoundPolicy};
pub use optimistic::{optimistic_expectation, OptimisticBox};

/// A recovered vector whose residual exceeds this is reported.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Hucrl,
    Joint,
    FlatUcrl,
    OracleKnownState,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Hucrl,
        AgentKind::Joint,
        AgentKind::FlatUcrl,
        AgentKind::OracleKnownState,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AgentKind::Hucrl => "hucrl",
            AgentKind::Joint => "joint",
            AgentKind::FlatUcrl => "flat_ucrl",
            AgentKind::OracleKnownState => "oracle_known_state",
        }
    }

    /// Small integer used in child-seed derivation.
    pub fn seed_tag(self) -> u64 {
        match self {
            AgentKind::Hucrl => 1,
            AgentKind::Joint => 2,
            AgentKind::FlatUcrl => 3,
            AgentKind::OracleKnownState => 4,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == s)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diagnostic<T> {
    /// Best candidate does not explain the reward.
    ResidualTooLarge { residual: T },
    /// Two candidates reproduce the reward bit for bit.
    Ambiguous { gap: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery<T> {
    pub state: StateId,
    pub theta_index: usize,
    pub residual: T,
    pub diagnostic: Option<Diagnostic<T>>,
}

/// Finds the coefficient vector of `arm` that best explains `reward` for the
/// played `action`. `arm_sets[s]` is the support of the arm in state `s`.
///
/// Residuals are compared with the same inner product the environment uses,
/// so the true vector has residual exactly zero and any other vector with a
/// different inner product is strictly worse. Only exact ties are ambiguous.
pub fn recover_state<T: Scalar>(arm_sets: &[Vec<Vec<T>>], action: &[T], reward: T) -> Recovery<T> {
    let mut best = (usize::MAX, usize::MAX, T::infinity());
    let mut second = T::infinity();
    for (s, set) in arm_sets.iter().enumerate() {
        for (i, theta) in set.iter().enumerate() {
            let residual = (reward - dot(action, theta)).abs();
            if residual < best.2 {
                second = best.2;
                best = (s, i, residual);
            } else if residual < second {
                second = residual;
            }
        }
    }
    let (state, theta_index, residual) = best;
    let gap = second - residual;
    let diagnostic = if residual > T::lit(RESIDUAL_TOL) {
        Some(Diagnostic::ResidualTooLarge { residual })
    } else if gap <= T::zero() {
        Some(Diagnostic::Ambiguous { gap })
    } else {
        None
    };
    Recovery {
        state: StateId(state),
        theta_index,
        residual,
        diagnostic,
    }
}

/// What a learner reports after seeing a reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub recovery: Recovery<T>,
    /// A new round started (and a new policy was computed) after this step.
    pub round_ended: bool,
}

/// Common interface of the learners. Learners only receive rewards; the
/// hidden state is never passed in.
pub trait Learner<T: Scalar>: Send {
    fn kind(&self) -> AgentKind;

    /// Arm and (perturbed) action for the current time step.
    fn act(&mut self, rng: &mut dyn RngCore) -> (ArmId, Vec<T>);

    /// Consumes the reward of the action returned by the last `act`.
    fn observe(&mut self, arm: ArmId, action: &[T], reward: T) -> Observation<T>;

    /// Current time, i.e. number of completed steps.
    fn time(&self) -> u64;

    fn round_index(&self) -> usize;

    /// Start time `t_k` of every round so far.
    fn round_starts(&self) -> &[u64];

    /// Recovered previous state.
    fn recovered_state(&self) -> StateId;
}

/// Per-step record emitted to the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent<T> {
    pub agent: AgentKind,
    pub t: u64,
    pub arm: ArmId,
    pub action: Vec<T>,
    pub reward: T,
    pub s_hat: StateId,
    pub round_index: usize,
    pub diagnostic: Option<Diagnostic<T>>,
}

pub trait EventSink<T> {
    fn record(&mut self, event: &StepEvent<T>);

    /// Lets the runner skip building events nobody reads.
    fn enabled(&self) -> bool {
        true
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl<T> EventSink<T> for NullSink {
    fn record(&mut self, _event: &StepEvent<T>) {}

    fn enabled(&self) -> bool {
        false
    }
}

impl<T: Clone> EventSink<T> for Vec<StepEvent<T>> {
    fn record(&mut self, event: &StepEvent<T>) {
        self.push(event.clone());
    }
}

/// Round bookkeeping shared by all learners.
#[derive(Debug, Clone, Default)]
pub(crate) struct Rounds {
    pub index: usize,
    pub starts: Vec<u64>,
}

impl Rounds {
    pub fn new() -> Self {
        Self {
            index: 0,
            starts: vec![0],
        }
    }

    pub fn begin(&mut self, t: u64) {
        self.index += 1;
        self.starts.push(t);
    }
}

/// Argmax with the deterministic tie-break used by every planner: smaller
/// arm index first, then lexicographically smaller vertex.
pub(crate) struct ArgmaxTracker<T> {
    pub arm: usize,
    pub vertex: usize,
    pub value: T,
}

impl<T: Scalar> ArgmaxTracker<T> {
    pub fn new() -> Self {
        Self {
            arm: usize::MAX,
            vertex: usize::MAX,
            value: T::neg_infinity(),
        }
    }

    /// Candidates must be offered in increasing arm order.
    pub fn offer(&mut self, arm: usize, vertex: usize, value: T, vertices: &[Vec<T>]) {
        let better = if self.arm == usize::MAX || value > self.value {
            true
        } else if value == self.value && arm == self.arm {
            crate::scalar::lex_cmp(&vertices[vertex], &vertices[self.vertex])
                == std::cmp::Ordering::Less
        } else {
            false
        };
        if better {
            self.arm = arm;
            self.vertex = vertex;
            self.value = value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_solution() {
        let sets = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let action = [0.3, 0.7];
        let reward = dot(&action, &[0.0, 1.0]);
        let r = recover_state(&sets, &action, reward);
        assert_eq!(r.state, StateId(1));
        assert_eq!(r.theta_index, 0);
        assert_eq!(r.residual, 0.0);
        assert!(r.diagnostic.is_none());
    }

    #[test]
    fn flags_ambiguous_rewards() {
        let sets = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let action = [0.5, 0.5];
        let r = recover_state(&sets, &action, 0.5);
        assert!(matches!(r.diagnostic, Some(Diagnostic::Ambiguous { .. })));
    }

    #[test]
    fn one_ulp_apart_is_not_ambiguous() {
        let a0 = 0.5f64;
        let a1 = f64::from_bits(0.5f64.to_bits() + 1);
        let sets = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let action = [a0, a1];
        let r = recover_state(&sets, &action, dot(&action, &[0.0, 1.0]));
        assert_eq!(r.state, StateId(1));
        assert!(r.diagnostic.is_none());
    }

    #[test]
    fn flags_unexplained_rewards() {
        let sets = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let r = recover_state(&sets, &[0.3, 0.7], 5.0);
        assert!(matches!(
            r.diagnostic,
            Some(Diagnostic::ResidualTooLarge { .. })
        ));
        // best match is still returned
        assert_eq!(r.state, StateId(1));
    }

    #[test]
    fn agent_tags_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(AgentKind::parse(k.tag()), Some(k));
        }
        assert_eq!(AgentKind::parse("ucrl"), None);
    }
}
