//! The optimistic learner with separate confidence families for the hidden
//! chain and for the coefficient distributions.
//!
//! Time is split into rounds. At the start of a round the policy maps every
//! recovered previous state to an (arm, vertex) pair that maximizes the
//! optimistic one-step reward: the estimated transition row is used as is,
//! while every coefficient distribution is replaced by its most favourable
//! member of an L∞ confidence box. A round ends as soon as any confidence
//! length has halved relative to its value at the round start.

use rand::RngCore;

use super::optimistic::{optimistic_value, OptimisticBox};
use super::{recover_state, AgentKind, ArgmaxTracker, Learner, Observation, Rounds};
use crate::env::{ArmId, ModelKnowledge, StateId};
use crate::error::Result;
use crate::geometry::PerturbationSchedule;
use crate::inference::{ConfidenceParams, CountTables};
use crate::scalar::{dot, Scalar};

/// Policy frozen for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPolicy<T> {
    /// Indexed by previous state.
    pub arms: Vec<ArmId>,
    /// Index into the vertex list, per previous state.
    pub vertex_indices: Vec<usize>,
    pub vertices: Vec<Vec<T>>,
    pub values: Vec<T>,
    /// `conf_s(t_k, s)`
    pub snapshot_conf_s: Vec<T>,
    /// `conf_theta(t_k, b, s)` indexed `[b * S + s]`
    pub snapshot_conf_theta: Vec<T>,
    pub t_k: u64,
}

/// Optimistic expected reward of `(arm, vertex)` for every arrival state,
/// `[b][v][s]`, using the confidence boxes at the tables' current time.
fn optimistic_arrival_values<T: Scalar>(
    counts: &CountTables,
    knowledge: &ModelKnowledge<T>,
    vertices: &[Vec<T>],
    params: &ConfidenceParams,
) -> Vec<Vec<Vec<T>>> {
    let num_states = knowledge.num_states;
    let mut scratch = Vec::new();
    let mut values = Vec::new();
    (0..knowledge.num_arms)
        .map(|b| {
            let boxes: Vec<(Vec<T>, T)> = (0..num_states)
                .map(|s| {
                    (
                        counts.est_theta(ArmId(b), StateId(s)),
                        counts.conf_theta(params, ArmId(b), StateId(s)),
                    )
                })
                .collect();
            vertices
                .iter()
                .map(|a| {
                    (0..num_states)
                        .map(|s| {
                            values.clear();
                            values.extend(knowledge.theta_sets[b][s].iter().map(|th| dot(a, th)));
                            let (center, width) = &boxes[s];
                            optimistic_value(center, *width, &values, &mut scratch)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Full optimistic value table `[prev_state][arm][vertex]`.
pub fn policy_values<T: Scalar>(
    counts: &CountTables,
    knowledge: &ModelKnowledge<T>,
    vertices: &[Vec<T>],
    params: &ConfidenceParams,
) -> Vec<Vec<Vec<T>>> {
    let arrival = optimistic_arrival_values(counts, knowledge, vertices, params);
    (0..knowledge.num_states)
        .map(|prev| {
            let row: Vec<T> = counts.est_transition_row(StateId(prev));
            arrival
                .iter()
                .map(|per_vertex| {
                    per_vertex
                        .iter()
                        .map(|per_state| row.iter().zip(per_state).map(|(&p, &v)| p * v).sum())
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Computes the round policy from the counts at the round start.
pub fn compute_policy<T: Scalar>(
    counts: &CountTables,
    knowledge: &ModelKnowledge<T>,
    vertices: &[Vec<T>],
    params: &ConfidenceParams,
) -> RoundPolicy<T> {
    let table = policy_values(counts, knowledge, vertices, params);
    let num_states = knowledge.num_states;
    let mut arms = Vec::with_capacity(num_states);
    let mut vertex_indices = Vec::with_capacity(num_states);
    let mut values = Vec::with_capacity(num_states);
    for per_arm in &table {
        let mut best = ArgmaxTracker::new();
        for (b, per_vertex) in per_arm.iter().enumerate() {
            for (v, &value) in per_vertex.iter().enumerate() {
                best.offer(b, v, value, vertices);
            }
        }
        arms.push(ArmId(best.arm));
        vertex_indices.push(best.vertex);
        values.push(best.value);
    }
    let snapshot_conf_s = (0..num_states)
        .map(|s| counts.conf_s(params, StateId(s)))
        .collect();
    let snapshot_conf_theta = (0..knowledge.num_arms)
        .flat_map(|b| (0..num_states).map(move |s| (b, s)))
        .map(|(b, s)| counts.conf_theta(params, ArmId(b), StateId(s)))
        .collect();
    RoundPolicy {
        vertices: vertex_indices
            .iter()
            .map(|&i| vertices[i].clone())
            .collect(),
        arms,
        vertex_indices,
        values,
        snapshot_conf_s,
        snapshot_conf_theta,
        t_k: counts.t(),
    }
}

/// Optimistic objective of one `(arm, vertex)` for a previous state,
/// evaluated with the full maximizer (used for invariant checks).
pub fn optimistic_objective<T: Scalar>(
    counts: &CountTables,
    knowledge: &ModelKnowledge<T>,
    params: &ConfidenceParams,
    prev: StateId,
    arm: ArmId,
    action: &[T],
) -> T {
    let row: Vec<T> = counts.est_transition_row(prev);
    (0..knowledge.num_states)
        .map(|s| {
            let center = counts.est_theta(arm, StateId(s));
            let values: Vec<T> = knowledge.theta_sets[arm.0][s]
                .iter()
                .map(|th| dot(action, th))
                .collect();
            let width = counts.conf_theta(params, arm, StateId(s));
            let (_, v) =
                super::optimistic_expectation(&OptimisticBox::new(&center, width, &values));
            row[s] * v
        })
        .sum()
}

/// True iff some confidence length has dropped to at most half of its
/// round-start value.
pub fn round_should_end<T: Scalar>(
    counts: &CountTables,
    policy: &RoundPolicy<T>,
    params: &ConfidenceParams,
) -> bool {
    let half = T::lit(0.5);
    let num_states = counts.num_states();
    let state_halved = (0..num_states)
        .any(|s| counts.conf_s::<T>(params, StateId(s)) <= policy.snapshot_conf_s[s] * half);
    if state_halved {
        return true;
    }
    (0..counts.num_arms()).any(|b| {
        (0..num_states).any(|s| {
            counts.conf_theta::<T>(params, ArmId(b), StateId(s))
                <= policy.snapshot_conf_theta[b * num_states + s] * half
        })
    })
}

/// Learner state.
#[derive(Debug, Clone)]
pub struct Hucrl<T> {
    knowledge: ModelKnowledge<T>,
    vertices: Vec<Vec<T>>,
    counts: CountTables,
    params: ConfidenceParams,
    schedule: PerturbationSchedule<T>,
    policy: RoundPolicy<T>,
    s_hat_prev: StateId,
    rounds: Rounds,
}

impl<T: Scalar> Hucrl<T> {
    pub fn new(
        knowledge: ModelKnowledge<T>,
        params: ConfidenceParams,
        schedule: PerturbationSchedule<T>,
    ) -> Result<Self> {
        let vertices = knowledge.actions.vertices()?.to_vec();
        let set_sizes: Vec<Vec<usize>> = knowledge
            .theta_sets
            .iter()
            .map(|per_state| per_state.iter().map(Vec::len).collect())
            .collect();
        let counts = CountTables::new(knowledge.num_states, &set_sizes);
        let policy = compute_policy(&counts, &knowledge, &vertices, &params);
        Ok(Self {
            knowledge,
            vertices,
            counts,
            params,
            schedule,
            policy,
            s_hat_prev: StateId(0),
            rounds: Rounds::new(),
        })
    }

    pub fn counts(&self) -> &CountTables {
        &self.counts
    }

    pub fn policy(&self) -> &RoundPolicy<T> {
        &self.policy
    }

    pub fn params(&self) -> &ConfidenceParams {
        &self.params
    }

    pub fn knowledge(&self) -> &ModelKnowledge<T> {
        &self.knowledge
    }

    pub fn vertices(&self) -> &[Vec<T>] {
        &self.vertices
    }
}

impl<T: Scalar> Learner<T> for Hucrl<T> {
    fn kind(&self) -> AgentKind {
        AgentKind::Hucrl
    }

    fn act(&mut self, rng: &mut dyn RngCore) -> (ArmId, Vec<T>) {
        let prev = self.s_hat_prev.0;
        let arm = self.policy.arms[prev];
        let radius = self.schedule.radius(self.counts.t());
        let action = self.knowledge.actions.sample_perturbed_action(
            &self.policy.vertices[prev],
            radius,
            rng,
        );
        (arm, action)
    }

    fn observe(&mut self, arm: ArmId, action: &[T], reward: T) -> Observation<T> {
        let recovery = recover_state(&self.knowledge.theta_sets[arm.0], action, reward);
        if self.counts.t() == 0 {
            self.counts.tick();
        } else {
            self.counts
                .record_transition(self.s_hat_prev, recovery.state, arm, recovery.theta_index)
                .expect("recovered indices are in range");
        }
        self.s_hat_prev = recovery.state;
        let round_ended = round_should_end(&self.counts, &self.policy, &self.params);
        if round_ended {
            self.policy =
                compute_policy(&self.counts, &self.knowledge, &self.vertices, &self.params);
            self.rounds.begin(self.counts.t());
        }
        Observation {
            recovery,
            round_ended,
        }
    }

    fn time(&self) -> u64 {
        self.counts.t()
    }

    fn round_index(&self) -> usize {
        self.rounds.index
    }

    fn round_starts(&self) -> &[u64] {
        &self.rounds.starts
    }

    fn recovered_state(&self) -> StateId {
        self.s_hat_prev
    }
}
