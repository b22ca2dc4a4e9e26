//! Comparison learners.
//!
//! [`FlatUcrl`] ignores the linear structure: it keeps a transition estimate
//! and a mean-reward estimate for every (arm, vertex) cell, as a plain UCRL
//! over the finite action set `B x V` would. [`JointConf`] keeps the linear
//! structure but puts a single confidence box on the joint law of the next
//! state and the coefficient vector for every (previous state, arm) pair, so
//! the chain is no longer learned jointly over all arms.
//!
//! Both reuse the reward-based state recovery and the halving round rule.

use rand::RngCore;

use super::optimistic::optimistic_value;
use super::{recover_state, AgentKind, ArgmaxTracker, Learner, Observation, Rounds};
use crate::env::{ArmId, ModelKnowledge, StateId};
use crate::error::Result;
use crate::geometry::PerturbationSchedule;
use crate::inference::{confidence_width, ConfidenceParams};
use crate::scalar::{dot, Scalar};

/// Policy of a baseline: per previous state an arm and a vertex index.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePolicy<T> {
    pub arms: Vec<ArmId>,
    pub vertex_indices: Vec<usize>,
    pub values: Vec<T>,
    pub t_k: u64,
}

fn argmax_table<T: Scalar>(
    table: &[Vec<Vec<T>>],
    vertices: &[Vec<T>],
    t_k: u64,
) -> BaselinePolicy<T> {
    let mut policy = BaselinePolicy {
        arms: Vec::with_capacity(table.len()),
        vertex_indices: Vec::with_capacity(table.len()),
        values: Vec::with_capacity(table.len()),
        t_k,
    };
    for per_arm in table {
        let mut best = ArgmaxTracker::new();
        for (b, per_vertex) in per_arm.iter().enumerate() {
            for (v, &value) in per_vertex.iter().enumerate() {
                best.offer(b, v, value, vertices);
            }
        }
        policy.arms.push(ArmId(best.arm));
        policy.vertex_indices.push(best.vertex);
        policy.values.push(best.value);
    }
    policy
}

/// Smallest and largest reward any vertex can produce with any coefficient
/// vector of the model.
fn reward_range<T: Scalar>(knowledge: &ModelKnowledge<T>, vertices: &[Vec<T>]) -> (T, T) {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for theta in knowledge.theta_sets.iter().flatten().flatten() {
        for v in vertices {
            let r = dot(v, theta);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// UCRL over `(arm, vertex)` cells.
///
/// Rewards are rescaled to `[0, 1]` with the reward range implied by the
/// known supports, so the additive reward bonus has the same meaning as in
/// the original algorithm. Plays are attributed to the planned vertex; the
/// perturbation applied for recovery is not a separate cell.
#[derive(Debug, Clone)]
pub struct FlatUcrl<T> {
    knowledge: ModelKnowledge<T>,
    vertices: Vec<Vec<T>>,
    params: ConfidenceParams,
    schedule: PerturbationSchedule<T>,
    /// `[(s_prev * B + b) * V + v]`
    n_sba: Vec<u64>,
    /// `[((s_prev * B + b) * V + v) * S + s_next]`
    n_sbas: Vec<u64>,
    /// `[(b * V + v) * S + s_next]`
    n_bas: Vec<u64>,
    r_sum: Vec<T>,
    reward_lo: T,
    reward_span: T,
    t: u64,
    policy: BaselinePolicy<T>,
    snapshot_conf_p: Vec<T>,
    snapshot_conf_r: Vec<T>,
    last_vertex: usize,
    s_hat_prev: StateId,
    rounds: Rounds,
}

impl<T: Scalar> FlatUcrl<T> {
    pub fn new(
        knowledge: ModelKnowledge<T>,
        params: ConfidenceParams,
        schedule: PerturbationSchedule<T>,
    ) -> Result<Self> {
        let vertices = knowledge.actions.vertices()?.to_vec();
        let s = knowledge.num_states;
        let b = knowledge.num_arms;
        let nv = vertices.len();
        let (lo, hi) = reward_range(&knowledge, &vertices);
        let span = if hi > lo { hi - lo } else { T::one() };
        let mut me = Self {
            n_sba: vec![0; s * b * nv],
            n_sbas: vec![0; s * b * nv * s],
            n_bas: vec![0; b * nv * s],
            r_sum: vec![T::zero(); b * nv * s],
            reward_lo: lo,
            reward_span: span,
            t: 0,
            policy: BaselinePolicy {
                arms: vec![],
                vertex_indices: vec![],
                values: vec![],
                t_k: 0,
            },
            snapshot_conf_p: vec![],
            snapshot_conf_r: vec![],
            last_vertex: 0,
            s_hat_prev: StateId(0),
            rounds: Rounds::new(),
            knowledge,
            vertices,
            params,
            schedule,
        };
        me.start_round();
        Ok(me)
    }

    fn dims(&self) -> (usize, usize, usize) {
        (
            self.knowledge.num_states,
            self.knowledge.num_arms,
            self.vertices.len(),
        )
    }

    fn card_p(&self) -> f64 {
        let (s, b, v) = self.dims();
        (s * s * b * v) as f64
    }

    fn card_r(&self) -> f64 {
        let (s, b, v) = self.dims();
        (s * b * v) as f64
    }

    pub fn conf_p(&self, s_prev: usize, arm: usize, vertex: usize) -> T {
        let (_, b, nv) = self.dims();
        let n = self.n_sba[(s_prev * b + arm) * nv + vertex];
        confidence_width(self.t, n, self.card_p(), &self.params)
    }

    pub fn conf_r(&self, arm: usize, vertex: usize, s_next: usize) -> T {
        let (s, _, nv) = self.dims();
        let n = self.n_bas[(arm * nv + vertex) * s + s_next];
        confidence_width(self.t, n, self.card_r(), &self.params)
    }

    /// `r_hat + conf_r` in normalized reward units (0 + 1 without data).
    pub fn optimistic_reward(&self, arm: usize, vertex: usize, s_next: usize) -> T {
        let (s, _, nv) = self.dims();
        let cell = (arm * nv + vertex) * s + s_next;
        let n = self.n_bas[cell];
        let mean = if n == 0 {
            T::zero()
        } else {
            self.r_sum[cell] / T::lit(n as f64)
        };
        mean + self.conf_r(arm, vertex, s_next)
    }

    pub fn transition_estimate(&self, s_prev: usize, arm: usize, vertex: usize) -> Vec<T> {
        let (s, b, nv) = self.dims();
        let cell = (s_prev * b + arm) * nv + vertex;
        let n = self.n_sba[cell];
        if n == 0 {
            return vec![T::one() / T::from_usize_lossy(s); s];
        }
        self.n_sbas[cell * s..(cell + 1) * s]
            .iter()
            .map(|&c| T::lit(c as f64) / T::lit(n as f64))
            .collect()
    }

    /// Optimistic value table `[s_prev][arm][vertex]` at the current time.
    pub fn policy_values(&self) -> Vec<Vec<Vec<T>>> {
        let (s, b, nv) = self.dims();
        let opt_r: Vec<Vec<Vec<T>>> = (0..b)
            .map(|arm| {
                (0..nv)
                    .map(|v| {
                        (0..s)
                            .map(|sn| self.optimistic_reward(arm, v, sn))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut scratch = Vec::new();
        (0..s)
            .map(|sp| {
                (0..b)
                    .map(|arm| {
                        (0..nv)
                            .map(|v| {
                                let center = self.transition_estimate(sp, arm, v);
                                optimistic_value(
                                    &center,
                                    self.conf_p(sp, arm, v),
                                    &opt_r[arm][v],
                                    &mut scratch,
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn compute_policy(&self) -> BaselinePolicy<T> {
        argmax_table(&self.policy_values(), &self.vertices, self.t)
    }

    fn start_round(&mut self) {
        let (s, b, nv) = self.dims();
        self.policy = self.compute_policy();
        self.snapshot_conf_p = (0..s * b * nv)
            .map(|cell| confidence_width(self.t, self.n_sba[cell], self.card_p(), &self.params))
            .collect();
        self.snapshot_conf_r = (0..b * nv * s)
            .map(|cell| confidence_width(self.t, self.n_bas[cell], self.card_r(), &self.params))
            .collect();
    }

    /// Exhaustive version of the halving test, over every cell.
    pub fn round_should_end(&self) -> bool {
        let half = T::lit(0.5);
        let p = self
            .n_sba
            .iter()
            .zip(&self.snapshot_conf_p)
            .any(|(&n, &snap)| {
                confidence_width::<T>(self.t, n, self.card_p(), &self.params) <= snap * half
            });
        p || self
            .n_bas
            .iter()
            .zip(&self.snapshot_conf_r)
            .any(|(&n, &snap)| {
                confidence_width::<T>(self.t, n, self.card_r(), &self.params) <= snap * half
            })
    }

    pub fn policy(&self) -> &BaselinePolicy<T> {
        &self.policy
    }

    pub fn normalize_reward(&self, reward: T) -> T {
        (reward - self.reward_lo) / self.reward_span
    }

    /// Number of distinct (arm, vertex) cells that have been played.
    pub fn touched_cells(&self) -> usize {
        let (s, b, nv) = self.dims();
        (0..b)
            .flat_map(|arm| (0..nv).map(move |v| (arm, v)))
            .filter(|&(arm, v)| (0..s).any(|sp| self.n_sba[(sp * b + arm) * nv + v] > 0))
            .count()
    }
}

impl<T: Scalar> Learner<T> for FlatUcrl<T> {
    fn kind(&self) -> AgentKind {
        AgentKind::FlatUcrl
    }

    fn act(&mut self, rng: &mut dyn RngCore) -> (ArmId, Vec<T>) {
        let prev = self.s_hat_prev.0;
        let arm = self.policy.arms[prev];
        let v = self.policy.vertex_indices[prev];
        self.last_vertex = v;
        let radius = self.schedule.radius(self.t);
        let action = self
            .knowledge
            .actions
            .sample_perturbed_action(&self.vertices[v], radius, rng);
        (arm, action)
    }

    fn observe(&mut self, arm: ArmId, action: &[T], reward: T) -> Observation<T> {
        let recovery = recover_state(&self.knowledge.theta_sets[arm.0], action, reward);
        let (s, b, nv) = self.dims();
        let v = self.last_vertex;
        let mut round_ended = false;
        if self.t == 0 {
            self.t = 1;
        } else {
            let sp = self.s_hat_prev.0;
            let sn = recovery.state.0;
            let p_cell = (sp * b + arm.0) * nv + v;
            let r_cell = (arm.0 * nv + v) * s + sn;
            self.n_sba[p_cell] += 1;
            self.n_sbas[p_cell * s + sn] += 1;
            self.n_bas[r_cell] += 1;
            self.r_sum[r_cell] = self.r_sum[r_cell] + self.normalize_reward(reward);
            self.t += 1;
            // only the two touched cells can have crossed their threshold:
            // for fixed counts the widths never shrink as t grows
            let half = T::lit(0.5);
            round_ended = self.conf_p(sp, arm.0, v) <= self.snapshot_conf_p[p_cell] * half
                || self.conf_r(arm.0, v, sn) <= self.snapshot_conf_r[r_cell] * half;
        }
        self.s_hat_prev = recovery.state;
        if round_ended {
            self.start_round();
            self.rounds.begin(self.t);
        }
        Observation {
            recovery,
            round_ended,
        }
    }

    fn time(&self) -> u64 {
        self.t
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

/// Single confidence family on the joint law of (next state, coefficient
/// vector) given (previous state, arm).
#[derive(Debug, Clone)]
pub struct JointConf<T> {
    knowledge: ModelKnowledge<T>,
    vertices: Vec<Vec<T>>,
    params: ConfidenceParams,
    schedule: PerturbationSchedule<T>,
    /// `offsets[b][s]`: start of state `s` in arm `b`'s joint alphabet;
    /// `offsets[b][S]` is the alphabet size.
    offsets: Vec<Vec<usize>>,
    /// `[s_prev * B + b]`
    n_sb: Vec<u64>,
    /// `[s_prev * B + b][symbol]`
    n_joint: Vec<Vec<u64>>,
    /// `[b][v][symbol] = <v, theta(symbol)>`
    symbol_values: Vec<Vec<Vec<T>>>,
    t: u64,
    policy: BaselinePolicy<T>,
    snapshot_conf: Vec<T>,
    s_hat_prev: StateId,
    rounds: Rounds,
}

impl<T: Scalar> JointConf<T> {
    pub fn new(
        knowledge: ModelKnowledge<T>,
        params: ConfidenceParams,
        schedule: PerturbationSchedule<T>,
    ) -> Result<Self> {
        let vertices = knowledge.actions.vertices()?.to_vec();
        let s = knowledge.num_states;
        let b = knowledge.num_arms;
        let offsets: Vec<Vec<usize>> = knowledge
            .theta_sets
            .iter()
            .map(|per_state| {
                let mut acc = 0;
                let mut o = Vec::with_capacity(s + 1);
                for set in per_state {
                    o.push(acc);
                    acc += set.len();
                }
                o.push(acc);
                o
            })
            .collect();
        let symbol_values = knowledge
            .theta_sets
            .iter()
            .map(|per_state| {
                vertices
                    .iter()
                    .map(|v| per_state.iter().flatten().map(|th| dot(v, th)).collect())
                    .collect()
            })
            .collect();
        let n_joint = (0..s * b)
            .map(|cell| vec![0; offsets[cell % b][s]])
            .collect();
        let mut me = Self {
            n_sb: vec![0; s * b],
            n_joint,
            symbol_values,
            offsets,
            t: 0,
            policy: BaselinePolicy {
                arms: vec![],
                vertex_indices: vec![],
                values: vec![],
                t_k: 0,
            },
            snapshot_conf: vec![],
            s_hat_prev: StateId(0),
            rounds: Rounds::new(),
            knowledge,
            vertices,
            params,
            schedule,
        };
        me.start_round();
        Ok(me)
    }

    /// `sum_s |Theta_{b,s}|`
    pub fn alphabet_size(&self, arm: usize) -> usize {
        self.offsets[arm][self.knowledge.num_states]
    }

    fn card(&self, arm: usize) -> f64 {
        let s = self.knowledge.num_states;
        (s * s * self.knowledge.num_arms * self.alphabet_size(arm)) as f64
    }

    pub fn conf(&self, s_prev: usize, arm: usize) -> T {
        let cell = s_prev * self.knowledge.num_arms + arm;
        confidence_width(self.t, self.n_sb[cell], self.card(arm), &self.params)
    }

    /// Empirical joint law over arm `arm`'s alphabet; uniform without data.
    pub fn joint_estimate(&self, s_prev: usize, arm: usize) -> Vec<T> {
        let cell = s_prev * self.knowledge.num_arms + arm;
        let n = self.n_sb[cell];
        let k = self.alphabet_size(arm);
        if n == 0 {
            return vec![T::one() / T::from_usize_lossy(k); k];
        }
        self.n_joint[cell]
            .iter()
            .map(|&c| T::lit(c as f64) / T::lit(n as f64))
            .collect()
    }

    pub fn policy_values(&self) -> Vec<Vec<Vec<T>>> {
        let s = self.knowledge.num_states;
        let b = self.knowledge.num_arms;
        let mut scratch = Vec::new();
        (0..s)
            .map(|sp| {
                (0..b)
                    .map(|arm| {
                        let center = self.joint_estimate(sp, arm);
                        let width = self.conf(sp, arm);
                        self.symbol_values[arm]
                            .iter()
                            .map(|values| optimistic_value(&center, width, values, &mut scratch))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn compute_policy(&self) -> BaselinePolicy<T> {
        argmax_table(&self.policy_values(), &self.vertices, self.t)
    }

    fn start_round(&mut self) {
        self.policy = self.compute_policy();
        let s = self.knowledge.num_states;
        let b = self.knowledge.num_arms;
        self.snapshot_conf = (0..s * b)
            .map(|cell| self.conf(cell / b, cell % b))
            .collect();
    }

    pub fn round_should_end(&self) -> bool {
        let b = self.knowledge.num_arms;
        (0..self.n_sb.len())
            .any(|cell| self.conf(cell / b, cell % b) <= self.snapshot_conf[cell] * T::lit(0.5))
    }

    pub fn policy(&self) -> &BaselinePolicy<T> {
        &self.policy
    }
}

impl<T: Scalar> Learner<T> for JointConf<T> {
    fn kind(&self) -> AgentKind {
        AgentKind::Joint
    }

    fn act(&mut self, rng: &mut dyn RngCore) -> (ArmId, Vec<T>) {
        let prev = self.s_hat_prev.0;
        let arm = self.policy.arms[prev];
        let v = self.policy.vertex_indices[prev];
        let radius = self.schedule.radius(self.t);
        let action = self
            .knowledge
            .actions
            .sample_perturbed_action(&self.vertices[v], radius, rng);
        (arm, action)
    }

    fn observe(&mut self, arm: ArmId, action: &[T], reward: T) -> Observation<T> {
        let recovery = recover_state(&self.knowledge.theta_sets[arm.0], action, reward);
        let mut round_ended = false;
        if self.t == 0 {
            self.t = 1;
        } else {
            let sp = self.s_hat_prev.0;
            let cell = sp * self.knowledge.num_arms + arm.0;
            let symbol = self.offsets[arm.0][recovery.state.0] + recovery.theta_index;
            self.n_sb[cell] += 1;
            self.n_joint[cell][symbol] += 1;
            self.t += 1;
            round_ended = self.conf(sp, arm.0) <= self.snapshot_conf[cell] * T::lit(0.5);
        }
        self.s_hat_prev = recovery.state;
        if round_ended {
            self.start_round();
            self.rounds.begin(self.t);
        }
        Observation {
            recovery,
            round_ended,
        }
    }

    fn time(&self) -> u64 {
        self.t
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polytope;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn knowledge() -> ModelKnowledge<f64> {
        ModelKnowledge {
            num_states: 2,
            num_arms: 2,
            theta_sets: vec![
                vec![
                    vec![vec![1.0, 2.0], vec![-3.0, 4.0]],
                    vec![vec![5.0, -1.0], vec![0.0, 7.0]],
                ],
                vec![
                    vec![vec![2.0, 2.0], vec![-1.0, -6.0]],
                    vec![vec![9.0, 3.0], vec![4.0, -2.0]],
                ],
            ],
            actions: Polytope::unit_cube(2).unwrap(),
        }
    }

    fn schedule() -> PerturbationSchedule<f64> {
        PerturbationSchedule::new(0.5, 1.5, 1.0, 13.0).unwrap()
    }

    #[test]
    fn flat_zero_data_is_uniformly_optimistic() {
        let flat = FlatUcrl::new(knowledge(), ConfidenceParams::default(), schedule()).unwrap();
        let table = flat.policy_values();
        for v in table.iter().flatten().flatten() {
            assert_eq!(*v, 1.0);
        }
        assert_eq!(flat.policy().arms, vec![ArmId(0), ArmId(0)]);
        assert_eq!(flat.policy().vertex_indices, vec![0, 0]);
    }

    #[test]
    fn joint_zero_data_takes_best_symbol() {
        let joint = JointConf::new(knowledge(), ConfidenceParams::default(), schedule()).unwrap();
        assert_eq!(joint.alphabet_size(0), 4);
        let table = joint.policy_values();
        // arm 1, vertex (1,1): best of {4, -7, 12, 2}
        assert_eq!(table[0][1][3], 12.0);
        assert_eq!(joint.policy().arms[0], ArmId(1));
    }

    /// Scripted trajectory on a fixed environment, checking that the
    /// incremental halving test agrees with the exhaustive one.
    #[test]
    fn incremental_round_test_matches_exhaustive() {
        use crate::env::tests::setup_1a_like;
        use crate::env::{EnvState, InitialState};
        let spec = setup_1a_like();
        let mut flat =
            FlatUcrl::new(spec.knowledge(), ConfidenceParams::default(), schedule()).unwrap();
        let mut joint =
            JointConf::new(spec.knowledge(), ConfidenceParams::default(), schedule()).unwrap();
        let mut env_f = EnvState::init(&spec, 4, InitialState::Stationary).unwrap();
        let mut env_j = env_f.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5000 {
            let before = flat.clone();
            let (arm, action) = flat.act(&mut rng);
            let out = env_f.step(&spec, arm, &action).unwrap();
            let mut shadow = before.clone();
            shadow.last_vertex = flat.last_vertex;
            let obs = flat.observe(arm, &action, out.reward);
            // replay on the shadow without the incremental shortcut
            if shadow.t > 0 {
                let sp = shadow.s_hat_prev.0;
                let (s, b, nv) = shadow.dims();
                let v = shadow.last_vertex;
                let p_cell = (sp * b + arm.0) * nv + v;
                let r_cell = (arm.0 * nv + v) * s + obs.recovery.state.0;
                shadow.n_sba[p_cell] += 1;
                shadow.n_sbas[p_cell * s + obs.recovery.state.0] += 1;
                shadow.n_bas[r_cell] += 1;
                shadow.t += 1;
                assert_eq!(shadow.round_should_end(), obs.round_ended);
            }

            let before = joint.clone();
            let (arm, action) = joint.act(&mut rng);
            let out = env_j.step(&spec, arm, &action).unwrap();
            let obs = joint.observe(arm, &action, out.reward);
            if before.t > 0 {
                let mut shadow = before;
                let cell = shadow.s_hat_prev.0 * 2 + arm.0;
                let sym = shadow.offsets[arm.0][obs.recovery.state.0] + obs.recovery.theta_index;
                shadow.n_sb[cell] += 1;
                shadow.n_joint[cell][sym] += 1;
                shadow.t += 1;
                assert_eq!(shadow.round_should_end(), obs.round_ended);
            }
        }
        assert!(flat.round_index() > 3);
        assert!(joint.round_index() > 3);
    }
}
