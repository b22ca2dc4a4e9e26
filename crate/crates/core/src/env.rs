//! Ground-truth generative model.
//!
//! Each step advances the hidden chain first and then draws the coefficient
//! vector from the family of the arm that was pulled at the state the chain
//! arrived in. The reward is the inner product of the played action with that
//! vector. Learners only ever see the reward; the hidden state and the drawn
//! vector are returned for truth logging by the harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::oracle;
use crate::scalar::{dot, l1_norm, linf_distance, Scalar};

/// Vectors of different states of one arm must be further apart than this.
pub const THETA_SEPARATION_TOL: f64 = 1e-9;
/// Containment slack for played actions.
pub const ACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArmId(pub usize);

fn probability_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(16.0))
}

fn check_distribution<T: Scalar>(probs: &[T], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::config(format!("{what}: empty distribution")));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::config(format!(
                "{what}: entry {i} = {p} not in [0,1]"
            )));
        }
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > probability_tol::<T>() {
        return Err(Error::config(format!("{what}: sums to {total}, not 1")));
    }
    Ok(())
}

/// Row-stochastic matrix of an irreducible aperiodic chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::config(
                "transition matrix must have at least one state",
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!(
                    "transition row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            check_distribution(row, &format!("transition row {i}"))?;
        }
        if !is_primitive(&rows) {
            return Err(Error::config(
                "transition matrix is not irreducible and aperiodic (P^(|S|^2) has a zero entry)",
            ));
        }
        Ok(Self { rows })
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    #[inline]
    pub fn prob(&self, from: StateId, to: StateId) -> T {
        self.rows[from.0][to.0]
    }

    #[inline]
    pub fn row(&self, from: StateId) -> &[T] {
        &self.rows[from.0]
    }
}

/// Positivity pattern of `P^(n^2)`, computed on booleans.
fn is_primitive<T: Scalar>(rows: &[Vec<T>]) -> bool {
    let n = rows.len();
    let base: Vec<Vec<bool>> = rows
        .iter()
        .map(|r| r.iter().map(|&p| p > T::zero()).collect())
        .collect();
    let mult = |a: &Vec<Vec<bool>>, b: &Vec<Vec<bool>>| -> Vec<Vec<bool>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && b[k][j])).collect())
            .collect()
    };
    let mut exp = n * n;
    let mut result: Option<Vec<Vec<bool>>> = None;
    let mut square = base;
    while exp > 0 {
        if exp & 1 == 1 {
            result = Some(match result {
                None => square.clone(),
                Some(r) => mult(&r, &square),
            });
        }
        exp >>= 1;
        if exp > 0 {
            square = mult(&square, &square);
        }
    }
    result.is_some_and(|m| m.iter().all(|r| r.iter().all(|&x| x)))
}

/// The finite set of coefficient vectors for one (arm, state) pair together
/// with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSet<T> {
    pub vectors: Vec<Vec<T>>,
    pub probs: Vec<T>,
}

impl<T: Scalar> ThetaSet<T> {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `sum_theta P(theta) <a, theta>`
    pub fn expected_reward(&self, action: &[T]) -> T {
        self.vectors
            .iter()
            .zip(&self.probs)
            .map(|(v, &p)| p * dot(action, v))
            .sum()
    }
}

/// Coefficient families indexed as `[arm][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFamily<T> {
    sets: Vec<Vec<ThetaSet<T>>>,
}

impl<T: Scalar> ThetaFamily<T> {
    pub fn new(sets: Vec<Vec<ThetaSet<T>>>, num_states: usize, dim: usize) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::config("need at least one arm"));
        }
        for (b, per_state) in sets.iter().enumerate() {
            if per_state.len() != num_states {
                return Err(Error::config(format!(
                    "arm {b}: {} theta sets, expected one per state ({num_states})",
                    per_state.len()
                )));
            }
            for (s, set) in per_state.iter().enumerate() {
                if set.vectors.is_empty() {
                    return Err(Error::config(format!("Theta[{b}][{s}] is empty")));
                }
                if set.vectors.len() != set.probs.len() {
                    return Err(Error::config(format!(
                        "Theta[{b}][{s}]: {} vectors but {} probabilities",
                        set.vectors.len(),
                        set.probs.len()
                    )));
                }
                if let Some(v) = set.vectors.iter().find(|v| v.len() != dim) {
                    return Err(Error::config(format!(
                        "Theta[{b}][{s}]: vector of dimension {}, expected {dim}",
                        v.len()
                    )));
                }
                if set.vectors.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::config(format!("Theta[{b}][{s}]: non-finite entry")));
                }
                check_distribution(&set.probs, &format!("P_Theta[{b}][{s}]"))?;
            }
            if let Some((i, j)) = first_collision(per_state) {
                return Err(Error::config(format!(
                    "arm {b}: coefficient vectors {i:?} and {j:?} (state, index) are not separated by more than {THETA_SEPARATION_TOL}"
                )));
            }
        }
        Ok(Self { sets })
    }

    pub fn num_arms(&self) -> usize {
        self.sets.len()
    }

    #[inline]
    pub fn get(&self, arm: ArmId, state: StateId) -> &ThetaSet<T> {
        &self.sets[arm.0][state.0]
    }

    pub fn arm(&self, arm: ArmId) -> &[ThetaSet<T>] {
        &self.sets[arm.0]
    }

    pub fn sets(&self) -> &[Vec<ThetaSet<T>>] {
        &self.sets
    }

    pub fn all_vectors(&self) -> impl Iterator<Item = &Vec<T>> {
        self.sets.iter().flatten().flat_map(|s| s.vectors.iter())
    }

    pub fn max_set_size(&self) -> usize {
        self.sets
            .iter()
            .flatten()
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
    }
}

/// All vectors of one arm must be pairwise distinct; across states this is
/// the disjointness assumption, within a state it keeps the index of a
/// recovered vector unambiguous.
pub(crate) fn first_collision<T: Scalar>(
    per_state: &[ThetaSet<T>],
) -> Option<((usize, usize), (usize, usize))> {
    let tol = T::lit(THETA_SEPARATION_TOL);
    let flat: Vec<((usize, usize), &Vec<T>)> = per_state
        .iter()
        .enumerate()
        .flat_map(|(s, set)| {
            set.vectors
                .iter()
                .enumerate()
                .map(move |(i, v)| ((s, i), v))
        })
        .collect();
    for i in 0..flat.len() {
        for j in (i + 1)..flat.len() {
            if linf_distance(flat[i].1, flat[j].1) <= tol {
                return Some((flat[i].0, flat[j].0));
            }
        }
    }
    None
}

/// Full ground-truth model.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec<T> {
    transition: TransitionMatrix<T>,
    thetas: ThetaFamily<T>,
    actions: Polytope<T>,
}

impl<T: Scalar> EnvironmentSpec<T> {
    pub fn new(
        transition: TransitionMatrix<T>,
        thetas: ThetaFamily<T>,
        actions: Polytope<T>,
    ) -> Result<Self> {
        let n = transition.num_states();
        for (b, per_state) in thetas.sets().iter().enumerate() {
            if per_state.len() != n {
                return Err(Error::config(format!(
                    "arm {b} has theta sets for {} states, chain has {n}",
                    per_state.len()
                )));
            }
            for set in per_state {
                if set.vectors.iter().any(|v| v.len() != actions.dim()) {
                    return Err(Error::config(format!(
                        "theta dimension does not match action polytope dimension {}",
                        actions.dim()
                    )));
                }
            }
        }
        Ok(Self {
            transition,
            thetas,
            actions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.transition.num_states()
    }

    pub fn num_arms(&self) -> usize {
        self.thetas.num_arms()
    }

    pub fn dim(&self) -> usize {
        self.actions.dim()
    }

    pub fn transition(&self) -> &TransitionMatrix<T> {
        &self.transition
    }

    pub fn thetas(&self) -> &ThetaFamily<T> {
        &self.thetas
    }

    pub fn actions(&self) -> &Polytope<T> {
        &self.actions
    }

    /// What a learner is allowed to know: everything except the
    /// probabilities.
    pub fn knowledge(&self) -> ModelKnowledge<T> {
        ModelKnowledge {
            num_states: self.num_states(),
            num_arms: self.num_arms(),
            theta_sets: self
                .thetas
                .sets()
                .iter()
                .map(|per_state| per_state.iter().map(|s| s.vectors.clone()).collect())
                .collect(),
            actions: self.actions.clone(),
        }
    }

    pub fn theta_norm_max(&self) -> T {
        self.thetas
            .all_vectors()
            .map(|v| l1_norm(v))
            .fold(T::zero(), T::max)
    }
}

/// The structural side information given to learners: state and arm counts,
/// the supports of every coefficient family and the action set.
#[derive(Debug, Clone)]
pub struct ModelKnowledge<T> {
    pub num_states: usize,
    pub num_arms: usize,
    /// `[arm][state]` list of support vectors.
    pub theta_sets: Vec<Vec<Vec<Vec<T>>>>,
    pub actions: Polytope<T>,
}

impl<T: Scalar> ModelKnowledge<T> {
    pub fn theta_norm_max(&self) -> T {
        self.theta_sets
            .iter()
            .flatten()
            .flatten()
            .map(|v| l1_norm(v))
            .fold(T::zero(), T::max)
    }

    pub fn set_size(&self, arm: usize, state: usize) -> usize {
        self.theta_sets[arm][state].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Stationary,
    Fixed(StateId),
}

/// Mutable simulation state of one trajectory.
#[derive(Debug, Clone)]
pub struct EnvState {
    current_state: StateId,
    rng: ChaCha8Rng,
    step_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub reward: T,
    pub state: StateId,
    pub theta_index: usize,
    pub theta: Vec<T>,
}

impl EnvState {
    pub fn init<T: Scalar>(
        spec: &EnvironmentSpec<T>,
        seed: u64,
        initial: InitialState,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current_state = match initial {
            InitialState::Fixed(s) => {
                if s.0 >= spec.num_states() {
                    return Err(Error::config(format!(
                        "initial state {} out of range (|S| = {})",
                        s.0,
                        spec.num_states()
                    )));
                }
                s
            }
            InitialState::Stationary => {
                let mu = oracle::stationary_distribution(spec.transition())?;
                StateId(sample_index(&mu, &mut rng))
            }
        };
        Ok(Self {
            current_state,
            rng,
            step_count: 0,
        })
    }

    pub fn current_state(&self) -> StateId {
        self.current_state
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Advances the chain, draws the coefficient vector at the new state and
    /// returns the reward. Exactly two uniforms are consumed per step, so two
    /// trajectories with the same seed see the same state sequence whatever
    /// arms are pulled.
    pub fn step<T: Scalar>(
        &mut self,
        spec: &EnvironmentSpec<T>,
        arm: ArmId,
        action: &[T],
    ) -> Result<StepOutcome<T>> {
        if arm.0 >= spec.num_arms() {
            return Err(Error::contract(format!(
                "arm {} out of range (|B| = {})",
                arm.0,
                spec.num_arms()
            )));
        }
        if !spec.actions().contains(action, T::lit(ACTION_TOL)) {
            return Err(Error::contract(format!(
                "action {action:?} lies outside the action polytope"
            )));
        }
        let next = StateId(sample_index(
            spec.transition().row(self.current_state),
            &mut self.rng,
        ));
        let set = spec.thetas().get(arm, next);
        let theta_index = sample_index(&set.probs, &mut self.rng);
        let theta = set.vectors[theta_index].clone();
        let reward = dot(action, &theta);
        self.current_state = next;
        self.step_count += 1;
        Ok(StepOutcome {
            reward,
            state: next,
            theta_index,
            theta,
        })
    }
}

/// Inverse-CDF draw from a finite distribution; consumes one uniform.
pub(crate) fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}
