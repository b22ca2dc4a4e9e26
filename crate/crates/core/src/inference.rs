//! Empirical counters, plug-in estimators and Hoeffding confidence lengths.
//!
//! Counts at time `t` cover the transitions observed up to time `t - 1`: the
//! very first step only advances the clock.

use crate::env::{ArmId, StateId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    alpha: f64,
}

impl ConfidenceParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 3.0) || !alpha.is_finite() {
            return Err(Error::config(format!(
                "confidence exponent alpha must satisfy alpha > 3, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self { alpha: 3.1 }
    }
}

/// `min{1, sqrt(ln(4 (t-1)^alpha * card) / (2 n))}`, and 1 when `t <= 1` or
/// `n = 0`.
#[inline]
pub fn confidence_width<T: Scalar>(t: u64, n: u64, card: f64, params: &ConfidenceParams) -> T {
    if t <= 1 || n == 0 {
        return T::one();
    }
    let log_arg = T::lit(4.0f64.ln() + params.alpha * ((t - 1) as f64).ln() + card.ln());
    let width = (log_arg / (T::lit(2.0) * T::lit(n as f64))).sqrt();
    width.min(T::one())
}

/// All counters of the optimistic learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTables {
    num_states: usize,
    num_arms: usize,
    /// `|Theta_{b,s}|` indexed `[b * S + s]`
    set_sizes: Vec<usize>,
    n_state: Vec<u64>,
    /// `[from * S + to]`
    n_trans: Vec<u64>,
    /// `[b * S + s]`
    n_arm_state: Vec<u64>,
    /// `[b * S + s][theta]`
    n_theta: Vec<Vec<u64>>,
    t: u64,
}

impl CountTables {
    /// `set_sizes[b][s] = |Theta_{b,s}|`.
    pub fn new(num_states: usize, set_sizes: &[Vec<usize>]) -> Self {
        let num_arms = set_sizes.len();
        let flat: Vec<usize> = set_sizes.iter().flatten().copied().collect();
        assert_eq!(
            flat.len(),
            num_arms * num_states,
            "set_sizes must be [arm][state]"
        );
        Self {
            num_states,
            num_arms,
            n_theta: flat.iter().map(|&k| vec![0; k]).collect(),
            set_sizes: flat,
            n_state: vec![0; num_states],
            n_trans: vec![0; num_states * num_states],
            n_arm_state: vec![0; num_arms * num_states],
            t: 0,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    #[inline]
    fn cell(&self, b: ArmId, s: StateId) -> usize {
        b.0 * self.num_states + s.0
    }

    pub fn set_size(&self, b: ArmId, s: StateId) -> usize {
        self.set_sizes[self.cell(b, s)]
    }

    pub fn n_state(&self, s: StateId) -> u64 {
        self.n_state[s.0]
    }

    pub fn n_trans(&self, from: StateId, to: StateId) -> u64 {
        self.n_trans[from.0 * self.num_states + to.0]
    }

    pub fn n_arm_state(&self, b: ArmId, s: StateId) -> u64 {
        self.n_arm_state[self.cell(b, s)]
    }

    pub fn n_theta(&self, b: ArmId, s: StateId) -> &[u64] {
        &self.n_theta[self.cell(b, s)]
    }

    /// Advances the clock without recording anything (the first step).
    pub fn tick(&mut self) {
        self.t += 1;
    }

    pub fn record_transition(
        &mut self,
        s_prev: StateId,
        s_next: StateId,
        arm: ArmId,
        theta_index: usize,
    ) -> Result<()> {
        if self.t < 1 {
            return Err(Error::contract(
                "record_transition called at t = 0; use tick",
            ));
        }
        if s_prev.0 >= self.num_states || s_next.0 >= self.num_states {
            return Err(Error::contract(format!(
                "state index out of range ({} or {} >= {})",
                s_prev.0, s_next.0, self.num_states
            )));
        }
        if arm.0 >= self.num_arms {
            return Err(Error::contract(format!("arm {} out of range", arm.0)));
        }
        let cell = self.cell(arm, s_next);
        if theta_index >= self.set_sizes[cell] {
            return Err(Error::contract(format!(
                "theta index {theta_index} out of range for (arm {}, state {}) with {} vectors",
                arm.0, s_next.0, self.set_sizes[cell]
            )));
        }
        self.n_state[s_prev.0] += 1;
        self.n_trans[s_prev.0 * self.num_states + s_next.0] += 1;
        self.n_arm_state[cell] += 1;
        self.n_theta[cell][theta_index] += 1;
        self.t += 1;
        Ok(())
    }

    /// Row-stochastic estimate of the transition matrix; rows without data
    /// are uniform.
    pub fn est_transition<T: Scalar>(&self) -> Vec<Vec<T>> {
        (0..self.num_states)
            .map(|s| self.est_transition_row(StateId(s)))
            .collect()
    }

    pub fn est_transition_row<T: Scalar>(&self, from: StateId) -> Vec<T> {
        let n = self.num_states;
        let total = self.n_state[from.0];
        if total == 0 {
            return vec![T::one() / T::from_usize_lossy(n); n];
        }
        let denom = T::lit(total as f64);
        self.n_trans[from.0 * n..(from.0 + 1) * n]
            .iter()
            .map(|&c| T::lit(c as f64) / denom)
            .collect()
    }

    pub fn est_theta<T: Scalar>(&self, b: ArmId, s: StateId) -> Vec<T> {
        let cell = self.cell(b, s);
        let counts = &self.n_theta[cell];
        let total = self.n_arm_state[cell];
        if total == 0 {
            return vec![T::one() / T::from_usize_lossy(counts.len()); counts.len()];
        }
        let denom = T::lit(total as f64);
        counts.iter().map(|&c| T::lit(c as f64) / denom).collect()
    }

    pub fn conf_s<T: Scalar>(&self, params: &ConfidenceParams, s: StateId) -> T {
        let card = (self.num_states * self.num_states) as f64;
        confidence_width(self.t, self.n_state[s.0], card, params)
    }

    pub fn conf_theta<T: Scalar>(&self, params: &ConfidenceParams, b: ArmId, s: StateId) -> T {
        let cell = self.cell(b, s);
        let card = (self.set_sizes[cell] * self.num_arms * self.num_states) as f64;
        confidence_width(self.t, self.n_arm_state[cell], card, params)
    }

    /// Checks the three marginal identities.
    pub fn is_consistent(&self) -> bool {
        let n = self.num_states;
        let rows_ok =
            (0..n).all(|s| self.n_trans[s * n..(s + 1) * n].iter().sum::<u64>() == self.n_state[s]);
        let theta_ok = self
            .n_theta
            .iter()
            .zip(&self.n_arm_state)
            .all(|(c, &total)| c.iter().sum::<u64>() == total);
        let total_ok = self.n_state.iter().sum::<u64>() == self.t.saturating_sub(1);
        rows_ok && theta_ok && total_ok
    }
}
