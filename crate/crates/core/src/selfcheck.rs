//! Independent reference implementations and the property suites behind the
//! `selftest` command.
//!
//! The references are deliberately naive: the optimistic maximization is
//! solved by enumerating every vertex of the box-simplex polytope, the
//! planner by scanning every (arm, vertex) pair with that enumeration, and
//! the stationary law by repeated matrix multiplication.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::hucrl::{compute_policy, policy_values};
use crate::agent::{optimistic_expectation, AgentKind, NullSink, OptimisticBox};
use crate::env::{sample_index, ArmId, EnvironmentSpec, InitialState, ModelKnowledge, StateId};
use crate::error::Result;
use crate::geometry::Polytope;
use crate::harness::{
    checkpoint_schedule, child_seed, realize, run_single, ExperimentConfig, RunSettings,
};
use crate::inference::{ConfidenceParams, CountTables};
use crate::scalar::{dot, Scalar};

/// Every vertex of `{p : max(0, c_i - w) <= p_i <= min(1, c_i + w), sum p = 1}`.
///
/// A vertex has at most one coordinate strictly inside its bounds; every
/// other coordinate sits at a bound.
pub fn box_simplex_vertices<T: Scalar>(center: &[T], width: T) -> Vec<Vec<T>> {
    let n = center.len();
    let lo: Vec<T> = center.iter().map(|&c| (c - width).max(T::zero())).collect();
    let hi: Vec<T> = center.iter().map(|&c| (c + width).min(T::one())).collect();
    let tol = T::lit(1e-12);
    let mut out = Vec::new();
    for free in 0..n {
        for mask in 0..1usize << (n - 1) {
            let mut p = vec![T::zero(); n];
            let mut k = 0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                p[i] = if mask >> k & 1 == 1 { hi[i] } else { lo[i] };
                k += 1;
            }
            let rest: T = p.iter().copied().sum();
            let x = T::one() - rest;
            if x >= lo[free] - tol && x <= hi[free] + tol {
                p[free] = x;
                out.push(p);
            }
        }
    }
    out
}

pub fn brute_force_optimistic<T: Scalar>(center: &[T], width: T, values: &[T]) -> T {
    box_simplex_vertices(center, width)
        .iter()
        .map(|p| p.iter().zip(values).map(|(&a, &b)| a * b).sum::<T>())
        .fold(T::neg_infinity(), T::max)
}

/// Reference value table `[prev][arm][vertex]` for the optimistic learner.
pub fn brute_force_policy_values<T: Scalar>(
    counts: &CountTables,
    knowledge: &ModelKnowledge<T>,
    vertices: &[Vec<T>],
    params: &ConfidenceParams,
) -> Vec<Vec<Vec<T>>> {
    let n = knowledge.num_states;
    let mut table = vec![vec![vec![T::zero(); vertices.len()]; knowledge.num_arms]; n];
    for (prev, per_arm) in table.iter_mut().enumerate() {
        let row: Vec<T> = counts.est_transition_row(StateId(prev));
        for (b, per_vertex) in per_arm.iter_mut().enumerate() {
            for (v, slot) in per_vertex.iter_mut().enumerate() {
                let mut total = T::zero();
                for (s, &p) in row.iter().enumerate() {
                    let values: Vec<T> = knowledge.theta_sets[b][s]
                        .iter()
                        .map(|th| dot(&vertices[v], th))
                        .collect();
                    let center = counts.est_theta(ArmId(b), StateId(s));
                    let width = counts.conf_theta(params, ArmId(b), StateId(s));
                    total = total + p * brute_force_optimistic(&center, width, &values);
                }
                *slot = total;
            }
        }
    }
    table
}

/// `(arm, vertex)` pairs within `tol * max(1, |best|)` of the best value.
pub fn argmax_set<T: Scalar>(per_arm: &[Vec<T>], tol: T) -> Vec<(usize, usize)> {
    let best = per_arm
        .iter()
        .flatten()
        .fold(T::neg_infinity(), |m, &x| m.max(x));
    let slack = tol * best.abs().max(T::one());
    let mut set = Vec::new();
    for (b, per_vertex) in per_arm.iter().enumerate() {
        for (v, &x) in per_vertex.iter().enumerate() {
            if best - x <= slack {
                set.push((b, v));
            }
        }
    }
    set
}

/// Rows of `P^k` by repeated multiplication.
pub fn matrix_power<T: Scalar>(p: &[Vec<T>], k: usize) -> Vec<Vec<T>> {
    let n = p.len();
    let mut acc: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    for _ in 0..k {
        acc = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|m| acc[i][m] * p[m][j]).sum())
                    .collect()
            })
            .collect();
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    // mixing exact zeros in exercises the clamping at 0
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut p = vec![0.0; k];
        p[rng.random_range(0..k)] = 1.0;
        return p;
    }
    raw.iter().map(|x| x / total).collect()
}

/// Greedy optimistic maximizer against corner enumeration.
pub fn lp_suite(cases: u64, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let k = rng.random_range(1..=5);
        let center = random_simplex(&mut rng, k);
        let width = match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        let values: Vec<f64> = (0..k)
            .map(|_| {
                if rng.random_bool(0.2) {
                    rng.random_range(-3..=3) as f64
                } else {
                    rng.random_range(-10.0..10.0)
                }
            })
            .collect();
        let (p, v) = optimistic_expectation(&OptimisticBox::new(&center, width, &values));
        let reference = brute_force_optimistic(&center, width, &values);
        let err = (v - reference).abs();
        worst = worst.max(err);
        let feasible = (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12
            && p.iter()
                .zip(&center)
                .all(|(&pi, &c)| pi >= -1e-15 && (pi - c).abs() <= width + 1e-12);
        if err > 1e-10 || !feasible {
            failures += 1;
        }
    }
    SuiteReport {
        name: "lp",
        cases,
        failures,
        detail: format!("max |value - reference| = {worst:.3e}"),
    }
}

/// Random small instance for the planner check: returns the knowledge, the
/// vertex list and counts filled with random transitions.
pub fn random_planning_instance(
    rng: &mut ChaCha8Rng,
) -> (ModelKnowledge<f64>, Vec<Vec<f64>>, CountTables) {
    let n = rng.random_range(1..=3);
    let arms = rng.random_range(1..=3);
    let dim = rng.random_range(1..=3);
    let actions = Polytope::hypercube(
        (0..dim).map(|_| rng.random_range(-2..=0) as f64).collect(),
        (0..dim).map(|_| rng.random_range(1..=2) as f64).collect(),
    )
    .expect("valid box");
    let theta_sets: Vec<Vec<Vec<Vec<f64>>>> = (0..arms)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let k = rng.random_range(1..=3);
                    (0..k)
                        .map(|_| (0..dim).map(|_| rng.random_range(-5..=5) as f64).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let sizes: Vec<Vec<usize>> = theta_sets
        .iter()
        .map(|a| a.iter().map(Vec::len).collect())
        .collect();
    let mut counts = CountTables::new(n, &sizes);
    let steps = match rng.random_range(0..4) {
        0 => 0,
        1 => rng.random_range(1..10),
        _ => rng.random_range(10..400),
    };
    let mut prev = StateId(0);
    for step in 0..steps {
        if step == 0 {
            counts.tick();
            continue;
        }
        let next = StateId(rng.random_range(0..n));
        let arm = ArmId(rng.random_range(0..arms));
        let idx = rng.random_range(0..sizes[arm.0][next.0]);
        counts
            .record_transition(prev, next, arm, idx)
            .expect("indices in range");
        prev = next;
    }
    let vertices = actions.vertices().expect("small box").to_vec();
    let knowledge = ModelKnowledge {
        num_states: n,
        num_arms: arms,
        theta_sets,
        actions,
    };
    (knowledge, vertices, counts)
}

/// Planner against exhaustive (arm, vertex, box corner) enumeration:
/// argmax sets must agree and the chosen pair must belong to them.
pub fn policy_suite(cases: u64, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ConfidenceParams::default();
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (knowledge, vertices, counts) = random_planning_instance(&mut rng);
        let fast = policy_values(&counts, &knowledge, &vertices, &params);
        let slow = brute_force_policy_values(&counts, &knowledge, &vertices, &params);
        let policy = compute_policy(&counts, &knowledge, &vertices, &params);
        let mut ok = true;
        for s in 0..knowledge.num_states {
            for (fa, sa) in fast[s].iter().zip(&slow[s]) {
                for (x, y) in fa.iter().zip(sa) {
                    worst = worst.max((x - y).abs());
                }
            }
            let a = argmax_set(&fast[s], 1e-9);
            let b = argmax_set(&slow[s], 1e-9);
            ok &= a == b && b.contains(&(policy.arms[s].0, policy.vertex_indices[s]));
        }
        failures += (!ok) as u64;
    }
    SuiteReport {
        name: "policy",
        cases,
        failures,
        detail: format!("max |value - reference| = {worst:.3e}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryStats {
    pub runs: u64,
    pub steps: u64,
    pub wrong_states: u64,
    pub diagnostic_events: u64,
}

/// Runs `agent` on independent realizations of a preset and counts steps
/// where the recovered state is wrong or flagged.
pub fn recovery_stats(
    preset: &str,
    agent: AgentKind,
    runs: usize,
    horizon: u64,
    seed: u64,
) -> Result<RecoveryStats> {
    let mut cfg = ExperimentConfig::preset(preset);
    cfg.seed = seed;
    cfg.horizon = horizon;
    let source = cfg.validate()?;
    let checkpoints = checkpoint_schedule(horizon, &[]);
    let settings = RunSettings {
        horizon,
        checkpoints: &checkpoints,
        params: cfg.confidence()?,
        initial: InitialState::Stationary,
    };
    let traces: Vec<Result<_>> = {
        use rayon::prelude::*;
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let real = realize(&cfg, &source, r)?;
                let env_seed = child_seed(seed, r as u32, 0, crate::harness::seed::ENV_TAG);
                let agent_seed = child_seed(seed, r as u32, 0, agent.seed_tag() as u8);
                run_single(
                    &real,
                    agent,
                    0,
                    env_seed,
                    agent_seed,
                    &settings,
                    &mut NullSink,
                )
            })
            .collect()
    };
    let mut stats = RecoveryStats {
        runs: runs as u64,
        steps: runs as u64 * horizon,
        wrong_states: 0,
        diagnostic_events: 0,
    };
    for t in traces {
        let t = t?;
        stats.wrong_states += t.wrong_states;
        stats.diagnostic_events += t.diagnostic_events;
    }
    Ok(stats)
}

pub fn recovery_suite(preset: &str, runs: usize, horizon: u64, seed: u64) -> Result<SuiteReport> {
    let s = recovery_stats(preset, AgentKind::Hucrl, runs, horizon, seed)?;
    Ok(SuiteReport {
        name: "recovery",
        cases: s.steps,
        failures: s.wrong_states + s.diagnostic_events,
        detail: format!(
            "preset {preset}: {} wrong states, {} diagnostics over {} runs x {horizon} steps",
            s.wrong_states, s.diagnostic_events, s.runs
        ),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageStats {
    pub trials: u64,
    /// Largest per-entry frequency of `|P_hat_S - P_S| > conf_s`.
    pub state_frequency: f64,
    pub state_bound: f64,
    /// Largest per-entry frequency of `|P_hat_Theta - P_Theta| > conf_theta`.
    pub theta_frequency: f64,
    pub theta_bound: f64,
}

impl CoverageStats {
    fn allowance(bound: f64, trials: u64) -> f64 {
        bound + 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt()
    }

    pub fn state_ok(&self) -> bool {
        self.state_frequency <= Self::allowance(self.state_bound, self.trials)
    }

    pub fn theta_ok(&self) -> bool {
        self.theta_frequency <= Self::allowance(self.theta_bound, self.trials)
    }
}

/// Simulates the chain of `spec` for `t - 1` transitions per trial with arms
/// drawn uniformly, feeding the true states to fresh counters, and records
/// how often each estimated entry leaves its confidence interval at time `t`.
pub fn coverage_stats(
    spec: &EnvironmentSpec<f64>,
    t: u64,
    trials: u64,
    params: &ConfidenceParams,
    seed: u64,
) -> CoverageStats {
    use rayon::prelude::*;
    let n = spec.num_states();
    let arms = spec.num_arms();
    let sizes: Vec<Vec<usize>> = spec
        .thetas()
        .sets()
        .iter()
        .map(|a| a.iter().map(|s| s.len()).collect())
        .collect();
    let mu = crate::oracle::stationary_distribution(spec.transition()).expect("valid chain");
    let theta_cells: usize = sizes.iter().flatten().sum();
    let (state_hits, theta_hits) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 0, trial as u32, 0x40));
            let mut counts = CountTables::new(n, &sizes);
            let mut state = StateId(sample_index(&mu, &mut rng));
            counts.tick();
            for _ in 1..t {
                let arm = ArmId(rng.random_range(0..arms));
                let next = StateId(sample_index(spec.transition().row(state), &mut rng));
                let set = spec.thetas().get(arm, next);
                let idx = sample_index(&set.probs, &mut rng);
                counts
                    .record_transition(state, next, arm, idx)
                    .expect("in range");
                state = next;
            }
            let mut sh = vec![0u64; n * n];
            for from in 0..n {
                let est: Vec<f64> = counts.est_transition_row(StateId(from));
                let conf: f64 = counts.conf_s(params, StateId(from));
                for to in 0..n {
                    if (est[to] - spec.transition().rows()[from][to]).abs() > conf {
                        sh[from * n + to] += 1;
                    }
                }
            }
            let mut th = vec![0u64; theta_cells];
            let mut k = 0;
            for b in 0..arms {
                for s in 0..n {
                    let est: Vec<f64> = counts.est_theta(ArmId(b), StateId(s));
                    let conf: f64 = counts.conf_theta(params, ArmId(b), StateId(s));
                    let truth = &spec.thetas().get(ArmId(b), StateId(s)).probs;
                    for (e, p) in est.iter().zip(truth) {
                        if (e - p).abs() > conf {
                            th[k] += 1;
                        }
                        k += 1;
                    }
                }
            }
            (sh, th)
        })
        .reduce(
            || (vec![0; n * n], vec![0; theta_cells]),
            |(mut a, mut b), (c, d)| {
                a.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(d).for_each(|(x, y)| *x += y);
                (a, b)
            },
        );
    let alpha = params.alpha();
    let tm1 = (t - 1) as f64;
    let max_set = sizes.iter().flatten().copied().max().unwrap_or(1);
    CoverageStats {
        trials,
        state_frequency: state_hits.iter().copied().max().unwrap_or(0) as f64 / trials as f64,
        state_bound: tm1.powf(1.0 - alpha) / (2.0 * (n * n) as f64),
        theta_frequency: theta_hits.iter().copied().max().unwrap_or(0) as f64 / trials as f64,
        theta_bound: tm1.powf(-alpha) / (2.0 * (max_set * arms * n) as f64),
    }
}

pub fn coverage_suite(t: u64, trials: u64, seed: u64) -> Result<SuiteReport> {
    let cfg = ExperimentConfig::preset("1a");
    let source = cfg.validate()?;
    let real = realize(&cfg, &source, 0)?;
    let c = coverage_stats(&real.spec, t, trials, &cfg.confidence()?, seed);
    Ok(SuiteReport {
        name: "coverage",
        cases: trials,
        failures: (!c.state_ok()) as u64 + (!c.theta_ok()) as u64,
        detail: format!(
            "t = {t}: state frequency {} (bound {:.2e}), theta frequency {} (bound {:.2e})",
            c.state_frequency, c.state_bound, c.theta_frequency, c.theta_bound
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_enumeration_of_a_full_box() {
        // width 1 covers the simplex: vertices are the unit vectors
        let v = box_simplex_vertices(&[0.2, 0.3, 0.5], 1.0);
        for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            assert!(v.iter().any(|p| p.as_slice() == e));
        }
        assert_eq!(
            brute_force_optimistic(&[0.2, 0.3, 0.5], 1.0, &[1.0, 5.0, 2.0]),
            5.0
        );
        assert_eq!(brute_force_optimistic(&[0.2, 0.8], 0.0, &[1.0, 2.0]), 1.8);
    }

    #[test]
    fn matrix_power_converges_to_stationary() {
        let p: Vec<Vec<f64>> = vec![vec![0.4, 0.6], vec![0.75, 0.25]];
        let q = matrix_power(&p, 100);
        for row in &q {
            assert!((row[0] - 5.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_suites_pass() {
        assert!(lp_suite(500, 1).passed());
        assert!(policy_suite(30, 2).passed());
    }

    #[test]
    fn argmax_set_collects_ties() {
        let t = vec![vec![1.0, 3.0], vec![3.0, 2.0]];
        assert_eq!(argmax_set(&t, 1e-12), vec![(0, 1), (1, 0)]);
    }
}
