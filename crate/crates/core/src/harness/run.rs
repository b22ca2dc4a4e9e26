//! Monte Carlo execution.
//!
//! Every (realization, trajectory, agent) triple is an independent run. All
//! agents of a trajectory share the environment seed, hence the same hidden
//! state sequence, and all trajectories of a realization share the sampled
//! coefficient vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, SetupSource};
use super::seed::{child_seed, ENV_TAG, THETA_TAG};
use crate::agent::{
    AgentKind, EventSink, FlatUcrl, Hucrl, JointConf, Learner, NullSink, StepEvent,
};
use crate::env::{EnvState, EnvironmentSpec, InitialState, StateId};
use crate::error::{Error, Result};
use crate::geometry::PerturbationSchedule;
use crate::inference::ConfidenceParams;
use crate::oracle::{self, ModelConstants, OptimalPolicy};

/// `{1, 2, 4, ...} <= horizon`, `horizon` itself and any extra points, sorted.
pub fn checkpoint_schedule(horizon: u64, extra: &[u64]) -> Vec<u64> {
    let mut points: Vec<u64> = std::iter::successors(Some(1u64), |&t| t.checked_mul(2))
        .take_while(|&t| t <= horizon)
        .collect();
    points.push(horizon);
    points.extend(extra.iter().copied().filter(|&t| t >= 1 && t <= horizon));
    points.sort_unstable();
    points.dedup();
    points
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub regret: f64,
    pub reward: f64,
    pub rounds: usize,
    pub recovery_failures: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub realization: usize,
    pub trajectory: usize,
    pub agent: AgentKind,
    pub env_seed: u64,
    pub agent_seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Steps whose recovered state differs from the hidden one.
    pub wrong_states: u64,
    /// Steps on which recovery reported a diagnostic.
    pub diagnostic_events: u64,
    pub round_starts: Vec<u64>,
}

impl RunTrace {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least one checkpoint")
    }

    pub fn regret_at(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.t == t).map(|c| c.regret)
    }
}

/// One sampled model together with its exact quantities.
#[derive(Debug, Clone)]
pub struct Realization {
    pub index: usize,
    pub theta_seed: u64,
    pub spec: EnvironmentSpec<f64>,
    pub mu: Vec<f64>,
    pub policy: OptimalPolicy<f64>,
    pub rho_star: f64,
    pub constants: ModelConstants<f64>,
    pub schedule: PerturbationSchedule<f64>,
}

impl Realization {
    pub fn new(
        index: usize,
        theta_seed: u64,
        spec: EnvironmentSpec<f64>,
        schedule: PerturbationSchedule<f64>,
    ) -> Result<Self> {
        let mu = oracle::stationary_distribution(spec.transition())?;
        let policy = oracle::optimal_policy(&spec)?;
        let rho_star = oracle::average_reward(&spec, &policy.as_policy())?;
        let constants = oracle::compute_constants(&spec)?;
        Ok(Self {
            index,
            theta_seed,
            spec,
            mu,
            policy,
            rho_star,
            constants,
            schedule,
        })
    }
}

pub fn realize(cfg: &ExperimentConfig, source: &SetupSource, index: usize) -> Result<Realization> {
    let theta_seed = child_seed(cfg.seed, index as u32, 0, THETA_TAG);
    let mut rng = ChaCha8Rng::seed_from_u64(theta_seed);
    let spec = source.realize(&mut rng)?;
    let schedule = cfg.schedule_for(&spec)?;
    Realization::new(index, theta_seed, spec, schedule)
}

/// `None` for the known-state oracle, which is driven by the runner.
pub fn build_learner(
    kind: AgentKind,
    real: &Realization,
    params: ConfidenceParams,
) -> Result<Option<Box<dyn Learner<f64>>>> {
    let knowledge = real.spec.knowledge();
    Ok(match kind {
        AgentKind::Hucrl => Some(Box::new(Hucrl::new(knowledge, params, real.schedule)?)),
        AgentKind::Joint => Some(Box::new(JointConf::new(knowledge, params, real.schedule)?)),
        AgentKind::FlatUcrl => Some(Box::new(FlatUcrl::new(knowledge, params, real.schedule)?)),
        AgentKind::OracleKnownState => None,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RunSettings<'a> {
    pub horizon: u64,
    pub checkpoints: &'a [u64],
    pub params: ConfidenceParams,
    pub initial: InitialState,
}

/// Runs one agent for `settings.horizon` steps.
pub fn run_single(
    real: &Realization,
    kind: AgentKind,
    trajectory: usize,
    env_seed: u64,
    agent_seed: u64,
    settings: &RunSettings<'_>,
    sink: &mut dyn EventSink<f64>,
) -> Result<RunTrace> {
    let fail = |e: Error| Error::Run {
        seed: agent_seed,
        message: format!(
            "{kind} realization {} trajectory {trajectory} (env seed {env_seed:#018x}): {e}",
            real.index
        ),
    };
    let mut learner = build_learner(kind, real, settings.params).map_err(fail)?;
    let mut env = EnvState::init(&real.spec, env_seed, settings.initial).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(agent_seed);
    let mut cumulative = 0.0;
    let mut wrong_states = 0u64;
    let mut diagnostic_events = 0u64;
    let mut failures = 0u64;
    let mut checkpoints = Vec::with_capacity(settings.checkpoints.len());
    let mut next = 0;
    for t in 1..=settings.horizon {
        let (arm, action) = match learner.as_mut() {
            Some(l) => l.act(&mut rng),
            None => {
                let c = real.policy.choice(env.current_state().0);
                (c.arm, c.action.clone())
            }
        };
        let out = env.step(&real.spec, arm, &action).map_err(fail)?;
        cumulative += out.reward;
        let (s_hat, diagnostic, round_index) = match learner.as_mut() {
            Some(l) => {
                let obs = l.observe(arm, &action, out.reward);
                let wrong = obs.recovery.state != out.state;
                let flagged = obs.recovery.diagnostic.is_some();
                wrong_states += wrong as u64;
                diagnostic_events += flagged as u64;
                failures += (wrong || flagged) as u64;
                (obs.recovery.state, obs.recovery.diagnostic, l.round_index())
            }
            None => (out.state, None, 0),
        };
        if sink.enabled() {
            sink.record(&StepEvent {
                agent: kind,
                t,
                arm,
                action,
                reward: out.reward,
                s_hat,
                round_index,
                diagnostic,
            });
        }
        if next < settings.checkpoints.len() && settings.checkpoints[next] == t {
            checkpoints.push(Checkpoint {
                t,
                regret: t as f64 * real.rho_star - cumulative,
                reward: cumulative,
                rounds: round_index + 1,
                recovery_failures: failures,
            });
            next += 1;
        }
    }
    let round_starts = learner
        .as_ref()
        .map(|l| l.round_starts().to_vec())
        .unwrap_or_else(|| vec![0]);
    Ok(RunTrace {
        realization: real.index,
        trajectory,
        agent: kind,
        env_seed,
        agent_seed,
        checkpoints,
        wrong_states,
        diagnostic_events,
        round_starts,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub checkpoints: Vec<u64>,
    pub realizations: Vec<Realization>,
    /// Sorted by (realization, trajectory, position of the agent in the
    /// configuration).
    pub runs: Vec<RunTrace>,
}

impl ExperimentResult {
    pub fn runs_of(&self, agent: AgentKind) -> impl Iterator<Item = &RunTrace> {
        self.runs.iter().filter(move |r| r.agent == agent)
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Runs every (realization, trajectory, agent) triple on `jobs` threads. The
/// result does not depend on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    let source = cfg.validate()?;
    let params = cfg.confidence()?;
    let checkpoints = checkpoint_schedule(cfg.horizon, &cfg.extra_checkpoints);
    let initial = match cfg.initial_state {
        Some(s) => InitialState::Fixed(StateId(s)),
        None => InitialState::Stationary,
    };
    let settings = RunSettings {
        horizon: cfg.horizon,
        checkpoints: &checkpoints,
        params,
        initial,
    };
    let pool = pool(jobs)?;
    let realizations: Vec<Realization> = pool.install(|| {
        (0..cfg.theta_realizations)
            .into_par_iter()
            .map(|r| realize(cfg, &source, r))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()
    })?;
    let keys: Vec<(usize, usize, AgentKind)> = (0..cfg.theta_realizations)
        .flat_map(|r| {
            (0..cfg.trajectories_per_realization)
                .flat_map(move |j| cfg.agents.iter().map(move |&a| (r, j, a)))
        })
        .collect();
    let outcomes: Vec<Result<RunTrace>> = pool.install(|| {
        keys.par_iter()
            .map(|&(r, j, agent)| {
                let env_seed = child_seed(cfg.seed, r as u32, j as u32, ENV_TAG);
                let agent_seed = child_seed(cfg.seed, r as u32, j as u32, agent.seed_tag() as u8);
                run_single(
                    &realizations[r],
                    agent,
                    j,
                    env_seed,
                    agent_seed,
                    &settings,
                    &mut NullSink,
                )
            })
            .collect()
    });
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        checkpoints,
        realizations,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_checkpoints() {
        let c = checkpoint_schedule(1000, &[]);
        assert_eq!(c, vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000]);
        assert_eq!(checkpoint_schedule(1, &[]), vec![1]);
        assert_eq!(checkpoint_schedule(8, &[3, 8, 20]), vec![1, 2, 3, 4, 8]);
    }

    fn small_config(agents: Vec<AgentKind>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("1a");
        cfg.horizon = 2000;
        cfg.theta_realizations = 2;
        cfg.trajectories_per_realization = 2;
        cfg.agents = agents;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn result_independent_of_thread_count() {
        let cfg = small_config(AgentKind::ALL.to_vec());
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 4).unwrap();
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.runs.len(), 2 * 2 * 4);
        assert_eq!(a.runs[0].checkpoints.len(), 12);
    }

    #[test]
    fn agents_share_hidden_states() {
        let cfg = small_config(vec![AgentKind::Hucrl, AgentKind::FlatUcrl]);
        let source = cfg.validate().unwrap();
        let real = realize(&cfg, &source, 0).unwrap();
        let cps = checkpoint_schedule(300, &[]);
        let settings = RunSettings {
            horizon: 300,
            checkpoints: &cps,
            params: ConfidenceParams::default(),
            initial: InitialState::Stationary,
        };
        let mut states = Vec::new();
        for agent in [
            AgentKind::Hucrl,
            AgentKind::FlatUcrl,
            AgentKind::OracleKnownState,
        ] {
            let mut events: Vec<StepEvent<f64>> = Vec::new();
            let trace =
                run_single(&real, agent, 0, 5, agent.seed_tag(), &settings, &mut events).unwrap();
            assert_eq!(trace.wrong_states, 0);
            states.push(events.iter().map(|e| e.s_hat).collect::<Vec<_>>());
        }
        assert_eq!(states[0], states[2]);
        assert_eq!(states[1], states[2]);
    }

    #[test]
    fn oracle_agent_regret_is_small() {
        let cfg = small_config(vec![AgentKind::OracleKnownState]);
        let res = run_experiment(&cfg, 2).unwrap();
        for run in &res.runs {
            let real = &res.realizations[run.realization];
            let bound = 10.0 * real.constants.t_m * real.constants.r_max;
            let regret = run.final_checkpoint().regret;
            assert!(regret.abs() < bound + 4.0 * real.constants.r_max * 2000f64.sqrt());
            assert_eq!(run.round_starts, vec![0]);
        }
    }
}
