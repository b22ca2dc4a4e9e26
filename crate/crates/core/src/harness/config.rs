//! Experiment configuration, read from TOML.
//!
//! ```toml
//! horizon = 100000
//! theta_realizations = 20
//! trajectories_per_realization = 5
//! agents = ["hucrl", "joint", "flat_ucrl"]
//! seed = 42
//! alpha = 3.1
//! output = "results"
//!
//! [perturbation]
//! epsilon = 0.5
//! alpha_eps = 1.5
//! gamma = 1.0
//!
//! [setup]
//! preset = "1a"
//! ```

use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::presets::{load_preset, RandomRecipe, SetupRecipe};
use crate::agent::AgentKind;
use crate::env::{EnvironmentSpec, ThetaFamily, ThetaSet, TransitionMatrix};
use crate::error::{Error, Result};
use crate::geometry::{PerturbationSchedule, Polytope};
use crate::inference::ConfidenceParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolytopeConfig {
    Hypercube { lower: Vec<f64>, upper: Vec<f64> },
    Vertices { points: Vec<Vec<f64>> },
}

impl PolytopeConfig {
    pub fn build(&self) -> Result<Polytope<f64>> {
        match self {
            PolytopeConfig::Hypercube { lower, upper } => {
                Polytope::hypercube(lower.clone(), upper.clone())
            }
            PolytopeConfig::Vertices { points } => Polytope::from_vertices(points.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSetConfig {
    pub vectors: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

/// A fully specified model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSetup {
    pub transition: Vec<Vec<f64>>,
    /// `[arm][state]`
    pub thetas: Vec<Vec<ThetaSetConfig>>,
    pub actions: PolytopeConfig,
}

impl ExplicitSetup {
    pub fn build(&self) -> Result<EnvironmentSpec<f64>> {
        let transition = TransitionMatrix::new(self.transition.clone())?;
        let actions = self.actions.build()?;
        let sets = self
            .thetas
            .iter()
            .map(|per_state| {
                per_state
                    .iter()
                    .map(|s| ThetaSet {
                        vectors: s.vectors.clone(),
                        probs: s.probs.clone(),
                    })
                    .collect()
            })
            .collect();
        let thetas = ThetaFamily::new(sets, transition.num_states(), actions.dim())?;
        EnvironmentSpec::new(transition, thetas, actions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupConfig {
    Preset(String),
    Explicit(ExplicitSetup),
    Random(RandomRecipe),
}

/// A setup ready to produce one model per realization.
#[derive(Debug, Clone)]
pub enum SetupSource {
    Fixed(EnvironmentSpec<f64>),
    Recipe(SetupRecipe),
    Random(RandomRecipe),
}

impl SetupConfig {
    pub fn resolve(&self) -> Result<SetupSource> {
        Ok(match self {
            SetupConfig::Preset(name) => SetupSource::Recipe(load_preset(name)?),
            SetupConfig::Explicit(e) => SetupSource::Fixed(e.build()?),
            SetupConfig::Random(r) => {
                r.validate()?;
                SetupSource::Random(r.clone())
            }
        })
    }
}

impl SetupSource {
    pub fn realize(&self, rng: &mut ChaCha8Rng) -> Result<EnvironmentSpec<f64>> {
        match self {
            SetupSource::Fixed(spec) => Ok(spec.clone()),
            SetupSource::Recipe(r) => r.realize(rng),
            SetupSource::Random(r) => r.recipe(rng)?.realize(rng),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SetupSource::Fixed(spec) => spec.dim(),
            SetupSource::Recipe(r) => r.actions.dim(),
            SetupSource::Random(r) => r.dim,
        }
    }

    pub fn actions_enumerable(&self) -> bool {
        match self {
            SetupSource::Fixed(spec) => spec.actions().vertices().is_ok(),
            SetupSource::Recipe(r) => r.actions.vertices().is_ok(),
            SetupSource::Random(r) => r.dim <= crate::geometry::MAX_ENUMERABLE_DIM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alpha_eps")]
    pub alpha_eps: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            alpha_eps: default_alpha_eps(),
            gamma: default_gamma(),
        }
    }
}

fn default_epsilon() -> f64 {
    0.5
}
fn default_alpha_eps() -> f64 {
    1.5
}
fn default_gamma() -> f64 {
    1.0
}
fn default_horizon() -> u64 {
    100_000
}
fn default_realizations() -> usize {
    20
}
fn default_trajectories() -> usize {
    5
}
fn default_agents() -> Vec<AgentKind> {
    vec![AgentKind::Hucrl, AgentKind::Joint, AgentKind::FlatUcrl]
}
fn default_alpha() -> f64 {
    3.1
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_realizations")]
    pub theta_realizations: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories_per_realization: usize,
    #[serde(default = "default_agents")]
    pub agents: Vec<AgentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Checkpoints recorded in addition to the powers of two and `horizon`.
    #[serde(default)]
    pub extra_checkpoints: Vec<u64>,
    /// Fixed initial hidden state; drawn from the stationary law if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    pub setup: SetupConfig,
}

impl ExperimentConfig {
    /// Desk-scale defaults on a named preset.
    pub fn preset(name: &str) -> Self {
        Self {
            horizon: default_horizon(),
            theta_realizations: default_realizations(),
            trajectories_per_realization: default_trajectories(),
            agents: default_agents(),
            seed: 0,
            alpha: default_alpha(),
            output: default_output(),
            extra_checkpoints: vec![],
            initial_state: None,
            perturbation: PerturbationConfig::default(),
            setup: SetupConfig::Preset(name.to_string()),
        }
    }

    /// Horizon and Monte Carlo sizes of the published experiments.
    pub fn with_paper_profile(mut self) -> Self {
        self.horizon = 1_000_000;
        self.theta_realizations = 100;
        self.trajectories_per_realization = 20;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn confidence(&self) -> Result<ConfidenceParams> {
        ConfidenceParams::new(self.alpha)
    }

    pub fn schedule_for(&self, spec: &EnvironmentSpec<f64>) -> Result<PerturbationSchedule<f64>> {
        let p = &self.perturbation;
        PerturbationSchedule::new(p.epsilon, p.alpha_eps, p.gamma, spec.theta_norm_max())
    }

    /// Checks every invariant that can be checked without running; returns
    /// the resolved setup.
    pub fn validate(&self) -> Result<SetupSource> {
        if self.horizon < 1 {
            return Err(Error::config("horizon must be >= 1"));
        }
        if self.theta_realizations < 1 || self.trajectories_per_realization < 1 {
            return Err(Error::config(
                "theta_realizations and trajectories_per_realization must be >= 1",
            ));
        }
        if self.theta_realizations > u32::MAX as usize
            || self.trajectories_per_realization >= super::seed::MAX_TRAJECTORIES
        {
            return Err(Error::config(
                "too many realizations or trajectories for the seed scheme",
            ));
        }
        if self.agents.is_empty() {
            return Err(Error::config("at least one agent is required"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].contains(a) {
                return Err(Error::config(format!("agent {a} listed twice")));
            }
        }
        self.confidence()?;
        let p = &self.perturbation;
        PerturbationSchedule::new(p.epsilon, p.alpha_eps, p.gamma, 1.0)?;
        let source = self.setup.resolve()?;
        let learners = self
            .agents
            .iter()
            .any(|&a| a != AgentKind::OracleKnownState);
        if learners && !source.actions_enumerable() {
            return Err(Error::config(format!(
                "learners plan over the vertex list, which is too large in dimension {}",
                source.dim()
            )));
        }
        if let SetupSource::Fixed(spec) = &source {
            if let Some(s) = self.initial_state {
                if s >= spec.num_states() {
                    return Err(Error::config(format!("initial_state {s} out of range")));
                }
            }
        }
        Ok(source)
    }
}
