//! The four numerical setups and random-instance generation.
//!
//! A preset fixes the chain, the coefficient distributions, the dimension and
//! an integer grid; the coefficient vectors themselves are drawn per
//! realization, uniformly on the grid, redrawing any vector that coincides
//! with one already drawn for the same arm.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvironmentSpec, ThetaFamily, ThetaSet, TransitionMatrix};
use crate::error::{Error, Result};
use crate::geometry::Polytope;

pub const PRESET_NAMES: [&str; 4] = ["1a", "1b", "2a", "2b"];

/// Draws allowed per vector before giving up on a too-small grid.
const MAX_REDRAWS: usize = 10_000;

/// Everything but the coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupRecipe {
    pub transition: Vec<Vec<f64>>,
    /// `[arm][state]`
    pub theta_probs: Vec<Vec<Vec<f64>>>,
    pub grid_lower: Vec<i64>,
    pub grid_upper: Vec<i64>,
    pub actions: Polytope<f64>,
}

fn uniform_grid(dim: usize, lo: i64, hi: i64) -> (Vec<i64>, Vec<i64>) {
    (vec![lo; dim], vec![hi; dim])
}

type PresetTable = (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>, usize, i64, i64);

/// `name` is one of [`PRESET_NAMES`]. Arms and states are 0-based here and
/// 1-based in the usual presentation of the setups.
pub fn load_preset(name: &str) -> Result<SetupRecipe> {
    let (transition, theta_probs, dim, lo, hi): PresetTable = match name {
        "1a" => (
            vec![vec![0.4, 0.6], vec![0.75, 0.25]],
            vec![
                vec![vec![0.4, 0.6], vec![0.7, 0.3]],
                vec![vec![0.7, 0.3], vec![0.5, 0.5]],
            ],
            2,
            -7,
            10,
        ),
        "1b" => (
            vec![vec![0.8, 0.2], vec![0.45, 0.55]],
            vec![
                vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                vec![vec![0.45, 0.55], vec![0.4, 0.6]],
            ],
            2,
            -10,
            15,
        ),
        "2a" => (
            vec![
                vec![0.4, 0.3, 0.3],
                vec![0.25, 0.5, 0.25],
                vec![0.3, 0.25, 0.45],
            ],
            vec![
                vec![vec![0.4, 0.6], vec![0.7, 0.3], vec![0.75, 0.25]],
                vec![vec![0.7, 0.3], vec![0.5, 0.5], vec![0.1, 0.9]],
                vec![vec![0.25, 0.75], vec![0.2, 0.8], vec![0.6, 0.4]],
                vec![vec![0.35, 0.65], vec![0.45, 0.55], vec![0.32, 0.68]],
            ],
            5,
            -7,
            10,
        ),
        "2b" => (
            vec![
                vec![0.25, 0.55, 0.2],
                vec![0.35, 0.25, 0.4],
                vec![0.2, 0.1, 0.7],
            ],
            vec![
                vec![vec![0.8, 0.2], vec![0.3, 0.7], vec![0.4, 0.6]],
                vec![vec![0.45, 0.55], vec![0.14, 0.86], vec![0.72, 0.28]],
                vec![vec![0.9, 0.1], vec![0.76, 0.24], vec![0.18, 0.82]],
                vec![vec![0.6, 0.4], vec![0.5, 0.5], vec![0.53, 0.47]],
            ],
            5,
            -10,
            15,
        ),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    let (grid_lower, grid_upper) = uniform_grid(dim, lo, hi);
    Ok(SetupRecipe {
        transition,
        theta_probs,
        grid_lower,
        grid_upper,
        actions: Polytope::unit_cube(dim)?,
    })
}

/// Shape of a randomly generated instance. Chain rows and coefficient
/// distributions are drawn with entries bounded away from zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRecipe {
    pub num_states: usize,
    pub num_arms: usize,
    pub dim: usize,
    pub set_size: usize,
    pub grid_lower: Vec<i64>,
    pub grid_upper: Vec<i64>,
}

impl RandomRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_arms == 0 || self.dim == 0 || self.set_size == 0 {
            return Err(Error::config("random setup: all sizes must be >= 1"));
        }
        if self.grid_lower.len() != self.dim || self.grid_upper.len() != self.dim {
            return Err(Error::config(format!(
                "random setup: grid bounds must have {} coordinates",
                self.dim
            )));
        }
        check_grid(
            &self.grid_lower,
            &self.grid_upper,
            self.num_states * self.set_size,
        )
    }

    pub fn recipe(&self, rng: &mut ChaCha8Rng) -> Result<SetupRecipe> {
        self.validate()?;
        let mut simplex = |k: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            // absorb rounding so the row sums to one
            let rest: f64 = p[..k - 1].iter().sum();
            p[k - 1] = 1.0 - rest;
            p
        };
        let transition = (0..self.num_states)
            .map(|_| simplex(self.num_states))
            .collect();
        let theta_probs = (0..self.num_arms)
            .map(|_| {
                (0..self.num_states)
                    .map(|_| simplex(self.set_size))
                    .collect()
            })
            .collect();
        Ok(SetupRecipe {
            transition,
            theta_probs,
            grid_lower: self.grid_lower.clone(),
            grid_upper: self.grid_upper.clone(),
            actions: Polytope::unit_cube(self.dim)?,
        })
    }
}

fn check_grid(lower: &[i64], upper: &[i64], per_arm: usize) -> Result<()> {
    let mut points: f64 = 1.0;
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if l > u {
            return Err(Error::config(format!(
                "grid coordinate {i}: lower {l} > upper {u}"
            )));
        }
        points *= (u - l + 1) as f64;
    }
    if points < per_arm as f64 {
        return Err(Error::config(format!(
            "grid has {points} points but each arm needs {per_arm} distinct vectors"
        )));
    }
    Ok(())
}

impl SetupRecipe {
    pub fn num_states(&self) -> usize {
        self.transition.len()
    }

    pub fn num_arms(&self) -> usize {
        self.theta_probs.len()
    }

    /// Draws the coefficient vectors and assembles the full model.
    pub fn realize(&self, rng: &mut ChaCha8Rng) -> Result<EnvironmentSpec<f64>> {
        let n = self.num_states();
        let per_arm: usize = self
            .theta_probs
            .iter()
            .map(|a| a.iter().map(Vec::len).sum())
            .max()
            .unwrap_or(0);
        check_grid(&self.grid_lower, &self.grid_upper, per_arm)?;
        let transition = TransitionMatrix::new(self.transition.clone())?;
        let mut sets = Vec::with_capacity(self.num_arms());
        for per_state in &self.theta_probs {
            let mut drawn: Vec<Vec<i64>> = Vec::new();
            let mut arm_sets = Vec::with_capacity(n);
            for probs in per_state {
                let mut vectors = Vec::with_capacity(probs.len());
                for _ in 0..probs.len() {
                    let v = self.draw_distinct(&drawn, rng)?;
                    vectors.push(v.iter().map(|&x| x as f64).collect());
                    drawn.push(v);
                }
                arm_sets.push(ThetaSet {
                    vectors,
                    probs: probs.clone(),
                });
            }
            sets.push(arm_sets);
        }
        let thetas = ThetaFamily::new(sets, n, self.actions.dim())?;
        EnvironmentSpec::new(transition, thetas, self.actions.clone())
    }

    fn draw_distinct(&self, drawn: &[Vec<i64>], rng: &mut ChaCha8Rng) -> Result<Vec<i64>> {
        for _ in 0..MAX_REDRAWS {
            let v: Vec<i64> = self
                .grid_lower
                .iter()
                .zip(&self.grid_upper)
                .map(|(&l, &u)| rng.random_range(l..=u))
                .collect();
            if !drawn.contains(&v) {
                return Ok(v);
            }
        }
        Err(Error::config(
            "could not draw distinct coefficient vectors from the grid",
        ))
    }
}
