//! CSV and JSON persistence.
//!
//! Layout of an output directory:
//!
//! - `runs/{agent}_r{realization:04}_j{trajectory:03}.csv` with columns
//!   `t,regret,reward,rounds,recovery_failures`;
//! - `aggregate.csv` with columns `t,agent,mean_regret,stderr,n_runs`;
//! - `metadata.json`: configuration echo, master seed, crate version and the
//!   exact quantities of every realization.
//!
//! Numbers are written in shortest round-trip form, so aggregates can be
//! recomputed exactly from the per-run files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{ExperimentResult, Realization, RunTrace};
use crate::agent::AgentKind;
use crate::error::{Error, Result};

pub const RUN_HEADER: &str = "t,regret,reward,rounds,recovery_failures";
pub const AGGREGATE_HEADER: &str = "t,agent,mean_regret,stderr,n_runs";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub agent: AgentKind,
    pub mean_regret: f64,
    pub stderr: f64,
    pub n_runs: usize,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(result: &ExperimentResult) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &agent in &result.config.agents {
        let runs: Vec<&RunTrace> = result.runs_of(agent).collect();
        for (i, &t) in result.checkpoints.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|r| r.checkpoints[i].regret).collect();
            let (mean_regret, stderr) = mean_stderr(&values);
            rows.push(AggregateRow {
                t,
                agent,
                mean_regret,
                stderr,
                n_runs: values.len(),
            });
        }
    }
    rows
}

pub fn run_file_name(run: &RunTrace) -> String {
    format!(
        "{}_r{:04}_j{:03}.csv",
        run.agent, run.realization, run.trajectory
    )
}

pub fn run_csv(run: &RunTrace) -> String {
    let mut out = String::from(RUN_HEADER);
    out.push('\n');
    for c in &run.checkpoints {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.t, c.regret, c.reward, c.rounds, c.recovery_failures
        );
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.agent, r.mean_regret, r.stderr, r.n_runs
        );
    }
    out
}

#[derive(Serialize)]
struct ChoiceMeta<'a> {
    arm: usize,
    action: &'a [f64],
    value: f64,
}

#[derive(Serialize)]
struct ConstantsMeta {
    t_m: f64,
    t_s: f64,
    r_max: f64,
    c_theta_max: usize,
    delta: Option<f64>,
}

#[derive(Serialize)]
struct RealizationMeta<'a> {
    index: usize,
    theta_seed: u64,
    mu: &'a [f64],
    rho_star: f64,
    policy: Vec<ChoiceMeta<'a>>,
    constants: ConstantsMeta,
    /// `[arm][state]` support vectors.
    thetas: Vec<Vec<&'a [Vec<f64>]>>,
    epsilon_1: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    crate_version: &'static str,
    master_seed: u64,
    checkpoints: &'a [u64],
    config: &'a super::config::ExperimentConfig,
    realizations: Vec<RealizationMeta<'a>>,
}

fn realization_meta(r: &Realization) -> RealizationMeta<'_> {
    RealizationMeta {
        index: r.index,
        theta_seed: r.theta_seed,
        mu: &r.mu,
        rho_star: r.rho_star,
        policy: r
            .policy
            .choices
            .iter()
            .map(|c| ChoiceMeta {
                arm: c.arm.0,
                action: &c.action,
                value: c.value,
            })
            .collect(),
        constants: ConstantsMeta {
            t_m: r.constants.t_m,
            t_s: r.constants.t_s,
            r_max: r.constants.r_max,
            c_theta_max: r.constants.c_theta_max,
            delta: r.constants.delta,
        },
        thetas: r
            .spec
            .thetas()
            .sets()
            .iter()
            .map(|per_state| per_state.iter().map(|s| s.vectors.as_slice()).collect())
            .collect(),
        epsilon_1: r.schedule.radius(1),
    }
}

pub fn metadata_json(result: &ExperimentResult) -> Result<String> {
    let meta = Metadata {
        crate_version: env!("CARGO_PKG_VERSION"),
        master_seed: result.config.seed,
        checkpoints: &result.checkpoints,
        config: &result.config,
        realizations: result.realizations.iter().map(realization_meta).collect(),
    };
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes every file under `dir` and returns the paths written.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let runs_dir = dir.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    let mut written = Vec::with_capacity(result.runs.len() + 2);
    for run in &result.runs {
        let path = runs_dir.join(run_file_name(run));
        write(&path, &run_csv(run))?;
        written.push(path);
    }
    let path = dir.join("aggregate.csv");
    write(&path, &aggregate_csv(&aggregate(result)))?;
    written.push(path);
    let path = dir.join("metadata.json");
    write(&path, &metadata_json(result)?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::run::run_experiment;

    #[test]
    fn stderr_uses_sample_deviation() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn files_and_recomputable_aggregate() {
        let mut cfg = ExperimentConfig::preset("1a");
        cfg.horizon = 1000;
        cfg.theta_realizations = 2;
        cfg.trajectories_per_realization = 2;
        cfg.agents = vec![AgentKind::Hucrl, AgentKind::OracleKnownState];
        let res = run_experiment(&cfg, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_results(&res, dir.path()).unwrap();
        assert_eq!(written.len(), 8 + 2);
        let one = std::fs::read_to_string(dir.path().join("runs/hucrl_r0001_j000.csv")).unwrap();
        let lines: Vec<&str> = one.lines().collect();
        assert_eq!(lines[0], RUN_HEADER);
        assert_eq!(lines.len(), 1 + 11);
        assert!(lines[11].starts_with("1000,"));

        // mean from the per-run files equals the aggregate
        let mut finals = Vec::new();
        for r in 0..2 {
            for j in 0..2 {
                let text = std::fs::read_to_string(
                    dir.path().join(format!("runs/hucrl_r{r:04}_j{j:03}.csv")),
                )
                .unwrap();
                let last = text.lines().last().unwrap();
                finals.push(last.split(',').nth(1).unwrap().parse::<f64>().unwrap());
            }
        }
        let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        let row = agg.lines().find(|l| l.starts_with("1000,hucrl,")).unwrap();
        let mean: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(mean, finals.iter().sum::<f64>() / 4.0);

        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("metadata.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(meta["realizations"].as_array().unwrap().len(), 2);
        assert!(meta["realizations"][0]["rho_star"].is_number());
    }
}
