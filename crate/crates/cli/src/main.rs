use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rhmb::harness::{realize, run_experiment, write_results, ExperimentConfig};
use rhmb::selfcheck::{coverage_suite, lp_suite, policy_suite, recovery_suite};
use rhmb::{AgentKind, Error};

#[derive(Parser)]
#[command(
    name = "rhmb",
    version,
    about = "Restless hidden Markov bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSV and metadata files.
    Run(RunArgs),
    /// Print exact quantities of one sampled realization.
    Oracle(OracleArgs),
    /// Check a configuration against every invariant.
    Validate(SetupArgs),
    /// Run the optimizer, planner, recovery and coverage property suites.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SetupArgs {
    /// TOML experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named setup: 1a, 1b, 2a or 2b.
    #[arg(long)]
    preset: Option<String>,
}

impl SetupArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => Ok(ExperimentConfig::preset(name)),
            (None, None) => Err(Error::Config(
                "either --config or --preset is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    setup: SetupArgs,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of hucrl, joint, flat_ucrl, oracle_known_state.
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Horizon 10^6 with 100 realizations x 20 trajectories.
    #[arg(long)]
    paper_profile: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    setup: SetupArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    realization: usize,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smaller case counts.
    #[arg(long)]
    quick: bool,
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Contract(_) => "contract",
        Error::Model(_) => "model",
        Error::UnknownPreset(_) => "unknown_preset",
        Error::Io { .. } => "io",
        Error::Parse(_) => "parse",
        Error::Run { .. } => "run",
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fmt_vec(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let mut cfg = args.setup.load()?;
    if args.paper_profile {
        cfg = cfg.with_paper_profile();
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.realizations {
        cfg.theta_realizations = r;
    }
    if let Some(j) = args.trajectories {
        cfg.trajectories_per_realization = j;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if let Some(names) = &args.agents {
        cfg.agents = names
            .iter()
            .map(|n| {
                AgentKind::parse(n.trim())
                    .ok_or_else(|| Error::Config(format!("unknown agent {n:?}")))
            })
            .collect::<Result<_, _>>()?;
    }
    let result = run_experiment(&cfg, args.jobs)?;
    let written = write_results(&result, &cfg.output)?;
    println!(
        "wrote {} files to {} ({} runs, horizon {})",
        written.len(),
        cfg.output.display(),
        result.runs.len(),
        cfg.horizon
    );
    for row in rhmb::harness::aggregate(&result)
        .iter()
        .filter(|r| r.t == cfg.horizon)
    {
        println!(
            "{}: mean regret {:.3} +- {:.3} (n = {})",
            row.agent, row.mean_regret, row.stderr, row.n_runs
        );
    }
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Error> {
    let mut cfg = args.setup.load()?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let source = cfg.validate()?;
    let real = realize(&cfg, &source, args.realization)?;
    println!("mu_S={}", fmt_vec(&real.mu, 4));
    println!("rho*={:.6}", real.rho_star);
    for (s, c) in real.policy.choices.iter().enumerate() {
        println!(
            "pi*[{s}]=arm {} action {} value {:.6}",
            c.arm.0,
            fmt_vec(&c.action, 3),
            c.value
        );
    }
    let k = &real.constants;
    let delta = k
        .delta
        .map_or("unavailable".to_string(), |d| format!("{d:.6e}"));
    println!(
        "T_M={:.6} T_S={:.6} r_max={} C_theta_max={} Delta={delta}",
        k.t_m, k.t_s, k.r_max, k.c_theta_max
    );
    for (b, per_state) in real.spec.thetas().sets().iter().enumerate() {
        for (s, set) in per_state.iter().enumerate() {
            let vs: Vec<String> = set.vectors.iter().map(|v| fmt_vec(v, 0)).collect();
            println!(
                "Theta[{b}][{s}]={} P={}",
                vs.join(" "),
                fmt_vec(&set.probs, 2)
            );
        }
    }
    Ok(())
}

fn cmd_validate(args: &SetupArgs) -> Result<(), Error> {
    let cfg = args.load()?;
    cfg.validate()?;
    println!("ok");
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs) -> Result<bool, Error> {
    let (lp, pol, runs, horizon, trials) = if args.quick {
        (1_000, 50, 2, 10_000, 500)
    } else {
        (10_000, 200, 5, 100_000, 2_000)
    };
    let reports = vec![
        lp_suite(lp, args.seed),
        policy_suite(pol, args.seed),
        recovery_suite("1a", runs, horizon, args.seed)?,
        recovery_suite("2a", runs, horizon, args.seed)?,
        coverage_suite(2000, trials, args.seed)?,
    ];
    let mut ok = true;
    for r in &reports {
        ok &= r.passed();
        println!(
            "{} {}: {} cases, {} failures; {}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.failures,
            r.detail
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "error[usage]: {}",
                one_line(first.trim_start_matches("error: "))
            );
            return ExitCode::from(2);
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Oracle(a) => cmd_oracle(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a).map(|_| true),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error[selftest]: one or more suites failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error[{}]: {}", kind(&e), one_line(&e.to_string()));
            ExitCode::from(1)
        }
    }
}
