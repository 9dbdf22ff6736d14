#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod expr;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ebm_spectral::problem::{CANONICAL_T0, CANONICAL_TAU, DEFAULT_ALPHA, DEFAULT_BETA};
use ebm_spectral::{solve, spatial_study, temporal_study, CaseId};

use config::{ConfigError, RunConfig, StudyPlan, Threads, Validated};

const THREADS_ENV: &str = "EBM_SPECTRAL_THREADS";

#[derive(Parser)]
#[command(
    name = "ebm-spectral",
    version,
    about = "Spectral solver for diffusive energy balance models"
)]
struct Cli {
    /// Worker threads; overrides the config file
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Output directory; overrides the config file
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Reserved; no stochastic components
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write its coefficient history
    Solve { config: PathBuf },
    /// Run a spatial or temporal convergence study
    Study { config: PathBuf },
    /// List the built-in test cases
    Cases,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Run(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = cli.seed;
    let result = match &cli.command {
        Command::Cases => {
            print!("{}", cases_listing());
            Ok(())
        }
        Command::Solve { config } => load(&cli, config).and_then(|v| run_solve(&v)),
        Command::Study { config } => load(&cli, config).and_then(|v| run_study(&v)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Validated, Failure> {
    let mut v = RunConfig::from_path(path)?.validate()?;
    if let Some(dir) = &cli.output {
        v.output = dir.clone();
    }
    let threads = match (cli.threads, v.threads) {
        (Some(0), _) => return Err(Failure::Config("--threads: must be positive".into())),
        (Some(n), _) | (None, Threads::Count(n)) => Some(n),
        (None, Threads::Auto) => None,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&v.output).map_err(io_failure(&v.output))?;
    Ok(v)
}

fn run_solve(v: &Validated) -> Result<(), Failure> {
    let cfg = v.scheme.clone().with_trajectory(true);
    let traj = solve(&v.problem, &cfg).map_err(|e| Failure::Run(e.to_string()))?;
    let path = v.output.join("solution.csv");
    output::write_solution(&path, &traj).map_err(io_failure(&path))?;
    let path = v.output.join("solution_grid.csv");
    output::write_grid(&path, &traj).map_err(io_failure(&path))?;
    Ok(())
}

fn run_study(v: &Validated) -> Result<(), Failure> {
    let Some(plan) = &v.study else {
        return Err(Failure::Config("study: block is required".into()));
    };
    let report = match plan {
        StudyPlan::Spatial(s) => spatial_study(&v.problem, s),
        StudyPlan::Temporal(s) => temporal_study(&v.problem, s),
    }
    .map_err(|e| Failure::Run(e.to_string()))?;
    let path = v.output.join("study.csv");
    output::write_study(&path, &report).map_err(io_failure(&path))?;
    if v.emit_plot_scripts {
        let path = v.output.join("study.gp");
        output::write_text(&path, &output::plot_script(&report, "study.csv"))
            .map_err(io_failure(&path))?;
    }
    Ok(())
}

fn cases_listing() -> String {
    let CaseId::GaussianMemory { amplitude, sigma } = CaseId::gaussian_default() else {
        unreachable!()
    };
    let common =
        format!("    psi(x,s) = cos(pi*x)/(1+s)\n    tau={CANONICAL_TAU} t0={CANONICAL_T0}\n");
    let mut s = String::new();
    s.push_str("nonlinear_diffusion\n");
    s.push_str(&format!("    D(u) = exp(-beta*u)    beta={DEFAULT_BETA}\n"));
    s.push_str("    f(x,t,u,w) = u*(1-u^2)\n    kernel: none\n");
    s.push_str(&common);
    s.push_str("gaussian_memory\n");
    s.push_str("    D(u) = 1\n    f(x,t,u,w) = w*(1-w)\n");
    s.push_str(&format!(
        "    kernel: K(s) = amplitude*exp(-(s-tau/2)^2/(2*sigma^2))    amplitude={amplitude} sigma={sigma}\n"
    ));
    s.push_str(&common);
    s.push_str("fractional_memory\n");
    s.push_str("    D(u) = 1\n    f(x,t,u,w) = w*(1-w)\n");
    s.push_str(&format!(
        "    kernel: K(s) = s^(alpha-1)/Gamma(alpha)    alpha={DEFAULT_ALPHA}\n"
    ));
    s.push_str(&common);
    s.push_str("manufactured_linear\n");
    s.push_str("    D(u) = 1\n    f(x,t,u,w) = 0\n    kernel: none\n");
    s.push_str("    psi(x,s) = phi_mode(x)    mode=1\n");
    s.push_str(&format!("    tau={CANONICAL_TAU} t0={CANONICAL_T0}\n"));
    s
}
