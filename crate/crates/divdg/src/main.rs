use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use divdg::config::Mode;
use divdg::run::{run_adaptive, run_solve, run_uniform};
use divdg::{RunConfig, RunError, WallClock};

#[derive(Parser)]
#[command(name = "divdg", version, about = "Optimal control of Oseen flow with divergence-conforming DG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Uniform refinement study with observed rates.
    Convergence(Overrides),
    /// Adaptive refinement driven by the residual estimator.
    Adapt(Overrides),
    /// One uniform mesh at the first level.
    Solve(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML run description; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// accuracy, boundary-layer, l-shape or t-shape.
    #[arg(long)]
    case: Option<String>,
    /// Comma-separated subdivisions per unit length.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_dofs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip VTK snapshots.
    #[arg(long)]
    no_vtk: bool,
    /// Write assembled operators as MatrixMarket files (solve only).
    #[arg(long)]
    dump_matrices: bool,
}

impl Overrides {
    fn resolve(self) -> Result<RunConfig, RunError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.case {
            c.case = v;
        }
        if let Some(v) = self.levels {
            c.levels = v;
        }
        if let Some(v) = self.theta {
            c.theta = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = Some(v);
        }
        if let Some(v) = self.max_dofs {
            c.max_dofs = v;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        c.vtk &= !self.no_vtk;
        c.dump_matrices |= self.dump_matrices;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let clock = WallClock::new();
    match cli.command {
        Command::Convergence(o) => {
            let cfg = RunConfig { mode: Mode::Uniform, ..o.resolve()? };
            for r in run_uniform(&cfg, &clock)? {
                let rate = |c| r.rate(c).map_or_else(|| "-".into(), |v| format!("{v:.2}"));
                println!(
                    "n={:<3} dofs={:<7} l2_y={:.3e} ({}) energy+p={} l2_u={:.3e} ({}) eff={}",
                    r.n,
                    r.dofs,
                    r.errors.l2_y,
                    rate("l2_y"),
                    rate("state_combined"),
                    r.errors.l2_u,
                    rate("l2_u"),
                    r.errors.efficiency.map_or_else(|| "-".into(), |e| format!("{e:.3}")),
                );
            }
        }
        Command::Adapt(o) => {
            let cfg = RunConfig { mode: Mode::Adaptive, ..o.resolve()? };
            for l in run_adaptive(&cfg, &clock)?.levels {
                println!("level={:<3} dofs={:<7} upsilon={:.3e} marked={:.2}", l.level, l.dofs, l.upsilon, l.marked_fraction);
            }
        }
        Command::Solve(o) => {
            let cfg = o.resolve()?;
            let l = run_solve(&cfg, &clock)?;
            println!(
                "dofs={} pdas_iterations={} upsilon={:.3e} max|div|={:.1e}",
                l.dofs, l.pdas_iterations, l.upsilon, l.max_divergence
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
