use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::{Command, RunConfig, TolOverrides};

#[derive(Parser)]
#[command(name = "brownflag", version, about = "Spectral measures from space-filling orderings of matrix spectra")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split T = N + Q and write T.json, N.json, Q.json, table.json and report.json.
    Decompose(Common),
    /// Write the Brown measure atoms, the regularized density grid and a PGM heatmap.
    Brown(Common),
    /// Write the invariant projection of each --region.
    Project(Common),
    /// Run the checks over one input or over the built-in corpus.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run only this check id (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
    },
    /// Tabulate the order each --curve puts on the spectrum, or the cell sequence of one curve.
    Curve(Common),
    /// Re-run the command recorded in a config.json.
    Replay {
        config: PathBuf,
        /// Output directory (defaults to the recorded one).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Matrix JSON file: {"n": 2, "entries": [[re, im], ...]} in row-major order.
    #[arg(long, conflicts_with = "ensemble")]
    matrix: Option<PathBuf>,
    /// Ensemble spec such as ginibre:n=32,seed=7.
    #[arg(long)]
    ensemble: Option<String>,
    /// Curve spec (repeatable): hilbert:depth=32, morton:depth=32, lex, radial.
    #[arg(long = "curve")]
    curves: Vec<String>,
    /// Region spec (repeatable), e.g. "disk:0,0,1 & !cells:n=2,k=6".
    #[arg(long = "region")]
    regions: Vec<String>,
    /// Dyadic grid level.
    #[arg(long)]
    level: Option<u32>,
    /// Density grid resolution (brown).
    #[arg(long)]
    grid: Option<usize>,
    /// Density regularization (brown); defaults to 1e-3 max(1, |T|).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tol: TolOverrides,
}

impl Common {
    fn into_config(self, command: Command, checks: Vec<String>) -> RunConfig {
        RunConfig {
            command,
            matrix: self.matrix.map(|p| std::path::absolute(&p).unwrap_or(p)),
            ensemble: self.ensemble,
            curves: self.curves,
            regions: self.regions,
            level: self.level,
            grid: self.grid,
            eps: self.eps,
            checks,
            out: self.out,
            seed: self.seed,
            tol: self.tol,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Cmd::Decompose(c) => c.into_config(Command::Decompose, vec![]),
        Cmd::Brown(c) => c.into_config(Command::Brown, vec![]),
        Cmd::Project(c) => c.into_config(Command::Project, vec![]),
        Cmd::Verify { common, checks } => common.into_config(Command::Verify, checks),
        Cmd::Curve(c) => c.into_config(Command::Curve, vec![]),
        Cmd::Replay { config, out } => match RunConfig::load(&config) {
            Ok(mut cfg) => {
                if let Some(out) = out {
                    cfg.out = out;
                }
                cfg
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
    };
    ExitCode::from(run::execute(&cfg))
}
