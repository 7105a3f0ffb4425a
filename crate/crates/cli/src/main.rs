use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbps_cli::output::to_json;
use dbps_cli::runner::resolve_workers;
use dbps_cli::{
    cmd_converge, cmd_diag, cmd_mmpp, cmd_precondition, cmd_run, cmd_sweep, CliError, CliResult,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "dbps", version, about = "Discrete bouncy particle sampler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Uses the full run lengths instead of the short defaults.
    #[arg(long)]
    full_scale: bool,
    /// Worker threads (default: DBPS_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs replicates and writes traces and summaries.
    Run(Common),
    /// Sweeps one sampler parameter over a grid.
    Sweep(Common),
    /// Measures convergence time from scaled starting points.
    Converge(Common),
    /// Compares the full-gradient, partial-gradient and surrogate samplers on an MMPP posterior.
    Mmpp(Common),
    /// Compares plain and preconditioned runs and checks their equivalence.
    Precondition(Common),
    /// Recomputes diagnostics from a trace CSV.
    Diag {
        trace: PathBuf,
        /// Segment sidecar (default: segments_*.csv next to the trace).
        #[arg(long)]
        segments: Option<PathBuf>,
    },
}

fn load(c: &Common) -> CliResult<(ExperimentConfig, usize)> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if c.full_scale {
        cfg = cfg.full_scale();
    }
    Ok((cfg, resolve_workers(c.workers)))
}

fn execute(cli: Cli) -> CliResult<String> {
    Ok(match cli.command {
        Command::Run(c) => {
            let (cfg, w) = load(&c)?;
            let r = cmd_run(&cfg, w)?;
            let summaries: Vec<_> = r.runs.iter().map(|x| &x.summary).collect();
            format!("{}\n{}", r.dir.display(), to_json(&summaries))
        }
        Command::Sweep(c) => {
            let (cfg, w) = load(&c)?;
            let r = cmd_sweep(&cfg, w)?;
            let f_b = r.mean_by_grid(|x| Some(x.summary.f_b));
            let ess = r.mean_by_grid(|x| x.summary.ess_min);
            let mut s = format!("{}\n{:>10} {:>8} {:>10}\n", r.dir.display(), r.axis.name(), "f_b", "ess_min");
            for ((v, b), e) in r.values.iter().zip(&f_b).zip(&ess) {
                s.push_str(&format!("{v:>10.3} {b:>8.3} {e:>10.1}\n"));
            }
            s
        }
        Command::Converge(c) => {
            let (cfg, w) = load(&c)?;
            let r = cmd_converge(&cfg, w)?;
            format!(
                "{}\nm_pi {:.4}, slope {:.3}, {} capped run(s)\n",
                r.dir.display(),
                r.m_pi,
                r.slope,
                r.n_censored()
            )
        }
        Command::Mmpp(c) => {
            let (cfg, w) = load(&c)?;
            let r = cmd_mmpp(&cfg, w)?;
            format!("{}\n{}", r.dir.display(), to_json(&r.variants))
        }
        Command::Precondition(c) => {
            let (cfg, w) = load(&c)?;
            let r = cmd_precondition(&cfg, w)?;
            format!(
                "{}\nequivalence deviation {:.3e}\ness_min plain {:.1}, preconditioned {:.1}, ratio {:.2}\n",
                r.dir.display(),
                r.equivalence_deviation,
                r.plain_ess_min,
                r.preconditioned_ess_min,
                r.ess_min_ratio
            )
        }
        Command::Diag { trace, segments } => to_json(&cmd_diag(&trace, segments.as_deref())?),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
