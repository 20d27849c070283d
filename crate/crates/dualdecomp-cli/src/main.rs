use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualdecomp::bench::{generate, Family};
use dualdecomp::harness::{
    read_csv_file, render_report, run_experiment, run_step_rule_sweep, summary_text,
    ExperimentConfig, FeasibilityThreshold,
};
use dualdecomp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dualdecomp",
    about = "Dual decomposition with multi-response primal recovery: generate benchmark \
             instances, run price-discovery experiments, render reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance file.
    Gen(GenArgs),
    /// Run an experiment from a JSON config.
    Run(RunArgs),
    /// Render plots and a summary from a CSV log.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Benchmark family: ra | assign | mcf | ship
    #[arg(long)]
    family: String,
    #[arg(long)]
    seed: u64,
    /// Output instance JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Generator parameter overrides as JSON, e.g. '{"agents": 10}'.
    #[arg(long)]
    params: Option<String>,
    /// Skip the centralized reference solve (it is computed on demand at
    /// run time instead).
    #[arg(long)]
    no_reference: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON path.
    #[arg(long)]
    config: PathBuf,
    /// Run all four subgradient step rules and report the one with the
    /// lowest final primal residuals.
    #[arg(long)]
    sweep_steps: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV log written by `run`.
    #[arg(long)]
    log: PathBuf,
    /// Output directory for plot.svg and summary.txt.
    #[arg(long)]
    out: PathBuf,
    /// Relative feasibility threshold (r_p/‖b‖ < τ) used in the summary.
    #[arg(long, default_value_t = 1e-6, conflicts_with = "absolute_threshold")]
    relative_threshold: f64,
    /// Absolute feasibility threshold (r_p < τ) used in the summary.
    #[arg(long)]
    absolute_threshold: Option<f64>,
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let family = Family::parse(&args.family)?;
    let params: serde_json::Value = match &args.params {
        Some(text) => serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("--params: {e}")))?,
        None => serde_json::json!({}),
    };
    let mut bundle = generate::<f64>(family, params, args.seed)?;
    if !args.no_reference {
        bundle.ensure_reference(1e-8)?;
    }
    bundle.to_doc().write_file(&args.out)?;
    println!(
        "wrote {} ({} agents, {} coupled rows, primal dim {})",
        args.out.display(),
        bundle.agents.len(),
        bundle.coupling.num_rows(),
        bundle.coupling.total_dim()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let cfg: ExperimentConfig<f64> = ExperimentConfig::from_json(&text)?;
    if args.sweep_steps {
        let sweep = run_step_rule_sweep(&cfg)?;
        for (rule, out) in &sweep.runs {
            let final_res = out
                .records
                .last()
                .and_then(|r| r.mra.as_ref().or(r.raw.as_ref()))
                .map(|m| m.r_p + m.r_c);
            println!(
                "rule {:>12}: {} iterations, final residuals {:?}, stop {:?}",
                rule.label(),
                out.records.len(),
                final_res,
                out.stop
            );
        }
        println!("selected rule: {}", sweep.chosen.label());
    } else {
        let out = run_experiment(&cfg)?;
        println!(
            "{} iterations, stop {:?}, f* = {}",
            out.records.len(),
            out.stop,
            out.f_star
        );
        print!("{}", summary_text(&out.records, &cfg.feasibility));
        if let Some(csv) = &cfg.output.csv {
            println!("log: {csv}");
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let records = read_csv_file::<f64>(&args.log)?;
    if records.is_empty() {
        return Err(Error::Invalid("log has no records".into()));
    }
    let threshold = match args.absolute_threshold {
        Some(v) => FeasibilityThreshold::Absolute(v),
        None => FeasibilityThreshold::Relative(args.relative_threshold),
    };
    let paths = render_report(&records, &threshold, &args.out)?;
    println!("plot: {}", paths.plot.display());
    println!("summary: {}", paths.summary.display());
    print!("{}", summary_text(&records, &threshold));
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Solver(_)
        | Error::Infeasible(_)
        | Error::Unbounded(_)
        | Error::BinaryCapExceeded { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
