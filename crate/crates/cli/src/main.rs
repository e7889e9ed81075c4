use std::io::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use redqkd_cli::resources;
use redqkd_cli::simulate::{load, simulate};
use redqkd_cli::sweep::{rate_sweep, to_csv, to_gnuplot, RowStatus, SweepConfig};
use redqkd_cli::{read_file, write_file, CliError, EXIT_NUMERICAL, EXIT_OK};
use redqkd_core::vss::CorruptionModel;

/// Distributed QKD post-processing simulator with finite-key rates.
#[derive(Parser)]
#[command(name = "redqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimized secret key rate over a grid of channel losses, as CSV.
    RateSweep(SweepArgs),
    /// Run one post-processing session described by a scenario file.
    Simulate(SimulateArgs),
    /// Minimum units, share copies and shares per unit for a corruption model.
    Resources(ResourceArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Flat `key = value` sweep config; flags override its values.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// honest, ac:<t> or pn[:<n_q>].
    #[arg(long)]
    deployment: Option<String>,
    /// start:stop:step in dB, or a comma list.
    #[arg(long)]
    loss: Option<String>,
    /// Sifted block size M.
    #[arg(short, long)]
    m: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate the reference source settings instead of optimizing.
    #[arg(long)]
    no_optimize: bool,
    /// Any config key, as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Write the CSV here instead of stdout.
    #[arg(short, long)]
    output: Option<String>,
    /// Also write `loss_db K` pairs for gnuplot.
    #[arg(long)]
    gnuplot: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Any scenario key, as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    transcript: Option<String>,
    /// Print only the verdict.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Args)]
struct ResourceArgs {
    /// AC, AN, PC or PN; all models when absent.
    #[arg(long)]
    model: Option<CorruptionModel>,
    /// Corruption bound; 1 to 6 when absent.
    #[arg(short, long)]
    t: Option<usize>,
}

fn split_set(s: &str) -> Result<(String, String), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))
}

fn emit(path: Option<&str>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run_sweep(args: SweepArgs) -> Result<u8, CliError> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::from_text(&read_file(path)?)?,
        None => SweepConfig::default(),
    };
    let flags = [
        ("scheme", args.scheme),
        ("deployment", args.deployment),
        ("loss", args.loss),
        ("m", args.m.map(|m| m.to_string())),
        ("preset", args.preset),
        ("seed", args.seed.map(|s| s.to_string())),
        ("optimize", args.no_optimize.then(|| "false".to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    for s in &args.sets {
        let (k, v) = split_set(s)?;
        cfg.set(&k, &v)?;
    }
    let rows = rate_sweep(&cfg)?;
    emit(args.output.as_deref(), &to_csv(&cfg, &rows)?)?;
    if let Some(path) = &args.gnuplot {
        write_file(path, &to_gnuplot(&rows))?;
    }
    let mut code = EXIT_OK;
    for row in &rows {
        if let RowStatus::Error(e) = &row.status {
            eprintln!("loss {} dB: {e}", row.loss_db);
            code = EXIT_NUMERICAL;
        }
    }
    Ok(code)
}

fn run_simulate(args: SimulateArgs) -> Result<u8, CliError> {
    let mut sets = args.sets.iter().map(|s| split_set(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        sets.push(("seed".into(), seed.to_string()));
    }
    let scenario = load(&read_file(&args.scenario)?, &sets)?;
    let (run, verdict) = simulate(&scenario)?;
    if let Some(path) = &args.transcript {
        write_file(path, &run.transcript.to_text())?;
    } else if !args.quiet {
        emit(None, &run.transcript.to_text())?;
    }
    emit(None, &verdict.to_text())?;
    Ok(verdict.exit_code())
}

fn run_resources(args: ResourceArgs) -> Result<u8, CliError> {
    let text = match (args.model, args.t) {
        (Some(model), Some(t)) => resources::report(model, t)?,
        (Some(model), None) => {
            let rows: Vec<_> = (1..=6).filter_map(|t| resources::ResourceRow::new(model, t).ok()).collect();
            let mut out = format!("{}\n", resources::HEADER);
            for row in rows {
                out.push_str(&resources::csv_line(&row));
                out.push('\n');
            }
            out
        }
        (None, Some(t)) => resources::table([t]),
        (None, None) => resources::table(1..=6),
    };
    emit(None, &text)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::RateSweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Resources(a) => run_resources(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
