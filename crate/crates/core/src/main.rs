use clap::Parser;
use mixlab::config::ExperimentConfig;
use mixlab::runner::{resolve_out_dir, run_subcommand, SUBCOMMANDS};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs one experiment and writes CSV artifacts plus a manifest.
/// Exit status: 0 pass, 1 error, 2 certification failure.
#[derive(Parser, Debug)]
#[command(name = "mixlab", version)]
struct Args {
    /// simulate, decay, absorb, attract, observe, control, squeeze, couple, mix or toy
    command: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides MIXLAB_OUT and run.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// section.key=value, repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> mixlab::Result<i32> {
    if !SUBCOMMANDS.contains(&args.command.as_str()) {
        return Err(mixlab::Error::Invalid(format!("unknown subcommand '{}' (expected one of {})", args.command, SUBCOMMANDS.join(", "))));
    }
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| mixlab::Error::Invalid(e.to_string()))?;
    }
    let mut overrides = args.set.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("run.seed={s}"));
    }
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p, &overrides)?,
        None => ExperimentConfig::parse("", &overrides)?,
    };
    let out = resolve_out_dir(args.out.as_deref(), &cfg);
    let outcome = run_subcommand(&args.command, &cfg, &out)?;
    for n in &outcome.notes {
        println!("{n}");
    }
    println!("manifest: {}", outcome.manifest.display());
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
