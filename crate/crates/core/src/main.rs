use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spinzeno::harness::{run, ExperimentConfig, ModelKind};
use spinzeno::Error;

#[derive(Parser)]
#[command(name = "spinzeno", version, about = "Exact dynamics of spin-1/2 decoherence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Local decoherence of an open chain coupled to a spin bath.
    ModelA(RunArgs),
    /// Ring with a bath and a thermal spin-glass reservoir.
    ModelB(RunArgs),
    /// Decoherence against repeated projective collapse.
    ZenoCompare(RunArgs),
    /// Ground-state energies and reference structure factors.
    GsReport(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file (`key = value` lines); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the default config of this experiment and exit.
    #[arg(long)]
    print_defaults: bool,
}

fn execute(model: ModelKind, args: RunArgs) -> Result<(), Error> {
    if args.print_defaults {
        print!("{}", ExperimentConfig::defaults(model).to_text());
        return Ok(());
    }
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(model, &text)?
        }
        None => ExperimentConfig::defaults(model),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let result = run(&config)?;
    for (name, path) in &result.manifest.outputs {
        println!("{name}: {}", path.display());
    }
    println!("manifest: {}", config.output_dir.join("manifest.txt").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (model, args) = match cli.command {
        Command::ModelA(a) => (ModelKind::ModelA, a),
        Command::ModelB(a) => (ModelKind::ModelB, a),
        Command::ZenoCompare(a) => (ModelKind::ZenoCompare, a),
        Command::GsReport(a) => (ModelKind::GroundStateReport, a),
    };
    match execute(model, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
