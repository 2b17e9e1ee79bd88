use std::path::PathBuf;
use std::process::ExitCode;

use affine_lab_cli::{run, Command, RunConfig};
use clap::Parser;

/// Numerical affine differential geometry of symmetric hypersurfaces.
#[derive(Debug, Parser)]
#[command(name = "affine-lab", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the report and artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed of the sample points.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::load(&args.config).and_then(|mut config| {
        if let Some(c) = config.command {
            if c != args.command {
                return Err(affine_lab_cli::CliError::Config(format!(
                    "config says `{c}` but the command line says `{}`",
                    args.command
                )));
            }
        }
        config.command = Some(args.command);
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        run(config, args.out.as_deref())
    });
    match result {
        Ok(report) => {
            for g in &report.gates {
                let status = if g.pass { "PASS" } else { "FAIL" };
                println!("{status} {} = {:e} (limit {:e})", g.name, g.value, g.limit);
            }
            if let Some(c) = &report.classification {
                println!("classification: {}", c.message);
            }
            for note in &report.notes {
                println!("note: {note}");
            }
            println!("verdict: {:?}", report.verdict);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
