use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radpair_cli::{bornmarkov, compare, run, selftest, Result};

#[derive(Parser, Debug)]
#[command(name = "radpair", version, about = "Radical-pair kinetics: run scenarios, compare models, check rates")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "./out")]
    out: PathBuf,
    /// Omit timestamps so repeated runs produce identical files.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Overrides the seed given in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario and write its observable time series.
    Run { config: PathBuf },
    /// Compare two models on a shared scenario.
    Compare { config: PathBuf },
    /// Weak-coupling rate predictions against pseudomode fits.
    Bornmarkov { config: PathBuf },
    /// Run the invariant suite and print a pass/fail table.
    Selftest,
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let out = run::run_config(config, &cli.out, cli.reproducible, cli.seed)?;
            println!("wrote {}", out.csv_path.display());
        }
        Command::Compare { config } => {
            let report = compare::compare_config(config, &cli.out, cli.reproducible, cli.seed)?;
            println!(
                "{} vs {}: max deviation {}",
                report.models[0],
                report.models[1],
                radpair_cli::output::format_number(report.max_state_deviation)
            );
        }
        Command::Bornmarkov { config } => {
            let report = bornmarkov::bornmarkov_config(config, &cli.out, cli.reproducible)?;
            print!("{}", report.table.to_csv());
        }
        Command::Selftest => {
            selftest::selftest(&cli.out, cli.reproducible)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
