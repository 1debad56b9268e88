use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ocmt_cli::args::{Cli, Command};
use ocmt_cli::run::write_generated_csv;
use ocmt_cli::{run, CliError};

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match cli.command {
        Command::Simulate(args) => args.into_config()?,
        Command::Select(args) => args.into_config()?,
        Command::Generate(args) => {
            let spec = args.design.spec()?.with_forecast_n(0)?;
            return match &args.out {
                Some(path) => {
                    let file = std::fs::File::create(path).map_err(|source| CliError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    write_generated_csv(&spec, args.replication, std::io::BufWriter::new(file))
                }
                None => write_generated_csv(&spec, args.replication, std::io::stdout().lock()),
            };
        }
    };
    let output = run(&config)?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(output.table.as_bytes());
    if let Some(path) = &config.output {
        let _ = writeln!(stdout, "result document: {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
