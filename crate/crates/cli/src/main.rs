use std::process::ExitCode;

use stochwave_cli::run::OUT_DIR_ENV;
use stochwave_cli::{execute, parse_args};

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args_os()) {
        Ok(cli) => cli,
        Err(err) => match err.downcast::<clap::Error>() {
            Ok(clap_err) => clap_err.exit(),
            Err(err) => {
                eprintln!("stochwave: error: {err:#}");
                return ExitCode::from(2);
            }
        },
    };
    let env_dir = std::env::var_os(OUT_DIR_ENV).map(Into::into);
    match execute(&cli.command, env_dir) {
        Ok(written) => {
            for path in written {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("stochwave: error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
