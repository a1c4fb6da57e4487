use std::process::ExitCode;

fn main() -> ExitCode {
    maturity_rater::cli::run_from(std::env::args_os())
}
