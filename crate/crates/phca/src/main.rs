use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(phca::cli::run())
}
