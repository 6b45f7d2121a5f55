use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(srtgan::cli::run(std::env::args_os()))
}
