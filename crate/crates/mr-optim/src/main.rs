use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mr_optim::cli::run(std::env::args_os()) as u8)
}
