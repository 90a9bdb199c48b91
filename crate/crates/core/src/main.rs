use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(qf_hetnet::cli::run_from(std::env::args_os()))
}
