use std::process::ExitCode;

fn main() -> ExitCode {
    blom_cli::run(std::env::args_os())
}
