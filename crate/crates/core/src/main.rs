use std::process::ExitCode;

fn main() -> ExitCode {
    kleinman::cli::main_with_args(std::env::args_os())
}
