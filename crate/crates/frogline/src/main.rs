use std::process::ExitCode;

fn main() -> ExitCode {
    frogline::cli::main()
}
