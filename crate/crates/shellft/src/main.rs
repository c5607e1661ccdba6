use std::process::ExitCode;

fn main() -> ExitCode {
    shellft::cli::main()
}
