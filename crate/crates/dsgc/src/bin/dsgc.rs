use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dsgc::cli::main())
}
