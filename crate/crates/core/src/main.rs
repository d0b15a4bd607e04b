use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let status = blendtext::cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(status.0 as u8)
}
