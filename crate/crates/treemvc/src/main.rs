use std::process::ExitCode;

use treemvc::Error;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match treemvc::cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        // Help and version requests surface as clap errors with their own exit codes.
        Err(Error::Usage(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
