use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match engagement_service::cli::run_args(std::env::args_os(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed stdout (for example `| head`) is not a failure.
        Err(e) if e.body.kind == "io" && e.body.message.starts_with("Broken pipe") => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.code as u8)
        }
    }
}
