use clap::error::ErrorKind;
use clap::Parser;
use rigforge_cli::cli::{configure_threads, THREADS_ENV};
use rigforge_cli::{Cli, Failure, Status};
use std::process::ExitCode;

fn fail(failure: &Failure) -> ExitCode {
    eprintln!("{failure}");
    ExitCode::from(failure.status.code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return fail(&Failure::new(Status::Usage, first.trim_start_matches("error: ")));
        }
    };
    if let Err(f) = configure_threads(std::env::var(THREADS_ENV).ok().as_deref()) {
        return fail(&f);
    }
    match rigforge_cli::run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&f),
    }
}
