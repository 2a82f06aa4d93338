mod args;
mod commands;
mod kappa;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Command, SharedArgs};
use commands::{CliError, CliResult, Outputs};
use manifest::RunManifest;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.shared.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(manifest) => {
            log::info!(
                "{} wrote {} files",
                manifest.command,
                manifest.outputs.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<RunManifest> {
    let shared = &cli.shared;
    match (&cli.command, &shared.from_manifest) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "--from-manifest replays a recorded command; do not give a subcommand".into(),
        )),
        (None, None) => Err(CliError::Config("no command given (try --help)".into())),
        (None, Some(path)) => replay(path, shared),
        (Some(command), None) => {
            let threads = init_threads(shared.threads)?;
            let seed = shared.seed.unwrap_or(0);
            match command {
                Command::Dofs(a) => {
                    let c = commands::resolve_dofs(a, shared)?;
                    execute(
                        "dofs",
                        c,
                        seed,
                        threads,
                        &shared.out_dir,
                        commands::run_dofs,
                    )
                }
                Command::Slepian(a) => {
                    let c = commands::resolve_slepian(a, shared)?;
                    execute(
                        "slepian",
                        c,
                        seed,
                        threads,
                        &shared.out_dir,
                        commands::run_slepian,
                    )
                }
                Command::Spectra(a) => {
                    let c = commands::resolve_spectra(a, shared)?;
                    execute(
                        "spectra",
                        c,
                        seed,
                        threads,
                        &shared.out_dir,
                        commands::run_spectra,
                    )
                }
                Command::Channel(a) => {
                    let c = commands::resolve_channel(a, shared)?;
                    let seed = c.experiment.rng_seed;
                    execute(
                        "channel",
                        c,
                        seed,
                        threads,
                        &shared.out_dir,
                        commands::run_channel,
                    )
                }
            }
        }
    }
}

fn replay(path: &Path, shared: &SharedArgs) -> CliResult<RunManifest> {
    let recorded = RunManifest::load(path)
        .map_err(|e| CliError::Config(format!("manifest {}: {e}", path.display())))?;
    if shared.seed.is_some() || shared.beta.is_some() || shared.aperture.is_some() {
        return Err(CliError::Config(
            "--seed/--beta/--aperture cannot override a manifest; edit its config instead".into(),
        ));
    }
    let threads = init_threads(shared.threads.or(Some(recorded.threads)))?;
    let seed = recorded.rng_seed;
    let out = &shared.out_dir;
    match recorded.command.as_str() {
        "dofs" => execute(
            "dofs",
            config_of(&recorded)?,
            seed,
            threads,
            out,
            commands::run_dofs,
        ),
        "slepian" => execute(
            "slepian",
            config_of(&recorded)?,
            seed,
            threads,
            out,
            commands::run_slepian,
        ),
        "spectra" => execute(
            "spectra",
            config_of(&recorded)?,
            seed,
            threads,
            out,
            commands::run_spectra,
        ),
        "channel" => execute(
            "channel",
            config_of(&recorded)?,
            seed,
            threads,
            out,
            commands::run_channel,
        ),
        other => Err(CliError::Config(format!(
            "manifest names unknown command '{other}'"
        ))),
    }
}

fn config_of<T: DeserializeOwned>(m: &RunManifest) -> CliResult<T> {
    serde_json::from_value(m.config.clone())
        .map_err(|e| CliError::Config(format!("manifest config for '{}': {e}", m.command)))
}

fn execute<C: Serialize>(
    command: &str,
    config: C,
    seed: u64,
    threads: usize,
    out_dir: &Path,
    body: fn(&C, RunManifest, Outputs) -> CliResult<RunManifest>,
) -> CliResult<RunManifest> {
    let value = serde_json::to_value(&config)
        .map_err(|e| CliError::Config(format!("serializing config: {e}")))?;
    let manifest = RunManifest::new(command, seed, threads, value);
    let outputs = Outputs::create(out_dir)?;
    body(&config, manifest, outputs)
}

/// Caps rayon and the dense linear algebra at `threads` workers.
fn init_threads(threads: Option<usize>) -> CliResult<usize> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        let built = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
        // A second command in the same process finds the pool already built.
        if let Err(e) = built {
            if rayon::current_num_threads() != n {
                return Err(CliError::Config(format!("thread pool: {e}")));
            }
        }
    }
    let n = rayon::current_num_threads();
    faer::set_global_parallelism(if n == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    });
    Ok(n)
}
