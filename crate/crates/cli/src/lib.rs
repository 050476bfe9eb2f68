//! The `mpve` command line: ingest, query, extract, ablate and serve.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod serve;

use std::future::IntoFuture;
use std::io::Write;
use std::process::ExitCode;

use args::{Cli, Command, ServeArgs};
use config::EngineConfig;
use error::{CliError, CliResult};

fn init_logging(cli: &Cli, cfg: &EngineConfig) {
    let level = match cli.verbose {
        0 => cli
            .log_level
            .clone()
            .or_else(|| cfg.log_level.clone())
            .unwrap_or_else(|| "warn".into()),
        1 => "info".into(),
        _ => "debug".into(),
    };
    let mut builder = env_logger::Builder::new();
    builder.parse_filters(&level).target(env_logger::Target::Stderr);
    // Timestamps only when asked for, so output stays reproducible.
    if cli.verbose == 0 {
        builder.format_timestamp(None);
    }
    let _ = builder.try_init();
}

fn serve(cfg: EngineConfig, args: ServeArgs) -> CliResult<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .map_err(|e| CliError::usage(format!("cannot listen on {}: {e}", args.listen)))?;
        let addr = listener.local_addr()?;
        println!("listening on {addr}");
        let _ = std::io::stdout().flush();

        let state = serve::AppState::default();
        let loader = state.clone();
        let load = tokio::task::spawn_blocking(move || {
            cfg.engine(args.index.as_ref(), &args.provider, &args.parse).map(|e| loader.set(e))
        });
        let server = tokio::spawn(axum::serve(listener, serve::router(state)).into_future());
        match load.await {
            Ok(Ok(())) => log::info!("index loaded"),
            Ok(Err(e)) => return Err(e),
            Err(e) => return Err(CliError::usage(format!("index loader panicked: {e}"))),
        }
        match server.await {
            Ok(res) => res.map_err(CliError::from),
            Err(e) => Err(CliError::usage(format!("server task failed: {e}"))),
        }
    })
}

/// Runs a parsed command line; the returned code is the process exit status.
pub fn run(cli: Cli) -> ExitCode {
    let cfg = match EngineConfig::load_or_default(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    init_logging(&cli, &cfg);
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&cfg, &a),
        Command::Query(a) => commands::query(&cfg, &a),
        Command::Extract(a) => commands::extract(&cfg, &a),
        Command::Ablate(a) => commands::ablate(&cfg, &a),
        Command::Serve(a) => serve(cfg, a).map(|()| String::new()),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
