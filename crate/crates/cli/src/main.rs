mod ingest;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use photoyear_core::persistence::{CredentialHasher, HashCost};
use photoyear_core::SqliteRepository;
use photoyear_server::ApiConfig;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "photoyear", version, about = "Operate the photo-dating game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a metadata file, optionally fetch and resize its images.
    Ingest(ingest::IngestArgs),
    /// Per-decade and per-mode results over a date range.
    Stats(stats::StatsArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "photoyear.toml")]
        config: PathBuf,
    },
    /// Create or upgrade the database schema.
    Migrate {
        #[arg(long, env = "STORAGE_URL")]
        db: String,
    },
}

fn init_logging(json: bool) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.compact().init();
    }
}

fn serve(config: PathBuf) -> anyhow::Result<()> {
    let config = ApiConfig::load(&config)?;
    tokio::runtime::Runtime::new()?.block_on(async move {
        let addr = config.listen_addr();
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        photoyear_server::serve(config, listener, photoyear_server::shutdown_signal()).await
    })
}

fn migrate(db: &str) -> anyhow::Result<()> {
    let repo = SqliteRepository::open_url(db, CredentialHasher::new(HashCost::DEFAULT)?)
        .with_context(|| format!("opening {db}"))?;
    println!("schema version {}", repo.schema_version()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(matches!(cli.command, Command::Serve { .. }));
    let result = match cli.command {
        Command::Ingest(args) => return ingest::run(&args),
        Command::Stats(args) => stats::run(&args),
        Command::Serve { config } => serve(config),
        Command::Migrate { db } => migrate(&db),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
