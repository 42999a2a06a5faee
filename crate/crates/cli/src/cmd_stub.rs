//! `restamp stub`: serve the spec-driven mock API until stdin closes (or
//! the process is interrupted). Prints the bound address on startup so
//! callers can pick an ephemeral port with `--port 0`.

use std::io::Read;
use std::path::PathBuf;

use clap::Args;
use restamp_core::clock::SharedClock;
use restamp_core::executor::write_ndjson;
use restamp_core::spec_model::{load_spec, DocumentFormat};
use restamp_core::stub::{serve, OverrideRule, StubConfig};

use crate::{read_config, CliError, CliResult};

#[derive(Args)]
pub struct StubArgs {
    /// OpenAPI document to serve.
    #[arg(long)]
    spec: PathBuf,

    /// Port to bind (0 picks an ephemeral port).
    #[arg(long, default_value_t = 0)]
    port: u16,

    /// Override rules (JSON array).
    #[arg(long)]
    overrides: Option<PathBuf>,

    /// Require this bearer token on every request.
    #[arg(long)]
    require_bearer: Option<String>,

    /// Write the server's own interaction log (NDJSON) here on shutdown.
    #[arg(long)]
    access_log: Option<PathBuf>,
}

pub fn run(args: StubArgs, clock: &SharedClock) -> CliResult {
    let hint = match args.spec.extension().and_then(|e| e.to_str()) {
        Some("json") => Some(DocumentFormat::Json),
        Some("yaml") | Some("yml") => Some(DocumentFormat::Yaml),
        _ => None,
    };
    let spec = load_spec(&read_config(&args.spec)?, hint).map_err(CliError::config)?;

    let mut config = StubConfig::new(spec, args.port);
    if let Some(path) = &args.overrides {
        let rules: Vec<OverrideRule> = serde_json::from_slice(&read_config(path)?)
            .map_err(|e| CliError::config(format!("invalid overrides: {e}")))?;
        config.overrides = rules;
    }
    config.require_bearer = args.require_bearer.clone();
    config.validate().map_err(CliError::config)?;

    let handle = serve(config, clock.clone()).map_err(CliError::config)?;
    println!("listening on http://127.0.0.1:{}", handle.port());

    // serve until stdin closes; piping `true |` in gives a short-lived server
    let mut sink = Vec::new();
    let _ = std::io::stdin().read_to_end(&mut sink);

    if let Some(path) = &args.access_log {
        let mut buf = Vec::new();
        write_ndjson(&handle.access_log(), &mut buf).map_err(CliError::config)?;
        std::fs::write(path, buf)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    handle.shutdown();
    Ok(())
}
