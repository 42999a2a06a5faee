//! `restamp coverage`: structural coverage of one or more execution logs
//! against a spec, as a criterion-rows table with one column per log.

use std::path::PathBuf;

use clap::Args;
use restamp_core::coverage::{render_csv, render_markdown, report_for_log, CoverageReport};
use restamp_core::executor::read_ndjson;
use restamp_core::spec_model::{load_spec, DocumentFormat};

use crate::{read_config, CliError, CliResult};

#[derive(Args)]
pub struct CoverageArgs {
    /// OpenAPI document.
    #[arg(long)]
    spec: PathBuf,

    /// Execution log (NDJSON); repeatable, one report column per log.
    #[arg(long = "log", required = true)]
    logs: Vec<PathBuf>,

    /// Column labels, one per log (default: Initial/Single-Agent/Multi-Agent
    /// for exactly three logs, file stems otherwise).
    #[arg(long = "label")]
    labels: Vec<String>,

    /// Output format.
    #[arg(long, default_value = "markdown", value_parser = ["json", "markdown", "md", "csv"])]
    format: String,

    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: CoverageArgs) -> CliResult {
    let hint = match args.spec.extension().and_then(|e| e.to_str()) {
        Some("json") => Some(DocumentFormat::Json),
        Some("yaml") | Some("yml") => Some(DocumentFormat::Yaml),
        _ => None,
    };
    let spec = load_spec(&read_config(&args.spec)?, hint).map_err(CliError::config)?;

    let labels: Vec<String> = if !args.labels.is_empty() {
        if args.labels.len() != args.logs.len() {
            return Err(CliError::config(format!(
                "{} labels supplied for {} logs",
                args.labels.len(),
                args.logs.len()
            )));
        }
        args.labels.clone()
    } else if args.logs.len() == 3 {
        vec!["Initial".into(), "Single-Agent".into(), "Multi-Agent".into()]
    } else {
        args.logs
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "log".to_string())
            })
            .collect()
    };

    let mut reports: Vec<(String, CoverageReport)> = Vec::new();
    for (path, label) in args.logs.iter().zip(labels) {
        let log = read_ndjson(read_config(path)?.as_slice())
            .map_err(|e| CliError::config(format!("invalid log {}: {e}", path.display())))?;
        let report = report_for_log(&spec, &log).map_err(CliError::config)?;
        let documented: u64 = report.criteria.iter().map(|c| c.numerator).sum();
        if !log.is_empty() && documented == 0 {
            eprintln!(
                "restamp: warning: log {} matched nothing documented in the spec ({} undocumented observations)",
                path.display(),
                report.undocumented.total()
            );
        }
        reports.push((label, report));
    }

    let rendered: Vec<u8> = match args.format.as_str() {
        "json" => {
            let value: Vec<serde_json::Value> = reports
                .iter()
                .map(|(label, report)| {
                    serde_json::json!({"label": label, "coverage": report})
                })
                .collect();
            let mut bytes = serde_json::to_vec_pretty(&serde_json::json!({ "reports": value }))
                .expect("encoding cannot fail");
            bytes.push(b'\n');
            bytes
        }
        "csv" => render_csv(&reports).into_bytes(),
        _ => render_markdown(&reports).into_bytes(),
    };

    match &args.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&rendered)
                .map_err(CliError::config)?;
        }
    }
    Ok(())
}
