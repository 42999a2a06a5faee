//! `restamp report`: assemble a run bundle (results, logs, traces, spec)
//! into the four report tables.

use std::path::{Path, PathBuf};

use clap::Args;
use restamp_core::coverage::report_for_log;
use restamp_core::executor::{read_ndjson, summarize_results, TestResult};
use restamp_core::gateway::{EnergyModel, PricingModel, UsageLedger};
use restamp_core::reporting::{build_report, render_report, ConfigurationInput, ReportFormat};
use restamp_core::spec_model::{load_spec, ApiSpec, DocumentFormat};

use crate::bundle::{display_label, matching_files, write_bytes};
use crate::{read_config, CliError, CliResult};

#[derive(Args)]
pub struct ReportArgs {
    /// Run bundle directory (spec.*, results-*.json, log-*.ndjson, trace-*.json).
    #[arg(long)]
    bundle: PathBuf,

    /// Pricing model (JSON: inputPerMillion, outputPerMillion). Zero rates
    /// when omitted.
    #[arg(long)]
    pricing: Option<PathBuf>,

    /// Energy coefficient in watt-hours per token.
    #[arg(long, default_value_t = restamp_core::gateway::DEFAULT_WH_PER_TOKEN)]
    wh_per_token: f64,

    /// System name on the report (default: bundle directory name).
    #[arg(long)]
    system: Option<String>,

    /// Output format.
    #[arg(long, default_value = "markdown", value_parser = ["json", "markdown", "md", "csv"])]
    format: String,

    /// Output file (default: report.<ext> inside the bundle).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn bundle_spec(dir: &Path) -> Result<Option<ApiSpec>, CliError> {
    for (name, hint) in [
        ("spec.json", DocumentFormat::Json),
        ("spec.yaml", DocumentFormat::Yaml),
        ("spec.yml", DocumentFormat::Yaml),
    ] {
        let path = dir.join(name);
        if path.is_file() {
            let spec = load_spec(&read_config(&path)?, Some(hint)).map_err(CliError::config)?;
            return Ok(Some(spec));
        }
    }
    Ok(None)
}

/// Rebuild a configuration's usage ledger from its trace files.
fn ledger_from_traces(dir: &Path, label: &str) -> Result<Option<UsageLedger>, CliError> {
    let mut ledger = UsageLedger::new();
    let mut found = false;
    for path in matching_files(dir, &format!("trace-{label}"), ".json")? {
        let value: serde_json::Value = serde_json::from_slice(&read_config(&path)?)
            .map_err(|e| CliError::config(format!("invalid trace {}: {e}", path.display())))?;
        let Some(entries) = value.get("entries").and_then(|e| e.as_array()) else {
            continue;
        };
        found = true;
        for entry in entries {
            let role = entry.get("role").and_then(|r| r.as_str()).unwrap_or("unknown");
            let usage = entry.get("usage").cloned().unwrap_or_default();
            ledger.push(
                role,
                restamp_core::gateway::CallUsage {
                    input_tokens: usage.get("inputTokens").and_then(|v| v.as_u64()).unwrap_or(0),
                    output_tokens: usage.get("outputTokens").and_then(|v| v.as_u64()).unwrap_or(0),
                    wall_time_ms: usage.get("wallTimeMs").and_then(|v| v.as_u64()).unwrap_or(0),
                },
            );
        }
    }
    Ok(if found { Some(ledger) } else { None })
}

pub fn run(args: ReportArgs) -> CliResult {
    let format = ReportFormat::parse(&args.format)
        .ok_or_else(|| CliError::config(format!("unknown format '{}'", args.format)))?;
    let pricing: PricingModel = match &args.pricing {
        Some(path) => serde_json::from_slice(&read_config(path)?)
            .map_err(|e| CliError::config(format!("invalid pricing config: {e}")))?,
        None => PricingModel::default(),
    };
    let energy = EnergyModel {
        wh_per_token: args.wh_per_token,
    };

    let spec = bundle_spec(&args.bundle)?;
    let results_files = matching_files(&args.bundle, "results-", ".json")?;
    if results_files.is_empty() {
        return Err(CliError::config(format!(
            "no results-*.json files in {}",
            args.bundle.display()
        )));
    }

    let mut configurations = Vec::new();
    for path in results_files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let label = name
            .trim_start_matches("results-")
            .trim_end_matches(".json")
            .to_string();
        let results: Vec<TestResult> = serde_json::from_slice(&read_config(&path)?)
            .map_err(|e| CliError::config(format!("invalid results {}: {e}", path.display())))?;
        let stats = summarize_results(&results);

        let coverage = match (&spec, args.bundle.join(format!("log-{label}.ndjson"))) {
            (Some(spec), log_path) if log_path.is_file() => {
                let log = read_ndjson(read_config(&log_path)?.as_slice())
                    .map_err(|e| CliError::config(format!("invalid log {}: {e}", log_path.display())))?;
                Some(report_for_log(spec, &log).map_err(CliError::config)?)
            }
            _ => None,
        };
        let ledger = ledger_from_traces(&args.bundle, &label)?;
        configurations.push(ConfigurationInput {
            label: display_label(&label),
            stats,
            coverage,
            ledger,
        });
    }

    let system = args.system.clone().unwrap_or_else(|| {
        args.bundle
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_string())
    });
    let report = build_report(&system, configurations, &pricing, &energy)
        .map_err(CliError::config)?;
    let rendered = render_report(&report, format);

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.bundle.join(format!("report.{}", format.extension())));
    write_bytes(&out, &rendered)?;
    println!("report written to {}", out.display());
    Ok(())
}
