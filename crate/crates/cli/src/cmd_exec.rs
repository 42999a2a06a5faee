//! `restamp exec`: run suites against a target, writing a results file and
//! the NDJSON execution log. Test failures are data; only unresolved
//! placeholders and broken configuration are errors.

use std::path::PathBuf;

use clap::Args;
use restamp_core::clock::SharedClock;
use restamp_core::executor::{execute_suite, write_ndjson, ExecError, TargetConfig};
use restamp_core::test_dsl::parse_suite;

use crate::bundle::write_json;
use crate::{read_config, CliError, CliResult};

#[derive(Args)]
pub struct ExecArgs {
    /// Suite document to execute; repeatable, results are merged.
    #[arg(long = "suite", required = true)]
    suites: Vec<PathBuf>,

    /// Target config (JSON: baseUrl, timeoutMs, auth, variables).
    #[arg(long)]
    target: PathBuf,

    /// Output directory for results-<label>.json and log-<label>.ndjson.
    #[arg(long)]
    out: PathBuf,

    /// Configuration label the artifacts are filed under.
    #[arg(long, default_value = "run")]
    label: String,
}

pub fn run(args: ExecArgs, clock: &SharedClock) -> CliResult {
    let target: TargetConfig = serde_json::from_slice(&read_config(&args.target)?)
        .map_err(|e| CliError::config(format!("invalid target config: {e}")))?;

    let mut results = Vec::new();
    let mut log = Vec::new();
    for path in &args.suites {
        let suite = parse_suite(&read_config(path)?)
            .map_err(|e| CliError::config(format!("invalid suite {}: {e}", path.display())))?;
        let outcome = execute_suite(&suite, &target, clock).map_err(|e| match e {
            ExecError::PreconditionFailed(issues) => {
                let mut lines = format!(
                    "suite {} still needs refinement before execution:",
                    path.display()
                );
                for issue in issues {
                    lines.push_str(&format!("\n  test {}: {}", issue.test_id, issue.detail));
                }
                CliError::config(lines)
            }
            other => CliError::config(other),
        })?;
        results.extend(outcome.results);
        log.extend(outcome.log);
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", args.out.display())))?;
    write_json(&args.out.join(format!("results-{}.json", args.label)), &results)?;

    let mut buf = Vec::new();
    write_ndjson(&log, &mut buf).map_err(CliError::config)?;
    std::fs::write(args.out.join(format!("log-{}.ndjson", args.label)), buf)
        .map_err(CliError::config)?;

    let stats = restamp_core::executor::summarize_results(&results);
    println!(
        "executed {} tests: {} passed, {} assertion errors, {} runtime errors",
        stats.generated, stats.successful, stats.assertion_errors, stats.other_runtime_errors
    );
    Ok(())
}
