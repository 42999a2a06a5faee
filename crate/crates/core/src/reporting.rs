//! Assemble run artifacts into the four report tables and machine-readable
//! bundles: execution statistics, failure categorization, structural
//! coverage, and LLM usage (time, tokens, cost, energy).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{CoverageReport, Criterion};
use crate::executor::TestStats;
use crate::gateway::{cost_of, energy_of, EnergyModel, PricingModel, UsageLedger};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
}

/// Derived usage aggregates for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UsageSummary {
    pub wall_time_ms: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub total_tokens: u64,
    /// Unit-less currency amount; the configured rates define the unit.
    pub cost: f64,
    pub energy_wh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigurationReport {
    pub label: String,
    pub stats: TestStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coverage: Option<CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub usage: Option<UsageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub system: String,
    pub configurations: Vec<ConfigurationReport>,
}

/// Raw material for one configuration column.
#[derive(Debug, Clone)]
pub struct ConfigurationInput {
    pub label: String,
    pub stats: TestStats,
    pub coverage: Option<CoverageReport>,
    pub ledger: Option<UsageLedger>,
}

fn column_rank(label: &str) -> u8 {
    let l = label.to_lowercase();
    if l.starts_with("initial") {
        0
    } else if l.starts_with("single") {
        1
    } else if l.starts_with("multi") {
        2
    } else {
        3
    }
}

/// Assemble a run report; cost and energy are derived from the ledgers.
/// Columns are ordered Initial, Single-Agent, Multi-Agent, then as given.
pub fn build_report(
    system: &str,
    configurations: Vec<ConfigurationInput>,
    pricing: &PricingModel,
    energy: &EnergyModel,
) -> Result<RunReport, ReportError> {
    let mut inputs = configurations;
    inputs.sort_by_key(|c| column_rank(&c.label));

    let mut out = Vec::with_capacity(inputs.len());
    for input in inputs {
        let s = &input.stats;
        if s.generated != s.successful + s.failed {
            return Err(ReportError::InconsistentInputs(format!(
                "{}: generated ({}) != successful ({}) + failed ({})",
                input.label, s.generated, s.successful, s.failed
            )));
        }
        if s.failed != s.assertion_errors + s.other_runtime_errors {
            return Err(ReportError::InconsistentInputs(format!(
                "{}: failed ({}) != assertion ({}) + runtime ({})",
                input.label, s.failed, s.assertion_errors, s.other_runtime_errors
            )));
        }
        let usage = input.ledger.as_ref().map(|ledger| UsageSummary {
            wall_time_ms: ledger.wall_time_ms(),
            input_tokens: ledger.input_tokens(),
            output_tokens: ledger.output_tokens(),
            total_tokens: ledger.total_tokens(),
            cost: cost_of(ledger, pricing),
            energy_wh: energy_of(ledger, energy),
        });
        out.push(ConfigurationReport {
            label: input.label,
            stats: input.stats,
            coverage: input.coverage,
            usage,
        });
    }
    Ok(RunReport {
        system: system.to_string(),
        configurations: out,
    })
}

/// Signed percentage-point coverage difference, per criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CriterionDelta {
    pub criterion: Criterion,
    /// `None` when the criterion is not applicable on either side.
    pub delta_points: Option<f64>,
}

/// Per-criterion deltas between two coverage reports over the same domains.
pub fn compare_configurations(
    a: &CoverageReport,
    b: &CoverageReport,
) -> Result<Vec<CriterionDelta>, ReportError> {
    let mut out = Vec::new();
    for criterion in Criterion::ALL {
        let ra = a.criterion(criterion);
        let rb = b.criterion(criterion);
        if ra.denominator != rb.denominator {
            return Err(ReportError::DomainMismatch(format!(
                "{}: denominators differ ({} vs {})",
                criterion.label(),
                ra.denominator,
                rb.denominator
            )));
        }
        let delta_points = match (ra.ratio, rb.ratio) {
            (Some(x), Some(y)) => Some((y - x) * 100.0),
            _ => None,
        };
        out.push(CriterionDelta {
            criterion,
            delta_points,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s.to_lowercase().as_str() {
            "json" => Some(ReportFormat::Json),
            "markdown" | "md" => Some(ReportFormat::Markdown),
            "csv" => Some(ReportFormat::Csv),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Monetary rounding: two decimals, half-up, applied only at render time.
fn money(v: f64) -> String {
    format!("{:.2}", (v * 100.0).round() / 100.0)
}

fn minutes(ms: u64) -> String {
    format!("{:.2}", ms as f64 / 60_000.0)
}

/// Deterministic rendering of a run report.
pub fn render_report(report: &RunReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut bytes =
                serde_json::to_vec_pretty(report).expect("report serialization cannot fail");
            bytes.push(b'\n');
            bytes
        }
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
        ReportFormat::Csv => render_csv(report).into_bytes(),
    }
}

struct MetricRow {
    section: &'static str,
    metric: String,
    cells: Vec<String>,
}

fn metric_rows(report: &RunReport) -> Vec<MetricRow> {
    let configs = &report.configurations;
    let collect = |metric: &str, section: &'static str, f: &dyn Fn(&ConfigurationReport) -> String| MetricRow {
        section,
        metric: metric.to_string(),
        cells: configs.iter().map(f).collect(),
    };

    let mut rows = vec![
        collect("Generated Test Cases", "execution", &|c| c.stats.generated.to_string()),
        collect("Successful Test Cases", "execution", &|c| c.stats.successful.to_string()),
        collect("Failed Test Cases", "execution", &|c| c.stats.failed.to_string()),
        collect("Failed Test Cases", "failures", &|c| c.stats.failed.to_string()),
        collect("Assertion Errors", "failures", &|c| c.stats.assertion_errors.to_string()),
        collect("Other Run-time Errors", "failures", &|c| {
            c.stats.other_runtime_errors.to_string()
        }),
    ];
    for criterion in Criterion::ALL {
        rows.push(collect(criterion.label(), "coverage", &|c| {
            c.coverage
                .as_ref()
                .map(|cov| cov.criterion(criterion).percent_label())
                .unwrap_or_else(|| "n/a".to_string())
        }));
    }
    rows.push(collect("Time (m)", "usage", &|c| {
        c.usage.as_ref().map(|u| minutes(u.wall_time_ms)).unwrap_or_else(|| "n/a".into())
    }));
    rows.push(collect("Tokens", "usage", &|c| {
        c.usage.as_ref().map(|u| u.total_tokens.to_string()).unwrap_or_else(|| "n/a".into())
    }));
    rows.push(collect("Cost of Usage", "usage", &|c| {
        c.usage.as_ref().map(|u| money(u.cost)).unwrap_or_else(|| "n/a".into())
    }));
    rows.push(collect("Energy Usage (Wh)", "usage", &|c| {
        c.usage.as_ref().map(|u| format!("{:.3}", u.energy_wh)).unwrap_or_else(|| "n/a".into())
    }));
    rows
}

fn render_markdown(report: &RunReport) -> String {
    let mut out = format!("# Run Report: {}\n", report.system);
    let labels: Vec<&str> = report.configurations.iter().map(|c| c.label.as_str()).collect();
    let rows = metric_rows(report);
    let sections = [
        ("execution", "Test Execution Statistics"),
        ("failures", "Categorization of Failed Test Cases"),
        ("coverage", "Structural API Coverage"),
        ("usage", "LLM Usage Statistics"),
    ];
    for (key, title) in sections {
        out.push_str(&format!("\n## {title}\n\n"));
        out.push_str("| Metric |");
        for label in &labels {
            out.push_str(&format!(" {label} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(labels.len()));
        out.push('\n');
        for row in rows.iter().filter(|r| r.section == key) {
            out.push_str(&format!("| {} |", row.metric));
            for cell in &row.cells {
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
    }
    out
}

/// One row per (system, metric, configuration).
fn render_csv(report: &RunReport) -> String {
    let mut out = String::from("system,section,metric,configuration,value\n");
    let rows = metric_rows(report);
    for row in &rows {
        for (config, cell) in report.configurations.iter().zip(&row.cells) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                report.system, row.section, row.metric, config.label, cell
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::CriterionReport;
    use crate::coverage::UndocumentedSummary;
    use crate::gateway::CallUsage;

    fn stats(successful: u64, assertion: u64, runtime: u64) -> TestStats {
        TestStats {
            generated: successful + assertion + runtime,
            successful,
            failed: assertion + runtime,
            assertion_errors: assertion,
            other_runtime_errors: runtime,
        }
    }

    fn coverage_with(numerators: &[u64], denominator: u64) -> CoverageReport {
        let criteria = Criterion::ALL
            .iter()
            .zip(numerators.iter().cycle())
            .map(|(c, n)| CriterionReport {
                criterion: *c,
                numerator: *n,
                denominator,
                ratio: if denominator == 0 {
                    None
                } else {
                    Some(*n as f64 / denominator as f64)
                },
            })
            .collect();
        CoverageReport {
            criteria,
            undocumented: UndocumentedSummary::default(),
        }
    }

    #[test]
    fn report_reproduces_the_execution_rows() {
        let input = ConfigurationInput {
            label: "Single-Agent".into(),
            stats: stats(58, 52, 8),
            coverage: None,
            ledger: None,
        };
        let report = build_report(
            "PetStore",
            vec![input],
            &PricingModel::default(),
            &EnergyModel::default(),
        )
        .unwrap();
        let s = &report.configurations[0].stats;
        assert_eq!(s.generated, 118);
        assert_eq!(s.failed, 60);
        assert_eq!(s.assertion_errors, 52);
        assert_eq!(s.other_runtime_errors, 8);
    }

    #[test]
    fn energy_cell_derived_from_ledger() {
        let mut ledger = UsageLedger::new();
        ledger.push(
            "single_agent",
            CallUsage {
                input_tokens: 50_000,
                output_tokens: 21_186,
                wall_time_ms: 0,
            },
        );
        let report = build_report(
            "PetStore",
            vec![ConfigurationInput {
                label: "Single-Agent".into(),
                stats: stats(0, 0, 0),
                coverage: None,
                ledger: Some(ledger),
            }],
            &PricingModel::default(),
            &EnergyModel::default(),
        )
        .unwrap();
        let usage = report.configurations[0].usage.as_ref().unwrap();
        assert_eq!(usage.total_tokens, 71_186);
        assert!((usage.energy_wh - 4.27).abs() <= 0.01);
    }

    #[test]
    fn inconsistent_inputs_rejected() {
        let mut bad = stats(1, 1, 0);
        bad.generated = 99;
        let err = build_report(
            "X",
            vec![ConfigurationInput {
                label: "Initial".into(),
                stats: bad,
                coverage: None,
                ledger: None,
            }],
            &PricingModel::default(),
            &EnergyModel::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ReportError::InconsistentInputs(_)));
    }

    #[test]
    fn columns_ordered_initial_single_multi() {
        let mk = |label: &str| ConfigurationInput {
            label: label.into(),
            stats: stats(0, 0, 0),
            coverage: None,
            ledger: None,
        };
        let report = build_report(
            "X",
            vec![mk("Multi-Agent"), mk("Initial"), mk("Single-Agent")],
            &PricingModel::default(),
            &EnergyModel::default(),
        )
        .unwrap();
        let labels: Vec<&str> = report.configurations.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, vec!["Initial", "Single-Agent", "Multi-Agent"]);
    }

    #[test]
    fn deterministic_rendering_in_every_format() {
        let report = build_report(
            "X",
            vec![ConfigurationInput {
                label: "Initial".into(),
                stats: stats(1, 2, 3),
                coverage: Some(coverage_with(&[1], 2)),
                ledger: None,
            }],
            &PricingModel::default(),
            &EnergyModel::default(),
        )
        .unwrap();
        for format in [ReportFormat::Json, ReportFormat::Markdown, ReportFormat::Csv] {
            assert_eq!(render_report(&report, format), render_report(&report, format));
        }
        let md = String::from_utf8(render_report(&report, ReportFormat::Markdown)).unwrap();
        for section in [
            "Test Execution Statistics",
            "Categorization of Failed Test Cases",
            "Structural API Coverage",
            "LLM Usage Statistics",
        ] {
            assert!(md.contains(section));
        }
        // missing ledger renders usage cells as n/a
        assert!(md.contains("| Time (m) | n/a |"));
        let csv = String::from_utf8(render_report(&report, ReportFormat::Csv)).unwrap();
        assert!(csv.lines().nth(1).unwrap().starts_with("X,execution,Generated Test Cases,Initial,"));
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let a = coverage_with(&[3], 4);
        let deltas = compare_configurations(&a, &a).unwrap();
        assert!(deltas.iter().all(|d| d.delta_points == Some(0.0)));
    }

    #[test]
    fn request_type_gap_matches_reported_difference() {
        // 72.2% vs 93.9% -> +21.7 percentage points
        let a = coverage_with(&[722], 1000);
        let b = coverage_with(&[939], 1000);
        let deltas = compare_configurations(&a, &b).unwrap();
        let delta = deltas
            .iter()
            .find(|d| d.criterion == Criterion::RequestType)
            .unwrap();
        assert!((delta.delta_points.unwrap() - 21.7).abs() < 1e-9);
    }

    #[test]
    fn differing_domains_rejected() {
        let a = coverage_with(&[1], 2);
        let b = coverage_with(&[1], 3);
        assert!(matches!(
            compare_configurations(&a, &b),
            Err(ReportError::DomainMismatch(_))
        ));
    }

    #[test]
    fn money_rounds_half_up_at_render_only() {
        assert_eq!(money(0.005), "0.01");
        assert_eq!(money(0.004999), "0.00");
        assert_eq!(money(1.0 / 3.0), "0.33");
    }
}
