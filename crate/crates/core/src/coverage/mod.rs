//! Structural API coverage from a spec and an execution log.
//!
//! Seven ratio criteria (path, operation, status class, status, response
//! type, request type, parameter) plus a clearly-labeled eighth for
//! parameter values of finitely enumerable (enum/boolean) parameters.
//! Matching is deliberately tolerant: percent-decoded segment comparison,
//! case-insensitive methods, specificity-ranked templates — never the
//! strict exact-match log parsing that breaks on real traffic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::Interaction;
use crate::spec_model::{ApiSpec, Method, OperationDescriptor, ParamLocation};

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("ambiguous match: '{method} {path}' fits templates {candidates:?} with equal specificity")]
    AmbiguousMatch {
        method: String,
        path: String,
        candidates: Vec<String>,
    },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
}

/// A (path template, method) operation key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpKey {
    pub path: String,
    pub method: String,
}

impl std::fmt::Display for OpKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.method, self.path)
    }
}

/// A parameter identified by name and location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamKey {
    pub name: String,
    pub location: String,
}

impl std::fmt::Display for ParamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.name, self.location)
    }
}

/// The denominator sets of every coverage criterion.
///
/// Statuses exclude the `default` wildcard (it has no countable members);
/// its media types still contribute to the response-type domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageDomains {
    pub paths: BTreeSet<String>,
    pub operations: BTreeSet<OpKey>,
    pub statuses: BTreeSet<(OpKey, u16)>,
    pub status_classes: BTreeSet<(OpKey, u8)>,
    pub response_types: BTreeSet<(OpKey, String)>,
    pub request_types: BTreeSet<(OpKey, String)>,
    pub parameters: BTreeSet<(OpKey, ParamKey)>,
    pub parameter_values: BTreeSet<(OpKey, ParamKey, String)>,
}

/// Observation sets, same shapes as the domains.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSets {
    pub paths: BTreeSet<String>,
    pub operations: BTreeSet<OpKey>,
    pub statuses: BTreeSet<(OpKey, u16)>,
    pub status_classes: BTreeSet<(OpKey, u8)>,
    pub response_types: BTreeSet<(OpKey, String)>,
    pub request_types: BTreeSet<(OpKey, String)>,
    pub parameters: BTreeSet<(OpKey, ParamKey)>,
    pub parameter_values: BTreeSet<(OpKey, ParamKey, String)>,
}

/// What a log exercised, split into documented (in-domain) and undocumented
/// (observed but absent from the specification) sides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageObservations {
    pub documented: ObservationSets,
    pub undocumented: ObservationSets,
}

/// A successfully routed interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedInteraction<'a> {
    pub operation: &'a OperationDescriptor,
    pub path_params: BTreeMap<String, String>,
}

/// Route a concrete request onto the spec's operations.
///
/// Literal segments beat template segments: among matching templates the one
/// with the fewest template segments wins; a tie is surfaced as
/// [`CoverageError::AmbiguousMatch`], never silently chosen.
pub fn resolve_route<'a>(
    spec: &'a ApiSpec,
    method: &str,
    concrete_path: &str,
) -> Result<Option<MatchedInteraction<'a>>, CoverageError> {
    let Some(method) = Method::parse(method) else {
        return Ok(None);
    };
    let mut candidates: Vec<(usize, &OperationDescriptor, BTreeMap<String, String>)> = Vec::new();
    for op in &spec.operations {
        if op.method != method {
            continue;
        }
        if let Some(bindings) = op.path.match_path(concrete_path) {
            candidates.push((op.path.template_segment_count(), op, bindings));
        }
    }
    let Some(best) = candidates.iter().map(|(n, _, _)| *n).min() else {
        return Ok(None);
    };
    let mut winners: Vec<_> = candidates.into_iter().filter(|(n, _, _)| *n == best).collect();
    if winners.len() > 1 {
        return Err(CoverageError::AmbiguousMatch {
            method: method.as_str().to_string(),
            path: concrete_path.to_string(),
            candidates: winners
                .iter()
                .map(|(_, op, _)| op.path.as_str().to_string())
                .collect(),
        });
    }
    let (_, operation, path_params) = winners.pop().expect("non-empty");
    Ok(Some(MatchedInteraction {
        operation,
        path_params,
    }))
}

/// Extract the path portion of an interaction URL and strip the spec/target
/// base path at a segment boundary.
fn logical_path(spec: &ApiSpec, raw_url: &str) -> Option<String> {
    let url = url::Url::parse(raw_url).ok()?;
    let mut path = url.path().to_string();
    let base = &spec.base_path;
    if !base.is_empty() && path.starts_with(base.as_str()) {
        let rest = &path[base.len()..];
        if rest.is_empty() {
            path = "/".to_string();
        } else if rest.starts_with('/') {
            path = rest.to_string();
        }
    }
    Some(path)
}

/// Match one logged interaction against the spec.
pub fn match_interaction<'a>(
    spec: &'a ApiSpec,
    interaction: &Interaction,
) -> Result<Option<MatchedInteraction<'a>>, CoverageError> {
    let Some(path) = logical_path(spec, &interaction.url) else {
        return Ok(None);
    };
    resolve_route(spec, &interaction.method, &path)
}

/// Request headers that are transport plumbing, not API parameters; they are
/// only counted when the spec documents them explicitly.
const TRANSPORT_HEADERS: [&str; 10] = [
    "host",
    "authorization",
    "content-type",
    "content-length",
    "accept",
    "accept-encoding",
    "user-agent",
    "connection",
    "cookie",
    "transfer-encoding",
];

/// Fold an execution log into coverage observations.
///
/// Interactions that match no operation (including the rare ambiguous
/// template tie, which the direct matcher surfaces as an error) are recorded
/// on the undocumented side under their concrete path.
pub fn observe(log: &[Interaction], spec: &ApiSpec) -> CoverageObservations {
    let domains = spec.enumerate_coverage_domains();
    let mut obs = CoverageObservations::default();

    for interaction in log {
        let Some(path) = logical_path(spec, &interaction.url) else {
            continue;
        };
        match resolve_route(spec, &interaction.method, &path) {
            Ok(Some(matched)) => observe_matched(&domains, &mut obs, interaction, &matched),
            Ok(None) | Err(_) => observe_unmatched(&mut obs, interaction, &path),
        }
    }
    obs
}

fn observe_matched(
    domains: &CoverageDomains,
    obs: &mut CoverageObservations,
    interaction: &Interaction,
    matched: &MatchedInteraction<'_>,
) {
    let op = matched.operation;
    let key = op.key();

    obs.documented.paths.insert(op.path.as_str().to_string());
    obs.documented.operations.insert(key.clone());

    let status = interaction.response_status;
    let class = (status / 100) as u8;
    side(domains.statuses.contains(&(key.clone(), status)), obs)
        .statuses
        .insert((key.clone(), status));
    side(domains.status_classes.contains(&(key.clone(), class)), obs)
        .status_classes
        .insert((key.clone(), class));

    if let Some(mt) = &interaction.response_media_type {
        let pair = (key.clone(), mt.clone());
        side(domains.response_types.contains(&pair), obs)
            .response_types
            .insert(pair);
    }
    if let Some(mt) = &interaction.request_media_type {
        let pair = (key.clone(), mt.clone());
        side(domains.request_types.contains(&pair), obs)
            .request_types
            .insert(pair);
    }

    for (name, location, value) in observed_parameters(interaction, matched) {
        let documented_param = op.parameters.iter().find(|p| {
            p.location == location
                && if location == ParamLocation::Header {
                    p.name.eq_ignore_ascii_case(&name)
                } else {
                    p.name == name
                }
        });
        match documented_param {
            Some(p) => {
                let pk = ParamKey {
                    name: p.name.clone(),
                    location: location.as_str().to_string(),
                };
                obs.documented.parameters.insert((key.clone(), pk.clone()));
                if let Some(allowed) = &p.enum_values {
                    let triple = (key.clone(), pk, value.clone());
                    side(allowed.contains(&value), obs)
                        .parameter_values
                        .insert(triple);
                }
            }
            None => {
                if location == ParamLocation::Header
                    && TRANSPORT_HEADERS.contains(&name.to_lowercase().as_str())
                {
                    continue;
                }
                let pk = ParamKey {
                    name,
                    location: location.as_str().to_string(),
                };
                obs.undocumented.parameters.insert((key.clone(), pk));
            }
        }
    }
}

fn observe_unmatched(obs: &mut CoverageObservations, interaction: &Interaction, path: &str) {
    let key = OpKey {
        path: path.to_string(),
        method: interaction.method.to_uppercase(),
    };
    obs.undocumented.paths.insert(path.to_string());
    obs.undocumented.operations.insert(key.clone());
    let status = interaction.response_status;
    obs.undocumented.statuses.insert((key.clone(), status));
    obs.undocumented
        .status_classes
        .insert((key.clone(), (status / 100) as u8));
    if let Some(mt) = &interaction.response_media_type {
        obs.undocumented.response_types.insert((key.clone(), mt.clone()));
    }
    if let Some(mt) = &interaction.request_media_type {
        obs.undocumented.request_types.insert((key, mt.clone()));
    }
}

fn side(documented: bool, obs: &mut CoverageObservations) -> &mut ObservationSets {
    if documented {
        &mut obs.documented
    } else {
        &mut obs.undocumented
    }
}

/// Parameters carried by a logged request: query pairs, request headers,
/// cookie names, and the matched template's path bindings.
fn observed_parameters(
    interaction: &Interaction,
    matched: &MatchedInteraction<'_>,
) -> Vec<(String, ParamLocation, String)> {
    let mut out = Vec::new();
    if let Ok(url) = url::Url::parse(&interaction.url) {
        for (k, v) in url.query_pairs() {
            out.push((k.into_owned(), ParamLocation::Query, v.into_owned()));
        }
    }
    for (name, value) in &interaction.request_headers {
        if name.eq_ignore_ascii_case("cookie") {
            for piece in value.split(';') {
                let mut parts = piece.trim().splitn(2, '=');
                if let Some(cookie_name) = parts.next() {
                    if !cookie_name.is_empty() {
                        out.push((
                            cookie_name.to_string(),
                            ParamLocation::Cookie,
                            parts.next().unwrap_or("").to_string(),
                        ));
                    }
                }
            }
        } else {
            out.push((name.clone(), ParamLocation::Header, value.clone()));
        }
    }
    for (name, value) in &matched.path_params {
        out.push((name.clone(), ParamLocation::Path, value.clone()));
    }
    out
}

/// The eight criteria in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Path,
    Operation,
    StatusClass,
    Status,
    ResponseType,
    RequestType,
    Parameter,
    ParameterValue,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::Path,
        Criterion::Operation,
        Criterion::StatusClass,
        Criterion::Status,
        Criterion::ResponseType,
        Criterion::RequestType,
        Criterion::Parameter,
        Criterion::ParameterValue,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Criterion::Path => "Path",
            Criterion::Operation => "Operation",
            Criterion::StatusClass => "Status Class",
            Criterion::Status => "Status",
            Criterion::ResponseType => "Response Type",
            Criterion::RequestType => "Request Type",
            Criterion::Parameter => "Parameter",
            Criterion::ParameterValue => "Parameter Value",
        }
    }
}

/// One criterion's numerator, denominator, and ratio. A zero denominator
/// yields no ratio (reported as not applicable, never as 100%).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub numerator: u64,
    pub denominator: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratio: Option<f64>,
}

impl CriterionReport {
    pub fn percent_label(&self) -> String {
        match self.ratio {
            Some(r) => format!("{:.1}%", r * 100.0),
            None => "n/a".to_string(),
        }
    }
}

/// Undocumented observations, rendered as display strings for reporting.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UndocumentedSummary {
    pub paths: Vec<String>,
    pub operations: Vec<String>,
    pub statuses: Vec<String>,
    pub status_classes: Vec<String>,
    pub response_types: Vec<String>,
    pub request_types: Vec<String>,
    pub parameters: Vec<String>,
    pub parameter_values: Vec<String>,
}

impl UndocumentedSummary {
    pub fn total(&self) -> usize {
        self.paths.len()
            + self.operations.len()
            + self.statuses.len()
            + self.status_classes.len()
            + self.response_types.len()
            + self.request_types.len()
            + self.parameters.len()
            + self.parameter_values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub criteria: Vec<CriterionReport>,
    pub undocumented: UndocumentedSummary,
}

impl CoverageReport {
    pub fn criterion(&self, c: Criterion) -> &CriterionReport {
        self.criteria
            .iter()
            .find(|r| r.criterion == c)
            .expect("all criteria present")
    }
}

/// Compute the ratio report. Documented observations must be subsets of the
/// corresponding domains.
pub fn compute_report(
    domains: &CoverageDomains,
    obs: &CoverageObservations,
) -> Result<CoverageReport, CoverageError> {
    fn row<T: Ord + Clone>(
        criterion: Criterion,
        domain: &BTreeSet<T>,
        documented: &BTreeSet<T>,
    ) -> Result<CriterionReport, CoverageError> {
        if !documented.is_subset(domain) {
            return Err(CoverageError::DomainMismatch(format!(
                "documented {} observations are not a subset of the domain",
                criterion.label()
            )));
        }
        let numerator = documented.len() as u64;
        let denominator = domain.len() as u64;
        Ok(CriterionReport {
            criterion,
            numerator,
            denominator,
            ratio: if denominator == 0 {
                None
            } else {
                Some(numerator as f64 / denominator as f64)
            },
        })
    }

    let d = &obs.documented;
    let criteria = vec![
        row(Criterion::Path, &domains.paths, &d.paths)?,
        row(Criterion::Operation, &domains.operations, &d.operations)?,
        row(Criterion::StatusClass, &domains.status_classes, &d.status_classes)?,
        row(Criterion::Status, &domains.statuses, &d.statuses)?,
        row(Criterion::ResponseType, &domains.response_types, &d.response_types)?,
        row(Criterion::RequestType, &domains.request_types, &d.request_types)?,
        row(Criterion::Parameter, &domains.parameters, &d.parameters)?,
        row(Criterion::ParameterValue, &domains.parameter_values, &d.parameter_values)?,
    ];

    let u = &obs.undocumented;
    let undocumented = UndocumentedSummary {
        paths: u.paths.iter().cloned().collect(),
        operations: u.operations.iter().map(|k| k.to_string()).collect(),
        statuses: u.statuses.iter().map(|(k, s)| format!("{k} -> {s}")).collect(),
        status_classes: u
            .status_classes
            .iter()
            .map(|(k, c)| format!("{k} -> {c}xx"))
            .collect(),
        response_types: u
            .response_types
            .iter()
            .map(|(k, m)| format!("{k} -> {m}"))
            .collect(),
        request_types: u
            .request_types
            .iter()
            .map(|(k, m)| format!("{k} -> {m}"))
            .collect(),
        parameters: u.parameters.iter().map(|(k, p)| format!("{k} -> {p}")).collect(),
        parameter_values: u
            .parameter_values
            .iter()
            .map(|(k, p, v)| format!("{k} -> {p} = {v}"))
            .collect(),
    };

    Ok(CoverageReport {
        criteria,
        undocumented,
    })
}

/// One-call convenience: observe a log and compute its report.
pub fn report_for_log(spec: &ApiSpec, log: &[Interaction]) -> Result<CoverageReport, CoverageError> {
    compute_report(&spec.enumerate_coverage_domains(), &observe(log, spec))
}

/// Markdown table mirroring the criterion-rows / configuration-columns
/// layout, one column per labeled report.
pub fn render_markdown(reports: &[(String, CoverageReport)]) -> String {
    let mut out = String::from("| Criterion |");
    for (label, _) in reports {
        out.push_str(&format!(" {label} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(reports.len()));
    out.push('\n');
    for criterion in Criterion::ALL {
        out.push_str(&format!("| {} |", criterion.label()));
        for (_, report) in reports {
            out.push_str(&format!(" {} |", report.criterion(criterion).percent_label()));
        }
        out.push('\n');
    }
    for (label, report) in reports {
        out.push_str(&format!(
            "\nUndocumented observations ({}): {}\n",
            label,
            report.undocumented.total()
        ));
    }
    out
}

/// CSV with the same layout: criterion rows, one column per labeled report.
pub fn render_csv(reports: &[(String, CoverageReport)]) -> String {
    let mut out = String::from("Criterion");
    for (label, _) in reports {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for criterion in Criterion::ALL {
        out.push_str(criterion.label());
        for (_, report) in reports {
            out.push(',');
            out.push_str(&report.criterion(criterion).percent_label());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests;
