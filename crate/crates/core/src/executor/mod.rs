//! Execute test suites against a target API and classify outcomes.
//!
//! Execution is sequential, in suite order, with no retries — retries and
//! races would distort coverage counts and status observations. Every
//! completed exchange appends one [`Interaction`] to the log; requests that
//! never reach the wire (connect failures, timeouts) leave no log entry and
//! surface as `runtime_error` results instead.

mod auth;
mod log;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clock::{rfc3339_utc, SharedClock};
use crate::spec_model::normalize_media_type;
use crate::test_dsl::{
    substitute_variables, validate_suite, Assertion, AssertionKind, IssueKind, RefinementIssue,
    StepMethod, TestSuite,
};

pub use auth::{mint_token, AuthProvider, Authenticator, MintedToken};
pub use log::{body_record, read_ndjson, sha256_hex, write_ndjson, Interaction, BODY_TRUNCATE_BYTES};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("suite has unresolved placeholders: {0:?}")]
    PreconditionFailed(Vec<RefinementIssue>),
    #[error("credential error: {0}")]
    Credential(String),
    #[error("invalid target config: {0}")]
    InvalidTarget(String),
}

/// Where and how to run a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TargetConfig {
    /// Absolute HTTP(S) URL of the system under test.
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth: Option<AuthProvider>,
    /// Bindings for `${name}` variables in suites.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub variables: BTreeMap<String, String>,
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

impl TargetConfig {
    pub fn new(base_url: &str) -> TargetConfig {
        TargetConfig {
            base_url: base_url.to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            auth: None,
            variables: BTreeMap::new(),
        }
    }

    fn validate(&self) -> Result<(), ExecError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ExecError::InvalidTarget(format!(
                "baseUrl must be an absolute http(s) URL, got '{}'",
                self.base_url
            )));
        }
        if self.timeout_ms == 0 {
            return Err(ExecError::InvalidTarget("timeoutMs must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Passed,
    AssertionFailed,
    RuntimeError,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Passed => "passed",
            Outcome::AssertionFailed => "assertion_failed",
            Outcome::RuntimeError => "runtime_error",
        };
        f.write_str(s)
    }
}

/// Exactly one per executed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestResult {
    pub test_id: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failed_assertion: Option<Assertion>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_detail: Option<String>,
}

/// Failure taxonomy: assertion errors vs other runtime errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    Success,
    AssertionError,
    OtherRuntimeError,
}

pub fn classify_outcome(result: &TestResult) -> FailureCategory {
    match result.outcome {
        Outcome::Passed => FailureCategory::Success,
        Outcome::AssertionFailed => FailureCategory::AssertionError,
        Outcome::RuntimeError => FailureCategory::OtherRuntimeError,
    }
}

/// Aggregate execution statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestStats {
    pub generated: u64,
    pub successful: u64,
    pub failed: u64,
    pub assertion_errors: u64,
    pub other_runtime_errors: u64,
}

pub fn summarize_results(results: &[TestResult]) -> TestStats {
    let mut stats = TestStats::default();
    for r in results {
        stats.generated += 1;
        match classify_outcome(r) {
            FailureCategory::Success => stats.successful += 1,
            FailureCategory::AssertionError => {
                stats.failed += 1;
                stats.assertion_errors += 1;
            }
            FailureCategory::OtherRuntimeError => {
                stats.failed += 1;
                stats.other_runtime_errors += 1;
            }
        }
    }
    stats
}

/// Results plus the interaction log of one suite run.
#[derive(Debug, Clone)]
pub struct ExecutionOutcome {
    pub results: Vec<TestResult>,
    pub log: Vec<Interaction>,
}

pub(crate) fn build_agent(timeout_ms: u64) -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .build();
    ureq::Agent::new_with_config(config)
}

/// Run a suite against a target, sequentially, capturing every completed
/// exchange. Unresolved placeholders abort the run; per-test network
/// failures do not.
pub fn execute_suite(
    suite: &TestSuite,
    target: &TargetConfig,
    clock: &SharedClock,
) -> Result<ExecutionOutcome, ExecError> {
    target.validate()?;
    let placeholder_issues: Vec<RefinementIssue> =
        validate_suite(suite, None, &target.variables)
            .into_iter()
            .filter(|i| i.kind == IssueKind::UnresolvedPlaceholder)
            .collect();
    if !placeholder_issues.is_empty() {
        return Err(ExecError::PreconditionFailed(placeholder_issues));
    }

    let agent = build_agent(target.timeout_ms);
    let authenticator = Authenticator::new(target.auth.clone());
    let mut results = Vec::with_capacity(suite.tests.len());
    let mut log = Vec::new();

    for test in &suite.tests {
        match run_one(test, target, &agent, &authenticator, clock) {
            Ok((result, interaction)) => {
                results.push(result);
                log.push(interaction);
            }
            Err(detail) => {
                results.push(TestResult {
                    test_id: test.id.clone(),
                    outcome: Outcome::RuntimeError,
                    failed_assertion: None,
                    observed: None,
                    error_detail: Some(detail),
                });
            }
        }
    }
    Ok(ExecutionOutcome { results, log })
}

struct CapturedResponse {
    status: u16,
    headers: BTreeMap<String, String>,
    body: Vec<u8>,
}

fn run_one(
    test: &crate::test_dsl::TestCase,
    target: &TargetConfig,
    agent: &ureq::Agent,
    authenticator: &Authenticator,
    clock: &SharedClock,
) -> Result<(TestResult, Interaction), String> {
    let step = &test.request;
    let vars = &target.variables;

    let path = substitute_variables(&step.path, vars);
    let mut url = url::Url::parse(&format!(
        "{}{}",
        target.base_url.trim_end_matches('/'),
        if path.starts_with('/') { path.clone() } else { format!("/{path}") }
    ))
    .map_err(|e| format!("invalid url: {e}"))?;
    for (k, v) in &step.query {
        url.query_pairs_mut()
            .append_pair(&substitute_variables(k, vars), &substitute_variables(v, vars));
    }

    let mut headers: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in &step.headers {
        headers.insert(k.clone(), substitute_variables(v, vars));
    }
    let body = step
        .body
        .as_ref()
        .map(|b| substitute_variables(b, vars).into_bytes());
    let media_type = step.body_media_type.as_ref().map(|m| normalize_media_type(m));
    if let Some(mt) = &media_type {
        let declared = headers.keys().any(|k| k.eq_ignore_ascii_case("content-type"));
        if !declared {
            headers.insert("Content-Type".to_string(), mt.clone());
        }
    }
    if step.authenticate {
        let value = authenticator
            .header_value(agent, clock)
            .map_err(|e| e.to_string())?;
        headers.insert("Authorization".to_string(), value);
    }

    let started = clock.now_unix_ms();
    let response = transmit(agent, step.method, url.as_str(), &headers, body.as_deref())
        .map_err(|e| format!("request failed: {e}"))?;
    let duration_ms = (clock.now_unix_ms() - started).max(0) as u64;

    let response_media_type = response
        .headers
        .get("content-type")
        .map(|v| normalize_media_type(v));
    let (resp_text, resp_digest) = body_record(&response.body);
    let (req_text, req_digest) = match &body {
        Some(b) => {
            let (t, d) = body_record(b);
            (Some(t), Some(d))
        }
        None => (None, None),
    };

    // the Date transport header is pure clock noise; dropping it keeps
    // logs byte-reproducible (assertions still see the full header set)
    let mut logged_headers = response.headers.clone();
    logged_headers.remove("date");
    let interaction = Interaction {
        test_id: test.id.clone(),
        timestamp: rfc3339_utc(started),
        method: step.method.as_str().to_string(),
        url: url.to_string(),
        request_headers: headers,
        request_media_type: media_type,
        request_body: req_text,
        request_body_digest: req_digest,
        response_status: response.status,
        response_headers: logged_headers,
        response_media_type,
        response_body: if response.body.is_empty() { None } else { Some(resp_text) },
        response_body_digest: if response.body.is_empty() { None } else { Some(resp_digest) },
        duration_ms,
    };

    let result = evaluate_assertions(test, &response);
    Ok((result, interaction))
}

fn transmit(
    agent: &ureq::Agent,
    method: StepMethod,
    url: &str,
    headers: &BTreeMap<String, String>,
    body: Option<&[u8]>,
) -> Result<CapturedResponse, ureq::Error> {
    let response = match method {
        StepMethod::Get | StepMethod::Delete => {
            let mut req = match method {
                StepMethod::Get => agent.get(url),
                _ => agent.delete(url),
            };
            for (k, v) in headers {
                req = req.header(k, v);
            }
            match body {
                Some(b) => req.force_send_body().send(b)?,
                None => req.call()?,
            }
        }
        StepMethod::Post | StepMethod::Put | StepMethod::Patch => {
            let mut req = match method {
                StepMethod::Post => agent.post(url),
                StepMethod::Put => agent.put(url),
                _ => agent.patch(url),
            };
            for (k, v) in headers {
                req = req.header(k, v);
            }
            req.send(body.unwrap_or_default())?
        }
    };
    let status = response.status().as_u16();
    let mut header_map: BTreeMap<String, String> = BTreeMap::new();
    for (name, value) in response.headers() {
        let key = name.as_str().to_lowercase();
        let value = value.to_str().unwrap_or("").to_string();
        header_map
            .entry(key)
            .and_modify(|v| {
                v.push_str(", ");
                v.push_str(&value);
            })
            .or_insert(value);
    }
    let mut response = response;
    let body = response
        .body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_vec()?;
    Ok(CapturedResponse {
        status,
        headers: header_map,
        body,
    })
}

fn evaluate_assertions(
    test: &crate::test_dsl::TestCase,
    response: &CapturedResponse,
) -> TestResult {
    for assertion in &test.assertions {
        if let Some(observed) = assertion_failure(assertion, response) {
            return TestResult {
                test_id: test.id.clone(),
                outcome: Outcome::AssertionFailed,
                failed_assertion: Some(assertion.clone()),
                observed: Some(observed),
                error_detail: None,
            };
        }
    }
    TestResult {
        test_id: test.id.clone(),
        outcome: Outcome::Passed,
        failed_assertion: None,
        observed: None,
        error_detail: None,
    }
}

/// `None` when the assertion holds; the observed value otherwise.
fn assertion_failure(assertion: &Assertion, response: &CapturedResponse) -> Option<String> {
    match assertion.kind {
        AssertionKind::StatusEquals => {
            let expected = assertion.expected.as_i64().unwrap_or(-1);
            if i64::from(response.status) == expected {
                None
            } else {
                Some(response.status.to_string())
            }
        }
        AssertionKind::StatusClassEquals => {
            let expected = assertion.expected.as_i64().unwrap_or(-1);
            let class = i64::from(response.status / 100);
            if class == expected {
                None
            } else {
                Some(format!("{}xx", response.status / 100))
            }
        }
        AssertionKind::HeaderPresent => {
            let name = assertion.expected.as_str().unwrap_or("").to_lowercase();
            if response.headers.contains_key(&name) {
                None
            } else {
                Some(format!("header '{name}' absent"))
            }
        }
        AssertionKind::BodyContains => {
            let needle = assertion.expected.as_str().unwrap_or("");
            let haystack = String::from_utf8_lossy(&response.body);
            if haystack.contains(needle) {
                None
            } else {
                Some(snippet(&haystack))
            }
        }
        AssertionKind::JsonPathEquals => {
            let (path, expected) = match assertion.expected.as_object() {
                Some(o) => (
                    o.get("path").and_then(Value::as_str).unwrap_or(""),
                    o.get("value").cloned().unwrap_or(Value::Null),
                ),
                None => ("", Value::Null),
            };
            let parsed: Result<Value, _> = serde_json::from_slice(&response.body);
            match parsed {
                Ok(doc) => match doc.pointer(path) {
                    Some(actual) if *actual == expected => None,
                    Some(actual) => Some(actual.to_string()),
                    None => Some(format!("no value at '{path}'")),
                },
                Err(_) => Some("response body is not JSON".to_string()),
            }
        }
    }
}

fn snippet(text: &str) -> String {
    let mut s: String = text.chars().take(200).collect();
    if text.chars().count() > 200 {
        s.push_str("...");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(outcome: Outcome) -> TestResult {
        TestResult {
            test_id: "t".into(),
            outcome,
            failed_assertion: None,
            observed: None,
            error_detail: if outcome == Outcome::RuntimeError {
                Some("boom".into())
            } else {
                None
            },
        }
    }

    #[test]
    fn classification_is_a_direct_mapping() {
        assert_eq!(
            classify_outcome(&result(Outcome::Passed)),
            FailureCategory::Success
        );
        assert_eq!(
            classify_outcome(&result(Outcome::AssertionFailed)),
            FailureCategory::AssertionError
        );
        assert_eq!(
            classify_outcome(&result(Outcome::RuntimeError)),
            FailureCategory::OtherRuntimeError
        );
    }

    #[test]
    fn summary_matches_reported_rows() {
        // 58 passed + 60 failed -> 118 generated; 52 assertion + 8 runtime -> 60 failed
        let mut results = Vec::new();
        results.extend(std::iter::repeat_with(|| result(Outcome::Passed)).take(58));
        results.extend(std::iter::repeat_with(|| result(Outcome::AssertionFailed)).take(52));
        results.extend(std::iter::repeat_with(|| result(Outcome::RuntimeError)).take(8));
        let stats = summarize_results(&results);
        assert_eq!(stats.generated, 118);
        assert_eq!(stats.successful, 58);
        assert_eq!(stats.failed, 60);
        assert_eq!(stats.assertion_errors, 52);
        assert_eq!(stats.other_runtime_errors, 8);
    }

    #[test]
    fn empty_results_are_all_zero() {
        assert_eq!(summarize_results(&[]), TestStats::default());
    }

    #[test]
    fn categories_partition_results() {
        let results = vec![
            result(Outcome::Passed),
            result(Outcome::AssertionFailed),
            result(Outcome::RuntimeError),
            result(Outcome::Passed),
        ];
        let stats = summarize_results(&results);
        assert_eq!(
            stats.successful + stats.assertion_errors + stats.other_runtime_errors,
            results.len() as u64
        );
        assert_eq!(stats.generated, stats.successful + stats.failed);
    }

    #[test]
    fn invalid_target_rejected() {
        let bad = TargetConfig::new("ftp://nope");
        assert!(matches!(
            bad.validate(),
            Err(ExecError::InvalidTarget(_))
        ));
        let mut zero = TargetConfig::new("http://ok");
        zero.timeout_ms = 0;
        assert!(zero.validate().is_err());
    }

    #[test]
    fn target_config_defaults() {
        let cfg: TargetConfig =
            serde_json::from_str(r#"{"baseUrl": "http://localhost:1234"}"#).unwrap();
        assert_eq!(cfg.timeout_ms, DEFAULT_TIMEOUT_MS);
        assert!(cfg.auth.is_none());
        assert!(cfg.variables.is_empty());
    }
}
