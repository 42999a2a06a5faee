//! The amplified-test DSL.
//!
//! Agents emit test suites in this declarative JSON format instead of
//! source code in a general-purpose language; the executor runs them and
//! the linter replaces the manual refinement pass with machine-checkable
//! issues.
//!
//! Two token syntaxes appear in suite values:
//!
//! - `${name}` is a variable resolved from target configuration at
//!   execution time;
//! - `<NAME>` (letters, digits, spaces, dots, dashes, underscores) marks a
//!   value a human must supply before the suite is executable. XML
//!   constructs (`</x>`, `<?xml ...?>`, tags with attributes) never match;
//!   a bare attribute-free opening tag in a body is a known, accepted
//!   false positive of the linter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::spec_model::{ApiSpec, Method};

#[derive(Debug, Error)]
pub enum DslError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate test id '{0}'")]
    DuplicateId(String),
}

/// Methods a test step may use (the executor's five helpers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StepMethod {
    Get,
    Post,
    Put,
    Patch,
    Delete,
}

impl StepMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepMethod::Get => "GET",
            StepMethod::Post => "POST",
            StepMethod::Put => "PUT",
            StepMethod::Patch => "PATCH",
            StepMethod::Delete => "DELETE",
        }
    }

    pub fn to_method(self) -> Method {
        match self {
            StepMethod::Get => Method::Get,
            StepMethod::Post => Method::Post,
            StepMethod::Put => Method::Put,
            StepMethod::Patch => Method::Patch,
            StepMethod::Delete => Method::Delete,
        }
    }
}

impl fmt::Display for StepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One HTTP request description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct HttpStep {
    pub method: StepMethod,
    pub path: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub query: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_media_type: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub authenticate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertionKind {
    StatusEquals,
    StatusClassEquals,
    HeaderPresent,
    BodyContains,
    JsonPathEquals,
}

impl fmt::Display for AssertionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssertionKind::StatusEquals => "status_equals",
            AssertionKind::StatusClassEquals => "status_class_equals",
            AssertionKind::HeaderPresent => "header_present",
            AssertionKind::BodyContains => "body_contains",
            AssertionKind::JsonPathEquals => "json_path_equals",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub kind: AssertionKind,
    pub expected: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    pub name: String,
    pub request: HttpStep,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSuite {
    pub suite: String,
    pub tests: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(name: &str) -> TestSuite {
        TestSuite {
            suite: name.to_string(),
            tests: Vec::new(),
        }
    }
}

/// Parse a suite document, enforcing the format invariants.
pub fn parse_suite(document: &[u8]) -> Result<TestSuite, DslError> {
    let value: Value =
        serde_json::from_slice(document).map_err(|e| DslError::Syntax(e.to_string()))?;
    let suite: TestSuite =
        serde_json::from_value(value).map_err(|e| DslError::SchemaViolation(e.to_string()))?;

    let mut ids = BTreeSet::new();
    for test in &suite.tests {
        if !ids.insert(test.id.clone()) {
            return Err(DslError::DuplicateId(test.id.clone()));
        }
        if test.name.trim().is_empty() {
            return Err(DslError::SchemaViolation(format!(
                "test '{}' has an empty name",
                test.id
            )));
        }
        if test.assertions.is_empty() {
            return Err(DslError::SchemaViolation(format!(
                "test '{}' has no assertions",
                test.id
            )));
        }
        let mut header_keys = BTreeSet::new();
        for key in test.request.headers.keys() {
            if !header_keys.insert(key.to_lowercase()) {
                return Err(DslError::SchemaViolation(format!(
                    "test '{}' repeats header '{}' with different casing",
                    test.id, key
                )));
            }
        }
        for assertion in &test.assertions {
            check_assertion(&test.id, assertion)?;
        }
    }
    Ok(suite)
}

fn check_assertion(test_id: &str, a: &Assertion) -> Result<(), DslError> {
    let bad = |msg: &str| {
        Err(DslError::SchemaViolation(format!(
            "test '{test_id}': {} expects {msg}, got {}",
            a.kind, a.expected
        )))
    };
    match a.kind {
        AssertionKind::StatusEquals => match a.expected.as_i64() {
            Some(code) if (100..=599).contains(&code) => Ok(()),
            _ => bad("an integer status code 100-599"),
        },
        AssertionKind::StatusClassEquals => match a.expected.as_i64() {
            Some(class) if (1..=5).contains(&class) => Ok(()),
            _ => bad("an integer status class 1-5"),
        },
        AssertionKind::HeaderPresent | AssertionKind::BodyContains => {
            if a.expected.is_string() {
                Ok(())
            } else {
                bad("a string")
            }
        }
        AssertionKind::JsonPathEquals => {
            let ok = a
                .expected
                .as_object()
                .is_some_and(|o| o.get("path").is_some_and(Value::is_string) && o.contains_key("value"));
            if ok {
                Ok(())
            } else {
                bad("an object {\"path\": \"/json/pointer\", \"value\": ...}")
            }
        }
    }
}

/// Canonical, deterministic serialization: stable key order, two-space
/// indentation, trailing newline. Placeholders and variables are preserved
/// verbatim — rendering never resolves.
pub fn render_suite(suite: &TestSuite) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(suite).expect("suite serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// A machine-detectable defect that would have required manual refinement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefinementIssue {
    pub test_id: String,
    pub kind: IssueKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    UnresolvedPlaceholder,
    UnknownVariable,
    InvalidStepShape,
}

fn placeholder_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[A-Za-z0-9 _.\-]+>").expect("valid regex"))
}

fn variable_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("valid regex"))
}

/// Substitute `${name}` variables from a binding map; unbound variables are
/// left verbatim.
pub fn substitute_variables(text: &str, variables: &BTreeMap<String, String>) -> String {
    variable_re()
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let name = &caps[1];
            variables
                .get(name)
                .cloned()
                .unwrap_or_else(|| caps[0].to_string())
        })
        .into_owned()
}

/// Lint a suite for refinement issues. An empty result means the suite is
/// executable without human refinement. Issues are data, not failures.
///
/// With a spec supplied, steps whose (variable-resolved) path matches no
/// documented template are flagged, as are body-less steps on operations
/// that document request payloads.
pub fn validate_suite(
    suite: &TestSuite,
    spec: Option<&ApiSpec>,
    variables: &BTreeMap<String, String>,
) -> Vec<RefinementIssue> {
    let mut issues = Vec::new();
    for test in &suite.tests {
        lint_test(test, spec, variables, &mut issues);
    }
    issues
}

fn lint_test(
    test: &TestCase,
    spec: Option<&ApiSpec>,
    variables: &BTreeMap<String, String>,
    issues: &mut Vec<RefinementIssue>,
) {
    let step = &test.request;
    let mut push = |kind: IssueKind, detail: String| {
        issues.push(RefinementIssue {
            test_id: test.id.clone(),
            kind,
            detail,
        });
    };

    let mut fields: Vec<(String, &str)> = vec![("path".to_string(), step.path.as_str())];
    for (k, v) in &step.query {
        fields.push((format!("query '{k}'"), k));
        fields.push((format!("query '{k}'"), v));
    }
    for (k, v) in &step.headers {
        fields.push((format!("header '{k}'"), v));
    }
    if let Some(body) = &step.body {
        fields.push(("body".to_string(), body));
    }

    for (where_, text) in &fields {
        for m in placeholder_re().find_iter(text) {
            push(
                IssueKind::UnresolvedPlaceholder,
                format!("{where_} contains placeholder {}", m.as_str()),
            );
        }
        for caps in variable_re().captures_iter(text) {
            let name = &caps[1];
            if !variables.contains_key(name) {
                push(
                    IssueKind::UnknownVariable,
                    format!("{where_} references unbound variable ${{{name}}}"),
                );
            }
        }
    }

    let body_len = step.body.as_ref().map(|b| b.len()).unwrap_or(0);
    let mut shape_flagged = false;
    if body_len > 0 && step.body_media_type.is_none() {
        push(
            IssueKind::InvalidStepShape,
            "request has a body but no bodyMediaType".to_string(),
        );
        shape_flagged = true;
    }
    if step.body_media_type.is_some() && body_len == 0 {
        push(
            IssueKind::InvalidStepShape,
            format!(
                "request declares media type '{}' but carries no body",
                step.body_media_type.as_deref().unwrap_or("")
            ),
        );
        shape_flagged = true;
    }

    if let Some(spec) = spec {
        let resolved = substitute_variables(&step.path, variables);
        let concrete =
            !placeholder_re().is_match(&resolved) && !variable_re().is_match(&resolved);
        if concrete {
            let matched: Vec<_> = spec
                .paths
                .iter()
                .filter(|t| t.match_path(&resolved).is_some() || t.as_str() == resolved)
                .collect();
            if matched.is_empty() {
                push(
                    IssueKind::InvalidStepShape,
                    format!("path '{resolved}' matches no documented template"),
                );
            } else if !shape_flagged && body_len == 0 {
                let needs_body = matched.iter().any(|t| {
                    spec.operation(t.as_str(), step.method.to_method())
                        .is_some_and(|op| !op.request_types.is_empty())
                });
                let mutating = matches!(
                    step.method,
                    StepMethod::Post | StepMethod::Put | StepMethod::Patch
                );
                if needs_body && mutating {
                    push(
                        IssueKind::InvalidStepShape,
                        format!(
                            "{} '{}' documents a request payload but the step sends none",
                            step.method, resolved
                        ),
                    );
                }
            }
        }
    }
}
