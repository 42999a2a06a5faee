//! The two amplification workflows.
//!
//! `run_single_agent` drives one ReAct loop with two tools (spec retrieval
//! and local test execution). `run_multi_agent` drives the two-phase
//! pipeline: a planning phase (OpenAPI extraction, header/parameter/value
//! facets, planner) followed by a generation phase (writer, executor, and a
//! conditional, bounded repair branch). Both produce a parsed suite, a
//! role-tagged usage ledger, and a trace with one entry per model call.

mod multi;
mod single;
mod templates;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::SharedClock;
use crate::executor::{execute_suite, sha256_hex, TargetConfig};
use crate::gateway::{CallUsage, ChatBackend, ChatMessage, GatewayError, ToolSpec, UsageLedger};
use crate::spec_model::{ApiSpec, PathTemplate};
use crate::test_dsl::{parse_suite, render_suite, validate_suite, DslError, TestSuite};

pub use multi::{
    run_executor_agent, run_facet_agents, run_multi_agent, run_openapi_agent, run_planner,
    run_repair, run_writer, ExecutorVerdict,
};
pub use single::run_single_agent;
pub use templates::{AgentRole, PromptLibrary, PromptTemplate};

/// Sentinel the executor agent replies with when the candidate document has
/// no parse, validation or runtime errors.
pub const CLEAN_SENTINEL: &str = "NO_COMPILATION_ERRORS";

/// Termination word for the OpenAPI extraction agent.
pub const DONE_SENTINEL: &str = "DONE";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("template for {role} has no value for slot '{slot}'")]
    MissingSlot { role: AgentRole, slot: String },
    #[error("endpoint '{0}' does not exist in the specification")]
    UnknownEndpoint(String),
    #[error("{role} exceeded its iteration limit of {limit} model calls")]
    IterationLimitExceeded { role: AgentRole, limit: usize },
    #[error("final answer is not a parseable suite document: {detail}")]
    UnparseableFinalAnswer { detail: String, raw: String },
    #[error("test '{test_id}' targets '{path}', outside the endpoint under test '{endpoint}'")]
    ScopeViolation {
        endpoint: String,
        test_id: String,
        path: String,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Iteration caps keeping every failure mode bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Limits {
    #[serde(default = "default_single_agent_calls")]
    pub single_agent_calls: usize,
    #[serde(default = "default_openapi_calls")]
    pub openapi_calls: usize,
    #[serde(default = "default_repair_rounds")]
    pub repair_rounds: usize,
}

fn default_single_agent_calls() -> usize {
    20
}
fn default_openapi_calls() -> usize {
    10
}
fn default_repair_rounds() -> usize {
    3
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            single_agent_calls: default_single_agent_calls(),
            openapi_calls: default_openapi_calls(),
            repair_rounds: default_repair_rounds(),
        }
    }
}

/// Pipeline state; fields fill monotonically in pipeline order.
#[derive(Debug, Clone, Default)]
pub struct AmplificationState {
    pub endpoint_under_test: String,
    pub openapi_references: String,
    pub header_testcases: String,
    pub parameter_testcases: String,
    pub value_testcases: String,
    pub plan: String,
    pub suite_document: Vec<u8>,
    pub executor_feedback: String,
    pub repair_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolInvocation {
    pub name: String,
    pub arguments: String,
    pub result_digest: String,
}

/// One model call: who made it, digests of what went in and out, its usage,
/// and any tool invocations its response triggered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    pub role: AgentRole,
    pub prompt_digest: String,
    pub response_digest: String,
    pub usage: CallUsage,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_invocations: Vec<ToolInvocation>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowTrace {
    pub entries: Vec<TraceEntry>,
}

impl WorkflowTrace {
    pub fn roles(&self) -> Vec<AgentRole> {
        self.entries.iter().map(|e| e.role).collect()
    }
}

/// How the `test_executor` tool (and the multi-agent executor stage) treats
/// candidate suites: validation only, or validation plus live execution.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecutionMode {
    DryRun,
    Live(TargetConfig),
}

/// Everything a workflow needs besides its inputs.
pub struct WorkflowContext<'a> {
    pub spec: &'a ApiSpec,
    pub backend: &'a ChatBackend,
    pub prompts: &'a PromptLibrary,
    pub limits: Limits,
    pub execution: ExecutionMode,
    /// Fixture files advertised to the model (prompt slot `files`).
    pub files: Vec<String>,
    pub clock: SharedClock,
}

/// A completed workflow: the amplified suite plus its reproducibility record.
#[derive(Debug, Clone)]
pub struct WorkflowRun {
    pub suite: TestSuite,
    pub suite_document: Vec<u8>,
    pub ledger: UsageLedger,
    pub trace: WorkflowTrace,
    pub repair_rounds: usize,
    pub repair_limit_hit: bool,
}

/// An aborted workflow, with the partial ledger and trace preserved.
#[derive(Debug)]
pub struct WorkflowFailure {
    pub error: AgentError,
    pub ledger: UsageLedger,
    pub trace: WorkflowTrace,
}

pub type WorkflowResult = Result<WorkflowRun, Box<WorkflowFailure>>;

/// Records every model call into the ledger and trace as it happens, so
/// aborted workflows keep everything up to the failure.
pub struct StageRecorder<'a> {
    backend: &'a ChatBackend,
    clock: SharedClock,
    pub ledger: UsageLedger,
    pub trace: WorkflowTrace,
}

impl<'a> StageRecorder<'a> {
    pub fn new(backend: &'a ChatBackend, clock: SharedClock) -> StageRecorder<'a> {
        StageRecorder {
            backend,
            clock,
            ledger: UsageLedger::new(),
            trace: WorkflowTrace::default(),
        }
    }

    fn complete(
        &mut self,
        role: AgentRole,
        messages: &[ChatMessage],
        tools: Option<&[ToolSpec]>,
    ) -> Result<ChatMessage, AgentError> {
        let prompt_digest = digest_json(messages);
        let (message, usage) = self.backend.complete(messages, tools, &self.clock)?;
        self.ledger.push(role.as_str(), usage);
        self.trace.entries.push(TraceEntry {
            role,
            prompt_digest,
            response_digest: digest_json(&message),
            usage,
            tool_invocations: Vec::new(),
        });
        Ok(message)
    }

    fn attach_invocation(&mut self, invocation: ToolInvocation) {
        if let Some(entry) = self.trace.entries.last_mut() {
            entry.tool_invocations.push(invocation);
        }
    }

    fn into_failure(self, error: AgentError) -> Box<WorkflowFailure> {
        Box::new(WorkflowFailure {
            error,
            ledger: self.ledger,
            trace: self.trace,
        })
    }
}

fn digest_json<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).unwrap_or_default().as_bytes())
}

/// Insert a slot only when its value is non-empty, so rendering a template
/// whose state is not yet filled fails before any model call.
fn slot(map: &mut BTreeMap<&'static str, String>, name: &'static str, value: &str) {
    if !value.is_empty() {
        map.insert(name, value.to_string());
    }
}

fn files_slot(files: &[String]) -> String {
    if files.is_empty() {
        "(none)".to_string()
    } else {
        files.join("\n")
    }
}

/// Does a suite test path target the endpoint under test? Literal template
/// text, concrete instantiations, and `${var}` segments all count.
fn targets_endpoint(endpoint: &PathTemplate, test_path: &str) -> bool {
    test_path == endpoint.as_str() || endpoint.match_path(test_path).is_some()
}

/// Strip a Markdown code fence if the model wrapped its document in one.
fn extract_document(content: &str) -> &str {
    let trimmed = content.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        if let Some(body_start) = rest.find('\n') {
            let body = &rest[body_start + 1..];
            if let Some(end) = body.rfind("```") {
                return body[..end].trim();
            }
        }
    }
    trimmed
}

/// The machine-produced "console output" for a candidate suite document:
/// parse outcome, validation issues, and (in live mode) execution results.
pub(crate) fn execution_report(ctx: &WorkflowContext<'_>, document: &[u8]) -> String {
    let suite = match parse_suite(document) {
        Ok(suite) => suite,
        Err(e) => return format!("PARSE ERROR: {e}\n"),
    };
    let mut out = format!("Parsed {} tests.\n", suite.tests.len());
    let variables = match &ctx.execution {
        ExecutionMode::Live(target) => target.variables.clone(),
        ExecutionMode::DryRun => BTreeMap::new(),
    };
    let issues = validate_suite(&suite, Some(ctx.spec), &variables);
    if issues.is_empty() {
        out.push_str("Validation issues: (none)\n");
    } else {
        for issue in &issues {
            out.push_str(&format!(
                "VALIDATION ISSUE [{:?}] test {}: {}\n",
                issue.kind, issue.test_id, issue.detail
            ));
        }
    }
    match &ctx.execution {
        ExecutionMode::DryRun => out.push_str("Execution: skipped (dry run).\n"),
        ExecutionMode::Live(target) => match execute_suite(&suite, target, &ctx.clock) {
            Ok(outcome) => {
                for result in &outcome.results {
                    match result.outcome {
                        crate::executor::Outcome::Passed => {
                            out.push_str(&format!("{}: passed\n", result.test_id));
                        }
                        crate::executor::Outcome::AssertionFailed => {
                            let assertion = result
                                .failed_assertion
                                .as_ref()
                                .map(|a| format!("{} {}", a.kind, a.expected))
                                .unwrap_or_default();
                            out.push_str(&format!(
                                "{}: ASSERTION FAILURE expected {assertion}, observed {}\n",
                                result.test_id,
                                result.observed.as_deref().unwrap_or("?")
                            ));
                        }
                        crate::executor::Outcome::RuntimeError => {
                            out.push_str(&format!(
                                "{}: RUNTIME ERROR {}\n",
                                result.test_id,
                                result.error_detail.as_deref().unwrap_or("?")
                            ));
                        }
                    }
                }
            }
            Err(e) => out.push_str(&format!("EXECUTION BLOCKED: {e}\n")),
        },
    }
    out
}

/// Parse a final answer into a suite, preserving the raw text on failure.
fn parse_final_document(content: &str) -> Result<(TestSuite, Vec<u8>), AgentError> {
    let document = extract_document(content);
    match parse_suite(document.as_bytes()) {
        Ok(suite) => {
            let rendered = render_suite(&suite);
            Ok((suite, rendered))
        }
        Err(e) => Err(AgentError::UnparseableFinalAnswer {
            detail: dsl_error_text(&e),
            raw: content.to_string(),
        }),
    }
}

fn dsl_error_text(e: &DslError) -> String {
    e.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_targeting_rules() {
        let endpoint = PathTemplate::new("/pet/{petId}");
        assert!(targets_endpoint(&endpoint, "/pet/{petId}"));
        assert!(targets_endpoint(&endpoint, "/pet/123"));
        assert!(targets_endpoint(&endpoint, "/pet/${petId}"));
        assert!(!targets_endpoint(&endpoint, "/pet"));
        assert!(!targets_endpoint(&endpoint, "/store/order/1"));
    }

    #[test]
    fn code_fences_are_stripped() {
        assert_eq!(extract_document("{\"a\":1}"), "{\"a\":1}");
        assert_eq!(extract_document("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(extract_document("```\n{\"a\":1}\n```\n"), "{\"a\":1}");
    }

    #[test]
    fn default_limits_match_configured_caps() {
        let limits = Limits::default();
        assert_eq!(limits.single_agent_calls, 20);
        assert_eq!(limits.openapi_calls, 10);
        assert_eq!(limits.repair_rounds, 3);
    }
}
