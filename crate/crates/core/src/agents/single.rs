//! The single-agent ReAct workflow: one model reasons, retrieves spec
//! fragments, stores and executes candidate suites, and finally emits a
//! suite document for the endpoint under test.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::executor::sha256_hex;
use crate::gateway::{ChatMessage, ToolSpec};
use crate::spec_model::PathTemplate;
use crate::test_dsl::{render_suite, TestSuite};

use super::templates::AgentRole;
use super::{
    files_slot, parse_final_document, slot, targets_endpoint, AgentError, StageRecorder,
    ToolInvocation, WorkflowContext, WorkflowResult, WorkflowRun,
};

pub(crate) const TOOL_OPENAPI_RETRIEVER: &str = "openapi_retriever";
pub(crate) const TOOL_TEST_EXECUTOR: &str = "test_executor";

fn tool_specs() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: TOOL_OPENAPI_RETRIEVER.to_string(),
            description: "Query the OpenAPI documentation for an endpoint (query starts with '/') \
                          or a schema (query starts with an uppercase letter)."
                .to_string(),
            parameters: json!({
                "type": "object",
                "properties": {"query": {"type": "string"}},
                "required": ["query"]
            }),
        },
        ToolSpec {
            name: TOOL_TEST_EXECUTOR.to_string(),
            description: "Store and check a candidate suite document: parse it, lint it, and \
                          (when a target is configured) execute it, returning the console output."
                .to_string(),
            parameters: json!({
                "type": "object",
                "properties": {"suite": {"description": "the suite document, as an object or JSON string"}},
                "required": ["suite"]
            }),
        },
    ]
}

pub(crate) fn tool_specs_retriever_only() -> ToolSpec {
    tool_specs()
        .into_iter()
        .find(|t| t.name == TOOL_OPENAPI_RETRIEVER)
        .expect("retriever tool defined")
}

/// Execute one tool call; failures become tool-result text the model can
/// react to, never workflow errors.
pub(crate) fn run_tool(ctx: &WorkflowContext<'_>, name: &str, arguments: &str) -> String {
    let args: Value = match serde_json::from_str(arguments) {
        Ok(v) => v,
        Err(e) => return format!("Tool arguments are not valid JSON: {e}"),
    };
    match name {
        TOOL_OPENAPI_RETRIEVER => match args.get("query").and_then(Value::as_str) {
            Some(query) => ctx.spec.retrieve(query),
            None => "Missing string argument 'query'.".to_string(),
        },
        TOOL_TEST_EXECUTOR => {
            let document = match args.get("suite") {
                Some(Value::String(s)) => s.clone().into_bytes(),
                Some(other) => serde_json::to_vec(other).unwrap_or_default(),
                None => return "Missing argument 'suite'.".to_string(),
            };
            super::execution_report(ctx, &document)
        }
        other => format!(
            "Unknown tool '{other}'. Available tools: {TOOL_OPENAPI_RETRIEVER}, {TOOL_TEST_EXECUTOR}."
        ),
    }
}

/// Run the ReAct loop for one endpoint, seeded with the baseline suite.
///
/// The loop ends when the assistant emits a final suite document (parsed and
/// scope-checked against the endpoint) or when the iteration limit is hit;
/// the partial trace and ledger survive every failure.
pub fn run_single_agent(
    ctx: &WorkflowContext<'_>,
    endpoint: &str,
    baseline: &TestSuite,
) -> WorkflowResult {
    let mut recorder = StageRecorder::new(ctx.backend, ctx.clock.clone());
    let endpoint_template = PathTemplate::new(endpoint);
    if !ctx.spec.has_path(endpoint_template.as_str()) {
        return Err(recorder.into_failure(AgentError::UnknownEndpoint(endpoint.to_string())));
    }

    let mut slots = BTreeMap::new();
    let schema_names: Vec<&str> = ctx.spec.schemas.keys().map(String::as_str).collect();
    slot(
        &mut slots,
        "schemas",
        &if schema_names.is_empty() {
            "(none)".to_string()
        } else {
            schema_names.join(", ")
        },
    );
    slot(&mut slots, "files", &files_slot(&ctx.files));
    let system = match ctx.prompts.render(AgentRole::SingleAgent, &slots) {
        Ok(text) => text,
        Err(e) => return Err(recorder.into_failure(e)),
    };

    let baseline_text = String::from_utf8_lossy(&render_suite(baseline)).into_owned();
    let user = format!(
        "Endpoint under test: {}\n\nInitial test suite:\n{}",
        endpoint_template.as_str(),
        baseline_text
    );

    let tools = tool_specs();
    let mut messages = vec![ChatMessage::system(system), ChatMessage::user(user)];

    for _ in 0..ctx.limits.single_agent_calls {
        let message = match recorder.complete(AgentRole::SingleAgent, &messages, Some(&tools)) {
            Ok(m) => m,
            Err(e) => return Err(recorder.into_failure(e)),
        };

        if !message.tool_calls.is_empty() {
            messages.push(message.clone());
            for call in &message.tool_calls {
                let result = run_tool(ctx, &call.name, &call.arguments);
                recorder.attach_invocation(ToolInvocation {
                    name: call.name.clone(),
                    arguments: call.arguments.clone(),
                    result_digest: sha256_hex(result.as_bytes()),
                });
                messages.push(ChatMessage::tool_result(call.id.clone(), result));
            }
            continue;
        }

        // a tool-less response is the final answer
        let (suite, document) = match parse_final_document(&message.content) {
            Ok(pair) => pair,
            Err(e) => return Err(recorder.into_failure(e)),
        };
        for test in &suite.tests {
            if !targets_endpoint(&endpoint_template, &test.request.path) {
                return Err(recorder.into_failure(AgentError::ScopeViolation {
                    endpoint: endpoint_template.as_str().to_string(),
                    test_id: test.id.clone(),
                    path: test.request.path.clone(),
                }));
            }
        }
        return Ok(WorkflowRun {
            suite,
            suite_document: document,
            ledger: recorder.ledger,
            trace: recorder.trace,
            repair_rounds: 0,
            repair_limit_hit: false,
        });
    }

    let limit = ctx.limits.single_agent_calls;
    Err(recorder.into_failure(AgentError::IterationLimitExceeded {
        role: AgentRole::SingleAgent,
        limit,
    }))
}
