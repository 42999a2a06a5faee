//! The multi-agent two-phase pipeline.
//!
//! Planning: OpenAPI extraction gathers references, then the header,
//! parameter and value facet agents propose inputs, and the planner
//! consolidates them into a test plan. Generation: the writer turns the
//! plan into a suite document, the executor agent judges the machine
//! execution output, and a conditional repair branch reworks the document —
//! only when the executor reports errors, and at most `repair_rounds`
//! times. The pipeline is linear: nothing feeds back into planning.
//!
//! The three facet calls are mutually independent. They run sequentially
//! here so scripted backends stay deterministic; endpoint-level concurrency
//! lives in the caller.

use std::collections::BTreeMap;

use crate::executor::sha256_hex;
use crate::gateway::ChatMessage;
use crate::spec_model::PathTemplate;
use crate::test_dsl::{render_suite, TestSuite};

use super::templates::AgentRole;
use super::{
    files_slot, parse_final_document, slot, AgentError, AmplificationState, StageRecorder,
    ToolInvocation, WorkflowContext, WorkflowResult, WorkflowRun, CLEAN_SENTINEL, DONE_SENTINEL,
};
use super::single::{run_tool, TOOL_OPENAPI_RETRIEVER};

/// ReAct loop restricted to the retriever tool; accumulates every retrieval
/// into one references text. Ends on a bare `DONE` reply or the call cap.
pub fn run_openapi_agent(
    ctx: &WorkflowContext<'_>,
    endpoint: &str,
    recorder: &mut StageRecorder<'_>,
) -> Result<String, AgentError> {
    let mut slots = BTreeMap::new();
    slot(&mut slots, "endpoint_under_test", endpoint);
    let prompt = ctx.prompts.render(AgentRole::OpenapiExtraction, &slots)?;

    let tools = vec![super::single::tool_specs_retriever_only()];
    let mut messages = vec![ChatMessage::user(prompt)];
    let mut references: Vec<String> = Vec::new();

    for _ in 0..ctx.limits.openapi_calls {
        let message = recorder.complete(AgentRole::OpenapiExtraction, &messages, Some(&tools))?;
        if message.tool_calls.is_empty() && message.content.trim() == DONE_SENTINEL {
            return Ok(references.join("\n\n"));
        }
        messages.push(message.clone());
        for call in &message.tool_calls {
            let result = run_tool(ctx, &call.name, &call.arguments);
            recorder.attach_invocation(ToolInvocation {
                name: call.name.clone(),
                arguments: call.arguments.clone(),
                result_digest: sha256_hex(result.as_bytes()),
            });
            if call.name == TOOL_OPENAPI_RETRIEVER {
                references.push(result.clone());
            }
            messages.push(ChatMessage::tool_result(call.id.clone(), result));
        }
    }
    Err(AgentError::IterationLimitExceeded {
        role: AgentRole::OpenapiExtraction,
        limit: ctx.limits.openapi_calls,
    })
}

/// One single-call completion per facet (header, parameter, value), each
/// rendered with the references placed before the instructions. All three
/// are attempted even when one fails, so partial state is preserved.
pub fn run_facet_agents(
    ctx: &WorkflowContext<'_>,
    state: &mut AmplificationState,
    recorder: &mut StageRecorder<'_>,
) -> Result<(), AgentError> {
    let mut first_error: Option<AgentError> = None;
    for role in [AgentRole::Header, AgentRole::Parameter, AgentRole::Value] {
        let mut slots = BTreeMap::new();
        slot(&mut slots, "openapi_references", &state.openapi_references);
        slot(&mut slots, "endpoint_under_test", &state.endpoint_under_test);
        let rendered = match ctx.prompts.render(role, &slots) {
            Ok(text) => text,
            Err(e) => {
                first_error.get_or_insert(e);
                continue;
            }
        };
        match recorder.complete(role, &[ChatMessage::user(rendered)], None) {
            Ok(message) => {
                let target = match role {
                    AgentRole::Header => &mut state.header_testcases,
                    AgentRole::Parameter => &mut state.parameter_testcases,
                    _ => &mut state.value_testcases,
                };
                *target = message.content;
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Consolidate the facet suggestions into one test plan. All three facet
/// fields must be filled; a missing one fails at render time, before any
/// model call.
pub fn run_planner(
    ctx: &WorkflowContext<'_>,
    state: &mut AmplificationState,
    recorder: &mut StageRecorder<'_>,
) -> Result<(), AgentError> {
    let mut slots = BTreeMap::new();
    slot(&mut slots, "openapi_references", &state.openapi_references);
    slot(&mut slots, "header_testcases", &state.header_testcases);
    slot(&mut slots, "parameter_testcases", &state.parameter_testcases);
    slot(&mut slots, "value_testcases", &state.value_testcases);
    slot(&mut slots, "files", &files_slot(&ctx.files));
    let rendered = ctx.prompts.render(AgentRole::Planner, &slots)?;
    let message = recorder.complete(AgentRole::Planner, &[ChatMessage::user(rendered)], None)?;
    state.plan = message.content;
    Ok(())
}

/// Convert the plan into a candidate suite document, seeded with the
/// rendered baseline suite.
pub fn run_writer(
    ctx: &WorkflowContext<'_>,
    state: &mut AmplificationState,
    baseline: &TestSuite,
    recorder: &mut StageRecorder<'_>,
) -> Result<(), AgentError> {
    let baseline_text = String::from_utf8_lossy(&render_suite(baseline)).into_owned();
    let mut slots = BTreeMap::new();
    slot(&mut slots, "baseline_suite", &baseline_text);
    slot(&mut slots, "plan", &state.plan);
    let rendered = ctx.prompts.render(AgentRole::Writer, &slots)?;
    let message = recorder.complete(AgentRole::Writer, &[ChatMessage::user(rendered)], None)?;
    state.suite_document = super::extract_document(&message.content).as_bytes().to_vec();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecutorVerdict {
    /// The executor agent replied with the clean sentinel.
    Clean,
    /// Feedback for the repair agent.
    Feedback(String),
}

/// Validate (and in live mode execute) the candidate document, then let the
/// executor agent judge the machine output. Assertion failures alone never
/// produce feedback for repair.
pub fn run_executor_agent(
    ctx: &WorkflowContext<'_>,
    suite_document: &[u8],
    recorder: &mut StageRecorder<'_>,
) -> Result<ExecutorVerdict, AgentError> {
    let output = super::execution_report(ctx, suite_document);
    let mut slots = BTreeMap::new();
    slot(&mut slots, "execution_output", &output);
    let rendered = ctx.prompts.render(AgentRole::Executor, &slots)?;
    let message = recorder.complete(AgentRole::Executor, &[ChatMessage::user(rendered)], None)?;
    if message.content.trim() == CLEAN_SENTINEL {
        Ok(ExecutorVerdict::Clean)
    } else {
        Ok(ExecutorVerdict::Feedback(message.content))
    }
}

/// One repair completion; the output replaces the candidate document and
/// the caller's round counter advances by exactly one.
pub fn run_repair(
    ctx: &WorkflowContext<'_>,
    state: &mut AmplificationState,
    recorder: &mut StageRecorder<'_>,
) -> Result<(), AgentError> {
    let document_text = String::from_utf8_lossy(&state.suite_document).into_owned();
    let mut slots = BTreeMap::new();
    slot(&mut slots, "suite_document", &document_text);
    slot(&mut slots, "feedback", &state.executor_feedback);
    let rendered = ctx.prompts.render(AgentRole::Repair, &slots)?;
    let message = recorder.complete(AgentRole::Repair, &[ChatMessage::user(rendered)], None)?;
    state.suite_document = super::extract_document(&message.content).as_bytes().to_vec();
    state.repair_rounds += 1;
    Ok(())
}

/// The full two-phase pipeline for one endpoint.
pub fn run_multi_agent(
    ctx: &WorkflowContext<'_>,
    endpoint: &str,
    baseline: &TestSuite,
) -> WorkflowResult {
    let mut recorder = StageRecorder::new(ctx.backend, ctx.clock.clone());
    let endpoint_template = PathTemplate::new(endpoint);
    if !ctx.spec.has_path(endpoint_template.as_str()) {
        return Err(recorder.into_failure(AgentError::UnknownEndpoint(endpoint.to_string())));
    }

    let mut state = AmplificationState {
        endpoint_under_test: endpoint_template.as_str().to_string(),
        ..AmplificationState::default()
    };

    macro_rules! stage {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Err(recorder.into_failure(e)),
            }
        };
    }

    let references = stage!(run_openapi_agent(ctx, endpoint_template.as_str(), &mut recorder));
    // an immediate DONE is a legal (if unhelpful) extraction outcome; the
    // slot is filled either way so the facet stage can proceed
    state.openapi_references = if references.is_empty() {
        "(none)".to_string()
    } else {
        references
    };
    stage!(run_facet_agents(ctx, &mut state, &mut recorder));
    stage!(run_planner(ctx, &mut state, &mut recorder));
    stage!(run_writer(ctx, &mut state, baseline, &mut recorder));

    let mut repair_limit_hit = false;
    loop {
        let verdict = stage!(run_executor_agent(ctx, &state.suite_document, &mut recorder));
        match verdict {
            ExecutorVerdict::Clean => break,
            ExecutorVerdict::Feedback(feedback) => {
                if state.repair_rounds >= ctx.limits.repair_rounds {
                    repair_limit_hit = true;
                    break;
                }
                state.executor_feedback = feedback;
                stage!(run_repair(ctx, &mut state, &mut recorder));
            }
        }
    }

    let document_text = String::from_utf8_lossy(&state.suite_document).into_owned();
    let (suite, document) = stage!(parse_final_document(&document_text));
    Ok(WorkflowRun {
        suite,
        suite_document: document,
        ledger: recorder.ledger,
        trace: recorder.trace,
        repair_rounds: state.repair_rounds,
        repair_limit_hit,
    })
}
