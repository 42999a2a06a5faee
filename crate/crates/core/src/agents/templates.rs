//! Prompt templates for every agent role.
//!
//! Templates are plain text with `{slot_name}` slots. Rendering with a slot
//! the caller did not supply is an error and happens before any model call.
//! The default bodies ship with the crate; a config directory with
//! `<role>.txt` files overrides them per role.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AgentError;

/// The nine agent roles across both workflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    SingleAgent,
    OpenapiExtraction,
    Header,
    Parameter,
    Value,
    Planner,
    Writer,
    Executor,
    Repair,
}

impl AgentRole {
    pub const ALL: [AgentRole; 9] = [
        AgentRole::SingleAgent,
        AgentRole::OpenapiExtraction,
        AgentRole::Header,
        AgentRole::Parameter,
        AgentRole::Value,
        AgentRole::Planner,
        AgentRole::Writer,
        AgentRole::Executor,
        AgentRole::Repair,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AgentRole::SingleAgent => "single_agent",
            AgentRole::OpenapiExtraction => "openapi_extraction",
            AgentRole::Header => "header",
            AgentRole::Parameter => "parameter",
            AgentRole::Value => "value",
            AgentRole::Planner => "planner",
            AgentRole::Writer => "writer",
            AgentRole::Executor => "executor",
            AgentRole::Repair => "repair",
        }
    }

    /// Planning-phase roles must never appear after generation starts.
    pub fn is_planning_phase(&self) -> bool {
        matches!(
            self,
            AgentRole::OpenapiExtraction
                | AgentRole::Header
                | AgentRole::Parameter
                | AgentRole::Value
                | AgentRole::Planner
        )
    }
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: AgentRole,
    pub body: String,
}

impl PromptTemplate {
    /// Substitute `{slot}` markers. A `{name}` is a slot only when `name` is
    /// a lowercase identifier and the brace is not part of a `${variable}`
    /// token; anything else (JSON braces, `${...}`) stays literal.
    pub fn render(&self, slots: &BTreeMap<&str, String>) -> Result<String, AgentError> {
        let mut out = String::with_capacity(self.body.len());
        let bytes = self.body.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c == '{' && (i == 0 || bytes[i - 1] as char != '$') {
                if let Some((name, end)) = slot_name(&self.body, i) {
                    match slots.get(name) {
                        Some(value) => {
                            out.push_str(value);
                            i = end;
                            continue;
                        }
                        None => {
                            return Err(AgentError::MissingSlot {
                                role: self.role,
                                slot: name.to_string(),
                            })
                        }
                    }
                }
            }
            out.push(c);
            i += c.len_utf8();
        }
        Ok(out)
    }
}

/// `{name}` at `start` where name is `[a-z][a-z0-9_]*`; returns the name and
/// the index one past the closing brace.
fn slot_name(body: &str, start: usize) -> Option<(&str, usize)> {
    let rest = &body[start + 1..];
    let close = rest.find('}')?;
    let name = &rest[..close];
    let mut chars = name.chars();
    let first = chars.next()?;
    if !first.is_ascii_lowercase() {
        return None;
    }
    if !chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
        return None;
    }
    Some((name, start + 1 + close + 1))
}

pub struct PromptLibrary {
    templates: BTreeMap<AgentRole, PromptTemplate>,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        for role in AgentRole::ALL {
            templates.insert(
                role,
                PromptTemplate {
                    role,
                    body: default_body(role),
                },
            );
        }
        PromptLibrary { templates }
    }
}

impl PromptLibrary {
    /// Default library with per-role overrides read from `dir/<role>.txt`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<PromptLibrary> {
        let mut library = PromptLibrary::default();
        for role in AgentRole::ALL {
            let path = dir.join(format!("{}.txt", role.as_str()));
            if path.is_file() {
                let body = std::fs::read_to_string(&path)?;
                library.templates.insert(role, PromptTemplate { role, body });
            }
        }
        Ok(library)
    }

    pub fn get(&self, role: AgentRole) -> &PromptTemplate {
        &self.templates[&role]
    }

    pub fn render(
        &self,
        role: AgentRole,
        slots: &BTreeMap<&str, String>,
    ) -> Result<String, AgentError> {
        self.get(role).render(slots)
    }

    /// Write every template body into a directory, one `<role>.txt` each.
    pub fn export(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (role, template) in &self.templates {
            std::fs::write(dir.join(format!("{}.txt", role.as_str())), &template.body)?;
        }
        Ok(())
    }
}

/// Shared description of the suite document format, embedded in the
/// templates that ask the model to emit one.
const SUITE_FORMAT: &str = r#"A suite document is a single JSON object:
{"suite": "suite name", "tests": [ ... ]}
Each entry of "tests" is:
{"id": "t1", "name": "descriptive test name", "request": {"method": "GET", "path": "/example/123", "query": {"key": "value"}, "headers": {"Header-Name": "value"}, "body": "raw payload string", "bodyMediaType": "application/json", "authenticate": false}, "assertions": [{"kind": "status_equals", "expected": 200}]}
"query", "headers", "body" and "bodyMediaType" may be omitted when unused. Test ids must be unique and every test needs at least one assertion.
Assertion kinds: "status_equals" (integer 100-599), "status_class_equals" (integer 1-5, the hundreds digit), "header_present" (header name string), "body_contains" (substring string), "json_path_equals" (object {"path": "/json/pointer", "value": expected}).
Use ${variable} for values resolved from configuration at execution time. Use <PLACEHOLDER> tokens only when a human must fill in a system-specific value."#;

fn default_body(role: AgentRole) -> String {
    match role {
        AgentRole::SingleAgent => SINGLE_AGENT.replace("[[SUITE_FORMAT]]", SUITE_FORMAT),
        AgentRole::OpenapiExtraction => OPENAPI_EXTRACTION.to_string(),
        AgentRole::Header => HEADER.to_string(),
        AgentRole::Parameter => PARAMETER.to_string(),
        AgentRole::Value => VALUE.to_string(),
        AgentRole::Planner => PLANNER.to_string(),
        AgentRole::Writer => WRITER.replace("[[SUITE_FORMAT]]", SUITE_FORMAT),
        AgentRole::Executor => EXECUTOR.to_string(),
        AgentRole::Repair => REPAIR.to_string(),
    }
}

const SINGLE_AGENT: &str = r#"You are an expert in writing REST API tests. Your job is to generate as much high-quality tests as possible. You'll be given an example testcase to know what the structure of the testcases should look like. Your goal is to maximize response and request type coverage, parameter coverage and parameter value coverage.

You have access to the following tools:
- openapi_retriever: use this to get more information about an endpoint (starting with a '/') or a schema (starting with an uppercase).
- test_executor: use this tool to locally execute the tests and check if the suite document is valid.

Make sure to make the tests compliant with what is expected according to the OpenAPI specs.

Test the given endpoint from the input extensively with different parameters, parameter values, expected status codes, response types and request types, and make sure to cover as many edge cases as possible to detect potential bugs. You can only write tests for that single endpoint. Maximize the operation and status test coverage.

These schemas are available in the OpenAPI tool:
{schemas}

Requests are described declaratively; to add the authorization headers to a request, set its "authenticate" field to true. Send payloads like JSON and XML as raw strings in the "body" field.

The following files are present:
{files}

Use chain of thoughts to plan a solution to the problem and generate the test cases accordingly. Gather context, analyze, define the problem, plan a solution, and then execute the plan.

[[SUITE_FORMAT]]

The output must be one valid suite document that tests the given endpoint with different parameters, parameter values, expected status codes, response types and request types. Make sure to maximize the operation, status code, request/response type, parameter and parameter value test coverage. Only output a complete single suite document, nothing more. Generate as much testcases as possible."#;

const OPENAPI_EXTRACTION: &str = r#"Retrieve all relevant endpoints and schema for the endpoint '{endpoint_under_test}' from the OpenAPI documentation. Make sure to get schemas recursively, as endpoints and schemas can reference other schemas. Query all the relevant endpoint and schema descriptions recursively. Query all referenced endpoints or schemas at once. An endpoint starts with a forward slash (/), and a schema or definition starts with an uppercase letter. Do not include the #/components/schemas/ or #/definitions/ prefix in the query.

When you are done, reply with 'DONE', nothing more."#;

const HEADER: &str = r#"{openapi_references}

Above are the OpenAPI references for the endpoint {endpoint_under_test}.
Your goal is to search for header values that maximize:
- Status Code Coverage (triggering all documented status codes)
- Request Type Coverage (testing all documented request/content-type types)
- Response Type Coverage (triggering and testing all documented response/accept types)
Search for and document the following:
- Header values that trigger documented status codes for each HTTP method.
- All documented request/response types for each HTTP method.
- Header values that are expected to trigger documented status codes.

Output Format:
- All the headers found matching the description above, written in the format 'There should be a <METHOD> request with header <Header-Name> set to <header value>.'
Keep your answer concise and to the point. Use chain-of-thought reasoning. Only output the headers in the desired format."#;

const PARAMETER: &str = r#"{openapi_references}

Above are the OpenAPI references for the endpoint {endpoint_under_test}.
Your goal is to search for parameter selections that maximize:
- Parameter Coverage (testing all the documented parameters at least once)
- Status Code Coverage (triggering all documented status codes)
Search for and document the following:
- Identify all parameters (both required and optional) for each HTTP method.
- Identify parameter combinations that trigger documented status codes.

Output Format:
- All parameters and parameter combinations as described above in the following format: 'There should be a <METHOD> request with parameters <parameter name>, <parameter 2 name>, ...'. Make sure to include every required and optional parameter at least once for every HTTP method. For example make one request with all parameters.
Keep your answer concise and to the point. Use chain-of-thought reasoning. Only output the parameters in the desired format."#;

const VALUE: &str = r#"{openapi_references}

Above are the OpenAPI references for the endpoint {endpoint_under_test}.
Your goal is to search for parameter values that maximize:
- Parameter Value Coverage (testing all documented values)
- Status Code Coverage (triggering all documented status codes)
Search for and document the following:
- All documented values for parameters.
- Identify values that trigger documented status codes.

Output Format:
- The parameter values that should be tested in the following format: 'There should be a <METHOD> request with parameter <parameter name> set to <value>.'
Keep your answer concise and to the point. Use chain-of-thought reasoning. Only output the values in the desired format."#;

const PLANNER: &str = r#"### OpenAPI References
{openapi_references}
### Headers
{header_testcases}
### Parameters
{parameter_testcases}
### Values
{value_testcases}

Available files:
{files}

### Instructions for Test Plan Generation
Your task is to generate comprehensive test descriptions that maximize API test coverage by combining the requirements above. The final test plan should focus maximizing these coverages:

Request/Response Type Coverage: Ensure all documented request and response content types are tested for each HTTP method.
Status Code Coverage: Design tests to trigger every documented status code and intentionally combine headers, parameters, and values to expose undocumented status codes.
Parameter Coverage: Ensure all documented parameters (both required and optional) are included in at least one test per method.
Parameter Value Coverage: Test all valid parameter values at least once and explore edge cases.

Combine multiple requirements to achieve broader coverage with fewer test cases. Include both positive and negative scenarios. Every requirement should be reflected in the final test plan.

### Output Format
For each test case, describe:
- Endpoint and HTTP method
- Test goal
- Input details (headers, parameters, values)
- Expected outcome (status code, etc.)
Your goal is to create a precise and effective test plan that ensures maximum coverage while minimizing redundant tests. Every requirement provided by the other agents should be reflected in the final test plan. Focus on maximizing status code, request/response type, parameter, and parameter value coverage. Generate as much testcases as possible."#;

const WRITER: &str = r#"Here is the initial test case suite:
{baseline_suite}
Turn the following testcases into one suite document as above.

Test Descriptions:
{plan}

[[SUITE_FORMAT]]

To add the authorization headers to a request, set its "authenticate" field to true.

Only output the complete suite document, nothing more."#;

const EXECUTOR: &str = r#"Analyzing the test execution output to identify any parse errors, validation issues or runtime exceptions.
Extract all information about the tests that crashed because of a **parse or validation error** or **runtime exception**.
Ignore tests with assertion failures unless they indicate syntax, exceptions or validation problems.
If no parse, validation or runtime errors are found, reply with 'NO_COMPILATION_ERRORS'.
Execution Output:
{execution_output}

Output format:
- Give clear feedback on how to fix all the errors."#;

const REPAIR: &str = r#"Given the following test suite document:
{suite_document}
And the feedback from the test executor agent:
{feedback}

Ensure there are no errors left. Only output the complete corrected suite document, nothing more."#;
