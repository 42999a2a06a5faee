//! Normalized model of an OpenAPI document.
//!
//! Swagger 2.0 and OpenAPI 3.x documents are unified at load time into one
//! [`ApiSpec`]; nothing downstream ever sees dialect differences. The model
//! keeps only what retrieval and coverage need — full OpenAPI validation is
//! out of scope.

mod load;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{CoverageDomains, OpKey, ParamKey};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported dialect: {0}")]
    UnsupportedDialect(String),
    #[error("duplicate operation: {0} {1}")]
    DuplicateOperation(Method, String),
    #[error("unknown reference '{0}'")]
    UnknownReference(String),
}

/// Which family of the specification the document was written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dialect {
    V2,
    V3,
}

/// HTTP methods an OpenAPI path item can document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
    Put,
    Patch,
    Delete,
    Head,
    Options,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Get,
        Method::Post,
        Method::Put,
        Method::Patch,
        Method::Delete,
        Method::Head,
        Method::Options,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
            Method::Patch => "PATCH",
            Method::Delete => "DELETE",
            Method::Head => "HEAD",
            Method::Options => "OPTIONS",
        }
    }

    /// Case-insensitive parse.
    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
    }

    fn openapi_key(&self) -> &'static str {
        match self {
            Method::Get => "get",
            Method::Post => "post",
            Method::Put => "put",
            Method::Patch => "patch",
            Method::Delete => "delete",
            Method::Head => "head",
            Method::Options => "options",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A documented URL path, possibly containing `{param}` template segments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathTemplate(String);

impl PathTemplate {
    /// Normalize: ensure a leading slash, strip a trailing slash (except `/`).
    pub fn new(raw: &str) -> PathTemplate {
        let mut s = if raw.starts_with('/') {
            raw.to_string()
        } else {
            format!("/{raw}")
        };
        while s.len() > 1 && s.ends_with('/') {
            s.pop();
        }
        PathTemplate(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('/').skip(1)
    }

    /// Number of `{param}` segments; the tie-breaker for route specificity.
    pub fn template_segment_count(&self) -> usize {
        self.segments().filter(|s| is_template_segment(s)).count()
    }

    /// Parameter names appearing as `{name}` segments, in order.
    pub fn param_names(&self) -> Vec<&str> {
        self.segments()
            .filter(|s| is_template_segment(s))
            .map(|s| &s[1..s.len() - 1])
            .collect()
    }

    /// Match a concrete path against this template, segment by segment.
    ///
    /// Literal segments compare exactly after percent-decoding the concrete
    /// segment; `{param}` segments match any non-empty segment and bind it.
    /// Returns the bound path-parameter values on success.
    pub fn match_path(&self, concrete: &str) -> Option<BTreeMap<String, String>> {
        let concrete = concrete.trim_end_matches('/');
        let concrete = if concrete.is_empty() { "/" } else { concrete };
        if !concrete.starts_with('/') {
            return None;
        }
        let tmpl: Vec<&str> = self.segments().collect();
        let got: Vec<&str> = concrete.split('/').skip(1).collect();
        if tmpl.len() != got.len() {
            return None;
        }
        let mut bindings = BTreeMap::new();
        for (t, g) in tmpl.iter().zip(got.iter()) {
            let decoded = percent_decode(g);
            if is_template_segment(t) {
                if decoded.is_empty() {
                    return None;
                }
                bindings.insert(t[1..t.len() - 1].to_string(), decoded);
            } else if *t != decoded {
                return None;
            }
        }
        Some(bindings)
    }
}

impl fmt::Display for PathTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_template_segment(seg: &str) -> bool {
    seg.len() > 2 && seg.starts_with('{') && seg.ends_with('}')
}

pub(crate) fn percent_decode(s: &str) -> String {
    percent_encoding::percent_decode_str(s)
        .decode_utf8_lossy()
        .into_owned()
}

/// Where a parameter is carried in the request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamLocation {
    Path,
    Query,
    Header,
    Cookie,
}

impl ParamLocation {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamLocation::Path => "path",
            ParamLocation::Query => "query",
            ParamLocation::Header => "header",
            ParamLocation::Cookie => "cookie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterDescriptor {
    pub name: String,
    pub location: ParamLocation,
    pub required: bool,
    /// Documented literal values, present only for finitely enumerable
    /// parameters (explicit enums and booleans).
    pub enum_values: Option<BTreeSet<String>>,
}

/// A documented response status: a concrete code or the `default` wildcard.
/// Non-numeric range keys (`2XX`) are folded into the wildcard too — neither
/// has countable members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatusKey {
    Code(u16),
    Default,
}

impl StatusKey {
    pub fn code(&self) -> Option<u16> {
        match self {
            StatusKey::Code(c) => Some(*c),
            StatusKey::Default => None,
        }
    }
}

impl fmt::Display for StatusKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatusKey::Code(c) => write!(f, "{c}"),
            StatusKey::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationDescriptor {
    pub path: PathTemplate,
    pub method: Method,
    pub parameters: Vec<ParameterDescriptor>,
    /// Normalized request media types the operation accepts.
    pub request_types: BTreeSet<String>,
    /// Documented responses: status key to normalized response media types.
    pub documented_responses: BTreeMap<StatusKey, BTreeSet<String>>,
    /// Names of schemas the raw operation object references, for retrieval.
    pub schema_refs: BTreeSet<String>,
}

impl OperationDescriptor {
    /// Concrete documented status codes (the `default` wildcard excluded).
    pub fn documented_codes(&self) -> impl Iterator<Item = u16> + '_ {
        self.documented_responses.keys().filter_map(|k| k.code())
    }

    pub fn key(&self) -> OpKey {
        OpKey {
            path: self.path.as_str().to_string(),
            method: self.method.as_str().to_string(),
        }
    }
}

/// One named schema: its pretty-printed definition plus the names of the
/// schemas it directly references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub text: String,
    pub refs: Vec<String>,
}

/// Normalized, immutable model of an OpenAPI document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub title: String,
    pub dialect: Dialect,
    /// Server base path (v2 `basePath`, v3 first server URL path), `""` if none.
    pub base_path: String,
    /// All documented path templates, sorted.
    pub paths: Vec<PathTemplate>,
    /// All documented operations; (path, method) unique.
    pub operations: Vec<OperationDescriptor>,
    /// Named schemas with their reference edges.
    pub schemas: BTreeMap<String, SchemaEntry>,
}

/// Strip `#/components/schemas/` / `#/definitions/` prefixes from a schema
/// reference, leaving the bare name.
pub fn strip_schema_prefix(s: &str) -> &str {
    s.trim_start_matches("#/components/schemas/")
        .trim_start_matches("#/definitions/")
}

/// Lowercase a media type and drop its parameters (`; charset=...`).
pub fn normalize_media_type(raw: &str) -> String {
    raw.split(';').next().unwrap_or("").trim().to_lowercase()
}

/// Load and normalize an OpenAPI document (JSON or YAML, 2.0 or 3.x).
pub fn load_spec(document: &[u8], format_hint: Option<DocumentFormat>) -> Result<ApiSpec, SpecError> {
    load::load(document, format_hint)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentFormat {
    Json,
    Yaml,
}

impl ApiSpec {
    pub fn operation(&self, path: &str, method: Method) -> Option<&OperationDescriptor> {
        self.operations
            .iter()
            .find(|op| op.path.as_str() == path && op.method == method)
    }

    pub fn operations_for_path(&self, path: &str) -> Vec<&OperationDescriptor> {
        self.operations
            .iter()
            .filter(|op| op.path.as_str() == path)
            .collect()
    }

    pub fn has_path(&self, path: &str) -> bool {
        self.paths.iter().any(|p| p.as_str() == path)
    }

    /// Answer a retriever query from an agent.
    ///
    /// Queries starting with `/` describe an endpoint; queries starting with
    /// an uppercase letter name a schema. Unknown references come back as a
    /// descriptive message (never a failure) so agents can self-correct.
    pub fn retrieve(&self, query: &str) -> String {
        let query = query.trim();
        if query.starts_with('/') {
            let normalized = PathTemplate::new(query);
            let ops = self.operations_for_path(normalized.as_str());
            if ops.is_empty() {
                return self.unknown_reference_text(query);
            }
            let mut out = format!("Endpoint: {}\n", normalized);
            for op in ops {
                out.push('\n');
                out.push_str(&render_operation(op));
            }
            return out;
        }
        if query.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            return match self.resolve_schema(query, false) {
                Ok(text) => text,
                Err(_) => self.unknown_reference_text(query),
            };
        }
        self.unknown_reference_text(query)
    }

    /// Render a named schema, optionally inlining every transitively
    /// referenced schema exactly once (cycle-safe).
    pub fn resolve_schema(&self, name: &str, recursive: bool) -> Result<String, SpecError> {
        let name = strip_schema_prefix(name);
        let entry = self
            .schemas
            .get(name)
            .ok_or_else(|| SpecError::UnknownReference(name.to_string()))?;
        if !recursive {
            return Ok(render_schema(name, entry));
        }
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(current) = stack.pop() {
            if !seen.insert(current.clone()) {
                continue;
            }
            if let Some(e) = self.schemas.get(&current) {
                out.push(render_schema(&current, e));
                // depth-first, preserving the declared reference order
                for r in e.refs.iter().rev() {
                    if !seen.contains(r) {
                        stack.push(r.clone());
                    }
                }
            }
        }
        Ok(out.join("\n"))
    }

    fn unknown_reference_text(&self, query: &str) -> String {
        let paths: Vec<&str> = self.paths.iter().map(|p| p.as_str()).collect();
        let schemas: Vec<&str> = self.schemas.keys().map(|s| s.as_str()).collect();
        format!(
            "Unknown reference '{}'. Query an endpoint (starting with '/') or a schema \
             (starting with an uppercase letter).\nAvailable endpoints: {}\nAvailable schemas: {}\n",
            query,
            if paths.is_empty() { "(none)".to_string() } else { paths.join(", ") },
            if schemas.is_empty() { "(none)".to_string() } else { schemas.join(", ") },
        )
    }

    /// Produce the denominator sets for every structural coverage criterion.
    /// Deterministic for a given spec.
    pub fn enumerate_coverage_domains(&self) -> CoverageDomains {
        let mut d = CoverageDomains::default();
        for p in &self.paths {
            d.paths.insert(p.as_str().to_string());
        }
        for op in &self.operations {
            let key = op.key();
            d.operations.insert(key.clone());
            for code in op.documented_codes() {
                d.statuses.insert((key.clone(), code));
                d.status_classes.insert((key.clone(), (code / 100) as u8));
            }
            for media_types in op.documented_responses.values() {
                for mt in media_types {
                    d.response_types.insert((key.clone(), mt.clone()));
                }
            }
            for mt in &op.request_types {
                d.request_types.insert((key.clone(), mt.clone()));
            }
            for p in &op.parameters {
                let pk = ParamKey {
                    name: p.name.clone(),
                    location: p.location.as_str().to_string(),
                };
                d.parameters.insert((key.clone(), pk.clone()));
                if let Some(values) = &p.enum_values {
                    for v in values {
                        d.parameter_values.insert((key.clone(), pk.clone(), v.clone()));
                    }
                }
            }
        }
        d
    }
}

fn render_operation(op: &OperationDescriptor) -> String {
    let mut out = format!("Operation: {} {}\n", op.method, op.path);
    if op.parameters.is_empty() {
        out.push_str("  Parameters: (none)\n");
    } else {
        out.push_str("  Parameters:\n");
        for p in &op.parameters {
            let req = if p.required { "required" } else { "optional" };
            match &p.enum_values {
                Some(values) => {
                    let vals: Vec<&str> = values.iter().map(|v| v.as_str()).collect();
                    out.push_str(&format!(
                        "    - {} (in: {}, {}, values: {})\n",
                        p.name,
                        p.location.as_str(),
                        req,
                        vals.join(", ")
                    ));
                }
                None => {
                    out.push_str(&format!(
                        "    - {} (in: {}, {})\n",
                        p.name,
                        p.location.as_str(),
                        req
                    ));
                }
            }
        }
    }
    if op.request_types.is_empty() {
        out.push_str("  Request types: (none)\n");
    } else {
        let types: Vec<&str> = op.request_types.iter().map(|s| s.as_str()).collect();
        out.push_str(&format!("  Request types: {}\n", types.join(", ")));
    }
    out.push_str("  Responses:\n");
    for (status, media_types) in &op.documented_responses {
        if media_types.is_empty() {
            out.push_str(&format!("    - {status} -> (no content)\n"));
        } else {
            let types: Vec<&str> = media_types.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!("    - {} -> {}\n", status, types.join(", ")));
        }
    }
    if op.schema_refs.is_empty() {
        out.push_str("  Referenced schemas: (none)\n");
    } else {
        let refs: Vec<&str> = op.schema_refs.iter().map(|s| s.as_str()).collect();
        out.push_str(&format!("  Referenced schemas: {}\n", refs.join(", ")));
    }
    out
}

fn render_schema(name: &str, entry: &SchemaEntry) -> String {
    let refs = if entry.refs.is_empty() {
        "(none)".to_string()
    } else {
        entry.refs.join(", ")
    };
    format!("Schema: {}\n{}\nReferences: {}\n", name, entry.text, refs)
}
