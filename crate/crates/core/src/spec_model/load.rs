//! Document ingestion: parse JSON/YAML, detect the dialect, normalize.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{
    normalize_media_type, strip_schema_prefix, ApiSpec, Dialect, DocumentFormat, Method,
    OperationDescriptor, ParamLocation, ParameterDescriptor, PathTemplate, SchemaEntry, SpecError,
    StatusKey,
};

pub fn load(document: &[u8], format_hint: Option<DocumentFormat>) -> Result<ApiSpec, SpecError> {
    let value = parse_document(document, format_hint)?;
    let root = value
        .as_object()
        .ok_or_else(|| SpecError::MalformedDocument("document root is not an object".into()))?;

    let dialect = detect_dialect(root)?;
    let title = value
        .pointer("/info/title")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let base_path = match dialect {
        Dialect::V2 => root
            .get("basePath")
            .and_then(Value::as_str)
            .unwrap_or("")
            .trim_end_matches('/')
            .to_string(),
        Dialect::V3 => extract_v3_base_path(root),
    };

    let schemas = extract_schemas(root, dialect);

    let mut paths: BTreeSet<PathTemplate> = BTreeSet::new();
    let mut operations: Vec<OperationDescriptor> = Vec::new();
    let mut seen: BTreeSet<(String, Method)> = BTreeSet::new();

    let path_items = root
        .get("paths")
        .and_then(Value::as_object)
        .ok_or_else(|| SpecError::MalformedDocument("missing 'paths' object".into()))?;

    for (raw_path, item) in path_items {
        let template = PathTemplate::new(raw_path);
        paths.insert(template.clone());
        let Some(item) = item.as_object() else { continue };
        let shared_params = item.get("parameters").and_then(Value::as_array);
        for method in Method::ALL {
            let Some(op_value) = item.get(method.openapi_key()) else {
                continue;
            };
            if !seen.insert((template.as_str().to_string(), method)) {
                return Err(SpecError::DuplicateOperation(
                    method,
                    template.as_str().to_string(),
                ));
            }
            let op = match dialect {
                Dialect::V2 => normalize_v2_operation(root, &template, method, op_value, shared_params),
                Dialect::V3 => normalize_v3_operation(&template, method, op_value, shared_params),
            };
            operations.push(op);
        }
    }

    // normalized templates can collide (`/pet` vs `/pet/`); the seen-set
    // above already rejected that as a duplicate operation

    operations.sort_by(|a, b| (a.path.as_str(), a.method).cmp(&(b.path.as_str(), b.method)));

    Ok(ApiSpec {
        title,
        dialect,
        base_path,
        paths: paths.into_iter().collect(),
        operations,
        schemas,
    })
}

fn parse_document(document: &[u8], hint: Option<DocumentFormat>) -> Result<Value, SpecError> {
    match hint {
        Some(DocumentFormat::Json) => serde_json::from_slice(document)
            .map_err(|e| SpecError::MalformedDocument(format!("invalid JSON: {e}"))),
        Some(DocumentFormat::Yaml) => serde_yaml::from_slice(document)
            .map_err(|e| SpecError::MalformedDocument(format!("invalid YAML: {e}"))),
        None => serde_json::from_slice(document).or_else(|json_err| {
            serde_yaml::from_slice(document).map_err(|yaml_err| {
                SpecError::MalformedDocument(format!(
                    "not parseable as JSON ({json_err}) nor as YAML ({yaml_err})"
                ))
            })
        }),
    }
}

fn detect_dialect(root: &serde_json::Map<String, Value>) -> Result<Dialect, SpecError> {
    if let Some(v) = root.get("swagger").and_then(Value::as_str) {
        if v.starts_with("2.") || v == "2" {
            return Ok(Dialect::V2);
        }
        return Err(SpecError::UnsupportedDialect(format!("swagger {v}")));
    }
    if let Some(v) = root.get("openapi").and_then(Value::as_str) {
        if v.starts_with("3.") || v == "3" {
            return Ok(Dialect::V3);
        }
        return Err(SpecError::UnsupportedDialect(format!("openapi {v}")));
    }
    Err(SpecError::UnsupportedDialect(
        "neither 'swagger' nor 'openapi' version field present".into(),
    ))
}

fn extract_v3_base_path(root: &serde_json::Map<String, Value>) -> String {
    let Some(url) = root
        .get("servers")
        .and_then(|s| s.get(0))
        .and_then(|s| s.get("url"))
        .and_then(Value::as_str)
    else {
        return String::new();
    };
    let path = match url.find("://") {
        Some(i) => {
            let after = &url[i + 3..];
            match after.find('/') {
                Some(j) => &after[j..],
                None => "",
            }
        }
        None => url, // relative server URL
    };
    let path = path.trim_end_matches('/');
    if path.is_empty() || !path.starts_with('/') {
        String::new()
    } else {
        path.to_string()
    }
}

fn extract_schemas(root: &serde_json::Map<String, Value>, dialect: Dialect) -> BTreeMap<String, SchemaEntry> {
    let container = match dialect {
        Dialect::V2 => root.get("definitions"),
        Dialect::V3 => root.get("components").and_then(|c| c.get("schemas")),
    };
    let mut out = BTreeMap::new();
    if let Some(map) = container.and_then(Value::as_object) {
        for (name, schema) in map {
            let mut refs = Vec::new();
            collect_refs(schema, &mut refs);
            out.insert(
                name.clone(),
                SchemaEntry {
                    text: serde_json::to_string_pretty(schema).unwrap_or_default(),
                    refs,
                },
            );
        }
    }
    out
}

/// Collect bare schema names from every `$ref` in a subtree, first
/// occurrence order, deduplicated.
fn collect_refs(value: &Value, out: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                if k == "$ref" {
                    if let Some(s) = v.as_str() {
                        let name = strip_schema_prefix(s).to_string();
                        if !name.is_empty() && !out.contains(&name) {
                            out.push(name);
                        }
                    }
                } else {
                    collect_refs(v, out);
                }
            }
        }
        Value::Array(items) => {
            for v in items {
                collect_refs(v, out);
            }
        }
        _ => {}
    }
}

fn normalize_v3_operation(
    template: &PathTemplate,
    method: Method,
    op: &Value,
    shared_params: Option<&Vec<Value>>,
) -> OperationDescriptor {
    let mut parameters = Vec::new();
    for p in merged_params(op, shared_params) {
        if let Some(param) = v3_parameter(&p) {
            parameters.push(param);
        }
    }
    ensure_path_params(template, &mut parameters);

    let mut request_types = BTreeSet::new();
    if let Some(content) = op.pointer("/requestBody/content").and_then(Value::as_object) {
        for mt in content.keys() {
            request_types.insert(normalize_media_type(mt));
        }
    }

    let mut documented_responses: BTreeMap<StatusKey, BTreeSet<String>> = BTreeMap::new();
    if let Some(responses) = op.get("responses").and_then(Value::as_object) {
        for (status, resp) in responses {
            let key = parse_status_key(status);
            let entry = documented_responses.entry(key).or_default();
            if let Some(content) = resp.get("content").and_then(Value::as_object) {
                for mt in content.keys() {
                    entry.insert(normalize_media_type(mt));
                }
            }
        }
    }

    let mut refs = Vec::new();
    collect_refs(op, &mut refs);

    OperationDescriptor {
        path: template.clone(),
        method,
        parameters,
        request_types,
        documented_responses,
        schema_refs: refs.into_iter().collect(),
    }
}

fn normalize_v2_operation(
    root: &serde_json::Map<String, Value>,
    template: &PathTemplate,
    method: Method,
    op: &Value,
    shared_params: Option<&Vec<Value>>,
) -> OperationDescriptor {
    let mut parameters = Vec::new();
    let mut has_body_input = false;
    for p in merged_params(op, shared_params) {
        match p.get("in").and_then(Value::as_str) {
            Some("body") | Some("formData") => has_body_input = true,
            _ => {
                if let Some(param) = v2_parameter(&p) {
                    parameters.push(param);
                }
            }
        }
    }
    ensure_path_params(template, &mut parameters);

    let effective = |key: &str| -> Vec<String> {
        op.get(key)
            .or_else(|| root.get(key))
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(Value::as_str)
                    .map(normalize_media_type)
                    .collect()
            })
            .unwrap_or_default()
    };

    // consumes only matters when the operation actually takes a payload
    let mut request_types = BTreeSet::new();
    if has_body_input {
        request_types.extend(effective("consumes"));
    }

    let produces: BTreeSet<String> = effective("produces").into_iter().collect();
    let mut documented_responses: BTreeMap<StatusKey, BTreeSet<String>> = BTreeMap::new();
    if let Some(responses) = op.get("responses").and_then(Value::as_object) {
        for (status, resp) in responses {
            let key = parse_status_key(status);
            let entry = documented_responses.entry(key).or_default();
            // a response carries media types only when it has a payload schema
            if resp.get("schema").is_some() {
                entry.extend(produces.iter().cloned());
            }
        }
    }

    let mut refs = Vec::new();
    collect_refs(op, &mut refs);

    OperationDescriptor {
        path: template.clone(),
        method,
        parameters,
        request_types,
        documented_responses,
        schema_refs: refs.into_iter().collect(),
    }
}

fn merged_params(op: &Value, shared: Option<&Vec<Value>>) -> Vec<Value> {
    let mut out: Vec<Value> = shared.map(|v| v.to_vec()).unwrap_or_default();
    if let Some(own) = op.get("parameters").and_then(Value::as_array) {
        out.extend(own.iter().cloned());
    }
    out
}

fn v3_parameter(p: &Value) -> Option<ParameterDescriptor> {
    let name = p.get("name")?.as_str()?.to_string();
    let location = parse_location(p.get("in")?.as_str()?)?;
    let required =
        location == ParamLocation::Path || p.get("required").and_then(Value::as_bool).unwrap_or(false);
    let enum_values = enum_values_from(p.pointer("/schema/type"), p.pointer("/schema/enum"));
    Some(ParameterDescriptor {
        name,
        location,
        required,
        enum_values,
    })
}

fn v2_parameter(p: &Value) -> Option<ParameterDescriptor> {
    let name = p.get("name")?.as_str()?.to_string();
    let location = parse_location(p.get("in")?.as_str()?)?;
    let required =
        location == ParamLocation::Path || p.get("required").and_then(Value::as_bool).unwrap_or(false);
    let enum_values = enum_values_from(p.get("type"), p.get("enum"));
    Some(ParameterDescriptor {
        name,
        location,
        required,
        enum_values,
    })
}

fn parse_location(s: &str) -> Option<ParamLocation> {
    match s {
        "path" => Some(ParamLocation::Path),
        "query" => Some(ParamLocation::Query),
        "header" => Some(ParamLocation::Header),
        "cookie" => Some(ParamLocation::Cookie),
        _ => None,
    }
}

/// Booleans and explicit enums are the finitely enumerable domains.
fn enum_values_from(ty: Option<&Value>, enumeration: Option<&Value>) -> Option<BTreeSet<String>> {
    if let Some(values) = enumeration.and_then(Value::as_array) {
        let set: BTreeSet<String> = values.iter().map(literal_text).collect();
        if !set.is_empty() {
            return Some(set);
        }
    }
    if ty.and_then(Value::as_str) == Some("boolean") {
        return Some(["false".to_string(), "true".to_string()].into());
    }
    None
}

fn literal_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Every `{param}` in the template must appear as a required path parameter,
/// even when the document omits it.
fn ensure_path_params(template: &PathTemplate, parameters: &mut Vec<ParameterDescriptor>) {
    for p in parameters.iter_mut() {
        if p.location == ParamLocation::Path {
            p.required = true;
        }
    }
    for name in template.param_names() {
        let present = parameters
            .iter()
            .any(|p| p.location == ParamLocation::Path && p.name == name);
        if !present {
            parameters.push(ParameterDescriptor {
                name: name.to_string(),
                location: ParamLocation::Path,
                required: true,
                enum_values: None,
            });
        }
    }
}

fn parse_status_key(raw: &str) -> StatusKey {
    match raw.parse::<u16>() {
        Ok(code) if (100..=599).contains(&code) => StatusKey::Code(code),
        // `default` and range wildcards both lack countable members
        _ => StatusKey::Default,
    }
}
