//! Randomized API shapes, their v2/v3 document renderings, and random
//! execution logs against them.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::executor::Interaction;

use super::Rng;

#[derive(Debug, Clone)]
pub struct ParamShape {
    pub name: String,
    /// `query` or `header`; path parameters come from the template.
    pub location: &'static str,
    pub required: bool,
    /// `Some(values)` for enums, `Some(["false","true"])` via boolean type.
    pub enum_values: Option<Vec<String>>,
    pub boolean: bool,
}

#[derive(Debug, Clone)]
pub struct OpShape {
    pub path: String,
    pub method: &'static str,
    pub params: Vec<ParamShape>,
    pub request_types: Vec<String>,
    /// Response media types; uniform per operation (the v2 constraint).
    pub produces: Vec<String>,
    /// (status key, carries a body); `None` status key means `default`.
    pub responses: Vec<(Option<u16>, bool)>,
}

#[derive(Debug, Clone)]
pub struct ApiShape {
    pub title: String,
    pub base_path: String,
    pub ops: Vec<OpShape>,
}

impl ApiShape {
    pub fn paths(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.ops.iter().map(|o| o.path.as_str()).collect();
        out.sort();
        out.dedup();
        out
    }
}

const LITERALS: [&str; 6] = ["items", "users", "pets", "orders", "data", "labels"];
const TEMPLATES: [&str; 3] = ["{id}", "{name}", "{key}"];
const METHODS: [&str; 5] = ["GET", "POST", "PUT", "PATCH", "DELETE"];
const MEDIA: [&str; 3] = ["application/json", "application/xml", "text/plain"];
const CODES: [u16; 6] = [200, 201, 204, 400, 404, 500];
const PARAM_NAMES: [&str; 5] = ["status", "kind", "flag", "depth", "tag"];

/// A random API with at most `max_paths` paths.
pub fn random_api(rng: &mut Rng, max_paths: usize) -> ApiShape {
    let base_path = if rng.chance(40) { "/api".to_string() } else { String::new() };
    let path_count = 1 + rng.below(max_paths);
    let mut paths: Vec<String> = Vec::new();
    while paths.len() < path_count {
        let depth = 1 + rng.below(3);
        let mut segments = vec![LITERALS[rng.below(LITERALS.len())].to_string()];
        for _ in 1..depth {
            if rng.chance(35) {
                segments.push(TEMPLATES[rng.below(TEMPLATES.len())].to_string());
            } else {
                segments.push(LITERALS[rng.below(LITERALS.len())].to_string());
            }
        }
        let path = format!("/{}", segments.join("/"));
        if !paths.contains(&path) {
            paths.push(path);
        }
    }

    let mut ops = Vec::new();
    for path in &paths {
        let mut methods: Vec<&'static str> = Vec::new();
        let op_count = 1 + rng.below(2);
        while methods.len() < op_count {
            let m = METHODS[rng.below(METHODS.len())];
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        for method in methods {
            ops.push(random_op(rng, path, method));
        }
    }
    ApiShape {
        title: "generated".to_string(),
        base_path,
        ops,
    }
}

fn random_op(rng: &mut Rng, path: &str, method: &'static str) -> OpShape {
    let mut params = Vec::new();
    let mut names_used = Vec::new();
    for _ in 0..rng.below(4) {
        let name = PARAM_NAMES[rng.below(PARAM_NAMES.len())].to_string();
        if names_used.contains(&name) {
            continue;
        }
        names_used.push(name.clone());
        let location = if rng.chance(75) { "query" } else { "header" };
        let (enum_values, boolean) = match rng.below(3) {
            0 => (Some(vec!["a".to_string(), "b".to_string()]), false),
            1 => (Some(vec!["false".to_string(), "true".to_string()]), true),
            _ => (None, false),
        };
        params.push(ParamShape {
            name,
            location,
            required: rng.chance(30),
            enum_values,
            boolean,
        });
    }

    let takes_body = matches!(method, "POST" | "PUT" | "PATCH") && rng.chance(70);
    let mut request_types = Vec::new();
    if takes_body {
        for _ in 0..(1 + rng.below(2)) {
            let mt = MEDIA[rng.below(MEDIA.len())].to_string();
            if !request_types.contains(&mt) {
                request_types.push(mt);
            }
        }
    }

    let mut produces = Vec::new();
    if rng.chance(80) {
        for _ in 0..(1 + rng.below(2)) {
            let mt = MEDIA[rng.below(MEDIA.len())].to_string();
            if !produces.contains(&mt) {
                produces.push(mt);
            }
        }
    }

    let mut responses: Vec<(Option<u16>, bool)> = Vec::new();
    let response_count = 1 + rng.below(3);
    while responses.len() < response_count {
        let code = CODES[rng.below(CODES.len())];
        if responses.iter().any(|(c, _)| *c == Some(code)) {
            continue;
        }
        let has_body = !produces.is_empty() && rng.chance(70);
        responses.push((Some(code), has_body));
    }
    if rng.chance(25) {
        let has_body = !produces.is_empty() && rng.chance(50);
        responses.push((None, has_body));
    }

    OpShape {
        path: path.to_string(),
        method,
        params,
        request_types,
        produces,
        responses,
    }
}

fn path_items(shape: &ApiShape, per_op: impl Fn(&OpShape) -> Value) -> Value {
    let mut paths = Map::new();
    for path in shape.paths() {
        let mut item = Map::new();
        for op in shape.ops.iter().filter(|o| o.path == path) {
            item.insert(op.method.to_lowercase(), per_op(op));
        }
        paths.insert(path.to_string(), Value::Object(item));
    }
    Value::Object(paths)
}

/// Render the shape as an OpenAPI 3.0 JSON document.
pub fn render_v3(shape: &ApiShape) -> Vec<u8> {
    let paths = path_items(shape, |op| {
        let mut obj = Map::new();
        let params: Vec<Value> = op
            .params
            .iter()
            .map(|p| {
                let schema = if p.boolean {
                    json!({"type": "boolean"})
                } else if let Some(values) = &p.enum_values {
                    json!({"type": "string", "enum": values})
                } else {
                    json!({"type": "string"})
                };
                json!({"name": p.name, "in": p.location, "required": p.required, "schema": schema})
            })
            .collect();
        if !params.is_empty() {
            obj.insert("parameters".into(), Value::Array(params));
        }
        if !op.request_types.is_empty() {
            let content: Map<String, Value> = op
                .request_types
                .iter()
                .map(|mt| (mt.clone(), json!({})))
                .collect();
            obj.insert("requestBody".into(), json!({"content": content}));
        }
        let mut responses = Map::new();
        for (code, has_body) in &op.responses {
            let key = code.map(|c| c.to_string()).unwrap_or_else(|| "default".into());
            let mut resp = Map::new();
            resp.insert("description".into(), json!("generated"));
            if *has_body {
                let content: Map<String, Value> =
                    op.produces.iter().map(|mt| (mt.clone(), json!({}))).collect();
                resp.insert("content".into(), Value::Object(content));
            }
            responses.insert(key, Value::Object(resp));
        }
        obj.insert("responses".into(), Value::Object(responses));
        Value::Object(obj)
    });

    let mut doc = json!({
        "openapi": "3.0.3",
        "info": {"title": shape.title, "version": "1.0"},
        "paths": paths,
    });
    if !shape.base_path.is_empty() {
        doc["servers"] = json!([{"url": shape.base_path}]);
    }
    serde_json::to_vec_pretty(&doc).expect("render cannot fail")
}

/// Render the shape as a Swagger 2.0 JSON document describing the same API.
pub fn render_v2(shape: &ApiShape) -> Vec<u8> {
    let paths = path_items(shape, |op| {
        let mut obj = Map::new();
        let mut params: Vec<Value> = op
            .params
            .iter()
            .map(|p| {
                let mut param = Map::new();
                param.insert("name".into(), json!(p.name));
                param.insert("in".into(), json!(p.location));
                param.insert("required".into(), json!(p.required));
                if p.boolean {
                    param.insert("type".into(), json!("boolean"));
                } else {
                    param.insert("type".into(), json!("string"));
                    if let Some(values) = &p.enum_values {
                        param.insert("enum".into(), json!(values));
                    }
                }
                Value::Object(param)
            })
            .collect();
        if !op.request_types.is_empty() {
            params.push(json!({"name": "payload", "in": "body", "schema": {"type": "object"}}));
            obj.insert("consumes".into(), json!(op.request_types));
        }
        if !params.is_empty() {
            obj.insert("parameters".into(), Value::Array(params));
        }
        if !op.produces.is_empty() {
            obj.insert("produces".into(), json!(op.produces));
        }
        let mut responses = Map::new();
        for (code, has_body) in &op.responses {
            let key = code.map(|c| c.to_string()).unwrap_or_else(|| "default".into());
            let mut resp = Map::new();
            resp.insert("description".into(), json!("generated"));
            if *has_body {
                resp.insert("schema".into(), json!({"type": "object"}));
            }
            responses.insert(key, Value::Object(resp));
        }
        obj.insert("responses".into(), Value::Object(responses));
        Value::Object(obj)
    });

    let mut doc = json!({
        "swagger": "2.0",
        "info": {"title": shape.title, "version": "1.0"},
        "paths": paths,
    });
    if !shape.base_path.is_empty() {
        doc["basePath"] = json!(shape.base_path);
    }
    serde_json::to_vec_pretty(&doc).expect("render cannot fail")
}

const PATH_VALUES: [&str; 4] = ["7", "alpha", "x9", "zz"];
const STRAY_STATUSES: [u16; 4] = [301, 418, 503, 599];
const STRAY_MEDIA: [&str; 2] = ["text/html", "application/pdf"];

/// A random log of up to `max` interactions, mixing documented and
/// undocumented traffic against the shape.
pub fn random_log(rng: &mut Rng, shape: &ApiShape, max: usize) -> Vec<Interaction> {
    let count = rng.below(max + 1);
    (0..count).map(|i| random_interaction(rng, shape, i)).collect()
}

pub fn random_interaction(rng: &mut Rng, shape: &ApiShape, seq: usize) -> Interaction {
    let documented = !shape.ops.is_empty() && rng.chance(80);
    let (method, path, op): (String, String, Option<&OpShape>) = if documented {
        let op = &shape.ops[rng.below(shape.ops.len())];
        let concrete: Vec<String> = op.path[1..]
            .split('/')
            .map(|seg| {
                if seg.starts_with('{') {
                    PATH_VALUES[rng.below(PATH_VALUES.len())].to_string()
                } else {
                    seg.to_string()
                }
            })
            .collect();
        (op.method.to_string(), format!("/{}", concrete.join("/")), Some(op))
    } else {
        (
            METHODS[rng.below(METHODS.len())].to_string(),
            format!("/zzz/{}", rng.below(100)),
            None,
        )
    };

    let mut query_pairs: Vec<(String, String)> = Vec::new();
    let mut headers: BTreeMap<String, String> = BTreeMap::new();
    if let Some(op) = op {
        for p in &op.params {
            if !rng.chance(60) {
                continue;
            }
            let value = match &p.enum_values {
                Some(values) if rng.chance(70) => values[rng.below(values.len())].clone(),
                _ => format!("v{}", rng.below(10)),
            };
            match p.location {
                "query" => query_pairs.push((p.name.clone(), value)),
                _ => {
                    headers.insert(p.name.clone(), value);
                }
            }
        }
    }
    if rng.chance(30) {
        query_pairs.push(("stray".to_string(), "1".to_string()));
    }

    let status = match op {
        Some(op) if rng.chance(70) => {
            let documented_codes: Vec<u16> =
                op.responses.iter().filter_map(|(c, _)| *c).collect();
            if documented_codes.is_empty() {
                STRAY_STATUSES[rng.below(STRAY_STATUSES.len())]
            } else {
                documented_codes[rng.below(documented_codes.len())]
            }
        }
        _ => STRAY_STATUSES[rng.below(STRAY_STATUSES.len())],
    };

    let response_media_type = match op {
        Some(op) if !op.produces.is_empty() && rng.chance(70) => {
            Some(op.produces[rng.below(op.produces.len())].clone())
        }
        _ => {
            if rng.chance(40) {
                Some(STRAY_MEDIA[rng.below(STRAY_MEDIA.len())].to_string())
            } else {
                None
            }
        }
    };

    let request_media_type = match op {
        Some(op) if !op.request_types.is_empty() && rng.chance(70) => {
            Some(op.request_types[rng.below(op.request_types.len())].clone())
        }
        Some(_) if rng.chance(10) => Some("application/pdf".to_string()),
        _ => None,
    };

    let query_string = if query_pairs.is_empty() {
        String::new()
    } else {
        let joined: Vec<String> = query_pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("?{}", joined.join("&"))
    };
    let url = format!("http://target.test{}{}{}", shape.base_path, path, query_string);

    Interaction {
        test_id: format!("t{seq}"),
        timestamp: "2024-01-01T00:00:00Z".to_string(),
        method,
        url,
        request_headers: headers,
        request_media_type: request_media_type.clone(),
        request_body: request_media_type.as_ref().map(|_| "{}".to_string()),
        request_body_digest: None,
        response_status: status,
        response_headers: BTreeMap::new(),
        response_media_type,
        response_body: None,
        response_body_digest: None,
        duration_ms: 1,
    }
}
