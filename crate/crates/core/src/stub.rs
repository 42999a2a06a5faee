//! Spec-driven mock API server.
//!
//! Routing uses the same matcher contract as the coverage engine, so every
//! request the stub serves matches back to the same operation when its log
//! is fed through coverage. The default strategy answers with the lowest
//! documented 2xx per operation; override rules force other documented
//! statuses (or, when explicitly flagged, undocumented ones). Bodies are
//! minimal syntactically-valid placeholders, not schema-conformant
//! instances.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{rfc3339_utc, SharedClock};
use crate::coverage::{resolve_route, CoverageError};
use crate::executor::{body_record, Interaction};
use crate::spec_model::{normalize_media_type, ApiSpec, Method, StatusKey};

#[derive(Debug, Error)]
pub enum StubError {
    #[error("cannot bind stub server: {0}")]
    Bind(String),
    #[error("invalid stub config: {0}")]
    Config(String),
}

/// Force a response for requests hitting one operation with matching
/// query/header values. The first matching rule wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OverrideRule {
    pub path: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub query: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    /// Must be set to force a status the operation does not document.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub undocumented: bool,
}

#[derive(Debug, Clone)]
pub struct StubConfig {
    pub spec: ApiSpec,
    pub port: u16,
    pub overrides: Vec<OverrideRule>,
    /// When set, every request must carry `Authorization: Bearer <this>`.
    pub require_bearer: Option<String>,
}

impl StubConfig {
    pub fn new(spec: ApiSpec, port: u16) -> StubConfig {
        StubConfig {
            spec,
            port,
            overrides: Vec::new(),
            require_bearer: None,
        }
    }

    /// Check every override names a documented operation and forces either a
    /// documented status or one explicitly flagged as undocumented injection.
    pub fn validate(&self) -> Result<(), StubError> {
        for rule in &self.overrides {
            let method = Method::parse(&rule.method).ok_or_else(|| {
                StubError::Config(format!("override method '{}' is unknown", rule.method))
            })?;
            let op = self.spec.operation(&rule.path, method).ok_or_else(|| {
                StubError::Config(format!(
                    "override targets undocumented operation {} {}",
                    rule.method, rule.path
                ))
            })?;
            let documented = op.documented_codes().any(|c| c == rule.status);
            if !documented && !rule.undocumented {
                return Err(StubError::Config(format!(
                    "override forces status {} on {} {} which does not document it; \
                     set \"undocumented\": true to inject it deliberately",
                    rule.status, rule.method, rule.path
                )));
            }
        }
        Ok(())
    }
}

/// What the stub decided to answer.
#[derive(Debug, Clone, PartialEq)]
pub struct StubResponse {
    pub status: u16,
    pub media_type: Option<String>,
    pub body: Vec<u8>,
    /// Set when the response came from a fallback worth flagging in the
    /// server log (e.g. an operation documenting only `default`).
    pub note: Option<String>,
}

fn minimal_body(media_type: &str) -> Vec<u8> {
    match media_type {
        "application/json" => br#"{"ok": true}"#.to_vec(),
        "application/xml" | "text/xml" => b"<?xml version=\"1.0\"?><response ok=\"true\"/>".to_vec(),
        "text/plain" => b"ok".to_vec(),
        "application/x-www-form-urlencoded" => b"ok=true".to_vec(),
        _ => b"stub".to_vec(),
    }
}

fn respond(status: u16, media_type: Option<&str>, body: Option<&str>, note: Option<String>) -> StubResponse {
    let media_type = media_type.map(normalize_media_type);
    let body = match (&media_type, body) {
        (_, Some(text)) => text.as_bytes().to_vec(),
        (Some(mt), None) => minimal_body(mt),
        (None, None) => Vec::new(),
    };
    StubResponse {
        status,
        media_type,
        body,
        note,
    }
}

fn error_body(status: u16, message: &str) -> StubResponse {
    respond(
        status,
        Some("application/json"),
        Some(&format!(r#"{{"error": "{message}"}}"#)),
        None,
    )
}

/// Strip the spec base path from a request path at a segment boundary.
fn strip_base_path<'p>(spec: &ApiSpec, path: &'p str) -> &'p str {
    let base = &spec.base_path;
    if !base.is_empty() && path.starts_with(base.as_str()) {
        let rest = &path[base.len()..];
        if rest.is_empty() {
            return "/";
        }
        if rest.starts_with('/') {
            return rest;
        }
    }
    path
}

/// Decide the response for one request. Pure: no I/O, no shared state.
pub fn handle_request(
    config: &StubConfig,
    method: &str,
    path: &str,
    query: &[(String, String)],
    headers: &BTreeMap<String, String>,
) -> StubResponse {
    if let Some(expected) = &config.require_bearer {
        let authorized = headers
            .get("authorization")
            .is_some_and(|v| v == &format!("Bearer {expected}"));
        if !authorized {
            return error_body(401, "missing or invalid bearer token");
        }
    }

    let logical = strip_base_path(&config.spec, path);
    let matched = match resolve_route(&config.spec, method, logical) {
        Ok(Some(m)) => m,
        Ok(None) => {
            // distinguish unknown path from unsupported method on a known path
            let path_known = config
                .spec
                .paths
                .iter()
                .any(|t| t.match_path(logical).is_some());
            return if path_known {
                error_body(405, "method not documented for this path")
            } else {
                error_body(404, "no documented path matches")
            };
        }
        Err(CoverageError::AmbiguousMatch { .. }) => {
            return error_body(500, "ambiguous route: equally specific templates");
        }
        Err(_) => return error_body(500, "routing failed"),
    };
    let op = matched.operation;

    for rule in &config.overrides {
        if rule.path != op.path.as_str() || !rule.method.eq_ignore_ascii_case(op.method.as_str()) {
            continue;
        }
        let query_ok = rule.query.iter().all(|(k, expected)| {
            query.iter().any(|(name, value)| name == k && value == expected)
        });
        let headers_ok = rule
            .headers
            .iter()
            .all(|(k, expected)| headers.get(&k.to_lowercase()) == Some(expected));
        if !(query_ok && headers_ok) {
            continue;
        }
        let media_type = rule.media_type.clone().or_else(|| {
            op.documented_responses
                .get(&StatusKey::Code(rule.status))
                .and_then(|set| set.iter().next().cloned())
        });
        return respond(rule.status, media_type.as_deref(), rule.body.as_deref(), None);
    }

    // default strategy: lowest documented 2xx
    let lowest_2xx = op
        .documented_codes()
        .filter(|c| (200..300).contains(c))
        .min();
    if let Some(status) = lowest_2xx {
        let media = op
            .documented_responses
            .get(&StatusKey::Code(status))
            .and_then(|set| set.iter().next().cloned());
        return respond(status, media.as_deref(), None, None);
    }
    // an operation documenting only `default` answers 200 with its media type
    if let Some(default_media) = op.documented_responses.get(&StatusKey::Default) {
        let media = default_media.iter().next().cloned();
        return respond(
            200,
            media.as_deref(),
            None,
            Some(format!(
                "{} {}: only 'default' documented, answering 200",
                op.method, op.path
            )),
        );
    }
    // no 2xx, no default: answer the lowest documented code
    if let Some(status) = op.documented_codes().min() {
        let media = op
            .documented_responses
            .get(&StatusKey::Code(status))
            .and_then(|set| set.iter().next().cloned());
        return respond(status, media.as_deref(), None, None);
    }
    respond(200, None, None, Some(format!("{} {}: no responses documented", op.method, op.path)))
}

/// A running stub server.
pub struct StubHandle {
    port: u16,
    stop: Arc<AtomicBool>,
    workers: Vec<std::thread::JoinHandle<()>>,
    server: Arc<tiny_http::Server>,
    access_log: Arc<Mutex<Vec<Interaction>>>,
}

impl StubHandle {
    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Interactions served so far, in arrival order.
    pub fn access_log(&self) -> Vec<Interaction> {
        self.access_log.lock().expect("access log poisoned").clone()
    }

    pub fn shutdown(self) {
        drop(self);
    }
}

impl Drop for StubHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

/// Serve until shut down. Port 0 binds an ephemeral port; the handle
/// exposes the actual one.
pub fn serve(config: StubConfig, clock: SharedClock) -> Result<StubHandle, StubError> {
    config.validate()?;
    let server = tiny_http::Server::http(("127.0.0.1", config.port))
        .map_err(|e| StubError::Bind(e.to_string()))?;
    let port = match server.server_addr() {
        tiny_http::ListenAddr::IP(addr) => addr.port(),
        _ => config.port,
    };
    let server = Arc::new(server);
    let stop = Arc::new(AtomicBool::new(false));
    let access_log = Arc::new(Mutex::new(Vec::new()));
    let config = Arc::new(config);

    let mut workers = Vec::new();
    for _ in 0..4 {
        let server = Arc::clone(&server);
        let stop = Arc::clone(&stop);
        let config = Arc::clone(&config);
        let access_log = Arc::clone(&access_log);
        let clock = clock.clone();
        workers.push(std::thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(request)) => {
                        serve_one(&config, port, request, &access_log, &clock);
                    }
                    Ok(None) => continue,
                    Err(_) => break,
                }
            }
        }));
    }

    Ok(StubHandle {
        port,
        stop,
        workers,
        server,
        access_log,
    })
}

fn serve_one(
    config: &StubConfig,
    port: u16,
    mut request: tiny_http::Request,
    access_log: &Arc<Mutex<Vec<Interaction>>>,
    clock: &SharedClock,
) {
    let started = clock.now_unix_ms();
    let method = request.method().to_string().to_uppercase();
    let raw_url = request.url().to_string();
    let (path, query_string) = match raw_url.split_once('?') {
        Some((p, q)) => (p.to_string(), Some(q.to_string())),
        None => (raw_url.clone(), None),
    };
    let query: Vec<(String, String)> = query_string
        .as_deref()
        .map(|q| {
            url::form_urlencoded::parse(q.as_bytes())
                .map(|(k, v)| (k.into_owned(), v.into_owned()))
                .collect()
        })
        .unwrap_or_default();

    let mut headers: BTreeMap<String, String> = BTreeMap::new();
    for h in request.headers() {
        headers.insert(h.field.as_str().as_str().to_lowercase(), h.value.to_string());
    }

    let mut request_body = Vec::new();
    let _ = request.as_reader().read_to_end(&mut request_body);

    let decision = handle_request(config, &method, &path, &query, &headers);
    if let Some(note) = &decision.note {
        eprintln!("stub: {note}");
    }

    let duration_ms = (clock.now_unix_ms() - started).max(0) as u64;
    let interaction = {
        let (req_text, req_digest) = if request_body.is_empty() {
            (None, None)
        } else {
            let (t, d) = body_record(&request_body);
            (Some(t), Some(d))
        };
        let (resp_text, resp_digest) = if decision.body.is_empty() {
            (None, None)
        } else {
            let (t, d) = body_record(&decision.body);
            (Some(t), Some(d))
        };
        let mut response_headers = BTreeMap::new();
        if let Some(mt) = &decision.media_type {
            response_headers.insert("content-type".to_string(), mt.clone());
        }
        Interaction {
            test_id: String::new(),
            timestamp: rfc3339_utc(started),
            method: method.clone(),
            url: format!("http://127.0.0.1:{port}{raw_url}"),
            request_headers: headers.clone(),
            request_media_type: headers.get("content-type").map(|v| normalize_media_type(v)),
            request_body: req_text,
            request_body_digest: req_digest,
            response_status: decision.status,
            response_headers,
            response_media_type: decision.media_type.clone(),
            response_body: resp_text,
            response_body_digest: resp_digest,
            duration_ms,
        }
    };
    access_log
        .lock()
        .expect("access log poisoned")
        .push(interaction);

    let mut response = tiny_http::Response::from_data(decision.body).with_status_code(decision.status);
    if let Some(mt) = &decision.media_type {
        if let Ok(header) = tiny_http::Header::from_bytes(&b"Content-Type"[..], mt.as_bytes()) {
            response = response.with_header(header);
        }
    }
    let _ = request.respond(response);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::load_spec;

    fn spec_with_statuses() -> ApiSpec {
        let doc = r#"{
            "openapi": "3.0.0",
            "info": {"title": "s", "version": "1"},
            "paths": {
                "/ping": {"get": {"responses": {
                    "200": {"description": "ok", "content": {"text/plain": {}}},
                    "404": {"description": "no"}
                }}},
                "/only-default": {"get": {"responses": {
                    "default": {"description": "any", "content": {"application/json": {}}}
                }}},
                "/errors-only": {"get": {"responses": {"404": {"description": "no"}}}}
            }
        }"#;
        load_spec(doc.as_bytes(), None).unwrap()
    }

    fn get(config: &StubConfig, path: &str) -> StubResponse {
        handle_request(config, "GET", path, &[], &BTreeMap::new())
    }

    #[test]
    fn default_strategy_answers_lowest_2xx() {
        let config = StubConfig::new(spec_with_statuses(), 0);
        let r = get(&config, "/ping");
        assert_eq!(r.status, 200);
        assert_eq!(r.media_type.as_deref(), Some("text/plain"));
        assert_eq!(r.body, b"ok");
    }

    #[test]
    fn unknown_path_is_404_unsupported_method_is_405() {
        let config = StubConfig::new(spec_with_statuses(), 0);
        assert_eq!(get(&config, "/nope").status, 404);
        let r = handle_request(&config, "DELETE", "/ping", &[], &BTreeMap::new());
        assert_eq!(r.status, 405);
    }

    #[test]
    fn only_default_documented_falls_back_to_200_with_note() {
        let config = StubConfig::new(spec_with_statuses(), 0);
        let r = get(&config, "/only-default");
        assert_eq!(r.status, 200);
        assert_eq!(r.media_type.as_deref(), Some("application/json"));
        assert!(r.note.is_some());
    }

    #[test]
    fn no_2xx_no_default_answers_lowest_documented() {
        let config = StubConfig::new(spec_with_statuses(), 0);
        assert_eq!(get(&config, "/errors-only").status, 404);
    }

    #[test]
    fn override_forces_documented_status() {
        let mut config = StubConfig::new(spec_with_statuses(), 0);
        config.overrides.push(OverrideRule {
            path: "/ping".into(),
            method: "GET".into(),
            query: [("status".to_string(), "bogus".to_string())].into(),
            headers: BTreeMap::new(),
            status: 404,
            media_type: None,
            body: None,
            undocumented: false,
        });
        config.validate().unwrap();
        let miss = get(&config, "/ping");
        assert_eq!(miss.status, 200);
        let hit = handle_request(
            &config,
            "GET",
            "/ping",
            &[("status".to_string(), "bogus".to_string())],
            &BTreeMap::new(),
        );
        assert_eq!(hit.status, 404);
    }

    #[test]
    fn undocumented_override_requires_flag() {
        let mut config = StubConfig::new(spec_with_statuses(), 0);
        config.overrides.push(OverrideRule {
            path: "/ping".into(),
            method: "GET".into(),
            query: BTreeMap::new(),
            headers: BTreeMap::new(),
            status: 503,
            media_type: None,
            body: None,
            undocumented: false,
        });
        assert!(matches!(config.validate(), Err(StubError::Config(_))));
        config.overrides[0].undocumented = true;
        assert!(config.validate().is_ok());
    }

    #[test]
    fn bearer_requirement_yields_401() {
        let mut config = StubConfig::new(spec_with_statuses(), 0);
        config.require_bearer = Some("sesame".into());
        assert_eq!(get(&config, "/ping").status, 401);
        let headers: BTreeMap<String, String> =
            [("authorization".to_string(), "Bearer sesame".to_string())].into();
        let ok = handle_request(&config, "GET", "/ping", &[], &headers);
        assert_eq!(ok.status, 200);
    }

    #[test]
    fn served_requests_route_like_the_coverage_matcher() {
        let config = StubConfig::new(spec_with_statuses(), 0);
        let clock = crate::clock::fixed_clock(1_700_000_000_000);
        let handle = serve(config.clone(), clock).unwrap();
        let agent = crate::executor::build_agent(5_000);
        let url = format!("{}/ping", handle.base_url());
        let response = agent.get(&url).call().unwrap();
        assert_eq!(response.status().as_u16(), 200);
        let log = handle.access_log();
        assert_eq!(log.len(), 1);
        let matched = crate::coverage::match_interaction(&config.spec, &log[0])
            .unwrap()
            .unwrap();
        assert_eq!(matched.operation.path.as_str(), "/ping");
        handle.shutdown();
    }
}
