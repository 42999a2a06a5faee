use super::*;
use crate::executor::Interaction;
use crate::spec_model::load_spec;

fn pets_spec() -> ApiSpec {
    let doc = r#"{
        "openapi": "3.0.0",
        "info": {"title": "pets", "version": "1"},
        "paths": {
            "/pet/{petId}": {
                "get": {"responses": {"200": {"description": "ok", "content": {"application/json": {}}}}}
            },
            "/pet/findByStatus": {
                "get": {
                    "parameters": [{"name": "status", "in": "query",
                                    "schema": {"type": "string", "enum": ["available", "sold"]}}],
                    "responses": {"200": {"description": "ok", "content": {"application/json": {}}}}
                }
            }
        }
    }"#;
    load_spec(doc.as_bytes(), None).unwrap()
}

fn ping_spec() -> ApiSpec {
    let doc = r#"{
        "openapi": "3.0.0",
        "info": {"title": "ping", "version": "1"},
        "paths": {
            "/ping": {"get": {"responses": {"200": {"description": "ok", "content": {"text/plain": {}}}}}}
        }
    }"#;
    load_spec(doc.as_bytes(), None).unwrap()
}

pub(crate) fn interaction(method: &str, url: &str, status: u16) -> Interaction {
    Interaction {
        test_id: "t".into(),
        timestamp: "2024-01-01T00:00:00Z".into(),
        method: method.into(),
        url: url.into(),
        request_headers: Default::default(),
        request_media_type: None,
        request_body: None,
        request_body_digest: None,
        response_status: status,
        response_headers: Default::default(),
        response_media_type: None,
        response_body: None,
        response_body_digest: None,
        duration_ms: 1,
    }
}

#[test]
fn template_match_binds_path_param() {
    let spec = pets_spec();
    let i = interaction("GET", "http://localhost/pet/123", 200);
    let matched = match_interaction(&spec, &i).unwrap().unwrap();
    assert_eq!(matched.operation.path.as_str(), "/pet/{petId}");
    assert_eq!(matched.path_params.get("petId").map(String::as_str), Some("123"));
}

#[test]
fn method_case_ignored_literal_case_not() {
    let spec = ping_spec();
    let ok = interaction("get", "http://localhost/ping", 200);
    assert!(match_interaction(&spec, &ok).unwrap().is_some());
    let wrong_case = interaction("get", "http://localhost/PING", 200);
    assert!(match_interaction(&spec, &wrong_case).unwrap().is_none());
}

#[test]
fn literal_template_beats_parameterized() {
    let spec = pets_spec();
    let i = interaction("GET", "http://localhost/pet/findByStatus", 200);
    let matched = match_interaction(&spec, &i).unwrap().unwrap();
    assert_eq!(matched.operation.path.as_str(), "/pet/findByStatus");
}

#[test]
fn equal_specificity_is_ambiguous_not_guessed() {
    let doc = r#"{
        "openapi": "3.0.0",
        "info": {"title": "amb", "version": "1"},
        "paths": {
            "/a/{x}/c": {"get": {"responses": {"200": {"description": "ok"}}}},
            "/a/b/{y}": {"get": {"responses": {"200": {"description": "ok"}}}}
        }
    }"#;
    let spec = load_spec(doc.as_bytes(), None).unwrap();
    let i = interaction("GET", "http://localhost/a/b/c", 200);
    let err = match_interaction(&spec, &i).unwrap_err();
    assert!(matches!(err, CoverageError::AmbiguousMatch { .. }));
}

#[test]
fn base_path_stripped_before_matching() {
    let doc = r#"{
        "openapi": "3.0.0",
        "info": {"title": "base", "version": "1"},
        "servers": [{"url": "https://api.example.test/api/v3"}],
        "paths": {"/ping": {"get": {"responses": {"200": {"description": "ok"}}}}}
    }"#;
    let spec = load_spec(doc.as_bytes(), None).unwrap();
    let i = interaction("GET", "http://localhost:9000/api/v3/ping", 200);
    assert!(match_interaction(&spec, &i).unwrap().is_some());
}

#[test]
fn empty_log_observes_nothing() {
    let spec = ping_spec();
    let obs = observe(&[], &spec);
    assert_eq!(obs, CoverageObservations::default());
}

#[test]
fn documented_ping_populates_each_dimension() {
    let spec = ping_spec();
    let mut i = interaction("GET", "http://localhost/ping", 200);
    i.response_media_type = Some("text/plain".into());
    let obs = observe(&[i], &spec);
    assert_eq!(obs.documented.paths.len(), 1);
    assert_eq!(obs.documented.operations.len(), 1);
    assert_eq!(obs.documented.statuses.len(), 1);
    assert_eq!(obs.documented.status_classes.len(), 1);
    assert_eq!(obs.documented.response_types.len(), 1);
    assert_eq!(obs.undocumented, ObservationSets::default());
}

#[test]
fn undocumented_status_goes_to_undocumented_side() {
    let spec = ping_spec();
    let i = interaction("GET", "http://localhost/ping", 503);
    let obs = observe(&[i], &spec);
    let key = OpKey {
        path: "/ping".into(),
        method: "GET".into(),
    };
    assert!(obs.undocumented.statuses.contains(&(key.clone(), 503)));
    assert!(obs.undocumented.status_classes.contains(&(key.clone(), 5)));
    assert!(obs.documented.statuses.is_empty());
    // the path and operation themselves are documented
    assert!(obs.documented.operations.contains(&key));
}

#[test]
fn unmatched_interaction_recorded_undocumented() {
    let spec = ping_spec();
    let i = interaction("GET", "http://localhost/nope", 404);
    let obs = observe(&[i], &spec);
    assert!(obs.documented.paths.is_empty());
    assert!(obs.undocumented.paths.contains("/nope"));
    let key = OpKey {
        path: "/nope".into(),
        method: "GET".into(),
    };
    assert!(obs.undocumented.operations.contains(&key));
}

#[test]
fn enum_parameter_values_tracked() {
    let spec = pets_spec();
    let seen = interaction("GET", "http://localhost/pet/findByStatus?status=available", 200);
    let out_of_set = interaction("GET", "http://localhost/pet/findByStatus?status=bogus", 200);
    let obs = observe(&[seen, out_of_set], &spec);
    let key = OpKey {
        path: "/pet/findByStatus".into(),
        method: "GET".into(),
    };
    let pk = ParamKey {
        name: "status".into(),
        location: "query".into(),
    };
    assert!(obs
        .documented
        .parameter_values
        .contains(&(key.clone(), pk.clone(), "available".into())));
    assert!(obs
        .undocumented
        .parameter_values
        .contains(&(key.clone(), pk.clone(), "bogus".into())));
    assert!(obs.documented.parameters.contains(&(key, pk)));
}

#[test]
fn path_params_count_as_exercised() {
    let spec = pets_spec();
    let i = interaction("GET", "http://localhost/pet/42", 200);
    let obs = observe(&[i], &spec);
    let key = OpKey {
        path: "/pet/{petId}".into(),
        method: "GET".into(),
    };
    let pk = ParamKey {
        name: "petId".into(),
        location: "path".into(),
    };
    assert!(obs.documented.parameters.contains(&(key, pk)));
}

#[test]
fn transport_headers_not_counted_as_undocumented_params() {
    let spec = ping_spec();
    let mut i = interaction("GET", "http://localhost/ping", 200);
    i.request_headers
        .insert("User-Agent".into(), "restamp".into());
    i.request_headers.insert("X-Custom".into(), "1".into());
    let obs = observe(&[i], &spec);
    assert_eq!(obs.undocumented.parameters.len(), 1);
    let (_, pk) = obs.undocumented.parameters.iter().next().unwrap();
    assert_eq!(pk.name, "X-Custom");
}

#[test]
fn report_ratios_and_not_applicable() {
    let spec = ping_spec();
    let i = interaction("GET", "http://localhost/ping", 200);
    let report = report_for_log(&spec, &[i]).unwrap();
    assert_eq!(report.criterion(Criterion::Path).ratio, Some(1.0));
    // no request payloads documented anywhere: not applicable, never 100%
    let req = report.criterion(Criterion::RequestType);
    assert_eq!(req.denominator, 0);
    assert_eq!(req.ratio, None);
    assert_eq!(req.percent_label(), "n/a");
}

#[test]
fn duplicate_interactions_change_no_ratio() {
    let spec = pets_spec();
    let i = interaction("GET", "http://localhost/pet/1", 200);
    let once = report_for_log(&spec, std::slice::from_ref(&i)).unwrap();
    let twice = report_for_log(&spec, &[i.clone(), i]).unwrap();
    assert_eq!(once.criteria, twice.criteria);
}

#[test]
fn domain_mismatch_detected() {
    let domains = CoverageDomains::default();
    let mut obs = CoverageObservations::default();
    obs.documented.paths.insert("/alien".into());
    let err = compute_report(&domains, &obs).unwrap_err();
    assert!(matches!(err, CoverageError::DomainMismatch(_)));
}

#[test]
fn markdown_and_csv_are_labelled_by_column() {
    let spec = ping_spec();
    let report = report_for_log(&spec, &[interaction("GET", "http://localhost/ping", 200)])
        .unwrap();
    let md = render_markdown(&[("Initial".to_string(), report.clone()), ("Single-Agent".to_string(), report.clone())]);
    assert!(md.contains("| Criterion | Initial | Single-Agent |"));
    assert!(md.contains("| Path | 100.0% | 100.0% |"));
    let csv = render_csv(&[("Initial".to_string(), report)]);
    assert!(csv.starts_with("Criterion,Initial\n"));
    assert!(csv.contains("Path,100.0%\n"));
}
