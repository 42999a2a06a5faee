//! Fixture-based checks of the spec model: the bundled pet-store and
//! booking API documents, retrieval, schema resolution, and the baseline
//! coverage figures derived from them.

use std::fs;

use restamp_core::coverage::{report_for_log, Criterion};
use restamp_core::executor::read_ndjson;
use restamp_core::spec_model::{load_spec, Dialect, DocumentFormat};
use restamp_core::testkit::fixture_path;

fn petstore() -> restamp_core::spec_model::ApiSpec {
    let bytes = fs::read(fixture_path("petstore-v3.json")).unwrap();
    load_spec(&bytes, None).unwrap()
}

fn booker() -> restamp_core::spec_model::ApiSpec {
    let bytes = fs::read(fixture_path("restful-booker-v2.json")).unwrap();
    load_spec(&bytes, None).unwrap()
}

#[test]
fn petstore_counts_match_reported_statistics() {
    let spec = petstore();
    assert_eq!(spec.dialect, Dialect::V3);
    assert_eq!(spec.paths.len(), 20);
    assert_eq!(spec.schemas.len(), 6);
    assert_eq!(spec.base_path, "/api/v3");
}

#[test]
fn booker_counts_match_reported_statistics() {
    let spec = booker();
    assert_eq!(spec.dialect, Dialect::V2);
    assert_eq!(spec.paths.len(), 8);
    assert_eq!(spec.schemas.len(), 5);
}

#[test]
fn pet_schema_references_category_and_tag() {
    let spec = petstore();
    assert_eq!(spec.schemas["Pet"].refs, vec!["Category", "Tag"]);
    let text = spec.retrieve("Pet");
    assert!(text.contains("Schema: Pet"));
    assert!(text.contains("References: Category, Tag"));
}

#[test]
fn prefixed_and_bare_schema_names_resolve_identically() {
    let spec = petstore();
    let bare = spec.resolve_schema("Pet", false).unwrap();
    let prefixed = spec.resolve_schema("#/components/schemas/Pet", false).unwrap();
    assert_eq!(bare, prefixed);
}

#[test]
fn recursive_resolution_inlines_each_schema_once() {
    let spec = petstore();
    let text = spec.resolve_schema("Pet", true).unwrap();
    for name in ["Schema: Pet", "Schema: Category", "Schema: Tag"] {
        assert_eq!(text.matches(name).count(), 1, "{name} should appear once");
    }
}

#[test]
fn self_referencing_schema_terminates() {
    let doc = r##"{
        "openapi": "3.0.0",
        "info": {"title": "cyc", "version": "1"},
        "paths": {"/n": {"get": {"responses": {"200": {"description": "ok"}}}}},
        "components": {"schemas": {
            "Node": {"type": "object", "properties": {
                "next": {"$ref": "#/components/schemas/Node"},
                "peer": {"$ref": "#/components/schemas/Peer"}
            }},
            "Peer": {"type": "object", "properties": {"back": {"$ref": "#/components/schemas/Node"}}}
        }}
    }"##;
    let spec = load_spec(doc.as_bytes(), None).unwrap();
    let text = spec.resolve_schema("Node", true).unwrap();
    assert_eq!(text.matches("Schema: Node").count(), 1);
    assert_eq!(text.matches("Schema: Peer").count(), 1);
}

#[test]
fn endpoint_retrieval_lists_operations_under_the_path() {
    let spec = petstore();
    let text = spec.retrieve("/pet/{petId}");
    assert!(text.contains("Operation: GET /pet/{petId}"));
    assert!(text.contains("Operation: POST /pet/{petId}"));
    assert!(text.contains("Operation: DELETE /pet/{petId}"));
    assert!(text.contains("petId (in: path, required)"));
    assert!(text.contains("404"));
}

#[test]
fn json_and_yaml_renderings_load_identically() {
    let bytes = fs::read(fixture_path("petstore-v3.json")).unwrap();
    let json_spec = load_spec(&bytes, Some(DocumentFormat::Json)).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    let yaml = serde_yaml::to_string(&value).unwrap();
    let yaml_spec = load_spec(yaml.as_bytes(), Some(DocumentFormat::Yaml)).unwrap();
    assert_eq!(json_spec, yaml_spec);
    assert_eq!(
        json_spec.enumerate_coverage_domains(),
        yaml_spec.enumerate_coverage_domains()
    );
}

#[test]
fn booker_baseline_log_reaches_a_quarter_of_the_paths() {
    let spec = booker();
    let log = read_ndjson(
        fs::read(fixture_path("restful-booker-baseline.ndjson"))
            .unwrap()
            .as_slice(),
    )
    .unwrap();
    assert_eq!(log.len(), 2);
    let report = report_for_log(&spec, &log).unwrap();
    let path = report.criterion(Criterion::Path);
    assert_eq!(path.denominator, 8);
    assert_eq!(path.numerator, 2);
    assert_eq!(path.ratio, Some(0.25));
    assert_eq!(path.percent_label(), "25.0%");
}

#[test]
fn default_responses_flagged_not_enumerated() {
    let spec = petstore();
    let domains = spec.enumerate_coverage_domains();
    // /user/logout documents 200 + default: only the concrete code counts
    let logout = domains
        .statuses
        .iter()
        .filter(|(op, _)| op.path == "/user/logout")
        .count();
    assert_eq!(logout, 1);
    // but default's media types do count for response types (POST /user)
    assert!(domains
        .response_types
        .iter()
        .any(|(op, mt)| op.path == "/user" && mt == "application/json"));
}

#[test]
fn enum_and_boolean_parameters_take_value_domains() {
    let toy = fs::read(fixture_path("toy-spec-v3.json")).unwrap();
    let spec = load_spec(&toy, None).unwrap();
    let domains = spec.enumerate_coverage_domains();
    let values: Vec<String> = domains
        .parameter_values
        .iter()
        .map(|(op, p, v)| format!("{} {} {}={}", op.method, op.path, p.name, v))
        .collect();
    assert!(values.contains(&"GET /items kind=basic".to_string()));
    assert!(values.contains(&"GET /items kind=fancy".to_string()));
    assert!(values.contains(&"GET /items verbose=true".to_string()));
    assert!(values.contains(&"GET /items verbose=false".to_string()));
    assert_eq!(domains.parameter_values.len(), 4);
}
