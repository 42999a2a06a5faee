//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `cargo test -- --nocapture`). Every tolerance
//! is pinned here, in code.
//!
//! Run with: `cargo test -p restamp-cli --test acceptance`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use restamp_core::clock::{fixed_clock, system_clock};
use restamp_core::coverage::{
    compute_report, match_interaction, observe, report_for_log, CoverageError, Criterion,
};
use restamp_core::executor::{
    classify_outcome, execute_suite, read_ndjson, summarize_results, FailureCategory, Outcome,
    TargetConfig, TestStats,
};
use restamp_core::gateway::{energy_of, CallUsage, EnergyModel, PricingModel, UsageLedger};
use restamp_core::reporting::{build_report, ConfigurationInput};
use restamp_core::spec_model::load_spec;
use restamp_core::stub::{serve, StubConfig};
use restamp_core::test_dsl::{parse_suite, validate_suite, IssueKind, TestSuite};
use restamp_core::testkit::generate::{
    random_api, random_interaction, random_log, render_v2, render_v3,
};
use restamp_core::testkit::oracle::brute_force_counts;
use restamp_core::testkit::{fixture_path, Rng};

fn pass(number: u32, name: &str) {
    println!("ACCEPTANCE {number} ({name}): PASS");
}

fn ledger_totalling(total: u64) -> UsageLedger {
    let mut ledger = UsageLedger::new();
    ledger.push(
        "single_agent",
        CallUsage {
            input_tokens: total * 2 / 3,
            output_tokens: total - total * 2 / 3,
            wall_time_ms: 0,
        },
    );
    ledger
}

#[test]
fn criterion_01_energy_formula() {
    let started = Instant::now();
    let energy = EnergyModel::default();
    for (tokens, expected_wh) in [(71_186u64, 4.27f64), (109_922, 6.60), (30_832, 1.85)] {
        let ledger = ledger_totalling(tokens);
        let wh = energy_of(&ledger, &energy);
        assert!(
            (wh - expected_wh).abs() <= 0.01,
            "{tokens} tokens gave {wh} Wh, expected {expected_wh} ± 0.01"
        );
    }
    assert!(started.elapsed() < Duration::from_secs(1));
    pass(1, "energy formula");
}

#[test]
fn criterion_02_report_arithmetic() {
    let started = Instant::now();
    let stats = TestStats {
        generated: 118,
        successful: 58,
        failed: 60,
        assertion_errors: 52,
        other_runtime_errors: 8,
    };
    let report = build_report(
        "PetStore",
        vec![ConfigurationInput {
            label: "Single-Agent".into(),
            stats,
            coverage: None,
            ledger: None,
        }],
        &PricingModel::default(),
        &EnergyModel::default(),
    )
    .unwrap();
    let s = &report.configurations[0].stats;
    assert_eq!(s.generated, 118);
    assert_eq!(s.successful + s.failed, s.generated);
    assert_eq!(s.failed, 60);
    assert_eq!(s.assertion_errors + s.other_runtime_errors, s.failed);
    assert_eq!((s.assertion_errors, s.other_runtime_errors), (52, 8));
    assert!(started.elapsed() < Duration::from_secs(1));
    pass(2, "report arithmetic");
}

#[test]
fn criterion_03_oracle_equivalence() {
    let started = Instant::now();
    let mut instances = 0;
    for seed in 9_000..9_055u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let document = if seed % 2 == 0 {
            render_v3(&shape)
        } else {
            render_v2(&shape)
        };
        let spec = load_spec(&document, None).unwrap();
        let log = random_log(&mut rng, &shape, 20);
        let report = report_for_log(&spec, &log).unwrap();
        for (criterion, num, den) in brute_force_counts(&spec, &log) {
            let row = report.criterion(criterion);
            assert_eq!(
                (row.numerator, row.denominator),
                (num, den),
                "seed {seed}, criterion {}",
                criterion.label()
            );
        }
        instances += 1;
    }
    assert!(instances >= 50);
    assert!(started.elapsed() < Duration::from_secs(30));
    pass(3, "coverage oracle equivalence");
}

#[test]
fn criterion_04_booker_initial_path_coverage() {
    let spec = load_spec(&fs::read(fixture_path("restful-booker-v2.json")).unwrap(), None).unwrap();
    assert_eq!(spec.paths.len(), 8, "the booking spec documents 8 paths");
    let log = read_ndjson(
        fs::read(fixture_path("restful-booker-baseline.ndjson"))
            .unwrap()
            .as_slice(),
    )
    .unwrap();
    let report = report_for_log(&spec, &log).unwrap();
    let path = report.criterion(Criterion::Path);
    assert_eq!((path.numerator, path.denominator), (2, 8));
    assert_eq!(path.ratio, Some(0.25));
    assert_eq!(path.percent_label(), "25.0%");
    pass(4, "baseline path coverage 25.0%");
}

#[test]
fn criterion_05_coverage_properties() {
    let started = Instant::now();

    // monotonicity under log union
    for seed in 10_000..10_100u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let base = random_log(&mut rng, &shape, 12);
        let mut extended = base.clone();
        for i in 0..rng.below(6) {
            extended.push(random_interaction(&mut rng, &shape, 500 + i));
        }
        let before = report_for_log(&spec, &base).unwrap();
        let after = report_for_log(&spec, &extended).unwrap();
        for criterion in Criterion::ALL {
            assert!(
                after.criterion(criterion).numerator >= before.criterion(criterion).numerator,
                "seed {seed}: union shrank {}",
                criterion.label()
            );
        }
    }

    // idempotence under duplication, and ratio bounds
    for seed in 11_000..11_100u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let mut log = random_log(&mut rng, &shape, 12);
        let before = report_for_log(&spec, &log).unwrap();
        for row in &before.criteria {
            assert!(row.numerator <= row.denominator, "seed {seed}");
            if let Some(r) = row.ratio {
                assert!((0.0..=1.0).contains(&r), "seed {seed}");
            }
        }
        if !log.is_empty() {
            let dup = log[rng.below(log.len())].clone();
            log.push(dup);
            let after = report_for_log(&spec, &log).unwrap();
            assert_eq!(before.criteria, after.criteria, "seed {seed}: duplication changed a ratio");
        }
    }

    // v2/v3 dialect invariance
    for seed in 12_000..12_100u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let v2 = load_spec(&render_v2(&shape), None).unwrap();
        let v3 = load_spec(&render_v3(&shape), None).unwrap();
        let d2 = v2.enumerate_coverage_domains();
        let d3 = v3.enumerate_coverage_domains();
        assert_eq!(d2, d3, "seed {seed}: dialects disagree on domains");
        let log = random_log(&mut rng, &shape, 15);
        let r2 = compute_report(&d2, &observe(&log, &v2)).unwrap();
        let r3 = compute_report(&d3, &observe(&log, &v3)).unwrap();
        assert_eq!(r2, r3, "seed {seed}: dialects disagree on reports");
    }

    assert!(started.elapsed() < Duration::from_secs(60));
    pass(5, "coverage properties");
}

struct ChainArtifacts {
    dir: PathBuf,
}

fn restamp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_restamp"))
}

fn run_ok(cmd: &mut Command) {
    let output = cmd.output().expect("command runs");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// amplify (both modes) -> exec -> coverage -> report, fully offline, under
/// the fixed clock; everything lands in `dir`.
fn run_chain(dir: &Path, base_url: &str) -> ChainArtifacts {
    let spec = fixture_path("toy-spec-v3.json");
    let baseline = fixture_path("toy-baseline-suite.json");
    fs::create_dir_all(dir).unwrap();

    for (mode, script) in [("single", "toy-single-script.json"), ("multi", "toy-multi-script.json")] {
        let backend = dir.join(format!("backend-{mode}.json"));
        fs::write(
            &backend,
            serde_json::to_vec_pretty(&serde_json::json!({
                "kind": "scripted",
                "scriptPath": fixture_path(script).to_str().unwrap(),
            }))
            .unwrap(),
        )
        .unwrap();
        run_ok(restamp()
            .arg("amplify")
            .arg("--fixed-clock")
            .args(["--mode", mode])
            .arg("--spec")
            .arg(&spec)
            .arg("--all-endpoints")
            .arg("--backend")
            .arg(&backend)
            .arg("--baseline")
            .arg(&baseline)
            .arg("--out")
            .arg(dir));
    }

    let target = dir.join("target.json");
    fs::write(
        &target,
        serde_json::to_vec_pretty(&serde_json::json!({
            "baseUrl": base_url,
            "timeoutMs": 5000,
        }))
        .unwrap(),
    )
    .unwrap();

    run_ok(restamp()
        .arg("exec")
        .arg("--fixed-clock")
        .arg("--suite")
        .arg(&baseline)
        .arg("--target")
        .arg(&target)
        .arg("--out")
        .arg(dir)
        .args(["--label", "initial"]));
    for mode in ["single", "multi"] {
        let mut cmd = restamp();
        cmd.arg("exec").arg("--fixed-clock");
        for slug in ["items", "items-itemid", "ping"] {
            cmd.arg("--suite").arg(dir.join(format!("suite-{mode}-{slug}.json")));
        }
        cmd.arg("--target").arg(&target).arg("--out").arg(dir).args(["--label", mode]);
        run_ok(&mut cmd);
    }

    run_ok(restamp()
        .arg("coverage")
        .arg("--spec")
        .arg(&spec)
        .arg("--log")
        .arg(dir.join("log-initial.ndjson"))
        .arg("--log")
        .arg(dir.join("log-single.ndjson"))
        .arg("--log")
        .arg(dir.join("log-multi.ndjson"))
        .args(["--format", "json"])
        .arg("--out")
        .arg(dir.join("coverage.json")));

    run_ok(restamp()
        .arg("report")
        .arg("--bundle")
        .arg(dir)
        .args(["--system", "Toy Inventory"])
        .args(["--format", "markdown"]));

    ChainArtifacts { dir: dir.to_path_buf() }
}

fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.path().is_file() {
            out.insert(
                entry.file_name().to_string_lossy().into_owned(),
                fs::read(entry.path()).unwrap(),
            );
        }
    }
    out
}

#[test]
fn criterion_06_deterministic_end_to_end() {
    let started = Instant::now();
    let spec = load_spec(&fs::read(fixture_path("toy-spec-v3.json")).unwrap(), None).unwrap();
    let stub = serve(StubConfig::new(spec, 0), fixed_clock(super_fixed_ms())).unwrap();
    let base_url = stub.base_url();

    let root = tempfile::tempdir().unwrap();
    let first = run_chain(&root.path().join("one"), &base_url);
    let second = run_chain(&root.path().join("two"), &base_url);

    // 100% path and operation coverage in both amplified configurations
    let coverage: serde_json::Value =
        serde_json::from_slice(&fs::read(first.dir.join("coverage.json")).unwrap()).unwrap();
    let reports = coverage["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for report in &reports[1..] {
        let label = report["label"].as_str().unwrap();
        for row in report["coverage"]["criteria"].as_array().unwrap() {
            let criterion = row["criterion"].as_str().unwrap();
            if criterion == "path" || criterion == "operation" {
                assert_eq!(
                    row["ratio"].as_f64(),
                    Some(1.0),
                    "{label} must fully cover {criterion}"
                );
            }
        }
    }

    // byte-identical re-run under the fixed clock
    let a = artifact_bytes(&first.dir);
    let b = artifact_bytes(&second.dir);
    let names_a: Vec<&String> = a.keys().collect();
    let names_b: Vec<&String> = b.keys().collect();
    assert_eq!(names_a, names_b, "the two runs produced different artifact sets");
    for (name, bytes) in &a {
        assert_eq!(bytes, &b[name], "artifact {name} differs between identical runs");
    }

    stub.shutdown();
    assert!(started.elapsed() < Duration::from_secs(60));
    pass(6, "deterministic end-to-end chain");
}

fn super_fixed_ms() -> i64 {
    1_735_689_600_000
}

#[test]
fn criterion_07_multi_agent_topology() {
    use restamp_core::agents::{
        run_multi_agent, AgentRole, ExecutionMode, Limits, PromptLibrary, WorkflowContext,
    };
    use restamp_core::gateway::{ChatBackend, ScriptedBackend, ScriptedResponse, ScriptedToolCall};

    let spec = load_spec(&fs::read(fixture_path("toy-spec-v3.json")).unwrap(), None).unwrap();
    let prompts = PromptLibrary::default();
    let baseline: TestSuite =
        parse_suite(&fs::read(fixture_path("toy-baseline-suite.json")).unwrap()).unwrap();

    let text = |content: &str| ScriptedResponse {
        content: Some(content.to_string()),
        tool_calls: vec![],
        input_tokens: 10,
        output_tokens: 5,
    };
    let retrieve = ScriptedResponse {
        content: None,
        tool_calls: vec![ScriptedToolCall {
            name: "openapi_retriever".into(),
            arguments: r#"{"query": "/ping"}"#.into(),
            id: None,
        }],
        input_tokens: 10,
        output_tokens: 5,
    };
    let ping_doc = r#"{"suite": "s", "tests": [{"id": "t1", "name": "ping",
        "request": {"method": "GET", "path": "/ping"},
        "assertions": [{"kind": "status_equals", "expected": 200}]}]}"#;

    // a clean run and a never-clean run
    let clean_script = vec![
        retrieve.clone(),
        text("DONE"),
        text("H"),
        text("P"),
        text("V"),
        text("PLAN"),
        text(ping_doc),
        text("NO_COMPILATION_ERRORS"),
    ];
    let mut never_clean = vec![
        retrieve,
        text("DONE"),
        text("H"),
        text("P"),
        text("V"),
        text("PLAN"),
        text(ping_doc),
    ];
    for _ in 0..4 {
        never_clean.push(text("still broken"));
        never_clean.push(text(ping_doc));
    }

    let mut checked = 0;
    for (script, expect_limit) in [(clean_script, false), (never_clean, true)] {
        let backend = ChatBackend::Scripted(ScriptedBackend::new(script));
        let ctx = WorkflowContext {
            spec: &spec,
            backend: &backend,
            prompts: &prompts,
            limits: Limits::default(),
            execution: ExecutionMode::DryRun,
            files: vec![],
            clock: fixed_clock(0),
        };
        let run = run_multi_agent(&ctx, "/ping", &baseline).unwrap();
        assert_eq!(run.repair_limit_hit, expect_limit);
        if expect_limit {
            assert_eq!(run.repair_rounds, 3, "repair halts within the configured 3 rounds");
        }

        let roles = run.trace.roles();
        // pipeline order on first occurrences
        let first = |r: AgentRole| roles.iter().position(|x| *x == r).unwrap();
        let openapi_last = roles
            .iter()
            .rposition(|r| *r == AgentRole::OpenapiExtraction)
            .unwrap();
        for facet in [AgentRole::Header, AgentRole::Parameter, AgentRole::Value] {
            assert!(openapi_last < first(facet));
            assert!(first(facet) < first(AgentRole::Planner));
        }
        assert!(first(AgentRole::Planner) < first(AgentRole::Writer));
        assert!(first(AgentRole::Writer) < first(AgentRole::Executor));
        // linearity: no planning role after the first writer call
        for role in roles.iter().skip(first(AgentRole::Writer) + 1) {
            assert!(!role.is_planning_phase(), "planning role after the writer");
        }
        // repair only ever directly follows a (non-sentinel) executor reply
        for (i, role) in roles.iter().enumerate() {
            if *role == AgentRole::Repair {
                assert_eq!(roles[i - 1], AgentRole::Executor);
            }
        }
        checked += 1;
    }
    assert_eq!(checked, 2);
    pass(7, "multi-agent topology");
}

#[test]
fn criterion_08_failure_classification() {
    let spec = load_spec(&fs::read(fixture_path("toy-spec-v3.json")).unwrap(), None).unwrap();
    let stub = serve(StubConfig::new(spec, 0), system_clock()).unwrap();

    let doc = r#"{
        "suite": "classification",
        "tests": [
            {"id": "ok", "name": "expects what the server answers",
             "request": {"method": "GET", "path": "/ping"},
             "assertions": [{"kind": "status_equals", "expected": 200}]},
            {"id": "mismatch", "name": "expects a status the server never answers",
             "request": {"method": "GET", "path": "/ping"},
             "assertions": [{"kind": "status_equals", "expected": 404}]}
        ]
    }"#;
    let suite = parse_suite(doc.as_bytes()).unwrap();
    let target = TargetConfig::new(&stub.base_url());
    let outcome = execute_suite(&suite, &target, &system_clock()).unwrap();
    assert_eq!(outcome.results[0].outcome, Outcome::Passed);
    assert_eq!(outcome.results[1].outcome, Outcome::AssertionFailed);

    // unreachable host: a runtime error, not an assertion error
    let unreachable = parse_suite(
        br#"{"suite": "u", "tests": [{"id": "down", "name": "unreachable",
            "request": {"method": "GET", "path": "/ping"},
            "assertions": [{"kind": "status_equals", "expected": 200}]}]}"#,
    )
    .unwrap();
    let mut dead = TargetConfig::new("http://127.0.0.1:9");
    dead.timeout_ms = 1_500;
    let dead_outcome = execute_suite(&unreachable, &dead, &system_clock()).unwrap();
    assert_eq!(dead_outcome.results[0].outcome, Outcome::RuntimeError);

    // exact partition across all three results
    let mut all = outcome.results.clone();
    all.extend(dead_outcome.results.clone());
    let stats = summarize_results(&all);
    assert_eq!(
        (stats.generated, stats.successful, stats.assertion_errors, stats.other_runtime_errors),
        (3, 1, 1, 1)
    );
    let categories: Vec<FailureCategory> = all.iter().map(classify_outcome).collect();
    assert_eq!(
        categories,
        vec![
            FailureCategory::Success,
            FailureCategory::AssertionError,
            FailureCategory::OtherRuntimeError
        ]
    );
    stub.shutdown();
    pass(8, "failure classification");
}

#[test]
fn criterion_09_refinement_linter() {
    // the placeholder fixture yields exactly one unresolved_placeholder issue
    let doc = r#"{
        "suite": "refinement",
        "tests": [{"id": "t1", "name": "auth header placeholder",
            "request": {"method": "GET", "path": "/ping",
                        "headers": {"Authorization": "Bearer <Access Token Here>"}},
            "assertions": [{"kind": "status_equals", "expected": 200}]}]
    }"#;
    let suite = parse_suite(doc.as_bytes()).unwrap();
    let issues = validate_suite(&suite, None, &BTreeMap::new());
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].kind, IssueKind::UnresolvedPlaceholder);

    // a fully bound suite yields zero issues
    let bound = r#"{
        "suite": "bound",
        "tests": [{"id": "t1", "name": "variable path",
            "request": {"method": "GET", "path": "/items/${itemId}"},
            "assertions": [{"kind": "status_equals", "expected": 200}]}]
    }"#;
    let bound_suite = parse_suite(bound.as_bytes()).unwrap();
    let vars: BTreeMap<String, String> = [("itemId".to_string(), "1".to_string())].into();
    assert!(validate_suite(&bound_suite, None, &vars).is_empty());

    // issue counts are additive per test
    let mut combined = suite.clone();
    let mut second = suite.tests[0].clone();
    second.id = "t2".into();
    second.request.path = "/items/${unbound}".into();
    combined.tests.push(second);
    let whole = validate_suite(&combined, None, &BTreeMap::new()).len();
    let parts: usize = combined
        .tests
        .iter()
        .map(|t| {
            let sub = TestSuite {
                suite: combined.suite.clone(),
                tests: vec![t.clone()],
            };
            validate_suite(&sub, None, &BTreeMap::new()).len()
        })
        .sum();
    assert_eq!(whole, parts);
    assert_eq!(whole, 3);
    pass(9, "refinement linter");
}

#[test]
fn criterion_10_matcher_tolerance() {
    let pets = load_spec(
        br#"{
            "openapi": "3.0.0",
            "info": {"title": "pets", "version": "1"},
            "paths": {
                "/pet/{petId}": {"get": {"responses": {"200": {"description": "ok"}}}},
                "/pet/findByStatus": {"get": {"responses": {"200": {"description": "ok"}}}}
            }
        }"#,
        None,
    )
    .unwrap();

    let interaction = |url: &str| restamp_core::executor::Interaction {
        test_id: "t".into(),
        timestamp: "2024-01-01T00:00:00Z".into(),
        method: "GET".into(),
        url: url.into(),
        request_headers: Default::default(),
        request_media_type: None,
        request_body: None,
        request_body_digest: None,
        response_status: 200,
        response_headers: Default::default(),
        response_media_type: None,
        response_body: None,
        response_body_digest: None,
        duration_ms: 0,
    };

    // template match with binding
    let matched = match_interaction(&pets, &interaction("http://h/pet/123"))
        .unwrap()
        .unwrap();
    assert_eq!(matched.operation.path.as_str(), "/pet/{petId}");
    assert_eq!(matched.path_params.get("petId").map(String::as_str), Some("123"));

    // the literal template wins over the parameterized one
    let literal = match_interaction(&pets, &interaction("http://h/pet/findByStatus"))
        .unwrap()
        .unwrap();
    assert_eq!(literal.operation.path.as_str(), "/pet/findByStatus");

    // an equal-specificity tie is an error, never a guess
    let ambiguous = load_spec(
        br#"{
            "openapi": "3.0.0",
            "info": {"title": "amb", "version": "1"},
            "paths": {
                "/a/{x}/c": {"get": {"responses": {"200": {"description": "ok"}}}},
                "/a/b/{y}": {"get": {"responses": {"200": {"description": "ok"}}}}
            }
        }"#,
        None,
    )
    .unwrap();
    let err = match_interaction(&ambiguous, &interaction("http://h/a/b/c")).unwrap_err();
    assert!(matches!(err, CoverageError::AmbiguousMatch { .. }));
    pass(10, "matcher tolerance");
}
