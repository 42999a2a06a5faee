//! `restamp amplify`: run the single-agent or multi-agent workflow over the
//! selected endpoints and write suites and traces into a run bundle.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Args;
use restamp_core::agents::{
    run_multi_agent, run_single_agent, ExecutionMode, Limits, PromptLibrary, WorkflowContext,
    WorkflowResult,
};
use restamp_core::clock::SharedClock;
use restamp_core::executor::TargetConfig;
use restamp_core::gateway::{BackendConfig, BackendKind, ChatBackend};
use restamp_core::spec_model::{load_spec, ApiSpec, DocumentFormat, PathTemplate};
use restamp_core::stub::{serve, StubConfig, StubHandle};
use restamp_core::test_dsl::{parse_suite, render_suite, TestSuite};

use crate::bundle::{endpoint_slug, write_bytes, write_json, TraceFile};
use crate::{read_config, CliError, CliResult};

#[derive(Args)]
pub struct AmplifyArgs {
    /// OpenAPI document (.json/.yaml/.yml).
    #[arg(long)]
    spec: PathBuf,

    /// Workflow to run.
    #[arg(long, value_parser = ["single", "multi"])]
    mode: String,

    /// Endpoint template to amplify; repeatable.
    #[arg(long = "endpoint")]
    endpoints: Vec<String>,

    /// Amplify every path in the spec.
    #[arg(long)]
    all_endpoints: bool,

    /// Backend config (JSON).
    #[arg(long)]
    backend: PathBuf,

    /// Baseline happy-path suite that seeds amplification.
    #[arg(long)]
    baseline: PathBuf,

    /// Target config for live execution inside the test-executor tool.
    #[arg(long, conflicts_with = "stub")]
    target: Option<PathBuf>,

    /// Run the test-executor tool against an internal stub of the spec.
    #[arg(long)]
    stub: bool,

    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,

    /// Directory of prompt template overrides (<role>.txt files).
    #[arg(long)]
    prompts: Option<PathBuf>,

    /// Fixture file names advertised to the model; repeatable.
    #[arg(long = "file")]
    files: Vec<String>,

    /// Concurrent endpoint amplifications (scripted backends force 1).
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Single-agent model-call cap.
    #[arg(long, default_value_t = 20)]
    max_calls: usize,

    /// OpenAPI-extraction model-call cap.
    #[arg(long, default_value_t = 10)]
    max_openapi_calls: usize,

    /// Repair-round cap.
    #[arg(long, default_value_t = 3)]
    max_repairs: usize,
}

fn load_spec_file(path: &PathBuf) -> Result<(ApiSpec, Vec<u8>, &'static str), CliError> {
    let bytes = read_config(path)?;
    let hint = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Some(DocumentFormat::Json),
        Some("yaml") | Some("yml") => Some(DocumentFormat::Yaml),
        _ => None,
    };
    let spec = load_spec(&bytes, hint).map_err(CliError::config)?;
    let ext = match hint {
        Some(DocumentFormat::Yaml) => "yaml",
        _ => "json",
    };
    Ok((spec, bytes, ext))
}

pub fn run(args: AmplifyArgs, clock: &SharedClock) -> CliResult {
    let (spec, spec_bytes, spec_ext) = load_spec_file(&args.spec)?;

    let backend_config: BackendConfig = serde_json::from_slice(&read_config(&args.backend)?)
        .map_err(|e| CliError::config(format!("invalid backend config: {e}")))?;

    let baseline_bytes = read_config(&args.baseline)?;
    let baseline: TestSuite =
        parse_suite(&baseline_bytes).map_err(|e| CliError::config(format!("invalid baseline suite: {e}")))?;

    let endpoints: Vec<String> = if args.all_endpoints {
        spec.paths.iter().map(|p| p.as_str().to_string()).collect()
    } else if args.endpoints.is_empty() {
        return Err(CliError::config(
            "select endpoints with --endpoint <path> (repeatable) or --all-endpoints",
        ));
    } else {
        args.endpoints
            .iter()
            .map(|e| PathTemplate::new(e).as_str().to_string())
            .collect()
    };
    for endpoint in &endpoints {
        if !spec.has_path(endpoint) {
            return Err(CliError::config(format!(
                "endpoint '{endpoint}' does not exist in the spec"
            )));
        }
    }

    let prompts = match &args.prompts {
        Some(dir) => PromptLibrary::with_overrides(dir)
            .map_err(|e| CliError::config(format!("cannot load prompt overrides: {e}")))?,
        None => PromptLibrary::default(),
    };

    // the test-executor tool validates always; it executes only when a
    // target (or the internal stub) is configured
    let mut stub_handle: Option<StubHandle> = None;
    let execution = if args.stub {
        let handle = serve(StubConfig::new(spec.clone(), 0), clock.clone())
            .map_err(CliError::config)?;
        let target = TargetConfig::new(&handle.base_url());
        stub_handle = Some(handle);
        ExecutionMode::Live(target)
    } else if let Some(path) = &args.target {
        let target: TargetConfig = serde_json::from_slice(&read_config(path)?)
            .map_err(|e| CliError::config(format!("invalid target config: {e}")))?;
        ExecutionMode::Live(target)
    } else {
        ExecutionMode::DryRun
    };

    let limits = Limits {
        single_agent_calls: args.max_calls,
        openapi_calls: args.max_openapi_calls,
        repair_rounds: args.max_repairs,
    };

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", args.out.display())))?;
    write_bytes(&args.out.join(format!("spec.{spec_ext}")), &spec_bytes)?;

    let mut jobs = args.jobs.max(1);
    if backend_config.kind == BackendKind::Scripted && jobs > 1 {
        eprintln!("restamp: scripted backends are sequential; running with --jobs 1");
        jobs = 1;
    }

    let failures = if jobs == 1 {
        let backend = backend_config.connect().map_err(CliError::config)?;
        let mut failures = 0usize;
        for endpoint in &endpoints {
            let ctx = WorkflowContext {
                spec: &spec,
                backend: &backend,
                prompts: &prompts,
                limits,
                execution: execution.clone(),
                files: args.files.clone(),
                clock: clock.clone(),
            };
            let result = run_workflow(&args.mode, &ctx, endpoint, &baseline);
            if !persist(&args, endpoint, result)? {
                failures += 1;
            }
        }
        failures
    } else {
        amplify_concurrently(&args, &spec, &backend_config, &prompts, limits, &execution, &baseline, &endpoints, jobs, clock)?
    };

    if let Some(handle) = stub_handle {
        handle.shutdown();
    }
    if failures > 0 {
        return Err(CliError::workflow(format!(
            "{failures} of {} endpoint workflows aborted; partial bundle kept in {}",
            endpoints.len(),
            args.out.display()
        )));
    }
    Ok(())
}

fn run_workflow(
    mode: &str,
    ctx: &WorkflowContext<'_>,
    endpoint: &str,
    baseline: &TestSuite,
) -> WorkflowResult {
    match mode {
        "single" => run_single_agent(ctx, endpoint, baseline),
        _ => run_multi_agent(ctx, endpoint, baseline),
    }
}

/// Write the suite and trace for one endpoint; returns false when the
/// workflow aborted (its partial trace is still written).
fn persist(args: &AmplifyArgs, endpoint: &str, result: WorkflowResult) -> Result<bool, CliError> {
    let slug = endpoint_slug(endpoint);
    let trace_path = args.out.join(format!("trace-{}-{slug}.json", args.mode));
    match result {
        Ok(run) => {
            let suite_path = args.out.join(format!("suite-{}-{slug}.json", args.mode));
            write_bytes(&suite_path, &render_suite(&run.suite))?;
            write_json(
                &trace_path,
                &TraceFile::new(endpoint, &args.mode, run.repair_rounds, run.repair_limit_hit, run.trace),
            )?;
            Ok(true)
        }
        Err(failure) => {
            eprintln!("restamp: {} workflow for {endpoint} aborted: {}", args.mode, failure.error);
            write_json(
                &trace_path,
                &TraceFile::new(endpoint, &args.mode, 0, false, failure.trace),
            )?;
            Ok(false)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn amplify_concurrently(
    args: &AmplifyArgs,
    spec: &ApiSpec,
    backend_config: &BackendConfig,
    prompts: &PromptLibrary,
    limits: Limits,
    execution: &ExecutionMode,
    baseline: &TestSuite,
    endpoints: &[String],
    jobs: usize,
    clock: &SharedClock,
) -> Result<usize, CliError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, WorkflowResult)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| -> Result<(), CliError> {
        let mut workers = Vec::new();
        for _ in 0..jobs.min(endpoints.len()) {
            let backend: ChatBackend = backend_config.connect().map_err(CliError::config)?;
            let next = &next;
            let results = &results;
            let clock = clock.clone();
            let execution = execution.clone();
            workers.push(scope.spawn(move || {
                loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if index >= endpoints.len() {
                        break;
                    }
                    let ctx = WorkflowContext {
                        spec,
                        backend: &backend,
                        prompts,
                        limits,
                        execution: execution.clone(),
                        files: args.files.clone(),
                        clock: clock.clone(),
                    };
                    let result = run_workflow(&args.mode, &ctx, &endpoints[index], baseline);
                    results.lock().expect("results poisoned").push((index, result));
                }
            }));
        }
        Ok(())
    })?;

    let mut collected = results.into_inner().expect("results poisoned");
    collected.sort_by_key(|(i, _)| *i);
    let mut failures = 0;
    for (index, result) in collected {
        if !persist(args, &endpoints[index], result)? {
            failures += 1;
        }
    }
    Ok(failures)
}
