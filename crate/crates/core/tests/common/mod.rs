#![allow(dead_code)]

use std::sync::Arc;

use turn_core::actors::{RunOutcome, RunReport, Runtime, RuntimeConfig};
use turn_core::compiler::{compile_source, Program};
use turn_core::drivers::{InferenceProvider, MockDriver};
use turn_core::host::Host;
use turn_core::schema::StaticFetcher;

pub fn compile(src: &str) -> Arc<Program> {
    Arc::new(compile_source(src, "main", &StaticFetcher::default()).unwrap_or_else(|e| panic!("{e}")))
}

pub fn runtime_with(src: &str, provider: Arc<dyn InferenceProvider>, config: RuntimeConfig) -> Runtime {
    Runtime::new(compile(src), Arc::new(Host::hermetic(".")), provider, config)
}

pub fn run_with(src: &str, provider: Arc<dyn InferenceProvider>, config: RuntimeConfig) -> RunReport {
    runtime_with(src, provider, config).run()
}

pub fn run(src: &str) -> RunReport {
    run_with(src, Arc::new(MockDriver::generator(7)), RuntimeConfig::default())
}

/// Transcript of a run that must complete.
pub fn output(src: &str) -> Vec<String> {
    let report = run(src);
    match &report.outcome {
        RunOutcome::Completed(_) => report.transcript,
        other => panic!("run did not complete: {other:?}\ntranscript: {:?}", report.transcript),
    }
}
