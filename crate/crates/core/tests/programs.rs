mod common;

use std::sync::Arc;

use common::compile;
use turn_core::actors::{RunOutcome, Runtime, RuntimeConfig};
use turn_core::drivers::MockDriver;
use turn_core::host::Host;

const COMMITTEE: &str = include_str!("../programs/committee.tn");

fn committee(dir: &std::path::Path, workers: usize) -> Vec<String> {
    let rt = Runtime::new(
        compile(COMMITTEE),
        Arc::new(Host::hermetic(dir)),
        Arc::new(MockDriver::generator(42)),
        RuntimeConfig {
            workers,
            ..RuntimeConfig::default()
        },
    );
    let report = rt.run();
    assert!(matches!(report.outcome, RunOutcome::Completed(_)), "{:?}", report.outcome);
    report.transcript
}

#[test]
fn committee_is_deterministic_with_one_worker() {
    let dir = tempfile::tempdir().unwrap();
    let first = committee(dir.path(), 1);
    for _ in 0..4 {
        assert_eq!(committee(dir.path(), 1), first);
    }
    assert_eq!(first.iter().filter(|l| l.starts_with("memo from")).count(), 3);
    assert!(first.contains(&"received 3 memos".to_string()));
    assert!(first.contains(&"minutes saved".to_string()));
    let minutes = std::fs::read_to_string(dir.path().join("committee/minutes.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&minutes).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3);
}

#[test]
fn committee_completes_with_many_workers() {
    let dir = tempfile::tempdir().unwrap();
    let out = committee(dir.path(), 4);
    assert!(out.contains(&"received 3 memos".to_string()));
}

#[test]
fn checkpoint_resumes_after_suspend() {
    use turn_core::durable::resume_with_result;
    use turn_core::vm::Value;

    let src = include_str!("../programs/checkpoint.tn");
    let dir = tempfile::tempdir().unwrap();
    let rt = || {
        Runtime::new(
            compile(src),
            Arc::new(Host::hermetic(dir.path())),
            Arc::new(MockDriver::generator(5)),
            RuntimeConfig::default(),
        )
    };
    let first = rt().run();
    let RunOutcome::Suspended { snapshot, .. } = &first.outcome else {
        panic!("{:?}", first.outcome);
    };
    let resumed = rt();
    let state = resume_with_result(snapshot, Value::Null, resumed.registry(), &resumed.chunk_hash()).unwrap();
    let second = resumed.run_process(state);
    assert!(second.outcome.is_completed(), "{:?}", second.outcome);
    assert_eq!(first.transcript, ["reviewed 3 contracts"]);
    assert_eq!(second.transcript.len(), 2);
    assert!(second.transcript[1].starts_with("first verdict: "));
}

#[test]
fn scatter_reports_every_ticket_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let report = Runtime::new(
        compile(include_str!("../programs/scatter.tn")),
        Arc::new(Host::hermetic(dir.path())),
        Arc::new(MockDriver::generator(9)),
        RuntimeConfig::default(),
    )
    .run();
    assert!(report.outcome.is_completed(), "{:?}", report.outcome);
    let tickets: Vec<&str> = report.transcript.iter().map(|l| l.split(" -> ").next().unwrap()).collect();
    assert_eq!(tickets, ["login fails on mobile", "invoice total is wrong", "export times out"]);
}
