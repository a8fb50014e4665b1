//! Acceptance criteria. Each criterion runs under its time limit and prints
//! one PASS/FAIL line; the process exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use common::{compile, output};
use turn_core::actors::{RunOutcome, RunReport, Runtime, RuntimeConfig};
use turn_core::compiler::{compile_source, CompileError};
use turn_core::contextmem::StructuredContext;
use turn_core::drivers::{MockDriver, MockStep};
use turn_core::durable::{resume_with_result, restore, FileStore, VmSnapshot};
use turn_core::experiments::{memory_latency, state_with_entries};
use turn_core::host::{Host, MockTransport};
use turn_core::schema::{FileFetcher, SchemaError};
use turn_core::vm::{combine_uncertain, evaluate_confidence, BinOp, Pid, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn run(src: &str, host: Arc<Host>, provider: Arc<MockDriver>, config: RuntimeConfig) -> RunReport {
    Runtime::new(compile(src), host, provider, config).run()
}

fn hermetic() -> Arc<Host> {
    Arc::new(Host::hermetic("."))
}

fn mock() -> Arc<MockDriver> {
    Arc::new(MockDriver::generator(11))
}

// 1. confidence algebra

fn route(p: f64) -> Vec<String> {
    let src = r#"
        struct Verdict { label: Str }
        let v = infer Verdict { "classify" }
        if confidence v < 0.7 { echo "fallback" } else { echo "main" }
    "#;
    let script = MockDriver::script(vec![MockStep::respond(json!({"label": "x"}), p)]);
    run(src, hermetic(), Arc::new(script), RuntimeConfig::default()).transcript
}

fn confidence_algebra() -> Outcome {
    ensure!(output("echo confidence 42") == ["1"], "confidence(42) is not 1.0");
    let c = evaluate_confidence(&Value::uncertain(Value::Num(42.0), 0.73));
    ensure!(c == 0.73, "confidence(Uncertain(42, 0.73)) = {c}");
    let sum = combine_uncertain(
        BinOp::Add,
        &Value::uncertain(Value::Num(10.0), 0.8),
        &Value::uncertain(Value::Num(5.0), 0.5),
    )
    .map_err(|e| e.to_string())?;
    let oracle = 0.8 * 0.5;
    ensure!((sum.score() - oracle).abs() < 1e-12, "sum score {} != {oracle}", sum.score());
    ensure!(sum.unwrapped() == &Value::Num(15.0), "sum value {}", sum.render());
    let both = combine_uncertain(
        BinOp::And,
        &Value::uncertain(Value::Bool(true), 0.9),
        &Value::uncertain(Value::Bool(true), 0.5),
    )
    .map_err(|e| e.to_string())?;
    ensure!(both.score() == 0.5, "and score {}", both.score());
    ensure!(route(0.45) == ["fallback"], "p=0.45 did not take the fallback");
    ensure!(route(0.92) == ["main"], "p=0.92 did not take the main path");
    Ok("42->1.0, 0.73, 0.8*0.5=0.40, min=0.50, routing 0.45/0.92".into())
}

// 2. structured context

fn structured_context() -> Outcome {
    let mut ctx = StructuredContext::new();
    ctx.system("SYS");
    let items: Vec<String> = (1..=101).map(|i| format!("m{i}")).collect();
    for item in &items {
        ctx.append(item.clone());
        let flat = ctx.to_flat_vec();
        ensure!(flat[0] == "SYS", "system prompt not first");
        ensure!(flat.last() == Some(item), "newest append not last");
    }
    ensure!(ctx.p1().len() == 100 && ctx.p2().len() == 1, "sizes P1={} P2={}", ctx.p1().len(), ctx.p2().len());
    // oracle: P0, then the single demoted item, then the newest hundred
    let mut expected = vec!["SYS".to_string()];
    expected.extend(items.iter().cloned());
    ensure!(ctx.to_flat_vec() == expected, "flat order differs from P0 -> P2 -> P1");
    ensure!(ctx.p2()[0] == "m1", "item #1 was not the one demoted");

    let report = run(
        r#"
        context.system("parent")
        context.append("parent item")
        let c = spawn turn() { return 1 }
        "#,
        hermetic(),
        mock(),
        RuntimeConfig::default(),
    );
    ensure!(report.outcome.is_completed(), "{:?}", report.outcome);
    let child = report.processes.get(&Pid(2)).ok_or("no child process")?;
    ensure!(child.context.to_flat_vec().is_empty(), "spawned context not empty");
    Ok("P0 first, newest last, |P1|=100 |P2|=1, fresh child empty".into())
}

// 3. memory isolation and scale

fn memory_scale() -> Outcome {
    let src = r#"
        let parent = self
        let a = spawn turn() {
            remember("shared", "A")
            remember("only_a", 1)
            send parent, recall("shared")
        }
        let from_a = receive
        let b = spawn turn() {
            remember("shared", "B")
            send parent, [recall("shared"), recall("only_a")]
        }
        echo from_a
        echo receive
    "#;
    ensure!(output(src) == ["A", "[\"B\", null]"], "memory leaked between agents");

    let _ = memory_latency(1_000);
    let (w1, r1) = memory_latency(1_000);
    let (w100, r100) = memory_latency(100_000);
    ensure!(w100 <= 3.0 * w1, "write median grew: {w1:.0} -> {w100:.0} ns/op");
    ensure!(r100 <= 3.0 * r1, "read median grew: {r1:.0} -> {r100:.0} ns/op");

    let per_entry =
        (state_with_entries(1000).serialize().len() - state_with_entries(0).serialize().len()) as f64 / 1000.0;
    Ok(format!(
        "isolated; write {w1:.0}->{w100:.0} ns/op, read {r1:.0}->{r100:.0} ns/op; {per_entry:.1} B/entry serialized"
    ))
}

// 4. durable execution

/// Ordinary least squares; returns R².
fn r_squared(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|(x, y)| (y - (intercept + slope * x)).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

const CHECKPOINT: &str = r#"
    context.system("You are a careful analyst.")
    turn fill(i, n) {
        if i < n {
            remember("k" + call("str", i), {n: i, label: "entry " + call("str", i)})
            return fill(i + 1, n)
        }
    }
    fill(0, 50)
    let pending = [1, "two", true]
    echo "checkpointing"
    SUSPEND
    echo pending
    echo recall("k49").label
"#;

fn durable_execution() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = FileStore::new(dir.path());
    let config = || RuntimeConfig {
        store: Some(store.clone()),
        ..RuntimeConfig::default()
    };
    let src = CHECKPOINT.replace("SUSPEND", "suspend");
    let rt = Runtime::new(compile(&src), hermetic(), mock(), config());
    let first = rt.run();
    let RunOutcome::Suspended { id: Some(id), .. } = &first.outcome else {
        return Err(format!("did not suspend: {:?}", first.outcome));
    };
    let live = &first.processes[&Pid(1)];

    let text = std::fs::read_to_string(store.path(id)).map_err(|e| e.to_string())?;
    let snap = VmSnapshot::deserialize(&text).map_err(|e| e.to_string())?;
    ensure!(snap.serialize() == text, "re-serialization is not byte-identical");
    let back = restore(&snap, rt.registry(), &rt.chunk_hash()).map_err(|e| e.to_string())?;
    ensure!(back.pid == live.pid, "pid changed");
    ensure!(back.ip() == live.ip(), "pc changed");
    ensure!(back.stack == live.stack, "stack changed");
    ensure!(back.frames.len() == live.frames.len(), "frame count changed");
    ensure!(back.frames.iter().zip(&live.frames).all(|(a, b)| a.locals == b.locals), "locals changed");
    ensure!(back.memory.len() == 50, "memory has {} entries", back.memory.len());
    ensure!(live.memory.iter().all(|(k, v)| back.memory.recall(k) == *v), "memory entry changed");
    ensure!(back.context.p0() == ["You are a careful analyst."], "P0 changed");

    let fresh = Runtime::new(compile(&src), hermetic(), mock(), config());
    let state = resume_with_result(&store.load(id).map_err(|e| e.to_string())?, Value::Null, fresh.registry(), &fresh.chunk_hash())
        .map_err(|e| e.to_string())?;
    let second = fresh.run_process(state);
    ensure!(second.outcome.is_completed(), "resume: {:?}", second.outcome);
    let combined: Vec<String> = first.transcript.iter().chain(&second.transcript).cloned().collect();
    let straight = output(&CHECKPOINT.replace("SUSPEND", ""));
    ensure!(combined == straight, "resumed output {combined:?} != straight {straight:?}");

    let points: Vec<(f64, f64)> = [10usize, 500, 5000]
        .iter()
        .map(|&n| (n as f64, state_with_entries(n).serialize().len() as f64))
        .collect();
    let r2 = r_squared(&points);
    ensure!(r2 > 0.99, "size fit R² = {r2}");
    let reference = 203.4 * 1024.0;
    let size = points[2].1;
    ensure!((size - reference).abs() <= 0.5 * reference, "5000-entry snapshot is {size} B");
    Ok(format!("fidelity exact, R²={r2:.6}, 5000 entries = {:.1} KB, resume matches", size / 1024.0))
}

// 5. credential opacity

const SENTINEL: &str = "tok_SENTINEL_5b8e1d0c";

fn contains_sentinel(v: &Value) -> bool {
    let mut seen = false;
    v.for_each_str(&mut |s| seen |= s.contains(SENTINEL));
    seen
}

fn credential_opacity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = FileStore::new(dir.path().join("store"));
    let mut env = BTreeMap::new();
    env.insert("TURN_IDENTITY_STRIPE_TOKEN".to_string(), SENTINEL.to_string());
    let transport = Arc::new(MockTransport::with_fallback(r#"{"charges": []}"#));
    let host = Arc::new(Host::new(env, dir.path(), transport.clone()));
    let src = r#"
        let id = grant identity::oauth("stripe")
        echo id
        remember("handle", id)
        context.append(id)
        let resp = call("std/net.get", id, "https://api.stripe.test/v1/charges")
        remember("resp", resp)
        echo resp.status
        let other = grant identity::oauth("stripe")
        echo other
        echo id == other
        suspend
        echo "resumed with " + call("str", [1])
        echo id
    "#;
    let config = RuntimeConfig {
        store: Some(store.clone()),
        ..RuntimeConfig::default()
    };
    let rt = Runtime::new(compile(src), Arc::clone(&host), mock(), config);
    let first = rt.run();
    let RunOutcome::Suspended { id: Some(snap_id), .. } = &first.outcome else {
        return Err(format!("did not suspend: {:?}", first.outcome));
    };
    ensure!(
        first.transcript == ["<identity stripe>", "200", "<identity stripe>", "true"],
        "transcript {:?}",
        first.transcript
    );
    ensure!(
        transport.requests().iter().any(|r| r.headers.iter().any(|(_, v)| v.contains(SENTINEL))),
        "credential was never presented to the transport"
    );
    let file = std::fs::read_to_string(store.path(snap_id)).map_err(|e| e.to_string())?;
    ensure!(!file.contains(SENTINEL), "sentinel in snapshot file");
    let state =
        resume_with_result(&store.load(snap_id).map_err(|e| e.to_string())?, Value::Null, rt.registry(), &rt.chunk_hash())
            .map_err(|e| e.to_string())?;
    let second = rt.run_process(state);
    ensure!(second.outcome.is_completed(), "resume: {:?}", second.outcome);
    for report in [&first, &second] {
        ensure!(!report.transcript.iter().any(|l| l.contains(SENTINEL)), "sentinel in transcript");
        ensure!(!report.reachable_values().into_iter().any(contains_sentinel), "sentinel in a reachable value");
        ensure!(!report.contexts().iter().any(|l| l.contains(SENTINEL)), "sentinel in a context");
    }
    let handles: Vec<Value> = ["handle"]
        .iter()
        .filter_map(|k| first.processes.get(&Pid(1)).map(|p| p.memory.recall(k)))
        .collect();
    ensure!(matches!(handles.as_slice(), [Value::Identity(_)]), "handle not stored as an Identity");

    for shape in ["id", "[id]", "{a: {b: [1, id]}}"] {
        let src = format!("let id = grant identity::oauth(\"stripe\")\necho call(\"std/json.stringify\", {shape})");
        let report = run(&src, Arc::clone(&host), mock(), RuntimeConfig::default());
        let RunOutcome::Faulted { message, .. } = &report.outcome else {
            return Err(format!("stringify of {shape} did not fault"));
        };
        ensure!(message.starts_with("SerializationError"), "stringify of {shape}: {message}");
    }
    Ok("opaque echo, no sentinel in values/transcripts/snapshot, stringify faults, independent grants".into())
}

// 6. typed inference under fuzzing

#[derive(Clone, Copy, Debug)]
enum Ty {
    Num,
    Str,
    Bool,
    List,
    Map,
    Inner,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Num => "Num",
            Ty::Str => "Str",
            Ty::Bool => "Bool",
            Ty::List => "List",
            Ty::Map => "Map",
            Ty::Inner => "Inner",
        }
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> Json {
        match self {
            Ty::Num => json!(rng.random_range(-1000..1000) as f64 / 4.0),
            Ty::Str => json!(format!("s{}", rng.random_range(0..100))),
            Ty::Bool => json!(rng.random::<bool>()),
            Ty::List => json!([1, "x"]),
            Ty::Map => json!({"k": 1}),
            Ty::Inner => {
                if rng.random_range(0..4) == 0 {
                    json!({"a": "not a number", "b": "x"})
                } else {
                    json!({"a": 1.5, "b": "x"})
                }
            }
        }
    }

    fn holds(self, v: &Value) -> bool {
        match (self, v) {
            (Ty::Num, Value::Num(_))
            | (Ty::Str, Value::Str(_))
            | (Ty::Bool, Value::Bool(_))
            | (Ty::List, Value::List(_))
            | (Ty::Map, Value::Map(_)) => true,
            (Ty::Inner, Value::Struct(s)) => {
                s.type_name == "Inner"
                    && matches!(s.get("a"), Some(Value::Num(_)))
                    && matches!(s.get("b"), Some(Value::Str(_)))
            }
            _ => false,
        }
    }
}

const TYPES: [Ty; 6] = [Ty::Num, Ty::Str, Ty::Bool, Ty::List, Ty::Map, Ty::Inner];

fn infer_program(fields: &[(String, Ty)]) -> String {
    let decl: Vec<String> = fields.iter().map(|(n, t)| format!("{n}: {}", t.name())).collect();
    format!(
        "struct Inner {{ a: Num, b: Str }}\nstruct Target {{ {} }}\n\
         try {{\n  let r = infer Target {{ \"produce a Target\" }}\n  remember(\"r\", r)\n  echo \"ok\"\n}} catch e {{\n  echo e.type\n}}",
        decl.join(", ")
    )
}

fn run_script(src: &str, steps: Vec<MockStep>) -> (RunReport, usize) {
    let driver = Arc::new(MockDriver::script(steps));
    let report = run(src, hermetic(), Arc::clone(&driver), RuntimeConfig::default());
    (report, driver.call_count())
}

fn typed_inference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let (mut valid, mut invalid) = (0, 0);
    for case in 0..200 {
        let n = rng.random_range(1..6);
        let fields: Vec<(String, Ty)> =
            (0..n).map(|i| (format!("f{i}"), TYPES[rng.random_range(0..TYPES.len())])).collect();
        let mut obj = serde_json::Map::new();
        for (name, ty) in &fields {
            match rng.random_range(0..10) {
                0 => {}
                1 => {
                    obj.insert(name.clone(), TYPES[rng.random_range(0..TYPES.len())].sample(&mut rng));
                }
                _ => {
                    obj.insert(name.clone(), ty.sample(&mut rng));
                }
            }
        }
        let response = if rng.random_range(0..20) == 0 { json!("not an object") } else { Json::Object(obj) };

        let src = infer_program(&fields);
        let program = compile(&src);
        let schema = program.structs.iter().find(|s| s.def.name == "Target").ok_or("no Target")?.schema.as_json().clone();
        let oracle = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?.is_valid(&response);

        let steps = vec![MockStep::respond(response.clone(), 0.8); 3];
        let (report, calls) = run_script(&src, steps);
        ensure!(report.outcome.is_completed(), "case {case}: {:?}", report.outcome);
        if oracle {
            valid += 1;
            ensure!(report.transcript == ["ok"], "case {case}: valid {response} rejected: {:?}", report.transcript);
            ensure!(calls == 1, "case {case}: {calls} calls for a valid response");
            let bound = report.processes[&Pid(1)].memory.recall("r");
            ensure!(bound.score() == 0.8, "case {case}: confidence {}", bound.score());
            let Value::Struct(s) = bound.unwrapped() else {
                return Err(format!("case {case}: bound {}", bound.render()));
            };
            for (name, ty) in &fields {
                let v = s.get(name).ok_or(format!("case {case}: missing {name}"))?;
                ensure!(ty.holds(v), "case {case}: field {name} should be {} but is {}", ty.name(), v.render());
            }
        } else {
            invalid += 1;
            ensure!(report.transcript == ["InferError"], "case {case}: invalid {response} gave {:?}", report.transcript);
            ensure!(calls == 3, "case {case}: {calls} calls for an invalid response");
        }
    }
    ensure!(valid > 20 && invalid > 20, "fuzz mix too lopsided: {valid} valid, {invalid} invalid");

    let src = infer_program(&[("x".into(), Ty::Num)]);
    let (report, calls) = run_script(&src, vec![MockStep::Malformed; 3]);
    ensure!(report.transcript == ["InferError"] && calls == 3, "all-malformed: {:?}, {calls} calls", report.transcript);
    let steps = vec![MockStep::Malformed, MockStep::Malformed, MockStep::respond(json!({"x": 3}), 0.9)];
    let (report, calls) = run_script(&src, steps);
    ensure!(report.transcript == ["ok"] && calls == 3, "malformed x2 then valid: {:?}, {calls} calls", report.transcript);
    Ok(format!("200 cases ({valid} conforming, {invalid} rejected after 3 calls); retry on call 3 succeeds"))
}

// 7. pipeline ordering

fn pipeline_ordering() -> Outcome {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let fetcher = FileFetcher {
        base_dir: Some(fixtures.clone()),
        allow_net: false,
    };
    let src = format!(
        r#"
        let api = use schema::openapi("file://{}")
        let q = infer GetQuoteResponse {{ "Quote for ACME" }}
        echo q.symbol
        let feed = grant identity::network("quotes")
        let resp = api.getQuote(feed, {{symbol: "ACME"}})
        echo resp.status
        "#,
        fixtures.join("quotes.json").display()
    );
    let program = compile_source(&src, "main", &fetcher).map_err(|e| e.to_string())?;
    let mut env = BTreeMap::new();
    env.insert("TURN_IDENTITY_QUOTES_TOKEN".to_string(), "t".to_string());
    let transport = Arc::new(MockTransport::with_fallback("{}"));
    let host = Arc::new(Host::new(env, ".", transport.clone()));
    let script = MockDriver::script(vec![MockStep::respond(json!({"symbol": "ACME", "price": 12.5, "halted": false}), 0.9)]);
    let report = Runtime::new(Arc::new(program), host, Arc::new(script), RuntimeConfig::default()).run();
    ensure!(report.outcome.is_completed(), "{:?}", report.outcome);
    ensure!(report.transcript == ["ACME", "200"], "transcript {:?}", report.transcript);
    let urls: Vec<String> = transport.requests().into_iter().map(|r| r.url).collect();
    ensure!(urls == ["https://quotes.example.test/v1/quotes/ACME"], "requests {urls:?}");

    let bad = "let g = use schema::graphql(\"file://quotes.json\")\necho 1";
    match compile_source(bad, "main", &fetcher) {
        Err(CompileError::Schema(SchemaError::UnsupportedProtocol { protocol, .. })) if protocol == "graphql" => {}
        other => return Err(format!("graphql: {other:?}")),
    }
    Ok("openapi struct synthesized before analysis; graphql rejected".into())
}

// 8. actor semantics

fn actor_semantics() -> Outcome {
    let crash = r#"
        let a = spawn_link turn() { throw "a failed" }
        let b = spawn_link turn() { throw "b failed" }
        let c = spawn_link turn() { throw "c failed" }
        turn drain(n) {
            if n == 0 { return 0 }
            let m = receive
            echo m.type + " " + m.reason
            return drain(n - 1)
        }
        drain(3)
        send self, "end"
        echo receive
    "#;
    let out = output(crash);
    ensure!(out.len() == 4 && out[3] == "end", "exit signals: {out:?}");
    for who in ["a", "b", "c"] {
        let n = out.iter().filter(|l| l.starts_with("exit") && l.contains(&format!("{who} failed"))).count();
        ensure!(n == 1, "{n} exit signals from {who}");
    }

    let xs = [1.0, 2.0, 3.0];
    let oracle: Vec<String> = xs.iter().map(|x| (x * 2.0).to_string()).collect();
    let got = output("turn double(x) { return x * 2 }\necho spawn_each([1, 2, 3], turn(x) { return double(x) })");
    ensure!(got == [format!("[{}]", oracle.join(", "))], "spawn_each gave {got:?}");

    let fifo = r#"
        turn produce(i, to) {
            if i < 1000 { send to, i; return produce(i + 1, to) }
        }
        turn check(i) {
            if i == 1000 { return "in order" }
            let m = receive
            if m != i { return "out of order at " + call("str", i) }
            return check(i + 1)
        }
        let me = self
        let p = spawn turn() { produce(0, me) }
        echo check(0)
    "#;
    ensure!(output(fifo) == ["in order"], "per-sender FIFO violated");

    let committee = include_str!("../programs/committee.tn");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut transcripts = Vec::new();
    for _ in 0..5 {
        let report = run(
            committee,
            Arc::new(Host::hermetic(dir.path())),
            Arc::new(MockDriver::generator(2024)),
            RuntimeConfig::default(),
        );
        ensure!(report.outcome.is_completed(), "committee: {:?}", report.outcome);
        transcripts.push(report.transcript.join("\n"));
    }
    ensure!(transcripts.windows(2).all(|w| w[0] == w[1]), "committee transcripts differ");
    Ok(format!("3 signals for 3 partners, [2, 4, 6], 1000 in order, committee stable ({} bytes)", transcripts[0].len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("confidence algebra", 1, confidence_algebra),
        ("structured context", 1, structured_context),
        ("memory isolation and scale", 30, memory_scale),
        ("durable execution", 10, durable_execution),
        ("credential opacity", 1, credential_opacity),
        ("typed inference property suite", 10, typed_inference),
        ("pipeline ordering", 1, pipeline_ordering),
        ("actor semantics", 5, actor_semantics),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let limit = Duration::from_secs(*limit);
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("criterion {} PASS: {name} [{elapsed:.2?} / {limit:?}] {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {} FAIL: {name} [{elapsed:.2?} / {limit:?}] {why}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
