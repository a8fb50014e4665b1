//! The five experiment suites (E1–E5): credential opacity, confidence
//! algebra, structured context, agent memory and durable execution.
//!
//! Every suite is hermetic: the mock driver stands in for the model, hosts
//! carry a synthetic environment, and nothing touches the network or disk.

use std::collections::BTreeMap;
use std::fmt;
use std::hint::black_box;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::actors::{RunOutcome, RunReport, Runtime, RuntimeConfig};
use crate::compiler::{compile_source, Program};
use crate::contextmem::{AgentMemory, StructuredContext, DEFAULT_WORKING_CAPACITY};
use crate::drivers::{InferenceProvider, MockDriver, MockStep};
use crate::durable::{self, VmSnapshot};
use crate::host::{Host, MockTransport};
use crate::schema::StaticFetcher;
use crate::vm::{combine_uncertain, evaluate_confidence, BinOp, Pid, ProcessState, Value};

/// Credential planted in E1 hosts; it must never surface.
pub const SENTINEL: &str = "sk_live_SENTINEL_7f3a9c";
pub const SYSTEM_PROMPT: &str = "You are a careful analyst.";

#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Indented line printed under the check.
    pub note: Option<String>,
}

impl Check {
    fn new(id: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id,
            passed,
            detail: detail.into(),
            note: None,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{} {verdict}: {}", self.id, self.detail)?;
        if let Some(note) = &self.note {
            write!(f, "\n          {note}")?;
        }
        Ok(())
    }
}

pub struct Report {
    pub suites: Vec<Vec<Check>>,
}

impl Report {
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.suites.iter().flatten()
    }

    pub fn all_passed(&self) -> bool {
        self.checks().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, suite) in self.suites.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            for c in suite {
                writeln!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

pub fn run_all() -> Report {
    Report {
        suites: vec![e1(), e2(), e3(), e4(), e5()],
    }
}

fn program(src: &str) -> Arc<Program> {
    Arc::new(compile_source(src, "main", &StaticFetcher::default()).expect("experiment program compiles"))
}

fn host_with_sentinel() -> Arc<Host> {
    let mut env = BTreeMap::new();
    env.insert("TURN_IDENTITY_STRIPE_TOKEN".to_string(), SENTINEL.to_string());
    Arc::new(Host::new(env, ".", Arc::new(MockTransport::new())))
}

fn run(src: &str, host: Arc<Host>, provider: Arc<dyn InferenceProvider>) -> RunReport {
    Runtime::new(program(src), host, provider, RuntimeConfig::default()).run()
}

fn leaks(report: &RunReport, secret: &str) -> bool {
    let mut seen = report.transcript.iter().any(|l| l.contains(secret))
        || report.contexts().iter().any(|l| l.contains(secret));
    for v in report.reachable_values() {
        v.for_each_str(&mut |s| seen |= s.contains(secret));
    }
    seen
}

// ---- E1: credential opacity ----

pub fn e1() -> Vec<Check> {
    let host = host_with_sentinel();
    let mock = || Arc::new(MockDriver::generator(0));

    let a = run("let id = grant identity::oauth(\"stripe\")\necho id", Arc::clone(&host), mock());
    let shown = a.transcript.first().cloned().unwrap_or_default();
    let e1a = Check::new(
        "E1-A",
        a.outcome.is_completed() && shown == "<identity stripe>" && !leaks(&a, SENTINEL),
        format!("Identity displayed as \"{shown}\" (opaque, no raw credential)"),
    );

    let b = run(
        r#"
        let id = grant identity::oauth("stripe")
        remember("handle", id)
        context.append(id)
        try {
            echo call("std/json.stringify", {handle: id})
        } catch e {
            echo e.type
        }
        "#,
        Arc::clone(&host),
        mock(),
    );
    let bound = b.processes.get(&Pid(1)).map(|p| p.memory.recall("handle"));
    let is_handle = matches!(&bound, Some(Value::Identity(id)) if id.provider == "stripe" && id.class == "oauth");
    let e1b = Check::new(
        "E1-B",
        b.outcome.is_completed()
            && is_handle
            && b.transcript == ["SerializationError"]
            && !leaks(&b, SENTINEL),
        "grant identity::oauth(\"stripe\") -> Identity(\"stripe\") (token never in heap)",
    );

    let c = run(
        "let id = grant identity::oauth(\"stripe\")\necho confidence id",
        Arc::clone(&host),
        mock(),
    );
    let wrapped = Value::uncertain(Value::identity("stripe", "oauth"), 0.3);
    let e1c = Check::new(
        "E1-C",
        c.transcript == ["1"] && matches!(wrapped, Value::Identity(_)) && evaluate_confidence(&wrapped) == 1.0,
        "Identity is a certain (non-uncertain) value",
    );

    let d = run(
        r#"
        let a = grant identity::oauth("stripe")
        let b = grant identity::oauth("stripe")
        remember("a", a)
        remember("b", b)
        echo a == b
        "#,
        host,
        mock(),
    );
    let independent = d.processes.get(&Pid(1)).is_some_and(|p| {
        let (a, b) = (p.memory.recall("a"), p.memory.recall("b"));
        matches!((&a, &b), (Value::Identity(x), Value::Identity(y)) if x.provider == "stripe" && y.provider == "stripe")
    });
    let e1d = Check::new(
        "E1-D",
        d.outcome.is_completed() && independent && d.transcript == ["true"],
        "Two grants for same provider are independent identity handles",
    );
    vec![e1a, e1b, e1c, e1d]
}

// ---- E2: confidence algebra ----

/// Route an inference result of confidence `p` through a 0.7 threshold.
pub fn route(p: f64) -> Vec<String> {
    let src = r#"
        struct Assessment { verdict: Str }
        let r = infer Assessment { "Assess the quarterly filing." }
        if confidence r < 0.7 {
            echo "fallback"
        } else {
            echo "main"
        }
    "#;
    let mock = MockDriver::script(vec![MockStep::respond(serde_json::json!({"verdict": "sound"}), p)]);
    run(src, Arc::new(Host::hermetic(".")), Arc::new(mock)).transcript
}

pub fn e2() -> Vec<Check> {
    let c1 = evaluate_confidence(&Value::Num(42.0));
    let c2 = evaluate_confidence(&Value::uncertain(Value::Num(42.0), 0.73));
    let sum = combine_uncertain(
        BinOp::Add,
        &Value::uncertain(Value::Num(10.0), 0.8),
        &Value::uncertain(Value::Num(5.0), 0.5),
    );
    let c3 = sum.as_ref().map(evaluate_confidence).unwrap_or(f64::NAN);
    let and = combine_uncertain(
        BinOp::And,
        &Value::uncertain(Value::Bool(true), 0.9),
        &Value::uncertain(Value::Bool(true), 0.5),
    );
    let c4 = and.as_ref().map(evaluate_confidence).unwrap_or(f64::NAN);
    let low = route(0.45);
    let high = route(0.92);
    vec![
        Check::new("E2-1", c1 == 1.0, format!("confidence(42) = {c1:.1}")),
        Check::new("E2-2", c2 == 0.73, format!("confidence(Uncertain(42, 0.73)) = {c2:.2}")),
        Check::new(
            "E2-3",
            (c3 - 0.40).abs() < 1e-12 && sum.is_ok_and(|v| v.unwrapped() == &Value::Num(15.0)),
            format!("confidence(Uncertain(10,0.8) + Uncertain(5,0.5)) = {c3:.2}  (product rule)"),
        ),
        Check::new("E2-4", c4 == 0.5, format!("confidence(x and y) where x~0.9, y~0.5 = {c4:.2}  (Zadeh min)")),
        Check::new(
            "E2-5",
            low == ["fallback"],
            "confidence=0.45 < 0.70 -> deterministic fallback branch executed",
        ),
        Check::new(
            "E2-6",
            high == ["main"],
            "confidence=0.92 >= 0.70 -> high-confidence path executed",
        ),
    ]
}

// ---- E3: structured context ----

pub fn e3() -> Vec<Check> {
    let mut ctx = StructuredContext::new();
    ctx.system(SYSTEM_PROMPT);
    for i in 1..=100 {
        ctx.append(format!("item {i}"));
    }
    let before = ctx.to_flat_vec();
    ctx.append("item 101");
    let flat = ctx.to_flat_vec();

    let primacy = flat.first().map(String::as_str) == Some(SYSTEM_PROMPT) && before[0] == SYSTEM_PROMPT;
    let recency = flat.last().map(String::as_str) == Some("item 101");
    let (p1, p2) = (ctx.p1().len(), ctx.p2().len());
    let demoted = p1 == 100 && p2 == 1 && ctx.p2()[0] == "item 1";
    let order = flat.len() == 102
        && flat[1] == "item 1"
        && (2..=101).all(|i| flat[i] == format!("item {i}"));

    let spawned = run(
        r#"
        context.system("parent directive")
        context.append("parent item")
        let parent = self
        let child = spawn turn() { send parent, "done" }
        echo receive
        "#,
        Arc::new(Host::hermetic(".")),
        Arc::new(MockDriver::generator(0)),
    );
    let fresh = spawned.outcome.is_completed()
        && spawned
            .processes
            .get(&Pid(2))
            .is_some_and(|child| child.context.is_empty() && child.memory.is_empty());

    let mut e3_3 = Check::new("E3-3", demoted, "P1 overflow evicts oldest item to P2 episodic (demote, not drop)");
    e3_3.note = Some(format!("P1 size={p1}, P2 size={p2}"));
    vec![
        Check::new("E3-1", primacy, "P0 system prompt is always first in flat context (primacy position)"),
        Check::new("E3-2", recency, "most recently appended item is last in flat context (recency position)"),
        e3_3,
        Check::new(
            "E3-4",
            order,
            format!("flat rendering order confirmed as P0(0) -> P2(1) -> P1({})", flat.len() - 1),
        ),
        Check::new("E3-5", fresh, "each Runtime starts with an empty context (isolation invariant)"),
    ]
}

// ---- E4: agent memory ----

/// Median write and read latency (ns/op) for a memory holding `k` entries.
/// Keys are built per operation, as a program building `"key_" + i` would.
/// Operations are timed in batches of 100 and the median batch mean is
/// reported.
pub fn memory_latency(k: usize) -> (f64, f64) {
    const BATCH: usize = 100;
    let mut key = String::new();
    let mut make_key = |i: usize| {
        use std::fmt::Write as _;
        key.clear();
        let _ = write!(key, "key_{i}");
        key.clone()
    };
    let mut mem = AgentMemory::new();
    let mut writes = Vec::with_capacity(k / BATCH + 1);
    for start in (0..k).step_by(BATCH) {
        let end = (start + BATCH).min(k);
        let t = Instant::now();
        for i in start..end {
            mem.remember(make_key(i), Value::Num(i as f64));
        }
        writes.push(t.elapsed().as_nanos() as f64 / (end - start) as f64);
    }
    // a fixed-stride walk visits keys spread over the whole table
    let stride = 7919 % k.max(2);
    let mut i = 0usize;
    let mut reads = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let t = Instant::now();
        for _ in 0..BATCH {
            black_box(mem.recall(&make_key(i)));
            i = (i + stride.max(1)) % k;
        }
        reads.push(t.elapsed().as_nanos() as f64 / BATCH as f64);
    }
    (median(&mut writes), median(&mut reads))
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Marginal serialized bytes per memory entry, measured over `n` entries.
pub fn footprint_per_entry(n: usize) -> f64 {
    let empty = state_with_entries(0).serialize().len();
    let full = state_with_entries(n).serialize().len();
    (full - empty) as f64 / n as f64
}

pub fn e4() -> Vec<Check> {
    let _ = memory_latency(1000); // warm-up
    let mut checks = Vec::new();
    let mut base = (0.0, 0.0);
    for (id, k) in [("E4-1", 1_000), ("E4-2", 10_000), ("E4-3", 100_000)] {
        let (w, r) = memory_latency(k);
        if k == 1_000 {
            base = (w, r);
        }
        let flat = w <= 3.0 * base.0 && r <= 3.0 * base.1;
        let mut detail = format!(
            "{:<17}| write {:<4} ns/op | read {} ns/op",
            format!("K={k} entries"),
            w.round(),
            r.round()
        );
        if k == 100_000 {
            detail.push_str(if flat { "  (O(1) confirmed)" } else { "  (latency grew with K)" });
        }
        checks.push(Check::new(id, flat, detail));
    }

    let iso = run(
        r#"
        let parent = self
        let a = spawn turn() {
            remember("shared", "from A")
            remember("only_a", 1)
            send parent, recall("shared")
        }
        let first = receive
        let b = spawn turn() {
            remember("shared", "from B")
            send parent, [recall("shared"), recall("only_a")]
        }
        echo first
        echo receive
        echo recall("shared")
        "#,
        Arc::new(Host::hermetic(".")),
        Arc::new(MockDriver::generator(0)),
    );
    checks.push(Check::new(
        "E4-4",
        iso.outcome.is_completed() && iso.transcript == ["from A", "[\"from B\", null]", "null"],
        "Agent memory is fully isolated -- no cross-process contamination",
    ));
    let bytes = footprint_per_entry(1000);
    checks.push(Check::new(
        "E4-5",
        bytes > 0.0,
        format!("serialized footprint: {bytes:.1} bytes/entry"),
    ));
    checks
}

// ---- E5: durable execution ----

/// A suspended-looking process with `n` memory entries, the system prompt
/// in P0, a few working items and a small operand stack.
pub fn process_with_entries(n: usize) -> ProcessState {
    let program = program("let total = 40\nsuspend\necho total");
    let mut p = ProcessState::main(Pid(1), program, DEFAULT_WORKING_CAPACITY);
    p.context.system(SYSTEM_PROMPT);
    p.context.append("user: summarise the filing");
    p.stack.push(Value::Num(42.0));
    p.stack.push(Value::uncertain(Value::str("draft"), 0.8));
    p.frames[0].locals[0] = Value::Num(40.0);
    p.frames[0].ip = 2;
    for i in 0..n {
        p.memory.remember(format!("key_{i}"), Value::Str(format!("value_{i}")));
    }
    p
}

pub fn state_with_entries(n: usize) -> VmSnapshot {
    let p = process_with_entries(n);
    durable::snapshot(&p, &p.frames[0].program.hash(), None)
}

/// Serialize, parse and restore; returns (bytes, elapsed, fidelity).
pub fn roundtrip(n: usize) -> (usize, Duration, bool) {
    let p = process_with_entries(n);
    let hash = p.frames[0].program.hash();
    let registry = crate::actors::ModuleRegistry::new(Arc::clone(&p.frames[0].program));
    let t = Instant::now();
    let text = durable::snapshot(&p, &hash, None).serialize();
    let restored = VmSnapshot::deserialize(&text).and_then(|s| durable::restore(&s, &registry, &hash));
    let elapsed = t.elapsed();
    let ok = restored.is_ok_and(|q| same_state(&p, &q));
    (text.len(), elapsed, ok)
}

/// pid, ip, stack, memory and context agree.
pub fn same_state(a: &ProcessState, b: &ProcessState) -> bool {
    a.pid == b.pid
        && a.ip() == b.ip()
        && a.stack == b.stack
        && a.frames.len() == b.frames.len()
        && a.frames.iter().zip(&b.frames).all(|(x, y)| x.locals == y.locals && x.chunk == y.chunk)
        && a.memory.len() == b.memory.len()
        && a.memory.iter().all(|(k, v)| b.memory.recall(k) == *v)
        && a.context.to_flat_vec() == b.context.to_flat_vec()
        && a.context.p0() == b.context.p0()
}

/// 208,295 bytes: the reference 5,000-entry snapshot size (203.4 KB).
pub const REFERENCE_5000_BYTES: f64 = 208_295.0;

/// Program that fills 50 memory entries and suspends.
pub const FIDELITY_PROGRAM: &str = r#"
    context.system("You are a careful analyst.")
    turn fill(i, n) {
        if i < n {
            remember("entry_" + call("str", i), i * i)
            return fill(i + 1, n)
        }
    }
    fill(0, 50)
    let draft = "pending review"
    suspend
    echo draft
"#;

pub fn e5() -> Vec<Check> {
    let mut checks = Vec::new();
    for (id, n) in [("E5-1", 10usize), ("E5-2", 500), ("E5-3", 5000)] {
        let (bytes, elapsed, ok) = roundtrip(n);
        let mut passed = ok;
        if n == 5000 {
            passed &= (bytes as f64 - REFERENCE_5000_BYTES).abs() <= 0.5 * REFERENCE_5000_BYTES;
        }
        checks.push(Check::new(
            id,
            passed,
            format!(
                "{:<17}| state size={bytes} B ({:.1} KB) | round-trip={} us",
                format!("mem={n} entries"),
                bytes as f64 / 1024.0,
                elapsed.as_micros()
            ),
        ));
    }

    let rt = Runtime::new(
        program(FIDELITY_PROGRAM),
        Arc::new(Host::hermetic(".")),
        Arc::new(MockDriver::generator(0)),
        RuntimeConfig::default(),
    );
    let report = rt.run();
    let fidelity = match (&report.outcome, report.processes.get(&Pid(1))) {
        (RunOutcome::Suspended { snapshot, .. }, Some(live)) => {
            let text = snapshot.serialize();
            VmSnapshot::deserialize(&text)
                .and_then(|s| durable::restore(&s, rt.registry(), &rt.chunk_hash()))
                .is_ok_and(|back| {
                    same_state(live, &back)
                        && back.memory.len() == 50
                        && back.context.p0() == [SYSTEM_PROMPT.to_string()]
                })
        }
        _ => false,
    };
    checks.push(Check::new(
        "E5-4",
        fidelity,
        "full state fidelity after serialize -> deserialize round-trip",
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_lines_have_the_published_shape() {
        let mut c = Check::new("E3-3", true, "P1 overflow");
        c.note = Some("P1 size=100, P2 size=1".into());
        assert_eq!(c.to_string(), "E3-3 PASS: P1 overflow\n          P1 size=100, P2 size=1");
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn fast_suites_pass() {
        for c in e1().iter().chain(&e2()).chain(&e3()) {
            assert!(c.passed, "{c}");
        }
    }
}
