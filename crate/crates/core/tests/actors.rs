mod common;

use common::{output, run, run_with};
use proptest::prelude::*;
use std::sync::Arc;
use turn_core::actors::{RunOutcome, RuntimeConfig};
use turn_core::drivers::MockDriver;
use turn_core::vm::{BlockReason, Pid};

#[test]
fn self_send_roundtrip() {
    assert_eq!(output("send self, 7\necho receive"), ["7"]);
}

#[test]
fn per_sender_fifo_over_a_thousand_messages() {
    let src = r#"
        turn produce(i, n, to) {
            if i < n {
                send to, i
                return produce(i + 1, n, to)
            }
        }
        turn collect(i, n) {
            if i < n {
                let m = receive
                if m != i {
                    throw "out of order at " + call("str", i)
                }
                return collect(i + 1, n)
            }
            return i
        }
        let parent = self
        let child = spawn turn() {
            produce(0, receive, parent)
        }
        send child, 1000
        echo collect(0, 1000)
    "#;
    assert_eq!(output(src), ["1000"]);
}

#[test]
fn linked_crash_delivers_exactly_one_exit_signal() {
    let src = r#"
        let child = spawn_link turn() {
            throw "boom"
        }
        let msg = receive
        echo msg.type
        echo msg.from == child
        echo msg.reason
        send self, "sentinel"
        echo receive
    "#;
    let out = output(src);
    assert_eq!(out[0], "exit");
    assert_eq!(out[1], "true");
    assert!(out[2].contains("boom"), "{out:?}");
    // nothing else was queued ahead of the sentinel
    assert_eq!(out[3], "sentinel");
}

#[test]
fn normal_linked_exit_reports_normal() {
    let out = output("let c = spawn_link turn() { return 1 }\necho receive.reason");
    assert_eq!(out, ["normal"]);
}

#[test]
fn unlinked_child_sends_no_signal() {
    let report = run("let c = spawn turn() { return 1 }\nlet m = receive");
    match report.outcome {
        RunOutcome::Deadlocked { blocked } => {
            assert_eq!(blocked, vec![(Pid(1), BlockReason::AwaitingMessage)]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn linked_crash_wakes_blocked_parent() {
    let src = r#"
        let c = spawn_link turn() {
            let x = call("std/time.sleep", 5)
            throw "late"
        }
        echo receive.type
    "#;
    assert_eq!(output(src), ["exit"]);
}

#[test]
fn spawned_process_starts_with_empty_state() {
    let src = r#"
        context.system("S")
        context.append("parent item")
        remember("k", 1)
        let parent = self
        let c = spawn turn() {
            context.append("child item")
            send parent, recall("k")
        }
        echo receive
    "#;
    let report = run(src);
    assert!(report.outcome.is_completed());
    assert_eq!(report.transcript, ["null"]);
    let parent = &report.processes[&Pid(1)];
    assert_eq!(parent.context.to_flat_vec(), ["S", "parent item"]);
    let child = &report.processes[&Pid(2)];
    assert_eq!(child.context.to_flat_vec(), ["child item"]);
    assert!(child.memory.is_empty());
}

#[test]
fn spawn_each_doubles_in_order() {
    assert_eq!(output("echo spawn_each([1, 2, 3], turn(x) { return x * 2 })"), ["[2, 4, 6]"]);
    assert_eq!(output("echo spawn_each([], turn(x) { return x })"), ["[]"]);
}

#[test]
fn spawn_each_children_do_not_touch_parent_memory() {
    let src = r#"
        let r = spawn_each([1, 2], turn(x) { remember("k", x); return recall("k") })
        echo r
        echo recall("k")
    "#;
    assert_eq!(output(src), ["[1, 2]", "null"]);
}

#[test]
fn spawn_each_faults_with_first_index_error() {
    let src = r#"
        try {
            let r = spawn_each([1, 2, 3], turn(x) {
                if x > 1 {
                    throw "bad " + call("str", x)
                }
                return x
            })
            echo "unreachable"
        } catch e {
            echo e
        }
    "#;
    assert_eq!(output(src), ["bad 2"]);
}

#[test]
fn receive_with_nobody_to_send_deadlocks() {
    let report = run("echo \"before\"\nlet x = receive");
    assert_eq!(report.transcript, ["before"]);
    assert!(matches!(report.outcome, RunOutcome::Deadlocked { .. }));
}

#[test]
fn send_to_dead_process_is_a_no_op() {
    let src = r#"
        let c = spawn_link turn() { return 1 }
        let signal = receive
        send c, "late"
        echo "ok"
    "#;
    assert_eq!(output(src), ["ok"]);
}

#[test]
fn identity_cannot_cross_processes() {
    let src = r#"
        let id = grant identity::oauth("stripe")
        try {
            send self, id
        } catch e {
            echo e.type
        }
        try {
            let c = spawn turn() { echo id }
        } catch e {
            echo e.type
        }
    "#;
    assert_eq!(output(src), ["CapabilityError", "CapabilityError"]);
}

#[test]
fn suspend_outside_main_is_an_error() {
    let src = r#"
        let r = spawn_each([1], turn(x) {
            try {
                suspend
            } catch e {
                return e.type
            }
        })
        echo r
    "#;
    assert_eq!(output(src), ["[\"RuntimeError\"]"]);
}

#[test]
fn many_workers_give_the_same_results() {
    let src = r#"
        turn fib(n) {
            if n < 2 { return n }
            return fib(n - 1) + fib(n - 2)
        }
        echo spawn_each([10, 11, 12, 13, 14, 15, 16, 17], turn(n) { return fib(n) })
    "#;
    let config = RuntimeConfig {
        workers: 4,
        ..RuntimeConfig::default()
    };
    let report = run_with(src, Arc::new(MockDriver::generator(1)), config);
    assert!(report.outcome.is_completed());
    assert_eq!(report.transcript, ["[55, 89, 144, 233, 377, 610, 987, 1597]"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spawn_each_matches_sequential_map(xs in proptest::collection::vec(-1000i64..1000, 0..12)) {
        let list = xs.iter().map(i64::to_string).collect::<Vec<_>>().join(", ");
        let expected = xs.iter().map(|x| (x * 3 + 1).to_string()).collect::<Vec<_>>().join(", ");
        let out = output(&format!("echo spawn_each([{list}], turn(x) {{ return x * 3 + 1 }})"));
        prop_assert_eq!(out, vec![format!("[{expected}]")]);
    }
}
