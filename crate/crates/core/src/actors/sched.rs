//! The run queue and worker loop.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use super::{RunOutcome, RunReport, Runtime, Transcript};
use crate::durable;
use crate::vm::{
    describe, run_infer, BlockReason, Closure, Effect, ErrorKind, Fault, ModuleResolver, Pid, ProcessState,
    RuntimeError, Step, Value, Vm,
};

/// `{"type": "exit", "from": pid, "reason": reason}`, delivered to link
/// partners when a process ends.
pub fn exit_signal(from: Pid, reason: &str) -> Value {
    let mut m = BTreeMap::new();
    m.insert("type".to_string(), Value::str("exit"));
    m.insert("from".to_string(), Value::Pid(from));
    m.insert("reason".to_string(), Value::str(reason));
    Value::Map(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Runnable,
    Running,
    Blocked(BlockReason),
    Exited,
}

/// What a blocked process gets when it is woken.
#[derive(Debug)]
enum Resume {
    Push(Value),
    Throw(Value),
}

struct Slot {
    /// `None` while a worker owns the process.
    state: Option<ProcessState>,
    status: Status,
    links: BTreeSet<u64>,
    /// Messages that arrived while the process was running.
    inbox: VecDeque<Value>,
    group: Option<(u64, usize)>,
    resume: Option<Resume>,
}

impl Slot {
    fn new(state: ProcessState) -> Self {
        Self {
            state: Some(state),
            status: Status::Runnable,
            links: BTreeSet::new(),
            inbox: VecDeque::new(),
            group: None,
            resume: None,
        }
    }
}

/// A pending `spawn_each`.
struct Group {
    parent: u64,
    results: Vec<Option<Result<Value, Value>>>,
    remaining: usize,
}

#[derive(Default)]
struct Sched {
    slots: BTreeMap<u64, Slot>,
    queue: VecDeque<u64>,
    /// (deadline, sequence, pid)
    timers: BTreeSet<(Instant, u64, u64)>,
    timer_seq: u64,
    next_pid: u64,
    running: usize,
    groups: HashMap<u64, Group>,
    next_group: u64,
    main: u64,
    outcome: Option<RunOutcome>,
    finished: BTreeMap<u64, ProcessState>,
}

impl Sched {
    fn insert(&mut self, state: ProcessState) -> u64 {
        let pid = state.pid.0;
        self.slots.insert(pid, Slot::new(state));
        self.queue.push_back(pid);
        pid
    }

    fn fresh_pid(&mut self) -> Pid {
        let pid = self.next_pid;
        self.next_pid += 1;
        Pid(pid)
    }

    fn link(&mut self, a: u64, b: u64) {
        if let Some(s) = self.slots.get_mut(&a) {
            s.links.insert(b);
        }
        if let Some(s) = self.slots.get_mut(&b) {
            s.links.insert(a);
        }
    }

    fn wake(&mut self, pid: u64) {
        if let Some(slot) = self.slots.get_mut(&pid) {
            if matches!(slot.status, Status::Blocked(_)) {
                slot.status = Status::Runnable;
                self.queue.push_back(pid);
            }
        }
    }

    /// Enqueue a copy of `value` for `to`. Dead or unknown targets drop it.
    fn deliver(&mut self, to: u64, value: Value) {
        let Some(slot) = self.slots.get_mut(&to) else { return };
        match (&mut slot.state, slot.status) {
            (_, Status::Exited) => {}
            (Some(state), status) => {
                state.mailbox.push_back(value);
                if status == Status::Blocked(BlockReason::AwaitingMessage) {
                    self.wake(to);
                }
            }
            (None, _) => slot.inbox.push_back(value),
        }
    }

    fn fire_timers(&mut self, now: Instant) {
        while let Some(&(deadline, seq, pid)) = self.timers.first() {
            if deadline > now {
                break;
            }
            self.timers.remove(&(deadline, seq, pid));
            if let Some(slot) = self.slots.get_mut(&pid) {
                slot.resume = Some(Resume::Push(Value::Null));
            }
            self.wake(pid);
        }
    }

    /// Remove a process, notifying link partners and any waiting group.
    fn exit(&mut self, pid: u64, state: ProcessState, result: Result<Value, Fault>) {
        let Some(slot) = self.slots.get_mut(&pid) else { return };
        slot.status = Status::Exited;
        let links = std::mem::take(&mut slot.links);
        let group = slot.group.take();
        let reason = match &result {
            Ok(_) => "normal".to_string(),
            Err(f) => describe(&f.value),
        };
        for partner in links {
            if let Some(p) = self.slots.get_mut(&partner) {
                p.links.remove(&pid);
            }
            self.deliver(partner, exit_signal(Pid(pid), &reason));
        }
        if let Err(f) = &result {
            if pid != self.main {
                log::warn!("process <pid {pid}> faulted at line {}: {reason}", f.line);
            }
        }
        if let Some((gid, index)) = group {
            self.settle(gid, index, result.clone().map_err(|f| f.value));
        }
        if pid == self.main {
            self.outcome = Some(match result {
                Ok(v) => RunOutcome::Completed(v),
                Err(f) => RunOutcome::Faulted {
                    message: describe(&f.value),
                    value: f.value,
                    line: f.line,
                },
            });
        }
        self.finished.insert(pid, state);
    }

    fn settle(&mut self, gid: u64, index: usize, result: Result<Value, Value>) {
        let Some(group) = self.groups.get_mut(&gid) else { return };
        group.results[index] = Some(result);
        group.remaining -= 1;
        if group.remaining > 0 {
            return;
        }
        let group = self.groups.remove(&gid).expect("group");
        let mut values = Vec::with_capacity(group.results.len());
        let mut resume = None;
        for r in group.results {
            match r.expect("settled") {
                Ok(v) => values.push(v),
                Err(e) => {
                    resume = Some(Resume::Throw(e));
                    break;
                }
            }
        }
        if let Some(slot) = self.slots.get_mut(&group.parent) {
            slot.resume = Some(resume.unwrap_or(Resume::Push(Value::List(values))));
        }
        self.wake(group.parent);
    }

    fn blocked(&self) -> Vec<(Pid, BlockReason)> {
        self.slots
            .iter()
            .filter_map(|(pid, s)| match s.status {
                Status::Blocked(r) => Some((Pid(*pid), r)),
                _ => None,
            })
            .collect()
    }
}

/// How a slice of execution ended.
enum SliceEnd {
    Blocked(BlockReason),
    Sleep(u64),
    Exit(Result<Value, Fault>),
    Suspend,
}

struct Shared<'r> {
    rt: &'r Runtime,
    sched: Mutex<Sched>,
    cv: Condvar,
    transcript: Transcript,
}

impl Shared<'_> {
    fn lock(&self) -> MutexGuard<'_, Sched> {
        self.sched.lock().expect("scheduler lock")
    }

    fn next(&self) -> Option<(u64, ProcessState, Option<Resume>)> {
        let mut s = self.lock();
        loop {
            if s.outcome.is_some() {
                return None;
            }
            let now = Instant::now();
            s.fire_timers(now);
            while let Some(pid) = s.queue.pop_front() {
                let Some(slot) = s.slots.get_mut(&pid) else { continue };
                if slot.status != Status::Runnable {
                    continue;
                }
                let state = slot.state.take().expect("runnable process has state");
                slot.status = Status::Running;
                let resume = slot.resume.take();
                s.running += 1;
                return Some((pid, state, resume));
            }
            let deadline = s.timers.first().map(|t| t.0);
            if s.running == 0 && deadline.is_none() {
                let blocked = s.blocked();
                s.outcome = Some(RunOutcome::Deadlocked { blocked });
                self.cv.notify_all();
                return None;
            }
            s = match deadline {
                Some(d) => self.cv.wait_timeout(s, d.saturating_duration_since(now)).expect("scheduler lock").0,
                None => self.cv.wait(s).expect("scheduler lock"),
            };
        }
    }

    fn spawn(&self, parent: u64, closure: &Closure, args: Vec<Value>, linked: bool) -> Result<Pid, RuntimeError> {
        let program = self.rt.registry.module(&closure.module)?;
        let mut s = self.lock();
        let pid = s.fresh_pid();
        let child = ProcessState::spawned(pid, program, closure, args, self.rt.config.working_capacity)?;
        s.insert(child);
        if linked {
            s.link(parent, pid.0);
        }
        self.cv.notify_one();
        Ok(pid)
    }

    fn spawn_each(&self, parent: u64, closure: &Closure, items: Vec<Value>) -> Result<(), RuntimeError> {
        let program = self.rt.registry.module(&closure.module)?;
        let mut s = self.lock();
        let gid = s.next_group;
        s.next_group += 1;
        let mut children = Vec::with_capacity(items.len());
        for item in items {
            let pid = s.fresh_pid();
            children.push(ProcessState::spawned(
                pid,
                Arc::clone(&program),
                closure,
                vec![item],
                self.rt.config.working_capacity,
            )?);
        }
        s.groups.insert(
            gid,
            Group {
                parent,
                results: vec![None; children.len()],
                remaining: children.len(),
            },
        );
        for (i, child) in children.into_iter().enumerate() {
            let pid = s.insert(child);
            s.slots.get_mut(&pid).expect("slot").group = Some((gid, i));
        }
        self.cv.notify_all();
        Ok(())
    }

    /// Run `p` until it can make no further progress on this worker.
    fn slice(&self, vm: &Vm<'_>, p: &mut ProcessState, resume: Option<Resume>) -> SliceEnd {
        let pid = p.pid.0;
        match resume {
            Some(Resume::Push(v)) => p.push(v),
            Some(Resume::Throw(v)) => {
                if let Err(f) = vm.throw(p, v) {
                    return SliceEnd::Exit(Err(f));
                }
            }
            None => {}
        }
        loop {
            let failed: Result<(), RuntimeError> = match vm.run(p) {
                Step::Continue => Ok(()),
                Step::Done(v) => return SliceEnd::Exit(Ok(v)),
                Step::Fault(f) => return SliceEnd::Exit(Err(f)),
                Step::Blocked(r) => return SliceEnd::Blocked(r),
                Step::Effect(effect) => match effect {
                    Effect::Infer { mut state, program } => {
                        let context = p.context.to_flat_vec();
                        run_infer(&mut state, context, &program.structs, &*self.rt.provider).map(|v| p.push(v))
                    }
                    Effect::Spawn { closure, linked } => {
                        self.spawn(pid, &closure, Vec::new(), linked).map(|child| p.push(Value::Pid(child)))
                    }
                    Effect::SpawnEach { closure, items } => {
                        if items.is_empty() {
                            p.push(Value::List(Vec::new()));
                            Ok(())
                        } else {
                            match self.spawn_each(pid, &closure, items) {
                                Ok(()) => return SliceEnd::Blocked(BlockReason::AwaitingChildren),
                                Err(e) => Err(e),
                            }
                        }
                    }
                    Effect::Send { to, value } => {
                        if to.0 == pid {
                            p.mailbox.push_back(value);
                        } else {
                            let mut s = self.lock();
                            s.deliver(to.0, value);
                            self.cv.notify_one();
                        }
                        Ok(())
                    }
                    Effect::Sleep(ms) => return SliceEnd::Sleep(ms),
                    Effect::Suspend if pid == self.lock().main => return SliceEnd::Suspend,
                    Effect::Suspend => Err(RuntimeError::new(
                        ErrorKind::RuntimeError,
                        "suspend is only supported in the main process",
                    )),
                },
            };
            if let Err(e) = failed {
                if let Err(f) = vm.throw(p, e.to_value()) {
                    return SliceEnd::Exit(Err(f));
                }
            }
        }
    }

    fn finish(&self, pid: u64, mut state: ProcessState, end: SliceEnd) {
        let snapshot = matches!(end, SliceEnd::Suspend).then(|| {
            durable::snapshot(&state, &self.rt.chunk_hash(), self.rt.config.source_path.as_deref())
        });
        let mut s = self.lock();
        s.running -= 1;
        let slot = s.slots.get_mut(&pid).expect("running process has a slot");
        state.mailbox.extend(slot.inbox.drain(..));
        match end {
            SliceEnd::Exit(result) => s.exit(pid, state, result),
            SliceEnd::Blocked(reason) => {
                let ready = match reason {
                    BlockReason::AwaitingMessage => !state.mailbox.is_empty(),
                    _ => slot.resume.is_some(),
                };
                slot.state = Some(state);
                slot.status = Status::Blocked(reason);
                if ready {
                    s.wake(pid);
                }
            }
            SliceEnd::Sleep(ms) => {
                slot.state = Some(state);
                slot.status = Status::Blocked(BlockReason::Sleeping);
                let seq = s.timer_seq;
                s.timer_seq += 1;
                s.timers.insert((Instant::now() + Duration::from_millis(ms), seq, pid));
            }
            SliceEnd::Suspend => {
                slot.state = Some(state);
                slot.status = Status::Blocked(BlockReason::Suspended);
                let snapshot = Box::new(snapshot.expect("snapshot taken"));
                s.outcome = Some(match &self.rt.config.store {
                    Some(store) => match store.persist(&snapshot) {
                        Ok(id) => RunOutcome::Suspended { id: Some(id), snapshot },
                        Err(e) => RunOutcome::StoreFailed(e.to_string()),
                    },
                    None => RunOutcome::Suspended { id: None, snapshot },
                });
            }
        }
        self.cv.notify_all();
    }

    fn worker(&self) {
        let rt = self.rt;
        let mut vm = Vm::new(&*rt.registry, &rt.host, &self.transcript);
        vm.retry_budget = rt.config.retry_budget;
        while let Some((pid, mut state, resume)) = self.next() {
            let end = self.slice(&vm, &mut state, resume);
            self.finish(pid, state, end);
        }
    }
}

pub(super) fn run(rt: &Runtime, main: ProcessState) -> RunReport {
    let mut sched = Sched {
        main: main.pid.0,
        next_pid: main.pid.0 + 1,
        ..Sched::default()
    };
    sched.insert(main);
    let shared = Shared {
        rt,
        sched: Mutex::new(sched),
        cv: Condvar::new(),
        transcript: Transcript::new(rt.config.stream_echo),
    };
    let workers = rt.config.workers.max(1);
    if workers == 1 {
        shared.worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| shared.worker());
            }
        });
    }
    let Shared { sched, transcript, .. } = shared;
    let mut sched = sched.into_inner().expect("scheduler lock");
    let mut processes: BTreeMap<Pid, ProcessState> =
        std::mem::take(&mut sched.finished).into_iter().map(|(k, v)| (Pid(k), v)).collect();
    for (pid, slot) in std::mem::take(&mut sched.slots) {
        if let Some(state) = slot.state {
            processes.insert(Pid(pid), state);
        }
    }
    RunReport {
        outcome: sched.outcome.unwrap_or(RunOutcome::Deadlocked { blocked: Vec::new() }),
        transcript: transcript.lines(),
        processes,
    }
}
