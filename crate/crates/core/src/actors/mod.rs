//! Processes, mailboxes, links and the cooperative scheduler.
//!
//! A process runs on one worker until it blocks (receive, sleep, waiting
//! for `spawn_each` children), suspends, or ends. Inference is performed on
//! the worker that owns the process. With one worker and a deterministic
//! driver, a run is fully deterministic.

mod sched;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::sync::{Arc, Mutex};

use crate::compiler::Program;
use crate::contextmem::DEFAULT_WORKING_CAPACITY;
use crate::drivers::InferenceProvider;
use crate::durable::{FileStore, VmSnapshot};
use crate::host::Host;
use crate::stdlib::StdLib;
use crate::vm::{
    BlockReason, EchoSink, ErrorKind, ModuleResolver, Pid, ProcessState, RuntimeError, Value, DEFAULT_RETRY_BUDGET,
};

pub use sched::exit_signal;

/// Resolves the program being run plus the embedded standard library.
pub struct ModuleRegistry {
    main: Arc<Program>,
    std: StdLib,
}

impl ModuleRegistry {
    pub fn new(main: Arc<Program>) -> Self {
        Self {
            main,
            std: StdLib::new(),
        }
    }

    pub fn main(&self) -> &Arc<Program> {
        &self.main
    }

    pub fn stdlib(&self) -> &StdLib {
        &self.std
    }
}

impl ModuleResolver for ModuleRegistry {
    fn module(&self, name: &str) -> Result<Arc<Program>, RuntimeError> {
        if name == self.main.module {
            Ok(Arc::clone(&self.main))
        } else if StdLib::is_std(name) {
            self.std.load(name)
        } else {
            Err(RuntimeError::new(ErrorKind::UnknownTool, format!("no module named {name}")))
        }
    }
}

/// Collected `echo` output, optionally streamed to stdout as it happens.
#[derive(Default)]
pub struct Transcript {
    lines: Mutex<Vec<String>>,
    stream: bool,
}

impl Transcript {
    pub fn new(stream: bool) -> Self {
        Self {
            lines: Mutex::default(),
            stream,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().expect("transcript lock").clone()
    }
}

impl EchoSink for Transcript {
    fn echo(&self, _pid: Pid, text: &str) {
        let mut lines = self.lines.lock().expect("transcript lock");
        if self.stream {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{text}");
            let _ = out.flush();
        }
        lines.push(text.to_string());
    }
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    /// Scheduler threads; 1 gives deterministic scheduling.
    pub workers: usize,
    pub retry_budget: u32,
    pub working_capacity: usize,
    /// Print echo output as it is produced.
    pub stream_echo: bool,
    /// Where a suspended main process is persisted; `None` keeps the
    /// snapshot in memory only.
    pub store: Option<FileStore>,
    pub source_path: Option<String>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            retry_budget: DEFAULT_RETRY_BUDGET,
            working_capacity: DEFAULT_WORKING_CAPACITY,
            stream_echo: false,
            store: None,
            source_path: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Completed(Value),
    /// Uncaught throw in the main process.
    Faulted { value: Value, message: String, line: u32 },
    /// Main reached `suspend`. `id` is set when the snapshot was stored.
    Suspended { id: Option<String>, snapshot: Box<VmSnapshot> },
    /// Every live process is blocked and nothing can wake them.
    Deadlocked { blocked: Vec<(Pid, BlockReason)> },
    /// Persisting the snapshot failed.
    StoreFailed(String),
}

impl RunOutcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed(_))
    }
}

pub struct RunReport {
    pub outcome: RunOutcome,
    pub transcript: Vec<String>,
    /// Final state of every process, for inspection.
    pub processes: BTreeMap<Pid, ProcessState>,
}

impl RunReport {
    /// Every value reachable from any process at the end of the run.
    pub fn reachable_values(&self) -> Vec<&Value> {
        self.processes.values().flat_map(ProcessState::reachable).collect()
    }

    pub fn contexts(&self) -> Vec<String> {
        self.processes.values().flat_map(|p| p.context.to_flat_vec()).collect()
    }
}

pub struct Runtime {
    registry: Arc<ModuleRegistry>,
    host: Arc<Host>,
    provider: Arc<dyn InferenceProvider>,
    config: RuntimeConfig,
}

impl Runtime {
    pub fn new(program: Arc<Program>, host: Arc<Host>, provider: Arc<dyn InferenceProvider>, config: RuntimeConfig) -> Self {
        Self {
            registry: Arc::new(ModuleRegistry::new(program)),
            host,
            provider,
            config,
        }
    }

    pub fn registry(&self) -> &ModuleRegistry {
        &self.registry
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.config
    }

    /// Hash of the main program, stamped on snapshots.
    pub fn chunk_hash(&self) -> String {
        self.registry.main.hash()
    }

    /// Run the main program from the start.
    pub fn run(&self) -> RunReport {
        let main = ProcessState::main(Pid(1), Arc::clone(&self.registry.main), self.config.working_capacity);
        self.run_process(main)
    }

    /// Run with `main` as the root process, e.g. one restored from a snapshot.
    pub fn run_process(&self, main: ProcessState) -> RunReport {
        sched::run(self, main)
    }
}
