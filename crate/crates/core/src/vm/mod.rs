//! Stack-machine interpreter, value model and confidence algebra.

mod confidence;
mod error;
mod infer;
mod interp;
mod traps;
pub mod value;

use std::collections::VecDeque;
use std::sync::Arc;

pub use confidence::{combine_scores, combine_uncertain, evaluate_confidence, values_equal, BinOp};
pub use error::{describe, kind_of, ErrorKind, RuntimeError};
pub use infer::{bind, run_infer, InferState, DEFAULT_CONFIDENCE, DEFAULT_RETRY_BUDGET};
pub use interp::{BlockReason, Effect, Fault, Step, Vm};
pub use traps::{is_trap, kernel_trap, TrapOutcome};
pub use value::{Closure, Identity, Pid, StructInstance, Value};

use crate::compiler::Program;
use crate::contextmem::{AgentMemory, StructuredContext};

/// Deepest allowed call nesting within one process. Recursion is the only
/// way to iterate, so this is generous; frames live on the heap.
pub const MAX_CALL_DEPTH: usize = 100_000;

/// `grant identity::class("name")`. Unconditional: whether a credential
/// exists is only checked when a trap uses the handle.
pub fn grant_identity(class: &str, name: &str) -> Value {
    Value::identity(name, class)
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub program: Arc<Program>,
    pub chunk: u32,
    pub ip: u32,
    /// Operand stack height when the frame was entered.
    pub base: u32,
    pub locals: Vec<Value>,
}

/// Active `try` block: where to jump and what to unwind to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handler {
    pub frame: u32,
    pub target: u32,
    pub stack: u32,
}

/// Everything one agent process owns.
#[derive(Debug, Clone)]
pub struct ProcessState {
    pub pid: Pid,
    pub frames: Vec<Frame>,
    pub stack: Vec<Value>,
    pub handlers: Vec<Handler>,
    pub context: StructuredContext,
    pub memory: AgentMemory,
    pub mailbox: VecDeque<Value>,
    /// Set when restored from a snapshot: the pending `suspend` consumes
    /// the injected value instead of suspending again.
    pub resuming: bool,
}

/// Finds compiled modules by name (`main`, `std/net`, ...).
pub trait ModuleResolver: Send + Sync {
    fn module(&self, name: &str) -> Result<Arc<Program>, RuntimeError>;
}

/// Receives `echo` output.
pub trait EchoSink: Send + Sync {
    fn echo(&self, pid: Pid, text: &str);
}

pub(crate) fn make_frame(program: Arc<Program>, closure: &Closure, args: Vec<Value>) -> Result<Frame, RuntimeError> {
    let chunk = program.chunks.get(closure.chunk as usize).ok_or_else(|| {
        RuntimeError::new(ErrorKind::RuntimeError, format!("no chunk {} in {}", closure.chunk, program.module))
    })?;
    if args.len() != chunk.arity as usize {
        return Err(RuntimeError::new(
            ErrorKind::ArityError,
            format!("{} expects {} arguments, got {}", chunk.name, chunk.arity, args.len()),
        ));
    }
    let mut locals = vec![Value::Null; chunk.locals as usize];
    for (i, a) in args.into_iter().enumerate() {
        locals[i] = a;
    }
    for ((_, own), v) in chunk.captures.iter().zip(&closure.captured) {
        locals[*own as usize] = v.clone();
    }
    Ok(Frame {
        program,
        chunk: closure.chunk,
        ip: 0,
        base: 0,
        locals,
    })
}

impl ProcessState {
    fn empty(pid: Pid, working_capacity: usize) -> Self {
        Self {
            pid,
            frames: Vec::new(),
            stack: Vec::new(),
            handlers: Vec::new(),
            context: StructuredContext::with_capacity(working_capacity),
            memory: AgentMemory::new(),
            mailbox: VecDeque::new(),
            resuming: false,
        }
    }

    /// Process running a program's top-level chunk.
    pub fn main(pid: Pid, program: Arc<Program>, working_capacity: usize) -> Self {
        let mut p = Self::empty(pid, working_capacity);
        let locals = vec![Value::Null; program.main().locals as usize];
        p.frames.push(Frame {
            program,
            chunk: 0,
            ip: 0,
            base: 0,
            locals,
        });
        p
    }

    /// Fresh process whose only state is the closure's parameters and
    /// captured bindings.
    pub fn spawned(
        pid: Pid,
        program: Arc<Program>,
        closure: &Closure,
        args: Vec<Value>,
        working_capacity: usize,
    ) -> Result<Self, RuntimeError> {
        let mut p = Self::empty(pid, working_capacity);
        p.frames.push(make_frame(program, closure, args)?);
        Ok(p)
    }

    pub fn ip(&self) -> u32 {
        self.frames.last().map_or(0, |f| f.ip)
    }

    /// Source line of the instruction most recently started.
    pub fn line(&self) -> u32 {
        self.frames.last().map_or(0, |f| {
            let lines = &f.program.chunks[f.chunk as usize].lines;
            let i = (f.ip as usize).min(lines.len()).saturating_sub(1);
            lines.get(i).copied().unwrap_or(0)
        })
    }

    pub fn push(&mut self, v: Value) {
        self.stack.push(v);
    }

    /// Every value this process can reach, for inspection.
    pub fn reachable(&self) -> Vec<&Value> {
        let mut out: Vec<&Value> = self.stack.iter().collect();
        out.extend(self.frames.iter().flat_map(|f| f.locals.iter()));
        out.extend(self.mailbox.iter());
        out.extend(self.memory.iter().map(|(_, v)| v));
        out
    }
}
