//! Instruction execution.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::confidence::{combine_uncertain, evaluate_confidence, BinOp};
use super::error::{ErrorKind, RuntimeError};
use super::infer::{InferState, DEFAULT_RETRY_BUDGET};
use super::traps::{is_trap, kernel_trap, TrapOutcome};
use super::value::{Closure, StructInstance};
use super::{grant_identity, make_frame, EchoSink, Handler, ModuleResolver, ProcessState, Value, MAX_CALL_DEPTH};
use crate::compiler::{Constant, Instruction as I, Program};
use crate::host::Host;

/// Requests that need the scheduler or host. The instruction pointer has
/// already moved past the instruction, except for `Suspend`.
#[derive(Debug, Clone)]
pub enum Effect {
    Infer { state: InferState, program: Arc<Program> },
    Spawn { closure: Closure, linked: bool },
    SpawnEach { closure: Closure, items: Vec<Value> },
    Send { to: super::Pid, value: Value },
    Sleep(u64),
    Suspend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockReason {
    AwaitingMessage,
    AwaitingInference,
    AwaitingChildren,
    Sleeping,
    Suspended,
}

impl BlockReason {
    pub fn name(self) -> &'static str {
        match self {
            BlockReason::AwaitingMessage => "awaiting-message",
            BlockReason::AwaitingInference => "awaiting-inference",
            BlockReason::AwaitingChildren => "awaiting-children",
            BlockReason::Sleeping => "sleeping",
            BlockReason::Suspended => "suspended",
        }
    }
}

/// An uncaught throw.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub value: Value,
    pub line: u32,
}

#[derive(Debug, Clone)]
pub enum Step {
    Continue,
    Effect(Effect),
    Blocked(BlockReason),
    Done(Value),
    Fault(Fault),
}

pub struct Vm<'a> {
    pub resolver: &'a dyn ModuleResolver,
    pub host: &'a Host,
    pub echo: &'a dyn EchoSink,
    pub retry_budget: u32,
}

fn constant(c: &Constant) -> Value {
    match c {
        Constant::Null => Value::Null,
        Constant::Num(n) => Value::Num(*n),
        Constant::Str(s) => Value::Str(s.clone()),
        Constant::Bool(b) => Value::Bool(*b),
    }
}

fn text(what: &str, v: &Value) -> Result<String, RuntimeError> {
    match v.unwrapped() {
        Value::Str(s) => Ok(s.clone()),
        other => Err(RuntimeError::type_error(format!("{what} must be Str, got {}", other.type_name()))),
    }
}

fn index_of(n: f64, len: usize) -> Option<usize> {
    (n.fract() == 0.0 && n >= 0.0 && (n as usize) < len).then_some(n as usize)
}

fn builtin(name: &str, args: &[Value]) -> Option<Result<Value, RuntimeError>> {
    let want = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(RuntimeError::new(
                ErrorKind::ArityError,
                format!("{name} expects {n} arguments, got {}", args.len()),
            ))
        }
    };
    let r = match name {
        "len" => want(1).and_then(|_| match args[0].unwrapped() {
            Value::List(v) => Ok(Value::Num(v.len() as f64)),
            Value::Str(s) => Ok(Value::Num(s.chars().count() as f64)),
            Value::Map(m) => Ok(Value::Num(m.len() as f64)),
            Value::Vec(v) => Ok(Value::Num(v.len() as f64)),
            other => Err(RuntimeError::type_error(format!("len of {}", other.type_name()))),
        }),
        "str" => want(1).and_then(|_| {
            if args[0].contains_identity() {
                Err(RuntimeError::capability("Identity cannot be coerced to Str"))
            } else {
                Ok(Value::Str(args[0].render()))
            }
        }),
        "num" => want(1).and_then(|_| match args[0].unwrapped() {
            Value::Num(n) => Ok(Value::Num(*n)),
            Value::Str(s) => s
                .trim()
                .parse::<f64>()
                .map(Value::Num)
                .map_err(|_| RuntimeError::type_error(format!("cannot convert {s:?} to Num"))),
            other => Err(RuntimeError::type_error(format!("cannot convert {} to Num", other.type_name()))),
        }),
        "type_of" => want(1).map(|_| Value::str(args[0].type_name())),
        "identity_class" => want(1).and_then(|_| match &args[0] {
            Value::Identity(id) => Ok(Value::str(&id.class)),
            other => Err(RuntimeError::capability(format!(
                "expected an Identity handle, got {}",
                other.type_name()
            ))),
        }),
        "push" => want(2).and_then(|_| match args[0].unwrapped() {
            Value::List(items) => {
                let mut items = items.clone();
                items.push(args[1].clone());
                Ok(Value::List(items))
            }
            other => Err(RuntimeError::type_error(format!("push onto {}", other.type_name()))),
        }),
        "keys" => want(1).and_then(|_| match args[0].unwrapped() {
            Value::Map(m) => Ok(Value::List(m.keys().map(Value::str).collect())),
            Value::Struct(s) => Ok(Value::List(s.fields.iter().map(|(k, _)| Value::str(k)).collect())),
            other => Err(RuntimeError::type_error(format!("keys of {}", other.type_name()))),
        }),
        "vec" => want(1).and_then(|_| match args[0].unwrapped() {
            Value::List(items) => items
                .iter()
                .map(|v| match v.unwrapped() {
                    Value::Num(n) => Ok(*n),
                    other => Err(RuntimeError::type_error(format!("vec element {}", other.type_name()))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Vec),
            other => Err(RuntimeError::type_error(format!("vec of {}", other.type_name()))),
        }),
        _ => return None,
    };
    Some(r)
}

impl Vm<'_> {
    pub fn new<'a>(resolver: &'a dyn ModuleResolver, host: &'a Host, echo: &'a dyn EchoSink) -> Vm<'a> {
        Vm {
            resolver,
            host,
            echo,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }

    /// Execute until the process needs the scheduler, blocks, or ends.
    pub fn run(&self, p: &mut ProcessState) -> Step {
        loop {
            match self.step(p) {
                Step::Continue => {}
                other => return other,
            }
        }
    }

    /// Deliver a thrown value to the innermost handler. Returns the fault
    /// when nothing catches it.
    pub fn throw(&self, p: &mut ProcessState, value: Value) -> Result<(), Fault> {
        let line = p.line();
        match p.handlers.pop() {
            Some(h) => {
                p.frames.truncate(h.frame as usize + 1);
                p.stack.truncate(h.stack as usize);
                if let Some(f) = p.frames.last_mut() {
                    f.ip = h.target;
                }
                p.stack.push(value);
                Ok(())
            }
            None => Err(Fault { value, line }),
        }
    }

    fn enter(&self, p: &mut ProcessState, current: &Arc<Program>, closure: &Closure, args: Vec<Value>) -> Result<(), RuntimeError> {
        if p.frames.len() >= MAX_CALL_DEPTH {
            return Err(RuntimeError::new(ErrorKind::RuntimeError, "call depth exceeded"));
        }
        let program = if closure.module == current.module {
            Arc::clone(current)
        } else {
            self.resolver.module(&closure.module)?
        };
        let mut frame = make_frame(program, closure, args)?;
        frame.base = p.stack.len() as u32;
        p.frames.push(frame);
        Ok(())
    }

    fn closure(program: &Program, frame_locals: &[Value], chunk: u32) -> Closure {
        let captured = program.chunks[chunk as usize]
            .captures
            .iter()
            .map(|(outer, _)| frame_locals[*outer as usize].clone())
            .collect();
        Closure {
            module: program.module.clone(),
            chunk,
            captured,
        }
    }

    pub fn step(&self, p: &mut ProcessState) -> Step {
        match self.exec(p) {
            Ok(step) => step,
            Err(e) => match self.throw(p, e.to_value()) {
                Ok(()) => Step::Continue,
                Err(fault) => Step::Fault(fault),
            },
        }
    }

    fn exec(&self, p: &mut ProcessState) -> Result<Step, RuntimeError> {
        let Some(frame) = p.frames.last_mut() else {
            return Ok(Step::Done(Value::Null));
        };
        let program = Arc::clone(&frame.program);
        let chunk = &program.chunks[frame.chunk as usize];
        let Some(&ins) = chunk.code.get(frame.ip as usize) else {
            return Err(RuntimeError::new(ErrorKind::RuntimeError, "instruction pointer out of range"));
        };
        frame.ip += 1;

        let pop = |p: &mut ProcessState| p.stack.pop().unwrap_or(Value::Null);
        let binary = |p: &mut ProcessState, op: BinOp| -> Result<Step, RuntimeError> {
            let rhs = pop(p);
            let lhs = pop(p);
            p.stack.push(combine_uncertain(op, &lhs, &rhs)?);
            Ok(Step::Continue)
        };

        match ins {
            I::Const(i) => p.stack.push(constant(&program.constants[i as usize])),
            I::LoadLocal(s) => {
                let v = p.frames.last().expect("frame").locals[s as usize].clone();
                p.stack.push(v);
            }
            I::StoreLocal(s) => {
                let v = pop(p);
                p.frames.last_mut().expect("frame").locals[s as usize] = v;
            }
            I::Pop => {
                pop(p);
            }
            I::MakeList(n) => {
                let items = p.stack.split_off(p.stack.len() - n as usize);
                p.stack.push(Value::List(items));
            }
            I::MakeMap(n) => {
                let flat = p.stack.split_off(p.stack.len() - 2 * n as usize);
                let mut m = BTreeMap::new();
                let mut it = flat.into_iter();
                while let (Some(k), Some(v)) = (it.next(), it.next()) {
                    m.insert(text("map key", &k)?, v);
                }
                p.stack.push(Value::Map(m));
            }
            I::MakeStruct(s, n) => {
                let flat = p.stack.split_off(p.stack.len() - 2 * n as usize);
                let mut given = BTreeMap::new();
                let mut it = flat.into_iter();
                while let (Some(k), Some(v)) = (it.next(), it.next()) {
                    given.insert(text("field name", &k)?, v);
                }
                let def = &program.structs[s as usize].def;
                let fields = def
                    .fields
                    .iter()
                    .map(|(f, _)| (f.clone(), given.remove(f).unwrap_or(Value::Null)))
                    .collect();
                p.stack.push(Value::Struct(StructInstance {
                    type_name: def.name.clone(),
                    fields,
                }));
            }
            I::GetField(n) => {
                let field = &program.names[n as usize];
                let target = pop(p);
                let v = match target.unwrapped() {
                    Value::Struct(s) => s.get(field).cloned().ok_or_else(|| {
                        RuntimeError::new(ErrorKind::UnknownField, format!("{} has no field {field}", s.type_name))
                    })?,
                    Value::Map(m) => m.get(field).cloned().unwrap_or(Value::Null),
                    other => {
                        return Err(RuntimeError::new(
                            ErrorKind::UnknownField,
                            format!("cannot read field {field} of {}", other.type_name()),
                        ))
                    }
                };
                p.stack.push(v);
            }
            I::Index => {
                let idx = pop(p);
                let target = pop(p);
                let v = match (target.unwrapped(), idx.unwrapped()) {
                    (Value::List(items), Value::Num(n)) => index_of(*n, items.len())
                        .map(|i| items[i].clone())
                        .ok_or_else(|| RuntimeError::new(ErrorKind::IndexError, format!("index {n} out of range")))?,
                    (Value::Vec(items), Value::Num(n)) => index_of(*n, items.len())
                        .map(|i| Value::Num(items[i]))
                        .ok_or_else(|| RuntimeError::new(ErrorKind::IndexError, format!("index {n} out of range")))?,
                    (Value::Str(s), Value::Num(n)) => index_of(*n, s.chars().count())
                        .and_then(|i| s.chars().nth(i))
                        .map(|c| Value::Str(c.to_string()))
                        .ok_or_else(|| RuntimeError::new(ErrorKind::IndexError, format!("index {n} out of range")))?,
                    (Value::Map(m), Value::Str(k)) => m.get(k).cloned().unwrap_or(Value::Null),
                    (Value::Struct(s), Value::Str(k)) => s.get(k).cloned().unwrap_or(Value::Null),
                    (t, i) => {
                        return Err(RuntimeError::type_error(format!(
                            "cannot index {} with {}",
                            t.type_name(),
                            i.type_name()
                        )))
                    }
                };
                p.stack.push(v);
            }
            I::Add => return binary(p, BinOp::Add),
            I::Sub => return binary(p, BinOp::Sub),
            I::Mul => return binary(p, BinOp::Mul),
            I::Div => return binary(p, BinOp::Div),
            I::CmpLt => return binary(p, BinOp::Lt),
            I::CmpLe => return binary(p, BinOp::Le),
            I::CmpGt => return binary(p, BinOp::Gt),
            I::CmpGe => return binary(p, BinOp::Ge),
            I::CmpEq => return binary(p, BinOp::Eq),
            I::And => return binary(p, BinOp::And),
            I::Or => return binary(p, BinOp::Or),
            I::Neg | I::Not => {
                let v = pop(p);
                let inner = match (ins, v.unwrapped()) {
                    (I::Neg, Value::Num(n)) => Value::Num(-n),
                    (I::Not, Value::Bool(b)) => Value::Bool(!b),
                    (_, other) => {
                        return Err(RuntimeError::type_error(format!(
                            "cannot apply {} to {}",
                            if ins == I::Neg { "-" } else { "not" },
                            other.type_name()
                        )))
                    }
                };
                p.stack.push(Value::uncertain(inner, v.score()));
            }
            I::Jump(t) => p.frames.last_mut().expect("frame").ip = t,
            I::JumpIfFalse(t) => {
                let c = pop(p);
                match c.unwrapped() {
                    Value::Bool(true) => {}
                    Value::Bool(false) => p.frames.last_mut().expect("frame").ip = t,
                    other => {
                        return Err(RuntimeError::type_error(format!(
                            "condition must be Bool, got {}",
                            other.type_name()
                        )))
                    }
                }
            }
            I::CallTool(n, argc) => {
                let name = &program.names[n as usize];
                let args = p.stack.split_off(p.stack.len() - argc as usize);
                if let Some(path) = name.strip_prefix("std/") {
                    let (module, func) = path.rsplit_once('.').ok_or_else(|| {
                        RuntimeError::new(ErrorKind::UnknownTool, format!("malformed library call {name}"))
                    })?;
                    let module = format!("std/{module}");
                    let lib = self.resolver.module(&module)?;
                    let chunk = lib.export(func).ok_or_else(|| {
                        RuntimeError::new(ErrorKind::UnknownTool, format!("{module} has no function {func}"))
                    })?;
                    let closure = Closure {
                        module,
                        chunk,
                        captured: Vec::new(),
                    };
                    self.enter(p, &lib, &closure, args)?;
                } else if is_trap(name) {
                    match kernel_trap(name, &args, self.host)? {
                        TrapOutcome::Value(v) => p.stack.push(v),
                        TrapOutcome::Sleep(ms) => return Ok(Step::Effect(Effect::Sleep(ms))),
                    }
                } else {
                    match builtin(name, &args) {
                        Some(r) => p.stack.push(r?),
                        None => return Err(RuntimeError::new(ErrorKind::UnknownTool, format!("unknown tool {name}"))),
                    }
                }
            }
            I::Call(argc) => {
                let args = p.stack.split_off(p.stack.len() - argc as usize);
                let callee = pop(p);
                let Value::Turn(closure) = callee.unwrapped() else {
                    return Err(RuntimeError::type_error(format!("cannot call {}", callee.type_name())));
                };
                self.enter(p, &program, closure, args)?;
            }
            I::MakeClosure(c) => {
                let closure = Self::closure(&program, &p.frames.last().expect("frame").locals, c);
                p.stack.push(Value::Turn(closure));
            }
            I::LoadTurn(c) => p.stack.push(Value::Turn(Closure {
                module: program.module.clone(),
                chunk: c,
                captured: Vec::new(),
            })),
            I::Echo => {
                let v = pop(p);
                self.echo.echo(p.pid, &v.render());
            }
            I::Throw => {
                let v = pop(p);
                return Ok(match self.throw(p, v) {
                    Ok(()) => Step::Continue,
                    Err(f) => Step::Fault(f),
                });
            }
            I::TryPush(t) => {
                let h = Handler {
                    frame: (p.frames.len() - 1) as u32,
                    target: t,
                    stack: p.stack.len() as u32,
                };
                p.handlers.push(h);
            }
            I::TryPop => {
                p.handlers.pop();
            }
            I::Return => {
                let v = pop(p);
                let frame = p.frames.pop().expect("frame");
                let depth = p.frames.len() as u32;
                p.handlers.retain(|h| h.frame < depth);
                p.stack.truncate(frame.base as usize);
                if p.frames.is_empty() {
                    return Ok(Step::Done(v));
                }
                p.stack.push(v);
            }
            I::Halt => {
                p.frames.clear();
                p.handlers.clear();
                return Ok(Step::Done(Value::Null));
            }
            I::Infer(s) => {
                let prompt = pop(p);
                if prompt.contains_identity() {
                    return Err(RuntimeError::capability("Identity cannot be sent to the inference provider"));
                }
                let state = InferState {
                    target: s as usize,
                    schema: program.structs[s as usize].schema.clone(),
                    prompt: prompt.render(),
                    retries_used: 0,
                    k: self.retry_budget,
                };
                return Ok(Step::Effect(Effect::Infer {
                    state,
                    program: Arc::clone(&program),
                }));
            }
            I::Confidence => {
                let v = pop(p);
                p.stack.push(Value::Num(evaluate_confidence(&v)));
            }
            I::Spawn(c) | I::SpawnLink(c) => {
                let closure = Self::closure(&program, &p.frames.last().expect("frame").locals, c);
                if closure.captured.iter().any(Value::contains_identity) {
                    return Err(RuntimeError::capability("Identity handles cannot be shared with a spawned process"));
                }
                return Ok(Step::Effect(Effect::Spawn {
                    closure,
                    linked: matches!(ins, I::SpawnLink(_)),
                }));
            }
            I::SpawnEach(c) => {
                let list = pop(p);
                let Value::List(items) = list.into_unwrapped() else {
                    return Err(RuntimeError::type_error("spawn_each expects a List"));
                };
                let closure = Self::closure(&program, &p.frames.last().expect("frame").locals, c);
                if closure.captured.iter().chain(&items).any(Value::contains_identity) {
                    return Err(RuntimeError::capability("Identity handles cannot be shared with a spawned process"));
                }
                return Ok(Step::Effect(Effect::SpawnEach { closure, items }));
            }
            I::Send => {
                let value = pop(p);
                let to = pop(p);
                let Value::Pid(to) = to.unwrapped() else {
                    return Err(RuntimeError::type_error(format!("send target must be Pid, got {}", to.type_name())));
                };
                if value.contains_identity() {
                    return Err(RuntimeError::capability("Identity handles cannot be sent between processes"));
                }
                return Ok(Step::Effect(Effect::Send { to: *to, value }));
            }
            I::Receive => match p.mailbox.pop_front() {
                Some(v) => p.stack.push(v),
                None => {
                    p.frames.last_mut().expect("frame").ip -= 1;
                    return Ok(Step::Blocked(BlockReason::AwaitingMessage));
                }
            },
            I::SelfPid => p.stack.push(Value::Pid(p.pid)),
            I::Remember => {
                let v = pop(p);
                let k = text("memory key", &pop(p))?;
                p.memory.remember(k, v);
                p.stack.push(Value::Null);
            }
            I::Recall => {
                let k = text("memory key", &pop(p))?;
                let v = p.memory.recall(&k);
                p.stack.push(v);
            }
            I::GrantIdentity(c, n) => {
                p.stack.push(grant_identity(&program.names[c as usize], &program.names[n as usize]));
            }
            I::Suspend => {
                if p.resuming {
                    // the restored continuation: consume the injected value
                    p.resuming = false;
                    pop(p);
                } else {
                    p.frames.last_mut().expect("frame").ip -= 1;
                    return Ok(Step::Effect(Effect::Suspend));
                }
            }
            I::ContextAppend | I::ContextSystem => {
                let v = pop(p);
                let item = v.render();
                if ins == I::ContextAppend {
                    p.context.append(item);
                } else {
                    p.context.system(item);
                }
            }
        }
        Ok(Step::Continue)
    }
}
