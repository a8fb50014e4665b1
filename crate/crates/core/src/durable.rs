//! Process snapshots and the on-disk store.
//!
//! Snapshots are JSON with a fixed key order. Values use a tagged encoding
//! (`{"t":"num","v":1}`), maps are written with sorted keys, and numbers use
//! shortest round-trip formatting, so serialize -> parse -> serialize is
//! byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Map as JsonMap, Value as Json};
use thiserror::Error;

use crate::contextmem::StructuredContext;
use crate::vm::value::{num_to_json, Closure, Identity, StructInstance};
use crate::vm::{Frame, Handler, ModuleResolver, Pid, ProcessState, Value};

pub const DEFAULT_STORE_DIR: &str = ".turn_store";
const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DurableError {
    #[error("store I/O error: {0}")]
    StoreIo(String),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
    #[error("snapshot was taken from different code (snapshot {found}, current {expected})")]
    ChunkMismatch { expected: String, found: String },
    #[error("cannot restore frame: {0}")]
    Module(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot {
    pub module: String,
    pub chunk: u32,
    pub ip: u32,
    pub base: u32,
    pub locals: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextSnapshot {
    pub capacity: usize,
    pub p0: Vec<String>,
    pub p2: Vec<String>,
    pub p1: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmSnapshot {
    pub pid: u64,
    pub ip: u32,
    pub status: String,
    pub chunk_hash: String,
    pub source_path: Option<String>,
    pub stack: Vec<Value>,
    pub frames: Vec<FrameSnapshot>,
    pub handlers: Vec<Handler>,
    /// Sorted by key.
    pub memory: BTreeMap<String, Value>,
    pub context: ContextSnapshot,
    pub mailbox: Vec<Value>,
}

/// Capture a process image. The process itself is not modified.
pub fn snapshot(p: &ProcessState, chunk_hash: &str, source_path: Option<&str>) -> VmSnapshot {
    VmSnapshot {
        pid: p.pid.0,
        ip: p.ip(),
        status: "suspended".into(),
        chunk_hash: chunk_hash.to_string(),
        source_path: source_path.map(String::from),
        stack: p.stack.clone(),
        frames: p
            .frames
            .iter()
            .map(|f| FrameSnapshot {
                module: f.program.module.clone(),
                chunk: f.chunk,
                ip: f.ip,
                base: f.base,
                locals: f.locals.clone(),
            })
            .collect(),
        handlers: p.handlers.clone(),
        memory: p.memory.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        context: ContextSnapshot {
            capacity: p.context.working_capacity(),
            p0: p.context.p0().to_vec(),
            p2: p.context.p2().iter().cloned().collect(),
            p1: p.context.p1().iter().cloned().collect(),
        },
        mailbox: p.mailbox.iter().cloned().collect(),
    }
}

/// Rebuild the process, refusing snapshots taken from other code.
pub fn restore(snap: &VmSnapshot, resolver: &dyn ModuleResolver, expected_hash: &str) -> Result<ProcessState, DurableError> {
    if snap.chunk_hash != expected_hash {
        return Err(DurableError::ChunkMismatch {
            expected: expected_hash.to_string(),
            found: snap.chunk_hash.clone(),
        });
    }
    let mut frames = Vec::with_capacity(snap.frames.len());
    for f in &snap.frames {
        let program: Arc<_> = resolver.module(&f.module).map_err(|e| DurableError::Module(e.to_string()))?;
        let chunk = program
            .chunks
            .get(f.chunk as usize)
            .ok_or_else(|| DurableError::Module(format!("{} has no chunk {}", f.module, f.chunk)))?;
        if f.ip as usize >= chunk.code.len() || f.locals.len() != chunk.locals as usize {
            return Err(DurableError::Corrupt(format!("frame does not fit chunk {}", chunk.name)));
        }
        frames.push(Frame {
            program,
            chunk: f.chunk,
            ip: f.ip,
            base: f.base,
            locals: f.locals.clone(),
        });
    }
    Ok(ProcessState {
        pid: Pid(snap.pid),
        frames,
        stack: snap.stack.clone(),
        handlers: snap.handlers.clone(),
        context: StructuredContext::from_parts(
            snap.context.p0.clone(),
            snap.context.p2.clone(),
            snap.context.p1.clone(),
            snap.context.capacity,
        ),
        memory: snap.memory.clone().into_iter().collect(),
        mailbox: snap.mailbox.iter().cloned().collect(),
        resuming: false,
    })
}

/// Restore and hand `injected` to the instruction that suspended, which
/// completes with it when the process next runs.
pub fn resume_with_result(
    snap: &VmSnapshot,
    injected: Value,
    resolver: &dyn ModuleResolver,
    expected_hash: &str,
) -> Result<ProcessState, DurableError> {
    let mut p = restore(snap, resolver, expected_hash)?;
    p.stack.push(injected);
    p.resuming = true;
    Ok(p)
}

// ---- canonical encoding ----

fn enc_num(n: f64) -> Json {
    if n.is_nan() {
        json!("NaN")
    } else if n.is_infinite() {
        json!(if n > 0.0 { "Infinity" } else { "-Infinity" })
    } else if n == 0.0 && n.is_sign_negative() {
        json!("-0")
    } else {
        num_to_json(n)
    }
}

fn dec_num(j: &Json) -> Result<f64, DurableError> {
    match j {
        Json::Number(n) => n.as_f64().ok_or_else(|| corrupt("number out of range")),
        Json::String(s) => match s.as_str() {
            "NaN" => Ok(f64::NAN),
            "Infinity" => Ok(f64::INFINITY),
            "-Infinity" => Ok(f64::NEG_INFINITY),
            "-0" => Ok(-0.0),
            _ => Err(corrupt(format!("bad number {s:?}"))),
        },
        _ => Err(corrupt("expected number")),
    }
}

fn tagged(t: &str, v: Json) -> Json {
    let mut m = JsonMap::new();
    m.insert("t".into(), Json::String(t.into()));
    m.insert("v".into(), v);
    Json::Object(m)
}

pub fn encode_value(v: &Value) -> Json {
    match v {
        Value::Null => json!({"t": "null"}),
        Value::Num(n) => tagged("num", enc_num(*n)),
        Value::Str(s) => tagged("str", Json::String(s.clone())),
        Value::Bool(b) => tagged("bool", Json::Bool(*b)),
        Value::List(items) => tagged("list", Json::Array(items.iter().map(encode_value).collect())),
        Value::Map(m) => tagged(
            "map",
            Json::Object(m.iter().map(|(k, v)| (k.clone(), encode_value(v))).collect()),
        ),
        Value::Struct(s) => {
            let mut m = JsonMap::new();
            m.insert("t".into(), json!("struct"));
            m.insert("name".into(), Json::String(s.type_name.clone()));
            m.insert(
                "v".into(),
                Json::Array(s.fields.iter().map(|(k, v)| json!([k, encode_value(v)])).collect()),
            );
            Json::Object(m)
        }
        Value::Pid(p) => tagged("pid", json!(p.0)),
        Value::Vec(xs) => tagged("vec", Json::Array(xs.iter().map(|x| enc_num(*x)).collect())),
        Value::Identity(id) => {
            let mut h = JsonMap::new();
            h.insert("identity".into(), Json::String(id.provider.clone()));
            h.insert("class".into(), Json::String(id.class.clone()));
            tagged("identity", Json::Object(h))
        }
        Value::Turn(c) => {
            let mut m = JsonMap::new();
            m.insert("t".into(), json!("turn"));
            m.insert("module".into(), Json::String(c.module.clone()));
            m.insert("chunk".into(), json!(c.chunk));
            m.insert("v".into(), Json::Array(c.captured.iter().map(encode_value).collect()));
            Json::Object(m)
        }
        Value::Uncertain(u) => {
            let mut m = JsonMap::new();
            m.insert("t".into(), json!("uncertain"));
            m.insert("p".into(), enc_num(u.p()));
            m.insert("v".into(), encode_value(u.inner()));
            Json::Object(m)
        }
    }
}

fn corrupt(msg: impl Into<String>) -> DurableError {
    DurableError::Corrupt(msg.into())
}

fn field<'a>(j: &'a Json, key: &str) -> Result<&'a Json, DurableError> {
    j.get(key).ok_or_else(|| corrupt(format!("missing {key}")))
}

fn str_field<'a>(j: &'a Json, key: &str) -> Result<&'a str, DurableError> {
    field(j, key)?.as_str().ok_or_else(|| corrupt(format!("{key} is not a string")))
}

fn u64_field(j: &Json, key: &str) -> Result<u64, DurableError> {
    field(j, key)?.as_u64().ok_or_else(|| corrupt(format!("{key} is not an integer")))
}

fn array<'a>(j: &'a Json, what: &str) -> Result<&'a Vec<Json>, DurableError> {
    j.as_array().ok_or_else(|| corrupt(format!("{what} is not a list")))
}

fn values(j: &Json, what: &str) -> Result<Vec<Value>, DurableError> {
    array(j, what)?.iter().map(decode_value).collect()
}

fn strings(j: &Json, what: &str) -> Result<Vec<String>, DurableError> {
    array(j, what)?
        .iter()
        .map(|s| s.as_str().map(String::from).ok_or_else(|| corrupt(format!("{what} item is not a string"))))
        .collect()
}

pub fn decode_value(j: &Json) -> Result<Value, DurableError> {
    let t = str_field(j, "t")?;
    if t == "null" {
        return Ok(Value::Null);
    }
    let v = field(j, "v")?;
    Ok(match t {
        "num" => Value::Num(dec_num(v)?),
        "str" => Value::Str(v.as_str().ok_or_else(|| corrupt("str"))?.to_string()),
        "bool" => Value::Bool(v.as_bool().ok_or_else(|| corrupt("bool"))?),
        "list" => Value::List(values(v, "list")?),
        "map" => Value::Map(
            v.as_object()
                .ok_or_else(|| corrupt("map"))?
                .iter()
                .map(|(k, v)| Ok((k.clone(), decode_value(v)?)))
                .collect::<Result<_, DurableError>>()?,
        ),
        "struct" => Value::Struct(StructInstance {
            type_name: str_field(j, "name")?.to_string(),
            fields: array(v, "struct fields")?
                .iter()
                .map(|pair| match pair.as_array().map(Vec::as_slice) {
                    Some([Json::String(k), v]) => Ok((k.clone(), decode_value(v)?)),
                    _ => Err(corrupt("struct field")),
                })
                .collect::<Result<_, _>>()?,
        }),
        "pid" => Value::Pid(Pid(v.as_u64().ok_or_else(|| corrupt("pid"))?)),
        "vec" => Value::Vec(array(v, "vec")?.iter().map(dec_num).collect::<Result<_, _>>()?),
        "identity" => Value::Identity(Identity {
            provider: str_field(v, "identity")?.to_string(),
            class: str_field(v, "class")?.to_string(),
        }),
        "turn" => Value::Turn(Closure {
            module: str_field(j, "module")?.to_string(),
            chunk: u64_field(j, "chunk")? as u32,
            captured: values(v, "captured")?,
        }),
        "uncertain" => Value::uncertain(decode_value(v)?, dec_num(field(j, "p")?)?),
        other => return Err(corrupt(format!("unknown value tag {other:?}"))),
    })
}

impl VmSnapshot {
    pub fn to_json(&self) -> Json {
        let mut m = JsonMap::new();
        m.insert("version".into(), json!(FORMAT_VERSION));
        m.insert("pid".into(), json!(self.pid));
        m.insert("ip".into(), json!(self.ip));
        m.insert("status".into(), json!(self.status));
        m.insert("chunkHash".into(), json!(self.chunk_hash));
        m.insert("sourcePath".into(), json!(self.source_path));
        m.insert("stack".into(), Json::Array(self.stack.iter().map(encode_value).collect()));
        m.insert(
            "frames".into(),
            Json::Array(
                self.frames
                    .iter()
                    .map(|f| {
                        let mut o = JsonMap::new();
                        o.insert("module".into(), json!(f.module));
                        o.insert("chunk".into(), json!(f.chunk));
                        o.insert("ip".into(), json!(f.ip));
                        o.insert("base".into(), json!(f.base));
                        o.insert("locals".into(), Json::Array(f.locals.iter().map(encode_value).collect()));
                        Json::Object(o)
                    })
                    .collect(),
            ),
        );
        m.insert(
            "handlers".into(),
            Json::Array(self.handlers.iter().map(|h| json!([h.frame, h.target, h.stack])).collect()),
        );
        m.insert(
            "memory".into(),
            Json::Object(self.memory.iter().map(|(k, v)| (k.clone(), encode_value(v))).collect()),
        );
        let mut ctx = JsonMap::new();
        ctx.insert("capacity".into(), json!(self.context.capacity));
        ctx.insert("p0".into(), json!(self.context.p0));
        ctx.insert("p2".into(), json!(self.context.p2));
        ctx.insert("p1".into(), json!(self.context.p1));
        m.insert("context".into(), Json::Object(ctx));
        m.insert("mailbox".into(), Json::Array(self.mailbox.iter().map(encode_value).collect()));
        Json::Object(m)
    }

    /// Compact canonical text.
    pub fn serialize(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json(j: &Json) -> Result<Self, DurableError> {
        let version = u64_field(j, "version")?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported snapshot version {version}")));
        }
        let ctx = field(j, "context")?;
        Ok(Self {
            pid: u64_field(j, "pid")?,
            ip: u64_field(j, "ip")? as u32,
            status: str_field(j, "status")?.to_string(),
            chunk_hash: str_field(j, "chunkHash")?.to_string(),
            source_path: field(j, "sourcePath")?.as_str().map(String::from),
            stack: values(field(j, "stack")?, "stack")?,
            frames: array(field(j, "frames")?, "frames")?
                .iter()
                .map(|f| {
                    Ok(FrameSnapshot {
                        module: str_field(f, "module")?.to_string(),
                        chunk: u64_field(f, "chunk")? as u32,
                        ip: u64_field(f, "ip")? as u32,
                        base: u64_field(f, "base")? as u32,
                        locals: values(field(f, "locals")?, "locals")?,
                    })
                })
                .collect::<Result<_, DurableError>>()?,
            handlers: array(field(j, "handlers")?, "handlers")?
                .iter()
                .map(|h| {
                    let n: Vec<u32> = array(h, "handler")?.iter().filter_map(Json::as_u64).map(|x| x as u32).collect();
                    match n.as_slice() {
                        [frame, target, stack] => Ok(Handler {
                            frame: *frame,
                            target: *target,
                            stack: *stack,
                        }),
                        _ => Err(corrupt("handler")),
                    }
                })
                .collect::<Result<_, DurableError>>()?,
            memory: field(j, "memory")?
                .as_object()
                .ok_or_else(|| corrupt("memory"))?
                .iter()
                .map(|(k, v)| Ok((k.clone(), decode_value(v)?)))
                .collect::<Result<_, DurableError>>()?,
            context: ContextSnapshot {
                capacity: u64_field(ctx, "capacity")? as usize,
                p0: strings(field(ctx, "p0")?, "p0")?,
                p2: strings(field(ctx, "p2")?, "p2")?,
                p1: strings(field(ctx, "p1")?, "p1")?,
            },
            mailbox: values(field(j, "mailbox")?, "mailbox")?,
        })
    }

    pub fn deserialize(text: &str) -> Result<Self, DurableError> {
        let j: Json = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        Self::from_json(&j)
    }
}

/// One `{id}.json` file per snapshot under a root directory.
#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

fn io(e: impl std::fmt::Display) -> DurableError {
    DurableError::StoreIo(e.to_string())
}

impl FileStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `$TURN_STORE_DIR`, else `.turn_store/`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os("TURN_STORE_DIR").map_or_else(|| PathBuf::from(DEFAULT_STORE_DIR), PathBuf::from))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    fn check_id(id: &str) -> Result<(), DurableError> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(DurableError::StoreIo(format!("invalid snapshot id {id:?}")));
        }
        Ok(())
    }

    /// Write under a fresh id.
    pub fn persist(&self, snap: &VmSnapshot) -> Result<String, DurableError> {
        let id = uuid::Uuid::new_v4().to_string();
        self.persist_as(&id, snap)?;
        Ok(id)
    }

    /// Atomic: written to a temporary file, then renamed into place.
    pub fn persist_as(&self, id: &str, snap: &VmSnapshot) -> Result<(), DurableError> {
        Self::check_id(id)?;
        std::fs::create_dir_all(&self.root).map_err(io)?;
        let tmp = self.root.join(format!(".{id}.json.tmp"));
        std::fs::write(&tmp, snap.serialize()).map_err(io)?;
        std::fs::rename(&tmp, self.path(id)).map_err(io)
    }

    pub fn load(&self, id: &str) -> Result<VmSnapshot, DurableError> {
        Self::check_id(id)?;
        let path = self.path(id);
        let text = std::fs::read_to_string(&path).map_err(|e| io(format!("{}: {e}", path.display())))?;
        VmSnapshot::deserialize(&text)
    }
}
