//! Runtime errors. Errors surface to Turn code as maps of the form
//! `{"type": kind, "message": text}` so they can be caught and inspected.

use std::collections::BTreeMap;
use std::fmt;

use super::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    RuntimeError,
    TypeError,
    ArityError,
    UnknownField,
    IndexError,
    UnknownTool,
    CapabilityError,
    IoError,
    SerializationError,
    InferError,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::RuntimeError => "RuntimeError",
            ErrorKind::TypeError => "TypeError",
            ErrorKind::ArityError => "ArityError",
            ErrorKind::UnknownField => "UnknownField",
            ErrorKind::IndexError => "IndexError",
            ErrorKind::UnknownTool => "UnknownTool",
            ErrorKind::CapabilityError => "CapabilityError",
            ErrorKind::IoError => "IoError",
            ErrorKind::SerializationError => "SerializationError",
            ErrorKind::InferError => "InferError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
    /// Per-attempt validation messages for `InferError`.
    pub attempts: Vec<String>,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

impl RuntimeError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            attempts: Vec::new(),
        }
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::TypeError, message)
    }

    pub fn capability(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::CapabilityError, message)
    }

    pub fn to_value(&self) -> Value {
        let mut m = BTreeMap::new();
        m.insert("type".to_string(), Value::str(self.kind.name()));
        m.insert("message".to_string(), Value::str(&self.message));
        if self.kind == ErrorKind::InferError {
            m.insert(
                "attempts".to_string(),
                Value::List(self.attempts.iter().map(Value::str).collect()),
            );
        }
        Value::Map(m)
    }
}

/// One-line description of a thrown value: `Kind: message` for error maps,
/// the rendered value otherwise.
pub fn describe(thrown: &Value) -> String {
    if let Value::Map(m) = thrown.unwrapped() {
        if let (Some(Value::Str(t)), Some(msg)) = (m.get("type"), m.get("message")) {
            return format!("{t}: {}", msg.render());
        }
    }
    thrown.render()
}

/// The `type` field of an error map, if any.
pub fn kind_of(thrown: &Value) -> Option<&str> {
    match thrown.unwrapped() {
        Value::Map(m) => match m.get("type") {
            Some(Value::Str(t)) => Some(t),
            _ => None,
        },
        _ => None,
    }
}
