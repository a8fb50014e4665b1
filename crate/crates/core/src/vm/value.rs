//! Runtime values.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{Map as JsonMap, Number, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pid(pub u64);

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<pid {}>", self.0)
    }
}

/// Capability handle naming a credential provider. Carries no secret.
/// Handles compare equal by provider name.
#[derive(Debug, Clone)]
pub struct Identity {
    pub provider: String,
    pub class: String,
}

impl PartialEq for Identity {
    fn eq(&self, other: &Self) -> bool {
        self.provider == other.provider
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructInstance {
    pub type_name: String,
    /// Declaration order.
    pub fields: Vec<(String, Value)>,
}

impl StructInstance {
    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.iter().find(|(f, _)| f == field).map(|(_, v)| v)
    }
}

/// A turn value: a chunk of some module plus its captured bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub module: String,
    pub chunk: u32,
    pub captured: Vec<Value>,
}

/// Value with an attached confidence in `[0, 1]`. Construct through
/// [`Value::uncertain`], which keeps the wrapper canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct Uncertain {
    inner: Box<Value>,
    p: f64,
}

impl Uncertain {
    pub fn inner(&self) -> &Value {
        &self.inner
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Null,
    Num(f64),
    Str(String),
    Bool(bool),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
    Struct(StructInstance),
    Pid(Pid),
    Vec(Vec<f64>),
    Identity(Identity),
    Turn(Closure),
    Uncertain(Uncertain),
}

impl Value {
    /// Wrap `v` with score `p`. Score 1 (or an Identity) yields the plain
    /// value; an already-uncertain value is re-scored rather than nested.
    pub fn uncertain(v: Value, p: f64) -> Value {
        let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        let v = match v {
            Value::Uncertain(u) => *u.inner,
            other => other,
        };
        if p == 1.0 || matches!(v, Value::Identity(_)) {
            v
        } else {
            Value::Uncertain(Uncertain { inner: Box::new(v), p })
        }
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn identity(provider: impl Into<String>, class: impl Into<String>) -> Value {
        Value::Identity(Identity {
            provider: provider.into(),
            class: class.into(),
        })
    }

    /// The value with any confidence wrapper removed.
    pub fn unwrapped(&self) -> &Value {
        match self {
            Value::Uncertain(u) => &u.inner,
            v => v,
        }
    }

    pub fn into_unwrapped(self) -> Value {
        match self {
            Value::Uncertain(u) => *u.inner,
            v => v,
        }
    }

    /// Attached score, or 1.0 for a plain value.
    pub fn score(&self) -> f64 {
        match self {
            Value::Uncertain(u) => u.p,
            _ => 1.0,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "Null",
            Value::Num(_) => "Num",
            Value::Str(_) => "Str",
            Value::Bool(_) => "Bool",
            Value::List(_) => "List",
            Value::Map(_) => "Map",
            Value::Struct(_) => "Struct",
            Value::Pid(_) => "Pid",
            Value::Vec(_) => "Vec",
            Value::Identity(_) => "Identity",
            Value::Turn(_) => "Turn",
            Value::Uncertain(u) => u.inner.type_name(),
        }
    }

    /// True when an Identity handle occurs anywhere in the tree.
    pub fn contains_identity(&self) -> bool {
        match self {
            Value::Identity(_) => true,
            Value::List(items) => items.iter().any(Value::contains_identity),
            Value::Map(m) => m.values().any(Value::contains_identity),
            Value::Struct(s) => s.fields.iter().any(|(_, v)| v.contains_identity()),
            Value::Turn(c) => c.captured.iter().any(Value::contains_identity),
            Value::Uncertain(u) => u.inner.contains_identity(),
            _ => false,
        }
    }

    /// Visit every string stored anywhere in the tree, including map keys.
    pub fn for_each_str(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Value::Str(s) => f(s),
            Value::List(items) => items.iter().for_each(|v| v.for_each_str(f)),
            Value::Map(m) => {
                for (k, v) in m {
                    f(k);
                    v.for_each_str(f);
                }
            }
            Value::Struct(s) => {
                f(&s.type_name);
                for (k, v) in &s.fields {
                    f(k);
                    v.for_each_str(f);
                }
            }
            Value::Identity(i) => {
                f(&i.provider);
                f(&i.class);
            }
            Value::Turn(c) => c.captured.iter().for_each(|v| v.for_each_str(f)),
            Value::Uncertain(u) => u.inner.for_each_str(f),
            _ => {}
        }
    }

    /// Text shown by `echo`: strings bare at top level, containers in a
    /// JSON-like form, handles opaque.
    pub fn render(&self) -> String {
        match self.unwrapped() {
            Value::Str(s) => s.clone(),
            other => {
                let mut out = String::new();
                other.render_into(&mut out);
                out
            }
        }
    }

    fn render_into(&self, out: &mut String) {
        use std::fmt::Write;
        match self {
            Value::Null => out.push_str("null"),
            Value::Num(n) => out.push_str(&format_num(*n)),
            Value::Str(s) => {
                let _ = write!(out, "{}", Json::String(s.clone()));
            }
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::List(items) => {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.render_into(out);
                }
                out.push(']');
            }
            Value::Map(m) => {
                out.push('{');
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{}: ", Json::String(k.clone()));
                    v.render_into(out);
                }
                out.push('}');
            }
            Value::Struct(s) => {
                let _ = write!(out, "{} {{", s.type_name);
                for (i, (k, v)) in s.fields.iter().enumerate() {
                    out.push_str(if i > 0 { ", " } else { " " });
                    let _ = write!(out, "{k}: ");
                    v.render_into(out);
                }
                out.push_str(if s.fields.is_empty() { "}" } else { " }" });
            }
            Value::Pid(p) => {
                let _ = write!(out, "{p}");
            }
            Value::Vec(xs) => {
                out.push_str("vec[");
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&format_num(*x));
                }
                out.push(']');
            }
            Value::Identity(id) => {
                let _ = write!(out, "<identity {}>", id.provider);
            }
            Value::Turn(_) => out.push_str("<turn>"),
            Value::Uncertain(u) => u.inner.render_into(out),
        }
    }
}

/// Shortest round-trip decimal.
pub fn format_num(n: f64) -> String {
    if n.is_nan() {
        "NaN".into()
    } else if n.is_infinite() {
        if n > 0.0 { "Infinity" } else { "-Infinity" }.into()
    } else {
        format!("{n}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Raised when a value has no JSON form (Identity handles, closures).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct NotSerializable(pub String);

/// Integral numbers within the exact range are emitted as JSON integers;
/// non-finite numbers become `null`.
pub fn num_to_json(n: f64) -> Json {
    if n.fract() == 0.0 && n.abs() < 9_007_199_254_740_992.0 && !(n == 0.0 && n.is_sign_negative()) {
        Json::Number(Number::from(n as i64))
    } else {
        Number::from_f64(n).map_or(Json::Null, Json::Number)
    }
}

impl Value {
    /// Plain JSON view used by `json.stringify` and inference bindings.
    /// Confidence wrappers are dropped; structs keep field order.
    pub fn to_json(&self) -> Result<Json, NotSerializable> {
        Ok(match self {
            Value::Null => Json::Null,
            Value::Num(n) => num_to_json(*n),
            Value::Str(s) => Json::String(s.clone()),
            Value::Bool(b) => Json::Bool(*b),
            Value::List(items) => Json::Array(items.iter().map(Value::to_json).collect::<Result<_, _>>()?),
            Value::Map(m) => {
                let mut obj = JsonMap::new();
                for (k, v) in m {
                    obj.insert(k.clone(), v.to_json()?);
                }
                Json::Object(obj)
            }
            Value::Struct(s) => {
                let mut obj = JsonMap::new();
                for (k, v) in &s.fields {
                    obj.insert(k.clone(), v.to_json()?);
                }
                Json::Object(obj)
            }
            Value::Pid(p) => Json::from(p.0),
            Value::Vec(xs) => Json::Array(xs.iter().map(|x| num_to_json(*x)).collect()),
            Value::Identity(_) => {
                return Err(NotSerializable("Identity cannot be serialized to JSON".into()));
            }
            Value::Turn(_) => return Err(NotSerializable("turn values cannot be serialized to JSON".into())),
            Value::Uncertain(u) => u.inner.to_json()?,
        })
    }

    pub fn from_json(j: &Json) -> Value {
        match j {
            Json::Null => Value::Null,
            Json::Bool(b) => Value::Bool(*b),
            Json::Number(n) => Value::Num(n.as_f64().unwrap_or(f64::NAN)),
            Json::String(s) => Value::Str(s.clone()),
            Json::Array(items) => Value::List(items.iter().map(Value::from_json).collect()),
            Json::Object(obj) => Value::Map(obj.iter().map(|(k, v)| (k.clone(), Value::from_json(v))).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_rules() {
        assert_eq!(Value::identity("stripe", "oauth").render(), "<identity stripe>");
        assert_eq!(Value::uncertain(Value::Num(15.0), 0.4).render(), "15");
        assert_eq!(Value::Null.render(), "null");
        assert_eq!(Value::Num(0.1 + 0.2).render(), "0.30000000000000004");
        assert_eq!(Value::str("hi").render(), "hi");
        assert_eq!(
            Value::List(vec![Value::str("a"), Value::Num(2.0), Value::Bool(true)]).render(),
            r#"["a", 2, true]"#
        );
        let s = Value::Struct(StructInstance {
            type_name: "P".into(),
            fields: vec![("x".into(), Value::Num(1.0)), ("y".into(), Value::str("b"))],
        });
        assert_eq!(s.render(), r#"P { x: 1, y: "b" }"#);
        assert_eq!(Value::Pid(Pid(3)).render(), "<pid 3>");
    }

    #[test]
    fn uncertain_is_canonical() {
        assert_eq!(Value::uncertain(Value::Num(1.0), 1.0), Value::Num(1.0));
        let twice = Value::uncertain(Value::uncertain(Value::Num(1.0), 0.5), 0.25);
        assert_eq!(twice.score(), 0.25);
        assert!(matches!(twice.unwrapped(), Value::Num(_)));
        assert_eq!(Value::uncertain(Value::identity("s", "oauth"), 0.3).score(), 1.0);
        assert_eq!(Value::uncertain(Value::Null, 1.7).score(), 1.0);
    }

    #[test]
    fn identity_equality_by_provider() {
        assert_eq!(Value::identity("stripe", "oauth"), Value::identity("stripe", "network"));
        assert_ne!(Value::identity("stripe", "oauth"), Value::identity("github", "oauth"));
    }

    #[test]
    fn json_conversion() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), Value::Num(1.0));
        assert_eq!(serde_json::to_string(&Value::Map(m).to_json().unwrap()).unwrap(), r#"{"a":1}"#);
        assert!(Value::List(vec![Value::identity("stripe", "oauth")]).to_json().is_err());
        assert_eq!(num_to_json(f64::NAN), Json::Null);
        assert_eq!(num_to_json(1.5).to_string(), "1.5");
        assert_eq!(Value::from_json(&serde_json::json!({"a": [1, "x"]})).render(), r#"{"a": [1, "x"]}"#);
    }
}
