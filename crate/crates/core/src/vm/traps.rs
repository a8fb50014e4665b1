//! Kernel traps (`__sys_*`): the host primitives behind the standard
//! library. I/O traps take an Identity handle first and check its class
//! again here, independently of the library-level check.

use std::path::{Component, Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use regex::Regex;

use super::error::{ErrorKind, RuntimeError};
use super::value::Identity;
use super::Value;
use crate::host::{credential_var, Host, HttpRequest};

pub enum TrapOutcome {
    Value(Value),
    /// Yield the process for this many milliseconds.
    Sleep(u64),
}

pub fn is_trap(name: &str) -> bool {
    name.starts_with("__sys_")
}

fn arity(name: &str, args: &[Value], n: usize) -> Result<(), RuntimeError> {
    if args.len() != n {
        return Err(RuntimeError::new(
            ErrorKind::ArityError,
            format!("{name} expects {n} arguments, got {}", args.len()),
        ));
    }
    Ok(())
}

fn text<'a>(name: &str, v: &'a Value) -> Result<&'a str, RuntimeError> {
    match v.unwrapped() {
        Value::Str(s) => Ok(s),
        other => Err(RuntimeError::type_error(format!("{name} expects Str, got {}", other.type_name()))),
    }
}

fn identity<'a>(name: &str, v: &'a Value, classes: &[&str]) -> Result<&'a Identity, RuntimeError> {
    let Value::Identity(id) = v else {
        return Err(RuntimeError::capability(format!(
            "{name} requires an Identity handle, got {}",
            v.type_name()
        )));
    };
    if !classes.contains(&id.class.as_str()) {
        return Err(RuntimeError::capability(format!(
            "wrong capability class: {name} requires {}, got {}",
            classes.join(" or "),
            id.class
        )));
    }
    Ok(id)
}

fn io(e: impl std::fmt::Display) -> RuntimeError {
    RuntimeError::new(ErrorKind::IoError, e.to_string())
}

/// Paths are relative to the host's filesystem root and may not escape it.
fn sandboxed(host: &Host, path: &str) -> Result<PathBuf, RuntimeError> {
    let p = Path::new(path);
    if p.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
        return Err(RuntimeError::capability(format!(
            "path {path:?} must be relative and stay inside the filesystem root"
        )));
    }
    Ok(host.fs_root().join(p))
}

fn http(host: &Host, method: &str, id: &Identity, url: &str, body: Option<String>) -> Result<Value, RuntimeError> {
    let var = credential_var(&id.provider);
    let token = host.env_var(&var).ok_or_else(|| {
        RuntimeError::capability(format!("no credential configured for identity {} ({var} is unset)", id.provider))
    })?;
    let req = HttpRequest {
        method: method.into(),
        url: url.into(),
        headers: vec![("Authorization".into(), format!("Bearer {token}"))],
        body,
    };
    log::debug!("{method} {url} as <identity {}>", id.provider);
    let resp = host.transport().send(&req).map_err(io)?;
    let mut m = std::collections::BTreeMap::new();
    m.insert("status".to_string(), Value::Num(resp.status as f64));
    m.insert("body".to_string(), Value::Str(resp.body));
    Ok(Value::Map(m))
}

fn regex(name: &str, pattern: &str) -> Result<Regex, RuntimeError> {
    Regex::new(pattern).map_err(|e| RuntimeError::new(ErrorKind::RuntimeError, format!("{name}: invalid pattern: {e}")))
}

pub fn kernel_trap(name: &str, args: &[Value], host: &Host) -> Result<TrapOutcome, RuntimeError> {
    let v = match name {
        "__sys_http_get" => {
            arity(name, args, 2)?;
            let id = identity(name, &args[0], &["network", "oauth"])?;
            http(host, "GET", id, text(name, &args[1])?, None)?
        }
        "__sys_http_post" => {
            arity(name, args, 3)?;
            let id = identity(name, &args[0], &["network", "oauth"])?;
            let body = text(name, &args[2])?.to_string();
            http(host, "POST", id, text(name, &args[1])?, Some(body))?
        }
        "__sys_fs_read" => {
            arity(name, args, 2)?;
            identity(name, &args[0], &["filesystem"])?;
            let path = sandboxed(host, text(name, &args[1])?)?;
            Value::Str(std::fs::read_to_string(&path).map_err(|e| io(format!("{}: {e}", path.display())))?)
        }
        "__sys_fs_write" => {
            arity(name, args, 3)?;
            identity(name, &args[0], &["filesystem"])?;
            let path = sandboxed(host, text(name, &args[1])?)?;
            let data = text(name, &args[2])?;
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            std::fs::write(&path, data).map_err(|e| io(format!("{}: {e}", path.display())))?;
            Value::Null
        }
        "__sys_env_get" | "__sys_env_set" => {
            let set = name == "__sys_env_set";
            arity(name, args, if set { 3 } else { 2 })?;
            identity(name, &args[0], &["environment"])?;
            let var = text(name, &args[1])?;
            if var.starts_with("TURN_IDENTITY_") {
                return Err(RuntimeError::capability(format!("{var} is reserved for identity credentials")));
            }
            if set {
                host.set_env_var(var, text(name, &args[2])?);
                Value::Null
            } else {
                host.env_var(var).map_or(Value::Null, Value::Str)
            }
        }
        "__sys_time_now" => {
            arity(name, args, 0)?;
            let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_err(io)?.as_millis();
            Value::Num(ms as f64)
        }
        "__sys_sleep" => {
            arity(name, args, 1)?;
            let Value::Num(ms) = args[0].unwrapped() else {
                return Err(RuntimeError::type_error("__sys_sleep expects Num milliseconds"));
            };
            return Ok(TrapOutcome::Sleep(ms.max(0.0) as u64));
        }
        "__sys_json_parse" => {
            arity(name, args, 1)?;
            let j: serde_json::Value = serde_json::from_str(text(name, &args[0])?)
                .map_err(|e| RuntimeError::new(ErrorKind::SerializationError, format!("invalid JSON: {e}")))?;
            Value::from_json(&j)
        }
        "__sys_json_stringify" => {
            arity(name, args, 1)?;
            let j = args[0]
                .to_json()
                .map_err(|e| RuntimeError::new(ErrorKind::SerializationError, e.0))?;
            Value::Str(j.to_string())
        }
        "__sys_regex_matches" => {
            arity(name, args, 2)?;
            Value::Bool(regex(name, text(name, &args[0])?)?.is_match(text(name, &args[1])?))
        }
        "__sys_regex_replace" => {
            arity(name, args, 3)?;
            let re = regex(name, text(name, &args[0])?)?;
            Value::Str(re.replace_all(text(name, &args[1])?, text(name, &args[2])?).into_owned())
        }
        other => return Err(RuntimeError::new(ErrorKind::UnknownTool, format!("unknown kernel trap {other}"))),
    };
    Ok(TrapOutcome::Value(v))
}
