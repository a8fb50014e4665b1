//! `infer T { prompt }`: request, validate, retry, bind.

use serde_json::Value as Json;

use super::error::{ErrorKind, RuntimeError};
use super::value::StructInstance;
use super::Value;
use crate::compiler::StructEntry;
use crate::drivers::{DriverError, InferenceProvider, InferenceRequest};
use crate::schema::{validate, JsonSchema, TypeTag};

/// Total attempts per `infer` unless configured otherwise.
pub const DEFAULT_RETRY_BUDGET: u32 = 3;

/// Score used when the provider reports none.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct InferState {
    pub target: usize,
    pub schema: JsonSchema,
    pub prompt: String,
    pub retries_used: u32,
    pub k: u32,
}

/// Copy required fields out of `j` in declaration order, building nested
/// struct instances for struct-typed fields. Extra keys are dropped.
pub fn bind(j: &Json, target: usize, structs: &[StructEntry]) -> Value {
    let def = &structs[target].def;
    let fields = def
        .fields
        .iter()
        .map(|(name, tag)| {
            let raw = j.get(name).unwrap_or(&Json::Null);
            let v = match tag {
                TypeTag::StructRef(n) => match structs.iter().position(|s| &s.def.name == n) {
                    Some(i) => bind(raw, i, structs),
                    None => Value::from_json(raw),
                },
                _ => Value::from_json(raw),
            };
            (name.clone(), v)
        })
        .collect();
    Value::Struct(StructInstance {
        type_name: def.name.clone(),
        fields,
    })
}

fn retry_note(error: &str) -> String {
    format!("Your previous response was rejected: {error}. Reply with JSON that conforms to the schema.")
}

/// Run up to `state.k` attempts. A conforming response is bound and wrapped
/// with the reported score; each rejection is fed back on the next attempt.
pub fn run_infer(
    state: &mut InferState,
    context: Vec<String>,
    structs: &[StructEntry],
    provider: &dyn InferenceProvider,
) -> Result<Value, RuntimeError> {
    let mut attempts = Vec::new();
    let mut note = None;
    for attempt in 0..state.k.max(1) {
        state.retries_used = attempt;
        let req = InferenceRequest {
            prompt: state.prompt.clone(),
            context: context.clone(),
            schema: state.schema.clone(),
            retry_note: note.take(),
        };
        let failure = match provider.infer(&req) {
            Ok(result) => match validate(&result.json, &state.schema) {
                Ok(()) => {
                    let bound = bind(&result.json, state.target, structs);
                    return Ok(Value::uncertain(bound, result.confidence.unwrap_or(DEFAULT_CONFIDENCE)));
                }
                Err(msg) => msg,
            },
            Err(e) if e.is_retryable() => e.to_string(),
            Err(e) => {
                let kind = match e {
                    DriverError::MissingEnv(_) => ErrorKind::CapabilityError,
                    DriverError::Transport(_) => ErrorKind::IoError,
                    _ => ErrorKind::InferError,
                };
                attempts.push(e.to_string());
                let mut err = RuntimeError::new(kind, format!("inference for {} failed: {e}", structs[state.target].def.name));
                err.attempts = attempts;
                return Err(err);
            }
        };
        log::debug!("infer attempt {} rejected: {failure}", attempt + 1);
        note = Some(retry_note(&failure));
        attempts.push(failure);
    }
    state.retries_used = state.k;
    let mut err = RuntimeError::new(
        ErrorKind::InferError,
        format!(
            "inference for {} failed after {} attempts: {}",
            structs[state.target].def.name,
            attempts.len(),
            attempts.last().map(String::as_str).unwrap_or("")
        ),
    );
    err.attempts = attempts;
    Err(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{MockDriver, MockStep};
    use crate::schema::{generate_schema, StructDef, StructRegistry};
    use serde_json::json;

    fn structs() -> Vec<StructEntry> {
        let inner = StructDef::new("Inner", vec![("ok", TypeTag::Bool)]);
        let outer = StructDef::new(
            "Thesis",
            vec![("score", TypeTag::Num), ("inner", TypeTag::StructRef("Inner".into()))],
        );
        let reg: StructRegistry = [outer.clone(), inner.clone()].into_iter().collect();
        [outer, inner]
            .into_iter()
            .map(|d| StructEntry {
                schema: generate_schema(&d, &reg).unwrap(),
                def: d,
            })
            .collect()
    }

    fn state(s: &[StructEntry]) -> InferState {
        InferState {
            target: 0,
            schema: s[0].schema.clone(),
            prompt: "p".into(),
            retries_used: 0,
            k: DEFAULT_RETRY_BUDGET,
        }
    }

    fn good() -> Json {
        json!({"score": 0.8, "inner": {"ok": true}, "extra": 1})
    }

    #[test]
    fn success_binds_in_declared_order() {
        let s = structs();
        let d = MockDriver::script(vec![MockStep::respond(good(), 0.92)]);
        let v = run_infer(&mut state(&s), vec![], &s, &d).unwrap();
        assert_eq!(v.score(), 0.92);
        let Value::Struct(inst) = v.unwrapped() else { panic!() };
        assert_eq!(inst.fields.len(), 2);
        assert_eq!(inst.get("score"), Some(&Value::Num(0.8)));
        assert!(matches!(inst.get("inner"), Some(Value::Struct(_))));
    }

    #[test]
    fn default_confidence() {
        let s = structs();
        let d = MockDriver::script(vec![MockStep::Respond {
            json: good(),
            confidence: None,
        }]);
        assert_eq!(run_infer(&mut state(&s), vec![], &s, &d).unwrap().score(), 0.5);
    }

    #[test]
    fn two_failures_then_success() {
        let s = structs();
        let d = MockDriver::script(vec![
            MockStep::Malformed,
            MockStep::respond(json!({"score": "high"}), 0.9),
            MockStep::respond(good(), 0.7),
        ]);
        let mut st = state(&s);
        assert!(run_infer(&mut st, vec![], &s, &d).is_ok());
        assert_eq!(st.retries_used, 2);
        let calls = d.calls();
        assert_eq!(calls.len(), 3);
        assert!(calls[2].retry_note.as_ref().unwrap().contains("score: expected number"));
    }

    #[test]
    fn exhausted_budget_raises_infer_error() {
        let s = structs();
        let d = MockDriver::script(vec![MockStep::Malformed; 5]);
        let e = run_infer(&mut state(&s), vec![], &s, &d).unwrap_err();
        assert_eq!(e.kind, ErrorKind::InferError);
        assert_eq!(e.attempts.len(), 3);
        assert_eq!(d.call_count(), 3);
    }
}
