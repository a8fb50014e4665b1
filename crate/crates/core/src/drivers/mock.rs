//! Deterministic offline provider: either a fixed script of responses or a
//! seeded generator of schema-conforming values.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map as JsonMap, Value as Json};

use super::{DriverError, InferenceProvider, InferenceRequest, InferenceResult};

#[derive(Debug, Clone, PartialEq)]
pub enum MockStep {
    Respond { json: Json, confidence: Option<f64> },
    /// Unparseable output; counts as a failed attempt.
    Malformed,
}

impl MockStep {
    pub fn respond(json: Json, confidence: f64) -> Self {
        MockStep::Respond {
            json,
            confidence: Some(confidence),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockCall {
    pub seq: usize,
    pub prompt: String,
    pub context: Vec<String>,
    pub retry_note: Option<String>,
}

#[derive(Debug)]
enum Mode {
    Script(Vec<MockStep>),
    Generator { seed: u64 },
}

#[derive(Debug)]
pub struct MockDriver {
    mode: Mode,
    next: AtomicUsize,
    calls: Mutex<Vec<MockCall>>,
}

impl MockDriver {
    /// Call `n` is answered by step `n`.
    pub fn script(steps: Vec<MockStep>) -> Self {
        Self::with_mode(Mode::Script(steps))
    }

    /// Synthesizes a conforming value for each request schema from `seed`
    /// and the call number.
    pub fn generator(seed: u64) -> Self {
        Self::with_mode(Mode::Generator { seed })
    }

    fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            next: AtomicUsize::new(0),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Parse a script file: a JSON list whose items are `"MALFORMED"`,
    /// `{"malformed": true}`, or `{"response": <json>, "confidence": p}`.
    pub fn parse_script(text: &str) -> Result<Vec<MockStep>, DriverError> {
        let doc: Json = serde_json::from_str(text).map_err(|e| DriverError::Config(format!("mock script: {e}")))?;
        let items = doc
            .as_array()
            .ok_or_else(|| DriverError::Config("mock script must be a JSON list".into()))?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                if item.as_str() == Some("MALFORMED") || item.get("malformed").and_then(Json::as_bool) == Some(true) {
                    return Ok(MockStep::Malformed);
                }
                let json = item
                    .get("response")
                    .cloned()
                    .ok_or_else(|| DriverError::Config(format!("mock script step {i}: missing \"response\"")))?;
                Ok(MockStep::Respond {
                    json,
                    confidence: item.get("confidence").and_then(Json::as_f64),
                })
            })
            .collect()
    }

    /// Calls so far, ordered by sequence number.
    pub fn calls(&self) -> Vec<MockCall> {
        let mut calls = self.calls.lock().expect("call log").clone();
        calls.sort_by_key(|c| c.seq);
        calls
    }

    pub fn call_count(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl InferenceProvider for MockDriver {
    fn infer(&self, req: &InferenceRequest) -> Result<InferenceResult, DriverError> {
        let seq = self.next.fetch_add(1, Ordering::SeqCst);
        self.calls.lock().expect("call log").push(MockCall {
            seq,
            prompt: req.prompt.clone(),
            context: req.context.clone(),
            retry_note: req.retry_note.clone(),
        });
        match &self.mode {
            Mode::Script(steps) => match steps.get(seq) {
                None => Err(DriverError::ScriptExhausted(steps.len())),
                Some(MockStep::Malformed) => Err(DriverError::Malformed("response is not valid JSON".into())),
                Some(MockStep::Respond { json, confidence }) => Ok(InferenceResult {
                    json: json.clone(),
                    confidence: *confidence,
                }),
            },
            Mode::Generator { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(seq as u64));
                let json = generate(req.schema.as_json(), &mut rng, 0);
                let confidence = (rng.random_range(50..100) as f64) / 100.0;
                Ok(InferenceResult {
                    json,
                    confidence: Some(confidence),
                })
            }
        }
    }
}

const WORDS: &[&str] = &["alpha", "bravo", "delta", "echo", "kilo", "lima", "oscar", "sierra"];

fn generate(schema: &Json, rng: &mut ChaCha8Rng, depth: usize) -> Json {
    match schema.get("type").and_then(Json::as_str) {
        Some("number") => Json::from(rng.random_range(0..1000) as f64 / 10.0),
        Some("string") => Json::from(WORDS[rng.random_range(0..WORDS.len())]),
        Some("boolean") => Json::from(rng.random::<bool>()),
        Some("array") => {
            let n = rng.random_range(0..4);
            Json::Array((0..n).map(|_| Json::from(rng.random_range(0..100))).collect())
        }
        _ => {
            let mut obj = JsonMap::new();
            if let Some(props) = schema.get("properties").and_then(Json::as_object) {
                for (k, sub) in props {
                    obj.insert(k.clone(), if depth > 16 { Json::Null } else { generate(sub, rng, depth + 1) });
                }
            }
            Json::Object(obj)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{generate_schema, validate, StructDef, StructRegistry, TypeTag};
    use serde_json::json;

    fn req(schema: crate::schema::JsonSchema) -> InferenceRequest {
        InferenceRequest {
            prompt: "p".into(),
            context: vec![],
            schema,
            retry_note: None,
        }
    }

    fn schema() -> crate::schema::JsonSchema {
        let inner = StructDef::new("I", vec![("ok", TypeTag::Bool)]);
        let s = StructDef::new(
            "S",
            vec![
                ("score", TypeTag::Num),
                ("name", TypeTag::Str),
                ("tags", TypeTag::List),
                ("inner", TypeTag::StructRef("I".into())),
            ],
        );
        let reg: StructRegistry = [s.clone(), inner].into_iter().collect();
        generate_schema(&s, &reg).unwrap()
    }

    #[test]
    fn script_answers_in_order_then_exhausts() {
        let d = MockDriver::script(vec![MockStep::respond(json!({"score": 1}), 0.92), MockStep::Malformed]);
        let r = d.infer(&req(schema())).unwrap();
        assert_eq!(r.confidence, Some(0.92));
        assert!(d.infer(&req(schema())).unwrap_err().is_retryable());
        assert_eq!(d.infer(&req(schema())).unwrap_err(), DriverError::ScriptExhausted(2));
        assert_eq!(d.calls().len(), 3);
    }

    #[test]
    fn generator_is_deterministic_and_conforming() {
        let a = MockDriver::generator(42);
        let b = MockDriver::generator(42);
        for _ in 0..20 {
            let x = a.infer(&req(schema())).unwrap();
            let y = b.infer(&req(schema())).unwrap();
            assert_eq!(x, y);
            validate(&x.json, &schema()).unwrap();
        }
    }

    #[test]
    fn script_file_format() {
        let steps = MockDriver::parse_script(
            r#"["MALFORMED", {"malformed": true}, {"response": {"a": 1}, "confidence": 0.5}, {"response": 3}]"#,
        )
        .unwrap();
        assert_eq!(
            steps,
            vec![
                MockStep::Malformed,
                MockStep::Malformed,
                MockStep::respond(json!({"a": 1}), 0.5),
                MockStep::Respond {
                    json: json!(3),
                    confidence: None
                }
            ]
        );
        assert!(MockDriver::parse_script("{}").is_err());
    }
}
