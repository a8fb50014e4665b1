//! Reference HTTP driver and the host-side executor.
//!
//! Request body layout:
//!
//! ```json
//! {"model": "...", "prompt": "...", "context": ["..."],
//!  "response_format": {"type": "json_schema", "schema": {...}},
//!  "logprobs": true}
//! ```
//!
//! The response is read from `choices[0].message.content` (chat-completion
//! style) or a top-level `output` field. Confidence is an explicit
//! `confidence` number if present, else the mean token probability
//! `exp(logprob)` over the returned log-probabilities.

use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::{Driver, DriverError, HttpConfig, InferenceProvider, InferenceRequest, InferenceResult, Method};
use crate::host::{Host, HttpRequest};

/// Contents of a driver config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DriverConfig {
    pub name: String,
    pub endpoint_url: String,
    pub model: String,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            name: "reference".into(),
            endpoint_url: "http://127.0.0.1:8000/v1/infer".into(),
            model: "default".into(),
            headers: vec![
                ("Authorization".into(), "Bearer $env:LLM_API_KEY".into()),
                ("Content-Type".into(), "application/json".into()),
            ],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReferenceDriver {
    pub config: DriverConfig,
}

impl ReferenceDriver {
    pub fn new(config: DriverConfig) -> Self {
        Self { config }
    }
}

fn malformed(msg: impl Into<String>) -> DriverError {
    DriverError::Malformed(msg.into())
}

fn mean_probability(logprobs: &Json) -> Option<f64> {
    let lps: Vec<f64> = logprobs
        .as_array()?
        .iter()
        .filter_map(|t| t.as_f64().or_else(|| t.get("logprob").and_then(Json::as_f64)))
        .collect();
    if lps.is_empty() {
        return None;
    }
    Some(lps.iter().map(|lp| lp.exp()).sum::<f64>() / lps.len() as f64)
}

impl Driver for ReferenceDriver {
    fn transform_request(&self, req: &InferenceRequest) -> Result<HttpConfig, DriverError> {
        if self.config.endpoint_url.is_empty() {
            return Err(DriverError::Config("endpoint URL is empty".into()));
        }
        let prompt = match &req.retry_note {
            Some(note) => format!("{}\n\n{note}", req.prompt),
            None => req.prompt.clone(),
        };
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "context": req.context,
            "response_format": {"type": "json_schema", "schema": req.schema.as_json()},
            "logprobs": true,
        });
        Ok(HttpConfig {
            url: self.config.endpoint_url.clone(),
            method: Method::Post,
            headers: self.config.headers.clone(),
            body: body.to_string(),
        })
    }

    fn transform_response(&self, raw: &str) -> Result<InferenceResult, DriverError> {
        let doc: Json = serde_json::from_str(raw).map_err(|e| malformed(format!("response is not JSON: {e}")))?;
        let (payload, logprobs) = if let Some(content) = doc.pointer("/choices/0/message/content") {
            (content, doc.pointer("/choices/0/logprobs/content"))
        } else if let Some(out) = doc.get("output") {
            (out, doc.get("logprobs"))
        } else {
            return Err(malformed("response has no output"));
        };
        let json = match payload {
            Json::String(s) => serde_json::from_str(s).map_err(|e| malformed(format!("output is not JSON: {e}")))?,
            other => other.clone(),
        };
        let confidence = doc
            .get("confidence")
            .and_then(Json::as_f64)
            .or_else(|| logprobs.and_then(mean_probability))
            .map(|p| p.clamp(0.0, 1.0));
        Ok(InferenceResult { json, confidence })
    }
}

fn env_placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$env:([A-Za-z_][A-Za-z0-9_]*)").expect("valid regex"))
}

/// Resolves `$env:` templates against the host environment and performs
/// the request. Only header names are ever logged.
#[derive(Debug, Clone)]
pub struct Executor {
    host: Arc<Host>,
}

impl Executor {
    pub fn new(host: Arc<Host>) -> Self {
        Self { host }
    }

    fn resolve(&self, template: &str) -> Result<String, DriverError> {
        let mut missing = None;
        let out = env_placeholder().replace_all(template, |caps: &regex::Captures<'_>| {
            self.host.env_var(&caps[1]).unwrap_or_else(|| {
                missing.get_or_insert_with(|| caps[1].to_string());
                String::new()
            })
        });
        match missing {
            Some(name) => Err(DriverError::MissingEnv(name)),
            None => Ok(out.into_owned()),
        }
    }

    pub fn execute(&self, cfg: &HttpConfig) -> Result<String, DriverError> {
        let headers = cfg
            .headers
            .iter()
            .map(|(k, v)| Ok((k.clone(), self.resolve(v)?)))
            .collect::<Result<Vec<_>, DriverError>>()?;
        let names: Vec<&str> = cfg.headers.iter().map(|(k, _)| k.as_str()).collect();
        log::debug!("{:?} {} headers={names:?}", cfg.method, cfg.url);
        let req = HttpRequest {
            method: match cfg.method {
                Method::Get => "GET".into(),
                Method::Post => "POST".into(),
            },
            url: cfg.url.clone(),
            headers,
            body: (cfg.method == Method::Post).then(|| cfg.body.clone()),
        };
        let resp = self.host.transport().send(&req).map_err(DriverError::Transport)?;
        log::debug!("{} -> {}", cfg.url, resp.status);
        if !(200..300).contains(&resp.status) {
            return Err(DriverError::Transport(format!("HTTP status {}", resp.status)));
        }
        Ok(resp.body)
    }
}

/// A driver plus an executor: request transform, call, response transform.
pub struct HttpProvider {
    driver: Box<dyn Driver>,
    executor: Executor,
}

impl HttpProvider {
    pub fn new(driver: Box<dyn Driver>, executor: Executor) -> Self {
        Self { driver, executor }
    }
}

impl InferenceProvider for HttpProvider {
    fn infer(&self, req: &InferenceRequest) -> Result<InferenceResult, DriverError> {
        let cfg = self.driver.transform_request(req)?;
        let raw = self.executor.execute(&cfg)?;
        self.driver.transform_response(&raw)
    }
}
