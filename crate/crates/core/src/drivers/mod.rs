//! Inference providers.
//!
//! A [`Driver`] is a pair of pure functions: one maps an inference request
//! to an [`HttpConfig`], the other maps raw response text to an
//! [`InferenceResult`]. Neither sees the environment. The host-side
//! [`Executor`] substitutes `$env:NAME` placeholders and performs the call;
//! it is the only code that ever holds resolved credentials.

mod http;
mod mock;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::schema::JsonSchema;

pub use http::{DriverConfig, Executor, HttpProvider, ReferenceDriver};
pub use mock::{MockCall, MockDriver, MockStep};

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRequest {
    pub prompt: String,
    /// Flat context rendering, oldest directive first.
    pub context: Vec<String>,
    pub schema: JsonSchema,
    /// Validation error from the previous attempt, if any.
    pub retry_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub json: Json,
    /// Absent when the provider reports no certainty.
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub url: String,
    pub method: Method,
    /// Values may contain `$env:NAME` templates.
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriverError {
    /// The response could not be interpreted; the caller may retry.
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("mock script exhausted after {0} calls")]
    ScriptExhausted(usize),
    #[error("driver configuration: {0}")]
    Config(String),
    /// A `$env:` placeholder had no value in the host environment.
    #[error("unresolved credential placeholder $env:{0}")]
    MissingEnv(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl DriverError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, DriverError::Malformed(_))
    }
}

pub trait InferenceProvider: Send + Sync {
    fn infer(&self, req: &InferenceRequest) -> Result<InferenceResult, DriverError>;
}

pub trait Driver: Send + Sync {
    fn transform_request(&self, req: &InferenceRequest) -> Result<HttpConfig, DriverError>;
    fn transform_response(&self, raw: &str) -> Result<InferenceResult, DriverError>;
}
