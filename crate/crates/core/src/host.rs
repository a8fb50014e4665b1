//! Host-side resources: environment variables, the filesystem root used by
//! file traps, and the HTTP transport. Credentials live here and never
//! become Turn values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, String>;
}

/// Real network transport. Non-2xx statuses are returned, not raised.
#[derive(Debug)]
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent }
    }
}

impl HttpTransport for UreqTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, String> {
        let mut resp = match req.method.as_str() {
            "GET" => {
                let mut b = self.agent.get(&req.url);
                for (k, v) in &req.headers {
                    b = b.header(k, v);
                }
                b.call()
            }
            "POST" => {
                let mut b = self.agent.post(&req.url);
                for (k, v) in &req.headers {
                    b = b.header(k, v);
                }
                b.send(req.body.as_deref().unwrap_or(""))
            }
            other => return Err(format!("unsupported method {other}")),
        }
        .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Canned responses keyed by URL prefix, with a request log.
#[derive(Debug, Default)]
pub struct MockTransport {
    routes: Mutex<Vec<(String, HttpResponse)>>,
    fallback: Option<HttpResponse>,
    log: Mutex<Vec<HttpRequest>>,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every unmatched request receives `body` with status 200.
    pub fn with_fallback(body: impl Into<String>) -> Self {
        Self {
            fallback: Some(HttpResponse {
                status: 200,
                body: body.into(),
            }),
            ..Self::default()
        }
    }

    pub fn route(&self, url_prefix: impl Into<String>, status: u16, body: impl Into<String>) {
        self.routes.lock().expect("routes").push((
            url_prefix.into(),
            HttpResponse {
                status,
                body: body.into(),
            },
        ));
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.log.lock().expect("log").clone()
    }
}

impl HttpTransport for MockTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, String> {
        self.log.lock().expect("log").push(req.clone());
        let routes = self.routes.lock().expect("routes");
        routes
            .iter()
            .filter(|(prefix, _)| req.url.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len())
            .map(|(_, r)| r.clone())
            .or_else(|| self.fallback.clone())
            .ok_or_else(|| format!("no canned response for {}", req.url))
    }
}

pub struct Host {
    env: RwLock<BTreeMap<String, String>>,
    fs_root: PathBuf,
    transport: Arc<dyn HttpTransport>,
}

impl std::fmt::Debug for Host {
    // deliberately omits environment values
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Host").field("fs_root", &self.fs_root).finish_non_exhaustive()
    }
}

impl Host {
    pub fn new(env: BTreeMap<String, String>, fs_root: impl Into<PathBuf>, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            env: RwLock::new(env),
            fs_root: fs_root.into(),
            transport,
        }
    }

    /// Process environment, current directory, real network.
    pub fn from_process_env() -> Self {
        Self::new(
            std::env::vars().collect(),
            std::env::current_dir().unwrap_or_else(|_| PathBuf::from(".")),
            Arc::new(UreqTransport::default()),
        )
    }

    /// No environment, no network.
    pub fn hermetic(fs_root: impl Into<PathBuf>) -> Self {
        Self::new(BTreeMap::new(), fs_root, Arc::new(MockTransport::new()))
    }

    pub fn env_var(&self, name: &str) -> Option<String> {
        self.env.read().expect("env").get(name).cloned()
    }

    /// Writes go to this host's view only, not the OS environment.
    pub fn set_env_var(&self, name: impl Into<String>, value: impl Into<String>) {
        self.env.write().expect("env").insert(name.into(), value.into());
    }

    pub fn fs_root(&self) -> &Path {
        &self.fs_root
    }

    pub fn transport(&self) -> &dyn HttpTransport {
        self.transport.as_ref()
    }
}

/// `TURN_IDENTITY_{NAME}_TOKEN`, with the provider name uppercased and
/// non-alphanumerics mapped to `_`.
pub fn credential_var(provider: &str) -> String {
    let name: String = provider
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("TURN_IDENTITY_{name}_TOKEN")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn credential_names() {
        assert_eq!(credential_var("stripe"), "TURN_IDENTITY_STRIPE_TOKEN");
        assert_eq!(credential_var("my-api"), "TURN_IDENTITY_MY_API_TOKEN");
    }

    #[test]
    fn mock_transport_prefers_longest_prefix() {
        let t = MockTransport::new();
        t.route("https://a.test/", 200, "root");
        t.route("https://a.test/x", 201, "x");
        let req = |url: &str| HttpRequest {
            method: "GET".into(),
            url: url.into(),
            headers: vec![],
            body: None,
        };
        assert_eq!(t.send(&req("https://a.test/x/1")).unwrap().status, 201);
        assert_eq!(t.send(&req("https://a.test/y")).unwrap().body, "root");
        assert!(t.send(&req("https://b.test/")).is_err());
        assert_eq!(t.requests().len(), 3);
    }

    #[test]
    fn env_overlay() {
        let h = Host::hermetic(".");
        assert_eq!(h.env_var("A"), None);
        h.set_env_var("A", "1");
        assert_eq!(h.env_var("A").as_deref(), Some("1"));
        assert!(!format!("{h:?}").contains('1'));
    }
}
