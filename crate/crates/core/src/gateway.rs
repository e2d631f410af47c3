//! Single boundary for all model calls.
//!
//! A [`Gateway`] binds each [`ModelRole`] to a backend: either an HTTP
//! chat-completion endpoint or a deterministic [`ScriptedBackend`] for
//! offline runs and tests. Transient transport failures are retried up to a
//! configured budget; malformed-but-delivered text is never retried. Every
//! completed call can be appended to an audit log (role, prompt hash,
//! response hash, latency).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Which part of the pipeline is speaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    /// Emits reasoning programs.
    Generator,
    /// Critiques and refines strategies.
    Optimizer,
    /// Answers QUESTION and VERIFY prompts.
    FunctionLlm,
}

impl ModelRole {
    pub const ALL: [ModelRole; 3] = [
        ModelRole::Generator,
        ModelRole::Optimizer,
        ModelRole::FunctionLlm,
    ];

    /// Default sampling temperature for the role.
    pub fn default_temperature(self) -> f64 {
        match self {
            ModelRole::Generator | ModelRole::FunctionLlm => 0.0,
            ModelRole::Optimizer => 0.7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelRole::Generator => "generator",
            ModelRole::Optimizer => "optimizer",
            ModelRole::FunctionLlm => "function_llm",
        }
    }
}

/// One completion call.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub role: ModelRole,
    pub prompt: String,
    pub max_output: Option<u32>,
}

impl CompletionRequest {
    pub fn new(role: ModelRole, prompt: impl Into<String>) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            max_output: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no backend configured for role `{}`", .0.as_str())]
    BackendUnconfigured(ModelRole),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    TransportError { attempts: u32, message: String },
    #[error("invalid gateway config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Error from a single transport attempt. `retryable` marks transient
/// failures (connect errors, 5xx, 429); delivered-but-malformed responses
/// are not retryable.
#[derive(Debug)]
pub struct AttemptError {
    pub retryable: bool,
    pub message: String,
}

impl AttemptError {
    pub fn transient(message: impl Into<String>) -> Self {
        Self {
            retryable: true,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            retryable: false,
            message: message.into(),
        }
    }
}

/// Wire-level chat transport. Implementations must be safe to call from
/// multiple threads.
pub trait ChatTransport: Send + Sync {
    fn send(
        &self,
        model: &str,
        temperature: f64,
        prompt: &str,
        max_output: Option<u32>,
    ) -> Result<String, AttemptError>;
}

/// One scripted rule: all needles must occur in the prompt, and the rule may
/// be scoped to a single role. First matching rule wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<ModelRole>,
    #[serde(default)]
    pub contains_all: Vec<String>,
    pub response: String,
}

/// Deterministic test double: a pure function of `(role, prompt)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedBackend {
    pub rules: Vec<ScriptRule>,
    pub fallback: String,
}

impl ScriptedBackend {
    pub fn new(fallback: impl Into<String>) -> Self {
        Self {
            rules: Vec::new(),
            fallback: fallback.into(),
        }
    }

    /// Adds a rule matching a single substring, any role.
    pub fn rule(mut self, needle: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(ScriptRule {
            role: None,
            contains_all: vec![needle.into()],
            response: response.into(),
        });
        self
    }

    /// Adds a rule requiring every needle to occur in the prompt.
    pub fn rule_all(mut self, needles: &[&str], response: impl Into<String>) -> Self {
        self.rules.push(ScriptRule {
            role: None,
            contains_all: needles.iter().map(|s| s.to_string()).collect(),
            response: response.into(),
        });
        self
    }

    /// Adds a role-scoped substring rule.
    pub fn role_rule(
        mut self,
        role: ModelRole,
        needle: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        self.rules.push(ScriptRule {
            role: Some(role),
            contains_all: vec![needle.into()],
            response: response.into(),
        });
        self
    }

    pub fn respond(&self, role: ModelRole, prompt: &str) -> String {
        for rule in &self.rules {
            if let Some(scope) = rule.role {
                if scope != role {
                    continue;
                }
            }
            if rule.contains_all.iter().all(|n| prompt.contains(n)) {
                return rule.response.clone();
            }
        }
        self.fallback.clone()
    }

    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| GatewayError::Config(e.to_string()))
    }
}

/// OpenAI-style chat-completion request body: a single user message carrying
/// the whole prompt.
pub fn chat_request_body(
    model: &str,
    temperature: f64,
    prompt: &str,
    max_output: Option<u32>,
) -> serde_json::Value {
    let mut body = serde_json::json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
    });
    if let Some(max) = max_output {
        body["max_tokens"] = serde_json::json!(max);
    }
    body
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
pub fn parse_chat_response(body: &str) -> Result<String, AttemptError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| AttemptError::fatal(format!("malformed response JSON: {e}")))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| AttemptError::fatal("response missing choices[0].message.content"))
}

/// Blocking HTTP transport speaking the chat-completion protocol.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
            endpoint: endpoint.into(),
            api_key,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn send(
        &self,
        model: &str,
        temperature: f64,
        prompt: &str,
        max_output: Option<u32>,
    ) -> Result<String, AttemptError> {
        let body = chat_request_body(model, temperature, prompt, max_output);
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| AttemptError::transient(format!("connect: {e}")))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| AttemptError::transient(format!("read body: {e}")))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(AttemptError::transient(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::fatal(format!("status {status}: {text}")));
        }
        parse_chat_response(&text)
    }
}

/// Per-role model binding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleConfig {
    pub model: String,
    pub temperature: f64,
}

enum Backend {
    Scripted(Arc<ScriptedBackend>),
    Transport(Arc<dyn ChatTransport>),
}

struct RoleBinding {
    backend: Backend,
    config: RoleConfig,
}

/// Counting semaphore bounding concurrent in-flight requests.
struct Limiter {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(cap: usize) -> Self {
        Self {
            permits: Mutex::new(cap.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize)]
struct CallLogEntry<'a> {
    role: &'a str,
    prompt_sha256: String,
    response_sha256: String,
    latency_ms: u128,
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// The single entry point for model calls.
pub struct Gateway {
    roles: BTreeMap<ModelRole, RoleBinding>,
    retry_budget: u32,
    limiter: Limiter,
    call_log: Option<Mutex<Box<dyn Write + Send>>>,
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder::default()
    }

    /// All three roles served by one scripted backend at default models and
    /// temperatures.
    pub fn scripted(backend: ScriptedBackend) -> Self {
        let backend = Arc::new(backend);
        let mut builder = Self::builder();
        for role in ModelRole::ALL {
            builder = builder.scripted_role(role, Arc::clone(&backend), None);
        }
        builder.build()
    }

    pub fn role_config(&self, role: ModelRole) -> Option<&RoleConfig> {
        self.roles.get(&role).map(|b| &b.config)
    }

    /// Issues the request and returns the model text verbatim.
    pub fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let binding = self
            .roles
            .get(&request.role)
            .ok_or(GatewayError::BackendUnconfigured(request.role))?;
        let _permit = self.limiter.acquire();
        let started = Instant::now();
        let response = match &binding.backend {
            Backend::Scripted(backend) => backend.respond(request.role, &request.prompt),
            Backend::Transport(transport) => {
                let mut attempts = 0u32;
                loop {
                    attempts += 1;
                    match transport.send(
                        &binding.config.model,
                        binding.config.temperature,
                        &request.prompt,
                        request.max_output,
                    ) {
                        Ok(text) => break text,
                        Err(err) if err.retryable && attempts <= self.retry_budget => continue,
                        Err(err) => {
                            return Err(GatewayError::TransportError {
                                attempts,
                                message: err.message,
                            })
                        }
                    }
                }
            }
        };
        self.log_call(request, &response, started);
        Ok(response)
    }

    fn log_call(&self, request: &CompletionRequest, response: &str, started: Instant) {
        let Some(log) = &self.call_log else { return };
        let entry = CallLogEntry {
            role: request.role.as_str(),
            prompt_sha256: sha256_hex(&request.prompt),
            response_sha256: sha256_hex(response),
            latency_ms: started.elapsed().as_millis(),
        };
        let mut sink = log.lock().unwrap();
        let _ = serde_json::to_writer(&mut *sink, &entry);
        let _ = sink.write_all(b"\n");
    }
}

#[derive(Default)]
pub struct GatewayBuilder {
    roles: BTreeMap<ModelRole, RoleBinding>,
    retry_budget: Option<u32>,
    concurrency: Option<usize>,
    call_log: Option<Box<dyn Write + Send>>,
}

impl GatewayBuilder {
    pub fn scripted_role(
        mut self,
        role: ModelRole,
        backend: Arc<ScriptedBackend>,
        config: Option<RoleConfig>,
    ) -> Self {
        self.roles.insert(
            role,
            RoleBinding {
                backend: Backend::Scripted(backend),
                config: config.unwrap_or(RoleConfig {
                    model: "scripted".into(),
                    temperature: role.default_temperature(),
                }),
            },
        );
        self
    }

    pub fn transport_role(
        mut self,
        role: ModelRole,
        transport: Arc<dyn ChatTransport>,
        config: RoleConfig,
    ) -> Self {
        self.roles.insert(
            role,
            RoleBinding {
                backend: Backend::Transport(transport),
                config,
            },
        );
        self
    }

    /// Number of retries allowed after the first attempt (default 2).
    pub fn retry_budget(mut self, budget: u32) -> Self {
        self.retry_budget = Some(budget);
        self
    }

    /// Maximum concurrent in-flight requests (default 4).
    pub fn concurrency(mut self, cap: usize) -> Self {
        self.concurrency = Some(cap);
        self
    }

    pub fn call_log(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.call_log = Some(sink);
        self
    }

    pub fn call_log_path(self, path: &Path) -> Result<Self, GatewayError> {
        let file = std::fs::File::create(path)?;
        Ok(self.call_log(Box::new(file)))
    }

    pub fn build(self) -> Gateway {
        Gateway {
            roles: self.roles,
            retry_budget: self.retry_budget.unwrap_or(2),
            limiter: Limiter::new(self.concurrency.unwrap_or(4)),
            call_log: self.call_log.map(Mutex::new),
        }
    }
}
