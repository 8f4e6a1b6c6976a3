use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Oracle, OracleRequest, OracleResponse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Full chat-completions endpoint.
    pub url: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Merged verbatim into the request body, e.g. a thinking-mode switch.
    #[serde(default)]
    pub extra: Map<String, Value>,
}

fn default_timeout_ms() -> u64 {
    120_000
}

fn default_in_flight() -> usize {
    16
}

impl HttpConfig {
    /// Reads `VISTA_ORACLE_URL`, `VISTA_ORACLE_KEY` and `VISTA_ORACLE_MODEL`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var("VISTA_ORACLE_URL").map_err(|_| Error::Config("VISTA_ORACLE_URL is not set".into()))?;
        Ok(HttpConfig {
            url,
            api_key: std::env::var("VISTA_ORACLE_KEY").ok(),
            model: std::env::var("VISTA_ORACLE_MODEL").unwrap_or_else(|_| "default".into()),
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_in_flight(),
            extra: Map::new(),
        })
    }
}

/// OpenAI-compatible chat-completions client with an in-flight cap.
pub struct HttpOracle {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

struct Slot<'a>(&'a HttpOracle);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("in-flight lock") -= 1;
        self.0.slot_freed.notify_one();
    }
}

impl HttpOracle {
    pub fn new(config: HttpConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpOracle { config, client, in_flight: Mutex::new(0), slot_freed: Condvar::new() })
    }

    fn acquire(&self) -> Slot<'_> {
        let mut n = self.in_flight.lock().expect("in-flight lock");
        while *n >= self.config.max_in_flight {
            n = self.slot_freed.wait(n).expect("in-flight lock");
        }
        *n += 1;
        Slot(self)
    }

    pub fn body(&self, request: &OracleRequest, prompt: &str) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let obj = body.as_object_mut().expect("object literal");
        if request.deterministic {
            obj.insert("temperature".into(), json!(0.0));
            obj.insert("seed".into(), json!(request.seed));
        }
        for (k, v) in &self.config.extra {
            obj.insert(k.clone(), v.clone());
        }
        body
    }
}

fn transport(e: reqwest::Error) -> Error {
    if e.is_timeout() {
        Error::OracleTimeout(e.to_string())
    } else {
        Error::OracleUnavailable(e.to_string())
    }
}

impl Oracle for HttpOracle {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        let prompt = request.prompt()?;
        let body = self.body(request, &prompt);
        let _slot = self.acquire();
        let started = Instant::now();
        let mut req = self.client.post(&self.config.url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::OracleUnavailable(format!("{} returned {status}", self.config.url)));
        }
        let value: Value = resp.json().map_err(transport)?;
        let raw = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or(Error::EmptyOracleOutput(request.template))?
            .to_string();
        Ok(OracleResponse { raw, latency_ms: started.elapsed().as_millis() as u64 })
    }
}
