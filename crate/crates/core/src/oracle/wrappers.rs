use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::{Oracle, OracleRequest, OracleResponse, TemplateId};
use crate::error::Result;

type Script = dyn Fn(&OracleRequest, usize) -> Result<String> + Send + Sync;

/// Answers from a closure that sees the request and a global call index.
pub struct ScriptedOracle {
    script: Box<Script>,
    calls: AtomicUsize,
}

impl ScriptedOracle {
    pub fn new(script: impl Fn(&OracleRequest, usize) -> Result<String> + Send + Sync + 'static) -> Self {
        ScriptedOracle { script: Box::new(script), calls: AtomicUsize::new(0) }
    }

    pub fn always(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        Self::new(move |_, _| Ok(raw.clone()))
    }
}

impl Oracle for ScriptedOracle {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(OracleResponse { raw: (self.script)(request, n)?, latency_ms: 0 })
    }
}

/// Counts calls per template.
pub struct CountingOracle<O> {
    inner: O,
    counts: Mutex<HashMap<TemplateId, usize>>,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle { inner, counts: Mutex::new(HashMap::new()) }
    }

    pub fn count(&self, template: TemplateId) -> usize {
        self.counts.lock().expect("count lock").get(&template).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.lock().expect("count lock").values().sum()
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        *self.counts.lock().expect("count lock").entry(request.template).or_insert(0) += 1;
        self.inner.call(request)
    }
}

/// Sleeps before every call, standing in for network latency.
pub struct DelayOracle<O> {
    inner: O,
    delay: Duration,
}

impl<O: Oracle> DelayOracle<O> {
    pub fn new(inner: O, delay: Duration) -> Self {
        DelayOracle { inner, delay }
    }
}

impl<O: Oracle> Oracle for DelayOracle<O> {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        std::thread::sleep(self.delay);
        let mut r = self.inner.call(request)?;
        r.latency_ms += self.delay.as_millis() as u64;
        Ok(r)
    }
}
