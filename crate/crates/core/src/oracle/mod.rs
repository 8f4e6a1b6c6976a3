//! The language-model oracle: prompt templates, response parsers, a
//! deterministic stub and an HTTP chat-completions client.

mod http;
pub mod parse;
mod stub;
pub mod template;
pub mod vars;
mod wrappers;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{HttpConfig, HttpOracle};
pub use parse::{
    BehaviorPattern, BehaviorSelection, DedupResult, Explanation, FunctionProposal, Labeled, MergeGroup,
    MethodSelection, Parsed,
};
pub use stub::StubOracle;
pub use template::render;
pub use wrappers::{CountingOracle, DelayOracle, ScriptedOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    BehaviorAbstraction,
    MethodBuilder,
    BehaviorSelect,
    MethodSelect,
    Explain,
    Dedup,
    Describe,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::BehaviorAbstraction,
        TemplateId::MethodBuilder,
        TemplateId::BehaviorSelect,
        TemplateId::MethodSelect,
        TemplateId::Explain,
        TemplateId::Dedup,
        TemplateId::Describe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::BehaviorAbstraction => "behavior_abstraction",
            TemplateId::MethodBuilder => "method_builder",
            TemplateId::BehaviorSelect => "behavior_select",
            TemplateId::MethodSelect => "method_select",
            TemplateId::Explain => "explain",
            TemplateId::Dedup => "dedup",
            TemplateId::Describe => "describe",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown template {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub template: TemplateId,
    pub variables: BTreeMap<String, String>,
    /// Ask the backend for temperature-0 style decoding.
    pub deterministic: bool,
    pub seed: u64,
}

impl OracleRequest {
    pub fn new(template: TemplateId) -> Self {
        OracleRequest { template, variables: BTreeMap::new(), deterministic: true, seed: 0 }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn get(&self, name: &str) -> &str {
        self.variables.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn prompt(&self) -> Result<String> {
        render(self.template, &self.variables)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub raw: String,
    pub latency_ms: u64,
}

impl OracleResponse {
    pub fn parse(&self, template: TemplateId) -> Result<Parsed> {
        parse::parse(template, &self.raw)
    }
}

/// A backend. Implementations must be callable from many threads at once.
pub trait Oracle: Send + Sync {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse>;
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        (**self).call(request)
    }
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        (**self).call(request)
    }
}

/// Calls the oracle and applies `parser` to a non-empty answer.
pub fn ask<T>(oracle: &dyn Oracle, request: &OracleRequest, parser: fn(&str) -> Result<T>) -> Result<T> {
    request.prompt()?;
    let response = oracle.call(request)?;
    if response.raw.trim().is_empty() {
        return Err(Error::EmptyOracleOutput(request.template));
    }
    parser(&response.raw)
}

/// Sends each template to its configured backend.
pub struct RoutedOracle {
    default: Arc<dyn Oracle>,
    routes: HashMap<TemplateId, Arc<dyn Oracle>>,
}

impl RoutedOracle {
    pub fn new(default: Arc<dyn Oracle>) -> Self {
        RoutedOracle { default, routes: HashMap::new() }
    }

    pub fn route(mut self, template: TemplateId, backend: Arc<dyn Oracle>) -> Self {
        self.routes.insert(template, backend);
        self
    }
}

impl Oracle for RoutedOracle {
    fn call(&self, request: &OracleRequest) -> Result<OracleResponse> {
        self.routes.get(&request.template).unwrap_or(&self.default).call(request)
    }
}
