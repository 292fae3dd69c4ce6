//! Wire types shared by the service, the HTTP layer and the CLI.

use std::collections::BTreeMap;

use agent_factory_core::controller::{FeedbackPolicy, PhaseReason, Verdict};
use agent_factory_core::evolution::EvolutionConfig;
use agent_factory_core::feature_model::{Configuration, Violation};
use agent_factory_core::neurogenome::NetworkSpec;
use agent_factory_core::streetlight::{AmbientSchedule, WorldConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A control command, applied between generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "camelCase")]
pub enum Command {
    /// Trains `generations` more generations (the experiment's default when
    /// absent), replacing any remaining count.
    Start(#[serde(default)] StartPayload),
    Pause,
    Resume,
    Reconfigure(ReconfigurePayload),
    ChangeEnvironment(ChangeEnvironmentPayload),
    AutoReconfigure(AutoReconfigurePayload),
    Snapshot,
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Start(_) => "start",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Reconfigure(_) => "reconfigure",
            Command::ChangeEnvironment(_) => "changeEnvironment",
            Command::AutoReconfigure(_) => "autoReconfigure",
            Command::Snapshot => "snapshot",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StartPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<u64>,
}

/// Either a whole configuration or alternative-group choices applied to the
/// current one (`{"activation": "binaryThreshold"}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReconfigurePayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Configuration>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub choose: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChangeEnvironmentPayload {
    pub schedule: AmbientSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AutoReconfigurePayload {
    pub budget_generations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventType {
    Generation,
    Verdict,
    Phase,
    Environment,
    Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(rename = "type")]
    pub kind: EventType,
    pub payload: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "camelCase")]
pub enum RunStatus {
    Idle,
    Running { remaining: u64 },
    Paused { remaining: u64 },
}

impl RunStatus {
    pub fn remaining(self) -> u64 {
        match self {
            RunStatus::Idle => 0,
            RunStatus::Running { remaining } | RunStatus::Paused { remaining } => remaining,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateExperiment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Feature configuration; the expert configuration when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Configuration>,
    /// World; the bright reference street when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    /// Seeds the default world and evolution when those are absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<FeedbackPolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ack {
    pub command_id: u64,
    pub kind: String,
    /// Seq of the first event reflecting the command (the next seq when the
    /// command emitted none).
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseSummary {
    pub index: usize,
    pub reason: PhaseReason,
    pub started_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentSummary {
    pub id: String,
    pub status: RunStatus,
    pub generations: u64,
    pub phase: PhaseSummary,
    pub spec: NetworkSpec,
    pub feature_config: Configuration,
    pub ambient_schedule: AmbientSchedule,
    pub best_fitness: Option<f64>,
    pub last_verdict: Option<Verdict>,
    pub policy: FeedbackPolicy,
    /// Seq the next event will carry.
    pub event_head: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorKind {
    NotFound,
    Validation,
    Conflict,
    Io,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    /// Field path of a malformed payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            message: message.into(),
            path: None,
            violations: Vec::new(),
        }
    }

    pub fn at(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{} (at {p})", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ApiError {}

/// Parses a JSON value, reporting the path of the first bad field.
pub fn parse_with_path<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, ApiError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ApiError::new(ErrorKind::Validation, e.inner().to_string()).at(path)
    })
}

pub fn parse_command(mut value: Value) -> Result<Command, ApiError> {
    // `start` may omit its all-optional payload.
    if let Some(obj) = value.as_object_mut() {
        if obj.get("kind").and_then(Value::as_str) == Some("start") && !obj.contains_key("payload")
        {
            obj.insert("payload".into(), Value::Object(Default::default()));
        }
    }
    parse_with_path(value)
}
