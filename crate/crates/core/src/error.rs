use thiserror::Error;

use crate::packet::NodeId;
use crate::simkernel::SimTime;

/// Errors raised by the simulation kernel.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("scheduling into the past: at {at} is before now {now}")]
    PastSchedule { at: SimTime, now: SimTime },
    #[error("run horizon {t_end} is before now {now}")]
    PastHorizon { t_end: SimTime, now: SimTime },
}

/// Errors raised by field node operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodeError {
    #[error("unknown fault type `{0}`")]
    UnknownFault(String),
    #[error("node {node} has no channel `{channel}`")]
    NoSuchChannel { node: NodeId, channel: String },
    #[error("fault `{fault}` is not valid for {kind} node {node}")]
    FaultNotApplicable { node: NodeId, kind: String, fault: String },
    #[error("invalid node configuration: {0}")]
    Config(String),
}

/// Errors raised by the radio layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("no link from {src} to {dst} in the star topology")]
    NoSuchLink { src: String, dst: String },
    #[error("malformed outage window [{start}, {end})")]
    BadWindow { start: f64, end: f64 },
    #[error("loss probability {0} outside [0, 1]")]
    BadLossProb(f64),
}

/// Errors raised by the durable relay/gateway queues.
#[derive(Debug, Error)]
pub enum QueueError {
    #[error("unknown node {0}: command not staged")]
    UnknownNode(NodeId),
    #[error("durable log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt durable log at line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

/// Errors raised by the cloud core.
#[derive(Debug, Error)]
pub enum CloudError {
    #[error("node {0} is already registered")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} has no channel `{channel}`")]
    UnknownChannel { node: NodeId, channel: String },
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("group `{0}` has no members")]
    EmptyGroup(String),
    #[error("period {period_s} s is below the minimum safe period of {minimum_s} s")]
    PeriodTooShort { period_s: u64, minimum_s: u64 },
    #[error("invalid time range: from {from} is after to {to}")]
    BadRange { from: u64, to: u64 },
    #[error("no record for key ({node}, {seq})")]
    UnknownKey { node: NodeId, seq: u64 },
    #[error("invalid node descriptor: {0}")]
    Invalid(String),
    #[error("store: {0}")]
    Store(#[from] QueueError),
}

/// Errors raised by the analysis toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("calibration needs at least 2 time-aligned points, found {0}")]
    TooFewPoints(usize),
    #[error("cheap-sensor series has zero variance; slope is undefined")]
    ZeroVariance,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Errors raised while loading or validating a scenario.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario validation failed: {0}")]
    Invalid(String),
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors raised while running a deployment.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("report: {0}")]
    Report(String),
    #[error("{} already exists; a run needs an empty store directory", .0.display())]
    StoreInUse(std::path::PathBuf),
}
