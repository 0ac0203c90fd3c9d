//! Request and response bodies of the HTTP API that are not core types.
//!
//! Bodies travel as newline-delimited JSON, one record per line, with
//! fields in declaration order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cloudcore::CloudStats;
use crate::deployment::SimStatus;
use crate::faults::FaultKind;
use crate::packet::ReadingValue;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRequest {
    pub period_s: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: u64,
    pub value: ReadingValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// The server's current time in scenario seconds.
    pub now: u64,
    #[serde(flatten)]
    pub stats: CloudStats,
    pub groups: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveStatus {
    #[serde(flatten)]
    pub status: SimStatus,
    /// Set when the simulation halted on an error.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRequest {
    /// Defaults to the current simulated time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_s: Option<u64>,
    pub target: String,
    #[serde(flatten)]
    pub fault: FaultKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultScheduled {
    pub at_s: u64,
    pub target: String,
    pub fault: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
