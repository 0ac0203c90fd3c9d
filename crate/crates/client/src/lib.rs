//! Thin async client for the fieldnet HTTP API.

use fieldnet_core::cloudcore::semantic::{self, Triple};
use fieldnet_core::cloudcore::{
    CommandStatus, GroupCommand, NodeDescriptor, NodeHealth, NodePatch, RegistryEntry, StoredPacket,
};
use fieldnet_core::faults::FaultKind;
use fieldnet_core::packet::{Command, Packet, PacketKey};
use fieldnet_core::wire::{ErrorBody, FaultRequest, FaultScheduled, LiveStatus, RateRequest, SeriesPoint, Stats};
use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

const NDJSON: &str = "application/x-ndjson";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    /// The server answered with an error status.
    #[error("{status}: {message}")]
    Api { status: StatusCode, message: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
            ClientError::Decode(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Self {
            base,
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{}", self.base, path))
    }

    async fn send(&self, req: RequestBuilder) -> Result<String> {
        let resp = req.send().await?;
        let status = resp.status();
        let text = resp.text().await?;
        if status.is_success() {
            return Ok(text);
        }
        let message = serde_json::from_str::<ErrorBody>(text.trim())
            .map(|b| b.error)
            .unwrap_or(text);
        Err(ClientError::Api { status, message })
    }

    async fn lines<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<Vec<T>> {
        decode_lines(&self.send(req).await?)
    }

    async fn one<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T> {
        let mut v = self.lines(req).await?;
        match v.len() {
            1 => Ok(v.remove(0)),
            n => Err(ClientError::Decode(format!("expected one record, got {n}"))),
        }
    }

    pub async fn ingest(&self, packets: &[Packet]) -> Result<Vec<PacketKey>> {
        self.lines(self.request(Method::POST, "/ingest").ndjson(packets)).await
    }

    pub async fn register_node(&self, d: &NodeDescriptor) -> Result<NodeDescriptor> {
        self.one(self.request(Method::POST, "/nodes").ndjson([d])).await
    }

    pub async fn update_node(&self, node_id: &str, patch: &NodePatch) -> Result<NodeDescriptor> {
        let path = format!("/nodes/{}", enc(node_id));
        self.one(self.request(Method::PATCH, &path).ndjson([patch])).await
    }

    pub async fn nodes(&self, group: Option<&str>) -> Result<Vec<NodeDescriptor>> {
        let mut req = self.request(Method::GET, "/nodes");
        if let Some(g) = group {
            req = req.query(&[("group", g)]);
        }
        self.lines(req).await
    }

    pub async fn node(&self, node_id: &str) -> Result<RegistryEntry> {
        self.one(self.request(Method::GET, &format!("/nodes/{}", enc(node_id))))
            .await
    }

    pub async fn node_health(&self, node_id: &str) -> Result<NodeHealth> {
        self.one(self.request(Method::GET, &format!("/nodes/{}/health", enc(node_id))))
            .await
    }

    pub async fn silent_nodes(&self) -> Result<Vec<NodeHealth>> {
        self.lines(self.request(Method::GET, "/health/silent")).await
    }

    pub async fn command_node(&self, node_id: &str, command: &Command) -> Result<CommandStatus> {
        let path = format!("/nodes/{}/commands", enc(node_id));
        self.one(self.request(Method::POST, &path).ndjson([command])).await
    }

    pub async fn node_commands(&self, node_id: &str) -> Result<Vec<CommandStatus>> {
        self.lines(self.request(Method::GET, &format!("/nodes/{}/commands", enc(node_id))))
            .await
    }

    pub async fn set_group_rate(&self, group: &str, period_s: u64) -> Result<GroupCommand> {
        let path = format!("/groups/{}/rate", enc(group));
        self.one(self.request(Method::POST, &path).ndjson([RateRequest { period_s }]))
            .await
    }

    pub async fn group_commands(&self, group: &str) -> Result<Vec<CommandStatus>> {
        self.lines(self.request(Method::GET, &format!("/groups/{}/commands", enc(group))))
            .await
    }

    /// Readings of one channel in `[from, to]`; `to` defaults to the newest.
    pub async fn series(&self, node_id: &str, channel: &str, from: u64, to: Option<u64>) -> Result<Vec<SeriesPoint>> {
        let mut q = vec![
            ("node", node_id.to_string()),
            ("channel", channel.to_string()),
            ("from", from.to_string()),
        ];
        if let Some(to) = to {
            q.push(("to", to.to_string()));
        }
        self.lines(self.request(Method::GET, "/series").query(&q)).await
    }

    pub async fn export_semantic(&self, node_id: &str, seq: u64) -> Result<Vec<Triple>> {
        let req = self
            .request(Method::GET, "/export/semantic")
            .query(&[("node", node_id.to_string()), ("seq", seq.to_string())]);
        let text = self.send(req).await?;
        semantic::parse(&text).map_err(ClientError::Decode)
    }

    pub async fn quarantine(&self) -> Result<Vec<StoredPacket>> {
        self.lines(self.request(Method::GET, "/quarantine")).await
    }

    pub async fn stats(&self) -> Result<Stats> {
        self.one(self.request(Method::GET, "/stats")).await
    }

    pub async fn sim_status(&self) -> Result<LiveStatus> {
        self.one(self.request(Method::GET, "/sim/status")).await
    }

    /// Schedules a fault in the live simulation; returns when it fires.
    pub async fn inject(&self, at_s: Option<u64>, target: &str, fault: FaultKind) -> Result<FaultScheduled> {
        let req = FaultRequest {
            at_s,
            target: target.to_string(),
            fault,
        };
        self.one(self.request(Method::POST, "/sim/faults").ndjson([req])).await
    }
}

trait NdjsonBody {
    fn ndjson<T: Serialize>(self, items: impl IntoIterator<Item = T>) -> Self;
}

impl NdjsonBody for RequestBuilder {
    fn ndjson<T: Serialize>(self, items: impl IntoIterator<Item = T>) -> Self {
        let mut body = String::new();
        for item in items {
            body.push_str(&serde_json::to_string(&item).expect("record serializes"));
            body.push('\n');
        }
        self.header(reqwest::header::CONTENT_TYPE, NDJSON).body(body)
    }
}

fn decode_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ClientError::Decode(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Percent-encodes a path segment.
fn enc(segment: &str) -> String {
    let mut out = String::new();
    for b in segment.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_path_segments() {
        assert_eq!(enc("soil-1"), "soil-1");
        assert_eq!(enc("a b/c"), "a%20b%2Fc");
    }

    #[test]
    fn decodes_lines_skipping_blanks() {
        let v: Vec<PacketKey> =
            decode_lines("{\"node_id\":\"a\",\"seq\":1}\n\n{\"node_id\":\"a\",\"seq\":2}\n").unwrap();
        assert_eq!(v, vec![PacketKey::new("a", 1), PacketKey::new("a", 2)]);
        let err = decode_lines::<PacketKey>("{\"node_id\":\"a\",\"seq\":1}\nnope\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
