//! Cloud ingestion and fleet management.
//!
//! State lives in memory behind secondary indices and is rebuilt at start-up
//! from an append-only record log, the same way the relay and gateway
//! recover. Every mutation is a logged [`CloudRecord`].

pub mod semantic;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::environment::GeoFence;
use crate::error::{CloudError, QueueError};
use crate::fieldnode::power::DutyCycle;
use crate::fieldnode::sensors::ChannelSpec;
use crate::packet::{Command, NodeId, NodeKind, Packet, PacketKey, ReadingValue};
use crate::storeforward::{CommandEntry, DurableLog};

use semantic::Triple;

pub type SharedCloud = Arc<RwLock<CloudCore>>;

pub const LOG_FILE: &str = "cloud.log";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudConfig {
    /// Missed periods before a node counts as silent.
    pub silence_threshold: f64,
    /// Minimum slack above a node's awake time when commanding a period.
    pub min_period_margin_s: u64,
    #[serde(default)]
    pub site_boundary: Option<GeoFence>,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            silence_threshold: 3.0,
            min_period_margin_s: 10,
            site_boundary: None,
        }
    }
}

/// One observation: a single channel of a stored packet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub key: PacketKey,
    pub node_id: NodeId,
    pub t: u64,
    pub channel: String,
    pub value: ReadingValue,
    pub unit: String,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub node_id: NodeId,
    pub kind: NodeKind,
    /// (lat, lon)
    pub position: (f64, f64),
    #[serde(default)]
    pub sensing_attributes: Vec<ChannelSpec>,
    #[serde(default)]
    pub groups: BTreeSet<String>,
    #[serde(default)]
    pub registered_t: u64,
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub duty: DutyCycle,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodePatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensing_attributes: Option<Vec<ChannelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub t: u64,
    pub descriptor: NodeDescriptor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub descriptor: NodeDescriptor,
    pub history: Vec<Edit>,
    /// (since_t, period_s), appended when a period change reaches the node.
    pub period_history: Vec<(u64, u64)>,
}

impl RegistryEntry {
    pub fn current_period(&self) -> u64 {
        self.period_history
            .last()
            .map_or(self.descriptor.duty.period_s(), |(_, p)| *p)
    }

    pub fn period_at(&self, t: u64) -> u64 {
        self.period_history
            .iter()
            .rev()
            .find(|(since, _)| *since <= t)
            .or(self.period_history.first())
            .map_or(self.descriptor.duty.period_s(), |(_, p)| *p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeHealth {
    pub node_id: NodeId,
    pub last_heard: Option<u64>,
    pub battery_mv: Option<u32>,
    pub silent: bool,
    pub period_s: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandState {
    /// Waiting for the gateway to pick it up.
    Issued,
    /// Handed to the relay; waiting for the node's next listen window.
    Staged,
    Delivered,
    /// Replaced by a newer command for the same node before delivery.
    Superseded,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandStatus {
    pub id: u64,
    pub node_id: NodeId,
    pub command: Command,
    pub issued_t: u64,
    pub state: CommandState,
    #[serde(default)]
    pub delivered_t: Option<u64>,
    #[serde(default)]
    pub reason: Option<String>,
}

impl CommandStatus {
    pub fn entry(&self) -> CommandEntry {
        CommandEntry {
            id: self.id,
            target: self.node_id.clone(),
            command: self.command.clone(),
            issued_t: self.issued_t,
            delivered: self.state == CommandState::Delivered,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCommand {
    pub group: String,
    pub period_s: u64,
    pub issued_t: u64,
    /// Command ids, one per member at issue time.
    pub fanout: Vec<(NodeId, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredPacket {
    pub packet: Packet,
    pub ingested_t: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CloudStats {
    pub nodes: usize,
    pub soil_nodes: usize,
    pub livestock_nodes: usize,
    pub packets: usize,
    pub observations: usize,
    pub quarantined: usize,
    pub silent: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CloudRecord {
    Ingested { packet: Packet, t: u64 },
    Quarantined { packet: Packet, t: u64 },
    Registered { descriptor: NodeDescriptor, t: u64 },
    Updated { node_id: NodeId, patch: NodePatch, t: u64 },
    CommandIssued { status: CommandStatus },
    GroupCommandIssued { command: GroupCommand },
    CommandsStaged { ids: Vec<u64> },
    CommandRejected { id: u64, reason: String },
    CommandDelivered { node_id: NodeId, id: u64, t: u64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
struct HealthState {
    last_heard: Option<u64>,
    battery_mv: Option<u32>,
    battery_t: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct CloudState {
    packets: BTreeMap<PacketKey, StoredPacket>,
    series: BTreeMap<(NodeId, String), BTreeMap<(u64, u64), ReadingValue>>,
    observations: usize,
    quarantine: BTreeMap<PacketKey, StoredPacket>,
    registry: BTreeMap<NodeId, RegistryEntry>,
    known_groups: BTreeSet<String>,
    health: BTreeMap<NodeId, HealthState>,
    commands: BTreeMap<u64, CommandStatus>,
    next_command_id: u64,
    group_commands: BTreeMap<String, Vec<GroupCommand>>,
}

impl CloudState {
    fn apply(&mut self, rec: &CloudRecord) {
        match rec {
            CloudRecord::Ingested { packet, t } => {
                let key = packet.key();
                for r in &packet.readings {
                    self.series
                        .entry((packet.node_id.clone(), r.channel.clone()))
                        .or_default()
                        .insert((packet.t, packet.seq), r.value.clone());
                }
                self.observations += packet.readings.len();
                let h = self.health.entry(packet.node_id.clone()).or_default();
                h.last_heard = Some(h.last_heard.map_or(packet.t, |l| l.max(packet.t)));
                if h.battery_t.is_none_or(|bt| packet.t >= bt) {
                    h.battery_t = Some(packet.t);
                    h.battery_mv = Some(packet.battery_mv);
                }
                self.packets.insert(
                    key,
                    StoredPacket {
                        packet: packet.clone(),
                        ingested_t: *t,
                    },
                );
            }
            CloudRecord::Quarantined { packet, t } => {
                self.quarantine.insert(
                    packet.key(),
                    StoredPacket {
                        packet: packet.clone(),
                        ingested_t: *t,
                    },
                );
            }
            CloudRecord::Registered { descriptor, t } => {
                self.known_groups.extend(descriptor.groups.iter().cloned());
                self.registry.insert(
                    descriptor.node_id.clone(),
                    RegistryEntry {
                        descriptor: descriptor.clone(),
                        history: vec![Edit {
                            t: *t,
                            descriptor: descriptor.clone(),
                        }],
                        period_history: vec![(descriptor.registered_t, descriptor.duty.period_s())],
                    },
                );
            }
            CloudRecord::Updated { node_id, patch, t } => {
                if let Some(entry) = self.registry.get_mut(node_id) {
                    let d = &mut entry.descriptor;
                    if let Some(p) = patch.position {
                        d.position = p;
                    }
                    if let Some(s) = &patch.sensing_attributes {
                        d.sensing_attributes = s.clone();
                    }
                    if let Some(g) = &patch.groups {
                        d.groups = g.clone();
                        self.known_groups.extend(g.iter().cloned());
                    }
                    if let Some(n) = &patch.notes {
                        d.notes = n.clone();
                    }
                    entry.history.push(Edit {
                        t: *t,
                        descriptor: d.clone(),
                    });
                }
            }
            CloudRecord::CommandIssued { status } => {
                for c in self.commands.values_mut() {
                    let open = matches!(c.state, CommandState::Issued | CommandState::Staged);
                    if c.node_id == status.node_id && open {
                        c.state = CommandState::Superseded;
                    }
                }
                self.next_command_id = self.next_command_id.max(status.id + 1);
                self.commands.insert(status.id, status.clone());
            }
            CloudRecord::GroupCommandIssued { command } => {
                self.group_commands
                    .entry(command.group.clone())
                    .or_default()
                    .push(command.clone());
            }
            CloudRecord::CommandsStaged { ids } => {
                for id in ids {
                    if let Some(c) = self.commands.get_mut(id) {
                        if c.state == CommandState::Issued {
                            c.state = CommandState::Staged;
                        }
                    }
                }
            }
            CloudRecord::CommandRejected { id, reason } => {
                if let Some(c) = self.commands.get_mut(id) {
                    c.state = CommandState::Rejected;
                    c.reason = Some(reason.clone());
                }
            }
            CloudRecord::CommandDelivered { node_id, id, t } => {
                if let Some(c) = self.commands.get_mut(id) {
                    c.state = CommandState::Delivered;
                    c.delivered_t = Some(*t);
                    if let (Command::SetPeriod { period_s }, Some(entry)) = (&c.command, self.registry.get_mut(node_id))
                    {
                        entry.period_history.push((*t, *period_s));
                    }
                }
            }
        }
    }
}

#[derive(Debug)]
pub struct CloudCore {
    config: CloudConfig,
    state: CloudState,
    log: DurableLog<CloudRecord>,
}

impl CloudCore {
    pub fn in_memory(config: CloudConfig) -> Self {
        Self {
            config,
            state: CloudState::default(),
            log: DurableLog::in_memory(),
        }
    }

    /// Opens the store under `dir`, creating an empty one if absent.
    pub fn open(dir: impl AsRef<Path>, config: CloudConfig) -> Result<Self, CloudError> {
        let (log, records) = DurableLog::open(dir.as_ref().join(LOG_FILE))?;
        Ok(Self::replay(config, log, &records))
    }

    pub fn from_log_bytes(config: CloudConfig, bytes: Vec<u8>) -> Result<Self, CloudError> {
        let (log, records) = DurableLog::from_bytes(bytes)?;
        Ok(Self::replay(config, log, &records))
    }

    /// Read-only reconstruction from already parsed records.
    pub fn from_records(config: CloudConfig, records: &[CloudRecord]) -> Self {
        Self::replay(config, DurableLog::in_memory(), records)
    }

    fn replay(config: CloudConfig, log: DurableLog<CloudRecord>, records: &[CloudRecord]) -> Self {
        let mut state = CloudState::default();
        for r in records {
            state.apply(r);
        }
        Self { config, state, log }
    }

    pub fn into_shared(self) -> SharedCloud {
        Arc::new(RwLock::new(self))
    }

    pub fn config(&self) -> &CloudConfig {
        &self.config
    }

    fn record(&mut self, rec: CloudRecord) -> Result<(), CloudError> {
        self.log.append(&rec)?;
        self.state.apply(&rec);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CloudError> {
        Ok(self.log.flush()?)
    }

    /// Raw log contents; two stores with equal bytes hold equal data.
    pub fn log_bytes(&mut self) -> Result<Vec<u8>, QueueError> {
        self.log.bytes()
    }

    // ---- ingestion ----

    /// Stores each new packet (registered nodes into the main store, others
    /// into quarantine) and acknowledges every key, duplicates included.
    pub fn ingest_batch(&mut self, packets: &[Packet], now: u64) -> Result<Vec<PacketKey>, CloudError> {
        let mut acked = Vec::with_capacity(packets.len());
        for p in packets {
            let key = p.key();
            let seen = self.state.packets.contains_key(&key) || self.state.quarantine.contains_key(&key);
            if !seen {
                let rec = if self.state.registry.contains_key(&p.node_id) {
                    CloudRecord::Ingested {
                        packet: p.clone(),
                        t: now,
                    }
                } else {
                    CloudRecord::Quarantined {
                        packet: p.clone(),
                        t: now,
                    }
                };
                self.record(rec)?;
            }
            acked.push(key);
        }
        self.log.flush()?;
        Ok(acked)
    }

    pub fn contains(&self, key: &PacketKey) -> bool {
        self.state.packets.contains_key(key)
    }

    pub fn packets(&self) -> impl Iterator<Item = &StoredPacket> {
        self.state.packets.values()
    }

    pub fn quarantined(&self) -> impl Iterator<Item = &StoredPacket> {
        self.state.quarantine.values()
    }

    pub fn observations_of(&self, key: &PacketKey) -> Result<Vec<ObservationRecord>, CloudError> {
        let sp = self.state.packets.get(key).ok_or_else(|| CloudError::UnknownKey {
            node: key.node_id.clone(),
            seq: key.seq,
        })?;
        Ok(explode(&sp.packet))
    }

    // ---- registry ----

    fn validate_descriptor(&self, d: &NodeDescriptor) -> Result<(), CloudError> {
        if d.node_id.0.is_empty() || d.node_id.0.contains(char::is_whitespace) {
            return Err(CloudError::Invalid(
                "node id must be non-empty without whitespace".into(),
            ));
        }
        self.validate_position(d.position)?;
        d.duty.validate().map_err(CloudError::Invalid)?;
        Ok(())
    }

    fn validate_position(&self, (lat, lon): (f64, f64)) -> Result<(), CloudError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(CloudError::Invalid(format!("position ({lat}, {lon}) out of range")));
        }
        if let Some(b) = &self.config.site_boundary {
            if !b.contains((lat, lon)) {
                return Err(CloudError::Invalid(format!(
                    "position ({lat}, {lon}) outside the site boundary"
                )));
            }
        }
        Ok(())
    }

    pub fn register_node(&mut self, descriptor: NodeDescriptor, now: u64) -> Result<(), CloudError> {
        if self.state.registry.contains_key(&descriptor.node_id) {
            return Err(CloudError::DuplicateNode(descriptor.node_id));
        }
        self.validate_descriptor(&descriptor)?;
        self.record(CloudRecord::Registered { descriptor, t: now })?;
        self.log.flush()?;
        Ok(())
    }

    pub fn update_node(&mut self, node_id: &NodeId, patch: NodePatch, now: u64) -> Result<NodeDescriptor, CloudError> {
        if !self.state.registry.contains_key(node_id) {
            return Err(CloudError::UnknownNode(node_id.clone()));
        }
        if let Some(p) = patch.position {
            self.validate_position(p)?;
        }
        self.record(CloudRecord::Updated {
            node_id: node_id.clone(),
            patch,
            t: now,
        })?;
        self.log.flush()?;
        Ok(self.state.registry[node_id].descriptor.clone())
    }

    pub fn node(&self, node_id: &NodeId) -> Result<&RegistryEntry, CloudError> {
        self.state
            .registry
            .get(node_id)
            .ok_or_else(|| CloudError::UnknownNode(node_id.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.state.registry.values()
    }

    pub fn group_members(&self, group: &str) -> Vec<NodeId> {
        self.state
            .registry
            .values()
            .filter(|e| e.descriptor.groups.contains(group))
            .map(|e| e.descriptor.node_id.clone())
            .collect()
    }

    // ---- commands ----

    fn issue(&mut self, node_id: &NodeId, command: Command, now: u64) -> Result<u64, CloudError> {
        let id = self.state.next_command_id;
        self.record(CloudRecord::CommandIssued {
            status: CommandStatus {
                id,
                node_id: node_id.clone(),
                command,
                issued_t: now,
                state: CommandState::Issued,
                delivered_t: None,
                reason: None,
            },
        })?;
        Ok(id)
    }

    /// Fans a period change out to the group's members as of now. Nodes
    /// joining the group later are not commanded.
    pub fn set_group_rate(&mut self, group: &str, period_s: u64, now: u64) -> Result<GroupCommand, CloudError> {
        let members = self.group_members(group);
        if members.is_empty() {
            return Err(if self.state.known_groups.contains(group) {
                CloudError::EmptyGroup(group.to_string())
            } else {
                CloudError::UnknownGroup(group.to_string())
            });
        }
        let minimum_s = members
            .iter()
            .map(|n| self.state.registry[n].descriptor.duty.awake_s + self.config.min_period_margin_s)
            .max()
            .unwrap_or(0);
        if period_s < minimum_s {
            return Err(CloudError::PeriodTooShort { period_s, minimum_s });
        }
        let mut fanout = Vec::with_capacity(members.len());
        for n in members {
            let id = self.issue(&n, Command::SetPeriod { period_s }, now)?;
            fanout.push((n, id));
        }
        let command = GroupCommand {
            group: group.to_string(),
            period_s,
            issued_t: now,
            fanout,
        };
        self.record(CloudRecord::GroupCommandIssued {
            command: command.clone(),
        })?;
        self.log.flush()?;
        Ok(command)
    }

    /// Issues a single-node command (power cycle or period change).
    pub fn command_node(&mut self, node_id: &NodeId, command: Command, now: u64) -> Result<CommandStatus, CloudError> {
        let entry = self.node(node_id)?;
        if let Command::SetPeriod { period_s } = command {
            let minimum_s = entry.descriptor.duty.awake_s + self.config.min_period_margin_s;
            if period_s < minimum_s {
                return Err(CloudError::PeriodTooShort { period_s, minimum_s });
            }
        }
        let id = self.issue(node_id, command, now)?;
        self.log.flush()?;
        Ok(self.state.commands[&id].clone())
    }

    pub fn group_commands(&self, group: &str) -> Result<Vec<CommandStatus>, CloudError> {
        if !self.state.known_groups.contains(group) {
            return Err(CloudError::UnknownGroup(group.to_string()));
        }
        Ok(self
            .state
            .group_commands
            .get(group)
            .into_iter()
            .flatten()
            .flat_map(|gc| gc.fanout.iter().map(|(_, id)| self.state.commands[id].clone()))
            .collect())
    }

    pub fn node_commands(&self, node_id: &NodeId) -> Vec<CommandStatus> {
        self.state
            .commands
            .values()
            .filter(|c| &c.node_id == node_id)
            .cloned()
            .collect()
    }

    pub fn command(&self, id: u64) -> Option<&CommandStatus> {
        self.state.commands.get(&id)
    }

    /// Commands waiting for the gateway, oldest first.
    pub fn outbox(&self) -> Vec<CommandEntry> {
        self.state
            .commands
            .values()
            .filter(|c| c.state == CommandState::Issued)
            .map(CommandStatus::entry)
            .collect()
    }

    pub fn mark_staged(&mut self, ids: Vec<u64>) -> Result<(), CloudError> {
        if !ids.is_empty() {
            self.record(CloudRecord::CommandsStaged { ids })?;
        }
        Ok(())
    }

    pub fn mark_rejected(&mut self, id: u64, reason: String) -> Result<(), CloudError> {
        self.record(CloudRecord::CommandRejected { id, reason })
    }

    pub fn mark_delivered(&mut self, node_id: &NodeId, id: u64, now: u64) -> Result<(), CloudError> {
        let open = self
            .state
            .commands
            .get(&id)
            .is_some_and(|c| c.state != CommandState::Delivered);
        if open {
            self.record(CloudRecord::CommandDelivered {
                node_id: node_id.clone(),
                id,
                t: now,
            })?;
        }
        Ok(())
    }

    // ---- health ----

    pub fn node_health(&self, node_id: &NodeId, now: u64) -> Result<NodeHealth, CloudError> {
        let entry = self.node(node_id)?;
        let period_s = entry.current_period();
        let h = self.state.health.get(node_id).cloned().unwrap_or_default();
        let silent = match h.last_heard {
            None => true,
            Some(last) => now.saturating_sub(last) as f64 > self.config.silence_threshold * period_s as f64,
        };
        Ok(NodeHealth {
            node_id: node_id.clone(),
            last_heard: h.last_heard,
            battery_mv: h.battery_mv,
            silent,
            period_s,
        })
    }

    pub fn silent_nodes(&self, now: u64) -> Vec<NodeHealth> {
        self.state
            .registry
            .keys()
            .filter_map(|n| self.node_health(n, now).ok())
            .filter(|h| h.silent)
            .collect()
    }

    pub fn stats(&self, now: u64) -> CloudStats {
        let count = |k| self.state.registry.values().filter(|e| e.descriptor.kind == k).count();
        CloudStats {
            nodes: self.state.registry.len(),
            soil_nodes: count(NodeKind::Soil),
            livestock_nodes: count(NodeKind::Livestock),
            packets: self.state.packets.len(),
            observations: self.state.observations,
            quarantined: self.state.quarantine.len(),
            silent: self.silent_nodes(now).len(),
        }
    }

    // ---- queries ----

    pub fn query_series(
        &self,
        node_id: &NodeId,
        channel: &str,
        from: u64,
        to: u64,
    ) -> Result<Vec<(u64, ReadingValue)>, CloudError> {
        if from > to {
            return Err(CloudError::BadRange { from, to });
        }
        let series = self.state.series.get(&(node_id.clone(), channel.to_string()));
        if series.is_none() {
            let entry = self.node(node_id)?;
            if !entry.descriptor.sensing_attributes.iter().any(|c| c.id == channel) {
                return Err(CloudError::UnknownChannel {
                    node: node_id.clone(),
                    channel: channel.to_string(),
                });
            }
            return Ok(Vec::new());
        }
        Ok(series
            .into_iter()
            .flat_map(|s| s.range((from, 0)..=(to, u64::MAX)))
            .map(|((t, _), v)| (*t, v.clone()))
            .collect())
    }

    pub fn export_semantic(&self, key: &PacketKey) -> Result<Vec<Triple>, CloudError> {
        let records = self.observations_of(key)?;
        let descriptor = self.state.registry.get(&key.node_id).map(|e| &e.descriptor);
        let mut out = Vec::new();
        for r in records {
            let obs = format!("obs:{}/{}/{}", r.node_id, r.key.seq, r.channel);
            let sensor = format!("sensor:{}/{}", r.node_id, r.channel);
            let spec = descriptor.and_then(|d| d.sensing_attributes.iter().find(|c| c.id == r.channel));
            let grade = spec.map_or("unknown".to_string(), |s| s.grade.to_string());
            let property = spec.map_or_else(
                || r.channel.split('.').next().unwrap_or_default().to_string(),
                |s| s.kind.name().to_string(),
            );
            out.push(Triple::name(&obs, "rdf:type", "sosa:Observation"));
            out.push(Triple::name(&obs, "sosa:madeBySensor", &sensor));
            out.push(Triple::literal(&sensor, "fn:grade", grade));
            out.push(Triple::name(&obs, "sosa:observedProperty", format!("prop:{property}")));
            out.push(Triple::literal(&obs, "sosa:hasSimpleResult", r.value.to_string()));
            out.push(Triple::literal(&obs, "qudt:unit", r.unit.clone()));
            out.push(Triple::literal(&obs, "sosa:resultTime", r.t.to_string()));
            if let Some(d) = descriptor {
                out.push(Triple::literal(
                    &obs,
                    "geo:location",
                    format!("{} {}", d.position.0, d.position.1),
                ));
            }
        }
        Ok(out)
    }
}

/// Splits a packet into per-channel observation records.
pub fn explode(p: &Packet) -> Vec<ObservationRecord> {
    p.readings
        .iter()
        .map(|r| ObservationRecord {
            key: p.key(),
            node_id: p.node_id.clone(),
            t: p.t,
            channel: r.channel.clone(),
            value: r.value.clone(),
            unit: r.unit.clone(),
            kind: p.kind,
        })
        .collect()
}
