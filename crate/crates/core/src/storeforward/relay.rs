//! The in-field relay: holds every packet heard from the star until the
//! gateway acknowledges it, and stages downlink commands for nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::log::DurableLog;
use crate::error::QueueError;
use crate::packet::{Command, NodeId, Packet, PacketKey};
use crate::radiolink::Ack;
use crate::simkernel::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayConfig {
    pub capacity: usize,
    pub retry_timeout_s: u64,
    pub batch_limit: usize,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            capacity: 100_000,
            retry_timeout_s: 60,
            batch_limit: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryState {
    Pending,
    SentAwaitingAck,
    Acked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurableEntry {
    pub key: PacketKey,
    pub packet: Packet,
    pub state: EntryState,
    pub last_sent: Option<SimTime>,
    pub attempts: u32,
    /// Arrival order, used to find the oldest entry on eviction.
    pub arrival: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandEntry {
    pub id: u64,
    pub target: NodeId,
    pub command: Command,
    pub issued_t: u64,
    pub delivered: bool,
}

/// One state transition in the relay log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RelayRecord {
    Ingested { packet: Packet, t: SimTime },
    Evicted { key: PacketKey, unacked: bool },
    Sent { key: PacketKey, t: SimTime },
    Acked { key: PacketKey },
    CommandStaged { entry: CommandEntry },
    CommandDelivered { node_id: NodeId, id: u64 },
    ReceiptsForwarded { count: usize },
}

/// Everything the relay must not lose across a restart.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelayState {
    pub entries: BTreeMap<PacketKey, DurableEntry>,
    pub by_arrival: BTreeMap<u64, PacketKey>,
    pub next_arrival: u64,
    pub commands: BTreeMap<NodeId, CommandEntry>,
    /// Delivered commands not yet reported upstream.
    pub receipts: Vec<(NodeId, u64)>,
    /// Unacked entries discarded for lack of space.
    pub data_loss: u64,
    pub evicted_unacked: Vec<PacketKey>,
    /// Keys not yet acknowledged by the gateway; derived on replay.
    #[serde(skip)]
    pub outstanding: BTreeSet<PacketKey>,
}

impl RelayState {
    pub fn replay(records: &[RelayRecord]) -> Self {
        let mut state = Self::default();
        for r in records {
            state.apply(r);
        }
        state
    }

    fn apply(&mut self, rec: &RelayRecord) {
        match rec {
            RelayRecord::Ingested { packet, .. } => {
                let key = packet.key();
                let arrival = self.next_arrival;
                self.next_arrival += 1;
                self.by_arrival.insert(arrival, key.clone());
                self.outstanding.insert(key.clone());
                self.entries.insert(
                    key.clone(),
                    DurableEntry {
                        key,
                        packet: packet.clone(),
                        state: EntryState::Pending,
                        last_sent: None,
                        attempts: 0,
                        arrival,
                    },
                );
            }
            RelayRecord::Evicted { key, unacked } => {
                if let Some(e) = self.entries.remove(key) {
                    self.by_arrival.remove(&e.arrival);
                }
                self.outstanding.remove(key);
                if *unacked {
                    self.data_loss += 1;
                    self.evicted_unacked.push(key.clone());
                }
            }
            RelayRecord::Sent { key, t } => {
                if let Some(e) = self.entries.get_mut(key) {
                    e.state = EntryState::SentAwaitingAck;
                    e.last_sent = Some(*t);
                    e.attempts += 1;
                }
            }
            RelayRecord::Acked { key } => {
                if let Some(e) = self.entries.get_mut(key) {
                    e.state = EntryState::Acked;
                }
                self.outstanding.remove(key);
            }
            RelayRecord::CommandStaged { entry } => {
                self.commands.insert(entry.target.clone(), entry.clone());
            }
            RelayRecord::CommandDelivered { node_id, id } => {
                if self.commands.get(node_id).is_some_and(|c| c.id == *id) {
                    self.commands.remove(node_id);
                    self.receipts.push((node_id.clone(), *id));
                }
            }
            RelayRecord::ReceiptsForwarded { count } => {
                let n = (*count).min(self.receipts.len());
                self.receipts.drain(..n);
            }
        }
    }
}

#[derive(Debug)]
pub struct Relay {
    config: RelayConfig,
    known_nodes: BTreeSet<NodeId>,
    state: RelayState,
    log: DurableLog<RelayRecord>,
}

impl Relay {
    pub fn new(config: RelayConfig, known_nodes: BTreeSet<NodeId>, log: DurableLog<RelayRecord>) -> Self {
        Self {
            config,
            known_nodes,
            state: RelayState::default(),
            log,
        }
    }

    /// Rebuilds the relay from a replayed log.
    pub fn recover(
        config: RelayConfig,
        known_nodes: BTreeSet<NodeId>,
        log: DurableLog<RelayRecord>,
        records: &[RelayRecord],
    ) -> Self {
        Self {
            config,
            known_nodes,
            state: RelayState::replay(records),
            log,
        }
    }

    pub fn state(&self) -> &RelayState {
        &self.state
    }

    pub fn config(&self) -> &RelayConfig {
        &self.config
    }

    pub fn log_mut(&mut self) -> &mut DurableLog<RelayRecord> {
        &mut self.log
    }

    pub fn into_log(self) -> DurableLog<RelayRecord> {
        self.log
    }

    fn record(&mut self, rec: RelayRecord) -> Result<(), QueueError> {
        self.log.append(&rec)?;
        self.state.apply(&rec);
        Ok(())
    }

    /// Unacknowledged entries currently held.
    pub fn unacked(&self) -> impl Iterator<Item = &DurableEntry> {
        self.state.outstanding.iter().map(|k| &self.state.entries[k])
    }

    /// Stores a packet heard from a node. Duplicates are ignored and return
    /// false. At capacity the oldest acked entry makes room; failing that,
    /// the oldest unacked entry is dropped and counted as data loss.
    pub fn relay_ingest(&mut self, packet: &Packet, t: SimTime) -> Result<bool, QueueError> {
        if self.state.entries.contains_key(&packet.key()) {
            return Ok(false);
        }
        if self.state.entries.len() >= self.config.capacity {
            let victim = self
                .state
                .by_arrival
                .values()
                .find(|k| self.state.entries[*k].state == EntryState::Acked)
                .map(|k| (k.clone(), false))
                .or_else(|| self.state.by_arrival.values().next().map(|k| (k.clone(), true)));
            if let Some((key, unacked)) = victim {
                self.record(RelayRecord::Evicted { key, unacked })?;
            }
        }
        self.record(RelayRecord::Ingested {
            packet: packet.clone(),
            t,
        })?;
        Ok(true)
    }

    /// Picks entries due for (re)transmission in key order, up to the batch
    /// limit, and marks them sent.
    pub fn relay_flush(&mut self, t: SimTime) -> Result<Vec<Packet>, QueueError> {
        let timeout = self.config.retry_timeout_s;
        let due: Vec<PacketKey> = self
            .state
            .outstanding
            .iter()
            .map(|k| &self.state.entries[k])
            .filter(|e| match e.state {
                EntryState::Pending => true,
                EntryState::SentAwaitingAck => e.last_sent.is_some_and(|s| s.plus_secs(timeout) <= t),
                EntryState::Acked => false,
            })
            .take(self.config.batch_limit)
            .map(|e| e.key.clone())
            .collect();
        let mut out = Vec::with_capacity(due.len());
        for key in due {
            out.push(self.state.entries[&key].packet.clone());
            self.record(RelayRecord::Sent { key, t })?;
        }
        Ok(out)
    }

    pub fn handle_gateway_ack(&mut self, ack: &Ack) -> Result<(), QueueError> {
        for key in &ack.keys {
            let awaiting = self
                .state
                .entries
                .get(key)
                .is_some_and(|e| e.state != EntryState::Acked);
            if awaiting {
                self.record(RelayRecord::Acked { key: key.clone() })?;
            }
        }
        Ok(())
    }

    /// Replaces any pending command for the target node.
    pub fn stage_command(&mut self, entry: CommandEntry) -> Result<(), QueueError> {
        if !self.known_nodes.contains(&entry.target) {
            return Err(QueueError::UnknownNode(entry.target));
        }
        self.record(RelayRecord::CommandStaged { entry })
    }

    pub fn pending_command(&self, node: &NodeId) -> Option<&CommandEntry> {
        self.state.commands.get(node)
    }

    /// Handles the node's confirmation that it applied a command.
    pub fn command_delivered(&mut self, node: &NodeId, id: u64) -> Result<(), QueueError> {
        if self.state.commands.get(node).is_some_and(|c| c.id == id) {
            self.record(RelayRecord::CommandDelivered {
                node_id: node.clone(),
                id,
            })?;
        }
        Ok(())
    }

    /// Hands delivered-command receipts upstream.
    pub fn take_receipts(&mut self) -> Result<Vec<(NodeId, u64)>, QueueError> {
        let receipts = self.state.receipts.clone();
        if !receipts.is_empty() {
            self.record(RelayRecord::ReceiptsForwarded { count: receipts.len() })?;
        }
        Ok(receipts)
    }

    pub fn flush_log(&mut self) -> Result<(), QueueError> {
        self.log.flush()
    }
}
