//! The mains-powered gateway: a durable dedup store between the long-range
//! link and the intermittent cellular uplink to the cloud.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::log::DurableLog;
use crate::error::QueueError;
use crate::packet::{Packet, PacketKey};
use crate::radiolink::Ack;
use crate::simkernel::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub batch_limit: usize,
    pub upload_interval_s: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            batch_limit: 64,
            upload_interval_s: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UploadState {
    Pending,
    AwaitingCloudAck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewayEntry {
    pub packet: Packet,
    pub state: UploadState,
    pub stored_t: SimTime,
    pub uploads: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GatewayRecord {
    Stored { packet: Packet, t: SimTime },
    Uploaded { keys: Vec<PacketKey>, t: SimTime },
    CloudAcked { keys: Vec<PacketKey> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GatewayState {
    /// Every key ever stored, so retransmissions after pruning stay deduplicated.
    pub seen: BTreeSet<PacketKey>,
    /// Records not yet acknowledged by the cloud.
    pub queue: BTreeMap<PacketKey, GatewayEntry>,
}

impl GatewayState {
    pub fn replay(records: &[GatewayRecord]) -> Self {
        let mut state = Self::default();
        for r in records {
            state.apply(r);
        }
        state
    }

    fn apply(&mut self, rec: &GatewayRecord) {
        match rec {
            GatewayRecord::Stored { packet, t } => {
                let key = packet.key();
                self.seen.insert(key.clone());
                self.queue.insert(
                    key,
                    GatewayEntry {
                        packet: packet.clone(),
                        state: UploadState::Pending,
                        stored_t: *t,
                        uploads: 0,
                    },
                );
            }
            GatewayRecord::Uploaded { keys, .. } => {
                for k in keys {
                    if let Some(e) = self.queue.get_mut(k) {
                        e.state = UploadState::AwaitingCloudAck;
                        e.uploads += 1;
                    }
                }
            }
            GatewayRecord::CloudAcked { keys } => {
                for k in keys {
                    self.queue.remove(k);
                }
            }
        }
    }
}

#[derive(Debug)]
pub struct Gateway {
    config: GatewayConfig,
    state: GatewayState,
    log: DurableLog<GatewayRecord>,
}

impl Gateway {
    pub fn new(config: GatewayConfig, log: DurableLog<GatewayRecord>) -> Self {
        Self {
            config,
            state: GatewayState::default(),
            log,
        }
    }

    pub fn recover(config: GatewayConfig, log: DurableLog<GatewayRecord>, records: &[GatewayRecord]) -> Self {
        Self {
            config,
            state: GatewayState::replay(records),
            log,
        }
    }

    pub fn state(&self) -> &GatewayState {
        &self.state
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn log_mut(&mut self) -> &mut DurableLog<GatewayRecord> {
        &mut self.log
    }

    pub fn into_log(self) -> DurableLog<GatewayRecord> {
        self.log
    }

    fn record(&mut self, rec: GatewayRecord) -> Result<(), QueueError> {
        self.log.append(&rec)?;
        self.state.apply(&rec);
        Ok(())
    }

    /// Stores a packet from the relay unless already seen, and always
    /// acknowledges it so the relay can prune.
    pub fn gateway_ingest(&mut self, packet: &Packet, t: SimTime) -> Result<Ack, QueueError> {
        let key = packet.key();
        if !self.state.seen.contains(&key) {
            self.record(GatewayRecord::Stored {
                packet: packet.clone(),
                t,
            })?;
        }
        Ok(Ack { keys: vec![key] })
    }

    /// Next batch of records the cloud has not acknowledged, in key order.
    pub fn gateway_upload(&mut self, t: SimTime, uplink_available: bool) -> Result<Vec<Packet>, QueueError> {
        if !uplink_available || self.state.queue.is_empty() {
            return Ok(Vec::new());
        }
        let batch: Vec<Packet> = self
            .state
            .queue
            .values()
            .take(self.config.batch_limit)
            .map(|e| e.packet.clone())
            .collect();
        let keys = batch.iter().map(Packet::key).collect();
        self.record(GatewayRecord::Uploaded { keys, t })?;
        Ok(batch)
    }

    pub fn handle_cloud_ack(&mut self, keys: &[PacketKey]) -> Result<(), QueueError> {
        let known: Vec<PacketKey> = keys
            .iter()
            .filter(|k| self.state.queue.contains_key(*k))
            .cloned()
            .collect();
        if !known.is_empty() {
            self.record(GatewayRecord::CloudAcked { keys: known })?;
        }
        Ok(())
    }

    pub fn flush_log(&mut self) -> Result<(), QueueError> {
        self.log.flush()
    }
}
