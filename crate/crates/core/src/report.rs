//! Run accounting, computed only from persisted state.
//!
//! The same [`RunReport::build`] runs at the end of a simulation and when a
//! store directory is re-read later, so both paths agree by construction as
//! long as the store round-trips.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloudcore::{CloudConfig, CloudCore, CloudRecord};
use crate::error::RunError;
use crate::packet::{NodeId, NodeKind, PacketKey};
use crate::radiolink::{LinkCounters, LinkId};
use crate::storeforward::gateway::GatewayState;
use crate::storeforward::relay::RelayState;
use crate::storeforward::{DurableLog, EntryState, GatewayRecord, RelayRecord};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RELAY_LOG: &str = "relay.log";
pub const GATEWAY_LOG: &str = "gateway.log";

/// Node-side facts that never reach a queue: how much was emitted, what the
/// short link dropped, battery history.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeManifest {
    pub kind: Option<NodeKind>,
    pub emitted: u64,
    /// Packet frames lost on the node's short link.
    pub radio_lost: u64,
    /// Frames that reached the relay while it was down.
    pub dropped_at_relay: u64,
    /// Sequence numbers still travelling to the relay when the run ended.
    pub in_flight: Vec<u64>,
    pub depleted_at: Option<u64>,
    /// (t, available mAh), hourly.
    pub battery: Vec<(u64, f64)>,
    pub period_s: u64,
    pub consumed_mah: f64,
    pub harvested_mah: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub t: u64,
    pub component: String,
    pub downtime_s: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub duration_s: u64,
    pub end_s: u64,
    pub silence_threshold: f64,
    pub nodes: BTreeMap<NodeId, NodeManifest>,
    pub links: BTreeMap<LinkId, LinkCounters>,
    pub restarts: Vec<RestartRecord>,
    /// Faults or commands that were rejected during the run.
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub emitted: u64,
    /// In the cloud store, quarantined records included.
    pub delivered: u64,
    pub link_lost: u64,
    pub evicted: u64,
    pub in_relay: u64,
    pub in_gateway: u64,
    pub in_flight: u64,
    /// emitted minus every other bucket; zero when the books close.
    pub unaccounted: i64,
    pub yield_: f64,
}

impl Accounting {
    fn close(&mut self) {
        let parts = self.delivered + self.link_lost + self.evicted + self.in_relay + self.in_gateway + self.in_flight;
        self.unaccounted = self.emitted as i64 - parts as i64;
        self.yield_ = if self.emitted == 0 {
            0.0
        } else {
            self.delivered as f64 / self.emitted as f64
        };
    }

    fn add(&mut self, o: &Accounting) {
        self.emitted += o.emitted;
        self.delivered += o.delivered;
        self.link_lost += o.link_lost;
        self.evicted += o.evicted;
        self.in_relay += o.in_relay;
        self.in_gateway += o.in_gateway;
        self.in_flight += o.in_flight;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub kind: Option<NodeKind>,
    #[serde(flatten)]
    pub accounting: Accounting,
    pub quarantined: u64,
    /// Cloud records for this node sorted by time are also sorted by seq.
    pub seq_ordered: bool,
    pub depletion_h: Option<f64>,
    pub period_s: u64,
    pub silent_episodes: Vec<(u64, u64)>,
    pub battery: Vec<(u64, f64)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub count: u64,
    pub p50_s: u64,
    pub p95_s: u64,
    pub p99_s: u64,
    pub max_s: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueReport {
    pub relay_unacked: u64,
    pub relay_retained: u64,
    pub relay_data_loss: u64,
    pub relay_commands_pending: u64,
    pub gateway_queued: u64,
    pub gateway_stored: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub duration_s: u64,
    pub end_s: u64,
    pub totals: Accounting,
    pub quarantined: u64,
    pub latency: Latency,
    pub queues: QueueReport,
    pub links: BTreeMap<LinkId, LinkCounters>,
    pub restarts: Vec<RestartRecord>,
    pub errors: Vec<String>,
    pub nodes: BTreeMap<NodeId, NodeReport>,
}

impl RunReport {
    pub fn build(manifest: &RunManifest, cloud: &CloudCore, relay: &RelayState, gateway: &GatewayState) -> Self {
        let mut node_ids: BTreeSet<NodeId> = manifest.nodes.keys().cloned().collect();
        node_ids.extend(cloud.nodes().map(|e| e.descriptor.node_id.clone()));
        node_ids.extend(cloud.packets().map(|p| p.packet.node_id.clone()));
        node_ids.extend(cloud.quarantined().map(|p| p.packet.node_id.clone()));

        let quarantined: BTreeSet<PacketKey> = cloud.quarantined().map(|p| p.packet.key()).collect();
        let evicted: BTreeSet<&PacketKey> = relay.evicted_unacked.iter().collect();
        let mut latencies: Vec<u64> = cloud
            .packets()
            .map(|p| p.ingested_t.saturating_sub(p.packet.t))
            .collect();
        latencies.sort_unstable();

        let mut nodes = BTreeMap::new();
        let mut totals = Accounting::default();
        for id in node_ids {
            let m = manifest.nodes.get(&id).cloned().unwrap_or_default();
            let in_flight: BTreeSet<u64> = m.in_flight.iter().copied().collect();
            let mut a = Accounting {
                link_lost: m.radio_lost + m.dropped_at_relay,
                ..Accounting::default()
            };
            let mut q = 0;
            let max_seen = cloud
                .packets()
                .chain(cloud.quarantined())
                .filter(|p| p.packet.node_id == id)
                .map(|p| p.packet.seq + 1)
                .max()
                .unwrap_or(0);
            a.emitted = m.emitted.max(max_seen);
            for seq in 0..a.emitted {
                let key = PacketKey::new(id.clone(), seq);
                if cloud.contains(&key) {
                    a.delivered += 1;
                } else if quarantined.contains(&key) {
                    a.delivered += 1;
                    q += 1;
                } else if gateway.queue.contains_key(&key) {
                    a.in_gateway += 1;
                } else if relay.entries.get(&key).is_some_and(|e| e.state != EntryState::Acked) {
                    a.in_relay += 1;
                } else if evicted.contains(&key) {
                    a.evicted += 1;
                } else if in_flight.contains(&seq) {
                    a.in_flight += 1;
                }
            }
            a.close();
            totals.add(&a);
            let (seq_ordered, silent_episodes, period_s) = heard_pattern(cloud, &id, manifest, m.period_s);
            let kind = m.kind.or_else(|| cloud.node(&id).ok().map(|e| e.descriptor.kind));
            nodes.insert(
                id,
                NodeReport {
                    kind,
                    accounting: a,
                    quarantined: q,
                    seq_ordered,
                    depletion_h: m.depleted_at.map(|t| t as f64 / 3600.0),
                    period_s,
                    silent_episodes,
                    battery: m.battery,
                },
            );
        }
        totals.close();

        let retained = relay.entries.len() as u64;
        let relay_unacked = relay.outstanding.len() as u64;
        RunReport {
            seed: manifest.seed,
            duration_s: manifest.duration_s,
            end_s: manifest.end_s,
            totals,
            quarantined: quarantined.len() as u64,
            latency: latency(&latencies),
            queues: QueueReport {
                relay_unacked,
                relay_retained: retained,
                relay_data_loss: relay.data_loss,
                relay_commands_pending: relay.commands.len() as u64,
                gateway_queued: gateway.queue.len() as u64,
                gateway_stored: gateway.seen.len() as u64,
            },
            links: manifest.links.clone(),
            restarts: manifest.restarts.clone(),
            errors: manifest.errors.clone(),
            nodes,
        }
    }

    /// Recomputes the report of a finished run from its store directory
    /// without modifying it. A directory with no files yields an all-zero
    /// report.
    pub fn from_store(dir: impl AsRef<Path>) -> Result<Self, RunError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(RunError::Report(format!("store {} does not exist", dir.display())));
        }
        let manifest: RunManifest = match std::fs::read(dir.join(MANIFEST_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| RunError::Report(format!("{}: {e}", dir.join(MANIFEST_FILE).display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => RunManifest::default(),
            Err(e) => return Err(e.into()),
        };
        let config = CloudConfig {
            silence_threshold: if manifest.silence_threshold > 0.0 {
                manifest.silence_threshold
            } else {
                CloudConfig::default().silence_threshold
            },
            ..CloudConfig::default()
        };
        let cloud = CloudCore::from_records(
            config,
            &read_or_empty::<CloudRecord>(&dir.join(crate::cloudcore::LOG_FILE))?,
        );
        let relay = RelayState::replay(&read_or_empty::<RelayRecord>(&dir.join(RELAY_LOG))?);
        let gateway = GatewayState::replay(&read_or_empty::<GatewayRecord>(&dir.join(GATEWAY_LOG))?);
        Ok(Self::build(&manifest, &cloud, &relay, &gateway))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// True when every node's books close exactly.
    pub fn closure_holds(&self) -> bool {
        self.nodes.values().all(|n| n.accounting.unaccounted == 0) && self.totals.unaccounted == 0
    }

    /// Short human-readable digest.
    pub fn summary(&self) -> String {
        let t = &self.totals;
        let mut out = format!(
            "emitted {} delivered {} lost {} evicted {} queued {} (relay {}, gateway {}, in flight {})\n\
             yield {:.4}  latency p50 {} s  p95 {} s  max {} s  quarantined {}\n",
            t.emitted,
            t.delivered,
            t.link_lost,
            t.evicted,
            t.in_relay + t.in_gateway + t.in_flight,
            t.in_relay,
            t.in_gateway,
            t.in_flight,
            t.yield_,
            self.latency.p50_s,
            self.latency.p95_s,
            self.latency.max_s,
            self.quarantined,
        );
        for (id, n) in &self.nodes {
            let depletion = n.depletion_h.map_or("-".to_string(), |h| format!("{h:.1} h"));
            out.push_str(&format!(
                "  {id:<12} emitted {:>6} delivered {:>6} lost {:>5} yield {:.4} depleted {depletion} silent episodes {}\n",
                n.accounting.emitted,
                n.accounting.delivered,
                n.accounting.link_lost,
                n.accounting.yield_,
                n.silent_episodes.len(),
            ));
        }
        if !self.closure_holds() {
            out.push_str("accounting does not close\n");
        }
        out
    }
}

fn read_or_empty<E: Serialize + serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<E>, RunError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(DurableLog::<E>::read(path)?)
}

fn latency(sorted: &[u64]) -> Latency {
    let rank = |p: f64| {
        if sorted.is_empty() {
            0
        } else {
            let i = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
            sorted[i]
        }
    };
    Latency {
        count: sorted.len() as u64,
        p50_s: rank(0.50),
        p95_s: rank(0.95),
        p99_s: rank(0.99),
        max_s: sorted.last().copied().unwrap_or(0),
    }
}

/// Seq ordering of the node's cloud records, silent stretches between
/// consecutive packets, and the node's final period.
fn heard_pattern(
    cloud: &CloudCore,
    id: &NodeId,
    manifest: &RunManifest,
    fallback_period: u64,
) -> (bool, Vec<(u64, u64)>, u64) {
    let mut heard: Vec<(u64, u64)> = cloud
        .packets()
        .filter(|p| &p.packet.node_id == id)
        .map(|p| (p.packet.t, p.packet.seq))
        .collect();
    heard.sort_unstable();
    let seq_ordered = heard.windows(2).all(|w| w[0].1 < w[1].1);
    let Ok(entry) = cloud.node(id) else {
        return (seq_ordered, Vec::new(), fallback_period);
    };
    let threshold = cloud.config().silence_threshold;
    let mut episodes = Vec::new();
    let mut check = |from: u64, to: u64| {
        let limit = (threshold * entry.period_at(from) as f64).floor() as u64;
        if to.saturating_sub(from) > limit {
            episodes.push((from + limit, to));
        }
    };
    for w in heard.windows(2) {
        check(w[0].0, w[1].0);
    }
    if let Some(&(last, _)) = heard.last() {
        check(last, manifest.duration_s);
    }
    (seq_ordered, episodes, entry.current_period())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<u64> = (1..=100).collect();
        let l = latency(&v);
        assert_eq!((l.p50_s, l.p95_s, l.p99_s, l.max_s, l.count), (50, 95, 99, 100, 100));
        assert_eq!(latency(&[]), Latency::default());
    }

    #[test]
    fn empty_store_gives_zero_report() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunReport::from_store(dir.path()).unwrap();
        assert_eq!(r.totals.emitted, 0);
        assert!(r.nodes.is_empty());
        assert!(r.closure_holds());
        assert!(RunReport::from_store(dir.path().join("missing")).is_err());
    }
}
