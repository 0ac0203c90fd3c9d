//! Two-tier star radio plus the gateway's cellular uplink.
//!
//! Every field node has its own short link to the relay, the relay has one
//! long link to the gateway, and the gateway has one uplink to the cloud.
//! Loss is an independent Bernoulli draw per frame from a stream owned by
//! the link, so the n-th frame on a link always sees the same draw.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::LinkError;
use crate::packet::{Command, NodeId, Packet, PacketKey};
use crate::simkernel::{RngFactory, SimTime};

pub const RELAY: &str = "relay";
pub const GATEWAY: &str = "gateway";
pub const CLOUD: &str = "cloud";

pub fn node_component(id: &NodeId) -> String {
    format!("node:{id}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    Short,
    Long,
    Uplink,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl OutageWindow {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, LinkError> {
        if !(start_s < end_s) {
            return Err(LinkError::BadWindow {
                start: start_s,
                end: end_s,
            });
        }
        Ok(Self { start_s, end_s })
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub class: LinkClass,
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub outages: Vec<OutageWindow>,
    pub latency_s: f64,
}

impl LinkSpec {
    pub fn short() -> Self {
        Self {
            class: LinkClass::Short,
            loss_prob: 0.0,
            outages: vec![],
            latency_s: 0.1,
        }
    }

    pub fn long() -> Self {
        Self {
            class: LinkClass::Long,
            loss_prob: 0.0,
            outages: vec![],
            latency_s: 0.5,
        }
    }

    pub fn uplink() -> Self {
        Self {
            class: LinkClass::Uplink,
            loss_prob: 0.0,
            outages: vec![],
            latency_s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(LinkError::BadLossProb(self.loss_prob));
        }
        for w in &self.outages {
            OutageWindow::new(w.start_s, w.end_s)?;
        }
        Ok(())
    }

    pub fn in_outage(&self, t: f64) -> bool {
        self.outages.iter().any(|w| w.contains(t))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub keys: Vec<PacketKey>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrameBody {
    Packet(Packet),
    Ack(Ack),
    Command { id: u64, node_id: NodeId, command: Command },
    CommandAck { id: u64, node_id: NodeId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub src: String,
    pub dst: String,
    pub body: FrameBody,
    pub t_sent: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub String);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl LinkId {
    pub fn short(node: &NodeId) -> Self {
        LinkId(format!("short:{node}"))
    }

    pub fn long() -> Self {
        LinkId("long".into())
    }

    pub fn uplink() -> Self {
        LinkId("uplink".into())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounters {
    pub frames: u64,
    pub delivered: u64,
    pub lost_random: u64,
    pub lost_outage: u64,
}

impl LinkCounters {
    pub fn lost(&self) -> u64 {
        self.lost_random + self.lost_outage
    }
}

#[derive(Clone, Debug)]
struct Link {
    spec: LinkSpec,
    rng: ChaCha8Rng,
    counters: LinkCounters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub delivered: bool,
    pub arrival: SimTime,
}

/// The strict star topology and its links.
#[derive(Clone, Debug)]
pub struct Radio {
    links: BTreeMap<LinkId, Link>,
}

impl Radio {
    pub fn new<'a>(
        rngs: &RngFactory,
        nodes: impl IntoIterator<Item = &'a NodeId>,
        short: &LinkSpec,
        long: &LinkSpec,
        uplink: &LinkSpec,
    ) -> Result<Self, LinkError> {
        short.validate()?;
        long.validate()?;
        uplink.validate()?;
        let mut links = BTreeMap::new();
        let mut add = |id: LinkId, spec: &LinkSpec| {
            let rng = rngs.fork(&format!("link:{id}"));
            links.insert(
                id,
                Link {
                    spec: spec.clone(),
                    rng,
                    counters: LinkCounters::default(),
                },
            );
        };
        for n in nodes {
            add(LinkId::short(n), short);
        }
        add(LinkId::long(), long);
        add(LinkId::uplink(), uplink);
        Ok(Self { links })
    }

    /// Resolves the link joining two components, in either direction.
    pub fn link_between(&self, src: &str, dst: &str) -> Result<LinkId, LinkError> {
        let id = match (src, dst) {
            (RELAY, GATEWAY) | (GATEWAY, RELAY) => Some(LinkId::long()),
            (GATEWAY, CLOUD) | (CLOUD, GATEWAY) => Some(LinkId::uplink()),
            (RELAY, n) | (n, RELAY) => n.strip_prefix("node:").map(|id| LinkId::short(&NodeId::new(id))),
            _ => None,
        };
        match id {
            Some(id) if self.links.contains_key(&id) => Ok(id),
            _ => Err(LinkError::NoSuchLink {
                src: src.to_string(),
                dst: dst.to_string(),
            }),
        }
    }

    pub fn spec(&self, id: &LinkId) -> Option<&LinkSpec> {
        self.links.get(id).map(|l| &l.spec)
    }

    pub fn counters(&self) -> BTreeMap<LinkId, LinkCounters> {
        self.links.iter().map(|(k, l)| (k.clone(), l.counters)).collect()
    }

    pub fn link_ids(&self) -> impl Iterator<Item = &LinkId> {
        self.links.keys()
    }

    /// Sends one frame. Frames inside an outage are lost outright; otherwise
    /// the link's next Bernoulli draw decides.
    pub fn transmit(&mut self, frame: &Frame, t: SimTime) -> Result<Transmission, LinkError> {
        let id = self.link_between(&frame.src, &frame.dst)?;
        self.transmit_on(&id, t)
    }

    pub fn transmit_on(&mut self, id: &LinkId, t: SimTime) -> Result<Transmission, LinkError> {
        let link = self.links.get_mut(id).ok_or_else(|| LinkError::NoSuchLink {
            src: id.0.clone(),
            dst: String::new(),
        })?;
        // Draw even during outages so later frames see the same stream.
        let draw: f64 = link.rng.random();
        link.counters.frames += 1;
        let delivered = if link.spec.in_outage(t.as_secs_f64()) {
            link.counters.lost_outage += 1;
            false
        } else if draw < link.spec.loss_prob {
            link.counters.lost_random += 1;
            false
        } else {
            link.counters.delivered += 1;
            true
        };
        Ok(Transmission {
            delivered,
            arrival: t.plus_millis((link.spec.latency_s * 1000.0).round() as u64),
        })
    }

    pub fn set_outage(&mut self, id: &LinkId, window: OutageWindow) -> Result<(), LinkError> {
        OutageWindow::new(window.start_s, window.end_s)?;
        let link = self.links.get_mut(id).ok_or_else(|| LinkError::NoSuchLink {
            src: id.0.clone(),
            dst: String::new(),
        })?;
        link.spec.outages.push(window);
        Ok(())
    }

    pub fn in_outage(&self, id: &LinkId, t: SimTime) -> bool {
        self.links.get(id).is_some_and(|l| l.spec.in_outage(t.as_secs_f64()))
    }
}
