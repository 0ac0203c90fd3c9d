//! Scenario files: TOML with a `format = 1` header.
//!
//! ```toml
//! format = 1
//! seed = 7
//! duration_s = 1209600
//!
//! [[nodes]]
//! id = "soil"
//! kind = "soil"
//! count = 4
//!
//! [[faults]]
//! at_s = 86400
//! target = "soil-2"
//! kind = "radio_hang"
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloudcore::{CloudConfig, NodeDescriptor};
use crate::environment::{offset_position, DiurnalCycle, GeoFence, SheepParams, SoilParams, Storm, WeatherScenario};
use crate::error::ScenarioError;
use crate::faults::FaultKind;
use crate::fieldnode::livestock::GpsConfig;
use crate::fieldnode::power::{BatteryBank, Pack};
use crate::fieldnode::sensors::SensorComplement;
use crate::fieldnode::NodeConfig;
use crate::packet::{Command, NodeId, NodeKind};
use crate::radiolink::{LinkSpec, OutageWindow, GATEWAY, RELAY};
use crate::storeforward::{GatewayConfig, RelayConfig};

pub const FORMAT_VERSION: u32 = 1;
const DAY_S: u64 = 86_400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: u32,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: u64,
    /// Extra time after the nodes stop during which the infrastructure
    /// keeps draining its queues.
    #[serde(default = "default_drain")]
    pub drain_s: u64,
    /// Simulated seconds per wall-clock second in live mode.
    #[serde(default = "default_compression")]
    pub time_compression: f64,
    #[serde(default = "default_silence")]
    pub silence_threshold: f64,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: LinksSpec,
    #[serde(default)]
    pub queue: QueueSpec,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub commands: Vec<CommandSpec>,
}

fn default_drain() -> u64 {
    DAY_S
}

fn default_compression() -> f64 {
    1.0
}

fn default_silence() -> f64 {
    3.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherPreset {
    #[default]
    StormSeason,
    Calm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub weather: WeatherPreset,
    /// Appended to the preset's storms.
    #[serde(default)]
    pub storms: Vec<Storm>,
    #[serde(default)]
    pub air_temp: Option<DiurnalCycle>,
    #[serde(default)]
    pub humidity: Option<DiurnalCycle>,
    #[serde(default = "yes")]
    pub daylight: bool,
    #[serde(default)]
    pub soil: SoilParams,
    #[serde(default = "default_moisture")]
    pub initial_moisture: f64,
    #[serde(default = "default_soil_temp")]
    pub initial_soil_temp: f64,
    /// Grazing paddock as (lat, lon) vertices.
    #[serde(default)]
    pub fence: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub sheep: SheepParams,
    #[serde(default = "default_step")]
    pub step_s: u64,
}

fn yes() -> bool {
    true
}

fn default_moisture() -> f64 {
    0.30
}

fn default_soil_temp() -> f64 {
    7.0
}

fn default_step() -> u64 {
    60
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            weather: WeatherPreset::default(),
            storms: Vec::new(),
            air_temp: None,
            humidity: None,
            daylight: true,
            soil: SoilParams::default(),
            initial_moisture: default_moisture(),
            initial_soil_temp: default_soil_temp(),
            fence: None,
            sheep: SheepParams::default(),
            step_s: default_step(),
        }
    }
}

impl EnvironmentSpec {
    pub fn weather(&self, duration_s: u64) -> WeatherScenario {
        let mut w = match self.weather {
            WeatherPreset::StormSeason => WeatherScenario::storm_season(duration_s.div_ceil(DAY_S)),
            WeatherPreset::Calm => WeatherScenario::default(),
        };
        w.storms.extend(self.storms.iter().cloned());
        if let Some(c) = self.air_temp {
            w.air_temp = c;
        }
        if let Some(c) = self.humidity {
            w.humidity = c;
        }
        w.daylight = self.daylight;
        w
    }

    pub fn fence(&self) -> GeoFence {
        self.fence
            .clone()
            .map_or_else(GeoFence::field_of_study, |polygon| GeoFence { polygon })
    }
}

/// One node, or `count` identical nodes named `<id>-1` .. `<id>-<count>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sleep_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awake_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_ma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sleep_ma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack_capacity_mah: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_cutoff_mah: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solar_trickle_ma: Option<f64>,
    #[serde(default)]
    pub reference_probe: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gps: Option<GpsConfig>,
    /// Unregistered nodes still transmit; the cloud quarantines their data.
    #[serde(default = "yes")]
    pub register: bool,
}

impl NodeSpec {
    pub fn new(id: &str, kind: NodeKind) -> Self {
        Self {
            id: id.to_string(),
            kind,
            count: None,
            position: None,
            groups: None,
            sleep_s: None,
            awake_s: None,
            active_ma: None,
            sleep_ma: None,
            packs: None,
            pack_capacity_mah: None,
            lower_cutoff_mah: None,
            solar_trickle_ma: None,
            reference_probe: false,
            gps: None,
            register: true,
        }
    }

    pub fn ids(&self) -> Vec<String> {
        match self.count {
            None => vec![self.id.clone()],
            Some(n) => (1..=n).map(|i| format!("{}-{i}", self.id)).collect(),
        }
    }

    fn config(&self, id: &str, position: (f64, f64)) -> NodeConfig {
        let mut c = match self.kind {
            NodeKind::Soil => NodeConfig::soil(id, position),
            NodeKind::Livestock => NodeConfig::livestock(id, position),
        };
        if let Some(g) = &self.groups {
            c.groups = g.iter().cloned().collect();
        }
        if let Some(s) = self.sleep_s {
            c.duty.sleep_s = s;
        }
        if let Some(a) = self.awake_s {
            c.duty.awake_s = a;
        }
        if let Some(a) = self.active_ma {
            c.power.active_ma = a;
        }
        if let Some(s) = self.sleep_ma {
            c.power.sleep_ma = s;
        }
        let packs = self.packs.unwrap_or(c.bank.packs.len());
        let capacity = self.pack_capacity_mah.unwrap_or(c.bank.packs[0].capacity_mah);
        let solar = self.solar_trickle_ma.unwrap_or(c.bank.solar_trickle_ma);
        let mut pack = Pack::full(capacity);
        if let Some(cut) = self.lower_cutoff_mah {
            pack.lower_cutoff_mah = cut;
        }
        let mut bank = BatteryBank::new(vec![pack; packs], solar);
        bank.pack_empty_mv = c.bank.pack_empty_mv;
        bank.pack_full_mv = c.bank.pack_full_mv;
        c.bank = bank;
        if self.reference_probe && self.kind == NodeKind::Soil {
            c.complement = SensorComplement::soil_default(true);
        }
        if let Some(g) = self.gps {
            c.gps = g;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageSpec {
    /// `uplink`, `long` or `short:<node id>`.
    pub link: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinksSpec {
    #[serde(default)]
    pub short_loss: f64,
    #[serde(default)]
    pub long_loss: f64,
    #[serde(default)]
    pub uplink_loss: f64,
    #[serde(default = "short_latency")]
    pub short_latency_s: f64,
    #[serde(default = "long_latency")]
    pub long_latency_s: f64,
    #[serde(default = "uplink_latency")]
    pub uplink_latency_s: f64,
    #[serde(default)]
    pub outages: Vec<OutageSpec>,
}

fn short_latency() -> f64 {
    LinkSpec::short().latency_s
}

fn long_latency() -> f64 {
    LinkSpec::long().latency_s
}

fn uplink_latency() -> f64 {
    LinkSpec::uplink().latency_s
}

impl Default for LinksSpec {
    fn default() -> Self {
        Self {
            short_loss: 0.0,
            long_loss: 0.0,
            uplink_loss: 0.0,
            short_latency_s: short_latency(),
            long_latency_s: long_latency(),
            uplink_latency_s: uplink_latency(),
            outages: Vec::new(),
        }
    }
}

impl LinksSpec {
    pub fn short(&self) -> LinkSpec {
        LinkSpec {
            loss_prob: self.short_loss,
            latency_s: self.short_latency_s,
            ..LinkSpec::short()
        }
    }

    pub fn long(&self) -> LinkSpec {
        LinkSpec {
            loss_prob: self.long_loss,
            latency_s: self.long_latency_s,
            ..LinkSpec::long()
        }
    }

    pub fn uplink(&self) -> LinkSpec {
        LinkSpec {
            loss_prob: self.uplink_loss,
            latency_s: self.uplink_latency_s,
            ..LinkSpec::uplink()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSpec {
    #[serde(default = "relay_capacity")]
    pub relay_capacity: usize,
    #[serde(default = "retry_timeout")]
    pub retry_timeout_s: u64,
    #[serde(default = "batch_limit")]
    pub batch_limit: usize,
    #[serde(default = "batch_limit")]
    pub gateway_batch_limit: usize,
    #[serde(default = "upload_interval")]
    pub upload_interval_s: u64,
    #[serde(default = "relay_flush")]
    pub relay_flush_s: u64,
}

fn relay_capacity() -> usize {
    RelayConfig::default().capacity
}

fn retry_timeout() -> u64 {
    RelayConfig::default().retry_timeout_s
}

fn batch_limit() -> usize {
    RelayConfig::default().batch_limit
}

fn upload_interval() -> u64 {
    GatewayConfig::default().upload_interval_s
}

fn relay_flush() -> u64 {
    10
}

impl Default for QueueSpec {
    fn default() -> Self {
        Self {
            relay_capacity: relay_capacity(),
            retry_timeout_s: retry_timeout(),
            batch_limit: batch_limit(),
            gateway_batch_limit: batch_limit(),
            upload_interval_s: upload_interval(),
            relay_flush_s: relay_flush(),
        }
    }
}

impl QueueSpec {
    pub fn relay(&self) -> RelayConfig {
        RelayConfig {
            capacity: self.relay_capacity,
            retry_timeout_s: self.retry_timeout_s,
            batch_limit: self.batch_limit,
        }
    }

    pub fn gateway(&self) -> GatewayConfig {
        GatewayConfig {
            batch_limit: self.gateway_batch_limit,
            upload_interval_s: self.upload_interval_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub at_s: u64,
    /// A node id, `relay`, `gateway`, or a link name.
    pub target: String,
    #[serde(flatten)]
    pub fault: FaultKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub at_s: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(flatten)]
    pub command: Command,
}

/// What a fault or outage is aimed at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Node(NodeId),
    Relay,
    Gateway,
    Uplink,
    Long,
    Short(NodeId),
}

impl Scenario {
    /// The reference deployment: four soil stations and five collared
    /// sheep for two weeks of storm-season weather over lossless links.
    pub fn default_deployment() -> Self {
        Self {
            format: FORMAT_VERSION,
            seed: 1,
            duration_s: 14 * DAY_S,
            drain_s: default_drain(),
            time_compression: default_compression(),
            silence_threshold: default_silence(),
            environment: EnvironmentSpec::default(),
            nodes: vec![
                NodeSpec {
                    count: Some(4),
                    ..NodeSpec::new("soil", NodeKind::Soil)
                },
                NodeSpec {
                    count: Some(5),
                    ..NodeSpec::new("sheep", NodeKind::Livestock)
                },
            ],
            links: LinksSpec::default(),
            queue: QueueSpec::default(),
            faults: Vec::new(),
            commands: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ScenarioError::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn end_s(&self) -> u64 {
        self.duration_s + self.drain_s
    }

    pub fn cloud_config(&self) -> CloudConfig {
        CloudConfig {
            silence_threshold: self.silence_threshold,
            ..CloudConfig::default()
        }
    }

    /// Expanded node configurations, with default positions laid out
    /// across the paddock for nodes that do not give one.
    pub fn node_configs(&self) -> Vec<NodeConfig> {
        let centre = self.environment.fence().centroid();
        let mut out = Vec::new();
        let (mut soil_i, mut sheep_i) = (0u32, 0u32);
        for spec in &self.nodes {
            for id in spec.ids() {
                let position = spec.position.unwrap_or_else(|| match spec.kind {
                    NodeKind::Soil => {
                        soil_i += 1;
                        offset_position(centre, -120.0 + 60.0 * f64::from(soil_i), -60.0)
                    }
                    NodeKind::Livestock => {
                        sheep_i += 1;
                        let a = f64::from(sheep_i) * 1.3;
                        offset_position(centre, 40.0 * a.cos(), 30.0 * a.sin() + 30.0)
                    }
                });
                out.push(spec.config(&id, position));
            }
        }
        out
    }

    pub fn registered(&self) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .filter(|s| s.register)
            .flat_map(|s| s.ids())
            .map(NodeId::new)
            .collect()
    }

    pub fn resolve_target(&self, target: &str) -> Option<Target> {
        let ids: BTreeSet<String> = self.nodes.iter().flat_map(NodeSpec::ids).collect();
        match target {
            RELAY => Some(Target::Relay),
            GATEWAY => Some(Target::Gateway),
            "uplink" => Some(Target::Uplink),
            "long" => Some(Target::Long),
            t => match t.strip_prefix("short:") {
                Some(n) if ids.contains(n) => Some(Target::Short(NodeId::new(n))),
                Some(_) => None,
                None if ids.contains(t) => Some(Target::Node(NodeId::new(t))),
                None => None,
            },
        }
    }

    /// Resolves a fault's target and checks the fault can apply to it.
    pub fn fault_target(&self, target: &str, fault: &FaultKind) -> Result<Target, String> {
        let resolved = self
            .resolve_target(target)
            .ok_or_else(|| format!("fault target `{target}` does not exist"))?;
        let ok = match (&resolved, fault) {
            (Target::Node(_), k) => k.is_node_fault(),
            (Target::Relay | Target::Gateway, FaultKind::Restart { .. }) => true,
            (Target::Uplink | Target::Long | Target::Short(_), FaultKind::Outage { duration_s }) => *duration_s > 0,
            _ => false,
        };
        if ok {
            Ok(resolved)
        } else {
            Err(format!("fault `{fault}` cannot target `{target}`"))
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.format != FORMAT_VERSION {
            return bad(format!(
                "unsupported format {} (expected {FORMAT_VERSION})",
                self.format
            ));
        }
        if self.duration_s == 0 {
            return bad("duration_s must be positive".into());
        }
        if !(self.time_compression > 0.0) {
            return bad("time_compression must be positive".into());
        }
        if !(self.silence_threshold > 0.0) {
            return bad("silence_threshold must be positive".into());
        }
        if self.nodes.is_empty() {
            return bad("at least one node is required".into());
        }
        let mut ids = BTreeSet::new();
        for spec in &self.nodes {
            if spec.count == Some(0) {
                return bad(format!("node `{}`: count must be positive", spec.id));
            }
            for id in spec.ids() {
                if id.is_empty() || id.contains(char::is_whitespace) || id.contains(':') {
                    return bad(format!("node id `{id}` must be non-empty, without whitespace or ':'"));
                }
                if [RELAY, GATEWAY, "uplink", "long"].contains(&id.as_str()) {
                    return bad(format!("node id `{id}` is reserved"));
                }
                if !ids.insert(id.clone()) {
                    return bad(format!("duplicate node id `{id}`"));
                }
            }
        }
        let fence = self.environment.fence();
        fence.validate().map_err(ScenarioError::Invalid)?;
        self.environment
            .weather(self.duration_s)
            .validate()
            .map_err(ScenarioError::Invalid)?;
        if self.environment.step_s == 0 {
            return bad("environment.step_s must be positive".into());
        }
        for c in self.node_configs() {
            c.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            if c.kind == NodeKind::Livestock && !fence.contains(c.position) {
                return bad(format!("livestock node {} starts outside the fence", c.id));
            }
        }
        for link in [self.links.short(), self.links.long(), self.links.uplink()] {
            link.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        for o in &self.links.outages {
            OutageWindow::new(o.start_s, o.end_s).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            match self.resolve_target(&o.link) {
                Some(Target::Uplink | Target::Long | Target::Short(_)) => {}
                _ => return bad(format!("outage on unknown link `{}`", o.link)),
            }
        }
        let q = &self.queue;
        if q.relay_capacity == 0 || q.batch_limit == 0 || q.gateway_batch_limit == 0 {
            return bad("queue capacity and batch limits must be positive".into());
        }
        if q.upload_interval_s == 0 || q.relay_flush_s == 0 || q.retry_timeout_s == 0 {
            return bad("queue intervals must be positive".into());
        }
        for f in &self.faults {
            if f.at_s > self.duration_s {
                return bad(format!(
                    "fault `{}` at {} s is after the end of the run",
                    f.fault, f.at_s
                ));
            }
            self.fault_target(&f.target, &f.fault).map_err(ScenarioError::Invalid)?;
        }
        let groups: BTreeSet<String> = self.node_configs().into_iter().flat_map(|c| c.groups).collect();
        for c in &self.commands {
            if c.at_s > self.duration_s {
                return bad(format!("command at {} s is after the end of the run", c.at_s));
            }
            match (&c.group, &c.node) {
                (Some(g), None) if groups.contains(g) => {}
                (Some(g), None) => return bad(format!("command targets unknown group `{g}`")),
                (None, Some(n)) if ids.contains(n) => {}
                (None, Some(n)) => return bad(format!("command targets unknown node `{n}`")),
                _ => return bad("a command needs exactly one of `group` or `node`".into()),
            }
        }
        Ok(())
    }
}

/// Registry record for a configured node.
pub fn descriptor(c: &NodeConfig) -> NodeDescriptor {
    NodeDescriptor {
        node_id: c.id.clone(),
        kind: c.kind,
        position: c.position,
        sensing_attributes: c.complement.channels(),
        groups: c.groups.clone(),
        registered_t: 0,
        notes: String::new(),
        duty: c.duty,
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}
