//! Event-driven run of a whole deployment: nodes, radio, relay, gateway and
//! cloud on one simulated clock.
//!
//! Per wake a node samples, transmits over its short link, and 200 ms later
//! opens a listen window in which the relay hands over any staged command.
//! The relay flushes to the gateway on a fixed interval; the gateway opens
//! an upload session to the cloud on another. Command transfer from the
//! cloud outbox to the relay and delivery receipts back to the cloud ride on
//! the upload session.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloudcore::{CloudCore, SharedCloud, LOG_FILE};
use crate::environment::{
    step_sheep, step_soil, surface_flow, Activity, GeoFence, SheepState, SoilState, WeatherScenario,
};
use crate::error::RunError;
use crate::faults::FaultKind;
use crate::fieldnode::sensors::EnvSnapshot;
use crate::fieldnode::{NodeConfig, NodeState, WakeStart};
use crate::packet::{Command, NodeId, NodeKind, Packet, PacketKey};
use crate::radiolink::{node_component, Ack, LinkId, OutageWindow, Radio, GATEWAY, RELAY};
use crate::report::{NodeManifest, RestartRecord, RunManifest, RunReport, GATEWAY_LOG, MANIFEST_FILE, RELAY_LOG};
use crate::scenario::{descriptor, CommandSpec, Scenario, Target};
use crate::simkernel::{RngFactory, Scheduler, SimTime};
use crate::storeforward::{DurableLog, Gateway, GatewayRecord, Relay, RelayRecord};

const LISTEN_DELAY_MS: u64 = 200;
const BATTERY_SAMPLE_S: u64 = 3600;

#[derive(Clone, Debug)]
enum Ev {
    Wake(NodeId),
    Listen {
        node: NodeId,
        t_wake: SimTime,
        awake_s: u64,
    },
    RelayRx(Packet),
    CommandAck {
        node: NodeId,
        id: u64,
    },
    RelayFlush,
    GatewayRx(Packet),
    RelayAck(Ack),
    UploadSession,
    EnvStep,
    BatterySample,
    Fault {
        target: Target,
        fault: FaultKind,
    },
    Command(CommandSpec),
    Recover(Component),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Component {
    Relay,
    Gateway,
}

impl Component {
    fn name(self) -> &'static str {
        match self {
            Component::Relay => RELAY,
            Component::Gateway => GATEWAY,
        }
    }
}

/// Where a killed component's log waits for the restart.
enum Parked {
    File(PathBuf),
    Bytes(Vec<u8>),
}

struct NodeSim {
    state: NodeState,
    rng: ChaCha8Rng,
    sheep_rng: ChaCha8Rng,
    soil: SoilState,
    sheep: Option<SheepState>,
    /// A wake is scheduled.
    active: bool,
    radio_lost: u64,
    dropped_at_relay: u64,
    depleted_at: Option<u64>,
    battery: Vec<(u64, f64)>,
}

/// Live view of one node, for status endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeStatus {
    pub node_id: NodeId,
    pub kind: NodeKind,
    pub active: bool,
    pub dormant: bool,
    pub radio_hang: bool,
    pub available_mah: f64,
    pub period_s: u64,
    pub emitted: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStatus {
    pub now_s: u64,
    pub duration_s: u64,
    pub end_s: u64,
    pub finished: bool,
    pub relay_up: bool,
    pub gateway_up: bool,
    pub relay_unacked: usize,
    pub gateway_queued: usize,
    pub nodes: Vec<NodeStatus>,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub manifest: RunManifest,
    pub cloud: SharedCloud,
}

pub struct Deployment {
    scenario: Scenario,
    sched: Scheduler<Ev>,
    nodes: BTreeMap<NodeId, NodeSim>,
    weather: WeatherScenario,
    fence: GeoFence,
    radio: Radio,
    relay: Option<Relay>,
    gateway: Option<Gateway>,
    parked_relay: Option<Parked>,
    parked_gateway: Option<Parked>,
    known: BTreeSet<NodeId>,
    cloud: SharedCloud,
    store: Option<PathBuf>,
    in_flight: BTreeSet<PacketKey>,
    restarts: Vec<RestartRecord>,
    errors: Vec<String>,
}

/// Runs a scenario to completion.
pub fn run_scenario(scenario: &Scenario, store: Option<&Path>) -> Result<RunOutcome, RunError> {
    Deployment::new(scenario.clone(), store)?.finish()
}

impl Deployment {
    /// Builds a run over a fresh store. An existing store directory must not
    /// already hold run files.
    pub fn new(scenario: Scenario, store: Option<&Path>) -> Result<Self, RunError> {
        let cloud = match store {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                for f in [LOG_FILE, RELAY_LOG, GATEWAY_LOG, MANIFEST_FILE] {
                    if dir.join(f).exists() {
                        return Err(RunError::StoreInUse(dir.join(f)));
                    }
                }
                CloudCore::open(dir, scenario.cloud_config())?
            }
            None => CloudCore::in_memory(scenario.cloud_config()),
        };
        Self::with_cloud(scenario, store, cloud.into_shared())
    }

    /// Builds a run feeding an existing cloud, as the live service does.
    /// Relay and gateway logs go under `store` when given.
    pub fn with_cloud(scenario: Scenario, store: Option<&Path>, cloud: SharedCloud) -> Result<Self, RunError> {
        scenario.validate()?;
        let rngs = RngFactory::new(scenario.seed);
        let configs: Vec<NodeConfig> = scenario.node_configs();
        let registered = scenario.registered();
        {
            let mut c = cloud.write();
            for cfg in configs.iter().filter(|c| registered.contains(&c.id)) {
                if c.node(&cfg.id).is_err() {
                    c.register_node(descriptor(cfg), 0)?;
                }
            }
        }
        let known: BTreeSet<NodeId> = configs.iter().map(|c| c.id.clone()).collect();
        let links = &scenario.links;
        let mut radio = Radio::new(&rngs, known.iter(), &links.short(), &links.long(), &links.uplink())?;
        for o in &links.outages {
            let id = match scenario.resolve_target(&o.link) {
                Some(Target::Uplink) => LinkId::uplink(),
                Some(Target::Long) => LinkId::long(),
                Some(Target::Short(n)) => LinkId::short(&n),
                _ => continue,
            };
            radio.set_outage(&id, OutageWindow::new(o.start_s, o.end_s)?)?;
        }

        let relay_log = open_log::<RelayRecord>(store, RELAY_LOG)?;
        let gateway_log = open_log::<GatewayRecord>(store, GATEWAY_LOG)?;
        let relay = Relay::new(scenario.queue.relay(), known.clone(), relay_log);
        let gateway = Gateway::new(scenario.queue.gateway(), gateway_log);

        let env = &scenario.environment;
        let mut nodes = BTreeMap::new();
        for (i, cfg) in configs.into_iter().enumerate() {
            let id = cfg.id.clone();
            let moisture = env.initial_moisture + 0.01 * ((i % 5) as f64 - 2.0);
            let sheep = (cfg.kind == NodeKind::Livestock).then_some(SheepState {
                pos: cfg.position,
                heading: i as f64 * 1.1,
                speed: 0.0,
                activity: Activity::Standing,
            });
            nodes.insert(
                id.clone(),
                NodeSim {
                    rng: rngs.fork(&node_component(&id)),
                    sheep_rng: rngs.fork(&format!("sheep:{id}")),
                    soil: SoilState::new(&env.soil, moisture, env.initial_soil_temp),
                    sheep,
                    state: NodeState::new(cfg),
                    active: false,
                    radio_lost: 0,
                    dropped_at_relay: 0,
                    depleted_at: None,
                    battery: Vec::new(),
                },
            );
        }

        let mut d = Self {
            weather: env.weather(scenario.duration_s),
            fence: env.fence(),
            sched: Scheduler::new(),
            nodes,
            radio,
            relay: Some(relay),
            gateway: Some(gateway),
            parked_relay: None,
            parked_gateway: None,
            known,
            cloud,
            store: store.map(Path::to_path_buf),
            in_flight: BTreeSet::new(),
            restarts: Vec::new(),
            errors: Vec::new(),
            scenario,
        };
        d.schedule_initial()?;
        Ok(d)
    }

    fn schedule_initial(&mut self) -> Result<(), RunError> {
        let faults = self.scenario.faults.clone();
        for f in faults {
            let target = self
                .scenario
                .fault_target(&f.target, &f.fault)
                .map_err(crate::error::ScenarioError::Invalid)?;
            self.at(f.at_s * 1000, &f.target, Ev::Fault { target, fault: f.fault })?;
        }
        for c in self.scenario.commands.clone() {
            self.at(c.at_s * 1000, "cloud", Ev::Command(c))?;
        }
        let ids: Vec<NodeId> = self.nodes.keys().cloned().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let period = self.nodes[&id].state.period_s();
            let offset = (i as u64 * 37) % period;
            self.nodes.get_mut(&id).expect("node").active = true;
            self.at(offset * 1000, &node_component(&id), Ev::Wake(id))?;
        }
        let q = self.scenario.queue;
        self.at(0, "env", Ev::BatterySample)?;
        self.at(self.scenario.environment.step_s * 1000, "env", Ev::EnvStep)?;
        self.at(q.relay_flush_s * 1000, RELAY, Ev::RelayFlush)?;
        self.at(q.upload_interval_s * 1000, GATEWAY, Ev::UploadSession)?;
        Ok(())
    }

    fn at(&mut self, ms: u64, target: &str, ev: Ev) -> Result<(), RunError> {
        self.sched.schedule(SimTime::from_millis(ms), target, ev)?;
        Ok(())
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cloud(&self) -> &SharedCloud {
        &self.cloud
    }

    pub fn end_time(&self) -> SimTime {
        SimTime::from_secs(self.scenario.end_s())
    }

    pub fn finished(&self) -> bool {
        self.now() >= self.end_time()
    }

    /// Processes every event up to `t` (capped at the end of the run).
    pub fn run_until(&mut self, t: SimTime) -> Result<(), RunError> {
        let t = t.min(self.end_time());
        if t <= self.now() {
            return Ok(());
        }
        while let Some(ev) = self.sched.pop_due(t) {
            self.handle(ev.payload)?;
        }
        self.sched.advance_to(t)?;
        Ok(())
    }

    /// Schedules a fault from outside the scenario file, no earlier than now.
    pub fn inject(&mut self, at_s: Option<u64>, target: &str, fault: FaultKind) -> Result<u64, RunError> {
        let resolved = self
            .scenario
            .fault_target(target, &fault)
            .map_err(crate::error::ScenarioError::Invalid)?;
        let at = at_s.map(SimTime::from_secs).unwrap_or(self.now());
        self.sched.schedule(
            at,
            target,
            Ev::Fault {
                target: resolved,
                fault,
            },
        )?;
        Ok(at.as_secs())
    }

    pub fn status(&self) -> SimStatus {
        SimStatus {
            now_s: self.now().as_secs(),
            duration_s: self.scenario.duration_s,
            end_s: self.scenario.end_s(),
            finished: self.finished(),
            relay_up: self.relay.is_some(),
            gateway_up: self.gateway.is_some(),
            relay_unacked: self.relay.as_ref().map_or(0, |r| r.state().outstanding.len()),
            gateway_queued: self.gateway.as_ref().map_or(0, |g| g.state().queue.len()),
            nodes: self
                .nodes
                .values()
                .map(|n| NodeStatus {
                    node_id: n.state.id().clone(),
                    kind: n.state.kind(),
                    active: n.active,
                    dormant: n.state.dormant,
                    radio_hang: n.state.faults.radio_hang,
                    available_mah: n.state.bank.available_mah(),
                    period_s: n.state.period_s(),
                    emitted: n.state.next_seq,
                })
                .collect(),
        }
    }

    /// Runs to the end, writes the manifest, and builds the report.
    pub fn finish(mut self) -> Result<RunOutcome, RunError> {
        self.run_until(self.end_time())?;
        for c in [Component::Relay, Component::Gateway] {
            if self.is_down(c) {
                self.recover(c)?;
            }
        }
        let relay = self.relay.as_mut().expect("relay up");
        relay.flush_log()?;
        let gateway = self.gateway.as_mut().expect("gateway up");
        gateway.flush_log()?;
        self.cloud.write().flush()?;
        let manifest = self.manifest();
        if let Some(dir) = &self.store {
            let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            json.push('\n');
            std::fs::write(dir.join(MANIFEST_FILE), json)?;
        }
        let report = self.report_with(&manifest);
        Ok(RunOutcome {
            report,
            manifest,
            cloud: self.cloud.clone(),
        })
    }

    pub fn manifest(&self) -> RunManifest {
        let mut nodes = BTreeMap::new();
        for (id, n) in &self.nodes {
            let in_flight = self
                .in_flight
                .iter()
                .filter(|k| &k.node_id == id)
                .map(|k| k.seq)
                .collect();
            nodes.insert(
                id.clone(),
                NodeManifest {
                    kind: Some(n.state.kind()),
                    emitted: n.state.next_seq,
                    radio_lost: n.radio_lost,
                    dropped_at_relay: n.dropped_at_relay,
                    in_flight,
                    depleted_at: n.depleted_at,
                    battery: n.battery.clone(),
                    period_s: n.state.period_s(),
                    consumed_mah: n.state.consumed_mah,
                    harvested_mah: n.state.harvested_mah,
                },
            );
        }
        RunManifest {
            seed: self.scenario.seed,
            duration_s: self.scenario.duration_s,
            end_s: self.scenario.end_s(),
            silence_threshold: self.scenario.silence_threshold,
            nodes,
            links: self.radio.counters(),
            restarts: self.restarts.clone(),
            errors: self.errors.clone(),
        }
    }

    fn report_with(&self, manifest: &RunManifest) -> RunReport {
        let relay = self.relay.as_ref().map(|r| r.state().clone()).unwrap_or_default();
        let gateway = self.gateway.as_ref().map(|g| g.state().clone()).unwrap_or_default();
        RunReport::build(manifest, &self.cloud.read(), &relay, &gateway)
    }

    /// Report of the run so far.
    pub fn report(&self) -> RunReport {
        self.report_with(&self.manifest())
    }

    pub fn node_state(&self, id: &NodeId) -> Option<&NodeState> {
        self.nodes.get(id).map(|n| &n.state)
    }

    pub fn relay(&self) -> Option<&Relay> {
        self.relay.as_ref()
    }

    pub fn gateway(&self) -> Option<&Gateway> {
        self.gateway.as_ref()
    }

    fn env_for(&self, n: &NodeSim, t: SimTime) -> EnvSnapshot {
        let ts = t.as_secs_f64();
        let (air_temp, humidity) = self.weather.air_conditions(ts);
        let rain = self.weather.rainfall_at(ts);
        EnvSnapshot {
            t: ts,
            air_temp,
            humidity,
            rain_mm_h: rain,
            soil: n.soil,
            surface_flow: surface_flow(&n.soil, rain),
            sheep: n.sheep,
        }
    }

    fn handle(&mut self, ev: Ev) -> Result<(), RunError> {
        let now = self.now();
        match ev {
            Ev::Wake(id) => self.on_wake(&id, now)?,
            Ev::Listen { node, t_wake, awake_s } => self.on_listen(&node, t_wake, awake_s, now)?,
            Ev::RelayRx(p) => {
                self.in_flight.remove(&p.key());
                match self.relay.as_mut() {
                    Some(relay) => {
                        relay.relay_ingest(&p, now)?;
                    }
                    None => {
                        if let Some(n) = self.nodes.get_mut(&p.node_id) {
                            n.dropped_at_relay += 1;
                        }
                    }
                }
            }
            Ev::CommandAck { node, id } => {
                if let Some(relay) = self.relay.as_mut() {
                    relay.command_delivered(&node, id)?;
                }
            }
            Ev::RelayFlush => {
                if let Some(relay) = self.relay.as_mut() {
                    let packets = relay.relay_flush(now)?;
                    relay.flush_log()?;
                    for p in packets {
                        let tx = self.radio.transmit_on(&LinkId::long(), now)?;
                        if tx.delivered {
                            self.sched.schedule(tx.arrival, GATEWAY, Ev::GatewayRx(p))?;
                        }
                    }
                }
                let next = now.plus_secs(self.scenario.queue.relay_flush_s);
                if next <= self.end_time() {
                    self.sched.schedule(next, RELAY, Ev::RelayFlush)?;
                }
            }
            Ev::GatewayRx(p) => {
                if let Some(gw) = self.gateway.as_mut() {
                    let ack = gw.gateway_ingest(&p, now)?;
                    gw.flush_log()?;
                    let tx = self.radio.transmit_on(&LinkId::long(), now)?;
                    if tx.delivered {
                        self.sched.schedule(tx.arrival, RELAY, Ev::RelayAck(ack))?;
                    }
                }
            }
            Ev::RelayAck(ack) => {
                if let Some(relay) = self.relay.as_mut() {
                    relay.handle_gateway_ack(&ack)?;
                }
            }
            Ev::UploadSession => {
                self.upload_session(now)?;
                let next = now.plus_secs(self.scenario.queue.upload_interval_s);
                if next <= self.end_time() {
                    self.sched.schedule(next, GATEWAY, Ev::UploadSession)?;
                }
            }
            Ev::EnvStep => {
                self.env_step(now);
                let next = now.plus_secs(self.scenario.environment.step_s);
                if next.as_secs() <= self.scenario.duration_s {
                    self.sched.schedule(next, "env", Ev::EnvStep)?;
                }
            }
            Ev::BatterySample => {
                let t = now.as_secs();
                for n in self.nodes.values_mut() {
                    n.battery.push((t, n.state.bank.available_mah()));
                }
                let next = now.plus_secs(BATTERY_SAMPLE_S);
                if next.as_secs() <= self.scenario.duration_s {
                    self.sched.schedule(next, "env", Ev::BatterySample)?;
                }
            }
            Ev::Fault { target, fault } => self.on_fault(target, fault, now)?,
            Ev::Command(c) => self.on_command(&c, now),
            Ev::Recover(c) => self.recover(c)?,
        }
        Ok(())
    }

    fn on_wake(&mut self, id: &NodeId, now: SimTime) -> Result<(), RunError> {
        let env = self.env_for(&self.nodes[id], now);
        let stop = now.as_secs() >= self.scenario.duration_s;
        let n = self.nodes.get_mut(id).expect("known node");
        if stop {
            n.active = false;
            return Ok(());
        }
        match n.state.begin_wake(now, &env, &mut n.rng) {
            WakeStart::Dormant => {
                n.active = false;
                if n.depleted_at.is_none() && n.state.bank.available_mah() <= 0.0 {
                    n.depleted_at = Some(now.as_secs());
                }
            }
            WakeStart::Awake { packet, awake_s } => {
                if let Some(p) = packet {
                    let tx = self.radio.transmit_on(&LinkId::short(id), now)?;
                    if tx.delivered {
                        self.in_flight.insert(p.key());
                        self.sched.schedule(tx.arrival, RELAY, Ev::RelayRx(p))?;
                    } else {
                        n.radio_lost += 1;
                    }
                }
                let listen = now.plus_millis(LISTEN_DELAY_MS);
                self.sched.schedule(
                    listen,
                    node_component(id),
                    Ev::Listen {
                        node: id.clone(),
                        t_wake: now,
                        awake_s,
                    },
                )?;
            }
        }
        Ok(())
    }

    fn on_listen(&mut self, id: &NodeId, t_wake: SimTime, awake_s: u64, now: SimTime) -> Result<(), RunError> {
        let link = LinkId::short(id);
        if let Some(entry) = self.relay.as_ref().and_then(|r| r.pending_command(id)).cloned() {
            let down = self.radio.transmit_on(&link, now)?;
            if down.delivered {
                let n = self.nodes.get_mut(id).expect("known node");
                n.state.apply_command(entry.id, &entry.command);
                let up = self.radio.transmit_on(&link, down.arrival)?;
                if up.delivered {
                    self.sched.schedule(
                        up.arrival,
                        RELAY,
                        Ev::CommandAck {
                            node: id.clone(),
                            id: entry.id,
                        },
                    )?;
                }
            }
        }
        let irradiance = self.weather.irradiance_at(t_wake.as_secs_f64());
        let duration = self.scenario.duration_s;
        let n = self.nodes.get_mut(id).expect("known node");
        match n.state.end_wake(t_wake, awake_s, irradiance) {
            Some(next) if next.as_secs() < duration => {
                self.sched.schedule(next, node_component(id), Ev::Wake(id.clone()))?;
            }
            _ => n.active = false,
        }
        Ok(())
    }

    fn upload_session(&mut self, now: SimTime) -> Result<(), RunError> {
        let Some(gw) = self.gateway.as_mut() else {
            return Ok(());
        };
        let uplink = LinkId::uplink();
        let available = !self.radio.in_outage(&uplink, now);
        let mut cloud = self.cloud.write();
        loop {
            let batch = gw.gateway_upload(now, available)?;
            if batch.is_empty() {
                break;
            }
            let up = self.radio.transmit_on(&uplink, now)?;
            if !up.delivered {
                break;
            }
            let acked = cloud.ingest_batch(&batch, up.arrival.as_secs())?;
            let down = self.radio.transmit_on(&uplink, up.arrival)?;
            if !down.delivered {
                break;
            }
            gw.handle_cloud_ack(&acked)?;
        }
        gw.flush_log()?;
        if !available {
            return Ok(());
        }
        if let Some(relay) = self.relay.as_mut() {
            let mut staged = Vec::new();
            for entry in cloud.outbox() {
                let id = entry.id;
                match relay.stage_command(entry) {
                    Ok(()) => staged.push(id),
                    Err(e) => cloud.mark_rejected(id, e.to_string())?,
                }
            }
            cloud.mark_staged(staged)?;
            for (node, id) in relay.take_receipts()? {
                cloud.mark_delivered(&node, id, now.as_secs())?;
            }
            relay.flush_log()?;
        }
        cloud.flush()?;
        Ok(())
    }

    fn env_step(&mut self, now: SimTime) {
        let t = now.as_secs_f64();
        let dt = self.scenario.environment.step_s as f64;
        let rain = self.weather.rainfall_at(t);
        let (air, _) = self.weather.air_conditions(t);
        let env = &self.scenario.environment;
        for n in self.nodes.values_mut() {
            n.soil = step_soil(&n.soil, &env.soil, rain, air, dt);
            if let Some(s) = &n.sheep {
                n.sheep = Some(step_sheep(s, &self.fence, &env.sheep, dt, &mut n.sheep_rng));
            }
        }
    }

    fn on_fault(&mut self, target: Target, fault: FaultKind, now: SimTime) -> Result<(), RunError> {
        match (target, &fault) {
            (Target::Node(id), _) => {
                let duration = self.scenario.duration_s;
                let n = self.nodes.get_mut(&id).expect("validated node");
                match n.state.inject_fault(&fault, now) {
                    Ok(_) => {
                        if !n.active && !n.state.dormant && now.as_secs() < duration {
                            n.active = true;
                            self.sched.schedule(now, node_component(&id), Ev::Wake(id))?;
                        }
                    }
                    Err(e) => self.errors.push(format!("t={}: {e}", now.as_secs())),
                }
            }
            (Target::Relay, FaultKind::Restart { downtime_s }) => self.restart(Component::Relay, *downtime_s, now)?,
            (Target::Gateway, FaultKind::Restart { downtime_s }) => {
                self.restart(Component::Gateway, *downtime_s, now)?
            }
            (link @ (Target::Uplink | Target::Long | Target::Short(_)), FaultKind::Outage { duration_s }) => {
                let id = match link {
                    Target::Uplink => LinkId::uplink(),
                    Target::Long => LinkId::long(),
                    Target::Short(n) => LinkId::short(&n),
                    _ => unreachable!(),
                };
                let start = now.as_secs_f64();
                self.radio
                    .set_outage(&id, OutageWindow::new(start, start + *duration_s as f64)?)?;
            }
            (t, f) => self
                .errors
                .push(format!("t={}: fault `{f}` cannot target {t:?}", now.as_secs())),
        }
        Ok(())
    }

    fn on_command(&mut self, c: &CommandSpec, now: SimTime) {
        let t = now.as_secs();
        let mut cloud = self.cloud.write();
        let result = match (&c.group, &c.node, &c.command) {
            (Some(g), _, Command::SetPeriod { period_s }) => cloud.set_group_rate(g, *period_s, t).map(|_| ()),
            (Some(g), _, cmd) => cloud
                .group_members(g)
                .iter()
                .try_for_each(|n| cloud.command_node(n, cmd.clone(), t).map(|_| ())),
            (None, Some(n), cmd) => cloud.command_node(&NodeId::new(n.as_str()), cmd.clone(), t).map(|_| ()),
            (None, None, _) => Ok(()),
        };
        if let Err(e) = result {
            self.errors.push(format!("t={t}: command {}: {e}", c.command));
        }
    }

    fn is_down(&self, c: Component) -> bool {
        match c {
            Component::Relay => self.relay.is_none(),
            Component::Gateway => self.gateway.is_none(),
        }
    }

    fn restart(&mut self, c: Component, downtime_s: u64, now: SimTime) -> Result<(), RunError> {
        if self.is_down(c) {
            self.errors
                .push(format!("t={}: {} is already down", now.as_secs(), c.name()));
            return Ok(());
        }
        self.restarts.push(RestartRecord {
            t: now.as_secs(),
            component: c.name().to_string(),
            downtime_s,
        });
        match c {
            Component::Relay => {
                let log = self.relay.take().expect("up").into_log();
                self.parked_relay = Some(park(log)?);
            }
            Component::Gateway => {
                let log = self.gateway.take().expect("up").into_log();
                self.parked_gateway = Some(park(log)?);
            }
        }
        if downtime_s == 0 {
            self.recover(c)
        } else {
            self.sched
                .schedule(now.plus_secs(downtime_s), c.name(), Ev::Recover(c))?;
            Ok(())
        }
    }

    fn recover(&mut self, c: Component) -> Result<(), RunError> {
        match c {
            Component::Relay => {
                let Some(parked) = self.parked_relay.take() else {
                    return Ok(());
                };
                let (log, records) = unpark::<RelayRecord>(parked)?;
                self.relay = Some(Relay::recover(
                    self.scenario.queue.relay(),
                    self.known.clone(),
                    log,
                    &records,
                ));
            }
            Component::Gateway => {
                let Some(parked) = self.parked_gateway.take() else {
                    return Ok(());
                };
                let (log, records) = unpark::<GatewayRecord>(parked)?;
                self.gateway = Some(Gateway::recover(self.scenario.queue.gateway(), log, &records));
            }
        }
        Ok(())
    }
}

fn open_log<E: Serialize + serde::de::DeserializeOwned>(
    store: Option<&Path>,
    name: &str,
) -> Result<DurableLog<E>, RunError> {
    Ok(match store {
        Some(dir) => DurableLog::open(dir.join(name))?.0,
        None => DurableLog::in_memory(),
    })
}

/// Closes a killed component's log, keeping only what it had written.
fn park<E: Serialize + serde::de::DeserializeOwned>(mut log: DurableLog<E>) -> Result<Parked, RunError> {
    log.flush()?;
    Ok(match log.path() {
        Some(p) => Parked::File(p.to_path_buf()),
        None => Parked::Bytes(log.bytes()?),
    })
}

fn unpark<E: Serialize + serde::de::DeserializeOwned>(parked: Parked) -> Result<(DurableLog<E>, Vec<E>), RunError> {
    Ok(match parked {
        Parked::File(p) => DurableLog::open(p)?,
        Parked::Bytes(b) => DurableLog::from_bytes(b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{FaultSpec, NodeSpec};

    fn small(duration_s: u64) -> Scenario {
        Scenario {
            duration_s,
            drain_s: 3600,
            nodes: vec![
                NodeSpec {
                    count: Some(2),
                    ..NodeSpec::new("soil", NodeKind::Soil)
                },
                NodeSpec::new("sheep", NodeKind::Livestock),
            ],
            ..Scenario::default_deployment()
        }
    }

    #[test]
    fn lossless_run_delivers_everything() {
        let out = run_scenario(&small(6 * 3600), None).unwrap();
        let t = &out.report.totals;
        assert!(t.emitted > 0);
        assert_eq!(t.delivered, t.emitted);
        assert_eq!(t.yield_, 1.0);
        assert!(out.report.closure_holds());
    }

    #[test]
    fn relay_downtime_drops_frames_but_books_close() {
        let mut s = small(6 * 3600);
        s.faults.push(FaultSpec {
            at_s: 3600,
            target: "relay".into(),
            fault: FaultKind::Restart { downtime_s: 1800 },
        });
        let out = run_scenario(&s, None).unwrap();
        let t = &out.report.totals;
        assert!(t.link_lost > 0);
        assert_eq!(t.delivered + t.link_lost, t.emitted);
        assert!(out.report.closure_holds());
        assert_eq!(out.report.restarts.len(), 1);
    }

    #[test]
    fn nodes_stop_at_duration() {
        let out = run_scenario(&small(3050), None).unwrap();
        // Wakes at offsets 0, 37 and 74 s with a 305 s period.
        for (id, n) in &out.report.nodes {
            assert_eq!(n.accounting.emitted, 10, "{id}");
        }
    }
}
