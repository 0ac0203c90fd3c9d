//! Firmware state machine for soil and livestock nodes.
//!
//! A wake is split in two halves so the surrounding simulation can deliver
//! a downlink command while the node listens: [`NodeState::begin_wake`]
//! samples and forms the packet, [`NodeState::end_wake`] books the energy
//! for the awake interval and the following sleep and returns the next wake
//! time. [`NodeState::wake_cycle`] runs both halves back to back.

pub mod livestock;
pub mod power;
pub mod sensors;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::NodeError;
use crate::faults::FaultKind;
use crate::packet::{Command, NodeId, NodeKind, Packet, Reading, ReadingValue};
use crate::simkernel::SimTime;

use livestock::{classify_behavior, gps_fix, synth_accel_window, BehaviorThresholds, GpsConfig};
use power::{consume_energy, solar_harvest, BatteryBank, DutyCycle, PowerProfile};
use sensors::{sample_sensors, ChannelKind, Corrosion, EnvSnapshot, SensorComplement};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: (f64, f64),
    #[serde(default)]
    pub groups: BTreeSet<String>,
    pub duty: DutyCycle,
    pub power: PowerProfile,
    pub bank: BatteryBank,
    pub complement: SensorComplement,
    #[serde(default)]
    pub gps: GpsConfig,
    #[serde(default)]
    pub behavior: BehaviorThresholds,
    #[serde(default = "default_accel_samples")]
    pub accel_samples: usize,
    #[serde(default)]
    pub accel_noise: f64,
}

fn default_accel_samples() -> usize {
    50
}

impl NodeConfig {
    /// Soil node with three 7800 mAh packs and a solar trickle charger.
    pub fn soil(id: &str, position: (f64, f64)) -> Self {
        Self {
            id: NodeId::new(id),
            kind: NodeKind::Soil,
            position,
            groups: BTreeSet::from(["soil".to_string()]),
            duty: DutyCycle::DEFAULT,
            power: PowerProfile::soil_default(),
            bank: BatteryBank::new(vec![power::Pack::full(7800.0); 3], 10.0),
            complement: SensorComplement::soil_default(false),
            gps: GpsConfig::default(),
            behavior: BehaviorThresholds::default(),
            accel_samples: default_accel_samples(),
            accel_noise: 0.0,
        }
    }

    /// Livestock collar with one 10000 mAh pack.
    pub fn livestock(id: &str, position: (f64, f64)) -> Self {
        Self {
            id: NodeId::new(id),
            kind: NodeKind::Livestock,
            position,
            groups: BTreeSet::from(["livestock".to_string()]),
            duty: DutyCycle::DEFAULT,
            power: PowerProfile::livestock_default(),
            bank: BatteryBank::uniform(1, 10_000.0),
            complement: SensorComplement::livestock_default(),
            gps: GpsConfig::default(),
            behavior: BehaviorThresholds::default(),
            accel_samples: default_accel_samples(),
            accel_noise: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        let bad = |m: String| NodeError::Config(format!("{}: {m}", self.id));
        self.duty.validate().map_err(bad)?;
        self.power.validate().map_err(bad)?;
        self.bank.validate().map_err(bad)?;
        if self.complement.groups.is_empty() {
            return Err(bad("empty sensor complement".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultState {
    pub radio_hang: bool,
    pub corrosion: BTreeMap<String, Corrosion>,
    pub protection_trip: bool,
    pub water_ingress_dead: bool,
    pub condensation_false_positive_rate: f64,
    pub extra_load_ma: f64,
}

/// Result of the first half of a wake.
#[derive(Clone, Debug, PartialEq)]
pub enum WakeStart {
    Dormant,
    Awake {
        /// `None` when the radio is hung.
        packet: Option<Packet>,
        awake_s: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WakeOutcome {
    pub packets: Vec<Packet>,
    pub next_wake: Option<SimTime>,
}

/// What a fault injection did to the node's schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FaultEffect {
    /// The node was dormant and can be woken again.
    pub revived: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub config: NodeConfig,
    pub duty: DutyCycle,
    pub bank: BatteryBank,
    pub faults: FaultState,
    pub next_seq: u64,
    pub dormant: bool,
    pub last_command_id: Option<u64>,
    pub consumed_mah: f64,
    pub harvested_mah: f64,
    /// Packets actually handed to the radio.
    pub emitted: u64,
}

impl NodeState {
    pub fn new(config: NodeConfig) -> Self {
        Self {
            duty: config.duty,
            bank: config.bank.clone(),
            config,
            faults: FaultState::default(),
            next_seq: 0,
            dormant: false,
            last_command_id: None,
            consumed_mah: 0.0,
            harvested_mah: 0.0,
            emitted: 0,
        }
    }

    pub fn id(&self) -> &NodeId {
        &self.config.id
    }

    pub fn kind(&self) -> NodeKind {
        self.config.kind
    }

    pub fn period_s(&self) -> u64 {
        self.duty.period_s()
    }

    fn effective_profile(&self) -> PowerProfile {
        let mut p = self.config.power;
        p.active_ma += self.faults.extra_load_ma;
        p.sleep_ma += self.faults.extra_load_ma;
        p
    }

    pub fn begin_wake<R: Rng + ?Sized>(&mut self, t: SimTime, env: &EnvSnapshot, rng: &mut R) -> WakeStart {
        if self.dormant || self.faults.water_ingress_dead || self.bank.available_mah() <= 0.0 {
            self.dormant = true;
            return WakeStart::Dormant;
        }
        let mut readings = sample_sensors(
            &self.config.complement,
            env,
            &self.faults.corrosion,
            self.faults.condensation_false_positive_rate,
            rng,
        );
        let mut awake_s = self.duty.awake_s;
        if self.config.kind == NodeKind::Livestock {
            let sheep = env.sheep.as_ref();
            if self.config.complement.has_kind(ChannelKind::Gps) {
                let truth = sheep.map_or(self.config.position, |s| s.pos);
                let fix = gps_fix(&self.config.gps, truth, rng);
                awake_s += fix.fix_delay_s;
                if let Some((lat, lon)) = fix.point {
                    readings.push(number("gps.lat", lat, "deg"));
                    readings.push(number("gps.lon", lon, "deg"));
                }
            }
            if let (Some(sheep), true) = (sheep, self.config.complement.has_kind(ChannelKind::AccelStatus)) {
                let window = synth_accel_window(sheep, self.config.accel_samples, self.config.accel_noise, rng);
                if let Some(stats) = window.stats() {
                    let label = classify_behavior(&stats, &self.config.behavior);
                    readings.push(Reading {
                        channel: "behavior.1".into(),
                        value: ReadingValue::Label(label.to_string()),
                        unit: "label".into(),
                    });
                }
            }
        }
        if self.faults.radio_hang {
            return WakeStart::Awake { packet: None, awake_s };
        }
        let packet = Packet {
            node_id: self.config.id.clone(),
            seq: self.next_seq,
            t: t.as_secs(),
            kind: self.config.kind,
            readings,
            battery_mv: self.bank.battery_mv(),
        };
        self.next_seq += 1;
        self.emitted += 1;
        WakeStart::Awake {
            packet: Some(packet),
            awake_s,
        }
    }

    /// Applies a downlink command received in the listen window. Returns
    /// false when the command id was already applied.
    pub fn apply_command(&mut self, command_id: u64, command: &Command) -> bool {
        if self.last_command_id.is_some_and(|last| command_id <= last) {
            return false;
        }
        self.last_command_id = Some(command_id);
        match command {
            Command::SetPeriod { period_s } => {
                let awake = self.duty.awake_s;
                self.duty.sleep_s = period_s.saturating_sub(awake).max(1);
            }
            Command::PowerCycle => {
                self.faults.radio_hang = false;
            }
        }
        true
    }

    /// Books the energy of this awake interval plus the sleep that follows
    /// and returns the next wake time.
    pub fn end_wake(&mut self, t_wake: SimTime, awake_s: u64, irradiance: f64) -> Option<SimTime> {
        if self.dormant {
            return None;
        }
        let sleep_s = self.duty.sleep_s;
        let span = (awake_s + sleep_s) as f64;
        self.harvested_mah += solar_harvest(&mut self.bank, irradiance, span);
        let profile = self.effective_profile();
        self.consumed_mah += consume_energy(&mut self.bank, &profile, awake_s as f64, sleep_s as f64);
        if self.bank.tripped() {
            self.faults.protection_trip = true;
        }
        Some(t_wake.plus_secs(awake_s + sleep_s))
    }

    pub fn wake_cycle<R: Rng + ?Sized>(
        &mut self,
        t: SimTime,
        env: &EnvSnapshot,
        rng: &mut R,
        downlink: Option<(u64, &Command)>,
        irradiance: f64,
    ) -> WakeOutcome {
        match self.begin_wake(t, env, rng) {
            WakeStart::Dormant => WakeOutcome {
                packets: vec![],
                next_wake: None,
            },
            WakeStart::Awake { packet, awake_s } => {
                if let Some((id, cmd)) = downlink {
                    self.apply_command(id, cmd);
                }
                let next_wake = self.end_wake(t, awake_s, irradiance);
                WakeOutcome {
                    packets: packet.into_iter().collect(),
                    next_wake,
                }
            }
        }
    }

    pub fn inject_fault(&mut self, fault: &FaultKind, t: SimTime) -> Result<FaultEffect, NodeError> {
        let was_dormant = self.dormant;
        match fault {
            FaultKind::RadioHang => self.faults.radio_hang = true,
            FaultKind::PowerCycle => self.faults.radio_hang = false,
            FaultKind::Corrosion { channel, rate_per_day } => {
                self.require_soil(fault)?;
                let spec = self
                    .config
                    .complement
                    .channel(channel)
                    .ok_or_else(|| NodeError::NoSuchChannel {
                        node: self.config.id.clone(),
                        channel: channel.clone(),
                    })?;
                if !spec.kind.is_soil_channel() {
                    return Err(self.not_applicable(fault));
                }
                self.faults.corrosion.insert(
                    channel.clone(),
                    Corrosion {
                        rate_per_day: *rate_per_day,
                        onset_s: t.as_secs_f64(),
                    },
                );
            }
            FaultKind::ProtectionTrip => {
                self.bank.trip();
                self.faults.protection_trip = true;
            }
            FaultKind::WaterIngress => self.faults.water_ingress_dead = true,
            FaultKind::Condensation { rate } => {
                if !self.config.complement.has_kind(ChannelKind::SurfaceFlow) {
                    return Err(self.not_applicable(fault));
                }
                self.faults.condensation_false_positive_rate = rate.clamp(0.0, 1.0);
            }
            FaultKind::ExtraLoad { ma } => self.faults.extra_load_ma = ma.max(0.0),
            FaultKind::Repair => {
                let trip = self.faults.protection_trip;
                self.faults = FaultState::default();
                self.faults.protection_trip = trip && self.bank.tripped();
                self.dormant = self.bank.available_mah() <= 0.0;
            }
            FaultKind::ReplaceBattery => {
                self.bank = self.config.bank.clone();
                self.faults.protection_trip = false;
                self.dormant = self.faults.water_ingress_dead;
            }
            FaultKind::Outage { .. } | FaultKind::Restart { .. } => {
                return Err(self.not_applicable(fault));
            }
        }
        Ok(FaultEffect {
            revived: was_dormant && !self.dormant,
        })
    }

    fn require_soil(&self, fault: &FaultKind) -> Result<(), NodeError> {
        if self.config.kind == NodeKind::Soil {
            Ok(())
        } else {
            Err(self.not_applicable(fault))
        }
    }

    fn not_applicable(&self, fault: &FaultKind) -> NodeError {
        NodeError::FaultNotApplicable {
            node: self.config.id.clone(),
            kind: self.config.kind.to_string(),
            fault: fault.name().to_string(),
        }
    }
}

fn number(channel: &str, v: f64, unit: &str) -> Reading {
    Reading {
        channel: channel.to_string(),
        value: ReadingValue::Number(v),
        unit: unit.to_string(),
    }
}
