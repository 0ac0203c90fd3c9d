//! Sensor complement and sampling with replication, noise and faults.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environment::{SheepState, SoilState, SECONDS_PER_DAY};
use crate::packet::{Reading, ReadingValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    AirTemp,
    AirHumidity,
    SoilTemp,
    SoilMoistureCheap,
    SoilMoistureRef,
    SurfaceFlow,
    Gps,
    AccelStatus,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::AirTemp => "air_temp",
            ChannelKind::AirHumidity => "air_humidity",
            ChannelKind::SoilTemp => "soil_temp",
            ChannelKind::SoilMoistureCheap => "soil_moisture_cheap",
            ChannelKind::SoilMoistureRef => "soil_moisture_ref",
            ChannelKind::SurfaceFlow => "surface_flow",
            ChannelKind::Gps => "gps",
            ChannelKind::AccelStatus => "behavior",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ChannelKind::AirTemp | ChannelKind::SoilTemp => "degC",
            ChannelKind::AirHumidity => "%RH",
            ChannelKind::SoilMoistureCheap | ChannelKind::SoilMoistureRef => "%VWC",
            ChannelKind::SurfaceFlow => "bool",
            ChannelKind::Gps => "deg",
            ChannelKind::AccelStatus => "label",
        }
    }

    /// Channels that sit in or on the soil and can corrode.
    pub fn is_soil_channel(self) -> bool {
        matches!(
            self,
            ChannelKind::SoilTemp
                | ChannelKind::SoilMoistureCheap
                | ChannelKind::SoilMoistureRef
                | ChannelKind::SurfaceFlow
        )
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Cheap,
    Reference,
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grade::Cheap => "cheap",
            Grade::Reference => "reference",
        })
    }
}

/// A group of identical replicated sensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorGroup {
    pub kind: ChannelKind,
    pub replicates: u32,
    /// Mount height in cm, negative for depth below the surface.
    #[serde(default)]
    pub mount_cm: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub grade: Grade,
    /// Sensor response: reading = gain * truth + offset.
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

/// One physical channel after expanding replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: String,
    pub kind: ChannelKind,
    pub mount_cm: f64,
    pub noise_sigma: f64,
    pub grade: Grade,
    pub gain: f64,
    pub offset: f64,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorComplement {
    pub groups: Vec<SensorGroup>,
}

impl SensorComplement {
    /// Three air temperature/humidity sensors, three cheap soil moisture
    /// probes, three soil thermometers and one overland-flow detector, plus
    /// an optional reference-grade moisture probe.
    pub fn soil_default(with_reference: bool) -> Self {
        let mut groups = vec![
            SensorGroup {
                kind: ChannelKind::AirTemp,
                replicates: 3,
                mount_cm: 35.0,
                noise_sigma: 0.3,
                grade: Grade::Cheap,
                gain: 1.0,
                offset: 0.0,
            },
            SensorGroup {
                kind: ChannelKind::AirHumidity,
                replicates: 3,
                mount_cm: 35.0,
                noise_sigma: 2.0,
                grade: Grade::Cheap,
                gain: 1.0,
                offset: 0.0,
            },
            SensorGroup {
                kind: ChannelKind::SoilMoistureCheap,
                replicates: 3,
                mount_cm: -10.0,
                noise_sigma: 1.5,
                grade: Grade::Cheap,
                // Inverse of the reference mapping 0.8 * cheap + 3.
                gain: 1.25,
                offset: -3.75,
            },
            SensorGroup {
                kind: ChannelKind::SoilTemp,
                replicates: 3,
                mount_cm: -10.0,
                noise_sigma: 0.2,
                grade: Grade::Cheap,
                gain: 1.0,
                offset: 0.0,
            },
            SensorGroup {
                kind: ChannelKind::SurfaceFlow,
                replicates: 1,
                mount_cm: 0.0,
                noise_sigma: 0.0,
                grade: Grade::Cheap,
                gain: 1.0,
                offset: 0.0,
            },
        ];
        if with_reference {
            groups.push(SensorGroup {
                kind: ChannelKind::SoilMoistureRef,
                replicates: 1,
                mount_cm: -10.0,
                noise_sigma: 0.3,
                grade: Grade::Reference,
                gain: 1.0,
                offset: 0.0,
            });
        }
        Self { groups }
    }

    pub fn livestock_default() -> Self {
        Self {
            groups: vec![
                SensorGroup {
                    kind: ChannelKind::Gps,
                    replicates: 1,
                    mount_cm: 0.0,
                    noise_sigma: 5.0,
                    grade: Grade::Cheap,
                    gain: 1.0,
                    offset: 0.0,
                },
                SensorGroup {
                    kind: ChannelKind::AccelStatus,
                    replicates: 1,
                    mount_cm: 0.0,
                    noise_sigma: 0.0,
                    grade: Grade::Cheap,
                    gain: 1.0,
                    offset: 0.0,
                },
            ],
        }
    }

    /// Expands replicate groups into channels with distinct ids
    /// (`air_temp.1`, `air_temp.2`, ...). Every group sharing a kind is
    /// numbered in sequence.
    pub fn channels(&self) -> Vec<ChannelSpec> {
        let mut counters: BTreeMap<ChannelKind, u32> = BTreeMap::new();
        let mut out = Vec::new();
        for g in &self.groups {
            if g.kind == ChannelKind::Gps {
                for axis in ["lat", "lon"] {
                    out.push(ChannelSpec {
                        id: format!("gps.{axis}"),
                        kind: g.kind,
                        mount_cm: g.mount_cm,
                        noise_sigma: g.noise_sigma,
                        grade: g.grade,
                        gain: 1.0,
                        offset: 0.0,
                        unit: g.kind.unit().to_string(),
                    });
                }
                continue;
            }
            for _ in 0..g.replicates {
                let n = counters.entry(g.kind).or_insert(0);
                *n += 1;
                out.push(ChannelSpec {
                    id: format!("{}.{}", g.kind.name(), n),
                    kind: g.kind,
                    mount_cm: g.mount_cm,
                    noise_sigma: g.noise_sigma,
                    grade: g.grade,
                    gain: g.gain,
                    offset: g.offset,
                    unit: g.kind.unit().to_string(),
                });
            }
        }
        out
    }

    pub fn channel(&self, id: &str) -> Option<ChannelSpec> {
        self.channels().into_iter().find(|c| c.id == id)
    }

    pub fn has_kind(&self, kind: ChannelKind) -> bool {
        self.groups.iter().any(|g| g.kind == kind && g.replicates > 0)
    }
}

/// Ground truth visible to a node at sampling time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSnapshot {
    pub t: f64,
    pub air_temp: f64,
    pub humidity: f64,
    pub rain_mm_h: f64,
    pub soil: SoilState,
    pub surface_flow: bool,
    pub sheep: Option<SheepState>,
}

/// A linear drift on one channel that starts at `onset_s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrosion {
    pub rate_per_day: f64,
    pub onset_s: f64,
}

impl Corrosion {
    pub fn offset_at(&self, t: f64) -> f64 {
        if t < self.onset_s {
            0.0
        } else {
            self.rate_per_day * (t - self.onset_s) / SECONDS_PER_DAY
        }
    }
}

/// Samples every scalar channel of the complement. GPS and behaviour
/// channels are handled by the livestock path and skipped here.
pub fn sample_sensors<R: Rng + ?Sized>(
    complement: &SensorComplement,
    env: &EnvSnapshot,
    corrosion: &BTreeMap<String, Corrosion>,
    condensation_fp_rate: f64,
    rng: &mut R,
) -> Vec<Reading> {
    let mut out = Vec::new();
    for ch in complement.channels() {
        let truth = match ch.kind {
            ChannelKind::AirTemp => env.air_temp,
            ChannelKind::AirHumidity => env.humidity,
            ChannelKind::SoilTemp => env.soil.temp,
            ChannelKind::SoilMoistureCheap | ChannelKind::SoilMoistureRef => env.soil.theta * 100.0,
            ChannelKind::SurfaceFlow => {
                let false_positive = rng.random::<f64>() < condensation_fp_rate;
                let wet = env.surface_flow || false_positive;
                out.push(Reading {
                    channel: ch.id,
                    value: ReadingValue::Number(if wet { 1.0 } else { 0.0 }),
                    unit: ch.unit,
                });
                continue;
            }
            ChannelKind::Gps | ChannelKind::AccelStatus => continue,
        };
        let z: f64 = StandardNormal.sample(rng);
        let drift = corrosion.get(&ch.id).map_or(0.0, |c| c.offset_at(env.t));
        let value = ch.gain * truth + ch.offset + ch.noise_sigma * z + drift;
        out.push(Reading {
            channel: ch.id,
            value: ReadingValue::Number(value),
            unit: ch.unit,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::SoilParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn snapshot() -> EnvSnapshot {
        let p = SoilParams::default();
        EnvSnapshot {
            t: 0.0,
            air_temp: 7.5,
            humidity: 88.0,
            rain_mm_h: 0.0,
            soil: SoilState::new(&p, 0.3, 6.0),
            surface_flow: false,
            sheep: None,
        }
    }

    fn noiseless(mut c: SensorComplement) -> SensorComplement {
        for g in &mut c.groups {
            g.noise_sigma = 0.0;
            g.gain = 1.0;
            g.offset = 0.0;
        }
        c
    }

    #[test]
    fn soil_default_has_thirteen_channels() {
        let c = SensorComplement::soil_default(false);
        assert_eq!(c.channels().len(), 13);
        assert_eq!(SensorComplement::soil_default(true).channels().len(), 14);
        let mut ids: Vec<_> = c.channels().into_iter().map(|c| c.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 13);
    }

    #[test]
    fn noiseless_samples_equal_truth() {
        let c = noiseless(SensorComplement::soil_default(true));
        let env = snapshot();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let readings = sample_sensors(&c, &env, &BTreeMap::new(), 0.0, &mut rng);
        assert_eq!(readings.len(), 14);
        for r in readings {
            let v = r.value.as_f64().unwrap();
            let expect = match r.channel.split('.').next().unwrap() {
                "air_temp" => 7.5,
                "air_humidity" => 88.0,
                "soil_temp" => 6.0,
                "soil_moisture_cheap" | "soil_moisture_ref" => 30.0,
                "surface_flow" => 0.0,
                other => panic!("unexpected {other}"),
            };
            assert!((v - expect).abs() < 1e-12, "{}: {v}", r.channel);
        }
    }

    #[test]
    fn corrosion_drift_is_linear() {
        let c = noiseless(SensorComplement::soil_default(false));
        let mut env = snapshot();
        env.t = 5.0 * SECONDS_PER_DAY;
        let corrosion = BTreeMap::from([(
            "soil_moisture_cheap.2".to_string(),
            Corrosion {
                rate_per_day: 0.5,
                onset_s: SECONDS_PER_DAY,
            },
        )]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let readings = sample_sensors(&c, &env, &corrosion, 0.0, &mut rng);
        let get = |id: &str| {
            readings
                .iter()
                .find(|r| r.channel == id)
                .unwrap()
                .value
                .as_f64()
                .unwrap()
        };
        assert!((get("soil_moisture_cheap.2") - 32.0).abs() < 1e-12);
        assert!((get("soil_moisture_cheap.1") - 30.0).abs() < 1e-12);
    }

    #[test]
    fn condensation_fires_false_positives() {
        let c = SensorComplement::soil_default(false);
        let env = snapshot();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let readings = sample_sensors(&c, &env, &BTreeMap::new(), 1.0, &mut rng);
        let flow = readings.iter().find(|r| r.channel == "surface_flow.1").unwrap();
        assert_eq!(flow.value, ReadingValue::Number(1.0));
    }

    #[test]
    fn reference_grade_is_quieter() {
        let c = SensorComplement::soil_default(true);
        let chans = c.channels();
        let cheap = chans.iter().find(|c| c.kind == ChannelKind::SoilMoistureCheap).unwrap();
        let reference = chans.iter().find(|c| c.kind == ChannelKind::SoilMoistureRef).unwrap();
        assert!(reference.noise_sigma < cheap.noise_sigma);
    }
}
