//! Catalogue of injectable faults and field actions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::NodeError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    /// Radio stops transmitting until the node is power-cycled.
    RadioHang,
    /// Power-cycles the node, clearing a radio hang.
    PowerCycle,
    /// Electrolytic corrosion: linear drift on one soil channel.
    Corrosion { channel: String, rate_per_day: f64 },
    /// A pack's protection circuit opens the series bank.
    ProtectionTrip,
    /// Submersion damage. Terminal until repaired.
    WaterIngress,
    /// Condensation in the overland-flow detector.
    Condensation { rate: f64 },
    /// Sensors drawing more current than budgeted.
    ExtraLoad { ma: f64 },
    /// Field repair: clears every fault except drained batteries.
    Repair,
    /// Field visit swapping in fully charged packs.
    ReplaceBattery,
    /// Link outage starting at the fault time.
    Outage { duration_s: u64 },
    /// Kills a relay or gateway process and restarts it from its log.
    Restart {
        #[serde(default)]
        downtime_s: u64,
    },
}

impl FaultKind {
    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::RadioHang => "radio_hang",
            FaultKind::PowerCycle => "power_cycle",
            FaultKind::Corrosion { .. } => "corrosion",
            FaultKind::ProtectionTrip => "protection_trip",
            FaultKind::WaterIngress => "water_ingress",
            FaultKind::Condensation { .. } => "condensation",
            FaultKind::ExtraLoad { .. } => "extra_load",
            FaultKind::Repair => "repair",
            FaultKind::ReplaceBattery => "replace_battery",
            FaultKind::Outage { .. } => "outage",
            FaultKind::Restart { .. } => "restart",
        }
    }

    /// Faults that target a field node rather than a link or a process.
    pub fn is_node_fault(&self) -> bool {
        !matches!(self, FaultKind::Outage { .. } | FaultKind::Restart { .. })
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses parameterless fault names. Parameterised kinds need their
/// fields and are built directly.
impl FromStr for FaultKind {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "radio_hang" => FaultKind::RadioHang,
            "power_cycle" => FaultKind::PowerCycle,
            "protection_trip" => FaultKind::ProtectionTrip,
            "water_ingress" => FaultKind::WaterIngress,
            "repair" => FaultKind::Repair,
            "replace_battery" => FaultKind::ReplaceBattery,
            "restart" => FaultKind::Restart { downtime_s: 0 },
            _ => return Err(NodeError::UnknownFault(s.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_names_and_rejects_unknown() {
        assert_eq!("radio_hang".parse::<FaultKind>().unwrap(), FaultKind::RadioHang);
        assert!(matches!(
            "gremlins".parse::<FaultKind>(),
            Err(NodeError::UnknownFault(_))
        ));
    }

    #[test]
    fn tagged_serde_form() {
        let f: FaultKind =
            serde_json::from_str(r#"{"kind":"corrosion","channel":"soil_moisture_cheap.1","rate_per_day":0.5}"#)
                .unwrap();
        assert_eq!(f.name(), "corrosion");
        assert!(serde_json::from_str::<FaultKind>(r#"{"kind":"meteor"}"#).is_err());
    }
}
