//! Current draw, duty cycle and the battery bank.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub active_ma: f64,
    pub sleep_ma: f64,
    /// Share of `active_ma` drawn by the microcontroller board alone.
    #[serde(default)]
    pub board_active_ma: f64,
    #[serde(default)]
    pub board_sleep_ma: f64,
    /// Nominal extra awake time per GPS fix, for planning.
    #[serde(default)]
    pub gps_fix_extra_s: u64,
}

impl PowerProfile {
    /// Measured draw of a complete soil node.
    pub fn soil_default() -> Self {
        Self {
            active_ma: 130.0,
            sleep_ma: 45.0,
            board_active_ma: 90.0,
            board_sleep_ma: 30.0,
            gps_fix_extra_s: 0,
        }
    }

    pub fn livestock_default() -> Self {
        Self {
            active_ma: 120.0,
            sleep_ma: 50.0,
            board_active_ma: 90.0,
            board_sleep_ma: 30.0,
            gps_fix_extra_s: 30,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.active_ma > self.sleep_ma && self.sleep_ma > 0.0) {
            return Err(format!(
                "power profile needs active_ma > sleep_ma > 0, got {} / {}",
                self.active_ma, self.sleep_ma
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DutyCycle {
    pub sleep_s: u64,
    pub awake_s: u64,
}

impl DutyCycle {
    /// Five minutes asleep, five seconds awake.
    pub const DEFAULT: DutyCycle = DutyCycle {
        sleep_s: 300,
        awake_s: 5,
    };

    pub fn period_s(&self) -> u64 {
        self.sleep_s + self.awake_s
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sleep_s == 0 || self.awake_s == 0 {
            return Err("duty cycle needs sleep_s > 0 and awake_s > 0".into());
        }
        Ok(())
    }
}

impl Default for DutyCycle {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pack {
    pub capacity_mah: f64,
    pub charge_mah: f64,
    /// Charge at or below which the pack's protection circuit opens.
    #[serde(default)]
    pub lower_cutoff_mah: f64,
    /// Charge at or above which charging trips the protection circuit.
    #[serde(default)]
    pub upper_cutoff_mah: Option<f64>,
    #[serde(default)]
    pub protection_cut: bool,
}

impl Pack {
    pub fn full(capacity_mah: f64) -> Self {
        Self {
            capacity_mah,
            charge_mah: capacity_mah,
            lower_cutoff_mah: 0.0,
            upper_cutoff_mah: None,
            protection_cut: false,
        }
    }
}

/// Packs wired in series. Load current is shared equally, and a single
/// tripped pack opens the circuit for the whole bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryBank {
    pub packs: Vec<Pack>,
    /// Solar trickle current at full irradiance.
    #[serde(default)]
    pub solar_trickle_ma: f64,
    #[serde(default = "default_empty_mv")]
    pub pack_empty_mv: u32,
    #[serde(default = "default_full_mv")]
    pub pack_full_mv: u32,
}

fn default_empty_mv() -> u32 {
    3000
}

fn default_full_mv() -> u32 {
    4200
}

impl BatteryBank {
    pub fn new(packs: Vec<Pack>, solar_trickle_ma: f64) -> Self {
        Self {
            packs,
            solar_trickle_ma,
            pack_empty_mv: default_empty_mv(),
            pack_full_mv: default_full_mv(),
        }
    }

    /// `n` identical full packs, no solar.
    pub fn uniform(n: usize, capacity_mah: f64) -> Self {
        Self::new(vec![Pack::full(capacity_mah); n], 0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.packs.is_empty() {
            return Err("battery bank has no packs".into());
        }
        for (i, p) in self.packs.iter().enumerate() {
            if !(p.capacity_mah > 0.0) || !(0.0..=p.capacity_mah).contains(&p.charge_mah) {
                return Err(format!("pack {i}: charge must lie in [0, capacity]"));
            }
            if p.lower_cutoff_mah < 0.0 || p.lower_cutoff_mah >= p.capacity_mah {
                return Err(format!("pack {i}: lower cutoff outside [0, capacity)"));
            }
        }
        if self.solar_trickle_ma < 0.0 {
            return Err("solar trickle current is negative".into());
        }
        Ok(())
    }

    pub fn tripped(&self) -> bool {
        self.packs.iter().any(|p| p.protection_cut)
    }

    pub fn capacity_mah(&self) -> f64 {
        self.packs.iter().map(|p| p.capacity_mah).sum()
    }

    /// Total stored charge, ignoring protection state.
    pub fn stored_mah(&self) -> f64 {
        self.packs.iter().map(|p| p.charge_mah).sum()
    }

    /// Charge usable by the load: zero once any pack has tripped.
    pub fn available_mah(&self) -> f64 {
        if self.tripped() {
            0.0
        } else {
            self.stored_mah()
        }
    }

    pub fn charge_fraction(&self) -> f64 {
        self.stored_mah() / self.capacity_mah()
    }

    /// Terminal voltage from an affine charge-to-voltage map per pack.
    pub fn battery_mv(&self) -> u32 {
        if self.tripped() {
            return 0;
        }
        let span = (self.pack_full_mv - self.pack_empty_mv) as f64;
        self.packs
            .iter()
            .map(|p| self.pack_empty_mv as f64 + span * (p.charge_mah / p.capacity_mah))
            .sum::<f64>()
            .round() as u32
    }

    pub fn trip(&mut self) {
        if let Some(p) = self.packs.first_mut() {
            p.protection_cut = true;
        }
    }

    /// Draws `mah` in total, shared equally between packs. Returns the amount
    /// actually drawn, which is less than asked when packs run dry.
    pub fn drain(&mut self, mah: f64) -> f64 {
        if self.tripped() || mah <= 0.0 {
            return 0.0;
        }
        let share = mah / self.packs.len() as f64;
        let mut drawn = 0.0;
        for p in &mut self.packs {
            let take = share.min(p.charge_mah);
            p.charge_mah -= take;
            drawn += take;
            if p.charge_mah <= p.lower_cutoff_mah {
                p.protection_cut = true;
            }
        }
        drawn
    }

    /// Adds `mah` in total, shared equally and capped at capacity. Returns
    /// the amount actually stored.
    pub fn charge(&mut self, mah: f64) -> f64 {
        if self.tripped() || mah <= 0.0 {
            return 0.0;
        }
        let share = mah / self.packs.len() as f64;
        let mut stored = 0.0;
        for p in &mut self.packs {
            let put = share.min(p.capacity_mah - p.charge_mah);
            p.charge_mah += put;
            stored += put;
            if let Some(upper) = p.upper_cutoff_mah {
                if p.charge_mah >= upper {
                    p.protection_cut = true;
                }
            }
        }
        stored
    }
}

/// Charge drawn over one awake and one sleep interval, in mAh.
pub fn cycle_charge_mah(profile: &PowerProfile, awake_s: f64, sleep_s: f64) -> f64 {
    (awake_s * profile.active_ma + sleep_s * profile.sleep_ma) / 3600.0
}

/// Applies the load of one awake/sleep interval to the bank. Returns the
/// charge drawn.
pub fn consume_energy(bank: &mut BatteryBank, profile: &PowerProfile, awake_s: f64, sleep_s: f64) -> f64 {
    bank.drain(cycle_charge_mah(profile, awake_s, sleep_s))
}

/// Solar trickle charge over `dt_s` seconds. Returns the charge stored.
pub fn solar_harvest(bank: &mut BatteryBank, irradiance_factor: f64, dt_s: f64) -> f64 {
    let mah = bank.solar_trickle_ma * irradiance_factor.clamp(0.0, 1.0) * dt_s / 3600.0;
    bank.charge(mah)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_cycle_consumes_14150_over_3600() {
        let mut bank = BatteryBank::uniform(1, 7800.0);
        let drawn = consume_energy(&mut bank, &PowerProfile::soil_default(), 5.0, 300.0);
        assert!((drawn - 14150.0 / 3600.0).abs() < 1e-12);
        assert!((drawn - 3.931).abs() < 1e-3);
        assert!((bank.stored_mah() - (7800.0 - 14150.0 / 3600.0)).abs() < 1e-9);
    }

    #[test]
    fn zero_durations_leave_bank_unchanged() {
        let mut bank = BatteryBank::uniform(3, 7800.0);
        let before = bank.clone();
        assert_eq!(consume_energy(&mut bank, &PowerProfile::soil_default(), 0.0, 0.0), 0.0);
        assert_eq!(bank, before);
    }

    #[test]
    fn one_pack_at_cutoff_opens_whole_bank() {
        let mut bank = BatteryBank::uniform(3, 7800.0);
        for p in &mut bank.packs {
            p.lower_cutoff_mah = 400.0;
        }
        bank.packs[2].charge_mah = 401.0;
        bank.drain(6.0);
        assert!(bank.packs[2].protection_cut);
        assert!(bank.packs[0].charge_mah > 7000.0);
        assert_eq!(bank.available_mah(), 0.0);
        assert_eq!(bank.battery_mv(), 0);
    }

    #[test]
    fn solar_harvest_scales_with_irradiance() {
        let mut dark = BatteryBank::new(
            vec![Pack {
                charge_mah: 1000.0,
                ..Pack::full(7800.0)
            }],
            50.0,
        );
        assert_eq!(solar_harvest(&mut dark, 0.0, 3600.0), 0.0);

        let mut sunny = dark.clone();
        assert!((solar_harvest(&mut sunny, 1.0, 3600.0) - 50.0).abs() < 1e-12);

        let mut stormy = dark.clone();
        let got = solar_harvest(&mut stormy, 0.1, 3600.0);
        assert!((got - 5.0).abs() < 1e-12);
    }

    #[test]
    fn harvest_caps_at_capacity_and_skips_tripped_banks() {
        let mut bank = BatteryBank::new(
            vec![Pack {
                charge_mah: 7790.0,
                ..Pack::full(7800.0)
            }],
            50.0,
        );
        assert!((solar_harvest(&mut bank, 1.0, 3600.0) - 10.0).abs() < 1e-9);
        assert_eq!(bank.stored_mah(), 7800.0);
        bank.packs[0].charge_mah = 100.0;
        bank.trip();
        assert_eq!(solar_harvest(&mut bank, 1.0, 3600.0), 0.0);
    }

    #[test]
    fn voltage_is_affine_in_charge() {
        let mut bank = BatteryBank::uniform(3, 7800.0);
        assert_eq!(bank.battery_mv(), 3 * 4200);
        for p in &mut bank.packs {
            p.charge_mah = 3900.0;
        }
        assert_eq!(bank.battery_mv(), 3 * 3600);
    }

    proptest! {
        #[test]
        fn charge_stays_in_bounds_and_conserves(
            steps in proptest::collection::vec((0.0f64..20.0, 0.0f64..600.0, 0.0f64..1.0), 1..300),
            trickle in 0.0f64..100.0,
        ) {
            let mut bank = BatteryBank::new(vec![Pack::full(500.0), Pack { charge_mah: 300.0, ..Pack::full(500.0) }], trickle);
            let start = bank.stored_mah();
            let profile = PowerProfile::soil_default();
            let (mut out, mut inflow) = (0.0, 0.0);
            for (awake, sleep, irr) in steps {
                inflow += solar_harvest(&mut bank, irr, awake + sleep);
                out += consume_energy(&mut bank, &profile, awake, sleep);
                for p in &bank.packs {
                    prop_assert!(p.charge_mah >= 0.0 && p.charge_mah <= p.capacity_mah);
                }
            }
            prop_assert!((start - bank.stored_mah() - (out - inflow)).abs() < 1e-9);
        }
    }
}
