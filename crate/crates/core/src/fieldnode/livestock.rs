//! GPS fixes and on-node behaviour classification for tracker collars.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environment::{offset_position, Activity, SheepState};

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsConfig {
    /// Per-axis position error in metres.
    pub sigma_m: f64,
    pub fix_delay_min_s: u64,
    pub fix_delay_max_s: u64,
    pub failure_prob: f64,
}

impl Default for GpsConfig {
    fn default() -> Self {
        Self {
            sigma_m: 5.0,
            fix_delay_min_s: 20,
            fix_delay_max_s: 45,
            failure_prob: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpsFix {
    /// `None` when the receiver failed to get a fix this cycle.
    pub point: Option<(f64, f64)>,
    pub fix_delay_s: u64,
}

pub fn gps_fix<R: Rng + ?Sized>(cfg: &GpsConfig, truth: (f64, f64), rng: &mut R) -> GpsFix {
    let fix_delay_s = if cfg.fix_delay_max_s > cfg.fix_delay_min_s {
        rng.random_range(cfg.fix_delay_min_s..=cfg.fix_delay_max_s)
    } else {
        cfg.fix_delay_min_s
    };
    let failed = rng.random::<f64>() < cfg.failure_prob;
    let east: f64 = StandardNormal.sample(rng);
    let north: f64 = StandardNormal.sample(rng);
    let point = (!failed).then(|| offset_position(truth, cfg.sigma_m * east, cfg.sigma_m * north));
    GpsFix { point, fix_delay_s }
}

/// Raw 3-axis samples in m/s². These never leave the node.
#[derive(Clone, Debug, PartialEq)]
pub struct AccelWindow {
    pub samples: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccelStats {
    pub magnitude_variance: f64,
    pub mean: [f64; 3],
}

impl AccelWindow {
    pub fn stats(&self) -> Option<AccelStats> {
        if self.samples.is_empty() {
            return None;
        }
        let n = self.samples.len() as f64;
        let mut mean = [0.0; 3];
        for s in &self.samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n;
            }
        }
        let mags: Vec<f64> = self
            .samples
            .iter()
            .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt())
            .collect();
        let mean_mag = mags.iter().sum::<f64>() / n;
        let magnitude_variance = mags.iter().map(|m| (m - mean_mag).powi(2)).sum::<f64>() / n;
        Some(AccelStats {
            magnitude_variance,
            mean,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorThresholds {
    /// Magnitude variance above which the animal is walking, (m/s²)².
    pub walking_variance: f64,
    /// Minimum cosine between the mean vector and the collar's vertical axis
    /// for an upright animal.
    pub upright_cos: f64,
}

impl Default for BehaviorThresholds {
    fn default() -> Self {
        Self {
            walking_variance: 0.1,
            upright_cos: (PI / 4.0).cos(),
        }
    }
}

pub const LYING: &str = "lying";
pub const STANDING: &str = "standing";
pub const WALKING: &str = "walking";

/// Threshold classifier over a window summary. Only the label is sent.
pub fn classify_behavior(stats: &AccelStats, thresholds: &BehaviorThresholds) -> &'static str {
    if stats.magnitude_variance > thresholds.walking_variance {
        return WALKING;
    }
    let [x, y, z] = stats.mean;
    let norm = (x * x + y * y + z * z).sqrt();
    if norm > 0.0 && z.abs() / norm >= thresholds.upright_cos {
        STANDING
    } else {
        LYING
    }
}

/// Synthesises a collar accelerometer window for an animal state. Upright
/// animals carry gravity on the z axis, lying animals on x; walking adds a
/// vertical gait oscillation whose amplitude grows with speed.
pub fn synth_accel_window<R: Rng + ?Sized>(
    sheep: &SheepState,
    samples: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> AccelWindow {
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("non-negative sigma");
    let gait_hz = 1.8;
    let rate_hz = 10.0;
    let amplitude = (3.0 * sheep.speed).max(1.0);
    let samples = (0..samples)
        .map(|i| {
            let t = i as f64 / rate_hz;
            let mut s = match sheep.activity {
                Activity::Lying => [GRAVITY, 0.0, 0.0],
                Activity::Standing => [0.0, 0.0, GRAVITY],
                Activity::Walking => [0.0, 0.0, GRAVITY + amplitude * (2.0 * PI * gait_hz * t).sin()],
            };
            for v in &mut s {
                *v += noise.sample(rng);
            }
            s
        })
        .collect();
    AccelWindow { samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::planar_distance_m;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TRUTH: (f64, f64) = (53.069, -3.927);

    #[test]
    fn exact_fix_with_fixed_delay() {
        let cfg = GpsConfig {
            sigma_m: 0.0,
            fix_delay_min_s: 30,
            fix_delay_max_s: 30,
            failure_prob: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fix = gps_fix(&cfg, TRUTH, &mut rng);
        assert_eq!(fix.point, Some(TRUTH));
        assert_eq!(fix.fix_delay_s, 30);
    }

    #[test]
    fn certain_failure_yields_no_point() {
        let cfg = GpsConfig {
            failure_prob: 1.0,
            ..GpsConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(gps_fix(&cfg, TRUTH, &mut rng).point, None);
    }

    #[test]
    fn rms_error_matches_planar_gaussian() {
        // Two independent N(0, 5²) axes give E[r²] = 2·25, so RMS = 5√2.
        let cfg = GpsConfig {
            sigma_m: 5.0,
            failure_prob: 0.0,
            ..GpsConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sq: f64 = (0..1000)
            .map(|_| planar_distance_m(TRUTH, gps_fix(&cfg, TRUTH, &mut rng).point.unwrap()).powi(2))
            .sum();
        let rms = (sq / 1000.0).sqrt();
        let expect = 5.0 * 2f64.sqrt();
        assert!((rms - expect).abs() / expect < 0.10, "rms {rms}");
    }

    fn sheep(activity: Activity, speed: f64) -> SheepState {
        SheepState {
            pos: TRUTH,
            heading: 0.0,
            speed,
            activity,
        }
    }

    #[test]
    fn degenerate_windows() {
        let t = BehaviorThresholds::default();
        let flat = AccelStats {
            magnitude_variance: 0.0,
            mean: [GRAVITY, 0.0, 0.0],
        };
        let upright = AccelStats {
            magnitude_variance: 0.0,
            mean: [0.0, 0.0, GRAVITY],
        };
        assert_eq!(classify_behavior(&flat, &t), LYING);
        assert_eq!(classify_behavior(&upright, &t), STANDING);
        assert!(AccelWindow { samples: vec![] }.stats().is_none());
    }

    #[test]
    fn noiseless_simulated_windows_have_zero_confusion() {
        let t = BehaviorThresholds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for speed in [0.2, 0.4, 0.6, 1.0] {
            let w = synth_accel_window(&sheep(Activity::Walking, speed), 50, 0.0, &mut rng);
            assert_eq!(classify_behavior(&w.stats().unwrap(), &t), WALKING);
        }
        let w = synth_accel_window(&sheep(Activity::Lying, 0.0), 50, 0.0, &mut rng);
        assert_eq!(classify_behavior(&w.stats().unwrap(), &t), LYING);
        let w = synth_accel_window(&sheep(Activity::Standing, 0.0), 50, 0.0, &mut rng);
        assert_eq!(classify_behavior(&w.stats().unwrap(), &t), STANDING);
    }
}
