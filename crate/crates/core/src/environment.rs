//! Synthetic ground truth for the field of study: weather, soil water,
//! overland flow and animal movement.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const METERS_PER_DEG_LAT: f64 = 111_320.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Storm {
    pub start_s: f64,
    pub end_s: f64,
    pub intensity_mm_h: f64,
    /// Multiplier on solar input while the storm lasts.
    #[serde(default = "default_storm_irradiance")]
    pub irradiance_factor: f64,
}

fn default_storm_irradiance() -> f64 {
    0.2
}

impl Storm {
    fn covers(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

/// `mean + amplitude * sin(2π (t - phase) / day)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiurnalCycle {
    pub mean: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_s: f64,
}

impl DiurnalCycle {
    pub fn at(&self, t: f64) -> f64 {
        self.mean + self.amplitude * (2.0 * PI * (t - self.phase_s) / SECONDS_PER_DAY).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherScenario {
    #[serde(default)]
    pub storms: Vec<Storm>,
    pub air_temp: DiurnalCycle,
    pub humidity: DiurnalCycle,
    /// Modulate solar input by a day/night sinusoid.
    #[serde(default = "yes")]
    pub daylight: bool,
}

fn yes() -> bool {
    true
}

impl Default for WeatherScenario {
    fn default() -> Self {
        Self {
            storms: Vec::new(),
            air_temp: DiurnalCycle {
                mean: 6.0,
                amplitude: 4.0,
                phase_s: 21_600.0,
            },
            humidity: DiurnalCycle {
                mean: 85.0,
                amplitude: 10.0,
                phase_s: 64_800.0,
            },
            daylight: true,
        }
    }
}

impl WeatherScenario {
    /// A wet winter preset: repeated frontal storms, one of them severe.
    pub fn storm_season(days: u64) -> Self {
        let mut storms = Vec::new();
        let day = SECONDS_PER_DAY;
        let mut d = 1.0;
        while d < days as f64 {
            storms.push(Storm {
                start_s: d * day + 3.0 * 3600.0,
                end_s: d * day + 15.0 * 3600.0,
                intensity_mm_h: 4.0,
                irradiance_factor: 0.3,
            });
            d += 3.0;
        }
        if days > 5 {
            storms.push(Storm {
                start_s: 5.0 * day,
                end_s: 6.5 * day,
                intensity_mm_h: 12.0,
                irradiance_factor: 0.1,
            });
        }
        Self {
            storms,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (i, s) in self.storms.iter().enumerate() {
            if !(s.start_s < s.end_s) || s.start_s < 0.0 {
                return Err(format!("storm {i}: interval [{}, {}) is malformed", s.start_s, s.end_s));
            }
            if !(s.intensity_mm_h >= 0.0) {
                return Err(format!("storm {i}: negative intensity"));
            }
            if !(0.0..=1.0).contains(&s.irradiance_factor) {
                return Err(format!("storm {i}: irradiance_factor outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Rainfall in mm/h. Overlapping storms add.
    pub fn rainfall_at(&self, t: f64) -> f64 {
        self.storms
            .iter()
            .filter(|s| s.covers(t))
            .map(|s| s.intensity_mm_h)
            .sum()
    }

    /// Solar input relative to a clear midday, in [0, 1].
    pub fn irradiance_at(&self, t: f64) -> f64 {
        let cloud = self
            .storms
            .iter()
            .filter(|s| s.covers(t))
            .map(|s| s.irradiance_factor)
            .fold(1.0, f64::min);
        let sun = if self.daylight {
            (2.0 * PI * (t - 21_600.0) / SECONDS_PER_DAY).sin().max(0.0)
        } else {
            1.0
        };
        cloud * sun
    }

    /// Air temperature (°C) and relative humidity (%).
    pub fn air_conditions(&self, t: f64) -> (f64, f64) {
        let temp = self.air_temp.at(t);
        let humidity = self.humidity.at(t).clamp(0.0, 100.0);
        (temp, humidity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoilParams {
    /// Moisture gain per (mm/h of rain) per second.
    pub k_in: f64,
    /// Drainage rate toward the residual fraction, per second.
    pub k_out: f64,
    pub theta_r: f64,
    pub theta_sat: f64,
    /// Time constant of soil temperature following air temperature.
    pub temp_lag_s: f64,
}

impl Default for SoilParams {
    fn default() -> Self {
        Self {
            k_in: 3.5e-6,
            k_out: 5.8e-6,
            theta_r: 0.10,
            theta_sat: 0.45,
            temp_lag_s: 6.0 * 3600.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoilState {
    pub theta: f64,
    pub temp: f64,
    pub theta_r: f64,
    pub theta_sat: f64,
}

impl SoilState {
    pub fn new(params: &SoilParams, theta: f64, temp: f64) -> Self {
        Self {
            theta: theta.clamp(params.theta_r, params.theta_sat),
            temp,
            theta_r: params.theta_r,
            theta_sat: params.theta_sat,
        }
    }
}

/// One explicit step of the single-bucket reservoir.
pub fn step_soil(s: &SoilState, params: &SoilParams, rain_mm_h: f64, air_temp: f64, dt: f64) -> SoilState {
    debug_assert!(dt > 0.0);
    let theta = s.theta + params.k_in * rain_mm_h * dt - params.k_out * (s.theta - s.theta_r) * dt;
    let alpha = (dt / params.temp_lag_s).min(1.0);
    SoilState {
        theta: theta.clamp(s.theta_r, s.theta_sat),
        temp: s.temp + alpha * (air_temp - s.temp),
        theta_r: s.theta_r,
        theta_sat: s.theta_sat,
    }
}

/// Overland flow occurs once the soil is saturated and rain is still falling.
pub fn surface_flow(s: &SoilState, rain_mm_h: f64) -> bool {
    s.theta >= s.theta_sat && rain_mm_h > 0.0
}

/// Shifts a position by a local east/north displacement in metres.
pub fn offset_position(pos: (f64, f64), east_m: f64, north_m: f64) -> (f64, f64) {
    let (lat, lon) = pos;
    let dlat = north_m / METERS_PER_DEG_LAT;
    let dlon = east_m / (METERS_PER_DEG_LAT * lat.to_radians().cos());
    (lat + dlat, lon + dlon)
}

/// Local planar distance in metres between two nearby positions.
pub fn planar_distance_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let north = (b.0 - a.0) * METERS_PER_DEG_LAT;
    let east = (b.1 - a.1) * METERS_PER_DEG_LAT * a.0.to_radians().cos();
    north.hypot(east)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoFence {
    /// Vertices as (lat, lon).
    pub polygon: Vec<(f64, f64)>,
}

impl GeoFence {
    pub fn new(polygon: Vec<(f64, f64)>) -> Result<Self, String> {
        let fence = Self { polygon };
        fence.validate()?;
        Ok(fence)
    }

    /// The default field of study, a gently skewed quadrilateral of roughly
    /// 400 m by 250 m.
    pub fn field_of_study() -> Self {
        Self {
            polygon: vec![
                (53.0700, -3.9300),
                (53.0702, -3.9242),
                (53.0680, -3.9238),
                (53.0678, -3.9296),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.polygon.len();
        if n < 3 {
            return Err(format!("geofence needs at least 3 vertices, got {n}"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (self.polygon[i], self.polygon[(i + 1) % n]);
                let (c, d) = (self.polygon[j], self.polygon[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(format!("geofence edges {i} and {j} intersect"));
                }
            }
        }
        Ok(())
    }

    /// Even-odd ray casting test.
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let (y, x) = p;
        let mut inside = false;
        let n = self.polygon.len();
        let mut j = n - 1;
        for i in 0..n {
            let (yi, xi) = self.polygon[i];
            let (yj, xj) = self.polygon[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.polygon.len() as f64;
        let (sl, so) = self
            .polygon
            .iter()
            .fold((0.0, 0.0), |(a, b), (la, lo)| (a + la, b + lo));
        (sl / n, so / n)
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Lying,
    Standing,
    Walking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheepState {
    pub pos: (f64, f64),
    pub heading: f64,
    pub speed: f64,
    pub activity: Activity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheepParams {
    /// Mean walking speed in m/s. Zero freezes the animal.
    pub speed_scale: f64,
    /// Standard deviation of the heading change per step, radians.
    pub heading_sigma: f64,
    /// Probability per step of switching activity.
    pub switch_prob: f64,
}

impl Default for SheepParams {
    fn default() -> Self {
        Self {
            speed_scale: 0.4,
            heading_sigma: 0.6,
            switch_prob: 0.05,
        }
    }
}

/// Correlated random walk, reflected at the fence.
pub fn step_sheep<R: Rng + ?Sized>(
    s: &SheepState,
    fence: &GeoFence,
    params: &SheepParams,
    dt: f64,
    rng: &mut R,
) -> SheepState {
    if params.speed_scale == 0.0 {
        return *s;
    }
    let mut next = *s;
    if rng.random::<f64>() < params.switch_prob {
        next.activity = match rng.random_range(0..3) {
            0 => Activity::Lying,
            1 => Activity::Standing,
            _ => Activity::Walking,
        };
    }
    let turn = Normal::new(0.0, params.heading_sigma.max(0.0))
        .map(|n| n.sample(rng))
        .unwrap_or(0.0);
    next.heading = (s.heading + turn).rem_euclid(2.0 * PI);
    next.speed = match next.activity {
        Activity::Walking => params.speed_scale * rng.random_range(0.5..1.5),
        _ => 0.0,
    };
    let step = next.speed * dt;
    if step == 0.0 {
        next.pos = s.pos;
        return next;
    }
    let moved = offset_position(s.pos, step * next.heading.sin(), step * next.heading.cos());
    if fence.contains(moved) {
        next.pos = moved;
        return next;
    }
    next.heading = (next.heading + PI).rem_euclid(2.0 * PI);
    let reflected = offset_position(s.pos, step * next.heading.sin(), step * next.heading.cos());
    next.pos = if fence.contains(reflected) { reflected } else { s.pos };
    next
}
