//! Planning arithmetic and sensor calibration.

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::fieldnode::power::{DutyCycle, PowerProfile};

pub const DEFAULT_DERATING: f64 = 0.7;

/// Exact time-weighted mean current over one duty cycle.
pub fn average_current(p: &PowerProfile, d: &DutyCycle) -> f64 {
    let (awake, sleep) = (d.awake_s as f64, d.sleep_s as f64);
    (awake * p.active_ma + sleep * p.sleep_ma) / (awake + sleep)
}

/// Planned lifetime in hours: capacity / current, scaled by the usable
/// fraction of nominal capacity.
pub fn battery_life(capacity_mah: f64, avg_ma: f64, derating: f64) -> Result<f64, AnalysisError> {
    if !(capacity_mah > 0.0) || !(avg_ma > 0.0) {
        return Err(AnalysisError::Invalid("capacity and current must be positive".into()));
    }
    if !(derating > 0.0 && derating <= 1.0) {
        return Err(AnalysisError::Invalid(format!("derating {derating} outside (0, 1]")));
    }
    Ok(capacity_mah / avg_ma * derating)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimePlan {
    pub capacity_mah: f64,
    pub avg_ma: f64,
    pub derating: f64,
    pub hours: f64,
}

impl LifetimePlan {
    pub fn new(capacity_mah: f64, avg_ma: f64, derating: f64) -> Result<Self, AnalysisError> {
        Ok(Self {
            capacity_mah,
            avg_ma,
            derating,
            hours: battery_life(capacity_mah, avg_ma, derating)?,
        })
    }

    pub fn for_profile(
        capacity_mah: f64,
        profile: &PowerProfile,
        duty: &DutyCycle,
        derating: f64,
    ) -> Result<Self, AnalysisError> {
        Self::new(capacity_mah, average_current(profile, duty), derating)
    }

    pub fn days(&self) -> f64 {
        self.hours / 24.0
    }
}

/// One sample of an exported series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: u64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl CalibrationFit {
    pub fn apply(&self, cheap: f64) -> f64 {
        self.slope * cheap + self.intercept
    }
}

/// Half the median sampling interval of a series; 0 for fewer than two points.
pub fn half_period(series: &[SeriesPoint]) -> u64 {
    let mut ts: Vec<u64> = series.iter().map(|p| p.t).collect();
    ts.sort_unstable();
    let mut gaps: Vec<u64> = ts.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0).collect();
    if gaps.is_empty() {
        return 0;
    }
    gaps.sort_unstable();
    gaps[gaps.len() / 2] / 2
}

/// Pairs each cheap sample with the nearest reference sample no further than
/// `tolerance_s` away. Ties go to the earlier reference sample.
pub fn time_join(cheap: &[SeriesPoint], reference: &[SeriesPoint], tolerance_s: u64) -> Vec<(f64, f64)> {
    let mut refs = reference.to_vec();
    refs.sort_by_key(|p| p.t);
    let mut out = Vec::new();
    for c in cheap {
        let i = refs.partition_point(|r| r.t < c.t);
        let before = i.checked_sub(1).map(|j| refs[j]);
        let after = refs.get(i).copied();
        let best = match (before, after) {
            (Some(b), Some(a)) => Some(if c.t - b.t <= a.t - c.t { b } else { a }),
            (b, a) => b.or(a),
        };
        if let Some(r) = best {
            if r.t.abs_diff(c.t) <= tolerance_s {
                out.push((c.value, r.value));
            }
        }
    }
    out
}

/// Ordinary least squares y ≈ slope·x + intercept.
pub fn ols(points: &[(f64, f64)]) -> Result<CalibrationFit, AnalysisError> {
    let n = points.len();
    if n < 2 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= f64::EPSILON * nf * mx.abs().max(1.0) {
        return Err(AnalysisError::ZeroVariance);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = points
            .iter()
            .map(|&(x, y)| {
                let e = y - (slope * x + intercept);
                e * e
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(CalibrationFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

/// Fits reference ≈ slope·cheap + intercept after a nearest-neighbour time
/// join. Without an explicit tolerance, half the cheap series' sampling
/// period is used.
pub fn fit_calibration(
    cheap: &[SeriesPoint],
    reference: &[SeriesPoint],
    tolerance_s: Option<u64>,
) -> Result<CalibrationFit, AnalysisError> {
    let tol = tolerance_s.unwrap_or_else(|| half_period(cheap));
    ols(&time_join(cheap, reference, tol))
}
