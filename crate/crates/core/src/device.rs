//! Bitcell model: bias-dependent TMR and ramp-driven switching time.
//!
//! Units throughout the crate: ohms, microamps, nanoseconds, volts.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Volts produced by `current_ua` flowing through `r_ohm`.
#[inline]
pub fn ohmic(current_ua: f64, r_ohm: f64) -> f64 {
    current_ua * r_ohm * 1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// 2.5 kΩ / 5 kΩ array.
    #[serde(rename = "LO")]
    Lo,
    /// 5 kΩ / 10 kΩ array.
    #[serde(rename = "HI")]
    Hi,
}

impl Flavor {
    pub fn label(self) -> &'static str {
        match self {
            Flavor::Lo => "LO",
            Flavor::Hi => "HI",
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LO" => Ok(Flavor::Lo),
            "HI" => Ok(Flavor::Hi),
            other => Err(SimError::Config(format!("unknown flavor '{other}' (expected LO or HI)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum State {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtjNominal {
    pub r_low0: f64,
    pub r_high0: f64,
    /// Tunnel oxide thickness, nm.
    pub tox_mean: f64,
    pub tox_sigma_frac: f64,
    /// Junction area, nm².
    pub area_mean: f64,
    pub area_sigma_frac: f64,
    pub flavor: Flavor,
}

impl MtjNominal {
    pub fn for_flavor(flavor: Flavor) -> Self {
        let (r_low0, area_mean) = match flavor {
            Flavor::Lo => (2500.0, 50.0 * 94.0),
            Flavor::Hi => (5000.0, 30.0 * 94.0),
        };
        MtjNominal {
            r_low0,
            r_high0: 2.0 * r_low0,
            tox_mean: 1.2,
            tox_sigma_frac: 0.025,
            area_mean,
            area_sigma_frac: 0.15,
            flavor,
        }
    }

    pub fn tmr0(&self) -> f64 {
        tmr_of(self.r_low0, self.r_high0).unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_low0 > 0.0 && self.r_high0 > self.r_low0) {
            return Err(SimError::Config(format!(
                "{} nominal needs r_high0 > r_low0 > 0 (got {} / {})",
                self.flavor.label(),
                self.r_low0,
                self.r_high0
            )));
        }
        for (name, v) in [("tox_sigma_frac", self.tox_sigma_frac), ("area_sigma_frac", self.area_sigma_frac)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SimError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.tox_mean > 0.0 && self.area_mean > 0.0) {
            return Err(SimError::Config("tox_mean and area_mean must be positive".into()));
        }
        Ok(())
    }
}

/// Piecewise-linear TMR reduction versus bias, held constant past the last point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RolloffCurve {
    pub points: Vec<(f64, f64)>,
}

impl Default for RolloffCurve {
    fn default() -> Self {
        RolloffCurve { points: vec![(0.0, 0.0), (0.25, 0.15), (0.6, 0.51)] }
    }
}

impl RolloffCurve {
    /// No bias dependence (poly-resistor bitcells).
    pub fn flat() -> Self {
        RolloffCurve { points: vec![(0.0, 0.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::Config(format!("rolloff curve: {m}")));
        match self.points.first() {
            Some(&(v, r)) if v == 0.0 && r == 0.0 => {}
            _ => return bad("first point must be (0, 0)"),
        }
        for w in self.points.windows(2) {
            let ((v0, r0), (v1, r1)) = (w[0], w[1]);
            if v1 <= v0 {
                return bad("voltages must be strictly increasing");
            }
            if r1 < r0 {
                return bad("reductions must be non-decreasing");
            }
        }
        if self.points.iter().any(|&(_, r)| !(0.0..1.0).contains(&r)) {
            return bad("reductions must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn reduction(&self, v: f64) -> f64 {
        let pts = &self.points;
        let last = pts[pts.len() - 1];
        if v >= last.0 {
            return last.1;
        }
        for w in pts.windows(2) {
            let ((v0, r0), (v1, r1)) = (w[0], w[1]);
            if v <= v1 {
                return r0 + (r1 - r0) * (v - v0) / (v1 - v0);
            }
        }
        last.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSample {
    pub r_low: f64,
    pub r_high: f64,
    /// Zero-bias TMR, percent.
    pub tmr0: f64,
    /// Switching time at the reference slope, ns.
    pub t_sw_ref: f64,
    pub switching_sigma: f64,
}

impl DeviceSample {
    pub fn new(r_low: f64, r_high: f64, t_sw_ref: f64, switching_sigma: f64) -> Self {
        DeviceSample {
            r_low,
            r_high,
            tmr0: 100.0 * (r_high - r_low) / r_low,
            t_sw_ref,
            switching_sigma,
        }
    }

    /// Every resistance multiplied by `factor` (die corner).
    pub fn scaled(&self, factor: f64) -> Self {
        DeviceSample::new(self.r_low * factor, self.r_high * factor, self.t_sw_ref, self.switching_sigma)
    }
}

pub fn tmr_of(r_low: f64, r_high: f64) -> Result<f64> {
    if !(r_low > 0.0) {
        return Err(SimError::Domain(format!("r_low must be positive, got {r_low}")));
    }
    Ok(100.0 * (r_high - r_low) / r_low)
}

pub fn tmr_at_voltage(tmr0: f64, v: f64, curve: &RolloffCurve) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(SimError::Domain(format!("bias must be non-negative, got {v}")));
    }
    Ok(tmr0 * (1.0 - curve.reduction(v)))
}

pub fn resistance_at_bias(sample: &DeviceSample, state: State, v: f64, curve: &RolloffCurve) -> Result<f64> {
    match state {
        State::Low => {
            if !(v >= 0.0) {
                return Err(SimError::Domain(format!("bias must be non-negative, got {v}")));
            }
            Ok(sample.r_low)
        }
        State::High => Ok(sample.r_low * (1.0 + tmr_at_voltage(sample.tmr0, v, curve)? / 100.0)),
    }
}

/// Voltage across a high-state cell carrying `current_ua`, with the rolloff
/// evaluated at that same voltage. Solved exactly on the linear segments.
pub fn high_state_voltage(current_ua: f64, r_low: f64, tmr0: f64, curve: &RolloffCurve) -> Result<f64> {
    let a = ohmic(current_ua, r_low);
    let t = tmr0 / 100.0;
    if a <= 0.0 || t == 0.0 {
        return Ok(a * (1.0 + t));
    }
    // g(v) = v - a(1 + t(1 - red(v))) is strictly increasing; find its root.
    let g = |v: f64, red: f64| v - a * (1.0 + t * (1.0 - red));
    let pts = &curve.points;
    for w in pts.windows(2) {
        let ((v0, r0), (v1, r1)) = (w[0], w[1]);
        if g(v1, r1) >= 0.0 {
            let k = (r1 - r0) / (v1 - v0);
            let v = a * (1.0 + t - t * r0 + t * k * v0) / (1.0 + a * t * k);
            if !(v.is_finite() && v >= v0 - 1e-12 && v <= v1 + 1e-12) {
                return Err(SimError::Numeric(format!("bias solve left its segment at I={current_ua} uA")));
            }
            return Ok(v);
        }
    }
    let r_last = pts[pts.len() - 1].1;
    Ok(a * (1.0 + t * (1.0 - r_last)))
}

/// Switching-time law: the cell flips when the ramp reaches a fixed critical
/// current, so the mean scales as 1/slope and the spread as sqrt(1/slope).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchingModel {
    /// Mean switching time at `ref_slope`, ns.
    pub t_sw_ref: f64,
    pub sigma: f64,
    /// µA/ns.
    pub ref_slope: f64,
}

impl Default for SwitchingModel {
    fn default() -> Self {
        SwitchingModel { t_sw_ref: 20.3, sigma: 0.75, ref_slope: 6.0 }
    }
}

/// Standard normal truncated to ±`limit` by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, limit: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= limit {
            return z;
        }
    }
}

pub const SWITCH_TRUNCATION: f64 = 6.0;

pub fn switching_time<R: Rng + ?Sized>(sample: &DeviceSample, slope: f64, ref_slope: f64, rng: &mut R) -> Result<f64> {
    if !(slope > 0.0) {
        return Err(SimError::Domain(format!("ramp slope must be positive, got {slope}")));
    }
    let scale = ref_slope / slope;
    let sd = sample.switching_sigma * scale.sqrt();
    let t = scale * sample.t_sw_ref + sd * truncated_normal(rng, SWITCH_TRUNCATION);
    if !(t > 0.0) {
        return Err(SimError::Numeric(format!("non-positive switching time {t} ns")));
    }
    Ok(t)
}
