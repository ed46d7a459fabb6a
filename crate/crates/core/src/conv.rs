//! Clamped voltage sensing against a shared reference column.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::device::{resistance_at_bias, tmr_at_voltage, DeviceSample, MtjNominal, RolloffCurve, State};
use crate::error::{Result, SimError};
use crate::slope::{FailureClass, ReadResult};
use crate::variation::{unit_lognormal, BitcellMode, VariationSpec};

/// Data bitlines sharing one reference column.
pub const COLUMN_GROUP: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvConfig {
    pub v_clamp: f64,
    /// Clamp transistor threshold.
    pub v_tn: f64,
    /// Effective load, ohms.
    pub r_load: f64,
    /// Load triode floor.
    pub v_floor: f64,
    /// Sense node tops out at vdd - ceil_margin.
    pub ceil_margin: f64,
    pub vdd: f64,
}

impl Default for ConvConfig {
    fn default() -> Self {
        ConvConfig { v_clamp: 0.85, v_tn: 0.6, r_load: 7200.0, v_floor: 0.3, ceil_margin: 0.1, vdd: 1.0 }
    }
}

impl ConvConfig {
    pub fn v_ceil(&self) -> f64 {
        self.vdd - self.ceil_margin
    }

    /// Voltage held across the bitline by the clamp.
    pub fn bias(&self) -> f64 {
        self.v_clamp - self.v_tn
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_floor > 0.0 && self.v_floor < self.v_ceil() && self.v_ceil() <= self.vdd) {
            return Err(SimError::Config(format!(
                "conventional sensing needs 0 < v_floor < v_ceil <= vdd (v_floor {}, v_ceil {}, vdd {})",
                self.v_floor,
                self.v_ceil(),
                self.vdd
            )));
        }
        if !(self.v_clamp > self.v_tn) {
            return Err(SimError::Config(format!("v_clamp {} must exceed v_tn {}", self.v_clamp, self.v_tn)));
        }
        if !(self.r_load > 0.0) {
            return Err(SimError::Config("r_load must be positive".into()));
        }
        Ok(())
    }
}

/// Sense-node voltage of a leg whose cell (already evaluated at bias) is `r`.
pub fn leg_voltage(r: f64, cfg: &ConvConfig) -> f64 {
    let i = cfg.bias() / r;
    (cfg.vdd - cfg.r_load * i).clamp(cfg.v_floor, cfg.v_ceil())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceColumn {
    pub r_ref: f64,
}

/// Nominal reference: midpoint of the low state and the bias-degraded high state.
pub fn nominal_reference(nominal: &MtjNominal, tmr_knob: Option<f64>, bias: f64, curve: &RolloffCurve) -> Result<f64> {
    let tmr0 = tmr_knob.unwrap_or_else(|| nominal.tmr0());
    let r_high = nominal.r_low0 * (1.0 + tmr_at_voltage(tmr0, bias, curve)? / 100.0);
    Ok(0.5 * (nominal.r_low0 + r_high))
}

/// Draws a reference column with the data cells' relative mismatch.
pub fn sample_reference<R: Rng + ?Sized>(
    spec: &VariationSpec,
    nominal: &MtjNominal,
    tmr_knob: Option<f64>,
    bias: f64,
    curve: &RolloffCurve,
    chip_factor: f64,
    rng: &mut R,
) -> Result<ReferenceColumn> {
    let r_nom = nominal_reference(nominal, tmr_knob, bias, curve)?;
    let cv = match spec.mode {
        BitcellMode::Mtj => spec.r_sigma_low,
        BitcellMode::Mimic => spec.poly_sigma_for(nominal.r_low0),
    };
    let z: f64 = rng.sample(StandardNormal);
    Ok(ReferenceColumn { r_ref: r_nom * unit_lognormal(cv, z) * chip_factor })
}

/// (sm0, sm1): reference minus low-state leg, high-state leg minus reference.
pub fn sense_margins(
    sample: &DeviceSample,
    reference: &ReferenceColumn,
    cfg: &ConvConfig,
    curve: &RolloffCurve,
) -> Result<(f64, f64)> {
    let bias = cfg.bias();
    let v_low = leg_voltage(resistance_at_bias(sample, State::Low, bias, curve)?, cfg);
    let v_high = leg_voltage(resistance_at_bias(sample, State::High, bias, curve)?, cfg);
    let v_ref = leg_voltage(reference.r_ref, cfg);
    Ok((v_ref - v_low, v_high - v_ref))
}

/// The comparator offset is the data-minus-reference voltage it needs to
/// flip, so it is subtracted from the compared difference.
pub fn conventional_read(
    sample: &DeviceSample,
    stored_bit: bool,
    reference: &ReferenceColumn,
    offset: f64,
    cfg: &ConvConfig,
    curve: &RolloffCurve,
) -> Result<ReadResult> {
    let state = if stored_bit { State::High } else { State::Low };
    let v_data = leg_voltage(resistance_at_bias(sample, state, cfg.bias(), curve)?, cfg);
    let v_ref = leg_voltage(reference.r_ref, cfg);
    let bit = v_data - v_ref - offset > 0.0;
    let (sm0, sm1) = sense_margins(sample, reference, cfg, curve)?;
    Ok(ReadResult { bit, sm0, sm1, per_circuit: vec![bit], failure_class: FailureClass::of(stored_bit, bit) })
}
