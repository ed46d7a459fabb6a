//! Process variation: per-bit device draws, per-chip corners, and the
//! seed tree that gives every (chip, trial, bit, purpose) its own stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceSample, Flavor, MtjNominal, SwitchingModel};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitcellMode {
    /// Oxide-thickness and area draws mapped to resistance, with bias rolloff.
    Mtj,
    /// Poly-resistor bitcells as on the test chip: one mismatch factor per
    /// cell shared by both states, no bias rolloff.
    Mimic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmrTargets {
    /// Mean zero-bias TMR, percent.
    pub mean: f64,
    /// One sigma, percentage points.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationSpec {
    pub mode: BitcellMode,
    /// Relative one-sigma of the low-state resistance (MTJ mode).
    pub r_sigma_low: f64,
    pub r_sigma_high: f64,
    pub tmr_lo: TmrTargets,
    pub tmr_hi: TmrTargets,
    /// Relative poly mismatch of a resistor of `poly_mismatch_ref_ohms`.
    pub poly_sigma_intra: f64,
    /// Poly mismatch is constant in ohms: a cell of nominal low resistance R
    /// sees relative sigma poly_sigma_intra * poly_mismatch_ref_ohms / R.
    pub poly_mismatch_ref_ohms: f64,
    pub poly_corner_span: f64,
    pub sa_offset_mu: f64,
    pub sa_offset_sigma: f64,
}

impl Default for VariationSpec {
    fn default() -> Self {
        VariationSpec {
            mode: BitcellMode::Mimic,
            r_sigma_low: 0.13,
            r_sigma_high: 0.11,
            tmr_lo: TmrTargets { mean: 120.0, sigma: 10.0 },
            tmr_hi: TmrTargets { mean: 128.0, sigma: 8.0 },
            poly_sigma_intra: 0.08,
            poly_mismatch_ref_ohms: 2500.0,
            poly_corner_span: 0.15,
            sa_offset_mu: 0.008,
            sa_offset_sigma: 0.016,
        }
    }
}

impl VariationSpec {
    pub fn tmr_targets(&self, flavor: Flavor) -> TmrTargets {
        match flavor {
            Flavor::Lo => self.tmr_lo,
            Flavor::Hi => self.tmr_hi,
        }
    }

    /// Relative mismatch of a mimic cell whose low state is `r_low0`.
    pub fn poly_sigma_for(&self, r_low0: f64) -> f64 {
        self.poly_sigma_intra * self.poly_mismatch_ref_ohms / r_low0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_sigma_low", self.r_sigma_low),
            ("r_sigma_high", self.r_sigma_high),
            ("poly_sigma_intra", self.poly_sigma_intra),
        ] {
            if !(0.0..0.5).contains(&v) {
                return Err(SimError::Config(format!("{name} must lie in [0, 0.5), got {v}")));
            }
        }
        if !(0.0..=0.5).contains(&self.poly_corner_span) {
            return Err(SimError::Config(format!("poly_corner_span must lie in [0, 0.5], got {}", self.poly_corner_span)));
        }
        if !(self.poly_mismatch_ref_ohms > 0.0) {
            return Err(SimError::Config("poly_mismatch_ref_ohms must be positive".into()));
        }
        if !(self.sa_offset_sigma >= 0.0) {
            return Err(SimError::Config("sa_offset_sigma must be non-negative".into()));
        }
        for t in [self.tmr_lo, self.tmr_hi] {
            if !(t.mean > 0.0 && t.sigma >= 0.0) {
                return Err(SimError::Config("TMR targets need mean > 0 and sigma >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Log-space sigma of a lognormal with unit mean and coefficient of variation `cv`.
pub fn log_sigma(cv: f64) -> f64 {
    (1.0 + cv * cv).ln().sqrt()
}

/// Unit-mean lognormal factor for a standard normal draw `z`.
#[inline]
pub fn unit_lognormal(cv: f64, z: f64) -> f64 {
    let s = log_sigma(cv);
    (s * z - 0.5 * s * s).exp()
}

/// Closed-form mapping from (tox, area) draws to (r_low, r_high).
///
/// ln r_low  = ln R0 - sL²/2 + k_low·Δtox - m·ln(area factor)
/// ln ratio  = ln(1+T) - sR²/2 - d·Δtox
/// The high-state oxide coefficient is k_low - d. Matching the three target
/// variances fixes d, k_low and the area exponent m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MtjCalibration {
    pub r_low0: f64,
    /// Mean of r_high/r_low.
    pub ratio_mean: f64,
    /// Oxide sigma, nm.
    pub tox_sigma_nm: f64,
    /// Log-sigma of the area factor.
    pub area_log_sigma: f64,
    pub log_sigma_low: f64,
    pub log_sigma_ratio: f64,
    /// d ln R_low / d tox, 1/nm.
    pub k_low: f64,
    /// d ln R_high / d tox, 1/nm.
    pub k_high: f64,
    pub area_exponent: f64,
}

impl MtjCalibration {
    pub fn solve(nominal: &MtjNominal, spec: &VariationSpec) -> Result<Self> {
        let tmr = spec.tmr_targets(nominal.flavor);
        let ratio_mean = 1.0 + tmr.mean / 100.0;
        let s_l = log_sigma(spec.r_sigma_low);
        let s_h = log_sigma(spec.r_sigma_high);
        let s_r = log_sigma(tmr.sigma / 100.0 / ratio_mean);
        let s_a = log_sigma(nominal.area_sigma_frac);
        let sig_t = nominal.tox_mean * nominal.tox_sigma_frac;
        let d = s_r / sig_t;
        let diff = s_l * s_l - s_h * s_h;
        let k_low = if d > 0.0 {
            (diff / (sig_t * sig_t) + d * d) / (2.0 * d)
        } else if diff.abs() < 1e-15 {
            0.0
        } else {
            return Err(SimError::Config(
                "unequal low/high resistance sigmas need a nonzero TMR sigma".into(),
            ));
        };
        let area_var = s_l * s_l - k_low * k_low * sig_t * sig_t;
        if area_var < -1e-15 {
            return Err(SimError::Config(format!(
                "{} variation targets unreachable: oxide term alone exceeds the low-state sigma",
                nominal.flavor.label()
            )));
        }
        let area_exponent = if s_a > 0.0 { area_var.max(0.0).sqrt() / s_a } else { 0.0 };
        Ok(MtjCalibration {
            r_low0: nominal.r_low0,
            ratio_mean,
            tox_sigma_nm: sig_t,
            area_log_sigma: s_a,
            log_sigma_low: s_l,
            log_sigma_ratio: s_r,
            k_low,
            k_high: k_low - d,
            area_exponent,
        })
    }

    /// Resistances for standard normal oxide and area draws.
    pub fn map(&self, z_tox: f64, z_area: f64, ratio_mean: f64) -> (f64, f64) {
        let d = self.k_low - self.k_high;
        let dtox = self.tox_sigma_nm * z_tox;
        let ln_area = self.area_log_sigma * z_area - 0.5 * self.area_log_sigma * self.area_log_sigma;
        let r_low = self.r_low0
            * (-0.5 * self.log_sigma_low * self.log_sigma_low + self.k_low * dtox - self.area_exponent * ln_area).exp();
        let ratio = ratio_mean * (-0.5 * self.log_sigma_ratio * self.log_sigma_ratio - d * dtox).exp();
        (r_low, r_low * ratio)
    }
}

/// Draws one bitcell. `tmr_knob` (percent) retargets the mean zero-bias TMR.
pub fn sample_device<R: Rng + ?Sized>(
    spec: &VariationSpec,
    nominal: &MtjNominal,
    switching: &SwitchingModel,
    tmr_knob: Option<f64>,
    rng: &mut R,
) -> Result<DeviceSample> {
    match spec.mode {
        BitcellMode::Mtj => {
            let cal = MtjCalibration::solve(nominal, spec)?;
            let ratio_mean = tmr_knob.map_or(cal.ratio_mean, |t| 1.0 + t / 100.0);
            let z_tox: f64 = rng.sample(StandardNormal);
            let z_area: f64 = rng.sample(StandardNormal);
            let (r_low, r_high) = cal.map(z_tox, z_area, ratio_mean);
            Ok(DeviceSample::new(r_low, r_high, switching.t_sw_ref, switching.sigma))
        }
        BitcellMode::Mimic => {
            let tmr = tmr_knob.unwrap_or_else(|| nominal.tmr0());
            let z: f64 = rng.sample(StandardNormal);
            let r_low = nominal.r_low0 * unit_lognormal(spec.poly_sigma_for(nominal.r_low0), z);
            Ok(DeviceSample::new(r_low, r_low * (1.0 + tmr / 100.0), switching.t_sw_ref, switching.sigma))
        }
    }
}

/// Draws one comparator offset, volts.
pub fn sample_offset<R: Rng + ?Sized>(spec: &VariationSpec, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    spec.sa_offset_mu + spec.sa_offset_sigma * z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChipSample {
    pub chip_index: u32,
    /// Multiplicative shift of every resistance on the die.
    pub corner_shift: f64,
}

impl ChipSample {
    pub fn nominal() -> Self {
        ChipSample { chip_index: 0, corner_shift: 0.0 }
    }

    pub fn factor(&self) -> f64 {
        1.0 + self.corner_shift
    }
}

pub fn sample_chip(spec: &VariationSpec, chip_index: u32, tree: &SeedTree) -> ChipSample {
    let span = spec.poly_corner_span;
    let corner_shift = if span == 0.0 {
        0.0
    } else {
        let mut rng = tree.derive(SeedPath::new(chip_index, 0, 0, tags::CHIP));
        rng.gen_range(-span..=span)
    };
    ChipSample { chip_index, corner_shift }
}

/// Stream purposes. Each random quantity of a bit draws from its own stream,
/// so changing one knob never shifts unrelated draws.
pub mod tags {
    pub const DEVICE: u8 = 1;
    pub const SWITCH: u8 = 2;
    pub const OFFSET: u8 = 3;
    pub const NOISE: u8 = 4;
    pub const DATA: u8 = 5;
    pub const REFERENCE: u8 = 6;
    pub const CHIP: u8 = 7;
    pub const WRITE: u8 = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath {
    pub chip: u32,
    pub trial: u32,
    pub bit: u64,
    pub tag: u8,
}

impl SeedPath {
    pub fn new(chip: u32, trial: u32, bit: u64, tag: u8) -> Self {
        SeedPath { chip, trial, bit, tag }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    pub master_seed: u64,
}

const MAX_CHIP: u32 = 1 << 16;
const MAX_BIT: u64 = 1 << 40;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        SeedTree { master_seed }
    }

    /// Key from (master, trial); ChaCha stream from (chip, tag, bit) packed
    /// without collisions.
    pub fn derive(&self, path: SeedPath) -> ChaCha8Rng {
        assert!(path.chip < MAX_CHIP, "chip index {} out of range", path.chip);
        assert!(path.bit < MAX_BIT, "bit index {} out of range", path.bit);
        let mut state = self.master_seed ^ (u64::from(path.trial)).wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((u64::from(path.chip) << 48) | (u64::from(path.tag) << 40) | path.bit);
        rng
    }
}
