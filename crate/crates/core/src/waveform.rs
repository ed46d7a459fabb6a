//! Buffered bitcell voltage under a ramp read current.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{high_state_voltage, ohmic, switching_time, tmr_at_voltage, DeviceSample, RolloffCurve};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RampConfig {
    /// µA/ns.
    pub slope: f64,
    /// Delay before the ramp turns linear, ns.
    pub t_start: f64,
    /// Word-line (sampling window) length in clock cycles.
    pub wl_cycles: u32,
    /// MHz.
    pub f_clk: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        RampConfig { slope: 7.0, t_start: 0.0, wl_cycles: 10, f_clk: 350.0 }
    }
}

impl RampConfig {
    pub fn period(&self) -> f64 {
        1000.0 / self.f_clk
    }

    pub fn t_sense(&self) -> f64 {
        f64::from(self.wl_cycles) * self.period()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope > 0.0 && self.f_clk > 0.0 && self.t_start >= 0.0 && self.wl_cycles >= 1) {
            return Err(SimError::Config(format!("invalid ramp config {self:?}")));
        }
        Ok(())
    }
}

pub fn ramp_current(t: f64, cfg: &RampConfig) -> f64 {
    if t < cfg.t_start {
        0.0
    } else {
        cfg.slope * (t - cfg.t_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BufferModel {
    /// Constant added to the bitcell voltage by the source follower stage.
    pub level_shift: f64,
    /// Output saturates at vdd - ceiling_margin.
    pub ceiling_margin: f64,
    pub vdd: f64,
}

impl Default for BufferModel {
    fn default() -> Self {
        BufferModel { level_shift: 0.0, ceiling_margin: 0.05, vdd: 1.0 }
    }
}

impl BufferModel {
    pub fn ceiling(&self) -> f64 {
        self.vdd - self.ceiling_margin
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.ceiling();
        if !(self.vdd > 0.0 && c > 0.0 && c <= self.vdd && self.level_shift >= 0.0 && self.level_shift < c) {
            return Err(SimError::Config(format!(
                "buffer needs 0 <= level_shift < ceiling <= vdd (shift {}, ceiling {c}, vdd {})",
                self.level_shift, self.vdd
            )));
        }
        Ok(())
    }
}

pub fn buffered_voltage(v_bit: f64, buf: &BufferModel) -> f64 {
    (v_bit + buf.level_shift).clamp(0.0, buf.ceiling())
}

/// Voltage across the cell at time `t`; `t_switch` is the absolute flip time.
pub fn bitcell_voltage(
    t: f64,
    sample: &DeviceSample,
    stored_bit: bool,
    t_switch: f64,
    cfg: &RampConfig,
    curve: &RolloffCurve,
) -> Result<f64> {
    let i = ramp_current(t, cfg);
    if stored_bit && t < t_switch {
        high_state_voltage(i, sample.r_low, sample.tmr0, curve)
    } else {
        Ok(ohmic(i, sample.r_low))
    }
}

#[derive(Debug, Clone)]
pub struct WaveformTrace<'a> {
    pub sample: DeviceSample,
    pub stored_bit: bool,
    pub ramp: RampConfig,
    pub buffer: BufferModel,
    pub curve: &'a RolloffCurve,
    /// Absolute flip time (stored '1' only), possibly past the window.
    pub t_switch: Option<f64>,
    /// Flip time when it falls inside the sense window.
    pub switch_time: Option<f64>,
    /// First time the buffer output reaches its ceiling.
    pub clamp_onset: Option<f64>,
}

impl<'a> WaveformTrace<'a> {
    /// Builds a trace for a cell that flips `t_sw` ns after the ramp starts.
    pub fn new(
        sample: DeviceSample,
        stored_bit: bool,
        ramp: RampConfig,
        buffer: BufferModel,
        curve: &'a RolloffCurve,
        t_sw: f64,
    ) -> Result<Self> {
        let t_sense = ramp.t_sense();
        let t_switch = stored_bit.then_some(ramp.t_start + t_sw);
        let switch_time = t_switch.filter(|&t| t <= t_sense);
        let mut trace = WaveformTrace { sample, stored_bit, ramp, buffer, curve, t_switch, switch_time, clamp_onset: None };
        trace.clamp_onset = trace.find_clamp_onset()?.filter(|&t| t <= t_sense);
        Ok(trace)
    }

    fn find_clamp_onset(&self) -> Result<Option<f64>> {
        let v_c = self.buffer.ceiling() - self.buffer.level_shift;
        let s = &self.sample;
        let time_for = |i_ua: f64| self.ramp.t_start + i_ua / self.ramp.slope;
        let t_low = time_for(v_c / (s.r_low * 1e-6));
        match self.t_switch {
            None => Ok(Some(t_low)),
            Some(t_sw) => {
                let r_h = s.r_low * (1.0 + tmr_at_voltage(s.tmr0, v_c, self.curve)? / 100.0);
                let t_high = time_for(v_c / (r_h * 1e-6));
                if t_high < t_sw {
                    Ok(Some(t_high))
                } else {
                    Ok(Some(t_low.max(t_sw)))
                }
            }
        }
    }

    pub fn current(&self, t: f64) -> f64 {
        ramp_current(t, &self.ramp)
    }

    pub fn v_bit(&self, t: f64) -> Result<f64> {
        let t_switch = self.t_switch.unwrap_or(f64::INFINITY);
        bitcell_voltage(t, &self.sample, self.stored_bit, t_switch, &self.ramp, self.curve)
    }

    pub fn v_bufo(&self, t: f64) -> Result<f64> {
        Ok(buffered_voltage(self.v_bit(t)?, &self.buffer))
    }

    /// Plot rows (t, i, v_bit, v_bufo) on a uniform grid over the window.
    pub fn rows(&self, dt: f64) -> Result<Vec<[f64; 4]>> {
        if !(dt > 0.0) {
            return Err(SimError::Config("trace step must be positive".into()));
        }
        let n = (self.ramp.t_sense() / dt + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                Ok([t, self.current(t), self.v_bit(t)?, self.v_bufo(t)?])
            })
            .collect()
    }
}

/// Draws a switching time and builds the trace.
pub fn synthesize<'a, R: Rng + ?Sized>(
    sample: &DeviceSample,
    stored_bit: bool,
    ramp: &RampConfig,
    buffer: &BufferModel,
    curve: &'a RolloffCurve,
    ref_slope: f64,
    rng: &mut R,
) -> Result<WaveformTrace<'a>> {
    let t_sw = switching_time(sample, ramp.slope, ref_slope, rng)?;
    WaveformTrace::new(*sample, stored_bit, *ramp, *buffer, curve, t_sw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(r_low: f64) -> DeviceSample {
        DeviceSample::new(r_low, 2.0 * r_low, 20.3, 0.75)
    }

    fn ramp(slope: f64, f_clk: f64, wl: u32) -> RampConfig {
        RampConfig { slope, t_start: 0.0, wl_cycles: wl, f_clk }
    }

    #[test]
    fn ramp_examples() {
        assert_eq!(ramp_current(0.0, &RampConfig::default()), 0.0);
        assert!((ramp_current(20.0, &ramp(6.0, 500.0, 13)) - 120.0).abs() < 1e-12);
        assert!((ramp_current(10.0, &ramp(12.0, 500.0, 13)) - 120.0).abs() < 1e-12);
        let delayed = RampConfig { t_start: 2.0, ..ramp(6.0, 500.0, 13) };
        assert_eq!(ramp_current(1.5, &delayed), 0.0);
        assert!((ramp_current(3.0, &delayed) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn ohmic_low_state() {
        let c = RolloffCurve::default();
        let v = bitcell_voltage(10.0, &cell(2500.0), false, f64::INFINITY, &ramp(6.0, 500.0, 13), &c).unwrap();
        assert!((v - 0.15).abs() < 1e-12);
    }

    #[test]
    fn negative_step_at_switch() {
        let c = RolloffCurve::default();
        let r = ramp(6.0, 500.0, 13);
        let tr = WaveformTrace::new(cell(2500.0), true, r, BufferModel::default(), &c, 20.0).unwrap();
        let before = tr.v_bit(20.0 - 1e-9).unwrap();
        let after = tr.v_bit(20.0 + 1e-9).unwrap();
        assert!(after < before);
        let r_h = before / (ramp_current(20.0, &r) * 1e-6);
        assert!((after / before - 2500.0 / r_h).abs() < 1e-6);
        assert_eq!(tr.switch_time, Some(20.0));
    }

    #[test]
    fn switch_outside_window_is_not_reported() {
        let c = RolloffCurve::default();
        let tr = WaveformTrace::new(cell(2500.0), true, ramp(6.0, 500.0, 10), BufferModel::default(), &c, 25.0).unwrap();
        assert_eq!(tr.switch_time, None);
        assert_eq!(tr.t_switch, Some(25.0));
    }

    #[test]
    fn steep_ramp_clamps_before_switch() {
        let c = RolloffCurve::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = ramp(14.0, 500.0, 13);
        let tr = synthesize(&cell(8000.0), true, &r, &BufferModel::default(), &c, 6.0, &mut rng).unwrap();
        let onset = tr.clamp_onset.expect("clamps");
        assert!(onset < tr.switch_time.unwrap());
        assert!((tr.v_bufo(onset + 1e-6).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn clamp_onset_matches_ceiling_crossing() {
        let c = RolloffCurve::default();
        for (bit, t_sw) in [(false, 100.0), (true, 100.0), (true, 8.0), (true, 30.0)] {
            let tr = WaveformTrace::new(cell(2500.0), bit, ramp(10.0, 250.0, 10), BufferModel::default(), &c, t_sw).unwrap();
            let onset = tr.clamp_onset.unwrap();
            assert!(tr.v_bufo(onset - 1e-6).unwrap() < 0.95 || (bit && (onset - t_sw).abs() < 1e-9));
            assert!((tr.v_bufo(onset + 1e-6).unwrap() - 0.95).abs() < 1e-12);
        }
    }

    #[test]
    fn buffer_examples() {
        let b = BufferModel::default();
        assert_eq!(buffered_voltage(10.0, &b), 0.95);
        assert_eq!(buffered_voltage(0.0, &b), 0.0);
        let shifted = BufferModel { level_shift: 0.1, ..b };
        assert!((buffered_voltage(0.0, &shifted) - 0.1).abs() < 1e-15);
        assert!(BufferModel { level_shift: 1.0, ..b }.validate().is_err());
    }

    #[test]
    fn trace_rows_cover_window() {
        let c = RolloffCurve::default();
        let tr = WaveformTrace::new(cell(2500.0), true, ramp(6.0, 500.0, 13), BufferModel::default(), &c, 20.0).unwrap();
        let rows = tr.rows(0.1).unwrap();
        assert_eq!(rows.len(), 261);
        let drops = rows.windows(2).filter(|w| w[1][3] < w[0][3]).count();
        assert_eq!(drops, 1);
    }

    proptest! {
        #[test]
        fn stored_zero_is_non_decreasing(rl in 1000.0f64..12000.0, slope in 3.0f64..15.0, f in 100.0f64..500.0, t1 in 0.0f64..40.0, dt in 0.0f64..10.0) {
            let c = RolloffCurve::default();
            let tr = WaveformTrace::new(cell(rl), false, ramp(slope, f, 20), BufferModel::default(), &c, 1.0).unwrap();
            prop_assert!(tr.v_bufo(t1 + dt).unwrap() >= tr.v_bufo(t1).unwrap());
        }

        #[test]
        fn unit_gain_below_ceiling(v in 0.0f64..0.8, dv in 0.0f64..0.1) {
            let b = BufferModel::default();
            prop_assert!((buffered_voltage(v + dv, &b) - buffered_voltage(v, &b) - dv).abs() < 1e-12);
        }

        #[test]
        fn slope_time_scale_invariance(rl in 1000.0f64..8000.0, slope in 3.0f64..8.0, t in 0.0f64..30.0, t_sw in 5.0f64..30.0, bit in any::<bool>()) {
            let c = RolloffCurve::default();
            let b = BufferModel::default();
            let a = WaveformTrace::new(cell(rl), bit, ramp(slope, 250.0, 20), b, &c, t_sw).unwrap();
            let d = WaveformTrace::new(cell(rl), bit, ramp(2.0 * slope, 500.0, 20), b, &c, t_sw / 2.0).unwrap();
            prop_assert!((a.v_bufo(t).unwrap() - d.v_bufo(t / 2.0).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn output_stays_in_range(rl in 500.0f64..20000.0, slope in 1.0f64..20.0, t in 0.0f64..60.0, t_sw in 0.0f64..60.0, bit in any::<bool>()) {
            let c = RolloffCurve::default();
            let b = BufferModel::default();
            let tr = WaveformTrace::new(cell(rl), bit, ramp(slope, 200.0, 12), b, &c, t_sw).unwrap();
            let v = tr.v_bufo(t).unwrap();
            prop_assert!((0.0..=b.ceiling()).contains(&v));
        }
    }
}
