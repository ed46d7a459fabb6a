//! Slope-detection read: sample-and-hold schedule, offset comparators at
//! each compare edge, latch capture and OR combination.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::waveform::{RampConfig, WaveformTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SenseMode {
    Single,
    Double,
}

/// Sample timing, all in clock cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Clock cycles per sample pair.
    pub divider: u32,
    /// Spacing from the direct to the delayed sample of a pair.
    pub phase_delay: f64,
    /// Shift of the second circuit relative to the first.
    pub second_offset: f64,
    /// Time of the first direct sample.
    pub first_sample: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { divider: 4, phase_delay: 2.2, second_offset: 1.0, first_sample: 0.0 }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let d = f64::from(self.divider);
        if self.divider == 0 || !(self.phase_delay > 0.0 && self.phase_delay < d) {
            return Err(SimError::Config(format!(
                "schedule needs divider >= 1 and 0 < phase_delay < divider (got {} / {})",
                self.divider, self.phase_delay
            )));
        }
        if !(self.first_sample >= 0.0 && self.second_offset >= 0.0) {
            return Err(SimError::Config("sample offsets must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Direct,
    Delayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleEvent {
    /// ns.
    pub t: f64,
    pub phase: Phase,
}

/// One compare: consecutive samples `older` then `newer` (indices into the
/// circuit's sample list). Which capacitor holds the older value alternates,
/// so the comparator offset enters with opposite signs on the two kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareEdge {
    pub older: usize,
    pub newer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitSchedule {
    pub samples: Vec<SampleEvent>,
    pub edges: Vec<CompareEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub mode: SenseMode,
    pub circuits: Vec<CircuitSchedule>,
}

const EPS_CYCLES: f64 = 1e-9;

pub fn schedule(ramp: &RampConfig, cfg: &ScheduleConfig, mode: SenseMode) -> Result<Schedule> {
    cfg.validate()?;
    let period = ramp.period();
    let window = f64::from(ramp.wl_cycles);
    let n_circuits = match mode {
        SenseMode::Single => 1,
        SenseMode::Double => 2,
    };
    let mut circuits = Vec::with_capacity(n_circuits);
    for c in 0..n_circuits {
        let base = cfg.first_sample + c as f64 * cfg.second_offset;
        let mut samples = Vec::new();
        for k in 0.. {
            let direct = base + f64::from(cfg.divider) * f64::from(k);
            if direct > window + EPS_CYCLES {
                break;
            }
            samples.push(SampleEvent { t: direct * period, phase: Phase::Direct });
            let delayed = direct + cfg.phase_delay;
            if delayed <= window + EPS_CYCLES {
                samples.push(SampleEvent { t: delayed * period, phase: Phase::Delayed });
            }
        }
        if samples.len() < 2 {
            return Err(SimError::Config(format!(
                "sense window of {} cycles holds no complete compare for circuit {}",
                ramp.wl_cycles,
                c + 1
            )));
        }
        let edges = (1..samples.len()).map(|i| CompareEdge { older: i - 1, newer: i }).collect();
        circuits.push(CircuitSchedule { samples, edges });
    }
    Ok(Schedule { mode, circuits })
}

/// Latch outcome of one compare. `offset` is the comparator's static offset.
#[inline]
pub fn latch(older: f64, newer: f64, older_phase: Phase, offset: f64) -> bool {
    let effective = match older_phase {
        Phase::Direct => -offset,
        Phase::Delayed => offset,
    };
    older - newer - effective > 0.0
}

/// Latched bits of every edge of one circuit for the given sampled values.
pub fn compare_at_edges(circuit: &CircuitSchedule, values: &[f64], offset: f64) -> Vec<bool> {
    circuit
        .edges
        .iter()
        .map(|e| latch(values[e.older], values[e.newer], circuit.samples[e.older].phase, offset))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureClass {
    None,
    Sm0Fail,
    Sm1Fail,
}

impl FailureClass {
    pub fn of(stored_bit: bool, read_bit: bool) -> Self {
        match (stored_bit, read_bit) {
            (false, true) => FailureClass::Sm0Fail,
            (true, false) => FailureClass::Sm1Fail,
            _ => FailureClass::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadResult {
    pub bit: bool,
    /// Smallest rise seen across compares that end before the switch, volts.
    pub sm0: f64,
    /// Most negative compared difference, 0 if none.
    pub sm1: f64,
    pub per_circuit: Vec<bool>,
    pub failure_class: FailureClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitRecord {
    pub offset: f64,
    pub samples: Vec<SampleEvent>,
    /// Noiseless buffer output at each sample.
    pub clean: Vec<f64>,
    /// Values seen by the comparator (with sampling noise).
    pub sampled: Vec<f64>,
    pub latched: Vec<bool>,
}

/// Reads one trace. `offsets` holds one comparator offset per circuit.
pub fn slope_read_detailed<R: Rng + ?Sized>(
    trace: &WaveformTrace<'_>,
    sched: &Schedule,
    offsets: &[f64],
    noise_sigma: f64,
    rng: &mut R,
) -> Result<(ReadResult, Vec<CircuitRecord>)> {
    if offsets.len() != sched.circuits.len() {
        return Err(SimError::Config(format!(
            "{} comparator offsets for {} circuits",
            offsets.len(),
            sched.circuits.len()
        )));
    }
    let t_switch = trace.switch_time.unwrap_or(f64::INFINITY);
    let mut sm0 = f64::INFINITY;
    let mut sm1: f64 = 0.0;
    let mut records = Vec::with_capacity(sched.circuits.len());
    for (circuit, &offset) in sched.circuits.iter().zip(offsets) {
        let clean = circuit.samples.iter().map(|s| trace.v_bufo(s.t)).collect::<Result<Vec<_>>>()?;
        let sampled: Vec<f64> = if noise_sigma > 0.0 {
            clean
                .iter()
                .map(|v| {
                    let z: f64 = rng.sample(StandardNormal);
                    v + noise_sigma * z
                })
                .collect()
        } else {
            clean.clone()
        };
        for e in &circuit.edges {
            let diff = clean[e.newer] - clean[e.older];
            if circuit.samples[e.newer].t < t_switch {
                sm0 = sm0.min(diff);
            }
            sm1 = sm1.min(diff);
        }
        let latched = compare_at_edges(circuit, &sampled, offset);
        records.push(CircuitRecord { offset, samples: circuit.samples.clone(), clean, sampled, latched });
    }
    let per_circuit: Vec<bool> = records.iter().map(|r| r.latched.iter().any(|&b| b)).collect();
    let bit = per_circuit.iter().any(|&b| b);
    let result = ReadResult {
        bit,
        sm0: if sm0.is_finite() { sm0 } else { 0.0 },
        sm1,
        per_circuit,
        failure_class: FailureClass::of(trace.stored_bit, bit),
    };
    Ok((result, records))
}

pub fn slope_read<R: Rng + ?Sized>(
    trace: &WaveformTrace<'_>,
    sched: &Schedule,
    offsets: &[f64],
    noise_sigma: f64,
    rng: &mut R,
) -> Result<ReadResult> {
    slope_read_detailed(trace, sched, offsets, noise_sigma, rng).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceSample, RolloffCurve};
    use crate::waveform::BufferModel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(slope: f64, f_clk: f64, wl: u32) -> RampConfig {
        RampConfig { slope, t_start: 0.0, wl_cycles: wl, f_clk }
    }

    fn circuit_of(values: usize) -> CircuitSchedule {
        let samples = (0..values)
            .map(|i| SampleEvent { t: i as f64, phase: if i % 2 == 0 { Phase::Direct } else { Phase::Delayed } })
            .collect();
        CircuitSchedule { samples, edges: (1..values).map(|i| CompareEdge { older: i - 1, newer: i }).collect() }
    }

    #[test]
    fn schedule_500mhz_13_cycles() {
        let s = schedule(&ramp(6.0, 500.0, 13), &ScheduleConfig::default(), SenseMode::Single).unwrap();
        assert_eq!(s.circuits.len(), 1);
        let t: Vec<f64> = s.circuits[0].samples.iter().map(|e| e.t).collect();
        let want = [0.0, 4.4, 8.0, 12.4, 16.0, 20.4, 24.0];
        assert_eq!(t.len(), want.len());
        for (a, b) in t.iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
        // direct samples every 8 ns
        assert!((t[2] - t[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn double_adds_shifted_circuit() {
        let r = ramp(6.0, 500.0, 13);
        let cfg = ScheduleConfig::default();
        let single = schedule(&r, &cfg, SenseMode::Single).unwrap();
        let double = schedule(&r, &cfg, SenseMode::Double).unwrap();
        assert_eq!(double.circuits.len(), 2);
        assert_eq!(double.circuits[0], single.circuits[0]);
        let shift = double.circuits[1].samples[0].t - double.circuits[0].samples[0].t;
        assert!((shift - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_window_is_config_error() {
        let cfg = ScheduleConfig { first_sample: 2.0, ..ScheduleConfig::default() };
        assert!(matches!(schedule(&ramp(6.0, 500.0, 3), &cfg, SenseMode::Single), Err(SimError::Config(_))));
        assert!(ScheduleConfig { phase_delay: 4.0, ..ScheduleConfig::default() }.validate().is_err());
    }

    #[test]
    fn compare_examples() {
        let c = circuit_of(4);
        assert_eq!(compare_at_edges(&c, &[0.1, 0.2, 0.3, 0.4], 0.0), vec![false, false, false]);
        assert_eq!(compare_at_edges(&c, &[0.30, 0.38, 0.46, 0.41], 0.0), vec![false, false, true]);
        // a +60 mV offset beats a 48 mV rise on an edge whose older sample is direct
        let c2 = circuit_of(2);
        assert_eq!(compare_at_edges(&c2, &[0.30, 0.348], 0.060), vec![true]);
        assert_eq!(compare_at_edges(&c2, &[0.30, 0.348], 0.040), vec![false]);
    }

    #[test]
    fn noiseless_reads_are_correct() {
        let curve = RolloffCurve::flat();
        let r = ramp(6.0, 500.0, 13);
        let sched = schedule(&r, &ScheduleConfig::default(), SenseMode::Double).unwrap();
        let d = DeviceSample::new(2500.0, 5000.0, 20.3, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = WaveformTrace::new(d, true, r, BufferModel::default(), &curve, 20.3).unwrap();
        let res = slope_read(&one, &sched, &[0.0, 0.0], 0.0, &mut rng).unwrap();
        assert!(res.bit && res.sm1 < 0.0);
        assert_eq!(res.failure_class, FailureClass::None);
        let zero = WaveformTrace::new(d, false, r, BufferModel::default(), &curve, 20.3).unwrap();
        let res = slope_read(&zero, &sched, &[0.0, 0.0], 0.0, &mut rng).unwrap();
        assert!(!res.bit);
        assert_eq!(res.sm1, 0.0);
        assert!(res.sm0 > 0.0);
    }

    #[test]
    fn second_circuit_catches_a_late_flip() {
        // SC1's last sample is at 24 ns, SC2's at 26 ns; a flip at 25 ns is
        // visible only to SC2.
        let curve = RolloffCurve::flat();
        let r = ramp(6.0, 500.0, 13);
        let cfg = ScheduleConfig::default();
        let d = DeviceSample::new(2500.0, 5000.0, 20.3, 0.0);
        let trace = WaveformTrace::new(d, true, r, BufferModel::default(), &curve, 25.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let single = schedule(&r, &cfg, SenseMode::Single).unwrap();
        let double = schedule(&r, &cfg, SenseMode::Double).unwrap();
        let miss = slope_read(&trace, &single, &[0.0], 0.0, &mut rng).unwrap();
        let (hit, rec) = slope_read_detailed(&trace, &double, &[0.0, 0.0], 0.0, &mut rng).unwrap();
        assert!(!miss.bit);
        assert_eq!(miss.failure_class, FailureClass::Sm1Fail);
        assert!(hit.bit);
        assert_eq!(hit.per_circuit, vec![false, true]);
        assert_eq!(rec[1].latched.iter().filter(|&&b| b).count(), 1);
        assert!((hit.sm1 - (0.39 - 0.672)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn or_combination_is_monotone(values in proptest::collection::vec(0.0f64..1.0, 2..12), off in -0.05f64..0.05, flip in 0usize..11) {
            let c = circuit_of(values.len());
            let mut l = compare_at_edges(&c, &values, off);
            let before = l.iter().any(|&b| b);
            let k = flip % l.len();
            l[k] = true;
            prop_assert!(!before || l.iter().any(|&b| b));
        }

        #[test]
        fn positive_offset_only_adds_ones_on_direct_edges(values in proptest::collection::vec(0.0f64..1.0, 2..12), off in 0.0f64..0.05) {
            let c = circuit_of(values.len());
            let base = compare_at_edges(&c, &values, 0.0);
            let with = compare_at_edges(&c, &values, off);
            for (i, e) in c.edges.iter().enumerate() {
                match c.samples[e.older].phase {
                    Phase::Direct => prop_assert!(!base[i] || with[i]),
                    Phase::Delayed => prop_assert!(!with[i] || base[i]),
                }
            }
        }
    }
}
