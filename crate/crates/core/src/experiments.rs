//! Monte-Carlo array experiments: failure statistics, knob sweeps, shmoo
//! grids, per-chip passing frequency and the scheme comparison.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{conventional_read, sample_reference, ConvConfig, ReferenceColumn, COLUMN_GROUP};
use crate::device::{switching_time, DeviceSample, Flavor, MtjNominal, RolloffCurve, SwitchingModel};
use crate::error::{Result, SimError};
use crate::slope::{schedule, slope_read_detailed, CircuitRecord, FailureClass, ReadResult, Schedule, ScheduleConfig, SenseMode};
use crate::variation::{sample_chip, sample_device, sample_offset, tags, BitcellMode, ChipSample, SeedPath, SeedTree, VariationSpec};
use crate::waveform::{BufferModel, RampConfig, WaveformTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    Conv,
    SlopeSingle,
    SlopeDouble,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Conv => "CONV",
            Scheme::SlopeSingle => "SLOPE_SINGLE",
            Scheme::SlopeDouble => "SLOPE_DOUBLE",
        }
    }

    pub fn sense_mode(self) -> Option<SenseMode> {
        match self {
            Scheme::Conv => None,
            Scheme::SlopeSingle => Some(SenseMode::Single),
            Scheme::SlopeDouble => Some(SenseMode::Double),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "conv" | "conventional" => Ok(Scheme::Conv),
            "slope_single" | "single" => Ok(Scheme::SlopeSingle),
            "slope" | "slope_double" | "double" => Ok(Scheme::SlopeDouble),
            other => Err(SimError::Config(format!("unknown scheme '{other}' (expected conv, slope, slope_single)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    #[serde(rename = "ALL0")]
    All0,
    #[serde(rename = "ALL1")]
    All1,
    #[serde(rename = "CHECKER")]
    Checker,
    #[serde(rename = "RANDOM")]
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlavorMix {
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "HI")]
    Hi,
    /// First half of the array LO, second half HI.
    #[serde(rename = "BOTH")]
    Both,
}

impl std::str::FromStr for FlavorMix {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LO" => Ok(FlavorMix::Lo),
            "HI" => Ok(FlavorMix::Hi),
            "BOTH" => Ok(FlavorMix::Both),
            other => Err(SimError::Config(format!("unknown flavor '{other}' (expected LO, HI or BOTH)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub n_bits: u64,
    pub flavor: FlavorMix,
    pub pattern: Pattern,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig { n_bits: 96 * 1024, flavor: FlavorMix::Both, pattern: Pattern::Random }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bits == 0 {
            return Err(SimError::Config("array needs at least one bit".into()));
        }
        if self.n_bits >= 1 << 40 {
            return Err(SimError::Config(format!("array of {} bits is too large", self.n_bits)));
        }
        Ok(())
    }

    pub fn flavor_of(&self, index: u64) -> Flavor {
        match self.flavor {
            FlavorMix::Lo => Flavor::Lo,
            FlavorMix::Hi => Flavor::Hi,
            FlavorMix::Both if index < self.n_bits / 2 => Flavor::Lo,
            FlavorMix::Both => Flavor::Hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub lo: MtjNominal,
    pub hi: MtjNominal,
    pub rolloff: RolloffCurve,
    pub switching: SwitchingModel,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            lo: MtjNominal::for_flavor(Flavor::Lo),
            hi: MtjNominal::for_flavor(Flavor::Hi),
            rolloff: RolloffCurve::default(),
            switching: SwitchingModel::default(),
        }
    }
}

/// Everything a read needs besides the array layout and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub device: DeviceConfig,
    pub variation: VariationSpec,
    pub ramp: RampConfig,
    pub buffer: BufferModel,
    pub schedule: ScheduleConfig,
    /// Sampling noise per held sample, volts.
    pub noise_sigma: f64,
    pub conv: ConvConfig,
    /// Zero-bias TMR override, percent.
    pub tmr: Option<f64>,
    /// Pins the mean switching time to this many clock cycles.
    pub t_sw_cycles: Option<f64>,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            device: DeviceConfig::default(),
            variation: VariationSpec::default(),
            ramp: RampConfig::default(),
            buffer: BufferModel::default(),
            schedule: ScheduleConfig::default(),
            noise_sigma: 1e-3,
            conv: ConvConfig::default(),
            tmr: None,
            t_sw_cycles: None,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.device.lo.validate()?;
        self.device.hi.validate()?;
        self.device.rolloff.validate()?;
        let sw = &self.device.switching;
        if !(sw.t_sw_ref > 0.0 && sw.sigma >= 0.0 && sw.ref_slope > 0.0) {
            return Err(SimError::Config(format!("invalid switching model {sw:?}")));
        }
        self.variation.validate()?;
        self.ramp.validate()?;
        self.buffer.validate()?;
        self.schedule.validate()?;
        self.conv.validate()?;
        if !(self.noise_sigma >= 0.0) {
            return Err(SimError::Config("noise_sigma must be non-negative".into()));
        }
        if let Some(t) = self.tmr {
            if !(t > 0.0) {
                return Err(SimError::Config(format!("TMR must be positive, got {t}")));
            }
        }
        if let Some(k) = self.t_sw_cycles {
            if !(k > 0.0) {
                return Err(SimError::Config(format!("switching time must be positive, got {k} cycles")));
            }
        }
        Ok(())
    }

    pub fn nominal(&self, flavor: Flavor) -> &MtjNominal {
        match flavor {
            Flavor::Lo => &self.device.lo,
            Flavor::Hi => &self.device.hi,
        }
    }

    /// Bias rolloff in effect: poly bitcells have none.
    pub fn effective_curve(&self) -> RolloffCurve {
        match self.variation.mode {
            BitcellMode::Mtj => self.device.rolloff.clone(),
            BitcellMode::Mimic => RolloffCurve::flat(),
        }
    }

    /// Switching model after the optional switching-time pin.
    pub fn effective_switching(&self) -> SwitchingModel {
        let mut sw = self.device.switching;
        if let Some(k) = self.t_sw_cycles {
            sw.t_sw_ref = k * self.ramp.period() * self.ramp.slope / sw.ref_slope;
        }
        sw
    }

    pub fn set_vdd(&mut self, vdd: f64) {
        self.buffer.vdd = vdd;
        self.conv.vdd = vdd;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FailureStats {
    pub n_trials: u64,
    pub sm0_fails: u64,
    pub sm1_fails: u64,
}

impl FailureStats {
    pub fn fails(&self) -> u64 {
        self.sm0_fails + self.sm1_fails
    }

    pub fn failure_ratio(&self) -> f64 {
        if self.n_trials == 0 {
            0.0
        } else {
            self.fails() as f64 / self.n_trials as f64
        }
    }

    fn record(mut self, class: FailureClass) -> Self {
        self.n_trials += 1;
        match class {
            FailureClass::Sm0Fail => self.sm0_fails += 1,
            FailureClass::Sm1Fail => self.sm1_fails += 1,
            FailureClass::None => {}
        }
        self
    }

    fn merge(self, other: Self) -> Self {
        FailureStats {
            n_trials: self.n_trials + other.n_trials,
            sm0_fails: self.sm0_fails + other.sm0_fails,
            sm1_fails: self.sm1_fails + other.sm1_fails,
        }
    }
}

/// Full record of one bit's read.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitReport {
    pub index: u64,
    pub flavor: Flavor,
    pub stored_bit: bool,
    pub device: DeviceSample,
    /// Absolute flip time of a stored '1' (slope sensing only), ns.
    pub t_switch: Option<f64>,
    pub reference: Option<ReferenceColumn>,
    pub offsets: Vec<f64>,
    pub result: ReadResult,
    pub circuits: Vec<CircuitRecord>,
}

struct ReadContext<'a> {
    params: &'a SimParams,
    array: &'a ArrayConfig,
    tree: &'a SeedTree,
    chip: ChipSample,
    trial: u32,
    curve: RolloffCurve,
    switching: SwitchingModel,
    schedule: Option<Schedule>,
}

impl<'a> ReadContext<'a> {
    fn new(
        array: &'a ArrayConfig,
        scheme: Scheme,
        params: &'a SimParams,
        tree: &'a SeedTree,
        chip: ChipSample,
        trial: u32,
    ) -> Result<Self> {
        params.validate()?;
        array.validate()?;
        let schedule = scheme.sense_mode().map(|m| schedule(&params.ramp, &params.schedule, m)).transpose()?;
        Ok(ReadContext {
            params,
            array,
            tree,
            chip,
            trial,
            curve: params.effective_curve(),
            switching: params.effective_switching(),
            schedule,
        })
    }

    fn rng(&self, bit: u64, tag: u8) -> rand_chacha::ChaCha8Rng {
        self.tree.derive(SeedPath::new(self.chip.chip_index, self.trial, bit, tag))
    }

    fn stored_bit(&self, i: u64) -> bool {
        match self.array.pattern {
            Pattern::All0 => false,
            Pattern::All1 => true,
            Pattern::Checker => i % 2 == 1,
            Pattern::Random => self.rng(i, tags::DATA).gen::<bool>(),
        }
    }

    fn read(&self, i: u64, detailed: bool) -> Result<BitReport> {
        let p = self.params;
        let flavor = self.array.flavor_of(i);
        let nominal = p.nominal(flavor);
        let stored_bit = self.stored_bit(i);
        let device = sample_device(&p.variation, nominal, &self.switching, p.tmr, &mut self.rng(i, tags::DEVICE))?
            .scaled(self.chip.factor());
        let mut offset_rng = self.rng(i, tags::OFFSET);
        match &self.schedule {
            None => {
                let reference = sample_reference(
                    &p.variation,
                    nominal,
                    p.tmr,
                    p.conv.bias(),
                    &self.curve,
                    self.chip.factor(),
                    &mut self.rng(i / COLUMN_GROUP, tags::REFERENCE),
                )?;
                let offset = sample_offset(&p.variation, &mut offset_rng);
                let result = conventional_read(&device, stored_bit, &reference, offset, &p.conv, &self.curve)?;
                Ok(BitReport {
                    index: i,
                    flavor,
                    stored_bit,
                    device,
                    t_switch: None,
                    reference: Some(reference),
                    offsets: vec![offset],
                    result,
                    circuits: Vec::new(),
                })
            }
            Some(sched) => {
                let t_sw = switching_time(&device, p.ramp.slope, self.switching.ref_slope, &mut self.rng(i, tags::SWITCH))?;
                let trace = WaveformTrace::new(device, stored_bit, p.ramp, p.buffer, &self.curve, t_sw)?;
                let offsets: Vec<f64> =
                    sched.circuits.iter().map(|_| sample_offset(&p.variation, &mut offset_rng)).collect();
                let (result, circuits) =
                    slope_read_detailed(&trace, sched, &offsets, p.noise_sigma, &mut self.rng(i, tags::NOISE))?;
                Ok(BitReport {
                    index: i,
                    flavor,
                    stored_bit,
                    device,
                    t_switch: trace.t_switch,
                    reference: None,
                    offsets,
                    result,
                    circuits: if detailed { circuits } else { Vec::new() },
                })
            }
        }
    }
}

/// Reads every bit of the array once and tallies failures. Bits are read in
/// parallel on the current rayon pool; the result does not depend on the
/// pool size.
pub fn run_array_trials(
    array: &ArrayConfig,
    scheme: Scheme,
    params: &SimParams,
    tree: &SeedTree,
    chip: &ChipSample,
) -> Result<FailureStats> {
    let ctx = ReadContext::new(array, scheme, params, tree, *chip, 0)?;
    (0..array.n_bits)
        .into_par_iter()
        .try_fold(FailureStats::default, |acc, i| Ok(acc.record(ctx.read(i, false)?.result.failure_class)))
        .try_reduce(FailureStats::default, |a, b| Ok(a.merge(b)))
}

/// Detailed read of a single bit, identical to what the array run sees.
pub fn read_bit(
    array: &ArrayConfig,
    scheme: Scheme,
    params: &SimParams,
    tree: &SeedTree,
    chip: &ChipSample,
    index: u64,
) -> Result<BitReport> {
    if index >= array.n_bits {
        return Err(SimError::Config(format!("bit {index} outside an array of {} bits", array.n_bits)));
    }
    ReadContext::new(array, scheme, params, tree, *chip, 0)?.read(index, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Knob {
    VClamp,
    Tmr,
    FClk,
    RampSlope,
    TSwCycles,
    Vdd,
    WlCycles,
}

impl Knob {
    pub fn label(self) -> &'static str {
        match self {
            Knob::VClamp => "V_CLAMP",
            Knob::Tmr => "TMR",
            Knob::FClk => "F_CLK",
            Knob::RampSlope => "RAMP_SLOPE",
            Knob::TSwCycles => "T_SW_CYCLES",
            Knob::Vdd => "VDD",
            Knob::WlCycles => "WL_CYCLES",
        }
    }

    /// Characterized range of the knob, where the test chip defines one.
    pub fn range(self) -> Option<(f64, f64, &'static str)> {
        match self {
            Knob::FClk => Some((100.0, 500.0, "MHz")),
            Knob::RampSlope => Some((5.0, 14.0, "µA/ns")),
            Knob::TSwCycles => Some((8.0, 12.0, "cycles")),
            Knob::Tmr => Some((60.0, 120.0, "%")),
            _ => None,
        }
    }

    pub fn check_range(self, value: f64) -> Result<()> {
        if let Some((lo, hi, unit)) = self.range() {
            if !(lo..=hi).contains(&value) {
                return Err(SimError::Config(format!(
                    "{} = {value} outside the supported range {lo}–{hi} {unit}",
                    self.label()
                )));
            }
        }
        Ok(())
    }

    pub fn apply(self, params: &SimParams, value: f64) -> Result<SimParams> {
        if !value.is_finite() {
            return Err(SimError::Config(format!("{} value must be finite", self.label())));
        }
        let mut p = params.clone();
        match self {
            Knob::VClamp => p.conv.v_clamp = value,
            Knob::Tmr => p.tmr = Some(value),
            Knob::FClk => p.ramp.f_clk = value,
            Knob::RampSlope => p.ramp.slope = value,
            Knob::TSwCycles => p.t_sw_cycles = Some(value),
            Knob::Vdd => p.set_vdd(value),
            Knob::WlCycles => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX)) {
                    return Err(SimError::Config(format!("WL_CYCLES must be a positive integer, got {value}")));
                }
                p.ramp.wl_cycles = value as u32;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for Knob {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "V_CLAMP" | "VCLAMP" => Ok(Knob::VClamp),
            "TMR" => Ok(Knob::Tmr),
            "F_CLK" | "FCLK" => Ok(Knob::FClk),
            "RAMP_SLOPE" | "SLOPE" => Ok(Knob::RampSlope),
            "T_SW_CYCLES" | "T_SW" => Ok(Knob::TSwCycles),
            "VDD" => Ok(Knob::Vdd),
            "WL_CYCLES" | "WL" => Ok(Knob::WlCycles),
            other => Err(SimError::Config(format!("unknown knob '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub knob: Knob,
    pub values: Vec<f64>,
    pub scheme: Scheme,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            knob: Knob::FClk,
            values: (0..9).map(|k| 100.0 + 50.0 * f64::from(k)).collect(),
            scheme: Scheme::SlopeDouble,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(SimError::Config("sweep needs at least one value".into()));
        }
        self.values.iter().try_for_each(|&v| self.knob.check_range(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub stats: FailureStats,
}

/// One array run per knob value, all with the same seeds.
pub fn sweep(spec: &SweepSpec, array: &ArrayConfig, params: &SimParams, tree: &SeedTree) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    spec.values
        .iter()
        .map(|&value| {
            let p = spec.knob.apply(params, value)?;
            let stats = run_array_trials(array, spec.scheme, &p, tree, &ChipSample::nominal())?;
            Ok(SweepPoint { value, stats })
        })
        .collect()
}

/// Chips are numbered from 1; chip 0 is the nominal die used by single-array runs.
pub fn chip_population(spec: &VariationSpec, n_chips: u32, tree: &SeedTree) -> Vec<ChipSample> {
    (1..=n_chips).map(|c| sample_chip(spec, c, tree)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShmooSpec {
    pub vdd_values: Vec<f64>,
    pub f_values: Vec<f64>,
    pub n_chips: u32,
    pub scheme: Scheme,
    pub n_bits: u64,
    pub flavor: FlavorMix,
    /// A chip passes a point when it has at most this many failures.
    pub tolerance: u64,
}

impl Default for ShmooSpec {
    fn default() -> Self {
        ShmooSpec {
            vdd_values: vec![0.9, 0.95, 1.0, 1.05, 1.1],
            f_values: (0..9).map(|k| 100.0 + 50.0 * f64::from(k)).collect(),
            n_chips: 10,
            scheme: Scheme::SlopeDouble,
            n_bits: 8192,
            flavor: FlavorMix::Lo,
            tolerance: 0,
        }
    }
}

impl ShmooSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vdd_values.is_empty() || self.f_values.is_empty() {
            return Err(SimError::Config("shmoo needs non-empty vdd and frequency lists".into()));
        }
        if self.n_chips == 0 || self.n_bits == 0 {
            return Err(SimError::Config("shmoo needs at least one chip and one bit".into()));
        }
        self.f_values.iter().try_for_each(|&f| Knob::FClk.check_range(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShmooGrid {
    pub vdd: Vec<f64>,
    pub f_clk: Vec<f64>,
    pub n_chips: u32,
    /// fail_chips[vdd index][f index].
    pub fail_chips: Vec<Vec<u32>>,
}

impl ShmooGrid {
    pub fn passes(&self, vi: usize, fi: usize) -> bool {
        self.fail_chips[vi][fi] == 0
    }

    /// Aligned text rendering, highest vdd on top.
    pub fn render(&self) -> String {
        let mut out = String::from("vdd\\f_clk");
        for f in &self.f_clk {
            out.push_str(&format!(" {f:>5}"));
        }
        out.push('\n');
        for (vi, v) in self.vdd.iter().enumerate().rev() {
            out.push_str(&format!("{v:>9.3}"));
            for fi in 0..self.f_clk.len() {
                let n = self.fail_chips[vi][fi];
                let cell = if n == 0 { "P".to_string() } else { n.to_string() };
                out.push_str(&format!(" {cell:>5}"));
            }
            out.push('\n');
        }
        out
    }
}

fn chip_passes(
    array: &ArrayConfig,
    scheme: Scheme,
    params: &SimParams,
    tree: &SeedTree,
    chip: &ChipSample,
    vdd: f64,
    f_clk: f64,
    tolerance: u64,
) -> Result<bool> {
    let p = Knob::FClk.apply(&Knob::Vdd.apply(params, vdd)?, f_clk)?;
    Ok(run_array_trials(array, scheme, &p, tree, chip)?.fails() <= tolerance)
}

pub fn shmoo(spec: &ShmooSpec, array: &ArrayConfig, params: &SimParams, tree: &SeedTree) -> Result<ShmooGrid> {
    spec.validate()?;
    let array = ArrayConfig { n_bits: spec.n_bits, flavor: spec.flavor, ..*array };
    let chips = chip_population(&params.variation, spec.n_chips, tree);
    let mut fail_chips = vec![vec![0u32; spec.f_values.len()]; spec.vdd_values.len()];
    for (vi, &vdd) in spec.vdd_values.iter().enumerate() {
        for (fi, &f) in spec.f_values.iter().enumerate() {
            for chip in &chips {
                if !chip_passes(&array, spec.scheme, params, tree, chip, vdd, f, spec.tolerance)? {
                    fail_chips[vi][fi] += 1;
                }
            }
        }
    }
    Ok(ShmooGrid { vdd: spec.vdd_values.clone(), f_clk: spec.f_values.clone(), n_chips: spec.n_chips, fail_chips })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChipsSpec {
    pub n_chips: u32,
    pub vdd_values: Vec<f64>,
    pub f_values: Vec<f64>,
    pub scheme: Scheme,
    pub n_bits: u64,
    pub flavor: FlavorMix,
    pub tolerance: u64,
}

impl Default for ChipsSpec {
    fn default() -> Self {
        ChipsSpec {
            n_chips: 10,
            vdd_values: vec![0.9, 0.95, 1.0],
            f_values: (0..17).map(|k| 100.0 + 25.0 * f64::from(k)).collect(),
            scheme: Scheme::SlopeDouble,
            n_bits: 8192,
            flavor: FlavorMix::Lo,
            tolerance: 0,
        }
    }
}

impl ChipsSpec {
    fn as_grid(&self) -> ShmooSpec {
        ShmooSpec {
            vdd_values: self.vdd_values.clone(),
            f_values: self.f_values.clone(),
            n_chips: self.n_chips,
            scheme: self.scheme,
            n_bits: self.n_bits,
            flavor: self.flavor,
            tolerance: self.tolerance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.as_grid().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassRecord {
    pub chip: u32,
    pub corner_shift: f64,
    pub vdd: f64,
    /// Highest passing clock on the grid, if any.
    pub f_max: Option<f64>,
}

/// Highest passing frequency per chip and supply. The passing set is not
/// monotone in frequency (slow clocks clamp, fast clocks lose SM1), so the
/// grid is scanned from the top rather than bisected.
pub fn passing_frequency(
    spec: &ChipsSpec,
    array: &ArrayConfig,
    params: &SimParams,
    tree: &SeedTree,
) -> Result<Vec<PassRecord>> {
    spec.validate()?;
    let array = ArrayConfig { n_bits: spec.n_bits, flavor: spec.flavor, ..*array };
    let mut f_desc = spec.f_values.clone();
    f_desc.sort_by(|a, b| b.total_cmp(a));
    let mut out = Vec::new();
    for chip in chip_population(&params.variation, spec.n_chips, tree) {
        for &vdd in &spec.vdd_values {
            let mut f_max = None;
            for &f in &f_desc {
                if chip_passes(&array, spec.scheme, params, tree, &chip, vdd, f, spec.tolerance)? {
                    f_max = Some(f);
                    break;
                }
            }
            out.push(PassRecord { chip: chip.chip_index, corner_shift: chip.corner_shift, vdd, f_max });
        }
    }
    Ok(out)
}

/// Failure-count ratio; when slope sensing has no failures both counts get
/// one added so the ratio stays finite.
pub fn reduction_factor(conv: &FailureStats, slope: &FailureStats) -> (f64, bool) {
    if slope.fails() > 0 {
        (conv.fails() as f64 / slope.fails() as f64, false)
    } else {
        ((conv.fails() + 1) as f64 / (slope.fails() + 1) as f64, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub n_bits: u64,
    pub tmr: Option<f64>,
    pub conv_v_clamp: f64,
    pub conv: FailureStats,
    pub slope: FailureStats,
    pub reduction: f64,
    pub smoothed: bool,
    pub conv_sweep: Vec<SweepPoint>,
}

pub fn compare(conv: &FailureStats, slope: &FailureStats) -> f64 {
    reduction_factor(conv, slope).0
}

/// Conventional sensing at its best clamp voltage on the grid (first of ties).
pub fn optimum_conv(
    array: &ArrayConfig,
    params: &SimParams,
    v_clamp_grid: &[f64],
    tree: &SeedTree,
) -> Result<(f64, FailureStats, Vec<SweepPoint>)> {
    let spec = SweepSpec { knob: Knob::VClamp, values: v_clamp_grid.to_vec(), scheme: Scheme::Conv };
    let points = sweep(&spec, array, params, tree)?;
    let best = points
        .iter()
        .fold(None::<&SweepPoint>, |best, p| match best {
            Some(b) if b.stats.fails() <= p.stats.fails() => Some(b),
            _ => Some(p),
        })
        .expect("non-empty grid");
    Ok((best.value, best.stats, points))
}

/// Optimized conventional sensing against double-sampled slope sensing on
/// the same array and seeds.
pub fn compare_schemes(
    array: &ArrayConfig,
    params: &SimParams,
    v_clamp_grid: &[f64],
    tree: &SeedTree,
) -> Result<Comparison> {
    let (conv_v_clamp, conv, conv_sweep) = optimum_conv(array, params, v_clamp_grid, tree)?;
    let slope = run_array_trials(array, Scheme::SlopeDouble, params, tree, &ChipSample::nominal())?;
    let (reduction, smoothed) = reduction_factor(&conv, &slope);
    Ok(Comparison { n_bits: array.n_bits, tmr: params.tmr, conv_v_clamp, conv, slope, reduction, smoothed, conv_sweep })
}
