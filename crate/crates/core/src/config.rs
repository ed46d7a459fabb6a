//! Run configuration: one JSON document holding every module's settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};
use crate::experiments::{ArrayConfig, ChipsSpec, FlavorMix, Knob, ShmooSpec, SimParams, SweepSpec};
use crate::reliability::ReliabilityConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    pub n_bits: u64,
    pub flavor: FlavorMix,
    pub v_clamp_grid: Vec<f64>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec { n_bits: 48 * 1024, flavor: FlavorMix::Lo, v_clamp_grid: vec![0.8, 0.85, 0.9, 0.95] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Worker threads; 0 uses every core. Never changes results.
    pub workers: usize,
    pub output_dir: String,
    pub model: SimParams,
    pub array: ArrayConfig,
    pub sweep: SweepSpec,
    pub shmoo: ShmooSpec,
    pub chips: ChipsSpec,
    pub compare: CompareSpec,
    pub reliability: ReliabilityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 1,
            workers: 0,
            output_dir: "out".into(),
            model: SimParams::default(),
            array: ArrayConfig::default(),
            sweep: SweepSpec::default(),
            shmoo: ShmooSpec::default(),
            chips: ChipsSpec::default(),
            compare: CompareSpec::default(),
            reliability: ReliabilityConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let m = &self.model;
        Knob::RampSlope.check_range(m.ramp.slope)?;
        Knob::FClk.check_range(m.ramp.f_clk)?;
        if let Some(k) = m.t_sw_cycles {
            Knob::TSwCycles.check_range(k)?;
        }
        if let Some(t) = m.tmr {
            Knob::Tmr.check_range(t)?;
        }
        self.array.validate()?;
        self.sweep.validate()?;
        self.shmoo.validate()?;
        self.chips.validate()?;
        if self.compare.v_clamp_grid.is_empty() || self.compare.n_bits == 0 {
            return Err(config_err("compare needs a clamp grid and at least one bit"));
        }
        self.reliability.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The config without the fields that only place the run (worker
    /// count, output directory); these never change results.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("workers");
            map.remove("output_dir");
        }
        v
    }

    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
