//! Command-line surface. Every artifact carries the config digest and the
//! master seed; CSV files put them in leading `#` comment lines.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::device::{DeviceSample, Flavor};
use crate::error::{Result, SimError};
use crate::experiments::{
    compare_schemes, passing_frequency, read_bit, shmoo, sweep, ArrayConfig, FlavorMix, Knob, Pattern, Scheme,
};
use crate::reliability::reliability_report;
use crate::variation::{ChipSample, SeedTree};
use crate::waveform::WaveformTrace;

#[derive(Debug, Parser)]
#[command(name = "slopesense", version, about = "Slope-detection vs clamped voltage sensing simulator")]
pub struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub v_clamp: Option<f64>,
    /// Zero-bias TMR, percent.
    #[arg(long)]
    pub tmr: Option<f64>,
    /// Clock, MHz.
    #[arg(long)]
    pub f_clk: Option<f64>,
    /// Ramp slope, µA/ns.
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub t_sw_cycles: Option<f64>,
    #[arg(long)]
    pub vdd: Option<f64>,
    #[arg(long)]
    pub wl_cycles: Option<u32>,
    #[arg(long)]
    pub bits: Option<u64>,
    /// LO, HI or BOTH.
    #[arg(long)]
    pub flavor: Option<String>,
    /// conv, slope (double sampling) or slope_single.
    #[arg(long)]
    pub scheme: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read one bit and dump every sample, latch and margin.
    Read {
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[command(flatten)]
        knobs: Overrides,
    },
    /// Failure counts over a knob sweep.
    Sweep {
        #[arg(long)]
        knob: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        knobs: Overrides,
    },
    /// Failing-chip counts over a supply × clock grid.
    Shmoo {
        #[arg(long)]
        chips: Option<u32>,
        #[command(flatten)]
        knobs: Overrides,
    },
    /// Highest passing clock per chip and supply.
    Chips {
        #[arg(long)]
        chips: Option<u32>,
        #[command(flatten)]
        knobs: Overrides,
    },
    /// Optimized conventional sensing against slope sensing.
    Compare {
        #[command(flatten)]
        knobs: Overrides,
    },
    /// Lifetime, endurance and write pulse for both schemes.
    Reliability,
    /// Waveform of a nominal cell.
    Trace {
        /// Stored bit, 0 or 1.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
        bit: u8,
        /// Time step, ns.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[command(flatten)]
        knobs: Overrides,
    },
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, k: &Overrides) -> Result<()> {
    let m = &mut cfg.model;
    if let Some(v) = k.v_clamp {
        m.conv.v_clamp = v;
    }
    if let Some(v) = k.tmr {
        m.tmr = Some(v);
    }
    if let Some(v) = k.f_clk {
        m.ramp.f_clk = v;
    }
    if let Some(v) = k.slope {
        m.ramp.slope = v;
    }
    if let Some(v) = k.t_sw_cycles {
        m.t_sw_cycles = Some(v);
    }
    if let Some(v) = k.vdd {
        m.set_vdd(v);
    }
    if let Some(v) = k.wl_cycles {
        m.ramp.wl_cycles = v;
    }
    if let Some(f) = &k.flavor {
        let f: FlavorMix = f.parse()?;
        cfg.array.flavor = f;
        cfg.shmoo.flavor = f;
        cfg.chips.flavor = f;
        cfg.compare.flavor = f;
    }
    if let Some(n) = k.bits {
        cfg.array.n_bits = n;
        cfg.shmoo.n_bits = n;
        cfg.chips.n_bits = n;
        cfg.compare.n_bits = n;
    }
    if let Some(s) = &k.scheme {
        let s: Scheme = s.parse()?;
        cfg.sweep.scheme = s;
        cfg.shmoo.scheme = s;
        cfg.chips.scheme = s;
    }
    Ok(())
}

fn no_overrides() -> &'static Overrides {
    static EMPTY: Overrides = Overrides {
        v_clamp: None,
        tmr: None,
        f_clk: None,
        slope: None,
        t_sw_cycles: None,
        vdd: None,
        wl_cycles: None,
        bits: None,
        flavor: None,
        scheme: None,
    };
    &EMPTY
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.display().to_string();
    }
    let knobs = match &cli.command {
        Command::Read { knobs, .. }
        | Command::Sweep { knobs, .. }
        | Command::Shmoo { knobs, .. }
        | Command::Chips { knobs, .. }
        | Command::Compare { knobs }
        | Command::Trace { knobs, .. } => knobs,
        Command::Reliability => no_overrides(),
    };
    apply_overrides(&mut cfg, knobs)?;
    match &cli.command {
        Command::Sweep { knob, values, .. } => {
            if let Some(k) = knob {
                cfg.sweep.knob = k.parse::<Knob>()?;
            }
            if let Some(v) = values {
                cfg.sweep.values = v.clone();
            }
        }
        Command::Shmoo { chips: Some(n), .. } => cfg.shmoo.n_chips = *n,
        Command::Chips { chips: Some(n), .. } => cfg.chips.n_chips = *n,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>> {
    let cfg = effective_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| SimError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir)?;
    let w = Writer { dir: out_dir, cfg: &cfg };
    pool.install(|| dispatch(&cli.command, &cfg, &w))
}

struct Writer<'a> {
    dir: PathBuf,
    cfg: &'a RunConfig,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_sha256: String,
    master_seed: u64,
    command: &'a str,
    result: T,
    config: serde_json::Value,
}

impl Writer<'_> {
    fn csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let mut s = String::new();
        let _ = writeln!(s, "# config_sha256={}", self.cfg.sha256());
        let _ = writeln!(s, "# master_seed={}", self.cfg.master_seed);
        s.push_str(header);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        self.write(name, &s)
    }

    fn json<T: Serialize>(&self, name: &str, command: &str, result: T) -> Result<PathBuf> {
        let env = Envelope {
            config_sha256: self.cfg.sha256(),
            master_seed: self.cfg.master_seed,
            command,
            result,
            config: self.cfg.canonical(),
        };
        let mut s = serde_json::to_string_pretty(&env).map_err(|e| SimError::Numeric(format!("cannot serialize: {e}")))?;
        s.push('\n');
        self.write(name, &s)
    }

    fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let s = format!("# config_sha256={}\n# master_seed={}\n{body}", self.cfg.sha256(), self.cfg.master_seed);
        self.write(name, &s)
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        Ok(path)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn dispatch(cmd: &Command, cfg: &RunConfig, w: &Writer<'_>) -> Result<Vec<PathBuf>> {
    let tree = SeedTree::new(cfg.master_seed);
    let m = &cfg.model;
    match cmd {
        Command::Read { index, knobs } => {
            let scheme = match &knobs.scheme {
                Some(s) => s.parse()?,
                None => Scheme::SlopeDouble,
            };
            let report = read_bit(&cfg.array, scheme, m, &tree, &ChipSample::nominal(), *index)?;
            Ok(vec![w.json("read.json", "read", &report)?])
        }
        Command::Sweep { .. } => {
            let points = sweep(&cfg.sweep, &cfg.array, m, &tree)?;
            let knob = cfg.sweep.knob.label();
            let rows: Vec<String> = points
                .iter()
                .map(|p| {
                    format!(
                        "{knob},{},{},{},{},{}",
                        p.value,
                        p.stats.n_trials,
                        p.stats.sm0_fails,
                        p.stats.sm1_fails,
                        p.stats.failure_ratio()
                    )
                })
                .collect();
            let csv = w.csv("sweep.csv", "knob,value,n_trials,sm0,sm1,ratio", &rows)?;
            let json = w.json("sweep.json", "sweep", &points)?;
            Ok(vec![csv, json])
        }
        Command::Shmoo { .. } => {
            let grid = shmoo(&cfg.shmoo, &cfg.array, m, &tree)?;
            let mut rows = Vec::new();
            for (vi, v) in grid.vdd.iter().enumerate() {
                for (fi, f) in grid.f_clk.iter().enumerate() {
                    rows.push(format!("{v},{f},{},{}", grid.fail_chips[vi][fi], grid.n_chips));
                }
            }
            let csv = w.csv("shmoo.csv", "vdd,f_clk,fail_chips,n_chips", &rows)?;
            let txt = w.text("shmoo.txt", &grid.render())?;
            Ok(vec![csv, txt])
        }
        Command::Chips { .. } => {
            let recs = passing_frequency(&cfg.chips, &cfg.array, m, &tree)?;
            let rows: Vec<String> =
                recs.iter().map(|r| format!("{},{},{},{}", r.chip, r.corner_shift, r.vdd, opt(r.f_max))).collect();
            Ok(vec![w.csv("chips.csv", "chip,corner_shift,vdd,f_max", &rows)?])
        }
        Command::Compare { .. } => {
            let array = ArrayConfig { n_bits: cfg.compare.n_bits, flavor: cfg.compare.flavor, pattern: Pattern::Random };
            let c = compare_schemes(&array, m, &cfg.compare.v_clamp_grid, &tree)?;
            Ok(vec![w.json("compare.json", "compare", &c)?])
        }
        Command::Reliability => {
            let r = reliability_report(&cfg.reliability)?;
            Ok(vec![w.json("reliability.json", "reliability", &r)?])
        }
        Command::Trace { bit, dt, .. } => {
            let flavor = match cfg.array.flavor {
                FlavorMix::Hi => Flavor::Hi,
                _ => Flavor::Lo,
            };
            let nominal = m.nominal(flavor);
            let sw = m.effective_switching();
            let tmr = m.tmr.unwrap_or_else(|| nominal.tmr0());
            let cell = DeviceSample::new(nominal.r_low0, nominal.r_low0 * (1.0 + tmr / 100.0), sw.t_sw_ref, 0.0);
            let curve = m.effective_curve();
            let t_sw = sw.ref_slope / m.ramp.slope * sw.t_sw_ref;
            let trace = WaveformTrace::new(cell, *bit == 1, m.ramp, m.buffer, &curve, t_sw)?;
            let rows: Vec<String> = trace
                .rows(*dt)?
                .iter()
                .map(|r| format!("{},{},{},{}", r[0], r[1], r[2], r[3]))
                .collect();
            Ok(vec![w.csv("trace.csv", "t_ns,i_ua,v_bit,v_bufo", &rows)?])
        }
    }
}

/// Reads the two leading comment lines of an artifact.
pub fn artifact_stamp(path: &Path) -> Result<(String, u64)> {
    let text = std::fs::read_to_string(path)?;
    let mut hash = None;
    let mut seed = None;
    for line in text.lines().take(2) {
        if let Some(h) = line.strip_prefix("# config_sha256=") {
            hash = Some(h.to_string());
        } else if let Some(s) = line.strip_prefix("# master_seed=") {
            seed = s.parse().ok();
        }
    }
    match (hash, seed) {
        (Some(h), Some(s)) => Ok((h, s)),
        _ => Err(SimError::Config(format!("{} carries no config stamp", path.display()))),
    }
}
