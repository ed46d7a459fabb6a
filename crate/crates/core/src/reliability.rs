//! Oxide breakdown (E-model) lifetime and endurance, plus the write-back
//! pulse budget.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EModelParams {
    /// Zero-field breakdown rate, 1/s.
    pub a: f64,
    /// Field acceleration, volts.
    pub b: f64,
}

impl Default for EModelParams {
    fn default() -> Self {
        EModelParams { a: 9.43e-21, b: 0.019 }
    }
}

impl EModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(SimError::Config(format!("E-model needs A > 0 and B > 0, got {self:?}")));
        }
        Ok(())
    }
}

fn check_finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(SimError::Numeric(format!("{name} overflowed ({x})")))
    }
}

/// Breakdown rate at a constant stress voltage, 1/s.
pub fn breakdown_probability(p: &EModelParams, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(SimError::Domain(format!("stress voltage must be non-negative, got {v}")));
    }
    check_finite("breakdown rate", p.a * (v / p.b).exp())
}

/// Time to 50% breakdown under constant stress, s.
pub fn half_life_const(p: &EModelParams, v: f64) -> Result<f64> {
    Ok(std::f64::consts::LN_2 / breakdown_probability(p, v)?)
}

/// Cumulative hazard of a linear ramp from 0 V after `t` seconds.
pub fn ramp_hazard(p: &EModelParams, dv_dt: f64, t: f64) -> Result<f64> {
    if !(dv_dt > 0.0 && t >= 0.0) {
        return Err(SimError::Domain(format!("ramp needs dv/dt > 0 and t >= 0 (got {dv_dt}, {t})")));
    }
    check_finite("ramp hazard", p.a * p.b / dv_dt * (dv_dt * t / p.b).exp_m1())
}

/// Fraction of junctions broken down after `t` seconds of ramp stress.
pub fn ramp_failure_fraction(p: &EModelParams, dv_dt: f64, t: f64) -> Result<f64> {
    Ok(-(-ramp_hazard(p, dv_dt, t)?).exp_m1())
}

/// The ramp failure fraction with the constant term written as A·B·(dv/dt)
/// instead of A·B/(dv/dt). Kept for side-by-side comparison only.
pub fn ramp_failure_fraction_as_printed(p: &EModelParams, dv_dt: f64, t: f64) -> Result<f64> {
    if !(dv_dt > 0.0 && t >= 0.0) {
        return Err(SimError::Domain(format!("ramp needs dv/dt > 0 and t >= 0 (got {dv_dt}, {t})")));
    }
    let rate = p.a * (dv_dt * t / p.b).exp();
    let h = rate * p.b / dv_dt - p.a * p.b * dv_dt;
    check_finite("ramp hazard", h).map(|h| -(-h).exp_m1())
}

/// Median lifetime under back-to-back ramps of `ramp_duration` seconds.
pub fn lifetime_ramp(p: &EModelParams, dv_dt: f64, ramp_duration: f64) -> Result<f64> {
    if !(ramp_duration > 0.0) {
        return Err(SimError::Domain(format!("ramp duration must be positive, got {ramp_duration}")));
    }
    let h = ramp_hazard(p, dv_dt, ramp_duration)?;
    if !(h > 0.0) {
        return Err(SimError::Numeric("per-cycle hazard underflowed to zero".into()));
    }
    Ok(std::f64::consts::LN_2 * ramp_duration / h)
}

fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Reads per second for a read of `read_time` seconds, quoted to two
/// significant figures.
pub fn reads_per_second(read_time: f64) -> Result<f64> {
    if !(read_time > 0.0) {
        return Err(SimError::Domain(format!("read time must be positive, got {read_time}")));
    }
    Ok(round_sig(1.0 / read_time, 2))
}

/// Reads before median breakdown.
pub fn endurance(lifetime_s: f64, read_time: f64) -> Result<f64> {
    if !(lifetime_s > 0.0) {
        return Err(SimError::Domain(format!("lifetime must be positive, got {lifetime_s}")));
    }
    Ok(reads_per_second(read_time)? * lifetime_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WriteModel {
    /// ns.
    pub latency_mu: f64,
    /// ns.
    pub latency_sigma: f64,
    pub margin_k: u32,
    /// µA.
    pub write_current: f64,
}

impl Default for WriteModel {
    fn default() -> Self {
        WriteModel { latency_mu: 4.7, latency_sigma: (10.0 - 4.7) / 6.0, margin_k: 6, write_current: 100.0 }
    }
}

impl WriteModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.latency_mu > 0.0 && self.latency_sigma >= 0.0 && self.write_current > 0.0) {
            return Err(SimError::Config(format!("invalid write model {self:?}")));
        }
        Ok(())
    }
}

/// Write-back pulse width, ns.
pub fn write_pulse(model: &WriteModel) -> f64 {
    model.latency_mu + f64::from(model.margin_k) * model.latency_sigma
}

/// One write latency draw, ns; Gaussian conditioned on being positive.
pub fn write_latency_sample<R: Rng + ?Sized>(model: &WriteModel, rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let t = model.latency_mu + model.latency_sigma * z;
        if t > 0.0 {
            return t;
        }
    }
}

/// Stress seen by each scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StressConfig {
    /// Worst-case constant bias of conventional sensing per flavor, V.
    pub conv_v_lo: f64,
    pub conv_v_hi: f64,
    /// Conventional word-line time per read, s.
    pub conv_read_time: f64,
    /// Slope sensing ramp: peak voltage over the ramp duration.
    pub ramp_peak: f64,
    pub ramp_duration: f64,
    /// Slope sensing time per read, s.
    pub slope_read_time: f64,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            conv_v_lo: 0.2,
            conv_v_hi: 0.24,
            conv_read_time: 12e-9,
            ramp_peak: 0.6,
            ramp_duration: 20e-9,
            slope_read_time: 26e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilityConfig {
    pub emodel: EModelParams,
    pub stress: StressConfig,
    pub write: WriteModel,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        ReliabilityConfig { emodel: EModelParams::default(), stress: StressConfig::default(), write: WriteModel::default() }
    }
}

impl ReliabilityConfig {
    pub fn validate(&self) -> Result<()> {
        self.emodel.validate()?;
        self.write.validate()?;
        let s = &self.stress;
        for (name, x) in [
            ("conv_read_time", s.conv_read_time),
            ("ramp_peak", s.ramp_peak),
            ("ramp_duration", s.ramp_duration),
            ("slope_read_time", s.slope_read_time),
        ] {
            if !(x > 0.0) {
                return Err(SimError::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if !(s.conv_v_lo >= 0.0 && s.conv_v_hi >= 0.0) {
            return Err(SimError::Config("conventional stress voltages must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeReliability {
    pub scheme: &'static str,
    pub flavor: &'static str,
    pub lifetime_s: f64,
    pub reads_per_second: f64,
    pub endurance: f64,
    /// Published figure for the same quantity, for reference.
    pub reference_lifetime_s: f64,
    pub reference_endurance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub rows: Vec<SchemeReliability>,
    pub ramp_dv_dt: f64,
    pub ramp_failure_per_read: f64,
    pub ramp_failure_per_read_as_printed: f64,
    pub write_pulse_ns: f64,
    /// Slope-sensing endurance over conventional endurance, LO flavor.
    pub endurance_ratio_lo: f64,
}

pub fn reliability_report(cfg: &ReliabilityConfig) -> Result<ReliabilityReport> {
    cfg.validate()?;
    let p = &cfg.emodel;
    let s = &cfg.stress;
    let dv_dt = s.ramp_peak / s.ramp_duration;
    let slope_life = lifetime_ramp(p, dv_dt, s.ramp_duration)?;
    let mut rows = Vec::new();
    for (flavor, v, ref_life, ref_end) in [("LO", s.conv_v_lo, 1.8e15, 11e22), ("HI", s.conv_v_hi, 4e14, 24e21)] {
        let life = half_life_const(p, v)?;
        rows.push(SchemeReliability {
            scheme: "CONV",
            flavor,
            lifetime_s: life,
            reads_per_second: reads_per_second(s.conv_read_time)?,
            endurance: endurance(life, s.conv_read_time)?,
            reference_lifetime_s: ref_life,
            reference_endurance: ref_end,
        });
    }
    for (flavor, ref_life, ref_end) in [("LO", 1.8e10, 6.84e17), ("HI", 1.9e10, 7.2e17)] {
        rows.push(SchemeReliability {
            scheme: "SLOPE",
            flavor,
            lifetime_s: slope_life,
            reads_per_second: reads_per_second(s.slope_read_time)?,
            endurance: endurance(slope_life, s.slope_read_time)?,
            reference_lifetime_s: ref_life,
            reference_endurance: ref_end,
        });
    }
    let endurance_ratio_lo = rows[2].endurance / rows[0].endurance;
    Ok(ReliabilityReport {
        rows,
        ramp_dv_dt: dv_dt,
        ramp_failure_per_read: ramp_failure_fraction(p, dv_dt, s.ramp_duration)?,
        ramp_failure_per_read_as_printed: ramp_failure_fraction_as_printed(p, dv_dt, s.ramp_duration)?,
        write_pulse_ns: write_pulse(&cfg.write),
        endurance_ratio_lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Geometric};

    const P: EModelParams = EModelParams { a: 9.43e-21, b: 0.019 };

    /// Trapezoid integral of the instantaneous rate along the ramp.
    fn hazard_by_quadrature(p: &EModelParams, dv_dt: f64, t: f64, n: usize) -> f64 {
        let h = t / n as f64;
        let rate = |x: f64| p.a * (dv_dt * x / p.b).exp();
        let inner: f64 = (1..n).map(|k| rate(k as f64 * h)).sum();
        h * (0.5 * (rate(0.0) + rate(t)) + inner)
    }

    #[test]
    fn rate_examples() {
        assert_eq!(breakdown_probability(&P, 0.0).unwrap(), 9.43e-21);
        let r = breakdown_probability(&P, 0.2).unwrap();
        assert!((r / 3.51e-16 - 1.0).abs() < 0.01, "{r}");
        assert!(breakdown_probability(&P, -0.1).is_err());
    }

    #[test]
    fn half_life_examples() {
        let t = half_life_const(&P, 0.2).unwrap();
        assert!((t / 1.97e15 - 1.0).abs() < 0.01, "{t}");
        let t = half_life_const(&P, 0.24).unwrap();
        assert!((t / 2.4e14 - 1.0).abs() < 0.03, "{t}");
        let doubled = EModelParams { a: 2.0 * P.a, ..P };
        assert!((half_life_const(&doubled, 0.2).unwrap() * 2.0 / half_life_const(&P, 0.2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_fraction_starts_at_zero() {
        assert_eq!(ramp_failure_fraction(&P, 3e7, 0.0).unwrap(), 0.0);
        assert!(ramp_failure_fraction(&P, 0.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_agrees_on_the_slope_read_ramp() {
        let exact = ramp_hazard(&P, 3e7, 20e-9).unwrap();
        let numeric = hazard_by_quadrature(&P, 3e7, 20e-9, 200_000);
        assert!((exact / numeric - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ramp_lifetime_value() {
        let t = lifetime_ramp(&P, 0.6 / 20e-9, 20e-9).unwrap();
        assert!((t / 4.47e7 - 1.0).abs() < 0.01, "{t}");
    }

    #[test]
    fn printed_form_differs_only_in_constant_term() {
        let dv_dt = 3e7;
        let fixed = ramp_failure_fraction(&P, dv_dt, 20e-9).unwrap();
        let printed = ramp_failure_fraction_as_printed(&P, dv_dt, 20e-9).unwrap();
        assert!(fixed > 0.0);
        // A·B·(dv/dt) outweighs the growing term at this stress, so the
        // printed form goes negative
        assert!(printed < 0.0);
        let rate = P.a * (dv_dt * 20e-9 / P.b).exp();
        let h_printed = -(-printed).ln_1p();
        assert!((h_printed - (rate * P.b / dv_dt - P.a * P.b * dv_dt)).abs() < 1e-20);
    }

    #[test]
    fn read_rate_and_endurance() {
        assert_eq!(reads_per_second(26e-9).unwrap(), 3.8e7);
        assert_eq!(reads_per_second(12e-9).unwrap(), 8.3e7);
        let e = endurance(1.8e10, 26e-9).unwrap();
        assert!((e / 6.84e17 - 1.0).abs() < 1e-12);
        let e = endurance(4e14, 12e-9).unwrap();
        assert!((e / 3.32e22 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn endurance_gap_between_schemes() {
        // published lifetimes and read times
        let conv = endurance(1.8e15, 12e-9).unwrap();
        let slope = endurance(1.8e10, 26e-9).unwrap();
        let ratio = (slope / conv).log10();
        assert!((-6.0..=-4.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn write_pulse_examples() {
        assert!((write_pulse(&WriteModel::default()) - 10.0).abs() < 1e-12);
        let m = WriteModel { latency_sigma: 0.0, ..WriteModel::default() };
        assert_eq!(write_pulse(&m), 4.7);
    }

    #[test]
    fn write_samples_stay_within_pulse() {
        let m = WriteModel::default();
        let pulse = write_pulse(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<f64> = (0..5000).map(|_| write_latency_sample(&m, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < pulse));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 4.7).abs() < 3.0 * m.latency_sigma / (xs.len() as f64).sqrt());
    }

    #[test]
    fn monte_carlo_cycles_reproduce_ramp_lifetime() {
        // scale A so a device survives ~10^4 cycles, then draw cycles to
        // failure per device and compare the median with the closed form
        let p = EModelParams { a: 3e-9, b: 0.019 };
        let (dv_dt, dur) = (3e7, 20e-9);
        let h = ramp_hazard(&p, dv_dt, dur).unwrap();
        let q = -(-h).exp_m1();
        let geo = Geometric::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut cycles: Vec<u64> = (0..20_001).map(|_| geo.sample(&mut rng) + 1).collect();
        cycles.sort_unstable();
        let median = cycles[cycles.len() / 2] as f64 * dur;
        let tau = lifetime_ramp(&p, dv_dt, dur).unwrap();
        assert!((median / tau - 1.0).abs() < 0.05, "median {median} vs {tau}");
        assert!(cycles.iter().sum::<u64>() > 1_000_000);
    }

    #[test]
    fn report_has_both_schemes_and_flavors() {
        let r = reliability_report(&ReliabilityConfig::default()).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!((r.write_pulse_ns - 10.0).abs() < 1e-12);
        assert!(r.endurance_ratio_lo < 1.0);
    }

    proptest! {
        #[test]
        fn closed_form_matches_quadrature(log_rate in 5.0f64..9.0, frac in 0.0f64..1.0) {
            let dv_dt = 10f64.powf(log_rate);
            let t = frac * 0.8 / dv_dt;
            let exact = ramp_hazard(&P, dv_dt, t).unwrap();
            let numeric = hazard_by_quadrature(&P, dv_dt, t, 20_000);
            prop_assert!(exact == numeric || (exact / numeric - 1.0).abs() < 1e-6);
        }

        #[test]
        fn fraction_monotone_in_time(dv_dt in 1e6f64..1e9, f1 in 0.0f64..0.5, df in 0.0f64..0.5) {
            let (t1, dt) = (f1 / dv_dt, df / dv_dt);
            prop_assert!(ramp_failure_fraction(&P, dv_dt, t1 + dt).unwrap() >= ramp_failure_fraction(&P, dv_dt, t1).unwrap());
        }

        #[test]
        fn lifetime_decreases_with_voltage(v in 0.0f64..0.5, dv in 0.001f64..0.1) {
            prop_assert!(half_life_const(&P, v + dv).unwrap() < half_life_const(&P, v).unwrap());
        }

        #[test]
        fn endurance_decreases_with_read_time(life in 1e6f64..1e16, rt in 1e-9f64..1e-7, k in 1.2f64..3.0) {
            prop_assert!(endurance(life, rt * k).unwrap() < endurance(life, rt).unwrap());
        }
    }
}
