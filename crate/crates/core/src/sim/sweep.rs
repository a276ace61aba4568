use std::f64::consts::PI;

use num_complex::Complex64;

use crate::lti::FrequencyResponse;
use crate::{Error, Result};

/// Frequency cap of the reference analyzer, Hz.
pub const DEFAULT_MAX_FREQ_HZ: f64 = 100e3;
pub const MIN_CYCLES: u32 = 5;

/// Uniformly sampled input/output record of one sine run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub dt: f64,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub response: FrequencyResponse,
    /// Frequencies whose run failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

/// Fourier coefficient at `f` of the last `n` samples of `x`.
pub fn correlate_bin(x: &[f64], dt: f64, f: f64, n: usize) -> Complex64 {
    let n = n.min(x.len());
    let start = x.len() - n;
    let w = 2.0 * PI * f * dt;
    let acc: Complex64 = x[start..]
        .iter()
        .enumerate()
        .map(|(i, &v)| v * Complex64::from_polar(1.0, -w * (start + i) as f64))
        .sum();
    acc * (2.0 / n as f64)
}

/// Gain and phase of one run, correlated over its last `cycles` periods.
pub fn sweep_point(run: &SweepRun, f: f64, cycles: u32) -> Result<Complex64> {
    if run.input.len() != run.output.len() {
        return Err(Error::Metric("input and output lengths differ".into()));
    }
    let n = (cycles as f64 / (f * run.dt)).round() as usize;
    if n < 4 || n > run.input.len() {
        return Err(Error::Metric(format!("run too short for {cycles} cycles at {f} Hz")));
    }
    let u = correlate_bin(&run.input, run.dt, f, n);
    if u.norm() == 0.0 {
        return Err(Error::Metric(format!("no input content at {f} Hz")));
    }
    Ok(correlate_bin(&run.output, run.dt, f, n) / u)
}

/// Frequency response from sinusoidal runs.
///
/// `system(f, cycles)` must return a run that reaches steady state and then
/// covers at least `cycles` periods. A failing point is recorded and the
/// sweep moves on.
pub fn sine_sweep_frf<S>(system: S, freqs: &[f64], cycles: u32, max_freq: f64) -> Result<SweepOutcome>
where
    S: Fn(f64, u32) -> Result<SweepRun>,
{
    if cycles < MIN_CYCLES {
        return Err(Error::config("sweep.cycles", format!("must be at least {MIN_CYCLES}, got {cycles}")));
    }
    if let Some(f) = freqs.iter().find(|&&f| !(f > 0.0 && f <= max_freq)) {
        return Err(Error::config("sweep.freqs", format!("{f} Hz outside (0, {max_freq}] Hz")));
    }
    let mut response = FrequencyResponse { freqs_hz: Vec::new(), values: Vec::new() };
    let mut failures = Vec::new();
    for &f in freqs {
        match system(f, cycles).and_then(|run| sweep_point(&run, f, cycles)) {
            Ok(h) => {
                response.freqs_hz.push(f);
                response.values.push(h);
            }
            Err(e) => failures.push((f, e.to_string())),
        }
    }
    Ok(SweepOutcome { response, failures })
}
