//! Hybrid continuous/discrete simulation and response metrics.

mod engine;
mod lti;
mod metrics;
mod sweep;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{check_positive, fmt_sig, Error, Result};

pub use engine::{rk4_step, simulate, Actuation, AnalogLoop, Controller};
pub use lti::{lti_response, lti_step, ZohModel};
pub use metrics::{step_metrics, Channel, StepMetrics};
pub use sweep::{correlate_bin, sine_sweep_frf, sweep_point, SweepOutcome, SweepRun, DEFAULT_MAX_FREQ_HZ, MIN_CYCLES};

pub const TRACE_CSV_HEADER: &str = "t,ref,theta,omega_r,i_c,v_c,u_dac";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Step,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub amplitude: f64,
    /// Square-wave frequency, Hz; ignored for steps.
    pub frequency: f64,
}

impl Reference {
    pub fn step(amplitude: f64) -> Self {
        Self { kind: ReferenceKind::Step, amplitude, frequency: 0.0 }
    }

    pub fn square(amplitude: f64, frequency: f64) -> Self {
        Self { kind: ReferenceKind::Square, amplitude, frequency }
    }

    /// Value at sample index `k` of a grid with period `t_s`.
    ///
    /// Square waves start high and switch every half period; indexing by
    /// sample keeps the edges on exact sample instants.
    pub fn at_sample(&self, k: u64, t_s: f64) -> f64 {
        match self.kind {
            ReferenceKind::Step => self.amplitude,
            ReferenceKind::Square => {
                let half = (0.5 / (self.frequency * t_s)).round().max(1.0) as u64;
                if (k / half).is_multiple_of(2) {
                    self.amplitude
                } else {
                    -self.amplitude
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub v_max: f64,
    pub i_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub f_s: f64,
    pub duration: f64,
    pub reference: Reference,
    pub saturation: Saturation,
    pub adc_bits: Option<u32>,
    /// Bipolar DAC and ADC span, ±V.
    pub dac_range: f64,
    pub delay_samples: usize,
    /// Angle mapped onto the full ADC span, ±rad.
    #[serde(default = "default_theta_full_scale")]
    pub theta_full_scale: f64,
    /// Record every `record_stride`-th integrator step.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_theta_full_scale() -> f64 {
    std::f64::consts::FRAC_PI_4
}

fn default_stride() -> usize {
    1
}

impl SimConfig {
    pub fn t_s(&self) -> f64 {
        1.0 / self.f_s
    }

    /// Integrator steps per controller sample.
    pub fn substeps(&self) -> usize {
        (self.t_s() / self.dt).round() as usize
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        check_positive(&format!("{path}.dt"), self.dt)?;
        check_positive(&format!("{path}.f_s"), self.f_s)?;
        check_positive(&format!("{path}.duration"), self.duration)?;
        check_positive(&format!("{path}.dac_range"), self.dac_range)?;
        check_positive(&format!("{path}.theta_full_scale"), self.theta_full_scale)?;
        check_positive(&format!("{path}.saturation.v_max"), self.saturation.v_max)?;
        check_positive(&format!("{path}.saturation.i_max"), self.saturation.i_max)?;
        if self.dt > self.t_s() / 10.0 * (1.0 + 1e-12) {
            return Err(Error::config(
                format!("{path}.dt"),
                format!("must be at most 1/(10·f_s) = {:e}, got {:e}", self.t_s() / 10.0, self.dt),
            ));
        }
        let ratio = self.t_s() / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::config(
                format!("{path}.dt"),
                format!("must divide the sampling period exactly (ratio {ratio})"),
            ));
        }
        if let Some(b) = self.adc_bits {
            if !(8..=24).contains(&b) {
                return Err(Error::config(format!("{path}.adc_bits"), format!("must lie in 8..=24, got {b}")));
            }
        }
        if !self.reference.amplitude.is_finite() {
            return Err(Error::config(format!("{path}.reference.amplitude"), "must be finite"));
        }
        if self.reference.kind == ReferenceKind::Square {
            check_positive(&format!("{path}.reference.frequency"), self.reference.frequency)?;
        }
        if self.record_stride == 0 {
            return Err(Error::config(format!("{path}.record_stride"), "must be at least 1"));
        }
        Ok(())
    }

    /// Quantization step of the angle measurement, rad.
    pub fn theta_lsb(&self) -> Option<f64> {
        self.adc_bits.map(|b| 2.0 * self.theta_full_scale / 2f64.powi(b as i32))
    }
}

/// Uniformly sampled simulation record, SI units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimTrace {
    pub t: Vec<f64>,
    #[serde(rename = "ref")]
    pub reference: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega_r: Vec<f64>,
    pub i_c: Vec<f64>,
    pub v_c: Vec<f64>,
    pub u_dac: Vec<f64>,
    /// Controller-internal signal, e.g. the velocity estimate.
    #[serde(skip)]
    pub aux: Vec<f64>,
}

impl SimTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            reference: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            omega_r: Vec::with_capacity(n),
            i_c: Vec::with_capacity(n),
            v_c: Vec::with_capacity(n),
            u_dac: Vec::with_capacity(n),
            aux: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push(&mut self, t: f64, r: f64, theta: f64, omega: f64, i_c: f64, v_c: f64, u: f64, aux: f64) {
        self.t.push(t);
        self.reference.push(r);
        self.theta.push(theta);
        self.omega_r.push(omega);
        self.i_c.push(i_c);
        self.v_c.push(v_c);
        self.u_dac.push(u);
        self.aux.push(aux);
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        match c {
            Channel::Theta => &self.theta,
            Channel::OmegaR => &self.omega_r,
            Channel::IC => &self.i_c,
            Channel::VC => &self.v_c,
            Channel::UDac => &self.u_dac,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(100 * (self.len() + 1));
        s.push_str(TRACE_CSV_HEADER);
        s.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                fmt_sig(self.t[i]),
                fmt_sig(self.reference[i]),
                fmt_sig(self.theta[i]),
                fmt_sig(self.omega_r[i]),
                fmt_sig(self.i_c[i]),
                fmt_sig(self.v_c[i]),
                fmt_sig(self.u_dac[i])
            );
        }
        s
    }
}
