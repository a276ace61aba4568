//! Feedback-linearizing position control of the current-driven actuator.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lti::{bandwidth_3db_of, margins_of, LtiError, Margins, RationalTF};
use crate::plant::ActuatorParams;
use crate::{Error, Result};

/// Default velocity low-pass cutoff as a multiple of `ω_n`.
pub const VEL_FILTER_FACTOR: f64 = 20.0;
/// Default distance kept from the `cos θ = 0` singularity.
pub const THETA_GUARD_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FLController {
    pub k1: f64,
    pub k2: f64,
    pub g: f64,
    /// rad/s.
    pub vel_filter_cutoff: f64,
    /// rad.
    pub theta_guard: f64,
}

impl FLController {
    /// Synthetic input `v = g·θ_ref − k1·θ − k2·ω̂`.
    pub fn synthetic_input(&self, theta_ref: f64, theta: f64, omega_hat: f64) -> f64 {
        self.g * theta_ref - self.k1 * theta - self.k2 * omega_hat
    }
}

/// `k1 = g = ω_n²`, `k2 = 2ζω_n`.
pub fn fl_gains(omega_n: f64, zeta: f64) -> Result<FLController> {
    if !(omega_n > 0.0) || !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::Design(format!("need omega_n > 0 and 0 < zeta <= 1, got {omega_n}, {zeta}")));
    }
    Ok(FLController {
        k1: omega_n * omega_n,
        k2: 2.0 * zeta * omega_n,
        g: omega_n * omega_n,
        vel_filter_cutoff: VEL_FILTER_FACTOR * omega_n,
        theta_guard: THETA_GUARD_DEG.to_radians(),
    })
}

/// Drift term `f(θ, ω_r)` of `ω̇_r = f + g·i_c`.
pub fn drift(theta: f64, omega_r: f64, p: &ActuatorParams) -> f64 {
    -(p.k_d * omega_r + p.k_rest * (2.0 * theta).sin()) / p.j
}

/// Input gain `g(θ)` of `ω̇_r = f + g·i_c`.
pub fn input_coupling(theta: f64, p: &ActuatorParams) -> f64 {
    p.k_t * theta.cos() / p.j
}

/// Coil current that makes `ω̇_r = v`.
pub fn fl_transform(theta: f64, omega_r: f64, v: f64, p: &ActuatorParams, theta_guard: f64) -> Result<f64> {
    if !(theta.abs() <= FRAC_PI_2 - theta_guard) {
        return Err(Error::Singularity { theta });
    }
    Ok((v - drift(theta, omega_r, p)) / input_coupling(theta, p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FLLoop {
    pub l: RationalTF,
    pub t: RationalTF,
}

/// Loop with ideal velocity: `L = (k1 + k2·s)/s²`, `T = g/(s² + k2·s + k1)`.
pub fn fl_loop_tfs(c: &FLController) -> FLLoop {
    FLLoop {
        l: RationalTF::from_coeffs(&[c.k2, c.k1], &[1.0, 0.0, 0.0]).expect("nonzero den"),
        t: RationalTF::from_coeffs(&[c.g], &[1.0, c.k2, c.k1]).expect("nonzero den"),
    }
}

/// Loop with the filtered-derivative velocity estimate,
/// `(k1 + k2·s/(1 + s/ω_f))/s²`.
pub fn fl_loop_filtered(c: &FLController) -> RationalTF {
    let tf = 1.0 / c.vel_filter_cutoff;
    RationalTF::from_coeffs(&[c.k1 * tf + c.k2, c.k1], &[tf, 1.0, 0.0, 0.0]).expect("nonzero den")
}

/// Margins and closed-loop bandwidth of the sampled loop: filtered velocity
/// plus a pure delay `t_d` in the actuation path.
pub fn fl_realized_margins(c: &FLController, t_d: f64) -> Result<Margins> {
    let l = fl_loop_filtered(c);
    let delay = |f: f64| Complex64::from_polar(1.0, -2.0 * PI * f * t_d);
    let jw = |f: f64| Complex64::new(0.0, 2.0 * PI * f);
    let loop_eval = |f: f64| l.eval(jw(f)).map(|v| v * delay(f));
    let mut m = margins_of(loop_eval, 1e-2, 1e7)?;
    // reference enters through g/s² only, not through the velocity path
    let closed = |f: f64| -> std::result::Result<Complex64, LtiError> {
        if f == 0.0 {
            return Ok(Complex64::new(c.g / c.k1, 0.0));
        }
        let s = jw(f);
        Ok(c.g / (s * s) * delay(f) / (1.0 + loop_eval(f)?))
    };
    m.bandwidth_3db_hz = bandwidth_3db_of(closed, 1e-2, 1e7);
    Ok(m)
}

fn check_filter(t_s: f64, cutoff: f64) -> Result<()> {
    if !(t_s > 0.0) || !(cutoff > 0.0) || !(cutoff * t_s < 1.0) {
        return Err(Error::Design(format!(
            "velocity filter needs t_s > 0, cutoff > 0 and cutoff·t_s < 1, got {t_s}, {cutoff}"
        )));
    }
    Ok(())
}

/// Backward difference followed by a forward-Euler first-order low-pass.
pub fn estimate_velocity(theta: &[f64], t_s: f64, cutoff: f64) -> Result<Vec<f64>> {
    if theta.len() < 2 {
        return Err(Error::Design("need at least two samples".into()));
    }
    let mut est = VelocityEstimator::new(t_s, cutoff)?;
    Ok(theta.iter().map(|&x| est.update(x)).collect())
}

/// Streaming form of [`estimate_velocity`].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEstimator {
    t_s: f64,
    gain: f64,
    prev: Option<f64>,
    omega: f64,
}

impl VelocityEstimator {
    pub fn new(t_s: f64, cutoff: f64) -> Result<Self> {
        check_filter(t_s, cutoff)?;
        Ok(Self { t_s, gain: t_s * cutoff, prev: None, omega: 0.0 })
    }

    pub fn update(&mut self, theta: f64) -> f64 {
        let d = match self.prev {
            Some(p) => (theta - p) / self.t_s,
            None => 0.0,
        };
        self.prev = Some(theta);
        self.omega += self.gain * (d - self.omega);
        self.omega
    }

    pub fn value(&self) -> f64 {
        self.omega
    }
}
