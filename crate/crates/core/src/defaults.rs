//! Reconstructed default parameter set.
//!
//! The actuator values are fitted so that the pole-placement gains of both
//! drive architectures land on their published values; the drive values
//! follow the published component list where one exists.

use std::f64::consts::PI;

use crate::drive::{design_lead_lag, DriveConfig, LeadLagSpec, OpAmpSpec};
use crate::plant::{electrical_tf, ActuatorParams, EddyBranch};
use crate::sim::{Reference, Saturation, SimConfig};

/// Divider times power-stage gain, V at the coil per DAC volt.
pub const VOLTAGE_DRIVE_GAIN: f64 = 0.4 * 10.53;
pub const ZETA: f64 = 0.8;
/// Voltage-drive pole-placement natural frequency, Hz.
pub const VOLTAGE_DRIVE_FN_HZ: f64 = 500.0;
/// Current-drive and feedback-linearization natural frequency, Hz.
pub const CURRENT_DRIVE_FN_HZ: f64 = 500.0;
pub const ESTIMATOR_SPEED_FACTOR: f64 = 10.0;
pub const SAMPLE_RATE_HZ: f64 = 160e3;

pub fn actuator_params() -> ActuatorParams {
    ActuatorParams {
        j: 1.434e-9,
        k_d: 4.743e-7,
        k_s: 1.2375e-3,
        k_rest: 6.1875e-4,
        k_t: 1.817e-3,
        k_b: 1.817e-3,
        r_c: 1.755,
        l_c0: 2.805e-4,
        r_sense: 0.1,
        eddy_branches: vec![EddyBranch { r: 115.0, l: 2.805e-4 }],
    }
}

pub fn power_amp() -> OpAmpSpec {
    OpAmpSpec::with_default_poles(5.6e5, 8e6, 20.6, 10.0)
}

pub fn signal_amp() -> OpAmpSpec {
    OpAmpSpec::with_default_poles(1e6, 18e6, 14.7, 0.1)
}

pub fn lead_lag_spec() -> LeadLagSpec {
    LeadLagSpec { alpha: 10.0, f_c: 20e3, r_1: 5.1e3, r_2: 10e3 }
}

/// Drive circuit before the compensator is sized.
pub fn undesigned_drive() -> DriveConfig {
    DriveConfig {
        power_amp: power_amp(),
        signal_amp: signal_amp(),
        r_v1: 8.67e3,
        r_v2: 1.33e3,
        r_p1: 1e3,
        r_p2: 9.53e3,
        r_s: 0.1,
        r_s1: 1e3,
        r_s2: 10e3,
        r_1: 5.1e3,
        r_2: 10e3,
        r_ld: 1e4 / 9.0,
        c_ld: 2.2e-9,
        r_lg: None,
        c_lg: 100e-12,
    }
}

/// Drive circuit with the lead-lag sized against the default coil.
pub fn drive_config() -> DriveConfig {
    design_lead_lag(&lead_lag_spec(), &electrical_tf(&actuator_params()), &undesigned_drive())
        .expect("default drive design succeeds")
}

pub fn sim_config() -> SimConfig {
    let t_s = 1.0 / SAMPLE_RATE_HZ;
    SimConfig {
        dt: t_s / 20.0,
        f_s: SAMPLE_RATE_HZ,
        duration: 20e-3,
        reference: Reference::step(10f64.to_radians()),
        saturation: Saturation { v_max: 20.6, i_max: 9.8 },
        adc_bits: Some(16),
        dac_range: 5.0,
        delay_samples: 1,
        theta_full_scale: PI / 4.0,
        record_stride: 1,
    }
}
