//! Designs and simulation set-ups built from a project config.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde_json::{json, Value};

use magrest_core::config::ProjectConfig;
use magrest_core::drive::{assemble_drive, design_lead_lag, DriveBlocks, DriveConfig, Fidelity, LeadPlacement};
use magrest_core::fl::{fl_gains, FLController};
use magrest_core::loops::{gangs_of, GangSet};
use magrest_core::lti::{eigenvalues, StateSpaceModel};
use magrest_core::plant::{electrical_tf, linear_ss_current, linear_ss_voltage};
use magrest_core::position::{
    close_with_current_loop, closed_loop_matrix, compensator_ss, desired_char_poly, discretize_forward_euler,
    full_order_observer, reduced_order_observer, repeated_root_poly, state_feedback, Arch, ControlDesign,
    ObserverDesign,
};
use magrest_core::sim::{Actuation, AnalogLoop, Controller};
use magrest_core::{Error, Result};

/// Lead-lag sized from `lead_lag` against the configured coil.
pub fn synthesized_drive(cfg: &ProjectConfig) -> Result<DriveConfig> {
    design_lead_lag(&cfg.lead_lag, &electrical_tf(&cfg.actuator), &cfg.drive)
}

/// Loop blocks of the drive circuit as configured.
pub fn drive_blocks(cfg: &ProjectConfig) -> Result<DriveBlocks> {
    assemble_drive(&cfg.drive, &electrical_tf(&cfg.actuator), Fidelity::Ideal, LeadPlacement::Feedback)
}

pub fn gangs(cfg: &ProjectConfig) -> Result<GangSet> {
    gangs_of(&drive_blocks(cfg)?)
}

pub fn complex_list(v: &[Complex64]) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

pub struct PolePlacement {
    pub model: StateSpaceModel,
    pub design: ControlDesign,
    pub observer: ObserverDesign,
}

impl PolePlacement {
    pub fn new(cfg: &ProjectConfig, arch: Arch) -> Result<Self> {
        let lin = cfg.actuator.linearized();
        let wn = cfg.control.omega_n();
        let t_s = cfg.sim.t_s();
        let (model, order) = match arch {
            Arch::VoltageDrive => (linear_ss_voltage(&lin), 3),
            Arch::CurrentDrive => (linear_ss_current(&lin), 2),
        };
        let design = state_feedback(&model, &desired_char_poly(wn, cfg.control.zeta, order)?, arch)?;
        let observer = match arch {
            Arch::VoltageDrive => {
                let pole = cfg.control.estimator_speed_factor * wn;
                full_order_observer(&model, &repeated_root_poly(pole, order), t_s)?
            }
            Arch::CurrentDrive => reduced_order_observer(&lin, cfg.control.lambda0(), t_s)?,
        };
        Ok(Self { model, design, observer })
    }

    pub fn controller(&self) -> Result<Controller> {
        Ok(Controller::PolePlace {
            design: self.design.clone(),
            observer: discretize_forward_euler(&self.observer, &self.model)?,
            hybrid: false,
        })
    }

    fn estimator_eigenvalues(&self) -> Result<Vec<Complex64>> {
        match &self.observer.reduced {
            Some(r) => Ok(vec![Complex64::new(r.a_hat, 0.0)]),
            None => {
                let l = nalgebra::DVector::from_column_slice(&self.observer.l_gain);
                Ok(eigenvalues(&(&self.model.a - l * self.model.c.row(0)))?)
            }
        }
    }

    fn compensator_eigenvalues(&self) -> Result<Vec<Complex64>> {
        match &self.observer.reduced {
            // ż = â·z + b̂·y + f̂·u with u = G·r − k1·y − k2·(z + L·y)
            Some(r) => Ok(vec![Complex64::new(r.a_hat - r.f_hat * self.design.k_fb[1], 0.0)]),
            None => Ok(compensator_ss(&self.model, &self.design.k_fb, &self.observer.l_gain)?.eigenvalues()?),
        }
    }

    /// The design record: gains, observer and the three spectra.
    pub fn record(&self, cfg: &ProjectConfig) -> Result<Value> {
        let ctrl = eigenvalues(&closed_loop_matrix(&self.model, &self.design.k_fb))?;
        Ok(json!({
            "arch": self.design.arch,
            "omega_n_hz": cfg.control.omega_n_hz,
            "zeta": cfg.control.zeta,
            "k_fb": self.design.k_fb,
            "g_in": self.design.g_in,
            "observer": {
                "kind": self.observer.kind,
                "l_gain": self.observer.l_gain,
                "t_s": self.observer.t_s,
            },
            "eigenvalues_ctrl": complex_list(&ctrl),
            "eigenvalues_est": complex_list(&self.estimator_eigenvalues()?),
            "eigenvalues_comp": complex_list(&self.compensator_eigenvalues()?),
        }))
    }

    /// −3 dB bandwidth of the position loop with the analog current loop
    /// inside. Current drive only.
    pub fn bandwidth_with_current_loop(&self, g: &GangSet) -> Result<Option<f64>> {
        let t = close_with_current_loop(&self.model, &g.gang1_t, &self.design)?;
        Ok(magrest_core::lti::bandwidth_3db(&t, 1e-2, 1e6))
    }
}

pub fn fl_controller(cfg: &ProjectConfig) -> Result<FLController> {
    let wn = cfg.control.omega_n();
    let mut c = fl_gains(wn, cfg.control.zeta)?;
    c.vel_filter_cutoff = cfg.control.vel_filter_factor * wn;
    Ok(c)
}

/// Sampling plus computation delay seen by the controller, s.
pub fn loop_delay(cfg: &ProjectConfig) -> f64 {
    (cfg.sim.delay_samples as f64 + 0.5) / cfg.sim.f_s
}

pub fn voltage_actuation() -> Actuation {
    Actuation::Voltage { gain: magrest_core::defaults::VOLTAGE_DRIVE_GAIN }
}

pub fn current_actuation(cfg: &ProjectConfig, ideal: bool) -> Result<Actuation> {
    let analog = AnalogLoop::from_blocks(&drive_blocks(cfg)?)?;
    Ok(if ideal { Actuation::IdealCurrent { gain: analog.amps_per_volt } } else { Actuation::CurrentLoop(analog) })
}

pub fn actuation_for(cfg: &ProjectConfig, arch: Arch, ideal_current: bool) -> Result<Actuation> {
    match arch {
        Arch::VoltageDrive if ideal_current => Err(Error::Config {
            path: "control.arch".into(),
            msg: "an ideal current source needs the current-drive architecture".into(),
        }),
        Arch::VoltageDrive => Ok(voltage_actuation()),
        Arch::CurrentDrive => current_actuation(cfg, ideal_current),
    }
}

pub fn hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
