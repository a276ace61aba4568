//! Electromechanical actuator: linear voltage- and current-driven models,
//! the nonlinear model and the coil's electrical dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::lti::{RationalTF, StateSpaceModel};
use crate::{check_non_negative, check_positive, Result};

/// Series R-L path in parallel with the coil inductance, standing in for
/// eddy-current losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EddyBranch {
    pub r: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorParams {
    pub j: f64,
    pub k_d: f64,
    pub k_s: f64,
    /// Amplitude of the `sin 2θ` restoring torque.
    pub k_rest: f64,
    pub k_t: f64,
    pub k_b: f64,
    pub r_c: f64,
    pub l_c0: f64,
    pub r_sense: f64,
    #[serde(default)]
    pub eddy_branches: Vec<EddyBranch>,
}

impl ActuatorParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [("j", self.j), ("k_t", self.k_t), ("l_c0", self.l_c0), ("r_c", self.r_c)] {
            check_positive(&format!("{path}.{name}"), v)?;
        }
        for (name, v) in [
            ("k_d", self.k_d),
            ("k_s", self.k_s),
            ("k_rest", self.k_rest),
            ("k_b", self.k_b),
            ("r_sense", self.r_sense),
        ] {
            check_non_negative(&format!("{path}.{name}"), v)?;
        }
        for (i, b) in self.eddy_branches.iter().enumerate() {
            check_positive(&format!("{path}.eddy_branches[{i}].r"), b.r)?;
            check_positive(&format!("{path}.eddy_branches[{i}].l"), b.l)?;
        }
        Ok(())
    }

    /// Total series resistance seen by the drive.
    pub fn r_total(&self) -> f64 {
        self.r_c + self.r_sense
    }

    /// Copy with `k_s` set to the small-angle slope `2·k_rest`.
    pub fn linearized(&self) -> Self {
        Self { k_s: 2.0 * self.k_rest, ..self.clone() }
    }

    pub fn without_eddy(&self) -> Self {
        Self { eddy_branches: Vec::new(), ..self.clone() }
    }

    /// `½jω² + ½k_rest(1 − cos 2θ)`.
    pub fn mechanical_energy(&self, theta: f64, omega_r: f64) -> f64 {
        0.5 * self.j * omega_r * omega_r + 0.5 * self.k_rest * (1.0 - (2.0 * theta).cos())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub theta: f64,
    pub omega_r: f64,
    pub i_c: f64,
    pub eddy: Vec<f64>,
}

impl PlantState {
    pub fn zero(p: &ActuatorParams) -> Self {
        Self { eddy: vec![0.0; p.eddy_branches.len()], ..Self::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.omega_r.is_finite()
            && self.i_c.is_finite()
            && self.eddy.iter().all(|x| x.is_finite())
    }

    /// Packs into `[θ, ω_r, i_c, eddy…]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.theta, self.omega_r, self.i_c];
        v.extend_from_slice(&self.eddy);
        v
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            theta: x[0],
            omega_r: x[1],
            i_c: x.get(2).copied().unwrap_or(0.0),
            eddy: x.get(3..).map(<[f64]>::to_vec).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantInput {
    /// Coil voltage, V.
    Voltage(f64),
    /// Coil current imposed by an ideal current source, A.
    Current(f64),
}

/// Torque and back-emf laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantModel {
    /// `k_rest·sin 2θ` restoring torque, `cos θ` coupling.
    #[default]
    Nonlinear,
    /// `k_s·θ` restoring torque, unit coupling.
    Linear,
}

/// `I_c(s)/V_c(s)` with the rotor locked.
pub fn electrical_tf(p: &ActuatorParams) -> RationalTF {
    // admittance of l_c0 in parallel with every eddy branch
    let y = p.eddy_branches.iter().fold(
        RationalTF::from_coeffs(&[1.0], &[p.l_c0, 0.0]).expect("l_c0 > 0"),
        |y, b| y.parallel(&RationalTF::from_coeffs(&[1.0], &[b.l, b.r]).expect("branch l > 0")),
    );
    y.feedback(&RationalTF::constant(p.r_total())).expect("passive network")
}

/// Third-order model with states `(θ, ω_r, i_c)` and coil-voltage input.
pub fn linear_ss_voltage(p: &ActuatorParams) -> StateSpaceModel {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            1.0,
            0.0,
            -p.k_s / p.j,
            -p.k_d / p.j,
            p.k_t / p.j,
            0.0,
            -p.k_b / p.l_c0,
            -p.r_total() / p.l_c0,
        ],
    );
    StateSpaceModel::siso(a, DVector::from_vec(vec![0.0, 0.0, 1.0 / p.l_c0]), &[1.0, 0.0, 0.0], 0.0)
        .expect("consistent dimensions")
}

/// Second-order mechanical model with states `(θ, ω_r)` and coil-current input.
pub fn linear_ss_current(p: &ActuatorParams) -> StateSpaceModel {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -p.k_s / p.j, -p.k_d / p.j]);
    StateSpaceModel::siso(a, DVector::from_vec(vec![0.0, p.k_t / p.j]), &[1.0, 0.0], 0.0)
        .expect("consistent dimensions")
}

pub fn nonlinear_derivs(x: &PlantState, input: PlantInput, p: &ActuatorParams) -> PlantState {
    let xv = x.to_vec();
    let n = match input {
        PlantInput::Voltage(_) => 3 + p.eddy_branches.len(),
        PlantInput::Current(_) => 2,
    };
    let mut dx = vec![0.0; n];
    derivs_into(&xv[..n], input, p, PlantModel::Nonlinear, &mut dx);
    let mut d = PlantState::from_slice(&dx);
    if let PlantInput::Current(_) = input {
        d.eddy.clear();
    }
    d
}

/// Right-hand side on the packed state.
///
/// Voltage mode: `x = [θ, ω_r, i_c, i_1…i_m]`; current mode: `x = [θ, ω_r]`.
pub(crate) fn derivs_into(x: &[f64], input: PlantInput, p: &ActuatorParams, model: PlantModel, dx: &mut [f64]) {
    let (theta, omega) = (x[0], x[1]);
    let i_c = match input {
        PlantInput::Voltage(_) => x[2],
        PlantInput::Current(i) => i,
    };
    let (restoring, coupling) = match model {
        PlantModel::Nonlinear => (p.k_rest * (2.0 * theta).sin(), theta.cos()),
        PlantModel::Linear => (p.k_s * theta, 1.0),
    };
    dx[0] = omega;
    dx[1] = (-p.k_d * omega - restoring + p.k_t * i_c * coupling) / p.j;
    if let PlantInput::Voltage(v_c) = input {
        // voltage across the inductive part of the coil
        let v_l = v_c - p.k_b * omega * coupling - p.r_total() * i_c;
        let mut di = v_l / p.l_c0;
        for (k, b) in p.eddy_branches.iter().enumerate() {
            let i_k = x[3 + k];
            let d_k = (v_l - b.r * i_k) / b.l;
            dx[3 + k] = d_k;
            di += d_k;
        }
        // the inductor current is i_c − Σi_k, so i_c picks up every branch rate
        dx[2] = di;
    }
}
