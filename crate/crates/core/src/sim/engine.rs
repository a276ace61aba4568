use std::collections::VecDeque;

use nalgebra::DVector;

use super::{SimConfig, SimTrace};
use crate::drive::DriveBlocks;
use crate::fl::{fl_transform, FLController, VelocityEstimator};
use crate::lti::StateSpaceModel;
use crate::plant::{derivs_into, ActuatorParams, PlantInput, PlantModel};
use crate::position::{ControlDesign, DiscreteObserver};
use crate::{Error, Result};

/// Analog current loop realized from its `C`, `H` blocks and static `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogLoop {
    pub c: StateSpaceModel,
    pub h: StateSpaceModel,
    pub f: f64,
    /// `F(0)/H(0)`, amperes per volt at the set-point input.
    pub amps_per_volt: f64,
}

impl AnalogLoop {
    /// Requires a static reference path and proper `C`, `H`.
    pub fn from_blocks(b: &DriveBlocks) -> Result<Self> {
        if b.f.den().degree() != 0 || b.f.num().degree() != 0 {
            return Err(Error::Design("reference path F must be a static gain".into()));
        }
        let f = b.f.dc_gain()?;
        let amps_per_volt = f / b.h.dc_gain()?;
        Ok(Self {
            c: StateSpaceModel::from_tf(&b.c)?,
            h: StateSpaceModel::from_tf(&b.h)?,
            f,
            amps_per_volt,
        })
    }

    fn order(&self) -> usize {
        self.c.order() + self.h.order()
    }
}

/// How the DAC output reaches the coil.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Actuation {
    /// Divider and power stage, `v_c = gain·u_dac`.
    Voltage { gain: f64 },
    /// Ideal current source, `i_c = gain·u_dac`.
    IdealCurrent { gain: f64 },
    /// Analog current loop driven by `u_dac`.
    CurrentLoop(AnalogLoop),
}

impl Actuation {
    /// Physical command (V or A) per DAC volt.
    pub fn gain(&self) -> f64 {
        match self {
            Actuation::Voltage { gain } | Actuation::IdealCurrent { gain } => *gain,
            Actuation::CurrentLoop(l) => l.amps_per_volt,
        }
    }

    fn plant_states(&self, p: &ActuatorParams) -> usize {
        match self {
            Actuation::IdealCurrent { .. } => 2,
            _ => 3 + p.eddy_branches.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// The reference, in physical units, goes straight to the DAC.
    OpenLoop,
    /// State feedback on observer estimates; `hybrid` substitutes the
    /// measured angle for its estimate.
    PolePlace { design: ControlDesign, observer: DiscreteObserver, hybrid: bool },
    /// Feedback linearization using `params` as the controller's model.
    FeedbackLin { ctrl: FLController, params: ActuatorParams },
}

enum CtrlState {
    Open,
    Observer { x: DVector<f64>, prev_u: f64, prev_y: f64, started: bool },
    Fl(VelocityEstimator),
}

/// Fixed-step fourth-order Runge–Kutta step in place.
pub fn rk4_step<F: FnMut(&[f64], &mut [f64])>(mut f: F, x: &mut [f64], dt: f64) {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

struct Plant<'a> {
    p: &'a ActuatorParams,
    model: PlantModel,
    act: &'a Actuation,
    v_max: f64,
    i_max: f64,
    np: usize,
}

impl Plant<'_> {
    /// Coil voltage and current for state `x` under DAC output `u`, plus
    /// the compensator error signal for the analog loop.
    fn drive(&self, x: &[f64], u: f64) -> (f64, f64, f64, bool) {
        match self.act {
            Actuation::Voltage { gain } => {
                let v = (gain * u).clamp(-self.v_max, self.v_max);
                (v, x[2], 0.0, false)
            }
            Actuation::IdealCurrent { gain } => (0.0, (gain * u).clamp(-self.i_max, self.i_max), 0.0, false),
            Actuation::CurrentLoop(l) => {
                let i_c = x[2];
                let nc = l.c.order();
                let xc = &x[self.np..self.np + nc];
                let xh = &x[self.np + nc..];
                let h_out = dot_row(&l.h, xh) + l.h.d[(0, 0)] * i_c;
                let e = l.f * u - h_out;
                let v_raw = dot_row(&l.c, xc) + l.c.d[(0, 0)] * e;
                let saturated = v_raw.abs() >= self.v_max;
                (v_raw.clamp(-self.v_max, self.v_max), i_c, e, saturated)
            }
        }
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let (v_c, i_c, e, saturated) = self.drive(x, u);
        let input = match self.act {
            Actuation::IdealCurrent { .. } => PlantInput::Current(i_c),
            _ => PlantInput::Voltage(v_c),
        };
        derivs_into(&x[..self.np], input, self.p, self.model, &mut dx[..self.np]);
        if let Actuation::CurrentLoop(l) = self.act {
            let nc = l.c.order();
            let xc = &x[self.np..self.np + nc];
            let xh = &x[self.np + nc..];
            let out_sign = (dot_row(&l.c, xc) + l.c.d[(0, 0)] * e).signum();
            for i in 0..nc {
                dx[self.np + i] = (0..nc).map(|j| l.c.a[(i, j)] * xc[j]).sum::<f64>() + l.c.b[(i, 0)] * e;
            }
            // a saturated compensator stops charging toward the rail
            if saturated {
                let rate: f64 = (0..nc).map(|i| l.c.c[(0, i)] * dx[self.np + i]).sum();
                if rate * out_sign > 0.0 {
                    dx[self.np..self.np + nc].iter_mut().for_each(|d| *d = 0.0);
                }
            }
            let nh = l.h.order();
            for i in 0..nh {
                dx[self.np + nc + i] = (0..nh).map(|j| l.h.a[(i, j)] * xh[j]).sum::<f64>() + l.h.b[(i, 0)] * i_c;
            }
        }
    }
}

fn dot_row(m: &StateSpaceModel, x: &[f64]) -> f64 {
    (0..m.order()).map(|i| m.c[(0, i)] * x[i]).sum()
}

/// Runs the sampled controller against the continuous plant.
///
/// The plant is integrated by RK4 at `cfg.dt`; the controller runs every
/// `1/cfg.f_s` on the quantized angle, its DAC output is clamped to
/// `±dac_range`, delayed by `delay_samples` and held between samples.
pub fn simulate(
    p: &ActuatorParams,
    model: PlantModel,
    controller: &Controller,
    actuation: &Actuation,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    cfg.validate("sim")?;
    p.validate("actuator")?;
    let np = actuation.plant_states(p);
    let loop_order = match actuation {
        Actuation::CurrentLoop(l) => l.order(),
        _ => 0,
    };
    let plant = Plant { p, model, act: actuation, v_max: cfg.saturation.v_max, i_max: cfg.saturation.i_max, np };
    let gain = actuation.gain();
    let t_s = cfg.t_s();
    let sub = cfg.substeps();
    let dt = t_s / sub as f64;
    let n_steps = (cfg.duration / dt).round() as u64;
    let lsb = cfg.theta_lsb();

    let mut x = vec![0.0; np + loop_order];
    let mut state = match controller {
        Controller::OpenLoop => CtrlState::Open,
        Controller::PolePlace { observer, .. } => CtrlState::Observer {
            x: DVector::zeros(observer.state_dim()),
            prev_u: 0.0,
            prev_y: 0.0,
            started: false,
        },
        Controller::FeedbackLin { ctrl, .. } => CtrlState::Fl(VelocityEstimator::new(t_s, ctrl.vel_filter_cutoff)?),
    };
    let mut queue: VecDeque<f64> = std::iter::repeat_n(0.0, cfg.delay_samples).collect();
    let mut u_applied = 0.0;
    let mut r = 0.0;
    let mut aux = 0.0;
    let mut trace = SimTrace::with_capacity((n_steps as usize) / cfg.record_stride + 2);

    for step in 0..=n_steps {
        let t = step as f64 * dt;
        if step % sub as u64 == 0 {
            let k = step / sub as u64;
            r = cfg.reference.at_sample(k, t_s);
            let y = match lsb {
                Some(q) => ((x[0] / q).round() * q).clamp(-cfg.theta_full_scale, cfg.theta_full_scale),
                None => x[0],
            };
            let command = match (controller, &mut state) {
                (Controller::OpenLoop, _) => r,
                (Controller::PolePlace { design, observer, hybrid }, CtrlState::Observer { x: xh, prev_u, prev_y, started }) => {
                    if *started {
                        *xh = observer.step(xh, *prev_u, *prev_y);
                    }
                    *started = true;
                    let mut est = observer.estimate(xh, y);
                    if *hybrid {
                        est[0] = y;
                    }
                    aux = est.get(1).copied().unwrap_or(0.0);
                    design.g_in * r - design.k_fb.iter().zip(&est).map(|(k, e)| k * e).sum::<f64>()
                }
                (Controller::FeedbackLin { ctrl, params }, CtrlState::Fl(vel)) => {
                    let w = vel.update(y);
                    aux = w;
                    let v = ctrl.synthetic_input(r, y, w);
                    fl_transform(y, w, v, params, ctrl.theta_guard)?
                }
                _ => unreachable!("controller state matches controller"),
            };
            let u_dac = (command / gain).clamp(-cfg.dac_range, cfg.dac_range);
            if let CtrlState::Observer { prev_u, prev_y, .. } = &mut state {
                *prev_u = u_dac * gain;
                *prev_y = y;
            }
            queue.push_back(u_dac);
            u_applied = queue.pop_front().expect("queue holds at least the new sample");
        }

        if step % cfg.record_stride as u64 == 0 {
            let (v_c, i_c, _, _) = plant.drive(&x, u_applied);
            trace.push(t, r, x[0], x[1], i_c, v_c, u_applied, aux);
        }
        if step == n_steps {
            break;
        }

        rk4_step(|xs, d| plant.rhs(xs, u_applied, d), &mut x, dt);
        if np > 2 {
            x[2] = x[2].clamp(-cfg.saturation.i_max, cfg.saturation.i_max);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { t_last: t, partial: Box::new(trace) });
        }
    }
    Ok(trace)
}
