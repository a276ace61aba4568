use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;

use magrest_core::defaults;
use magrest_core::fl::{
    estimate_velocity, fl_gains, fl_loop_tfs, fl_realized_margins, fl_transform, input_coupling, FLController,
};
use magrest_core::lti::{margins, Polynomial};
use magrest_core::plant::{nonlinear_derivs, ActuatorParams, PlantInput, PlantModel, PlantState};
use magrest_core::sim::{correlate_bin, simulate, step_metrics, Actuation, AnalogLoop, Channel, Controller, Reference};
use magrest_core::Error;

const WN: f64 = 1000.0 * PI;
const T_S: f64 = 1.0 / 160e3;

fn ctrl() -> FLController {
    fl_gains(WN, defaults::ZETA).unwrap()
}

fn ideal_current() -> Actuation {
    let p = defaults::actuator_params();
    let cfg = defaults::drive_config();
    let b = magrest_core::drive::assemble_drive(
        &cfg,
        &magrest_core::plant::electrical_tf(&p),
        magrest_core::drive::Fidelity::Ideal,
        magrest_core::drive::LeadPlacement::Feedback,
    )
    .unwrap();
    Actuation::IdealCurrent { gain: AnalogLoop::from_blocks(&b).unwrap().amps_per_volt }
}

#[test]
fn gains_from_natural_frequency() {
    let c = ctrl();
    assert!((c.k1 - 9.8696e6).abs() / c.k1 < 1e-5);
    assert!((c.k2 - 5026.5).abs() / c.k2 < 1e-5);
    assert_eq!(c.g, c.k1);
    let unit = fl_gains(1.0, 1.0).unwrap();
    assert_eq!((unit.k1, unit.k2, unit.g), (1.0, 2.0, 1.0));
    assert!(fl_gains(WN, 0.0).is_err());
}

#[test]
fn closed_loop_poles_sit_on_the_design_circle() {
    let c = ctrl();
    let t = fl_loop_tfs(&c).t;
    assert!((t.dc_gain().unwrap() - 1.0).abs() < 1e-15);
    let wd = WN * (1.0 - 0.64f64).sqrt();
    for r in t.poles().unwrap() {
        assert!((r.re + 0.8 * WN).abs() < 1e-6 * WN && (r.im.abs() - wd).abs() < 1e-6 * WN, "{r}");
    }
}

#[test]
fn loop_is_a_double_integrator_at_low_frequency() {
    let l = fl_loop_tfs(&ctrl()).l;
    let (f1, f2) = (1.0, 100.0);
    let db = |f: f64| 20.0 * l.eval_hz(f).unwrap().norm().log10();
    let slope = (db(f2) - db(f1)) / (f2 / f1).log10();
    assert!((slope + 40.0).abs() < 0.5, "{slope}");
}

#[test]
fn ideal_and_sampled_margins() {
    let c = ctrl();
    let ideal = margins(&fl_loop_tfs(&c).l).unwrap();
    // atan of the PD zero geometry at crossover
    assert!((ideal.phase_margin_deg - 69.86).abs() < 0.05, "{}", ideal.phase_margin_deg);
    let real = fl_realized_margins(&c, 1.5 * T_S).unwrap();
    assert!(real.phase_margin_deg < ideal.phase_margin_deg);
    assert!((real.phase_margin_deg - 59.0).abs() <= 5.0, "{}", real.phase_margin_deg);
    let bw = real.bandwidth_3db_hz.unwrap();
    assert!((bw - 413.0).abs() <= 41.3, "{bw}");
}

#[test]
fn transform_at_rest() {
    let p = defaults::actuator_params();
    let g = 5f64.to_radians();
    assert_eq!(fl_transform(0.0, 0.0, 0.0, &p, g).unwrap(), 0.0);
    let i = fl_transform(0.0, 0.0, 1.0, &p, g).unwrap();
    assert!((i - p.j / p.k_t).abs() < 1e-15 * i.abs().max(1.0));
}

#[test]
fn transform_refuses_the_singular_band() {
    let p = defaults::actuator_params();
    let g = 5f64.to_radians();
    let e = fl_transform(FRAC_PI_2 - 0.01, 0.0, 1.0, &p, g).unwrap_err();
    assert!(matches!(e, Error::Singularity { .. }));
    assert!(fl_transform(f64::NAN, 0.0, 1.0, &p, g).is_err());
}

#[test]
fn estimate_of_constant_angle_is_zero() {
    let v = estimate_velocity(&[0.3; 200], T_S, 20.0 * WN).unwrap();
    assert!(v.iter().all(|&x| x == 0.0));
}

#[test]
fn estimate_of_ramp_settles_on_slope() {
    let cutoff = 20.0 * WN;
    let a = 50.0;
    let n = (5.0 / cutoff / T_S).ceil() as usize + 2;
    let theta: Vec<f64> = (0..n).map(|k| a * k as f64 * T_S).collect();
    let v = estimate_velocity(&theta, T_S, cutoff).unwrap();
    assert!((v[n - 1] - a).abs() < 0.01 * a, "{}", v[n - 1]);
}

fn sinusoid_response(cutoff: f64, f: f64) -> num_complex::Complex64 {
    let w = 2.0 * PI * f;
    let n = (20.0 / f / T_S).round() as usize;
    let theta: Vec<f64> = (0..n).map(|k| (w * k as f64 * T_S).sin()).collect();
    let v = estimate_velocity(&theta, T_S, cutoff).unwrap();
    // last ten cycles, after the filter transient
    let m = n / 2;
    correlate_bin(&v[m..], T_S, f, n - m) / correlate_bin(&theta[m..], T_S, f, n - m)
}

#[test]
fn estimate_of_slow_sinusoid() {
    let f = 200.0;
    let w = 2.0 * PI * f;
    // continuous-filter approximation, valid while cutoff·T_s ≪ 1
    let cutoff = 2.0 * WN;
    let h = sinusoid_response(cutoff, f);
    assert!((h.norm() / w - 1.0).abs() < 0.02, "{}", h.norm() / w);
    let lag = PI / 2.0 - h.arg();
    let approx = (w / cutoff).atan() + w * T_S / 2.0;
    assert!((lag - approx).abs() < 0.1 * approx, "{lag} vs {approx}");

    // default cutoff: compare against the exact difference-plus-Euler filter
    let cutoff = 20.0 * WN;
    let h = sinusoid_response(cutoff, f);
    assert!((h.norm() / w - 1.0).abs() < 0.02, "{}", h.norm() / w);
    let g = cutoff * T_S;
    let z1 = num_complex::Complex64::from_polar(1.0, -w * T_S);
    let exact = (1.0 - z1) / T_S * g / (1.0 - (1.0 - g) * z1);
    assert!((h - exact).norm() < 1e-3 * exact.norm(), "{h} vs {exact}");
}

#[test]
fn mismatched_restoring_torque_degrades_gracefully() {
    let p = defaults::actuator_params();
    let model = ActuatorParams { k_rest: 1.1 * p.k_rest, ..p.clone() };
    let mut s = defaults::sim_config();
    s.reference = Reference::step(10f64.to_radians());
    let c = Controller::FeedbackLin { ctrl: ctrl(), params: model };
    let tr = simulate(&p, PlantModel::Nonlinear, &c, &ideal_current(), &s).unwrap();
    let m = step_metrics(&tr, Channel::Theta, 1.0).unwrap();
    assert!(m.steady_state_error_pct < 1.0, "{}", m.steady_state_error_pct);
}

proptest! {
    #[test]
    fn transform_cancels_the_nonlinearity(theta in -1.3..1.3f64, w in -300.0..300.0f64, v in -1e6..1e6f64) {
        let p = defaults::actuator_params();
        let i = fl_transform(theta, w, v, &p, 5f64.to_radians()).unwrap();
        let x = PlantState { theta, omega_r: w, i_c: 0.0, eddy: vec![] };
        let d = nonlinear_derivs(&x, PlantInput::Current(i), &p);
        prop_assert!((d.omega_r - v).abs() <= 1e-10 * v.abs().max(1e3), "{} vs {v}", d.omega_r);
    }

    #[test]
    fn guard_fires_before_coupling_vanishes(theta in -PI..PI, guard_deg in 1.0..20.0f64) {
        let p = defaults::actuator_params();
        let guard = guard_deg.to_radians();
        match fl_transform(theta, 10.0, 1e4, &p, guard) {
            Ok(i) => {
                prop_assert!(i.is_finite());
                prop_assert!(input_coupling(theta, &p).abs() >= p.k_t * guard.sin() / p.j * (1.0 - 1e-12));
            }
            Err(e) => {
                let singular = matches!(e, Error::Singularity { .. });
                prop_assert!(singular);
            }
        }
    }
}

#[test]
fn closed_loop_polynomial_matches_gains() {
    let c = ctrl();
    let den = fl_loop_tfs(&c).t.den().clone();
    let want = Polynomial::new(vec![1.0, c.k2, c.k1]);
    assert_eq!(den.monic(), want);
}
