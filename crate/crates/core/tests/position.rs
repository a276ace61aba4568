use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use magrest_core::defaults;
use magrest_core::lti::{eigenvalues, Polynomial, RationalTF, StateSpaceModel};
use magrest_core::plant::{linear_ss_current, linear_ss_voltage, ActuatorParams};
use magrest_core::position::{
    ackermann_k, close_with_current_loop, closed_loop_tfs, compensator_ss, desired_char_poly,
    discretize_forward_euler, full_order_observer, input_gain, reduced_order_observer, reduced_order_terms,
    repeated_root_poly, separation_residual, spectrum_mismatch, state_feedback, Arch, ObserverKind,
};
use magrest_core::sim::{lti_step, ZohModel};
use magrest_core::Error;

const WN: f64 = 1000.0 * PI;
const ZETA: f64 = 0.8;

fn double_integrator() -> StateSpaceModel {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    StateSpaceModel::siso(a, DVector::from_vec(vec![0.0, 1.0]), &[1.0, 0.0], 0.0).unwrap()
}

fn peak(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::MIN, f64::max)
}

#[test]
fn desired_polynomials() {
    let p = desired_char_poly(1.0, 1.0, 2).unwrap();
    assert_eq!(p.coeffs(), &[1.0, 2.0, 1.0]);
    let wn = 3141.59;
    let c = desired_char_poly(wn, ZETA, 3).unwrap();
    let want = [1.0, 8168.1, 2.5661e7, 3.1006e10];
    for (a, b) in c.coeffs().iter().zip(want) {
        assert!((a - b).abs() / b < 1e-4, "{a} vs {b}");
    }
    let mut roots = c.roots().unwrap();
    roots.sort_by(|a, b| a.im.total_cmp(&b.im));
    let wd = wn * (1.0 - ZETA * ZETA).sqrt();
    assert!((roots[0] - Complex64::new(-ZETA * wn, -wd)).norm() < 1e-6 * wn);
    assert!((roots[1] - Complex64::new(-wn, 0.0)).norm() < 1e-6 * wn);
    assert!(desired_char_poly(wn, 1.5, 2).is_err());
    assert!(desired_char_poly(wn, ZETA, 4).is_err());
}

#[test]
fn double_integrator_gains() {
    let d = state_feedback(&double_integrator(), &desired_char_poly(WN, ZETA, 2).unwrap(), Arch::CurrentDrive).unwrap();
    assert!((d.k_fb[0] - 9.8696e6).abs() / 9.8696e6 < 1e-5);
    assert!((d.k_fb[1] - 5026.5).abs() / 5026.5 < 1e-5);
    assert!((d.g_in - WN * WN).abs() / (WN * WN) < 1e-12);
    let t = closed_loop_tfs(&double_integrator(), &d).unwrap().t;
    let want = RationalTF::from_coeffs(&[WN * WN], &[1.0, 2.0 * ZETA * WN, WN * WN]).unwrap();
    assert!(t.approx_eq(&want, 1e-9));
}

#[test]
fn uncontrollable_model_is_rejected() {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
    let m = StateSpaceModel::siso(a, DVector::from_vec(vec![1.0, 0.0]), &[1.0, 0.0], 0.0).unwrap();
    let e = ackermann_k(&m, &desired_char_poly(1.0, 0.5, 2).unwrap()).unwrap_err();
    assert!(matches!(e, Error::RankDeficient { rank: 1, n: 2, .. }), "{e}");
    let e = full_order_observer(&m, &repeated_root_poly(3.0, 2), 1e-3).unwrap_err();
    assert!(matches!(e, Error::RankDeficient { .. }), "{e}");
}

#[test]
fn scalar_observer_gain_is_the_pole() {
    let m = StateSpaceModel::siso(DMatrix::zeros(1, 1), DVector::from_vec(vec![1.0]), &[1.0], 0.0).unwrap();
    let o = full_order_observer(&m, &Polynomial::new(vec![1.0, 7.0]), 1e-3).unwrap();
    assert!((o.l_gain[0] - 7.0).abs() < 1e-12);
}

#[test]
fn both_drive_designs_track_dc() {
    let p = defaults::actuator_params().linearized();
    for (m, order, arch) in [
        (linear_ss_voltage(&p), 3, Arch::VoltageDrive),
        (linear_ss_current(&p), 2, Arch::CurrentDrive),
    ] {
        let d = state_feedback(&m, &desired_char_poly(2.0 * PI * 500.0, ZETA, order).unwrap(), arch).unwrap();
        let t = closed_loop_tfs(&m, &d).unwrap().t;
        assert!((t.dc_gain().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn reduced_observer_degenerate_case() {
    let p = ActuatorParams { k_d: 0.0, k_s: 0.0, ..defaults::actuator_params() };
    let l0 = 31416.0;
    let o = reduced_order_observer(&p, l0, 1.0 / 160e3).unwrap();
    let r = o.reduced.unwrap();
    assert_eq!(o.kind, ObserverKind::ReducedOrder);
    assert!((o.l_gain[0] - l0).abs() < 1e-9);
    assert!((r.a_hat + l0).abs() < 1e-9);
    assert!((r.b_hat + l0 * l0).abs() < 1e-9 * l0 * l0);
    assert!((r.f_hat - p.k_t / p.j).abs() < 1e-9 * r.f_hat);
    assert!(reduced_order_observer(&p, 0.0, 1e-6).is_err());
}

#[test]
fn forward_euler_coefficient_at_default_rate() {
    let p = defaults::actuator_params().linearized();
    let m = linear_ss_current(&p);
    let o = reduced_order_observer(&p, 31416.0, 1.0 / 160e3).unwrap();
    let d = discretize_forward_euler(&o, &m).unwrap();
    assert!((d.phi[(0, 0)] - 0.8036).abs() < 1e-4, "{}", d.phi[(0, 0)]);
}

#[test]
fn too_slow_sampling_is_reported() {
    let p = defaults::actuator_params().linearized();
    let m = linear_ss_current(&p);
    let o = reduced_order_observer(&p, 4e5, 1.0 / 160e3).unwrap();
    match discretize_forward_euler(&o, &m) {
        Err(Error::UnstableDiscretization { max_ts, .. }) => assert!((max_ts - 2.0 / 4e5).abs() < 1e-12),
        other => panic!("expected instability, got {other:?}"),
    }
}

#[test]
fn forward_euler_error_is_first_order() {
    let p = defaults::actuator_params().linearized();
    let m = linear_ss_voltage(&p);
    let phi_e = repeated_root_poly(10.0 * 2.0 * PI * 500.0, 3);
    let horizon = 2e-4;
    let err = |t_s: f64| {
        let o = full_order_observer(&m, &phi_e, t_s).unwrap();
        let d = discretize_forward_euler(&o, &m).unwrap();
        let l = DVector::from_column_slice(&o.l_gain);
        let a_e = &m.a - &l * m.c.row(0);
        let x0 = DVector::from_vec(vec![1e-3, 0.0, 0.0]);
        let steps = (horizon / t_s).round() as usize;
        let exact = ZohModel::new(&StateSpaceModel::siso(a_e.clone(), DVector::zeros(3), &[1.0, 0.0, 0.0], 0.0).unwrap(), t_s);
        let (mut xf, mut xe) = (x0.clone(), x0.clone());
        let mut worst = 0.0f64;
        for _ in 0..steps {
            xf = d.step(&xf, 0.0, 0.0);
            xe = &exact.phi * &xe;
            worst = worst.max((xf[0] - xe[0]).abs());
        }
        worst
    };
    let ratio = err(1.0 / 160e3) / err(1.0 / 320e3);
    assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
}

#[test]
fn null_gains_leave_plant_dynamics() {
    let m = linear_ss_voltage(&defaults::actuator_params().linearized());
    let c = compensator_ss(&m, &[0.0; 3], &[0.0; 3]).unwrap();
    assert_eq!(c.a, m.a);
}

#[test]
fn unit_current_loop_reduces_to_ideal_closure() {
    let p = defaults::actuator_params().linearized();
    let m = linear_ss_current(&p);
    let d = state_feedback(&m, &desired_char_poly(2.0 * PI * 500.0, ZETA, 2).unwrap(), Arch::CurrentDrive).unwrap();
    let ideal = closed_loop_tfs(&m, &d).unwrap().t;
    let with = close_with_current_loop(&m, &RationalTF::constant(1.0), &d).unwrap();
    assert!(with.approx_eq(&ideal, 1e-9), "{with:?} vs {ideal:?}");
}

#[test]
fn fast_current_loop_barely_changes_the_step() {
    let p = defaults::actuator_params().linearized();
    let m = linear_ss_current(&p);
    let d = state_feedback(&m, &desired_char_poly(2.0 * PI * 500.0, ZETA, 2).unwrap(), Arch::CurrentDrive).unwrap();
    let dt = 1e-6;
    let n = 10_000;
    let ideal = lti_step(&closed_loop_tfs(&m, &d).unwrap().t, dt, n).unwrap();
    let fast = RationalTF::first_order(1.0, 1.0 / (2.0 * PI * 7.86e3));
    let slow = RationalTF::first_order(1.0, 1.0 / (2.0 * PI * 500.0));
    let yf = lti_step(&close_with_current_loop(&m, &fast, &d).unwrap(), dt, n).unwrap();
    let ys = lti_step(&close_with_current_loop(&m, &slow, &d).unwrap(), dt, n).unwrap();
    let dev = ideal.iter().zip(&yf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev < 0.02, "{dev}");
    assert!(peak(&ys) > peak(&yf) && peak(&yf) > 1.0);
}

#[test]
fn reduced_observer_error_decays_at_design_rate() {
    let p = defaults::actuator_params().linearized();
    let m = linear_ss_current(&p);
    let l0 = 10.0 * 2.0 * PI * 500.0;
    // forward Euler shifts the decay rate by O(λ0·T_s); sample fast enough
    // that the shift stays a few percent
    let t_s = 1.0 / 640e3;
    let o = reduced_order_observer(&p, l0, t_s).unwrap();
    let d = discretize_forward_euler(&o, &m).unwrap();
    let plant = ZohModel::new(&m, t_s);
    let mut x = DVector::from_vec(vec![0.0, 100.0]);
    let mut z = DVector::from_vec(vec![-d.l_out * x[0]]);
    let (mut ts, mut logs) = (Vec::new(), Vec::new());
    for k in 0..40 {
        let y = x[0];
        let w_hat = d.estimate(&z, y)[1];
        let e = (x[1] - w_hat).abs();
        if k >= 2 {
            ts.push(k as f64 * t_s);
            logs.push(e.ln());
        }
        z = d.step(&z, 0.0, y);
        x = &plant.phi * &x;
    }
    let n = ts.len() as f64;
    let (mt, ml) = (ts.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum::<f64>()
        / ts.iter().map(|t| (t - mt) * (t - mt)).sum::<f64>();
    assert!((-slope - l0).abs() < 0.1 * l0, "rate {} vs {l0}", -slope);
}

fn random_system(n: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-2.0..2.0f64, n * n),
        prop::collection::vec(-2.0..2.0f64, n),
        prop::collection::vec(-2.0..2.0f64, n),
    )
        .prop_map(move |(a, b, c)| (DMatrix::from_row_slice(n, n, &a), DVector::from_vec(b), c))
}

fn well_posed(m: &StateSpaceModel) -> bool {
    let b = m.b.column(0).clone_owned();
    let c = m.c.row(0).transpose();
    let cond = |x: DMatrix<f64>| {
        let sv = x.singular_values();
        sv.max() / sv.min()
    };
    cond(magrest_core::position::controllability_matrix(&m.a, &b)) < 100.0
        && cond(magrest_core::position::observability_matrix(&m.a, &c)) < 100.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pole_placement_is_sound((a, b, c) in random_system(3), w in 1.0..3.0f64, z in 0.3..1.0f64) {
        let m = StateSpaceModel::siso(a, b, &c, 0.0).unwrap();
        prop_assume!(well_posed(&m));
        let phi = desired_char_poly(w, z, 3).unwrap();
        let k = ackermann_k(&m, &phi).unwrap();
        let acl = magrest_core::position::closed_loop_matrix(&m, &k);
        let err = spectrum_mismatch(&eigenvalues(&acl).unwrap(), &phi.roots().unwrap());
        prop_assert!(err < 1e-6, "{err}");
        if let Ok(g) = input_gain(&m, &k) {
            let d = magrest_core::position::ControlDesign { k_fb: k.clone(), g_in: g, desired_poly: phi, arch: Arch::VoltageDrive };
            let t = closed_loop_tfs(&m, &d).unwrap().t;
            prop_assert!((t.dc_gain().unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn observer_is_dual_of_controller((a, b, c) in random_system(3), r in 1.0..4.0f64) {
        let m = StateSpaceModel::siso(a.clone(), b.clone(), &c, 0.0).unwrap();
        prop_assume!(well_posed(&m));
        let phi = repeated_root_poly(r, 3);
        let l = full_order_observer(&m, &phi, 1e-3).unwrap().l_gain;
        let dual = StateSpaceModel::siso(a.transpose(), DVector::from_vec(c.clone()), b.as_slice(), 0.0).unwrap();
        let lt = ackermann_k(&dual, &phi).unwrap();
        for (x, y) in l.iter().zip(&lt) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn separation_holds((a, b, c) in random_system(3), w in 1.0..3.0f64, r in 4.0..8.0f64) {
        let m = StateSpaceModel::siso(a, b, &c, 0.0).unwrap();
        prop_assume!(well_posed(&m));
        let k = ackermann_k(&m, &desired_char_poly(w, 0.7, 3).unwrap()).unwrap();
        let l = full_order_observer(&m, &repeated_root_poly(r, 3), 1e-3).unwrap().l_gain;
        prop_assert!(separation_residual(&m, &k, &l).unwrap() < 1e-9);
    }

    #[test]
    fn reduced_observer_algebra_matches_closed_form(
        j in 1e-10..1e-8f64, k_d in 0.0..1e-6f64, k_s in 1e-4..1e-2f64, k_t in 1e-3..1e-2f64, l0 in 1e3..1e5f64,
    ) {
        let p = ActuatorParams { j, k_d, k_s, k_rest: k_s / 2.0, k_t, ..defaults::actuator_params() };
        let o = reduced_order_observer(&p, l0, 1e-6).unwrap();
        let general = reduced_order_terms(0.0, 1.0, -k_s / j, -k_d / j, 0.0, k_t / j, o.l_gain[0]);
        let closed = o.reduced.unwrap();
        for (x, y) in [(general.a_hat, closed.a_hat), (general.b_hat, closed.b_hat), (general.f_hat, closed.f_hat)] {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0), "{x} vs {y}");
        }
        prop_assert!((closed.a_hat + l0).abs() <= 1e-9 * l0);
    }
}
