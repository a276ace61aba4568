use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use magrest_core::defaults;
use magrest_core::drive::{assemble_drive, DriveBlocks, DriveConfig, Fidelity, LeadPlacement};
use magrest_core::loops::{gang_injection_step, gangs_of, loop_summary, sensitivity_report, six_gangs, GangSet};
use magrest_core::lti::{log_grid, margins, RationalTF};
use magrest_core::plant::{electrical_tf, ActuatorParams};

fn blocks_for(p: &ActuatorParams, cfg: &DriveConfig) -> DriveBlocks {
    assemble_drive(cfg, &electrical_tf(p), Fidelity::Ideal, LeadPlacement::Feedback).unwrap()
}

fn default_gangs() -> GangSet {
    gangs_of(&blocks_for(&defaults::actuator_params(), &defaults::drive_config())).unwrap()
}

fn at(g: &RationalTF, f: f64) -> Complex64 {
    g.eval(Complex64::new(0.0, 2.0 * PI * f)).unwrap()
}

#[test]
fn unit_blocks_give_one_half_everywhere() {
    let one = RationalTF::constant(1.0);
    let g = six_gangs(&one, &one, &one, &one).unwrap();
    for k in 1..=6 {
        assert!((g.gang(k).unwrap().dc_gain().unwrap() - 0.5).abs() < 1e-15);
    }
    assert!(g.gang(0).is_none() && g.gang(7).is_none());
}

#[test]
fn singular_loop_is_rejected() {
    let one = RationalTF::constant(1.0);
    assert!(six_gangs(&one, &one, &RationalTF::constant(-1.0), &one).is_err());
}

#[test]
fn dc_gains_follow_resistor_ratios() {
    let p = defaults::actuator_params();
    let cfg = defaults::drive_config();
    let g = default_gangs();
    let rep = sensitivity_report(&g, &log_grid(1.0, 1e7, 100)).unwrap();
    let ratio = cfg.r_2 / cfg.r_1;
    assert!((rep.dc_gang1 - ratio).abs() < 1e-9 * ratio);
    let want2 = ratio * p.r_total();
    assert!((rep.dc_gang2 - want2).abs() < 1e-9 * want2);
}

#[test]
fn sensitivity_peak_is_located() {
    let g = default_gangs();
    let rep = sensitivity_report(&g, &log_grid(1.0, 1e7, 50)).unwrap();
    let s = at(&g.gang4_s, rep.omega_ms).norm();
    assert!((20.0 * s.log10() - rep.m_s).abs() < 1e-9);
    // refinement never loses to the dense grid
    let dense = log_grid(1.0, 1e7, 2000).iter().map(|&f| at(&g.gang4_s, f).norm()).fold(0.0, f64::max);
    assert!(rep.m_s >= 20.0 * dense.log10() - 1e-6);
    assert!(rep.m_s < 3.0);
}

#[test]
fn integrator_loop_sensitivity_approaches_unity() {
    let one = RationalTF::constant(1.0);
    let g = six_gangs(&RationalTF::integrator(), &one, &one, &one).unwrap();
    let rep = sensitivity_report(&g, &log_grid(1e-3, 1e3, 50)).unwrap();
    assert!(rep.m_s <= 0.0 && rep.m_s > -1e-4, "{}", rep.m_s);
}

#[test]
fn plant_perturbation_moves_t_by_s() {
    let p = defaults::actuator_params();
    let cfg = defaults::drive_config();
    let g0 = gangs_of(&blocks_for(&p, &cfg)).unwrap();
    let p1 = ActuatorParams { r_c: p.r_c * 1.01, ..p.clone() };
    let g1 = gangs_of(&blocks_for(&p1, &cfg)).unwrap();
    for f in log_grid(10.0, 1e6, 5) {
        let (p0v, p1v) = (at(&g0.p, f), at(&g1.p, f));
        let dp = (p1v - p0v) / p0v;
        let (t0, t1) = (at(&g0.gang1_t, f), at(&g1.gang1_t, f));
        let dt = (t1 - t0) / t0;
        let pred = at(&g0.gang4_s, f) * dp;
        assert!((dt - pred).norm() <= 1e-3 * dp.norm(), "{f} Hz: {dt} vs {pred}");
    }
}

#[test]
fn noise_sensitivity_tends_to_ch() {
    let g = default_gangs();
    let fc = margins(&g.l).unwrap().gain_crossover_hz;
    let f = 100.0 * fc;
    let ch = at(&g.c, f) * at(&g.h, f);
    assert!((at(&g.gang5_sn, f) - ch).norm() / ch.norm() < 0.01);
}

#[test]
fn raising_lag_gain_worsens_peak_sensitivity() {
    let p = defaults::actuator_params();
    let cfg = defaults::drive_config();
    let grid = log_grid(1.0, 1e8, 200);
    let base = sensitivity_report(&gangs_of(&blocks_for(&p, &cfg)).unwrap(), &grid).unwrap();
    let hot = DriveConfig { c_lg: cfg.c_lg / 10.0, ..cfg };
    let high = sensitivity_report(&gangs_of(&blocks_for(&p, &hot)).unwrap(), &grid).unwrap();
    assert!(high.m_s > base.m_s, "{} !> {}", high.m_s, base.m_s);
}

#[test]
fn eddy_aware_coil_has_smaller_peak_sensitivity() {
    let p = defaults::actuator_params();
    let cfg = defaults::drive_config();
    let with = loop_summary(&gangs_of(&blocks_for(&p, &cfg)).unwrap()).unwrap();
    let without = loop_summary(&gangs_of(&blocks_for(&p.without_eddy(), &cfg)).unwrap()).unwrap();
    assert!(with.m_s_db < without.m_s_db);
    assert!(with.pm_deg > without.pm_deg + 5.0);
}

#[test]
fn injected_disturbances_are_rejected() {
    let g = default_gangs();
    for gang in [3u8, 4] {
        let tr = gang_injection_step(&g, gang, 1.0, 5e-3, 1e-7).unwrap();
        let ch = if gang == 3 { &tr.i_c } else { &tr.v_c };
        let peak = ch.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        println!("gang {gang} unit-step peak {:.2} mV", 1e3 * peak);
        // the integrating lag drives both to zero
        let last = ch.last().unwrap().abs();
        assert!(peak.is_finite() && last < 1e-3 * peak, "gang {gang}: {last} of {peak}");
    }
    let zero = gang_injection_step(&g, 3, 0.0, 1e-3, 1e-7).unwrap();
    assert!(zero.i_c.iter().chain(&zero.v_c).all(|&x| x == 0.0));
    assert!(gang_injection_step(&g, 2, 1.0, 1e-3, 1e-7).is_err());
}

fn random_loop() -> impl Strategy<Value = (RationalTF, RationalTF, RationalTF, RationalTF)> {
    let first = || (0.1..10.0f64, 1e-3..1.0f64).prop_map(|(k, tau)| RationalTF::first_order(k, tau));
    (first(), first(), first(), first())
}

proptest! {
    #[test]
    fn sensitivity_and_complement_sum_to_one((p, c, h, f) in random_loop()) {
        let g = six_gangs(&p, &c, &h, &f).unwrap();
        for fr in log_grid(0.01, 1e3, 10) {
            prop_assert!((at(&g.gang4_s, fr) + at(&g.gang6_scm, fr) - 1.0).norm() <= 1e-9);
        }
    }

    #[test]
    fn unity_feedback_gives_s_plus_t_one((p, c, _h, _f) in random_loop()) {
        let one = RationalTF::constant(1.0);
        let g = six_gangs(&p, &c, &one, &one).unwrap();
        for fr in log_grid(0.01, 1e3, 10) {
            prop_assert!((at(&g.gang4_s, fr) + at(&g.gang1_t, fr) - 1.0).norm() <= 1e-9);
        }
    }

    #[test]
    fn gangs_match_block_formulas((p, c, h, f) in random_loop(), fr in 0.01..1e3f64) {
        let g = six_gangs(&p, &c, &h, &f).unwrap();
        let (pv, cv, hv, fv) = (at(&p, fr), at(&c, fr), at(&h, fr), at(&f, fr));
        let d = 1.0 + pv * cv * hv;
        let want = [fv * pv * cv / d, fv * cv / d, pv / d, 1.0 / d, cv * hv / d, pv * cv * hv / d];
        for (k, w) in want.iter().enumerate() {
            prop_assert!((at(g.gang(k + 1).unwrap(), fr) - w).norm() <= 1e-10 * w.norm().max(1e-12));
        }
    }
}
