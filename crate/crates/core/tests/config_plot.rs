use proptest::prelude::*;

use magrest_core::config::ProjectConfig;
use magrest_core::lti::{bode, log_grid, FrequencyResponse, RationalTF};
use magrest_core::plot::{bode_svg, gangs_svg, render, step_svg};
use magrest_core::sim::{Channel, SimTrace};
use magrest_core::Error;

fn config_path(e: &Error) -> Option<&str> {
    match e {
        Error::Config { path, .. } => Some(path),
        _ => None,
    }
}

fn polyline_points(line: &str) -> Vec<(f64, f64)> {
    let start = line.find("points=\"").unwrap() + 8;
    let end = start + line[start..].find('"').unwrap();
    line[start..end]
        .split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn optional_fields_can_be_set_by_override() {
    let base = ProjectConfig::default();
    let c = base.with_overrides(&["drive.r_lg=1e8", "control.lambda0=4e4"]).unwrap();
    assert_eq!(c.drive.r_lg, Some(1e8));
    assert_eq!(c.control.lambda0(), 4e4);
    assert_eq!(base.control.lambda0(), base.control.estimator_speed_factor * base.control.omega_n());
    // unset again
    let back = c.with_overrides(&["drive.r_lg=null"]).unwrap();
    assert_eq!(back.drive.r_lg, None);
}

#[test]
fn malformed_overrides_are_config_errors() {
    let c = ProjectConfig::default();
    let e = c.with_overrides(&["control.zeta"]).unwrap_err();
    assert!(config_path(&e).is_some());
    let e = c.with_overrides(&["control.zeta=\"fast\""]).unwrap_err();
    assert_eq!(config_path(&e), Some("control.zeta"), "{e}");
    let e = c.with_overrides(&["actuator.inertia=1"]).unwrap_err();
    assert_eq!(config_path(&e), Some("actuator.inertia"));
}

#[test]
fn validation_reports_paths_and_warnings() {
    let c = ProjectConfig::default();
    assert!(c.validate().unwrap().is_empty());
    let slow = c.with_overrides(&["control.estimator_speed_factor=3"]).unwrap();
    let w = slow.validate().unwrap();
    assert_eq!(w.len(), 1);
    assert!(w[0].contains("estimator_speed_factor"));
    for (o, path) in [
        ("control.zeta=1.2", "control.zeta"),
        ("lead_lag.alpha=1", "lead_lag.alpha"),
        ("drive.r_v1=0", "drive.r_v1"),
    ] {
        let e = c.with_overrides(&[o]).unwrap().validate().unwrap_err();
        assert_eq!(config_path(&e), Some(path), "{o}: {e}");
    }
}

#[test]
fn hash_is_a_stable_digest() {
    let c = ProjectConfig::default();
    let h = c.hash();
    assert_eq!(h.len(), 64);
    assert!(h.chars().all(|ch| ch.is_ascii_hexdigit()));
    let reparsed = ProjectConfig::from_json(&c.to_json()).unwrap();
    assert_eq!(reparsed.hash(), h);
    assert_ne!(c.with_overrides(&["sim.duration=0.03"]).unwrap().hash(), h);
}

proptest! {
    #[test]
    fn overridden_configs_round_trip(
        zeta in 0.05..1.0f64,
        fn_hz in 10.0..2000.0f64,
        amp in -0.5..0.5f64,
        bits in 8u32..24,
    ) {
        let c = ProjectConfig::default()
            .with_overrides(&[
                format!("control.zeta={zeta}"),
                format!("control.omega_n_hz={fn_hz}"),
                format!("sim.reference.amplitude={amp}"),
                format!("sim.adc_bits={bits}"),
            ])
            .unwrap();
        prop_assert_eq!(c.control.zeta, zeta);
        prop_assert_eq!(c.sim.adc_bits, Some(bits));
        let back = ProjectConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert_eq!(back, c);
    }
}

#[test]
fn integrator_bode_is_a_straight_line() {
    let fr = bode(&RationalTF::integrator(), &log_grid(1.0, 1e3, 10)).unwrap();
    let svg = bode_svg(&fr, "1/s", Some("hash abc")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<!-- hash abc -->"));
    let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(lines.len(), 2);
    let mag = polyline_points(lines[0]);
    assert_eq!(mag.len(), fr.len());
    // equal decades give equal drops on both axes
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let s0 = slope(mag[0], mag[1]);
    assert!(s0 > 0.0, "magnitude falls, so screen y grows");
    for w in mag.windows(2) {
        assert!((slope(w[0], w[1]) - s0).abs() < 0.02 * s0);
    }
    // constant −90° phase is flat
    let phase = polyline_points(lines[1]);
    assert!(phase.iter().all(|p| (p.1 - phase[0].1).abs() < 1e-9));
}

#[test]
fn two_point_flat_response() {
    let fr = bode(&RationalTF::constant(0.5), &[10.0, 100.0]).unwrap();
    let svg = bode_svg(&fr, "flat", None).unwrap();
    let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let pts = polyline_points(line);
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[0].1, pts[1].1);
    assert!(pts[1].0 > pts[0].0);
}

#[test]
fn six_gang_panels() {
    let grid = log_grid(1.0, 1e4, 5);
    let frs: Vec<FrequencyResponse> =
        (1..=6).map(|k| bode(&RationalTF::first_order(k as f64, 1e-3), &grid).unwrap()).collect();
    let names = ["T", "U/R", "Y/D", "S", "S_N", "S_cm"];
    let svg = gangs_svg(&frs, &names, None).unwrap();
    assert_eq!(svg.lines().filter(|l| l.starts_with("<polyline")).count(), 6);
    for n in names {
        assert!(svg.contains(&format!(">{n}<")), "{n}");
    }
    // 3 rows of 2
    assert!(svg.contains(r#"width="920" height="720""#));
    assert!(gangs_svg(&frs, &names[..5], None).is_err());
    assert_eq!(svg, gangs_svg(&frs, &names, None).unwrap());
}

#[test]
fn empty_inputs_are_plot_errors() {
    assert!(matches!(render(&[], 1, None), Err(Error::Plot(_))));
    let empty = FrequencyResponse { freqs_hz: vec![], values: vec![] };
    assert!(matches!(bode_svg(&empty, "x", None), Err(Error::Plot(_))));
    assert!(matches!(gangs_svg(&[empty], &["x"], None), Err(Error::Plot(_))));
    assert!(matches!(step_svg(&SimTrace::default(), &[Channel::Theta], "x", None), Err(Error::Plot(_))));
}
