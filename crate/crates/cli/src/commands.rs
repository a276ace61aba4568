use std::fmt::Display;

use anyhow::Result;
use rayon::prelude::*;
use serde_json::{json, Value};

use magrest_core::config::ProjectConfig;
use magrest_core::drive::lead_tf;
use magrest_core::fl::{fl_loop_filtered, fl_loop_tfs, fl_realized_margins};
use magrest_core::loops::{gangs_of, loop_summary, GangSet};
use magrest_core::lti::{apply_delay, bode, log_grid, margins, margins_delayed, FrequencyResponse};
use magrest_core::plant::{electrical_tf, PlantModel};
use magrest_core::plot::{bode_svg, gangs_svg, step_svg};
use magrest_core::position::{closed_loop_tfs, Arch};
use magrest_core::sim::{
    simulate, sine_sweep_frf, step_metrics, Actuation, Channel, Controller, Reference, SimTrace, SweepRun,
    DEFAULT_MAX_FREQ_HZ, MIN_CYCLES,
};
use magrest_core::{Error, Result as CoreResult};

use crate::artifacts::Artifacts;
use crate::pipeline::{self, PolePlacement};
use crate::{config_error, BodeTarget, ControllerKind, Format, Grid, SimOpts};

const GANG_TITLES: [&str; 6] = ["T (gang 1)", "U/R (gang 2)", "Y/D (gang 3)", "S (gang 4)", "S_N (gang 5)", "S_cm (gang 6)"];
const TRACE_CHANNELS: [Channel; 4] = [Channel::Theta, Channel::IC, Channel::VC, Channel::UDac];

/// The value, or `{"error": …}` when it could not be computed.
fn or_reason<T: serde::Serialize, E: Display>(r: std::result::Result<T, E>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn grid_of(g: &Grid) -> Result<Vec<f64>> {
    if !(g.f_lo > 0.0 && g.f_hi > g.f_lo && g.f_hi.is_finite()) {
        return Err(config_error("--f-lo", format!("need 0 < f_lo < f_hi, got {} and {}", g.f_lo, g.f_hi)));
    }
    if g.per_decade == 0 {
        return Err(config_error("--per-decade", "must be positive"));
    }
    Ok(log_grid(g.f_lo, g.f_hi, g.per_decade))
}

fn design_record(cfg: &ProjectConfig) -> CoreResult<Value> {
    let drive = pipeline::synthesized_drive(cfg)?;
    let (_, lead) = lead_tf(&drive);
    let blocks = magrest_core::drive::assemble_drive(
        &drive,
        &electrical_tf(&cfg.actuator),
        magrest_core::drive::Fidelity::Ideal,
        magrest_core::drive::LeadPlacement::Feedback,
    )?;
    let summary = loop_summary(&gangs_of(&blocks)?)?;
    Ok(json!({
        "lead_lag": cfg.lead_lag,
        "r_ld": drive.r_ld,
        "c_ld": drive.c_ld,
        "r_lg": drive.r_lg,
        "c_lg": drive.c_lg,
        "phi_max_deg": lead.phi_max,
        "f_max_hz": pipeline::hz(lead.omega_max),
        "loop": summary,
        "drive": drive,
    }))
}

pub fn design(cfg: &ProjectConfig, art: &mut Artifacts) -> Result<()> {
    let rec = design_record(cfg)?;
    art.json("design.json", rec)
}

pub fn gangs(cfg: &ProjectConfig, grid: &Grid, format: Format, art: &mut Artifacts) -> Result<()> {
    let freqs = grid_of(grid)?;
    let g = pipeline::gangs(cfg)?;
    let frs = (1..=6).map(|k| bode(g.gang(k).expect("six gangs"), &freqs)).collect::<Result<Vec<_>, _>>()?;
    match format {
        Format::Svg => {
            let svg = gangs_svg(&frs, &GANG_TITLES, Some(&art.note()))?;
            art.svg("gangs.svg", &svg)?;
        }
        _ => {
            for (fr, (stem, title)) in frs.iter().zip(GangSet::NAMES.iter().zip(GANG_TITLES)) {
                art.frf(stem, fr, format, title)?;
            }
        }
    }
    art.json("gangs_summary.json", serde_json::to_value(loop_summary(&g)?)?)
}

fn position_response(cfg: &ProjectConfig, freqs: &[f64]) -> CoreResult<FrequencyResponse> {
    let pp = PolePlacement::new(cfg, cfg.control.arch)?;
    let t = match cfg.control.arch {
        Arch::VoltageDrive => closed_loop_tfs(&pp.model, &pp.design)?.t,
        Arch::CurrentDrive => {
            magrest_core::position::close_with_current_loop(&pp.model, &pipeline::gangs(cfg)?.gang1_t, &pp.design)?
        }
    };
    Ok(bode(&t, freqs)?)
}

pub fn bode_cmd(cfg: &ProjectConfig, target: BodeTarget, grid: &Grid, format: Format, art: &mut Artifacts) -> Result<()> {
    let freqs = grid_of(grid)?;
    let (stem, title, fr) = match target {
        BodeTarget::Loop => ("bode_loop", "current loop L", bode(&pipeline::gangs(cfg)?.l, &freqs)?),
        BodeTarget::Plant => ("bode_plant", "coil admittance", bode(&electrical_tf(&cfg.actuator), &freqs)?),
        BodeTarget::Closed => ("bode_closed", "closed current loop", bode(&pipeline::gangs(cfg)?.gang1_t, &freqs)?),
        BodeTarget::Sensitivity => ("bode_sensitivity", "sensitivity", bode(&pipeline::gangs(cfg)?.gang4_s, &freqs)?),
        BodeTarget::Position => ("bode_position", "position loop", position_response(cfg, &freqs)?),
        BodeTarget::Fl => {
            let c = pipeline::fl_controller(cfg)?;
            let fr = bode(&fl_loop_filtered(&c), &freqs)?;
            ("bode_fl", "linearized loop", apply_delay(&fr, pipeline::loop_delay(cfg))?)
        }
    };
    art.frf(stem, &fr, format, title)
}

fn margins_record(cfg: &ProjectConfig) -> CoreResult<Value> {
    let g = pipeline::gangs(cfg)?;
    let delay = pipeline::loop_delay(cfg);
    let pp = PolePlacement::new(cfg, cfg.control.arch)?;
    let l_pos = closed_loop_tfs(&pp.model, &pp.design)?.l_pos;
    let bw = match cfg.control.arch {
        Arch::CurrentDrive => or_reason(pp.bandwidth_with_current_loop(&g)),
        Arch::VoltageDrive => or_reason(closed_loop_tfs(&pp.model, &pp.design).map(|p| {
            magrest_core::lti::bandwidth_3db(&p.t, 1e-2, 1e6)
        })),
    };
    let c = pipeline::fl_controller(cfg)?;
    Ok(json!({
        "current_loop": {
            "margins": or_reason(margins(&g.l)),
            "summary": or_reason(loop_summary(&g)),
        },
        "position_loop": {
            "arch": cfg.control.arch,
            "margins_with_delay": or_reason(margins_delayed(&l_pos, delay, 1e-2, 1e7)),
            "bandwidth_3db_hz": bw,
        },
        "feedback_lin": {
            "ideal": or_reason(margins(&fl_loop_tfs(&c).l)),
            "sampled": or_reason(fl_realized_margins(&c, delay)),
            "delay_s": delay,
        },
    }))
}

pub fn margins_cmd(cfg: &ProjectConfig, art: &mut Artifacts) -> Result<()> {
    let rec = margins_record(cfg)?;
    art.json("margins.json", rec)
}

pub fn poleplace(cfg: &ProjectConfig, art: &mut Artifacts) -> Result<()> {
    let rec = PolePlacement::new(cfg, cfg.control.arch)?.record(cfg)?;
    art.json("poleplace.json", rec)
}

fn sim_setup(cfg: &ProjectConfig, opts: &SimOpts) -> CoreResult<(Controller, Actuation)> {
    let arch = cfg.control.arch;
    Ok(match opts.controller {
        ControllerKind::PolePlace => {
            (PolePlacement::new(cfg, arch)?.controller()?, pipeline::actuation_for(cfg, arch, opts.ideal_current)?)
        }
        // the linearizing law commands current whatever the configured arch
        ControllerKind::FeedbackLin => (
            Controller::FeedbackLin { ctrl: pipeline::fl_controller(cfg)?, params: cfg.actuator.clone() },
            pipeline::current_actuation(cfg, opts.ideal_current)?,
        ),
        ControllerKind::OpenLoop => (Controller::OpenLoop, pipeline::actuation_for(cfg, arch, opts.ideal_current)?),
    })
}

fn plant_model(opts: &SimOpts) -> PlantModel {
    if opts.linear {
        PlantModel::Linear
    } else {
        PlantModel::Nonlinear
    }
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn trace_record(tr: &SimTrace, closed_loop: bool) -> Value {
    let metrics = if closed_loop {
        or_reason(step_metrics(tr, Channel::Theta, 1.0))
    } else {
        Value::Null
    };
    json!({
        "samples": tr.len(),
        "step_metrics": metrics,
        "peak_abs": {
            "theta": peak(&tr.theta),
            "i_c": peak(&tr.i_c),
            "v_c": peak(&tr.v_c),
            "u_dac": peak(&tr.u_dac),
        },
    })
}

fn write_trace(art: &mut Artifacts, tr: &SimTrace, format: Format, title: &str) -> Result<()> {
    match format {
        Format::Csv => art.csv("trace.csv", &tr.to_csv()),
        Format::Json => art.json("trace.json", serde_json::to_value(tr)?),
        Format::Svg if tr.is_empty() => Ok(()),
        Format::Svg => {
            let svg = step_svg(tr, &TRACE_CHANNELS, title, Some(&art.note()))?;
            art.svg("trace.svg", &svg)
        }
    }
}

pub fn simulate_cmd(cfg: &ProjectConfig, opts: &SimOpts, format: Format, art: &mut Artifacts) -> Result<()> {
    let (ctrl, act) = sim_setup(cfg, opts)?;
    let closed = opts.controller != ControllerKind::OpenLoop;
    let name = opts.controller.name();
    match simulate(&cfg.actuator, plant_model(opts), &ctrl, &act, &cfg.sim) {
        Ok(tr) => {
            write_trace(art, &tr, format, name)?;
            let mut rec = trace_record(&tr, closed);
            rec["controller"] = json!(name);
            rec["diverged"] = json!(false);
            art.json("simulate.json", rec)
        }
        Err(Error::Divergence { t_last, partial }) => {
            write_trace(art, &partial, format, name)?;
            art.json("simulate.json", json!({ "controller": name, "diverged": true, "t_last": t_last, "samples": partial.len() }))?;
            Err(Error::Divergence { t_last, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn sweep(cfg: &ProjectConfig, opts: &SimOpts, grid: &Grid, cycles: u32, format: Format, art: &mut Artifacts) -> Result<()> {
    let freqs = grid_of(grid)?;
    // checked up front so that no run is wasted on a bad request
    if cycles < MIN_CYCLES {
        return Err(config_error("sweep.cycles", format!("must be at least {MIN_CYCLES}, got {cycles}")));
    }
    if grid.f_hi > DEFAULT_MAX_FREQ_HZ {
        return Err(config_error("sweep.freqs", format!("{} Hz above {DEFAULT_MAX_FREQ_HZ} Hz", grid.f_hi)));
    }
    let amplitude = cfg.sim.reference.amplitude;
    if amplitude == 0.0 {
        return Err(config_error("sim.reference.amplitude", "a sweep needs a nonzero amplitude"));
    }
    let (ctrl, act) = sim_setup(cfg, opts)?;
    let model = plant_model(opts);
    let runs: Vec<std::result::Result<SweepRun, String>> = freqs
        .par_iter()
        .map(|&f| {
            let mut s = cfg.sim.clone();
            s.reference = Reference::square(amplitude, f);
            s.record_stride = s.substeps();
            // settle for a few periods, at least 5 ms, before the measured ones
            s.duration = cycles as f64 / f + (3.0 / f).max(5e-3);
            let tr = simulate(&cfg.actuator, model, &ctrl, &act, &s).map_err(|e| e.to_string())?;
            Ok(SweepRun { dt: s.t_s(), input: tr.reference, output: tr.theta })
        })
        .collect();
    let lookup = |f: f64, _: u32| {
        let k = freqs.iter().position(|&x| x == f).expect("frequency from the grid");
        runs[k].clone().map_err(Error::Metric)
    };
    let out = sine_sweep_frf(lookup, &freqs, cycles, DEFAULT_MAX_FREQ_HZ)?;
    let failures: Vec<Value> = out.failures.iter().map(|(f, why)| json!({ "freq_hz": f, "reason": why })).collect();
    art.json(
        "sweep_summary.json",
        json!({
            "controller": opts.controller.name(),
            "amplitude": amplitude,
            "cycles": cycles,
            "points": out.response.len(),
            "failures": failures,
        }),
    )?;
    if out.response.is_empty() {
        return Err(Error::Metric("no sweep point succeeded".into()).into());
    }
    art.frf("sweep", &out.response, format, "reference to angle")
}

struct SimCase {
    name: &'static str,
    controller: Controller,
    actuation: Actuation,
}

pub fn report(cfg: &ProjectConfig, art: &mut Artifacts) -> Result<()> {
    let note = art.note();
    let g = pipeline::gangs(cfg)?;
    let freqs = log_grid(1.0, 1e7, 50);

    let frs = (1..=6).map(|k| bode(g.gang(k).expect("six gangs"), &freqs)).collect::<Result<Vec<_>, _>>()?;
    art.svg("report_gangs.svg", &gangs_svg(&frs, &GANG_TITLES, Some(&note))?)?;
    art.svg("report_bode_loop.svg", &bode_svg(&bode(&g.l, &freqs)?, "current loop L", Some(&note))?)?;

    let rl = gangs_of(&magrest_core::drive::assemble_drive(
        &cfg.drive,
        &electrical_tf(&cfg.actuator.without_eddy()),
        magrest_core::drive::Fidelity::Ideal,
        magrest_core::drive::LeadPlacement::Feedback,
    )?)?;
    let voltage = PolePlacement::new(cfg, Arch::VoltageDrive)?;
    let current = PolePlacement::new(cfg, Arch::CurrentDrive)?;
    let fl = pipeline::fl_controller(cfg)?;

    let cases = [
        SimCase { name: "voltage_pole_place", controller: voltage.controller()?, actuation: pipeline::voltage_actuation() },
        SimCase {
            name: "current_pole_place",
            controller: current.controller()?,
            actuation: pipeline::current_actuation(cfg, false)?,
        },
        SimCase {
            name: "feedback_lin",
            controller: Controller::FeedbackLin { ctrl: fl, params: cfg.actuator.clone() },
            actuation: pipeline::current_actuation(cfg, false)?,
        },
    ];
    let mut sims = serde_json::Map::new();
    let mut failed = None;
    for case in &cases {
        match simulate(&cfg.actuator, PlantModel::Nonlinear, &case.controller, &case.actuation, &cfg.sim) {
            Ok(tr) => {
                let title = case.name.replace('_', " ");
                art.svg(&format!("report_step_{}.svg", case.name), &step_svg(&tr, &TRACE_CHANNELS, &title, Some(&note))?)?;
                sims.insert(case.name.into(), trace_record(&tr, true));
            }
            Err(e) => {
                sims.insert(case.name.into(), json!({ "error": e.to_string() }));
                failed.get_or_insert(e);
            }
        }
    }

    let rec = json!({
        "design": or_reason(design_record(cfg)),
        "current_loop": {
            "summary": or_reason(loop_summary(&g)),
            "pm_rl_only_deg": or_reason(margins(&rl.l).map(|m| m.phase_margin_deg)),
        },
        "position": {
            "voltage_drive": voltage.record(cfg)?,
            "current_drive": current.record(cfg)?,
            "current_drive_bandwidth_hz": or_reason(current.bandwidth_with_current_loop(&g)),
        },
        "feedback_lin": {
            "gains": fl,
            "margins": margins_record(cfg)?["feedback_lin"].clone(),
        },
        "simulations": sims,
    });
    art.json("report.json", rec)?;
    match failed {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
