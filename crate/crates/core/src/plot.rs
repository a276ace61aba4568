//! Minimal deterministic SVG plots.

use std::fmt::Write as _;

use crate::lti::FrequencyResponse;
use crate::sim::{Channel, SimTrace};
use crate::{Error, Result};

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_B: f64 = 45.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_R: f64 = 20.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One axes box.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub x_log: bool,
    pub x_label: String,
    pub y_label: String,
}

fn check(p: &Panel) -> Result<()> {
    if p.x.is_empty() || p.series.is_empty() {
        return Err(Error::Plot(format!("panel `{}` has no data", p.title)));
    }
    if p.series.iter().any(|(_, y)| y.len() != p.x.len()) {
        return Err(Error::Plot(format!("panel `{}` has mismatched series", p.title)));
    }
    if p.x_log && p.x.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Plot(format!("panel `{}` needs positive x for a log axis", p.title)));
    }
    Ok(())
}

fn finite_range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn render_panel(out: &mut String, p: &Panel, ox: f64, oy: f64) {
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let (x0, y0) = (ox + MARGIN_L, oy + MARGIN_T);
    let tx = |x: f64| if p.x_log { x.log10() } else { x };
    let (xl, xh) = {
        let (a, b) = (tx(p.x[0]), tx(*p.x.last().expect("non-empty")));
        if a == b { (a - 1.0, b + 1.0) } else { (a.min(b), a.max(b)) }
    };
    let (yl, yh) = finite_range(p.series.iter().flat_map(|(_, y)| y.iter().copied()));
    let sx = |x: f64| x0 + (tx(x) - xl) / (xh - xl) * w;
    let sy = |y: f64| y0 + h - (y - yl) / (yh - yl) * h;

    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#000"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        x0 + w / 2.0,
        oy + MARGIN_T - 10.0,
        escape(&p.title)
    );
    let x_ticks: Vec<f64> = if p.x_log {
        (xl.ceil() as i64..=xh.floor() as i64).map(|e| 10f64.powi(e as i32)).collect()
    } else {
        ticks(xl, xh)
    };
    for t in x_ticks {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
            y0 + h,
            y0 + h + 14.0,
            fmt_tick(t)
        );
    }
    for t in ticks(yl, yh) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
            x0 + w,
            x0 - 4.0,
            y + 3.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
        x0 + w / 2.0,
        y0 + h + 32.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        ox + 16.0,
        y0 + h / 2.0,
        ox + 16.0,
        y0 + h / 2.0,
        escape(&p.y_label)
    );
    for (k, (name, y)) in p.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = p
            .x
            .iter()
            .zip(y)
            .filter(|(_, v)| v.is_finite())
            .map(|(&x, &v)| format!("{:.2},{:.2}", sx(x), sy(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#,
            pts.join(" ")
        );
        if p.series.len() > 1 {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}">{}</text>"#,
                x0 + 6.0,
                y0 + 12.0 + 12.0 * k as f64,
                escape(name)
            );
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Lays panels out in `cols` columns. `note` goes into a comment at the top.
pub fn render(panels: &[Panel], cols: usize, note: Option<&str>) -> Result<String> {
    if panels.is_empty() {
        return Err(Error::Plot("nothing to plot".into()));
    }
    panels.iter().try_for_each(check)?;
    let cols = cols.clamp(1, panels.len());
    let rows = panels.len().div_ceil(cols);
    let (width, height) = (PANEL_W * cols as f64, PANEL_H * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    if let Some(n) = note {
        let _ = writeln!(out, "<!-- {} -->", n.replace("--", "- -"));
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_W * (i % cols) as f64, PANEL_H * (i / cols) as f64);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Magnitude and unwrapped phase panels on a log-frequency axis.
pub fn bode_panels(fr: &FrequencyResponse, title: &str) -> [Panel; 2] {
    [
        Panel {
            title: format!("{title}: magnitude"),
            x: fr.freqs_hz.clone(),
            series: vec![("|H|".into(), fr.magnitudes_db())],
            x_log: true,
            x_label: "frequency [Hz]".into(),
            y_label: "magnitude [dB]".into(),
        },
        Panel {
            title: format!("{title}: phase"),
            x: fr.freqs_hz.clone(),
            series: vec![("arg H".into(), fr.phases_deg_unwrapped())],
            x_log: true,
            x_label: "frequency [Hz]".into(),
            y_label: "phase [deg]".into(),
        },
    ]
}

pub fn bode_svg(fr: &FrequencyResponse, title: &str, note: Option<&str>) -> Result<String> {
    if fr.is_empty() {
        return Err(Error::Plot("empty frequency response".into()));
    }
    render(&bode_panels(fr, title), 1, note)
}

fn channel_label(c: Channel) -> (&'static str, &'static str) {
    match c {
        Channel::Theta => ("theta", "angle [rad]"),
        Channel::OmegaR => ("omega_r", "rate [rad/s]"),
        Channel::IC => ("i_c", "current [A]"),
        Channel::VC => ("v_c", "voltage [V]"),
        Channel::UDac => ("u_dac", "DAC [V]"),
    }
}

/// One panel per channel against time in ms; the angle panel also shows
/// the reference.
pub fn step_svg(trace: &SimTrace, channels: &[Channel], title: &str, note: Option<&str>) -> Result<String> {
    if trace.is_empty() {
        return Err(Error::Plot("empty trace".into()));
    }
    let t_ms: Vec<f64> = trace.t.iter().map(|t| t * 1e3).collect();
    let panels: Vec<Panel> = channels
        .iter()
        .map(|&c| {
            let (name, unit) = channel_label(c);
            let mut series = vec![(name.to_string(), trace.channel(c).to_vec())];
            if c == Channel::Theta {
                series.push(("ref".into(), trace.reference.clone()));
            }
            Panel {
                title: format!("{title}: {name}"),
                x: t_ms.clone(),
                series,
                x_log: false,
                x_label: "time [ms]".into(),
                y_label: unit.into(),
            }
        })
        .collect();
    render(&panels, 1, note)
}

/// Magnitude panels of the six gangs in a 3×2 layout.
pub fn gangs_svg(responses: &[FrequencyResponse], names: &[&str], note: Option<&str>) -> Result<String> {
    if responses.len() != names.len() {
        return Err(Error::Plot("one name per response required".into()));
    }
    let panels: Vec<Panel> = responses
        .iter()
        .zip(names)
        .map(|(fr, name)| Panel {
            title: name.to_string(),
            x: fr.freqs_hz.clone(),
            series: vec![("|G|".into(), fr.magnitudes_db())],
            x_log: true,
            x_label: "frequency [Hz]".into(),
            y_label: "magnitude [dB]".into(),
        })
        .collect();
    render(&panels, 2, note)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{bode, log_grid, RationalTF};

    #[test]
    fn empty_input_is_an_error() {
        let fr = FrequencyResponse { freqs_hz: vec![], values: vec![] };
        assert!(bode_svg(&fr, "x", None).is_err());
        assert!(step_svg(&SimTrace::default(), &[Channel::Theta], "x", None).is_err());
    }

    #[test]
    fn flat_response_draws_horizontal_line() {
        let fr = bode(&RationalTF::constant(2.0), &[1.0, 10.0]).unwrap();
        let svg = bode_svg(&fr, "flat", None).unwrap();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts: Vec<&str> = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>").split(' ').collect();
        let ys: Vec<&str> = pts.iter().map(|p| p.split(',').nth(1).unwrap()).collect();
        assert_eq!(ys[0], ys[1]);
    }

    #[test]
    fn output_is_deterministic() {
        let fr = bode(&RationalTF::integrator(), &log_grid(1.0, 1e3, 20)).unwrap();
        assert_eq!(bode_svg(&fr, "i", Some("h")).unwrap(), bode_svg(&fr, "i", Some("h")).unwrap());
    }
}
