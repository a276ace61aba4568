//! Six-gang analysis of the current loop.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive::DriveBlocks;
use crate::lti::{bandwidth_3db, log_grid, margins, LtiError, Polynomial, RationalTF};
use crate::sim::{lti_step, SimTrace};
use crate::{Error, Result};

/// Inverse of the gain from the injection input to the coil voltage.
pub const INJECTION_PATH_GAIN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct GangSet {
    pub gang1_t: RationalTF,
    pub gang2_ur: RationalTF,
    pub gang3_yd: RationalTF,
    pub gang4_s: RationalTF,
    pub gang5_sn: RationalTF,
    pub gang6_scm: RationalTF,
    pub l: RationalTF,
    pub p: RationalTF,
    pub c: RationalTF,
    pub h: RationalTF,
    pub f: RationalTF,
}

impl GangSet {
    /// Gang `k`, `1 ≤ k ≤ 6`.
    pub fn gang(&self, k: usize) -> Option<&RationalTF> {
        match k {
            1 => Some(&self.gang1_t),
            2 => Some(&self.gang2_ur),
            3 => Some(&self.gang3_yd),
            4 => Some(&self.gang4_s),
            5 => Some(&self.gang5_sn),
            6 => Some(&self.gang6_scm),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 6] = ["gang1_t", "gang2_ur", "gang3_yd", "gang4_s", "gang5_sn", "gang6_scm"];
}

/// All six gangs over the shared denominator `Δ = dP·dC·dH + nP·nC·nH`.
///
/// No common factors are cancelled, so `S + S_cm` is `Δ/Δ` coefficient for
/// coefficient.
pub fn six_gangs(p: &RationalTF, c: &RationalTF, h: &RationalTF, f: &RationalTF) -> Result<GangSet> {
    let (np, dp) = (p.num(), p.den());
    let (nc, dc) = (c.num(), c.den());
    let (nh, dh) = (h.num(), h.den());
    let (nf, df) = (f.num(), f.den());
    let loop_num = &(np * nc) * nh;
    let loop_den = &(dp * dc) * dh;
    let delta = &loop_den + &loop_num;
    if delta.is_zero() {
        return Err(LtiError::SingularLoop.into());
    }
    let tf = |n: Polynomial, d: &Polynomial| RationalTF::new(n, d.clone());
    let fdelta = df * &delta;
    Ok(GangSet {
        gang1_t: tf(&(&(nf * np) * nc) * dh, &fdelta)?,
        gang2_ur: tf(&(&(nf * nc) * dp) * dh, &fdelta)?,
        gang3_yd: tf(&(np * dc) * dh, &delta)?,
        gang4_s: tf(loop_den.clone(), &delta)?,
        gang5_sn: tf(&(nc * nh) * dp, &delta)?,
        gang6_scm: tf(loop_num.clone(), &delta)?,
        l: RationalTF::new(loop_num, loop_den)?,
        p: p.clone(),
        c: c.clone(),
        h: h.clone(),
        f: f.clone(),
    })
}

pub fn gangs_of(b: &DriveBlocks) -> Result<GangSet> {
    six_gangs(&b.p, &b.c, &b.h, &b.f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// dB.
    pub m_s: f64,
    /// Hz.
    pub omega_ms: f64,
    pub dc_gang1: f64,
    /// V/V.
    pub dc_gang2: f64,
}

/// Peak of `|S|` on `grid`, refined by golden-section search.
pub fn sensitivity_report(g: &GangSet, grid: &[f64]) -> Result<SensitivityReport> {
    if grid.len() < 3 {
        return Err(Error::Design("grid needs at least three points".into()));
    }
    let s_mag = |f: f64| {
        g.gang4_s
            .eval(Complex64::new(0.0, 2.0 * PI * f))
            .map(|v| v.norm())
            .unwrap_or(f64::NAN)
    };
    let mags: Vec<f64> = grid.iter().map(|&f| s_mag(f)).collect();
    let i = (0..grid.len())
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .expect("non-empty grid");
    let (mut f_pk, mut m_pk) = (grid[i], mags[i]);
    if i > 0 && i + 1 < grid.len() {
        let (f, m) = golden_max(|x| s_mag(x.exp()), grid[i - 1].ln(), grid[i + 1].ln(), 1e-4);
        if m > m_pk {
            f_pk = f.exp();
            m_pk = m;
        }
    }
    Ok(SensitivityReport {
        m_s: 20.0 * m_pk.log10(),
        omega_ms: f_pk,
        dc_gang1: g.gang1_t.dc_gain()?,
        dc_gang2: g.gang2_ur.dc_gain()?,
    })
}

/// Maximizer of a unimodal `h` on `[a, b]`, to absolute tolerance `tol`.
fn golden_max<H: Fn(f64) -> f64>(h: H, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut h1, mut h2) = (h(x1), h(x2));
    while b - a > tol {
        if h1 < h2 {
            a = x1;
            x1 = x2;
            h1 = h2;
            x2 = a + r * (b - a);
            h2 = h(x2);
        } else {
            b = x2;
            x2 = x1;
            h2 = h1;
            x1 = b - r * (b - a);
            h1 = h(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, h(x))
}

/// Scalar figures of a designed current loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub pm_deg: f64,
    pub f_c_hz: f64,
    pub f_bw_hz: f64,
    pub m_s_db: f64,
    pub dc_gang1_db: f64,
    pub dc_gang2_db: f64,
}

pub fn loop_summary(g: &GangSet) -> Result<LoopSummary> {
    let m = margins(&g.l)?;
    let f_bw = bandwidth_3db(&g.gang1_t, 1.0, 1e8)
        .ok_or_else(|| Error::Design("closed loop has no -3 dB point below 100 MHz".into()))?;
    let rep = sensitivity_report(g, &log_grid(1.0, 1e8, 200))?;
    Ok(LoopSummary {
        pm_deg: m.phase_margin_deg,
        f_c_hz: m.gain_crossover_hz,
        f_bw_hz: f_bw,
        m_s_db: rep.m_s,
        dc_gang1_db: 20.0 * rep.dc_gang1.abs().log10(),
        dc_gang2_db: 20.0 * rep.dc_gang2.abs().log10(),
    })
}

/// Step response of gang 3 or 4 to a step of `amplitude` volts at the
/// injection input.
///
/// The disturbance reaching the coil is `amplitude / 0.2`. Gang 3 lands in
/// the `i_c` channel, gang 4 in `v_c`.
pub fn gang_injection_step(g: &GangSet, gang: u8, amplitude: f64, duration: f64, dt: f64) -> Result<SimTrace> {
    let tf = match gang {
        3 => &g.gang3_yd,
        4 => &g.gang4_s,
        _ => return Err(Error::Design(format!("injection applies to gangs 3 and 4, got {gang}"))),
    };
    if !(dt > 0.0 && duration >= dt) {
        return Err(Error::Design("need dt > 0 and duration >= dt".into()));
    }
    let n = (duration / dt).round() as usize + 1;
    let d = amplitude / INJECTION_PATH_GAIN;
    let y = lti_step(tf, dt, n)?;
    let mut tr = SimTrace::with_capacity(n);
    for (k, yk) in y.into_iter().enumerate() {
        let out = d * yk;
        let (i_c, v_c) = if gang == 3 { (out, 0.0) } else { (0.0, out) };
        tr.push(k as f64 * dt, amplitude, 0.0, 0.0, i_c, v_c, amplitude, 0.0);
    }
    Ok(tr)
}
