use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LtiError, RationalTF};
use crate::fmt_sig;

/// Default crossover-search density.
pub const POINTS_PER_DECADE: usize = 400;
/// Default crossover-search span, Hz.
pub const SEARCH_SPAN_HZ: (f64, f64) = (1e-4, 1e9);

pub const FRF_CSV_HEADER: &str = "freq_hz,real,imag,mag_db,phase_deg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub freqs_hz: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn magnitudes_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 20.0 * v.norm().log10()).collect()
    }

    /// Phase in degrees, unwrapped along the grid.
    pub fn phases_deg_unwrapped(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for v in &self.values {
            let p = v.arg().to_degrees();
            if let Some(q) = prev {
                let raw = p + offset;
                let diff = raw - q;
                if diff > 180.0 {
                    offset -= 360.0 * ((diff + 180.0) / 360.0).floor();
                } else if diff < -180.0 {
                    offset += 360.0 * ((-diff + 180.0) / 360.0).floor();
                }
            }
            let u = p + offset;
            out.push(u);
            prev = Some(u);
        }
        out
    }

    /// CSV with header `freq_hz,real,imag,mag_db,phase_deg`, nine
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.len() + 1));
        s.push_str(FRF_CSV_HEADER);
        s.push('\n');
        let mags = self.magnitudes_db();
        let phases = self.phases_deg_unwrapped();
        for i in 0..self.len() {
            let v = self.values[i];
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_sig(self.freqs_hz[i]),
                fmt_sig(v.re),
                fmt_sig(v.im),
                fmt_sig(mags[i]),
                fmt_sig(phases[i])
            );
        }
        s
    }
}

/// Loop margins of a loop transmission `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub gain_crossover_hz: f64,
    pub phase_margin_deg: f64,
    pub gain_margin_db: Option<f64>,
    /// −3 dB bandwidth of `L/(1+L)`.
    pub bandwidth_3db_hz: Option<f64>,
}

/// Logarithmically spaced grid from `f_lo` to `f_hi` inclusive.
pub fn log_grid(f_lo: f64, f_hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (f_hi / f_lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    let (a, b) = (f_lo.log10(), f_hi.log10());
    (0..=n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64))
        .collect()
}

fn jw(f_hz: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI * f_hz)
}

pub fn bode(g: &RationalTF, grid: &[f64]) -> Result<FrequencyResponse, LtiError> {
    if grid.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(LtiError::InvalidInput("frequency grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LtiError::InvalidInput("frequency grid must be strictly increasing".into()));
    }
    let values = grid
        .iter()
        .map(|&f| g.eval(jw(f)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrequencyResponse {
        freqs_hz: grid.to_vec(),
        values,
    })
}

/// Multiplies every point by `e^{−j2πf·t_d}`.
pub fn apply_delay(fr: &FrequencyResponse, t_d: f64) -> Result<FrequencyResponse, LtiError> {
    if !(t_d >= 0.0) {
        return Err(LtiError::InvalidInput(format!("delay must be non-negative, got {t_d}")));
    }
    let values = fr
        .freqs_hz
        .iter()
        .zip(&fr.values)
        .map(|(&f, &v)| with_exact_norm(v * Complex64::from_polar(1.0, -2.0 * PI * f * t_d), v.norm()))
        .collect();
    Ok(FrequencyResponse {
        freqs_hz: fr.freqs_hz.clone(),
        values,
    })
}

/// Rescales `w` so that `w.norm()` reproduces `m` bit for bit.
fn with_exact_norm(mut w: Complex64, m: f64) -> Complex64 {
    for _ in 0..4 {
        let n = w.norm();
        if n == m || n == 0.0 {
            return w;
        }
        w = w.scale(m / n);
    }
    // last resort: walk the larger component one ulp at a time
    for _ in 0..64 {
        let n = w.norm();
        if n == m {
            break;
        }
        let step = |x: f64| {
            let up = n < m;
            let grow = (x >= 0.0) == up;
            let bits = x.abs().to_bits();
            let mag = f64::from_bits(if grow { bits + 1 } else { bits.saturating_sub(1) });
            mag.copysign(x)
        };
        if w.re.abs() >= w.im.abs() {
            w.re = step(w.re);
        } else {
            w.im = step(w.im);
        }
    }
    w
}

/// Bisection on `log f` for a sign change of `h` inside `[lo, hi]`.
fn bisect_log<F: Fn(f64) -> f64>(h: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut h_lo = h(lo);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let hm = h(mid);
        if hm == 0.0 {
            return mid;
        }
        if (hm > 0.0) == (h_lo > 0.0) {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    (lo * hi).sqrt()
}

pub fn margins(l: &RationalTF) -> Result<Margins, LtiError> {
    margins_in(l, SEARCH_SPAN_HZ.0, SEARCH_SPAN_HZ.1)
}

/// Margins with the crossover search restricted to `[f_lo, f_hi]`.
pub fn margins_in(l: &RationalTF, f_lo: f64, f_hi: f64) -> Result<Margins, LtiError> {
    margins_of(|f| l.eval(jw(f)), f_lo, f_hi)
}

/// Margins of `L(s)·e^{−s·t_d}`.
pub fn margins_delayed(l: &RationalTF, t_d: f64, f_lo: f64, f_hi: f64) -> Result<Margins, LtiError> {
    if !(t_d >= 0.0) {
        return Err(LtiError::InvalidInput(format!("delay must be non-negative, got {t_d}")));
    }
    margins_of(
        |f| l.eval(jw(f)).map(|v| v * Complex64::from_polar(1.0, -2.0 * PI * f * t_d)),
        f_lo,
        f_hi,
    )
}

/// Margins of a loop given as a frequency-domain evaluator (Hz in, `L` out).
///
/// The gain margin is the smallest over all phase crossovers.
pub fn margins_of<F>(eval: F, f_lo: f64, f_hi: f64) -> Result<Margins, LtiError>
where
    F: Fn(f64) -> Result<Complex64, LtiError>,
{
    let grid = log_grid(f_lo, f_hi, POINTS_PER_DECADE);
    let vals = grid.iter().map(|&f| eval(f)).collect::<Result<Vec<_>, _>>()?;
    let mag = |f: f64| eval(f).map(|v| v.norm()).unwrap_or(f64::INFINITY);

    // highest-frequency downward unity crossing
    let idx = (0..grid.len() - 1)
        .rev()
        .find(|&i| vals[i].norm() >= 1.0 && vals[i + 1].norm() < 1.0)
        .ok_or(LtiError::NoCrossover { f_lo, f_hi })?;
    let fc = if vals[idx].norm() == 1.0 {
        grid[idx]
    } else {
        bisect_log(|f| mag(f).ln(), grid[idx], grid[idx + 1])
    };
    let lc = eval(fc)?;
    let pm = wrap_deg(180.0 + lc.arg().to_degrees());

    // phase crossovers: imaginary part changes sign with negative real part
    let mut gm: Option<f64> = None;
    for i in 0..grid.len() - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        if a.im.signum() != b.im.signum() && (a.re < 0.0 || b.re < 0.0) {
            let fp = bisect_log(|f| eval(f).map(|v| v.im).unwrap_or(0.0), grid[i], grid[i + 1]);
            let lp = eval(fp)?;
            if lp.re < 0.0 {
                let m = -20.0 * lp.norm().log10();
                gm = Some(gm.map_or(m, |g| g.min(m)));
            }
        }
    }

    let t = |f: f64| -> f64 {
        match eval(f) {
            Ok(v) => (v / (1.0 + v)).norm(),
            Err(_) => f64::NAN,
        }
    };
    let t0 = match eval(0.0) {
        Ok(v) => (v / (1.0 + v)).norm(),
        Err(_) => 1.0,
    };
    let bw = crossing_below(&grid, t, t0 / 2f64.sqrt());
    Ok(Margins {
        gain_crossover_hz: fc,
        phase_margin_deg: pm,
        gain_margin_db: gm,
        bandwidth_3db_hz: bw,
    })
}

/// First frequency on `grid` (refined by bisection) where `h` falls below
/// `level`.
fn crossing_below<F: Fn(f64) -> f64>(grid: &[f64], h: F, level: f64) -> Option<f64> {
    if h(grid[0]) < level {
        return None;
    }
    (1..grid.len())
        .find(|&i| h(grid[i]) < level)
        .map(|i| bisect_log(|f| h(f) - level, grid[i - 1], grid[i]))
}

/// −3 dB bandwidth of a closed-loop transfer function relative to its DC
/// gain, searched over `[f_lo, f_hi]`.
pub fn bandwidth_3db(g: &RationalTF, f_lo: f64, f_hi: f64) -> Option<f64> {
    bandwidth_3db_of(|f| g.eval(jw(f)), f_lo, f_hi)
}

/// [`bandwidth_3db`] for a frequency-domain evaluator; the reference level
/// is the value at 0 Hz, or at `f_lo` when that is a pole.
pub fn bandwidth_3db_of<F>(eval: F, f_lo: f64, f_hi: f64) -> Option<f64>
where
    F: Fn(f64) -> Result<Complex64, LtiError>,
{
    let grid = log_grid(f_lo, f_hi, POINTS_PER_DECADE);
    let reference = eval(0.0)
        .or_else(|_| eval(f_lo))
        .map(|v| v.norm())
        .unwrap_or(f64::NAN);
    crossing_below(
        &grid,
        |f| eval(f).map(|v| v.norm()).unwrap_or(f64::NAN),
        reference / 2f64.sqrt(),
    )
}

/// Wraps an angle in degrees into `(−180, 180]`.
pub fn wrap_deg(x: f64) -> f64 {
    let mut y = x % 360.0;
    if y <= -180.0 {
        y += 360.0;
    } else if y > 180.0 {
        y -= 360.0;
    }
    y
}
