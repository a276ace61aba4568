//! Op-amp drive circuit: power stage, divider, current sensor and the
//! lead-lag current compensator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lti::{Polynomial, RationalTF};
use crate::{check_positive, Error, Result};

/// Three-pole open-loop gain model of an op-amp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpAmpSpec {
    pub a_ol: f64,
    pub gbp: f64,
    pub f2: f64,
    pub f3: f64,
    pub v_out_max: f64,
    pub i_out_max: f64,
}

impl OpAmpSpec {
    /// Spec with the second and third poles at `2·gbp` and `4·gbp`.
    pub fn with_default_poles(a_ol: f64, gbp: f64, v_out_max: f64, i_out_max: f64) -> Self {
        Self { a_ol, gbp, f2: 2.0 * gbp, f3: 4.0 * gbp, v_out_max, i_out_max }
    }

    /// Dominant pole `gbp / a_ol`.
    pub fn f1(&self) -> f64 {
        self.gbp / self.a_ol
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.a_ol > 1.0) || !self.a_ol.is_finite() {
            return Err(Error::config(format!("{path}.a_ol"), format!("must exceed 1, got {}", self.a_ol)));
        }
        check_positive(&format!("{path}.gbp"), self.gbp)?;
        check_positive(&format!("{path}.v_out_max"), self.v_out_max)?;
        check_positive(&format!("{path}.i_out_max"), self.i_out_max)?;
        if !(self.f1() < self.f2) {
            return Err(Error::config(
                format!("{path}.f2"),
                format!("must exceed f1 = {} Hz, got {}", self.f1(), self.f2),
            ));
        }
        if !(self.f2 <= self.f3) || !self.f3.is_finite() {
            return Err(Error::config(format!("{path}.f3"), format!("must be at least f2, got {}", self.f3)));
        }
        Ok(())
    }
}

/// Component values of the drive circuit, SI units.
///
/// `r_lg = None` stands for an open feedback resistor, which turns the lag
/// section into a pure integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub power_amp: OpAmpSpec,
    pub signal_amp: OpAmpSpec,
    pub r_v1: f64,
    pub r_v2: f64,
    pub r_p1: f64,
    pub r_p2: f64,
    pub r_s: f64,
    pub r_s1: f64,
    pub r_s2: f64,
    pub r_1: f64,
    pub r_2: f64,
    pub r_ld: f64,
    pub c_ld: f64,
    pub r_lg: Option<f64>,
    pub c_lg: f64,
}

impl DriveConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        self.power_amp.validate(&format!("{path}.power_amp"))?;
        self.signal_amp.validate(&format!("{path}.signal_amp"))?;
        let fields = [
            ("r_v1", self.r_v1),
            ("r_v2", self.r_v2),
            ("r_p1", self.r_p1),
            ("r_p2", self.r_p2),
            ("r_s", self.r_s),
            ("r_s1", self.r_s1),
            ("r_s2", self.r_s2),
            ("r_1", self.r_1),
            ("r_2", self.r_2),
            ("r_ld", self.r_ld),
            ("c_ld", self.c_ld),
            ("c_lg", self.c_lg),
        ];
        for (name, v) in fields {
            check_positive(&format!("{path}.{name}"), v)?;
        }
        if let Some(r) = self.r_lg {
            check_positive(&format!("{path}.r_lg"), r)?;
        }
        Ok(())
    }

    /// Gain from compensator output to coil voltage with ideal op-amps.
    pub fn forward_gain(&self) -> f64 {
        self.r_v2 / (self.r_v1 + self.r_v2) * (1.0 + self.r_p2 / self.r_p1)
    }

    /// Current command gain `r_2/r_1` of the closed current loop.
    pub fn transconductance(&self) -> f64 {
        self.r_2 / self.r_1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Ideal,
    Nonideal,
}

/// Where the lead network sits in the current loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeadPlacement {
    #[default]
    Feedback,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadDesign {
    pub alpha: f64,
    pub tau: f64,
    /// Degrees.
    pub phi_max: f64,
    /// rad/s.
    pub omega_max: f64,
}

impl LeadDesign {
    pub fn new(alpha: f64, tau: f64) -> Self {
        Self {
            alpha,
            tau,
            phi_max: ((alpha - 1.0) / (alpha + 1.0)).asin().to_degrees(),
            omega_max: 1.0 / (tau * alpha.sqrt()),
        }
    }
}

/// Targets for the lead-lag synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadLagSpec {
    pub alpha: f64,
    pub f_c: f64,
    pub r_1: f64,
    pub r_2: f64,
}

/// Loop blocks: plant, forward chain, feedback path and reference path.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveBlocks {
    pub p: RationalTF,
    pub c: RationalTF,
    pub h: RationalTF,
    pub f: RationalTF,
}

pub fn opamp_open_loop(spec: &OpAmpSpec) -> RationalTF {
    let den = [spec.f1(), spec.f2, spec.f3]
        .iter()
        .fold(Polynomial::one(), |acc, &f| &acc * &Polynomial::new(vec![1.0 / (2.0 * PI * f), 1.0]));
    RationalTF::new(Polynomial::constant(spec.a_ol), den).expect("nonzero denominator")
}

pub fn divider_gain(cfg: &DriveConfig) -> RationalTF {
    RationalTF::constant(cfg.r_v2 / (cfg.r_v1 + cfg.r_v2))
}

/// Non-inverting power stage, `A₁/(1 + β·A₁)` with `β = r_p1/(r_p1 + r_p2)`.
pub fn power_stage(cfg: &DriveConfig, ideal: bool) -> RationalTF {
    if ideal {
        return RationalTF::constant(1.0 + cfg.r_p2 / cfg.r_p1);
    }
    let beta = cfg.r_p1 / (cfg.r_p1 + cfg.r_p2);
    opamp_open_loop(&cfg.power_amp)
        .feedback(&RationalTF::constant(beta))
        .expect("positive loop gain")
}

/// Sense-resistor buffer, volts per ampere of coil current.
pub fn current_sensor(cfg: &DriveConfig, ideal: bool) -> RationalTF {
    if ideal {
        return RationalTF::constant(cfg.r_s * cfg.r_s2 / cfg.r_s1);
    }
    let beta = cfg.r_s1 / (cfg.r_s1 + cfg.r_s2);
    opamp_open_loop(&cfg.signal_amp)
        .scale(beta)
        .feedback(&RationalTF::constant(cfg.r_s1 / cfg.r_s2))
        .expect("positive loop gain")
        .scale(cfg.r_s)
}

/// Feedback impedance of the lag section.
pub fn lag_tf(cfg: &DriveConfig) -> RationalTF {
    match cfg.r_lg {
        Some(r) => RationalTF::first_order(r, r * cfg.c_lg),
        None => RationalTF::from_coeffs(&[1.0], &[cfg.c_lg, 0.0]).expect("c_lg > 0"),
    }
}

/// Lead admittance `(1/r_2)·(ατs + 1)/(τs + 1)`.
pub fn lead_tf(cfg: &DriveConfig) -> (RationalTF, LeadDesign) {
    let tau = cfg.r_ld * cfg.c_ld;
    let alpha = 1.0 + cfg.r_2 / cfg.r_ld;
    let g = RationalTF::from_coeffs(&[alpha * tau / cfg.r_2, 1.0 / cfg.r_2], &[tau, 1.0])
        .expect("tau > 0");
    (g, LeadDesign::new(alpha, tau))
}

/// Sizes `r_ld`, `c_ld` and `c_lg` so that the loop crosses unity at `f_c`
/// with the lead's peak phase centred there.
pub fn design_lead_lag(spec: &LeadLagSpec, plant: &RationalTF, cfg: &DriveConfig) -> Result<DriveConfig> {
    if !(spec.alpha > 1.0) {
        return Err(Error::Design(format!("alpha must exceed 1, got {}", spec.alpha)));
    }
    if !(spec.f_c > 0.0) || !(spec.r_1 > 0.0) || !(spec.r_2 > 0.0) {
        return Err(Error::Design("f_c, r_1 and r_2 must be positive".into()));
    }
    let wc = 2.0 * PI * spec.f_c;
    let mut out = cfg.clone();
    out.r_1 = spec.r_1;
    out.r_2 = spec.r_2;
    out.r_ld = spec.r_2 / (spec.alpha - 1.0);
    out.c_ld = 1.0 / (wc * out.r_ld * spec.alpha.sqrt());

    let s = Complex64::new(0.0, wc);
    let he = plant
        .eval(s)
        .map_err(|_| Error::Design(format!("plant has a pole at {} Hz", spec.f_c)))?;
    let (lead, _) = lead_tf(&out);
    let rest = he * lead.eval(s)? * out.forward_gain() * current_sensor(&out, true).dc_gain()?;
    let loop_mag = |c_lg: f64| {
        let mut trial = out.clone();
        trial.c_lg = c_lg;
        lag_tf(&trial).eval(s).map(|z| (z * rest).norm()).unwrap_or(f64::NAN)
    };

    // |L| falls monotonically as c_lg grows
    let (mut lo, mut hi) = (1e-13f64, 1e-6f64);
    let (m_lo, m_hi) = (loop_mag(lo), loop_mag(hi));
    if !(m_lo >= 1.0 && m_hi <= 1.0) {
        return Err(Error::Design(format!(
            "no c_lg in [1e-13, 1e-6] F gives unity loop gain at {} Hz (|L| spans {m_hi:e}..{m_lo:e})",
            spec.f_c
        )));
    }
    while hi / lo - 1.0 > 1e-14 {
        let mid = (lo * hi).sqrt();
        if loop_mag(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.c_lg = (lo * hi).sqrt();
    if !(out.c_lg > 0.0) {
        return Err(Error::Design("non-positive c_lg".into()));
    }
    Ok(out)
}

/// Loop blocks of the current loop.
///
/// With `Nonideal` fidelity every op-amp carries its three-pole gain; the
/// compensator op-amp sees the full admittance network of its summing node.
pub fn assemble_drive(
    cfg: &DriveConfig,
    plant: &RationalTF,
    fidelity: Fidelity,
    placement: LeadPlacement,
) -> Result<DriveBlocks> {
    cfg.validate("drive")?;
    let ideal = fidelity == Fidelity::Ideal;
    let (lead, _) = lead_tf(cfg);
    let y1 = RationalTF::constant(1.0 / cfg.r_1);
    let (y2, shape) = match placement {
        LeadPlacement::Feedback => (lead.clone(), RationalTF::constant(1.0)),
        LeadPlacement::Forward => (RationalTF::constant(1.0 / cfg.r_2), lead.scale(cfg.r_2)),
    };
    let lag = if ideal {
        lag_tf(cfg)
    } else {
        let yf = lag_tf(cfg).reciprocal()?;
        let ysum = y1.parallel(&y2).parallel(&yf);
        opamp_open_loop(&cfg.signal_amp)
            .series(&ysum.reciprocal()?)
            .feedback(&yf)?
    };
    let c = lag
        .series(&shape)
        .series(&divider_gain(cfg))
        .series(&power_stage(cfg, ideal));
    let h = current_sensor(cfg, ideal).series(&y2);
    Ok(DriveBlocks { p: plant.clone(), c, h, f: y1 })
}
