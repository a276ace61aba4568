use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LtiError, Polynomial};

/// Ratio of two real polynomials in `s`.
///
/// Compositions never cancel common factors; only exact leading zeros are
/// trimmed, so near pole-zero cancellations stay visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
}

impl RationalTF {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, LtiError> {
        if den.is_zero() {
            return Err(LtiError::InvalidInput("denominator is the zero polynomial".into()));
        }
        Ok(Self { num, den })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, LtiError> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    /// `1/s`
    pub fn integrator() -> Self {
        Self {
            num: Polynomial::one(),
            den: Polynomial::s(),
        }
    }

    /// `k / (τs + 1)`
    pub fn first_order(k: f64, tau: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::new(vec![tau, 1.0]),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// `num(s)/den(s)`; errors when `s` sits on a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64, LtiError> {
        let d = self.den.eval_complex(s);
        if d.norm() <= 1e-14 * self.den.eval_scale(s) {
            return Err(LtiError::PoleEvaluation { s });
        }
        Ok(self.num.eval_complex(s) / d)
    }

    /// Evaluates on the imaginary axis at `f_hz`.
    pub fn eval_hz(&self, f_hz: f64) -> Result<Complex64, LtiError> {
        self.eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * f_hz))
    }

    pub fn dc_gain(&self) -> Result<f64, LtiError> {
        self.eval(Complex64::new(0.0, 0.0)).map(|v| v.re)
    }

    pub fn series(&self, other: &Self) -> Self {
        Self {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
        }
    }

    /// Parallel sum. Identical denominators are kept as a single factor.
    pub fn parallel(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Self {
                num: &self.num + &other.num,
                den: self.den.clone(),
            };
        }
        Self {
            num: &(&self.num * &other.den) + &(&other.num * &self.den),
            den: &self.den * &other.den,
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn reciprocal(&self) -> Result<Self, LtiError> {
        Self::new(self.den.clone(), self.num.clone())
    }

    /// `forward / (1 + forward·feedback)`.
    pub fn feedback(&self, feedback: &Self) -> Result<Self, LtiError> {
        let num = &self.num * &feedback.den;
        let den = &(&self.den * &feedback.den) + &(&self.num * &feedback.num);
        if den.is_zero() {
            return Err(LtiError::SingularLoop);
        }
        Ok(Self { num, den })
    }

    /// Same transfer function with a monic denominator.
    pub fn normalized(&self) -> Self {
        let k = 1.0 / self.den.leading();
        Self {
            num: self.num.scale(k),
            den: self.den.scale(k),
        }
    }

    /// Coefficient-wise comparison after normalizing both denominators.
    pub fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let a = self.normalized();
        let b = other.normalized();
        coeffs_close(a.num.coeffs(), b.num.coeffs(), rel)
            && coeffs_close(a.den.coeffs(), b.den.coeffs(), rel)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, LtiError> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>, LtiError> {
        if self.num.degree() == 0 {
            return Ok(Vec::new());
        }
        self.num.roots()
    }
}

pub(crate) fn coeffs_close(a: &[f64], b: &[f64], rel: f64) -> bool {
    let n = a.len().max(b.len());
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    let get = |v: &[f64], i: usize| {
        let off = n - v.len();
        if i < off {
            0.0
        } else {
            v[i - off]
        }
    };
    (0..n).all(|i| {
        let (x, y) = (get(a, i), get(b, i));
        (x - y).abs() <= rel * x.abs().max(y.abs()).max(rel * scale)
    })
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}
