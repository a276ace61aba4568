//! Real-coefficient polynomials in descending-degree order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LtiError;

/// Iteration cap for the simultaneous root iteration used above degree 3.
pub const MAX_ROOT_ITERATIONS: usize = 200;

/// Relative residual bound every reported root must satisfy.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

/// A polynomial `c[0]·λⁿ + c[1]·λⁿ⁻¹ + … + c[n]`.
///
/// Leading exact zeros are trimmed on construction, so `degree() ==
/// coeffs().len() - 1` always holds. The zero polynomial is stored as `[0.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", from = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let first = coeffs.iter().position(|&c| c != 0.0);
        match first {
            Some(i) => Self {
                coeffs: coeffs[i..].to_vec(),
            },
            None => Self::zero(),
        }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `λ`
    pub fn s() -> Self {
        Self::new(vec![1.0, 0.0])
    }

    /// Builds the monic polynomial with the given roots. Complex roots must
    /// come in conjugate pairs; the imaginary residue of the product is dropped.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, &c) in acc.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient of `λᵏ`.
    pub fn coeff_of_power(&self, k: usize) -> f64 {
        let n = self.degree();
        if k > n {
            0.0
        } else {
            self.coeffs[n - k]
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Sum of `|cₖ|·|s|ᵏ`; the magnitude scale against which `eval_complex`
    /// rounding is judged.
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// Evaluates the polynomial at a square matrix, `p(A)`.
    pub fn eval_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        self.coeffs
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, &c| &acc * a + &id * c)
    }

    pub fn derivative(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self::zero();
        }
        Self::new(
            self.coeffs[..n]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (n - i) as f64)
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Divides through by the leading coefficient.
    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(1.0 / self.leading())
    }

    /// Zeroes coefficients whose magnitude is below `tol` times the matching
    /// entry of `reference`, then re-trims. Used to clear cancellation noise
    /// after subtracting nearly identical polynomials.
    pub(crate) fn clean_against(&self, reference: &[f64], tol: f64) -> Self {
        let n = self.coeffs.len();
        let m = reference.len();
        let cleaned = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                // align from the constant term
                let from_end = n - 1 - i;
                let r = if from_end < m {
                    reference[m - 1 - from_end]
                } else {
                    0.0
                };
                if c.abs() <= tol * r {
                    0.0
                } else {
                    c
                }
            })
            .collect();
        Self::new(cleaned)
    }

    /// All `degree()` complex roots, with multiplicity.
    ///
    /// Degrees up to three use closed forms; higher degrees use Aberth–Ehrlich
    /// simultaneous iteration on a magnitude-normalized monic copy. Complex
    /// roots are returned as exact conjugate pairs and the result is sorted by
    /// real part, then imaginary part.
    pub fn roots(&self) -> Result<Vec<Complex64>, LtiError> {
        if self.is_zero() {
            return Err(LtiError::InvalidInput(
                "the zero polynomial has no finite root set".into(),
            ));
        }
        let mut roots = Vec::with_capacity(self.degree());
        // exact zero roots
        let mut trimmed = self.coeffs.clone();
        while trimmed.len() > 1 && *trimmed.last().unwrap() == 0.0 {
            trimmed.pop();
            roots.push(Complex64::new(0.0, 0.0));
        }
        let reduced = Polynomial::new(trimmed);
        let mut found = match reduced.degree() {
            0 => Vec::new(),
            1 => vec![Complex64::new(-reduced.coeffs[1] / reduced.coeffs[0], 0.0)],
            2 => quadratic_roots(&reduced),
            3 => cubic_roots(&reduced),
            _ => aberth_roots(&reduced)?,
        };
        polish(&reduced, &mut found);
        pair_conjugates(&mut found);
        roots.extend(found);

        for r in &roots {
            let residual = self.eval_complex(*r).norm();
            let bound = ROOT_RESIDUAL_TOL * self.root_scale(*r);
            if residual > bound {
                return Err(LtiError::NoConvergence { residual });
            }
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(roots)
    }

    /// `max|cₖ| · max(1, |r|)^degree`, the residual scale for a root `r`.
    pub fn root_scale(&self, r: Complex64) -> f64 {
        self.max_abs_coeff() * r.norm().max(1.0).powi(self.degree() as i32)
    }
}

fn quadratic_roots(p: &Polynomial) -> Vec<Complex64> {
    let (a, b, c) = (p.coeffs[0], p.coeffs[1], p.coeffs[2]);
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (b + b.signum() * sq);
        if q == 0.0 {
            // b = 0 and c = 0
            return vec![Complex64::new(0.0, 0.0); 2];
        }
        vec![Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a.abs());
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn cubic_roots(p: &Polynomial) -> Vec<Complex64> {
    let m = p.monic();
    let (a, b, c) = (m.coeffs[1], m.coeffs[2], m.coeffs[3]);
    let shift = a / 3.0;
    let pp = b - a * a / 3.0;
    let qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = qq * qq / 4.0 + pp * pp * pp / 27.0;
    if disc < 0.0 {
        // three distinct real roots
        let r = 2.0 * (-pp / 3.0).sqrt();
        let arg = (3.0 * qq / (pp * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                let t = r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                Complex64::new(t - shift, 0.0)
            })
            .collect()
    } else {
        let big_a = -qq.signum() * (qq.abs() / 2.0 + disc.sqrt()).cbrt();
        let big_b = if big_a != 0.0 { -pp / (3.0 * big_a) } else { 0.0 };
        let t1 = big_a + big_b;
        let re = -t1 / 2.0 - shift;
        let im = 3f64.sqrt() / 2.0 * (big_a - big_b).abs();
        vec![
            Complex64::new(t1 - shift, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    }
}

fn aberth_roots(p: &Polynomial) -> Result<Vec<Complex64>, LtiError> {
    let n = p.degree();
    let m = p.monic();
    // rescale λ = ρ·μ so the constant term of the monic copy has unit size
    let rho = {
        let c0 = m.coeffs[n].abs();
        if c0 > 0.0 {
            c0.powf(1.0 / n as f64)
        } else {
            1.0
        }
    };
    let scaled = Polynomial::new(
        m.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c / rho.powi(k as i32))
            .collect(),
    );
    let dscaled = scaled.derivative();

    // initial guesses on a circle of radius matching the coefficient bound
    let radius = scaled.coeffs[1..]
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs().powf(1.0 / (k + 1) as f64))
        .fold(0.0f64, f64::max)
        .max(0.5);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let pv = scaled.eval_complex(z[i]);
            if pv.norm() == 0.0 {
                continue;
            }
            let w = pv / dscaled.eval_complex(z[i]);
            let sum: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (z[i] - z[j]))
                .sum();
            let step = w / (1.0 - w * sum);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    let roots: Vec<Complex64> = z.into_iter().map(|r| r * rho).collect();
    if !converged {
        // accept only if the residual test below passes
        let worst = roots
            .iter()
            .map(|r| p.eval_complex(*r).norm() / p.root_scale(*r))
            .fold(0.0, f64::max);
        if worst > ROOT_RESIDUAL_TOL {
            return Err(LtiError::NoConvergence { residual: worst });
        }
    }
    Ok(roots)
}

/// A few Newton steps per root, each kept only if it lowers the residual.
fn polish(p: &Polynomial, roots: &mut [Complex64]) {
    let dp = p.derivative();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = p.eval_complex(*r);
            let df = dp.eval_complex(*r);
            if df.norm() == 0.0 || f.norm() == 0.0 {
                break;
            }
            let cand = *r - f / df;
            if cand.is_finite() && p.eval_complex(cand).norm() < f.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
}

/// Forces near-real roots onto the real axis and makes complex roots exact
/// conjugate pairs.
fn pair_conjugates(roots: &mut Vec<Complex64>) {
    let tol = 1e-9;
    let mut out = Vec::with_capacity(roots.len());
    let mut upper: Vec<Complex64> = Vec::new();
    let mut lower: Vec<Complex64> = Vec::new();
    for r in roots.iter() {
        if r.im.abs() <= tol * r.norm().max(f64::MIN_POSITIVE) {
            out.push(Complex64::new(r.re, 0.0));
        } else if r.im > 0.0 {
            upper.push(*r);
        } else {
            lower.push(*r);
        }
    }
    // unmatched halves mean a genuinely complex-coefficient residue; keep as is
    if upper.len() != lower.len() {
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        return;
    }
    for u in upper {
        let (idx, _) = lower
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l.conj() - u).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("equal halves");
        let l = lower.swap_remove(idx);
        let re = 0.5 * (u.re + l.re);
        let im = 0.5 * (u.im - l.im);
        out.push(Complex64::new(re, im));
        out.push(Complex64::new(re, -im));
    }
    *roots = out;
}

fn add_aligned(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &c) in a.iter().rev().enumerate() {
        out[n - 1 - i] += c;
    }
    for (i, &c) in b.iter().rev().enumerate() {
        out[n - 1 - i] += sign * c;
    }
    out
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::new(add_aligned(&self.coeffs, &rhs.coeffs, 1.0))
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::new(add_aligned(&self.coeffs, &rhs.coeffs, -1.0))
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.degree();
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && !(n == 0) {
                continue;
            }
            let pow = n - i;
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let mag = c.abs();
            match pow {
                0 => write!(f, "{mag}")?,
                1 => write!(f, "{mag}·s")?,
                _ => write!(f, "{mag}·s^{pow}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
