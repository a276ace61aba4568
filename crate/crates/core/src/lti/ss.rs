use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{LtiError, Polynomial, RationalTF};

/// Continuous-time `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LtiError::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(LtiError::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(LtiError::Dimension(format!("C has {} cols, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LtiError::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Single-input single-output model from a column `b` and row `c`.
    pub fn siso(a: DMatrix<f64>, b: DVector<f64>, c: &[f64], d: f64) -> Result<Self, LtiError> {
        let n = b.len();
        let c = DMatrix::from_row_slice(1, n, c);
        let b = DMatrix::from_column_slice(n, 1, b.as_slice());
        Self::new(a, b, c, DMatrix::from_element(1, 1, d))
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `det(λI − A)`.
    pub fn char_poly(&self) -> Polynomial {
        char_poly(&self.a)
    }

    /// Eigenvalues of `A` as roots of its characteristic polynomial.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, LtiError> {
        eigenvalues(&self.a)
    }

    /// Transfer function of one input/output channel, `C(sI − A)⁻¹B + D`.
    pub fn to_tf(&self, input: usize, output: usize) -> Result<RationalTF, LtiError> {
        if input >= self.inputs() || output >= self.outputs() {
            return Err(LtiError::Dimension(format!(
                "channel ({input} -> {output}) outside {} inputs / {} outputs",
                self.inputs(),
                self.outputs()
            )));
        }
        let b = self.b.column(input).clone_owned();
        let c = self.c.row(output).clone_owned();
        let d = self.d[(output, input)];
        let den = char_poly(&self.a);
        if self.order() == 0 {
            return RationalTF::new(Polynomial::constant(d), Polynomial::one());
        }
        // c(sI − A)⁻¹b = [det(sI − A + bc) − det(sI − A)] / det(sI − A)
        let shifted = char_poly(&(&self.a - &b * &c));
        let reference: Vec<f64> = shifted
            .coeffs()
            .iter()
            .zip(den.coeffs())
            .map(|(x, y)| x.abs().max(y.abs()))
            .collect();
        let strictly = (&shifted - &den).clean_against(&reference, 1e-10);
        let num = &strictly + &den.scale(d);
        RationalTF::new(num, den)
    }

    /// Realizes a proper SISO transfer function in controllable canonical
    /// form after rescaling `s` by the geometric pole magnitude, which keeps
    /// the state coordinates well balanced for widely spread coefficients.
    pub fn from_tf(g: &RationalTF) -> Result<Self, LtiError> {
        if !g.is_proper() {
            return Err(LtiError::InvalidInput(
                "cannot realize an improper transfer function".into(),
            ));
        }
        let g = g.normalized();
        let den = g.den().coeffs();
        let n = den.len() - 1;
        let mut num = vec![0.0; n + 1];
        let nc = g.num().coeffs();
        num[n + 1 - nc.len()..].copy_from_slice(nc);
        if n == 0 {
            return Self::new(
                DMatrix::zeros(0, 0),
                DMatrix::zeros(0, 1),
                DMatrix::zeros(1, 0),
                DMatrix::from_element(1, 1, num[0] / den[0]),
            );
        }
        let w0 = (1..=n)
            .rev()
            .find(|&k| den[k] != 0.0)
            .map(|k| den[k].abs().powf(1.0 / k as f64))
            .unwrap_or(1.0);
        let a_s: Vec<f64> = (0..=n).map(|k| den[k] / w0.powi(k as i32)).collect();
        let b_s: Vec<f64> = (0..=n).map(|k| num[k] / w0.powi(k as i32)).collect();
        let d = b_s[0];
        let mut a = DMatrix::zeros(n, n);
        for k in 0..n {
            a[(0, k)] = -a_s[k + 1] * w0;
        }
        for k in 1..n {
            a[(k, k - 1)] = w0;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = w0;
        let c = DMatrix::from_row_slice(1, n, &(1..=n).map(|k| b_s[k] - a_s[k] * d).collect::<Vec<_>>());
        Self::new(a, b, c, DMatrix::from_element(1, 1, d))
    }
}

/// Characteristic polynomial of a square matrix.
///
/// The matrix is balanced by powers of two, reduced to upper Hessenberg form
/// and the determinant expanded by the Hessenberg recurrence, which avoids
/// the growth of explicit matrix powers.
pub fn char_poly(a: &DMatrix<f64>) -> Polynomial {
    let n = a.nrows();
    if n == 0 {
        return Polynomial::one();
    }
    let h = balance(a).hessenberg().h();
    let mut p: Vec<Polynomial> = Vec::with_capacity(n + 1);
    p.push(Polynomial::one());
    for k in 1..=n {
        let kk = k - 1;
        let mut pk = &Polynomial::new(vec![1.0, -h[(kk, kk)]]) * &p[k - 1];
        let mut prod = 1.0;
        for i in (1..k).rev() {
            prod *= h[(i, i - 1)];
            let coef = h[(i - 1, kk)] * prod;
            if coef != 0.0 {
                pk = &pk - &p[i - 1].scale(coef);
            }
        }
        p.push(pk);
    }
    p.pop().expect("n >= 1")
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>, LtiError> {
    if a.nrows() != a.ncols() {
        return Err(LtiError::Dimension(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    char_poly(a).roots()
}

/// Diagonal similarity scaling by powers of two that equalizes row and
/// column norms.
fn balance(a: &DMatrix<f64>) -> DMatrix<f64> {
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    let n = a.nrows();
    let mut m = a.clone();
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= SQRDX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= SQRDX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            return m;
        }
    }
}
