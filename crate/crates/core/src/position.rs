//! Pole-placement position control with full- and reduced-order observers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lti::{eigenvalues, Polynomial, RationalTF, StateSpaceModel};
use crate::plant::ActuatorParams;
use crate::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    VoltageDrive,
    CurrentDrive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDesign {
    pub k_fb: Vec<f64>,
    pub g_in: f64,
    pub desired_poly: Polynomial,
    pub arch: Arch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    FullOrder,
    ReducedOrder,
}

/// Scalar estimator `ż = â·z + b̂·y + f̂·u`, `ω̂ = z + L·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedOrder {
    pub a_hat: f64,
    pub b_hat: f64,
    pub f_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesign {
    pub kind: ObserverKind,
    pub l_gain: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<ReducedOrder>,
    pub t_s: f64,
}

/// `λ² + 2ζω_nλ + ω_n²`, times `(λ + ω_n)` for order 3.
pub fn desired_char_poly(omega_n: f64, zeta: f64, order: usize) -> Result<Polynomial> {
    if !(omega_n > 0.0) || !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::Design(format!("need omega_n > 0 and 0 < zeta <= 1, got {omega_n}, {zeta}")));
    }
    let quad = Polynomial::new(vec![1.0, 2.0 * zeta * omega_n, omega_n * omega_n]);
    match order {
        2 => Ok(quad),
        3 => Ok(&quad * &Polynomial::new(vec![1.0, omega_n])),
        _ => Err(Error::Design(format!("order must be 2 or 3, got {order}"))),
    }
}

/// `(λ + a)ⁿ`
pub fn repeated_root_poly(a: f64, n: usize) -> Polynomial {
    Polynomial::from_roots(&vec![Complex64::new(-a, 0.0); n])
}

/// Rank after scaling every row, then every column, to unit max-norm.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let e = equilibrate(m).0;
    let sv = e.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

fn equilibrate(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut e = m.clone();
    let mut dr = DVector::from_element(m.nrows(), 1.0);
    let mut dc = DVector::from_element(m.ncols(), 1.0);
    for i in 0..e.nrows() {
        let r = e.row(i).amax();
        if r > 0.0 {
            dr[i] = 1.0 / r;
            e.row_mut(i).scale_mut(dr[i]);
        }
    }
    for j in 0..e.ncols() {
        let c = e.column(j).amax();
        if c > 0.0 {
            dc[j] = 1.0 / c;
            e.column_mut(j).scale_mut(dc[j]);
        }
    }
    (e, dr, dc)
}

/// Solves `M x = b` on the equilibrated system.
fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (e, dr, dc) = equilibrate(m);
    let y = e.lu().solve(&b.component_mul(&dr))?;
    let x = y.component_mul(&dc);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn controllability_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for k in 0..n {
        m.set_column(k, &col);
        col = a * col;
    }
    m
}

pub fn observability_matrix(a: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    controllability_matrix(&a.transpose(), c).transpose()
}

fn siso_parts(m: &StateSpaceModel) -> Result<(DVector<f64>, DVector<f64>)> {
    if m.inputs() != 1 || m.outputs() != 1 {
        return Err(Error::Design(format!(
            "single-input single-output model required, got {} inputs and {} outputs",
            m.inputs(),
            m.outputs()
        )));
    }
    Ok((m.b.column(0).clone_owned(), m.c.row(0).transpose()))
}

/// State-feedback row `K` placing `eig(A − BK)` at the roots of `phi_d`.
pub fn ackermann_k(m: &StateSpaceModel, phi_d: &Polynomial) -> Result<Vec<f64>> {
    let (b, _) = siso_parts(m)?;
    ackermann(&m.a, &b, phi_d, "controllability")
}

fn ackermann(a: &DMatrix<f64>, b: &DVector<f64>, phi: &Polynomial, what: &'static str) -> Result<Vec<f64>> {
    let n = a.nrows();
    if phi.degree() != n {
        return Err(Error::Design(format!("polynomial degree {} does not match order {n}", phi.degree())));
    }
    let mc = controllability_matrix(a, b);
    let rank = numerical_rank(&mc);
    if rank < n {
        return Err(Error::RankDeficient { what, rank, n });
    }
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    // row vector e_nᵀ·M_c⁻¹
    let w = solve(&mc.transpose(), &e_n).ok_or(Error::RankDeficient { what, rank: n - 1, n })?;
    let k = w.transpose() * phi.monic().eval_matrix(a);
    Ok(k.iter().copied().collect())
}

/// `G = −[C(A − BK)⁻¹B]⁻¹`
pub fn input_gain(m: &StateSpaceModel, k: &[f64]) -> Result<f64> {
    let (b, c) = siso_parts(m)?;
    let acl = closed_loop_matrix(m, k);
    let x = solve(&acl, &b).ok_or_else(|| Error::Design("A − BK is singular".into()))?;
    let dc = c.dot(&x);
    if dc == 0.0 || !dc.is_finite() {
        return Err(Error::Design("closed loop has no DC path to the output".into()));
    }
    Ok(-1.0 / dc)
}

pub fn closed_loop_matrix(m: &StateSpaceModel, k: &[f64]) -> DMatrix<f64> {
    let kr = DMatrix::from_row_slice(1, k.len(), k);
    &m.a - &m.b * kr
}

/// Ackermann design plus reference gain.
pub fn state_feedback(m: &StateSpaceModel, phi_d: &Polynomial, arch: Arch) -> Result<ControlDesign> {
    let k_fb = ackermann_k(m, phi_d)?;
    let g_in = input_gain(m, &k_fb)?;
    Ok(ControlDesign { k_fb, g_in, desired_poly: phi_d.clone(), arch })
}

/// Luenberger gain `L = φ_e(A)·M_o⁻¹·[0 … 0 1]ᵀ`.
pub fn full_order_observer(m: &StateSpaceModel, phi_e: &Polynomial, t_s: f64) -> Result<ObserverDesign> {
    let (_, c) = siso_parts(m)?;
    let n = m.order();
    let mo = observability_matrix(&m.a, &c);
    if phi_e.degree() != n {
        return Err(Error::Design(format!("polynomial degree {} does not match order {n}", phi_e.degree())));
    }
    let rank = numerical_rank(&mo);
    if rank < n {
        return Err(Error::RankDeficient { what: "observability", rank, n });
    }
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let y = solve(&mo, &e_n).ok_or(Error::RankDeficient { what: "observability", rank: n - 1, n })?;
    let l = phi_e.monic().eval_matrix(&m.a) * y;
    Ok(ObserverDesign { kind: ObserverKind::FullOrder, l_gain: l.iter().copied().collect(), reduced: None, t_s })
}

/// Estimator matrices of a partitioned model with scalar blocks.
pub fn reduced_order_terms(a11: f64, a12: f64, a21: f64, a22: f64, b1: f64, b2: f64, l: f64) -> ReducedOrder {
    let a_hat = a22 - l * a12;
    ReducedOrder { a_hat, b_hat: a_hat * l + a21 - l * a11, f_hat: b2 - l * b1 }
}

/// Velocity estimator for the current-driven plant with its pole at `−λ0`.
pub fn reduced_order_observer(p: &ActuatorParams, lambda0: f64, t_s: f64) -> Result<ObserverDesign> {
    if !(lambda0 > 0.0) {
        return Err(Error::Design(format!("lambda0 must be positive, got {lambda0}")));
    }
    let l = lambda0 - p.k_d / p.j;
    let reduced = ReducedOrder {
        a_hat: -lambda0,
        b_hat: -(lambda0 * lambda0 - p.k_d * lambda0 / p.j + p.k_s / p.j),
        f_hat: p.k_t / p.j,
    };
    Ok(ObserverDesign { kind: ObserverKind::ReducedOrder, l_gain: vec![l], reduced: Some(reduced), t_s })
}

/// Forward-Euler estimator update
/// `x̂(k) = Φ·x̂(k−1) + Γ_u·u(k−1) + Γ_y·y(k−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteObserver {
    pub kind: ObserverKind,
    pub phi: DMatrix<f64>,
    pub gamma_u: DVector<f64>,
    pub gamma_y: DVector<f64>,
    /// Reduced-order output gain `L` in `ω̂ = z + L·y`.
    pub l_out: f64,
}

impl DiscreteObserver {
    pub fn state_dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u: f64, y: f64) -> DVector<f64> {
        &self.phi * x + &self.gamma_u * u + &self.gamma_y * y
    }

    /// Full plant-state estimate given the current measurement.
    pub fn estimate(&self, x: &DVector<f64>, y: f64) -> Vec<f64> {
        match self.kind {
            ObserverKind::FullOrder => x.iter().copied().collect(),
            ObserverKind::ReducedOrder => vec![y, x[0] + self.l_out * y],
        }
    }
}

/// Largest `T_s` keeping `1 + T_s·λ` inside the unit circle for every `λ`.
pub fn max_stable_period(eigs: &[Complex64]) -> f64 {
    eigs.iter()
        .map(|l| if l.re < 0.0 { -2.0 * l.re / l.norm_sqr() } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

pub fn discretize_forward_euler(obs: &ObserverDesign, m: &StateSpaceModel) -> Result<DiscreteObserver> {
    let t_s = obs.t_s;
    if !(t_s > 0.0) {
        return Err(Error::Design(format!("t_s must be positive, got {t_s}")));
    }
    let (a_e, gamma_u, gamma_y, l_out) = match obs.kind {
        ObserverKind::FullOrder => {
            let (b, c) = siso_parts(m)?;
            let l = DVector::from_column_slice(&obs.l_gain);
            let a_e = &m.a - &l * c.transpose();
            (a_e, b * t_s, l * t_s, 0.0)
        }
        ObserverKind::ReducedOrder => {
            let r = obs
                .reduced
                .ok_or_else(|| Error::Design("reduced-order observer without estimator terms".into()))?;
            (
                DMatrix::from_element(1, 1, r.a_hat),
                DVector::from_element(1, r.f_hat * t_s),
                DVector::from_element(1, r.b_hat * t_s),
                obs.l_gain[0],
            )
        }
    };
    let eigs = eigenvalues(&a_e)?;
    let n = a_e.nrows();
    let phi = DMatrix::identity(n, n) + &a_e * t_s;
    if let Some(bad) = eigs.iter().find(|l| (Complex64::new(1.0, 0.0) + *l * t_s).norm() >= 1.0) {
        return Err(Error::UnstableDiscretization { eig: *bad, max_ts: max_stable_period(&eigs) });
    }
    Ok(DiscreteObserver { kind: obs.kind, phi, gamma_u, gamma_y, l_out })
}

/// Controller-plus-estimator `(A − BK − LC, L, −K, 0)`.
pub fn compensator_ss(m: &StateSpaceModel, k: &[f64], l: &[f64]) -> Result<StateSpaceModel> {
    let (_, c) = siso_parts(m)?;
    let n = m.order();
    let lv = DVector::from_column_slice(l);
    let a = closed_loop_matrix(m, k) - &lv * c.transpose();
    let cc = DMatrix::from_row_slice(1, n, k) * -1.0;
    Ok(StateSpaceModel::new(a, DMatrix::from_column_slice(n, 1, l), cc, DMatrix::zeros(1, 1))?)
}

/// Plant plus compensator, states `(x, x̂)`.
pub fn separation_matrix(m: &StateSpaceModel, k: &[f64], l: &[f64]) -> Result<DMatrix<f64>> {
    let (b, c) = siso_parts(m)?;
    let n = m.order();
    let kr = DMatrix::from_row_slice(1, n, k);
    let lv = DVector::from_column_slice(l);
    let comp = compensator_ss(m, k, l)?;
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&m.a);
    big.view_mut((0, n), (n, n)).copy_from(&(-(&b * &kr)));
    big.view_mut((n, 0), (n, n)).copy_from(&(&lv * c.transpose()));
    big.view_mut((n, n), (n, n)).copy_from(&comp.a);
    Ok(big)
}

/// Largest relative coefficient mismatch between the composite
/// characteristic polynomial and `det(λI − (A − BK))·det(λI − (A − LC))`.
pub fn separation_residual(m: &StateSpaceModel, k: &[f64], l: &[f64]) -> Result<f64> {
    let (_, c) = siso_parts(m)?;
    let big = crate::lti::char_poly(&separation_matrix(m, k, l)?);
    let lv = DVector::from_column_slice(l);
    let est = &m.a - &lv * c.transpose();
    let prod = &crate::lti::char_poly(&closed_loop_matrix(m, k)) * &crate::lti::char_poly(&est);
    let (x, y) = (big.coeffs(), prod.coeffs());
    if x.len() != y.len() {
        return Ok(f64::INFINITY);
    }
    // each coefficient is compared against the largest term it is built from
    let scale = root_magnitude_scale(y);
    Ok(x.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (a, b))| (a - b).abs() / scale[i])
        .fold(0.0, f64::max))
}

/// For a monic polynomial whose roots have magnitude ≈ `ρ`, coefficient `k`
/// is bounded by `C(n,k)·ρᵏ`; this is the natural scale for comparing it.
fn root_magnitude_scale(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let rho = (1..=n)
        .map(|k| (c[k].abs() / c[0].abs()).powf(1.0 / k as f64))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut binom = 1.0;
    (0..=n)
        .map(|k| {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            (binom * rho.powi(k as i32) * c[0].abs()).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Greedy nearest-neighbour pairing; returns the worst `|a − b|/|b|`.
pub fn spectrum_mismatch(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; a.len()];
    let mut worst = 0.0f64;
    for target in b {
        let (idx, d) = a
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, x)| (i, (x - target).norm()))
            .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        used[idx] = true;
        worst = worst.max(d / target.norm().max(f64::MIN_POSITIVE));
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionLoop {
    /// Reference to position.
    pub t: RationalTF,
    /// Position-loop transmission `K(sI − A)⁻¹B`.
    pub l_pos: RationalTF,
}

pub fn closed_loop_tfs(m: &StateSpaceModel, d: &ControlDesign) -> Result<PositionLoop> {
    let n = m.order();
    let cl = StateSpaceModel::new(closed_loop_matrix(m, &d.k_fb), &m.b * d.g_in, m.c.clone(), m.d.clone())?;
    let lp = StateSpaceModel::new(
        m.a.clone(),
        m.b.clone(),
        DMatrix::from_row_slice(1, n, &d.k_fb),
        DMatrix::zeros(1, 1),
    )?;
    Ok(PositionLoop { t: cl.to_tf(0, 0)?, l_pos: lp.to_tf(0, 0)? })
}

/// `θ/θ_ref` with the current loop `h_cl` inside the state-feedback loop.
///
/// `h_cl` is rescaled to unity DC gain first.
pub fn close_with_current_loop(g_m: &StateSpaceModel, h_cl: &RationalTF, d: &ControlDesign) -> Result<RationalTF> {
    let n = g_m.order();
    let h = h_cl.scale(1.0 / h_cl.dc_gain()?);
    let all = StateSpaceModel::new(g_m.a.clone(), g_m.b.clone(), DMatrix::identity(n, n), DMatrix::zeros(n, 1))?;
    let outs = (0..n).map(|i| all.to_tf(0, i)).collect::<std::result::Result<Vec<_>, _>>()?;
    let dm = outs[0].den().clone();
    let n_theta = outs
        .iter()
        .enumerate()
        .fold(Polynomial::zero(), |acc, (i, g)| &acc + &g.num().scale(g_m.c[(0, i)]));
    let fb = outs
        .iter()
        .zip(&d.k_fb)
        .fold(Polynomial::zero(), |acc, (g, &k)| &acc + &g.num().scale(k));
    let num = (&n_theta * h.num()).scale(d.g_in);
    let den = &(h.den() * &dm) + &(h.num() * &fb);
    Ok(RationalTF::new(num, den)?)
}
