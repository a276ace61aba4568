use nalgebra::{DMatrix, DVector};

use crate::lti::{RationalTF, StateSpaceModel};
use crate::Result;

/// Exact zero-order-hold discretization of a SISO model.
#[derive(Debug, Clone, PartialEq)]
pub struct ZohModel {
    pub phi: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl ZohModel {
    /// `Φ = e^{A·dt}`, `Γ = ∫₀^dt e^{Aτ}dτ·B` from one exponential of the
    /// augmented matrix `[[A, B], [0, 0]]·dt`.
    pub fn new(m: &StateSpaceModel, dt: f64) -> Self {
        let n = m.order();
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&m.a * dt));
        aug.view_mut((0, n), (n, 1)).copy_from(&(m.b.column(0) * dt));
        let e = aug.exp();
        Self {
            phi: e.view((0, 0), (n, n)).clone_owned(),
            gamma: e.view((0, n), (n, 1)).column(0).clone_owned(),
            c: m.c.row(0).transpose(),
            d: m.d[(0, 0)],
        }
    }

    pub fn from_tf(g: &RationalTF, dt: f64) -> Result<Self> {
        Ok(Self::new(&StateSpaceModel::from_tf(g)?, dt))
    }

    /// Output sequence for a piecewise-constant input, zero initial state.
    pub fn response(&self, u: &[f64]) -> Vec<f64> {
        let mut x = DVector::zeros(self.phi.nrows());
        u.iter()
            .map(|&uk| {
                let y = self.c.dot(&x) + self.d * uk;
                x = &self.phi * &x + &self.gamma * uk;
                y
            })
            .collect()
    }
}

/// Unit-step response sampled at `k·dt`, `k = 0…n−1`.
pub fn lti_step(g: &RationalTF, dt: f64, n: usize) -> Result<Vec<f64>> {
    Ok(ZohModel::from_tf(g, dt)?.response(&vec![1.0; n]))
}

/// Response to a sampled input held constant between samples.
pub fn lti_response(g: &RationalTF, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    Ok(ZohModel::from_tf(g, dt)?.response(u))
}
