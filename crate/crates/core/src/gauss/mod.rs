//! Gaussian states in Wigner-function representation.
//!
//! A state on `n` modes is a pair `(gamma, d)`: a real symmetric `2n x 2n`
//! covariance matrix and a displacement vector, quadratures ordered
//! `(x_1, p_1, ..., x_n, p_n)`. The Wigner function is
//!
//! ```text
//! W(xi) = exp(-(xi - d)^T gamma^-1 (xi - d)) / (pi^n sqrt(det gamma))
//! ```
//!
//! so the vacuum is `gamma = I` and an `x` quadrature has variance
//! `gamma_xx / 2`. Physical states satisfy `gamma + i*Omega >= 0`.

mod family;
mod outcome;

pub use family::{family_coefficients, gamma_of_a, tripartite_state, FamilyCoefficients, TripartiteParams};
pub use outcome::{
    asymptotic_p_tilde, measurement_state, outcome_table, product_measurement_state, outcome_table_by_overlap,
    outcome_table_closed_form, prefactor, AsymptoticEstimate, MeasurementModel, OutcomeTriple,
    ProbabilityTable,
};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Slack allowed on `min eig(gamma + i*Omega) >= 0`.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Entry-wise symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Block-diagonal symplectic form with blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Smallest eigenvalue of the Hermitian matrix `re + i*im`.
///
/// Uses the real symmetric embedding `[[re, -im], [im, re]]`, whose spectrum
/// is the Hermitian spectrum with every eigenvalue doubled.
pub fn min_eigenvalue_hermitian(re: &DMatrix<f64>, im: &DMatrix<f64>) -> f64 {
    let n = re.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(re);
    big.view_mut((n, n), (n, n)).copy_from(re);
    big.view_mut((n, 0), (n, n)).copy_from(im);
    big.view_mut((0, n), (n, n)).copy_from(&(-im));
    // Symmetrize away round-off so the symmetric solver sees exact symmetry.
    let big = (&big + big.transpose()) * 0.5;
    SymmetricEigen::new(big).eigenvalues.min()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    gamma: DMatrix<f64>,
    d: DVector<f64>,
}

impl GaussianState {
    /// Validates shape, symmetry and the uncertainty relation.
    pub fn new(gamma: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let dim = gamma.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || gamma.ncols() != dim {
            return Err(Error::Dimension(format!(
                "covariance must be 2n x 2n, got {}x{}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        if d.len() != dim {
            return Err(Error::Dimension(format!(
                "displacement has length {}, covariance has dimension {dim}",
                d.len()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                let (u, v) = (gamma[(i, j)], gamma[(j, i)]);
                if (u - v).abs() > SYMMETRY_TOL * u.abs().max(v.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i}, {j}): {u} vs {v}"
                    )));
                }
            }
        }
        if gamma.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry".into()));
        }
        let state = Self { gamma, d };
        let min_eig = state.min_physical_eigenvalue();
        if min_eig < -PHYSICALITY_TOL {
            return Err(Error::NotPhysical { min_eig });
        }
        Ok(state)
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            gamma: DMatrix::identity(2 * n_modes, 2 * n_modes),
            d: DVector::zeros(2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.nrows() / 2
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.d
    }

    /// Same covariance, new displacement.
    pub fn with_displacement(&self, d: DVector<f64>) -> Result<Self> {
        if d.len() != self.d.len() {
            return Err(Error::Dimension(format!(
                "displacement has length {}, expected {}",
                d.len(),
                self.d.len()
            )));
        }
        Ok(Self { gamma: self.gamma.clone(), d })
    }

    /// Adds `delta[k]` to the `x` displacement of mode `k`.
    pub fn shift_x(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.n_modes() {
            return Err(Error::Dimension(format!(
                "{} shifts for {} modes",
                delta.len(),
                self.n_modes()
            )));
        }
        let mut d = self.d.clone();
        for (k, dx) in delta.iter().enumerate() {
            d[2 * k] += dx;
        }
        Ok(Self { gamma: self.gamma.clone(), d })
    }

    /// `min eig(gamma + i*Omega)`; non-negative for physical states.
    pub fn min_physical_eigenvalue(&self) -> f64 {
        min_eigenvalue_hermitian(&self.gamma, &symplectic_form(self.n_modes()))
    }
}

/// Wigner function of `state` at phase-space point `xi`.
pub fn wigner_eval(state: &GaussianState, xi: &[f64]) -> Result<f64> {
    let dim = state.gamma.nrows();
    if xi.len() != dim {
        return Err(Error::Dimension(format!("point has length {}, expected {dim}", xi.len())));
    }
    let lu = state.gamma.clone().lu();
    let det = lu.determinant();
    if !(det > 0.0) {
        return Err(Error::Singular { det });
    }
    let diff = DVector::from_column_slice(xi) - &state.d;
    let solved = lu.solve(&diff).ok_or(Error::Singular { det })?;
    let quad = diff.dot(&solved);
    let n = state.n_modes() as i32;
    Ok((-quad).exp() / (PI.powi(n) * det.sqrt()))
}

/// Normalized overlap `(2 pi)^n * integral W1 W2`, i.e. `Tr(rho_1 rho_2)`.
///
/// ```text
/// det((g1 + g2)/2)^(-1/2) * exp(-dd^T (g1 + g2)^-1 dd),   dd = d1 - d2
/// ```
pub fn overlap(s1: &GaussianState, s2: &GaussianState) -> Result<f64> {
    if s1.gamma.nrows() != s2.gamma.nrows() {
        return Err(Error::Dimension(format!(
            "overlap of {}-mode and {}-mode states",
            s1.n_modes(),
            s2.n_modes()
        )));
    }
    let sum = &s1.gamma + &s2.gamma;
    let lu = sum.clone().lu();
    let det_sum = lu.determinant();
    if !(det_sum > 0.0) {
        return Err(Error::Singular { det: det_sum });
    }
    let dd = &s1.d - &s2.d;
    let solved = lu.solve(&dd).ok_or(Error::Singular { det: det_sum })?;
    let n = s1.n_modes() as i32;
    let det_half = det_sum / 2f64.powi(2 * n);
    Ok((-dd.dot(&solved)).exp() / det_half.sqrt())
}

fn check_mode_list(n_modes: usize, modes: &[usize], allow_empty: bool) -> Result<()> {
    if modes.is_empty() && !allow_empty {
        return Err(Error::InvalidModes("empty mode list".into()));
    }
    for (i, &m) in modes.iter().enumerate() {
        if m >= n_modes {
            return Err(Error::InvalidModes(format!("mode {m} out of range for {n_modes} modes")));
        }
        if modes[..i].contains(&m) {
            return Err(Error::InvalidModes(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

/// Reduced state on `keep` (in the given order): the matching sub-blocks.
pub fn partial_trace(state: &GaussianState, keep: &[usize]) -> Result<GaussianState> {
    check_mode_list(state.n_modes(), keep, false)?;
    let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let gamma = state.gamma.select_rows(&idx).select_columns(&idx);
    let d = state.d.select_rows(&idx);
    Ok(GaussianState { gamma, d })
}

/// Smallest eigenvalue of the partially transposed state's `gamma' + i*Omega`.
///
/// Partial transposition on `transposed` flips the sign of those modes' `p`
/// quadratures. A negative value certifies entanglement across the cut.
pub fn npt_min_eigenvalue(state: &GaussianState, transposed: &[usize]) -> Result<f64> {
    check_mode_list(state.n_modes(), transposed, true)?;
    let mut gamma = state.gamma.clone();
    for &m in transposed {
        let p = 2 * m + 1;
        gamma.row_mut(p).neg_mut();
        gamma.column_mut(p).neg_mut();
    }
    Ok(min_eigenvalue_hermitian(&gamma, &symplectic_form(state.n_modes())))
}

/// Joint distribution of the `x` quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct XMarginal {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

pub fn x_marginal(state: &GaussianState) -> XMarginal {
    let idx: Vec<usize> = (0..state.n_modes()).map(|k| 2 * k).collect();
    XMarginal {
        mean: state.d.select_rows(&idx),
        covariance: state.gamma.select_rows(&idx).select_columns(&idx) * 0.5,
    }
}

/// Writes a matrix as CSV rows at 12 significant digits.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.11e}", m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
