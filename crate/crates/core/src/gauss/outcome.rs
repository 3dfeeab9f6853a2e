//! Outcome probabilities of the three-mode binary measurement.
//!
//! Each player projects its mode onto the squeezed state centred at `+x0`
//! (bit 1) or `-x0` (bit 0), with variance `sigma^2 / 2` in `x`. Summed over
//! the eight outcomes the probabilities are not normalized: the remainder is
//! the weight of rejected rounds.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{family_coefficients, overlap, tripartite_state, GaussianState, TripartiteParams};
use crate::error::{Error, Result};

/// Width and location of the measurement windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementModel {
    pub sigma: f64,
    pub x0: f64,
    /// Half-width of the binning window of the continuous model.
    pub epsilon: f64,
}

impl MeasurementModel {
    pub fn new(sigma: f64, x0: f64, epsilon: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(x0 >= 0.0) || !x0.is_finite() {
            return Err(Error::InvalidParameter(format!("x0 must be non-negative, got {x0}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be non-negative, got {epsilon}")));
        }
        Ok(Self { sigma, x0, epsilon })
    }
}

/// Squeezed single-mode state `diag(sigma^2, 1/sigma^2)` centred at `x = center`.
pub fn measurement_state(sigma: f64, center: f64) -> Result<GaussianState> {
    let gamma = DMatrix::from_diagonal(&DVector::from_vec(vec![sigma * sigma, 1.0 / (sigma * sigma)]));
    GaussianState::new(gamma, DVector::from_vec(vec![center, 0.0]))
}

/// Product of one measurement state per mode.
pub fn product_measurement_state(sigma: f64, centers: &[f64]) -> Result<GaussianState> {
    let n = centers.len();
    let mut gamma = DMatrix::zeros(2 * n, 2 * n);
    let mut d = DVector::zeros(2 * n);
    for (k, &c) in centers.iter().enumerate() {
        gamma[(2 * k, 2 * k)] = sigma * sigma;
        gamma[(2 * k + 1, 2 * k + 1)] = 1.0 / (sigma * sigma);
        d[2 * k] = c;
    }
    GaussianState::new(gamma, d)
}

/// Bits of the three players, `(S, R0, R1)`; bit 1 is the `+x0` window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OutcomeTriple(u8);

impl OutcomeTriple {
    pub fn from_bits(bits: [u8; 3]) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self((bits[0] << 2) | (bits[1] << 1) | bits[2])
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 8, "outcome index {index} out of range");
        Self(index as u8)
    }

    /// All eight outcomes in index order `000, 001, ..., 111`.
    pub fn all() -> impl Iterator<Item = Self> {
        (0..8).map(Self)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn bit(self, player: usize) -> u8 {
        (self.0 >> (2 - player)) & 1
    }

    pub fn bits(self) -> [u8; 3] {
        [self.bit(0), self.bit(1), self.bit(2)]
    }

    pub fn ones(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_one_hot(self) -> bool {
        self.ones() == 1
    }

    pub fn label(self) -> String {
        self.bits().iter().map(|b| char::from(b'0' + b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityTable {
    /// Absolute probabilities indexed by [`OutcomeTriple::index`].
    pub p_abs: [f64; 8],
    pub accept_mass: f64,
    /// Conditionals given acceptance.
    pub p_tilde: [f64; 8],
    /// Overlap prefactor `det((gamma + gamma_M)/2)^(-1/2)`.
    pub prefactor: f64,
    /// Variance `K1` along the collective direction `x_S + x_R0 + x_R1`, for family states.
    pub collective_variance: Option<f64>,
    /// Variance `K2` along the relative directions, for family states.
    pub relative_variance: Option<f64>,
}

impl ProbabilityTable {
    fn from_abs(
        p_abs: [f64; 8],
        prefactor: f64,
        collective_variance: Option<f64>,
        relative_variance: Option<f64>,
    ) -> Result<Self> {
        let accept_mass: f64 = p_abs.iter().sum();
        if !(accept_mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "acceptance mass underflows to {accept_mass:e}"
            )));
        }
        let p_tilde = p_abs.map(|p| p / accept_mass);
        Ok(Self { p_abs, accept_mass, p_tilde, prefactor, collective_variance, relative_variance })
    }

    pub fn p_abs(&self, t: OutcomeTriple) -> f64 {
        self.p_abs[t.index()]
    }

    pub fn p_tilde(&self, t: OutcomeTriple) -> f64 {
        self.p_tilde[t.index()]
    }

    /// Mean conditional probability of the three one-hot outcomes.
    pub fn one_hot_conditional(&self) -> f64 {
        OutcomeTriple::all().filter(|t| t.is_one_hot()).map(|t| self.p_tilde(t)).sum::<f64>() / 3.0
    }

    /// Total conditional probability of the five forbidden outcomes.
    pub fn forbidden_conditional(&self) -> f64 {
        OutcomeTriple::all().filter(|t| !t.is_one_hot()).map(|t| self.p_tilde(t)).sum()
    }

    /// `1 - (3 p~)^2`, the small parameter of the trit construction.
    pub fn eta(&self) -> f64 {
        1.0 - (3.0 * self.one_hot_conditional()).powi(2)
    }

    /// Conditional law of the bits of players `i` and `j`, indexed `2*b_i + b_j`.
    pub fn pair_conditional(&self, i: usize, j: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        for t in OutcomeTriple::all() {
            out[(2 * t.bit(i) + t.bit(j)) as usize] += self.p_tilde(t);
        }
        out
    }

    /// Conditional probability that player `i` reads bit 1.
    pub fn own_conditional(&self, i: usize) -> f64 {
        OutcomeTriple::all().filter(|t| t.bit(i) == 1).map(|t| self.p_tilde(t)).sum()
    }
}

/// Closed-form prefactor `C(a, sigma)`.
pub fn prefactor(a: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let f = family_coefficients(a)?;
    let s2 = sigma * sigma;
    let (c, b) = (f.c, f.b);
    Ok(8.0 / ((a - c + s2) * (b + c + 1.0 / s2) * ((a + 2.0 * c + s2) * (b - 2.0 * c + 1.0 / s2)).sqrt()))
}

/// Outcome table of the honest family state from the closed-form expressions.
pub fn outcome_table_closed_form(a: f64, model: &MeasurementModel) -> Result<ProbabilityTable> {
    let f = family_coefficients(a)?;
    let s2 = model.sigma * model.sigma;
    let x2 = model.x0 * model.x0;
    let k1 = a + 2.0 * f.c + s2;
    let k2 = a - f.c + s2;
    let c = prefactor(a, model.sigma)?;

    let none = c * (-4.0 * x2 / (3.0 * k1)).exp();
    let all = c * (-16.0 * x2 / (3.0 * k1)).exp();
    let two = c * (-4.0 * x2 * (s2 + f.b) / (k1 * k2)).exp();
    let one = c * (-8.0 * x2 / (3.0 * k2)).exp();

    let mut p_abs = [0.0; 8];
    for t in OutcomeTriple::all() {
        p_abs[t.index()] = match t.ones() {
            0 => none,
            1 => one,
            2 => two,
            _ => all,
        };
    }
    ProbabilityTable::from_abs(p_abs, c, Some(k1), Some(k2))
}

/// Outcome table of an arbitrary three-mode state, one overlap per entry.
pub fn outcome_table_by_overlap(state: &GaussianState, model: &MeasurementModel) -> Result<ProbabilityTable> {
    if state.n_modes() != 3 {
        return Err(Error::Dimension(format!("expected 3 modes, got {}", state.n_modes())));
    }
    let mut p_abs = [0.0; 8];
    for t in OutcomeTriple::all() {
        let centers = t.bits().map(|b| if b == 1 { model.x0 } else { -model.x0 });
        let m = product_measurement_state(model.sigma, &centers)?;
        p_abs[t.index()] = overlap(state, &m)?;
    }
    let centered = state.with_displacement(DVector::zeros(6))?;
    let prefactor = overlap(&centered, &product_measurement_state(model.sigma, &[0.0; 3])?)?;
    ProbabilityTable::from_abs(p_abs, prefactor, None, None)
}

/// Outcome table of the family member `a` with per-mode displacement multipliers.
///
/// The honest configuration uses the closed form; shifted ones go through
/// [`overlap`] entry by entry.
pub fn outcome_table(a: f64, model: &MeasurementModel, multipliers: [f64; 3]) -> Result<ProbabilityTable> {
    if multipliers == [1.0; 3] {
        return outcome_table_closed_form(a, model);
    }
    let state = tripartite_state(&TripartiteParams::new(a, model.x0).with_multipliers(multipliers))?;
    let mut table = outcome_table_by_overlap(&state, model)?;
    let f = family_coefficients(a)?;
    let s2 = model.sigma * model.sigma;
    table.collective_variance = Some(a + 2.0 * f.c + s2);
    table.relative_variance = Some(a - f.c + s2);
    Ok(table)
}

/// Large-`a` estimate `1/3 - (4/9) k` of the one-hot conditional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticEstimate {
    pub value: f64,
    /// `exp(-(4/3)(x0/sigma)^2)`.
    pub k: f64,
    /// False once the estimate leaves `[0, 1/3]` (`k > 3/4`); the value is not clamped.
    pub within_validity: bool,
}

pub fn asymptotic_p_tilde(x0: f64, sigma: f64) -> Result<AsymptoticEstimate> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let k = (-(4.0 / 3.0) * (x0 / sigma).powi(2)).exp();
    let value = 1.0 / 3.0 - 4.0 * k / 9.0;
    Ok(AsymptoticEstimate { value, k, within_validity: k <= 0.75 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(sigma: f64, x0: f64) -> MeasurementModel {
        MeasurementModel::new(sigma, x0, 0.0).unwrap()
    }

    #[test]
    fn prefactor_normalized_at_vacuum() {
        assert!((prefactor(1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_point_frozen() {
        // Independent numpy evaluation at (a, sigma, x0) = (3, 0.2, 1).
        let t = outcome_table_closed_form(3.0, &model(0.2, 1.0)).unwrap();
        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        assert!(rel(t.p_abs(OutcomeTriple::from_bits([1, 0, 0])), 0.013976455245) < 1e-9);
        assert!(rel(t.p_abs(OutcomeTriple::from_bits([0, 0, 0])), 0.000176349978) < 1e-8);
        assert!(rel(t.p_abs(OutcomeTriple::from_bits([1, 1, 0])), 9.654124e-5) < 1e-6);
        assert!(rel(t.p_abs(OutcomeTriple::from_bits([1, 1, 1])), 5.81196e-11) < 1e-5);
        assert!((t.accept_mass - 0.0423953).abs() < 1e-7);
    }

    #[test]
    fn two_ones_to_one_hot_ratio() {
        for (a, s, x0) in [(3.0, 0.2, 1.0), (1.5, 0.7, 0.4), (20.0, 1.3, 2.0)] {
            let t = outcome_table_closed_form(a, &model(s, x0)).unwrap();
            let k1 = t.collective_variance.unwrap();
            let ratio = t.p_abs(OutcomeTriple::from_bits([0, 1, 1])) / t.p_abs(OutcomeTriple::from_bits([0, 1, 0]));
            assert!((ratio - (-4.0 * x0 * x0 / (3.0 * k1)).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_can_exceed_one() {
        let t = outcome_table_closed_form(1.0, &model(1.0, 0.0)).unwrap();
        assert!((t.accept_mass - 8.0).abs() < 1e-12);
        assert!(t.p_tilde.iter().all(|&p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn overlap_route_reproduces_prefactor() {
        let s = tripartite_state(&TripartiteParams::new(2.5, 0.8)).unwrap();
        let t = outcome_table_by_overlap(&s, &model(0.6, 0.8)).unwrap();
        assert!((t.prefactor - prefactor(2.5, 0.6).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_examples() {
        let e = asymptotic_p_tilde(1.0, 1.0).unwrap();
        assert!((e.value - (1.0 / 3.0 - 4.0 / 9.0 * (-4f64 / 3.0).exp())).abs() < 1e-15);
        assert!(e.within_validity);
        let e = asymptotic_p_tilde(0.0, 1.0).unwrap();
        assert!((e.value + 1.0 / 9.0).abs() < 1e-15);
        assert!(!e.within_validity);
        assert!((asymptotic_p_tilde(50.0, 1.0).unwrap().value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn triple_indexing() {
        let t = OutcomeTriple::from_bits([1, 0, 1]);
        assert_eq!(t.index(), 5);
        assert_eq!(t.bits(), [1, 0, 1]);
        assert_eq!(t.label(), "101");
        assert_eq!(OutcomeTriple::all().filter(|t| t.is_one_hot()).count(), 3);
    }
}
