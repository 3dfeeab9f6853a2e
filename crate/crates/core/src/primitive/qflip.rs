//! Attempted three-valued readout of the same family.
//!
//! Each player bins its quadrature into `+x0`, `0` or `-x0` (symbols 2, 1, 0)
//! directly. A usable Q-flip would need the six all-different outcomes to
//! carry the whole conditional mass in equal shares.

use serde::Serialize;

use crate::error::Result;
use crate::gauss::{gamma_of_a, overlap, product_measurement_state, GaussianState, MeasurementModel};


/// Joint probabilities over `(q_S, q_R0, q_R1)`, index `9 q_S + 3 q_R0 + q_R1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QFlipTable {
    pub p_abs: [f64; 27],
    pub p_tilde: [f64; 27],
}

impl QFlipTable {
    pub fn symbols(index: usize) -> [usize; 3] {
        [index / 9, (index / 3) % 3, index % 3]
    }

    pub fn index(symbols: [usize; 3]) -> usize {
        9 * symbols[0] + 3 * symbols[1] + symbols[2]
    }

    pub fn is_all_different(index: usize) -> bool {
        let [a, b, c] = Self::symbols(index);
        a != b && b != c && a != c
    }

    /// Largest deviation of an all-different conditional from 1/6 plus the
    /// total conditional mass of the 21 other outcomes.
    pub fn uniformity_defect(&self) -> f64 {
        let mut max_dev = 0.0f64;
        let mut forbidden = 0.0;
        for (i, &p) in self.p_tilde.iter().enumerate() {
            if Self::is_all_different(i) {
                max_dev = max_dev.max((p - 1.0 / 6.0).abs());
            } else {
                forbidden += p;
            }
        }
        max_dev + forbidden
    }
}

/// The state is taken centred (`d = 0`), matching the symmetric placement of
/// the three windows around the origin.
pub fn direct_qflip_table(a: f64, model: &MeasurementModel) -> Result<QFlipTable> {
    let state = GaussianState::new(gamma_of_a(a)?, nalgebra::DVector::zeros(6))?;
    let centers = [-model.x0, 0.0, model.x0];
    let mut p_abs = [0.0; 27];
    for (i, p) in p_abs.iter_mut().enumerate() {
        let q = QFlipTable::symbols(i);
        let m = product_measurement_state(model.sigma, &q.map(|s| centers[s]))?;
        *p = overlap(&state, &m)?;
    }
    let mass: f64 = p_abs.iter().sum();
    let p_tilde = p_abs.map(|p| p / mass);
    Ok(QFlipTable { p_abs, p_tilde })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_at_zero_width() {
        let t = direct_qflip_table(3.0, &MeasurementModel::new(0.3, 0.0, 0.0).unwrap()).unwrap();
        assert!(t.p_tilde.iter().all(|&p| (p - 1.0 / 27.0).abs() < 1e-14));
    }

    #[test]
    fn player_exchange_symmetry() {
        let t = direct_qflip_table(2.4, &MeasurementModel::new(0.4, 1.3, 0.0).unwrap()).unwrap();
        for i in 0..27 {
            let [a, b, c] = QFlipTable::symbols(i);
            for perm in [[b, a, c], [a, c, b], [c, b, a], [b, c, a]] {
                let j = QFlipTable::index(perm);
                assert!((t.p_abs[i] - t.p_abs[j]).abs() <= 1e-14 * t.p_abs[i].max(1e-300));
            }
        }
    }
}
