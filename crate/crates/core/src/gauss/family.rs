use nalgebra::{DMatrix, DVector};

use super::GaussianState;
use crate::error::{Error, Result};

/// Coefficients of the symmetric three-mode pure state with diagonal entry `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyCoefficients {
    pub a: f64,
    /// Diagonal `p` entry.
    pub b: f64,
    /// Cross-mode `x` correlation; the `p` correlation is `-c`.
    pub c: f64,
    /// `sqrt(9a^2 - 8)`.
    pub root: f64,
}

pub fn family_coefficients(a: f64) -> Result<FamilyCoefficients> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain { a });
    }
    let disc = 9.0 * a * a - 8.0;
    // Tolerate round-off at the edge a = 2*sqrt(2)/3.
    if disc < -1e-12 {
        return Err(Error::Domain { a });
    }
    let root = disc.max(0.0).sqrt();
    Ok(FamilyCoefficients { a, b: (5.0 * a - root) / 4.0, c: (a - root) / 4.0, root })
}

/// Covariance matrix of the family member with parameter `a`.
pub fn gamma_of_a(a: f64) -> Result<DMatrix<f64>> {
    let FamilyCoefficients { b, c, .. } = family_coefficients(a)?;
    let mut g = DMatrix::zeros(6, 6);
    for i in 0..3 {
        g[(2 * i, 2 * i)] = a;
        g[(2 * i + 1, 2 * i + 1)] = b;
        for j in 0..3 {
            if i != j {
                g[(2 * i, 2 * j)] = c;
                g[(2 * i + 1, 2 * j + 1)] = -c;
            }
        }
    }
    Ok(g)
}

/// Parameters of a (possibly shifted) member of the family.
///
/// The honest displacement puts `-x0/3` on every `x` quadrature. A player who
/// multiplies its component by `K` moves it to `-K*x0/3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripartiteParams {
    pub a: f64,
    pub x0: f64,
    pub multipliers: [f64; 3],
}

impl TripartiteParams {
    pub fn new(a: f64, x0: f64) -> Self {
        Self { a, x0, multipliers: [1.0; 3] }
    }

    pub fn with_multipliers(mut self, multipliers: [f64; 3]) -> Self {
        self.multipliers = multipliers;
        self
    }

    pub fn displacement(&self) -> DVector<f64> {
        let mut d = DVector::zeros(6);
        for (k, m) in self.multipliers.iter().enumerate() {
            d[2 * k] = -m * self.x0 / 3.0;
        }
        d
    }
}

pub fn tripartite_state(params: &TripartiteParams) -> Result<GaussianState> {
    if !params.x0.is_finite() || params.multipliers.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidParameter("non-finite displacement".into()));
    }
    GaussianState::new(gamma_of_a(params.a)?, params.displacement())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::npt_min_eigenvalue;

    #[test]
    fn coefficients_at_two() {
        let f = family_coefficients(2.0).unwrap();
        let r7 = 7f64.sqrt();
        assert!((f.b - (5.0 - r7) / 2.0).abs() < 1e-15);
        assert!((f.c - (1.0 - r7) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_edge() {
        assert!(matches!(gamma_of_a(0.9), Err(Error::Domain { .. })));
        assert!(matches!(gamma_of_a(-1.0), Err(Error::Domain { .. })));
        let edge = 2.0 * 2f64.sqrt() / 3.0;
        let f = family_coefficients(edge).unwrap();
        assert!(f.root.abs() < 1e-6);
    }

    #[test]
    fn a_one_is_vacuum() {
        let g = gamma_of_a(1.0).unwrap();
        assert!((g - DMatrix::identity(6, 6)).abs().max() < 1e-15);
    }

    #[test]
    fn family_is_pure() {
        for a in [1.0, 1.3, 3.0, 40.0] {
            let g = gamma_of_a(a).unwrap();
            assert!((g.determinant() - 1.0).abs() < 1e-9 * a.powi(2), "a = {a}");
            let s = tripartite_state(&TripartiteParams::new(a, 1.0)).unwrap();
            assert!(s.min_physical_eigenvalue().abs() < 1e-9);
        }
    }

    #[test]
    fn npt_values_frozen() {
        // Values from an independent numpy eigen-decomposition.
        for (a, expected) in [(1.01, -0.026746), (2.0, -0.613930), (10.0, -0.882610)] {
            let s = tripartite_state(&TripartiteParams::new(a, 1.0)).unwrap();
            for cut in 0..3 {
                let v = npt_min_eigenvalue(&s, &[cut]).unwrap();
                assert!((v - expected).abs() < 1e-6, "a = {a}, cut {cut}: {v}");
            }
        }
    }
}
