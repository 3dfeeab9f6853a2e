//! Where in `(a, sigma)` the W-flip conditions hold asymptotically.
//!
//! Every outcome probability decays like `exp(-rate * x0^2)`. The W-flip
//! needs every forbidden outcome to decay strictly faster than the one-hot
//! outcomes, so that their conditionals vanish as `x0` grows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::family_coefficients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    /// Smallest `a` for which the conditions hold at this `sigma`.
    pub a_boundary_at_sigma: f64,
}

/// Decay rates (per `x0^2`) of the one-hot outcome and of the three
/// forbidden classes: none set, all set, two set.
fn decay_rates(a: f64, sigma: f64) -> Result<(f64, [f64; 3])> {
    let f = family_coefficients(a)?;
    let s2 = sigma * sigma;
    let k1 = a + 2.0 * f.c + s2;
    let k2 = a - f.c + s2;
    let one_hot = 8.0 / (3.0 * k2);
    Ok((one_hot, [4.0 / (3.0 * k1), 16.0 / (3.0 * k1), 4.0 / (3.0 * k1) + 8.0 / (3.0 * k2)]))
}

fn feasible_at(a: f64, sigma: f64) -> Result<bool> {
    let (one_hot, forbidden) = decay_rates(a, sigma)?;
    Ok(forbidden.iter().all(|&r| r > one_hot))
}

/// Closed form of the binding constraint: `(5 sqrt(9a^2-8) - 9a)/4 - sigma^2`.
/// Positive exactly when the W-flip is feasible.
pub fn feasibility_margin(a: f64, sigma: f64) -> Result<f64> {
    let f = family_coefficients(a)?;
    Ok((5.0 * f.root - 9.0 * a) / 4.0 - sigma * sigma)
}

/// Bisection for the smallest feasible `a` at fixed `sigma`.
pub fn a_boundary(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut lo = 2.0 * 2f64.sqrt() / 3.0;
    let mut hi = 2.0;
    while !feasible_at(hi, sigma)? {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible_at(mid, sigma)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn wflip_feasible(a: f64, sigma: f64) -> Result<FeasibilityVerdict> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {sigma}")));
    }
    Ok(FeasibilityVerdict { feasible: feasible_at(a, sigma)?, a_boundary_at_sigma: a_boundary(sigma)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{outcome_table_closed_form, MeasurementModel, OutcomeTriple};

    #[test]
    fn boundary_at_small_sigma() {
        let b = a_boundary(1e-3).unwrap();
        assert!((b - 5.0 * 2f64.sqrt() / 6.0).abs() < 1e-3, "{b}");
    }

    #[test]
    fn predicate_matches_closed_inequality() {
        for a in [1.0, 1.1, 1.2, 1.5, 2.0, 3.0, 8.0] {
            for sigma in [0.0, 0.05, 0.1, 0.3, 0.6, 1.0, 2.0] {
                let m = feasibility_margin(a, sigma).unwrap();
                if m.abs() > 1e-9 {
                    assert_eq!(feasible_at(a, sigma).unwrap(), m > 0.0, "a = {a}, sigma = {sigma}");
                }
            }
        }
    }

    fn none_to_one_hot(a: f64, sigma: f64, x0: f64) -> f64 {
        let t = outcome_table_closed_form(a, &MeasurementModel::new(sigma, x0, 0.0).unwrap()).unwrap();
        t.p_tilde(OutcomeTriple::from_bits([0, 0, 0])) / t.p_tilde(OutcomeTriple::from_bits([1, 0, 0]))
    }

    #[test]
    fn feasible_point_suppresses_forbidden_outcomes() {
        assert!(wflip_feasible(2.0, 0.1).unwrap().feasible);
        let ratios: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x0| none_to_one_hot(2.0, 0.1, x0)).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
        assert!(ratios[3] < 1e-6);
    }

    #[test]
    fn vacuum_never_feasible() {
        for sigma in [0.0, 0.01, 0.3, 1.0, 5.0] {
            assert!(!wflip_feasible(1.0, sigma).unwrap().feasible);
        }
        let ratios: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&x0| none_to_one_hot(1.0, 0.3, x0)).collect();
        assert!(ratios.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn domain_error_below_edge() {
        assert!(matches!(wflip_feasible(0.5, 0.1), Err(Error::Domain { .. })));
    }
}
