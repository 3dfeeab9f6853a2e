use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{bin_two, Bit};
use crate::error::{Error, Result};
use crate::gauss::{x_marginal, GaussianState, MeasurementModel, OutcomeTriple, ProbabilityTable};

/// Draws accepted triples with the absolute probabilities of a table.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    cumulative: [f64; 8],
    accept_mass: f64,
}

impl DiscreteSampler {
    /// Fails when the table's mass exceeds one, i.e. it does not describe
    /// a sub-probability over accepted rounds.
    pub fn new(table: &ProbabilityTable) -> Result<Self> {
        if table.p_abs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("table has a negative or non-finite entry".into()));
        }
        if table.accept_mass > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "acceptance mass {} exceeds 1; the table is not a distribution over outcomes",
                table.accept_mass
            )));
        }
        let mut cumulative = [0.0; 8];
        let mut acc = 0.0;
        for (c, p) in cumulative.iter_mut().zip(table.p_abs) {
            acc += p;
            *c = acc;
        }
        Ok(Self { cumulative, accept_mass: acc })
    }

    pub fn accept_mass(&self) -> f64 {
        self.accept_mass
    }

    /// `None` is a rejected round.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<OutcomeTriple> {
        let u: f64 = rng.random();
        if u >= self.accept_mass {
            return None;
        }
        let idx = self.cumulative.iter().position(|&c| u < c).unwrap_or(7);
        Some(OutcomeTriple::from_index(idx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSample {
    pub values: [f64; 3],
    pub bins: [Option<Bit>; 3],
}

impl ContinuousSample {
    /// The triple if every player accepted.
    pub fn triple(&self) -> Option<OutcomeTriple> {
        let [a, b, c] = self.bins;
        Some(OutcomeTriple::from_bits([a?.as_u8(), b?.as_u8(), c?.as_u8()]))
    }
}

/// Samples the `x` quadratures of a three-mode state and reads them out
/// through Gaussian measurement noise of variance `sigma^2 / 2`.
#[derive(Debug, Clone)]
pub struct ContinuousSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
    noise_sd: f64,
    model: MeasurementModel,
}

impl ContinuousSampler {
    pub fn new(state: &GaussianState, model: MeasurementModel) -> Result<Self> {
        if state.n_modes() != 3 {
            return Err(Error::Dimension(format!("expected 3 modes, got {}", state.n_modes())));
        }
        bin_two(0.0, model.x0, model.epsilon)?;
        let marginal = x_marginal(state);
        let det = marginal.covariance.determinant();
        let chol = Cholesky::new(marginal.covariance).ok_or(Error::Singular { det })?;
        Ok(Self {
            mean: marginal.mean,
            factor: chol.l(),
            noise_sd: model.sigma / std::f64::consts::SQRT_2,
            model,
        })
    }

    /// Quadrature values before measurement noise.
    pub fn latent<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        let z = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.mean + &self.factor * z;
        [x[0], x[1], x[2]]
    }

    /// Noisy readout of one quadrature value and its bin.
    pub fn observe<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> (f64, Option<Bit>) {
        let v = x + self.noise_sd * rng.sample::<f64, _>(StandardNormal);
        let bin = bin_two(v, self.model.x0, self.model.epsilon).expect("window validated at construction");
        (v, bin)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContinuousSample {
        let latent = self.latent(rng);
        let mut values = [0.0; 3];
        let mut bins = [None; 3];
        for k in 0..3 {
            (values[k], bins[k]) = self.observe(latent[k], rng);
        }
        ContinuousSample { values, bins }
    }
}
