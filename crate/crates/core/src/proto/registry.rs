//! Who holds which mode of which instance, and what measuring it yields.
//!
//! Players only measure `x` quadratures and the Wigner function of every
//! state here is a positive Gaussian, so joint readout statistics are those
//! of the classical `x` marginal. In discrete mode the three readouts of an
//! instance are drawn jointly from its outcome table at the first
//! measurement; in continuous mode latent quadratures are drawn at creation
//! and each measurement adds readout noise.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PlayerId;
use crate::error::{Error, Result};
use crate::gauss::{outcome_table_by_overlap, GaussianState, MeasurementModel, OutcomeTriple};
use crate::primitive::{Bit, ContinuousSampler, DiscreteSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct QuantumInstance {
    pub id: u32,
    source: usize,
    owner: [Option<PlayerId>; 3],
    /// Accumulated `x` shifts per mode.
    offset: [f64; 3],
    latent: Option<[f64; 3]>,
    joint: Option<Option<OutcomeTriple>>,
    measured: [Option<Option<Bit>>; 3],
}

impl QuantumInstance {
    pub fn owner(&self, mode: PlayerId) -> Option<PlayerId> {
        self.owner[mode.index()]
    }

    pub fn offset(&self, mode: PlayerId) -> f64 {
        self.offset[mode.index()]
    }

    pub fn is_measured(&self, mode: PlayerId) -> bool {
        self.measured[mode.index()].is_some()
    }
}

pub struct QuantumRegistry {
    mode: SamplingMode,
    model: MeasurementModel,
    sources: Vec<GaussianState>,
    continuous: Vec<ContinuousSampler>,
    discrete: HashMap<(usize, [u64; 3]), DiscreteSampler>,
    instances: Vec<QuantumInstance>,
    rng: ChaCha8Rng,
}

impl QuantumRegistry {
    pub fn new(mode: SamplingMode, model: MeasurementModel, rng: ChaCha8Rng) -> Self {
        Self {
            mode,
            model,
            sources: Vec::new(),
            continuous: Vec::new(),
            discrete: HashMap::new(),
            instances: Vec::new(),
            rng,
        }
    }

    /// Convenience constructor for tests.
    pub fn seeded(mode: SamplingMode, model: MeasurementModel, seed: u64) -> Self {
        Self::new(mode, model, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instance(&self, id: u32) -> Option<&QuantumInstance> {
        id.checked_sub(1).and_then(|i| self.instances.get(i as usize))
    }

    fn instance_mut(&mut self, id: u32) -> Result<&mut QuantumInstance> {
        id.checked_sub(1)
            .and_then(|i| self.instances.get_mut(i as usize))
            .ok_or_else(|| Error::Invariant(format!("no instance {id}")))
    }

    /// Creates `count` instances of `state`, every mode held by `preparer`.
    pub fn prepare(&mut self, state: &GaussianState, count: u32, preparer: PlayerId) -> Result<()> {
        if state.n_modes() != 3 {
            return Err(Error::Dimension(format!("expected 3 modes, got {}", state.n_modes())));
        }
        let source = self.sources.len();
        self.sources.push(state.clone());
        if self.mode == SamplingMode::Continuous {
            self.continuous.push(ContinuousSampler::new(state, self.model)?);
        }
        for _ in 0..count {
            let latent = match self.mode {
                SamplingMode::Continuous => Some(self.continuous[source].latent(&mut self.rng)),
                SamplingMode::Discrete => None,
            };
            let id = self.instances.len() as u32 + 1;
            self.instances.push(QuantumInstance {
                id,
                source,
                owner: [Some(preparer); 3],
                offset: [0.0; 3],
                latent,
                joint: None,
                measured: [None; 3],
            });
        }
        Ok(())
    }

    pub fn transfer(&mut self, id: u32, mode: PlayerId, from: PlayerId, to: PlayerId) -> Result<()> {
        let inst = self.instance_mut(id)?;
        if inst.owner[mode.index()] != Some(from) {
            return Err(Error::Invariant(format!("{from:?} does not hold mode {mode:?} of instance {id}")));
        }
        if inst.measured[mode.index()].is_some() {
            return Err(Error::Invariant(format!("mode {mode:?} of instance {id} already measured")));
        }
        inst.owner[mode.index()] = Some(to);
        Ok(())
    }

    /// Local displacement of one mode's `x` quadrature by its holder.
    pub fn shift(&mut self, id: u32, mode: PlayerId, by: PlayerId, delta: f64) -> Result<()> {
        let inst = self.instance_mut(id)?;
        if inst.owner[mode.index()] != Some(by) {
            return Err(Error::Invariant(format!("{by:?} shifts mode {mode:?} of instance {id} it does not hold")));
        }
        if inst.joint.is_some() || inst.measured[mode.index()].is_some() {
            return Err(Error::Invariant(format!("instance {id} shifted after measurement")));
        }
        inst.offset[mode.index()] += delta;
        Ok(())
    }

    pub fn measure(&mut self, id: u32, mode: PlayerId, by: PlayerId) -> Result<Option<Bit>> {
        let mi = mode.index();
        {
            let inst = self.instance_mut(id)?;
            if inst.owner[mi] != Some(by) {
                return Err(Error::Invariant(format!("{by:?} measures mode {mode:?} of instance {id} it does not hold")));
            }
            if inst.measured[mi].is_some() {
                return Err(Error::Invariant(format!("mode {mode:?} of instance {id} measured twice")));
            }
        }
        let bit = match self.mode {
            SamplingMode::Discrete => {
                let joint = match self.instance(id).and_then(|i| i.joint) {
                    Some(j) => j,
                    None => {
                        let (source, offset) = {
                            let inst = self.instance(id).expect("checked above");
                            (inst.source, inst.offset)
                        };
                        self.ensure_sampler(source, offset)?;
                        let draw = self.discrete[&(source, offset.map(f64::to_bits))].sample(&mut self.rng);
                        self.instance_mut(id)?.joint = Some(draw);
                        draw
                    }
                };
                joint.map(|t| if t.bit(mi) == 1 { Bit::One } else { Bit::Zero })
            }
            SamplingMode::Continuous => {
                let inst = self.instance(id).expect("checked above");
                let x = inst.latent.expect("continuous instances carry latents")[mi] + inst.offset[mi];
                let sampler = &self.continuous[inst.source];
                sampler.observe(x, &mut self.rng).1
            }
        };
        self.instance_mut(id)?.measured[mi] = Some(bit);
        Ok(bit)
    }

    fn ensure_sampler(&mut self, source: usize, offset: [f64; 3]) -> Result<()> {
        let key = (source, offset.map(f64::to_bits));
        if !self.discrete.contains_key(&key) {
            let state = self.sources[source].shift_x(&offset)?;
            let table = outcome_table_by_overlap(&state, &self.model)?;
            self.discrete.insert(key, DiscreteSampler::new(&table)?);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{tripartite_state, TripartiteParams};

    fn registry(mode: SamplingMode) -> QuantumRegistry {
        let model = MeasurementModel::new(0.2, 1.0, 0.05).unwrap();
        let mut r = QuantumRegistry::seeded(mode, model, 3);
        let s = tripartite_state(&TripartiteParams::new(3.0, 1.0)).unwrap();
        r.prepare(&s, 4, PlayerId::R1).unwrap();
        r
    }

    #[test]
    fn ownership_enforced() {
        let mut r = registry(SamplingMode::Discrete);
        assert!(r.transfer(1, PlayerId::S, PlayerId::S, PlayerId::R0).is_err());
        r.transfer(1, PlayerId::S, PlayerId::R1, PlayerId::S).unwrap();
        assert!(r.measure(1, PlayerId::S, PlayerId::R1).is_err());
        r.measure(1, PlayerId::S, PlayerId::S).unwrap();
        assert!(r.instance(9).is_none());
    }

    #[test]
    fn measure_once() {
        for mode in [SamplingMode::Discrete, SamplingMode::Continuous] {
            let mut r = registry(mode);
            r.measure(2, PlayerId::R1, PlayerId::R1).unwrap();
            assert!(matches!(r.measure(2, PlayerId::R1, PlayerId::R1), Err(Error::Invariant(_))));
        }
    }

    #[test]
    fn no_shift_after_joint_draw() {
        let mut r = registry(SamplingMode::Discrete);
        r.measure(1, PlayerId::S, PlayerId::R1).unwrap();
        assert!(matches!(r.shift(1, PlayerId::R0, PlayerId::R1, 0.3), Err(Error::Invariant(_))));
        r.shift(2, PlayerId::R0, PlayerId::R1, 0.3).unwrap();
        assert_eq!(r.instance(2).unwrap().offset(PlayerId::R0), 0.3);
    }

    #[test]
    fn joint_readouts_are_consistent() {
        let mut r = registry(SamplingMode::Discrete);
        let bits: Vec<Option<Bit>> =
            PlayerId::ALL.iter().map(|&p| r.measure(3, p, PlayerId::R1).unwrap()).collect();
        assert!(bits.iter().all(|b| b.is_some()) || bits.iter().all(|b| b.is_none()));
    }
}
