//! Traitor strategies and the decision points they hook into.
//!
//! At most one player is a traitor. Attaching [`Strategy::Honest`] makes the
//! designated player follow the protocol exactly and draw no adversary
//! randomness, so the run is indistinguishable from one without a traitor.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::GaussianState;
use crate::primitive::Bit;
use crate::proto::{Consistency, PlayerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftTiming {
    /// Applied to every own-party mode as soon as the traitor holds it, so
    /// modes later forwarded to others carry the shift too.
    BeforeForwarding,
    /// Applied only to own-party modes the traitor measures himself,
    /// immediately before measuring.
    BeforeMeasuring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FabricationPolicy {
    /// The honest set plus random extras from the whole index universe.
    Superset,
    /// A random half of the honest set.
    Subset,
    /// A random set of the same size avoiding the honest set.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Honest,
    /// Preparer distributes `state` instead of the family state.
    RoguePrep(GaussianState),
    /// Moves the traitor's `x` displacement from `-x0/3` to `-k x0/3`.
    DisplacementShift { k: f64, when: ShiftTiming },
    /// Drops each own acceptance from the public announcement with this probability.
    HideResults { hide_prob: f64 },
    InconsistentSenderBits { to_r0: Bit, to_r1: Bit },
    /// Replaces the index sets the traitor sends (K sets, L and V demands, J sets).
    FabricateIndexSets(FabricationPolicy),
    /// Claims the opposite of the received bit and backs it with fabricated evidence.
    LieInCrossCheck(FabricationPolicy),
    /// Claims consistency with the received bit without checking.
    FalseConsistency,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::RoguePrep(_) => "rogue_prep",
            Strategy::DisplacementShift { .. } => "displacement_shift",
            Strategy::HideResults { .. } => "hide_results",
            Strategy::InconsistentSenderBits { .. } => "inconsistent_sender_bits",
            Strategy::FabricateIndexSets(_) => "fabricate_index_sets",
            Strategy::LieInCrossCheck(_) => "lie_in_cross_check",
            Strategy::FalseConsistency => "false_consistency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adversary {
    pub player: PlayerId,
    pub strategy: Strategy,
}

impl Adversary {
    pub fn new(player: PlayerId, strategy: Strategy) -> Result<Self> {
        let bad = |msg: &str| Err(Error::Config(format!("{} cannot be played by {player:?}: {msg}", strategy.name())));
        match &strategy {
            Strategy::RoguePrep(state) => {
                if player != PlayerId::R1 {
                    return bad("only the preparer R1 prepares states");
                }
                if state.n_modes() != 3 {
                    return Err(Error::Config("rogue state must have 3 modes".into()));
                }
            }
            Strategy::InconsistentSenderBits { .. } if player != PlayerId::S => {
                return bad("only the sender broadcasts bits");
            }
            Strategy::LieInCrossCheck(_) | Strategy::FalseConsistency if player == PlayerId::S => {
                return bad("receiver-only strategy");
            }
            Strategy::HideResults { hide_prob } if !(0.0..=1.0).contains(hide_prob) => {
                return Err(Error::Config(format!("hide_prob {hide_prob} outside [0, 1]")));
            }
            Strategy::DisplacementShift { k, .. } if !k.is_finite() => {
                return Err(Error::Config(format!("shift multiplier {k} is not finite")));
            }
            _ => {}
        }
        Ok(Self { player, strategy })
    }
}

/// `x` shift the strategy applies to an own-party mode at the given timing.
pub fn displacement_delta(strategy: &Strategy, timing: ShiftTiming, x0: f64) -> Option<f64> {
    match strategy {
        Strategy::DisplacementShift { k, when } if *when == timing && *k != 1.0 => Some((1.0 - k) * x0 / 3.0),
        _ => None,
    }
}

/// The set of own acceptances the player announces.
pub fn announce_acceptances<R: Rng + ?Sized>(
    strategy: &Strategy,
    accepted: &BTreeSet<u32>,
    rng: &mut R,
) -> BTreeSet<u32> {
    match strategy {
        Strategy::HideResults { hide_prob } => {
            accepted.iter().copied().filter(|_| !rng.random_bool(*hide_prob)).collect()
        }
        _ => accepted.clone(),
    }
}

/// Bits the sender sends to `(R0, R1)`.
pub fn broadcast_bits(player: PlayerId, strategy: &Strategy, x: Bit) -> Result<(Bit, Bit)> {
    if player != PlayerId::S {
        return Err(Error::Config(format!("{player:?} is not the sender")));
    }
    Ok(match strategy {
        Strategy::InconsistentSenderBits { to_r0, to_r1 } => (*to_r0, *to_r1),
        _ => (x, x),
    })
}

fn random_subset<R: Rng + ?Sized>(pool: &[u32], count: usize, rng: &mut R) -> BTreeSet<u32> {
    let count = count.min(pool.len());
    sample(rng, pool.len(), count).into_iter().map(|i| pool[i]).collect()
}

/// Replaces an honest index set according to `policy`; `universe` lists the
/// indices the traitor draws extras from.
pub fn fabricate_index_set<R: Rng + ?Sized>(
    policy: FabricationPolicy,
    honest: &BTreeSet<u32>,
    universe: &[u32],
    rng: &mut R,
) -> BTreeSet<u32> {
    let outside: Vec<u32> = universe.iter().copied().filter(|i| !honest.contains(i)).collect();
    match policy {
        FabricationPolicy::Superset => {
            let mut set = honest.clone();
            set.extend(random_subset(&outside, (honest.len() / 2).max(1), rng));
            set
        }
        FabricationPolicy::Subset => {
            let pool: Vec<u32> = honest.iter().copied().collect();
            random_subset(&pool, honest.len() / 2, rng)
        }
        FabricationPolicy::Disjoint => random_subset(&outside, honest.len().max(1), rng),
    }
}

/// Flag value a receiver claims after the consistency check.
pub fn claimed_consistency(strategy: &Strategy, computed: Consistency, received: Bit) -> Consistency {
    match strategy {
        Strategy::LieInCrossCheck(_) => Consistency::Value(received.flip()),
        Strategy::FalseConsistency => Consistency::Value(received),
        _ => computed,
    }
}

/// Evidence indices sent in the cross-check; `trit_count` is the number of
/// trit rounds, which bounds the index universe `1..=trit_count`.
pub fn cross_check_response<R: Rng + ?Sized>(
    strategy: &Strategy,
    true_set: &BTreeSet<u32>,
    trit_count: u32,
    rng: &mut R,
) -> BTreeSet<u32> {
    match strategy {
        Strategy::LieInCrossCheck(policy) => {
            let universe: Vec<u32> = (1..=trit_count).collect();
            // An honest evidence set covers about a sixth of the rounds.
            let plausible = (trit_count as usize).div_ceil(6);
            match policy {
                FabricationPolicy::Superset => {
                    let mut set = true_set.clone();
                    let outside: Vec<u32> = universe.iter().copied().filter(|i| !set.contains(i)).collect();
                    set.extend(random_subset(&outside, plausible.saturating_sub(set.len()), rng));
                    set
                }
                FabricationPolicy::Subset => fabricate_index_set(*policy, true_set, &universe, rng),
                FabricationPolicy::Disjoint => {
                    let outside: Vec<u32> = universe.iter().copied().filter(|i| !true_set.contains(i)).collect();
                    random_subset(&outside, plausible, rng)
                }
            }
        }
        _ => true_set.clone(),
    }
}
