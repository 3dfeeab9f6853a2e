//! Phase (iii): classical detectable broadcast driven by the trit columns.
//!
//! The sender sends a bit `x_i` to each receiver and, on demand, the rounds
//! `J_i` where its own trit equals `x_i`. A receiver whose trits over `J_i`
//! all differ from `x_i` is consistent. If both receivers are consistent
//! but disagree, R1 asks R0 for evidence: rounds of `J_0` where R0 holds
//! `1 - y_0`. At such rounds an honest sender's trit is `y_0` and R0's is
//! the other non-`y_0` value, so R1 must hold `2` there and the round cannot
//! lie in `J_1`.
//!
//! Imperfect primitives produce occasional mismatches, so [`BroadcastRules`]
//! carries tolerances. [`BroadcastRules::strict`] applies the checks literally.

use std::collections::BTreeSet;

use statrs::distribution::{Binomial, DiscreteCDF};

use super::message::MessageKind;
use super::{Consistency, Decision, PlayerId, Session};
use crate::adversary::{broadcast_bits, claimed_consistency, cross_check_response, fabricate_index_set, Strategy};
use crate::error::Result;
use crate::primitive::{Bit, Trit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadcastRules {
    /// `|J_i|` must be at least `max(1, ceil(L * f))`; `0` disables the check.
    pub min_j_fraction: f64,
    /// Tolerated rounds of `J_i` where the receiver's trit equals `x_i`:
    /// `max(mismatch_floor, floor(mismatch_fraction * |J_i|))`.
    pub mismatch_floor: usize,
    pub mismatch_fraction: f64,
    /// Evidence must hold at least `max(1, ceil(L * f))` rounds; `0` disables the check.
    pub min_evidence_fraction: f64,
    /// Bad evidence rounds (in `J_1`, or R1 not holding `2`) are tolerated up
    /// to the largest count a coin-flip guesser reaches with probability at
    /// most this level. `None` tolerates none.
    pub evidence_level: Option<f64>,
}

impl Default for BroadcastRules {
    fn default() -> Self {
        Self {
            min_j_fraction: 1.0 / 12.0,
            mismatch_floor: 3,
            mismatch_fraction: 0.02,
            min_evidence_fraction: 1.0 / 36.0,
            evidence_level: Some(1e-3),
        }
    }
}

impl BroadcastRules {
    /// Zero tolerance and no size requirements.
    pub fn strict() -> Self {
        Self {
            min_j_fraction: 0.0,
            mismatch_floor: 0,
            mismatch_fraction: 0.0,
            min_evidence_fraction: 0.0,
            evidence_level: None,
        }
    }

    fn minimum(fraction: f64, rounds: usize) -> usize {
        if fraction > 0.0 {
            ((rounds as f64 * fraction).ceil() as usize).max(1)
        } else {
            0
        }
    }

    fn mismatch_tolerance(&self, j_size: usize) -> usize {
        self.mismatch_floor.max((self.mismatch_fraction * j_size as f64).floor() as usize)
    }

    /// Largest tolerated bad count among `n` evidence rounds, or `None` if
    /// even a clean set of this size is too easy to guess.
    ///
    /// Outside `J_0`, a receiver that holds the bit it was sent cannot tell
    /// whether the sender or the other receiver holds `2`, so fabricated
    /// evidence is bad in each round with probability 1/2.
    fn bad_evidence_tolerance(&self, n: usize) -> Option<usize> {
        let Some(level) = self.evidence_level else { return Some(0) };
        let guess = Binomial::new(0.5, n as u64).expect("valid binomial");
        (0..=n).take_while(|&t| guess.cdf(t as u64) <= level).last()
    }
}

fn trit_at(trits: &[Trit], round: u32) -> Option<Trit> {
    round.checked_sub(1).and_then(|i| trits.get(i as usize)).copied()
}

fn in_range(set: &BTreeSet<u32>, rounds: usize) -> bool {
    set.iter().all(|&j| j >= 1 && j as usize <= rounds)
}

/// Rounds (1-based) where the sender's trit equals `x`.
pub fn sender_index_set(sender_trits: &[Trit], x: Bit) -> BTreeSet<u32> {
    let t = Trit::from_bit(x);
    (1..=sender_trits.len() as u32).filter(|&j| trit_at(sender_trits, j) == Some(t)).collect()
}

/// Step (iii.2) for a receiver holding `own_trits` that received `x` and `j_set`.
pub fn consistency_check(own_trits: &[Trit], j_set: &BTreeSet<u32>, x: Bit, rules: &BroadcastRules) -> Consistency {
    let rounds = own_trits.len();
    if rounds == 0 || !in_range(j_set, rounds) || j_set.len() < BroadcastRules::minimum(rules.min_j_fraction, rounds) {
        return Consistency::Bottom;
    }
    let t = Trit::from_bit(x);
    let mismatches = j_set.iter().filter(|&&j| trit_at(own_trits, j) == Some(t)).count();
    if mismatches <= rules.mismatch_tolerance(j_set.len()) {
        Consistency::Value(x)
    } else {
        Consistency::Bottom
    }
}

/// R0's evidence for `y0`: rounds of `J_0` where R0 holds `1 - y0`.
pub fn evidence_set(r0_trits: &[Trit], j0: &BTreeSet<u32>, y0: Bit) -> BTreeSet<u32> {
    let t = Trit::from_bit(y0.flip());
    j0.iter().copied().filter(|&j| trit_at(r0_trits, j) == Some(t)).collect()
}

/// R1's check of R0's evidence: rounds outside `J_1` where R1 holds `2`.
pub fn verify_evidence(r1_trits: &[Trit], j1: &BTreeSet<u32>, evidence: &BTreeSet<u32>, rules: &BroadcastRules) -> bool {
    let rounds = r1_trits.len();
    if !in_range(evidence, rounds) || evidence.len() < BroadcastRules::minimum(rules.min_evidence_fraction, rounds) {
        return false;
    }
    let bad = evidence.iter().filter(|&&k| j1.contains(&k) || trit_at(r1_trits, k) != Some(Trit::Two)).count();
    rules.bad_evidence_tolerance(evidence.len()).is_some_and(|t| bad <= t)
}

fn from_flags(own: Consistency, other: Consistency) -> Decision {
    match (own, other) {
        (Consistency::Value(b), _) | (Consistency::Bottom, Consistency::Value(b)) => Decision::Decided(b),
        (Consistency::Bottom, Consistency::Bottom) => Decision::Abort,
    }
}

/// Runs phase (iii) on the trit columns the players hold.
pub fn phase_broadcast(session: &mut Session) -> Result<()> {
    let rounds = session.player(PlayerId::S).trits.len();
    let rules = session.config.rules;
    let x = session.config.sender_bit;
    let receivers = [PlayerId::R0, PlayerId::R1];

    // (iii.1): bits, demands, index sets.
    let strategy = session.deviation(PlayerId::S).cloned().unwrap_or(Strategy::Honest);
    let (b0, b1) = broadcast_bits(PlayerId::S, &strategy, x)?;
    for (r, b) in receivers.into_iter().zip([b0, b1]) {
        session.net.send(PlayerId::S, r, MessageKind::BroadcastBit { bit: b });
    }
    session.net.next_round();
    for r in receivers {
        for m in session.receive(r) {
            if let MessageKind::BroadcastBit { bit } = m.kind {
                session.player_mut(r).received_bit = Some(bit);
            }
        }
        session.net.send(r, PlayerId::S, MessageKind::IndexDemand { label: "J".into(), indices: Vec::new() });
    }
    session.net.next_round();
    let demands: Vec<PlayerId> = session
        .receive(PlayerId::S)
        .into_iter()
        .filter(|m| matches!(&m.kind, MessageKind::IndexDemand { label, .. } if label == "J"))
        .map(|m| m.sender)
        .collect();
    let sender_trits = session.player(PlayerId::S).trits.clone();
    let universe: Vec<u32> = (1..=rounds as u32).collect();
    for r in demands {
        let bit = if r == PlayerId::R0 { b0 } else { b1 };
        let mut j = sender_index_set(&sender_trits, bit);
        if let Strategy::FabricateIndexSets(policy) = strategy {
            j = fabricate_index_set(policy, &j, &universe, session.adversary_rng());
        }
        session.net.send(PlayerId::S, r, MessageKind::IndexSet { label: "J".into(), indices: j.into_iter().collect() });
    }
    session.net.next_round();

    // (iii.2): consistency flags.
    let mut j_sets = [BTreeSet::new(), BTreeSet::new()];
    for (i, r) in receivers.into_iter().enumerate() {
        for m in session.receive(r) {
            if let MessageKind::IndexSet { label, indices } = m.kind {
                if label == "J" {
                    j_sets[i] = indices.into_iter().collect();
                }
            }
        }
        let computed = match session.player(r).received_bit {
            Some(bit) => consistency_check(&session.player(r).trits, &j_sets[i], bit, &rules),
            None => Consistency::Bottom,
        };
        let claimed = match (session.deviation(r), session.player(r).received_bit) {
            (Some(s), Some(bit)) => claimed_consistency(s, computed, bit),
            _ => computed,
        };
        session.player_mut(r).consistency = Some(claimed);
    }

    // (iii.3): flag exchange.
    for r in receivers {
        let value = session.player(r).consistency.unwrap_or(Consistency::Bottom);
        let other = if r == PlayerId::R0 { PlayerId::R1 } else { PlayerId::R0 };
        session.net.send(r, other, MessageKind::FlagValue { value });
    }
    session.net.next_round();
    let mut heard = [Consistency::Bottom; 2];
    for (i, r) in receivers.into_iter().enumerate() {
        for m in session.receive(r) {
            if let MessageKind::FlagValue { value } = m.kind {
                heard[i] = value;
            }
        }
    }
    let y0 = session.player(PlayerId::R0).consistency.unwrap_or(Consistency::Bottom);
    let y1 = session.player(PlayerId::R1).consistency.unwrap_or(Consistency::Bottom);

    // (iii.4) for R0; R0 never revises a consistent flag.
    session.player_mut(PlayerId::R0).decision = from_flags(y0, heard[0]);

    // (iii.4), (iii.5) for R1.
    let r1_decision = match (y1, heard[1]) {
        (Consistency::Value(own), Consistency::Value(claimed)) if own != claimed => {
            session.net.send(PlayerId::R1, PlayerId::R0, MessageKind::IndexDemand { label: "cross-check".into(), indices: Vec::new() });
            session.net.next_round();
            let asked = session
                .receive(PlayerId::R0)
                .iter()
                .any(|m| matches!(&m.kind, MessageKind::IndexDemand { label, .. } if label == "cross-check"));
            if asked {
                let evidence = match y0 {
                    Consistency::Value(v) => evidence_set(&session.player(PlayerId::R0).trits, &j_sets[0], v),
                    Consistency::Bottom => BTreeSet::new(),
                };
                let evidence = match session.deviation(PlayerId::R0).cloned() {
                    Some(s @ Strategy::LieInCrossCheck(_)) => {
                        // Best guess without the sender's data: rounds outside
                        // `J_0` where R0 holds the bit it received, so the
                        // sender holds the claimed bit or 2 there.
                        let guess: BTreeSet<u32> = (1..=rounds as u32)
                            .filter(|k| !j_sets[0].contains(k))
                            .filter(|&k| trit_at(&session.player(PlayerId::R0).trits, k) == Some(Trit::from_bit(claimed.flip())))
                            .collect();
                        cross_check_response(&s, &guess, rounds as u32, session.adversary_rng())
                    }
                    _ => evidence,
                };
                session.net.send(PlayerId::R0, PlayerId::R1, MessageKind::CrossCheckIndices { indices: evidence.into_iter().collect() });
            }
            session.net.next_round();
            let mut evidence = BTreeSet::new();
            for m in session.receive(PlayerId::R1) {
                if let MessageKind::CrossCheckIndices { indices } = m.kind {
                    evidence = indices.into_iter().collect();
                }
            }
            if verify_evidence(&session.player(PlayerId::R1).trits, &j_sets[1], &evidence, &rules) {
                Decision::Decided(claimed)
            } else {
                Decision::Decided(own)
            }
        }
        (own, other) => from_flags(own, other),
    };
    session.player_mut(PlayerId::R1).decision = r1_decision;

    session.player_mut(PlayerId::S).decision = if rounds == 0 { Decision::Abort } else { Decision::Decided(x) };
    Ok(())
}
