//! Phase (i): distribution of the entangled instances and the two K tests.

use std::collections::{BTreeMap, BTreeSet};

use super::message::{MessageKind, Reading};
use super::{PlayerId, Session};
use crate::adversary::{fabricate_index_set, Strategy};
use crate::error::Result;
use crate::gauss::OutcomeTriple;
use crate::primitive::Bit;

const PHASE: &str = "i.2";

pub(crate) fn fraction_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

pub(crate) fn holds(session: &Session, id: u32, mode: PlayerId, p: PlayerId) -> bool {
    session.registry.instance(id).and_then(|i| i.owner(mode)) == Some(p) && !session.registry.instance(id).is_some_and(|i| i.is_measured(mode))
}

/// Readings keyed by `(instance, mode)`.
pub(crate) type ReadingMap = BTreeMap<(u32, PlayerId), Option<Bit>>;

pub(crate) fn reading_map(readings: &[Reading]) -> ReadingMap {
    readings.iter().map(|r| ((r.instance, r.mode), r.bit)).collect()
}

/// Joins readings into accepted triples over `ids`; `None` if some reading is missing.
pub(crate) fn accepted_triples(ids: &BTreeSet<u32>, readings: &ReadingMap) -> Option<(Vec<u32>, Vec<OutcomeTriple>)> {
    let mut accepted = Vec::new();
    let mut triples = Vec::new();
    for &id in ids {
        let mut bits = [0u8; 3];
        let mut all = true;
        for p in PlayerId::ALL {
            match readings.get(&(id, p))? {
                Some(b) => bits[p.index()] = b.as_u8(),
                None => all = false,
            }
        }
        if all {
            accepted.push(id);
            triples.push(OutcomeTriple::from_bits(bits));
        }
    }
    Some((accepted, triples))
}

/// Runs steps (i.1) to (i.3) and returns the flags after the exchange.
pub fn phase_distribution(session: &mut Session) -> Result<[bool; 3]> {
    use PlayerId::{R0, R1, S};
    let m = session.config.instances;
    let all: Vec<u32> = (1..=m).collect();

    // (i.1)
    let state = match session.deviation(R1) {
        Some(Strategy::RoguePrep(s)) => s.clone(),
        _ => session.family_state()?,
    };
    session.registry.prepare(&state, m, R1)?;
    session.forwarding_shift(R1)?;
    for p in [S, R0] {
        for &id in &all {
            session.registry.transfer(id, p, R1, p)?;
        }
        session.net.send(R1, p, MessageKind::ModeTransfer { mode: p, instances: all.clone() });
    }
    session.net.next_round();
    for p in [S, R0] {
        session.receive(p);
        session.forwarding_shift(p)?;
    }

    // (i.2): R1 picks the K sets.
    let k_count = fraction_count(session.config.sizing.k_fraction, m as usize);
    let k_s = session.draw_subset(R1, &all, k_count);
    let rest: Vec<u32> = all.iter().copied().filter(|i| !k_s.contains(i)).collect();
    let k_r0 = session.draw_subset(R1, &rest, k_count);
    for (j, mut set) in [(S, k_s), (R0, k_r0)] {
        if let Some(Strategy::FabricateIndexSets(policy)) = session.deviation(R1).cloned() {
            set = fabricate_index_set(policy, &set, &all, session.adversary_rng());
        }
        session.net.send(R1, j, MessageKind::IndexSet { label: "K".into(), indices: set.iter().copied().collect() });
        session.player_mut(R1).k_sets.insert(j, set);
    }
    session.net.next_round();

    // Each j forwards its own modes of K_j to the other one.
    for j in [S, R0] {
        let other = j.third(R1);
        let mut k_j = BTreeSet::new();
        for msg in session.receive(j) {
            if let MessageKind::IndexSet { label, indices } = msg.kind {
                if label == "K" {
                    k_j = indices.into_iter().collect();
                }
            }
        }
        let valid = k_j.len() == k_count && k_j.iter().all(|&i| (1..=m).contains(&i));
        if !valid {
            session.fail(j);
        }
        let forwarded: Vec<u32> = k_j.iter().copied().filter(|&id| valid && holds(session, id, j, j)).collect();
        for &id in &forwarded {
            session.registry.transfer(id, j, j, other)?;
        }
        session.net.send(j, other, MessageKind::ModeTransfer { mode: j, instances: forwarded });
        session.player_mut(j).k_sets.insert(j, k_j);
    }
    session.net.next_round();
    for j in [S, R0] {
        let from = j.third(R1);
        let mut received = BTreeSet::new();
        for msg in session.receive(j) {
            if let MessageKind::ModeTransfer { instances, .. } = msg.kind {
                received.extend(instances);
            }
        }
        session.player_mut(j).k_sets.insert(from, received);
    }

    // Measurements: the receiving player measures both modes, R1 its own.
    // Tested pairs: K_S is measured by R0 (with R1), K_R0 by S (with R1).
    let tested: [(PlayerId, PlayerId); 2] = [(S, R0), (R0, S)];
    for (forwarder, measurer) in tested {
        let ids: Vec<u32> = session.player(measurer).k_sets[&forwarder].iter().copied().collect();
        session.measuring_shift(measurer, &ids)?;
        let r1_ids: Vec<u32> = session.player(R1).k_sets[&forwarder].iter().copied().collect();
        session.measuring_shift(R1, &r1_ids)?;
    }
    let mut reports: Vec<(PlayerId, PlayerId, Vec<Reading>)> = Vec::new();
    for (forwarder, measurer) in tested {
        let ids: Vec<u32> = session.player(measurer).k_sets[&forwarder].iter().copied().collect();
        let mut readings = Vec::with_capacity(2 * ids.len());
        for &id in &ids {
            if !(holds(session, id, measurer, measurer) && holds(session, id, forwarder, measurer)) {
                session.fail(measurer);
                continue;
            }
            for mode in [measurer, forwarder] {
                let bit = session.registry.measure(id, mode, measurer)?;
                readings.push(Reading { instance: id, mode, bit });
            }
        }
        reports.push((measurer, R1, readings));
        let ids: Vec<u32> = session.player(R1).k_sets[&forwarder].iter().copied().collect();
        let mut readings = Vec::with_capacity(ids.len());
        for &id in &ids {
            if !holds(session, id, R1, R1) {
                session.fail(R1);
                continue;
            }
            let bit = session.registry.measure(id, R1, R1)?;
            readings.push(Reading { instance: id, mode: R1, bit });
        }
        reports.push((R1, measurer, readings));
    }
    let mut own: BTreeMap<(PlayerId, PlayerId), Vec<Reading>> = BTreeMap::new();
    for (from, to, readings) in reports {
        session.net.send(from, to, MessageKind::MeasurementReport { label: "K".into(), readings: readings.clone() });
        own.insert((from, to), readings);
    }
    session.net.next_round();

    let mut incoming: BTreeMap<PlayerId, Vec<(PlayerId, Vec<Reading>)>> = BTreeMap::new();
    for p in PlayerId::ALL {
        for msg in session.receive(p) {
            if let MessageKind::MeasurementReport { readings, .. } = msg.kind {
                incoming.entry(p).or_default().push((msg.sender, readings));
            }
        }
    }
    for (forwarder, measurer) in tested {
        let label = format!("K_{forwarder:?}");
        for (p, partner) in [(measurer, R1), (R1, measurer)] {
            let mut map = reading_map(&own[&(p, partner)]);
            let theirs = incoming.get(&p).and_then(|v| v.iter().find(|(s, _)| *s == partner)).map(|(_, r)| r.as_slice()).unwrap_or(&[]);
            map.extend(reading_map(theirs));
            let ids = session.player(p).k_sets[&forwarder].clone();
            match accepted_triples(&ids, &map) {
                Some((accepted, triples)) => {
                    session.acceptance_test(PHASE, p, &label, accepted.len() as u64, ids.len() as u64);
                    session.triple_tests(PHASE, p, &label, &triples);
                    session.player_mut(p).k_tilde.insert(forwarder, accepted.into_iter().collect());
                }
                None => session.fail(p),
            }
        }
    }

    // (i.3)
    let flags = session.exchange_flags();
    session.distribution_flags = Some(flags);
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proto::RunConfig;

    fn small(seed: u64) -> RunConfig {
        RunConfig { instances: 4000, seed, ..RunConfig::default() }
    }

    #[test]
    fn honest_distribution_passes_and_agrees() {
        let mut s = Session::new(small(1)).unwrap();
        let flags = phase_distribution(&mut s).unwrap();
        assert_eq!(flags, [true; 3]);
        let r1 = s.player(PlayerId::R1);
        assert_eq!(r1.k_sets[&PlayerId::S].len(), 240);
        assert!(r1.k_sets[&PlayerId::S].is_disjoint(&r1.k_sets[&PlayerId::R0]));
        assert_eq!(r1.k_tilde[&PlayerId::S], s.player(PlayerId::R0).k_tilde[&PlayerId::S]);
        assert_eq!(r1.k_tilde[&PlayerId::R0], s.player(PlayerId::S).k_tilde[&PlayerId::R0]);
        assert_eq!(s.player(PlayerId::S).k_sets, s.player(PlayerId::R0).k_sets);
    }

    #[test]
    fn fabricated_k_sets_lower_flags() {
        use crate::adversary::FabricationPolicy;
        for policy in [FabricationPolicy::Superset, FabricationPolicy::Subset, FabricationPolicy::Disjoint] {
            let config = small(2).with_adversary(PlayerId::R1, Strategy::FabricateIndexSets(policy)).unwrap();
            let mut s = Session::new(config).unwrap();
            let flags = phase_distribution(&mut s).unwrap();
            assert!(s.honest_abort(&flags), "{policy:?}");
        }
    }

    #[test]
    fn empty_run_is_trivial() {
        let mut s = Session::new(RunConfig { instances: 0, ..small(3) }).unwrap();
        assert_eq!(phase_distribution(&mut s).unwrap(), [true; 3]);
    }
}
