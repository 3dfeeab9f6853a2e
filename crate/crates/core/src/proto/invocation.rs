//! Phase (ii): invocation of the W-flip on the surviving instances.

use std::collections::{BTreeMap, BTreeSet};

use super::distribution::{fraction_count, holds};
use super::message::{MessageKind, Reading};
use super::{PlayerId, Session};
use crate::adversary::{announce_acceptances, fabricate_index_set, Strategy};
use crate::error::Result;
use crate::gauss::OutcomeTriple;
use crate::primitive::{player_trits, Bit};

fn fabricated(session: &mut Session, p: PlayerId, honest: BTreeSet<u32>, universe: &[u32]) -> BTreeSet<u32> {
    match session.deviation(p).cloned() {
        Some(Strategy::FabricateIndexSets(policy)) => fabricate_index_set(policy, &honest, universe, session.adversary_rng()),
        _ => honest,
    }
}

/// Step (ii.1): agree on the instances not consumed by phase (i).
fn agree_survivors(session: &mut Session) {
    let m = session.config.instances;
    for p in PlayerId::ALL {
        let discarded: BTreeSet<u32> = session.player(p).k_sets.values().flatten().copied().collect();
        for q in p.others() {
            session.net.send(p, q, MessageKind::IndexSet { label: "discarded".into(), indices: discarded.iter().copied().collect() });
        }
        session.player_mut(p).m_tilde = (1..=m).filter(|i| !discarded.contains(i)).collect();
    }
    session.net.next_round();
    for p in PlayerId::ALL {
        let own: Vec<u32> = session.player(p).k_sets.values().flatten().copied().collect::<BTreeSet<u32>>().into_iter().collect();
        let mismatch = session.receive(p).into_iter().any(|msg| match msg.kind {
            MessageKind::IndexSet { label, indices } => label == "discarded" && indices != own,
            _ => false,
        });
        if mismatch {
            session.fail(p);
        }
    }
}

/// Step (ii.2), in rotation: each player demands two disjoint secret L sets.
fn demand_l_sets(session: &mut Session) -> Result<()> {
    let l_fraction = session.config.sizing.l_fraction;
    for p in PlayerId::ALL {
        let pool: Vec<u32> = session.player(p).m_tilde.iter().copied().collect();
        let count = fraction_count(l_fraction, pool.len());
        let [q1, q2] = p.others();
        let first = session.draw_subset(p, &pool, count);
        let rest: Vec<u32> = pool.iter().copied().filter(|i| !first.contains(i)).collect();
        let second = session.draw_subset(p, &rest, count);
        for (q, set) in [(q1, first), (q2, second)] {
            let set = fabricated(session, p, set, &pool);
            session.net.send(p, q, MessageKind::IndexDemand { label: "L".into(), indices: set.into_iter().collect() });
        }
        session.net.next_round();
        for q in [q1, q2] {
            let mut demanded = BTreeSet::new();
            for msg in session.receive(q) {
                if let MessageKind::IndexDemand { label, indices } = msg.kind {
                    if label == "L" {
                        demanded = indices.into_iter().collect::<BTreeSet<u32>>();
                    }
                }
            }
            let m_tilde = &session.player(q).m_tilde;
            let valid = demanded.len() == fraction_count(l_fraction, m_tilde.len()) && demanded.is_subset(m_tilde);
            if !valid {
                session.fail(q);
            }
            // Only modes still held are forwarded; the demander sees what arrives.
            let forwarded: Vec<u32> = demanded.iter().copied().filter(|&id| valid && holds(session, id, q, q)).collect();
            for &id in &forwarded {
                session.registry.transfer(id, q, q, p)?;
            }
            session.net.send(q, p, MessageKind::ModeTransfer { mode: q, instances: forwarded });
        }
        session.net.next_round();
        for msg in session.receive(p) {
            if let MessageKind::ModeTransfer { instances, .. } = msg.kind {
                session.player_mut(p).l_sets.insert(msg.sender, instances.into_iter().collect());
            }
        }
    }
    Ok(())
}

/// Step (ii.3): own modes held alone are measured as singles, own modes
/// held with one forwarded mode as pairs. Anything else is left unmeasured.
fn measure_retained(session: &mut Session) -> Result<()> {
    for p in PlayerId::ALL {
        let ids: Vec<u32> = session.player(p).m_tilde.iter().copied().collect();
        session.measuring_shift(p, &ids)?;
    }
    for p in PlayerId::ALL {
        let ids: Vec<u32> = session.player(p).m_tilde.iter().copied().collect();
        for id in ids {
            if !holds(session, id, p, p) {
                continue;
            }
            let extra: Vec<PlayerId> = p.others().into_iter().filter(|&q| holds(session, id, q, p)).collect();
            match extra.as_slice() {
                [] => {
                    let bit = session.registry.measure(id, p, p)?;
                    session.player_mut(p).singles.insert(id, bit);
                }
                [q] => {
                    let own = session.registry.measure(id, p, p)?;
                    let other = session.registry.measure(id, *q, p)?;
                    session.player_mut(p).pairs.insert(id, (*q, own, other));
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// Step (ii.4), in rotation: public announcement of measured and accepted singles.
fn announce(session: &mut Session) {
    for p in PlayerId::ALL {
        let singles = &session.player(p).singles;
        let measured: BTreeSet<u32> = singles.keys().copied().collect();
        let accepted: BTreeSet<u32> = singles.iter().filter(|(_, b)| b.is_some()).map(|(&id, _)| id).collect();
        let accepted = match session.deviation(p).cloned() {
            Some(s) => announce_acceptances(&s, &accepted, session.adversary_rng()),
            None => accepted,
        };
        for q in p.others() {
            session.net.send(
                p,
                q,
                MessageKind::AcceptanceAnnouncement {
                    measured: measured.iter().copied().collect(),
                    accepted: accepted.iter().copied().collect(),
                },
            );
        }
        session.player_mut(p).announcements.insert(p, (measured, accepted));
        session.net.next_round();
        for q in p.others() {
            for msg in session.receive(q) {
                if let MessageKind::AcceptanceAnnouncement { measured, accepted } = msg.kind {
                    let entry = (measured.into_iter().collect(), accepted.into_iter().collect());
                    session.player_mut(q).announcements.insert(msg.sender, entry);
                }
            }
        }
    }
}

/// Step (ii.5): each player tests the pairs it holds against the third
/// player's announcement.
fn pair_tests(session: &mut Session) {
    for p in PlayerId::ALL {
        for q in p.others() {
            let third = p.third(q);
            let Some((measured, accepted)) = session.player(p).announcements.get(&third).cloned() else {
                session.fail(p);
                continue;
            };
            let pairs: Vec<(u32, Option<Bit>, Option<Bit>)> = session
                .player(p)
                .pairs
                .iter()
                .filter(|(_, (partner, _, _))| *partner == q)
                .map(|(&id, &(_, a, b))| (id, a, b))
                .collect();
            let candidates = pairs.iter().filter(|(id, _, _)| measured.contains(id)).count() as u64;
            let bits: Vec<(Bit, Bit)> = pairs
                .iter()
                .filter(|(id, _, _)| accepted.contains(id))
                .filter_map(|&(_, a, b)| Some((a?, b?)))
                .collect();
            session.acceptance_test("ii.5", p, &format!("pair_{q:?}"), bits.len() as u64, candidates);
            session.pair_tests(p, q, &bits);
        }
    }
}

fn intersect<'a>(mut sets: impl Iterator<Item = &'a BTreeSet<u32>>) -> BTreeSet<u32> {
    let Some(first) = sets.next() else { return BTreeSet::new() };
    sets.fold(first.clone(), |acc, s| acc.intersection(s).copied().collect())
}

/// Step (ii.6): the publicly accepted set and each player's own marginal on it.
fn own_marginal_tests(session: &mut Session) {
    for p in PlayerId::ALL {
        let ann = &session.player(p).announcements;
        if ann.len() != 3 {
            session.fail(p);
            continue;
        }
        let m_hat = intersect(ann.values().map(|(_, a)| a));
        let measured_all = intersect(ann.values().map(|(m, _)| m));
        let singles = &session.player(p).singles;
        let bits: Vec<Bit> = m_hat.iter().filter_map(|id| singles.get(id).copied().flatten()).collect();
        let complete = bits.len() == m_hat.len();
        session.acceptance_test("ii.6", p, "m_hat", m_hat.len() as u64, measured_all.len() as u64);
        session.own_marginal_test(p, &bits);
        if !complete {
            session.fail(p);
        }
        session.player_mut(p).m_hat = m_hat;
    }
}

/// Step (ii.7), in rotation: disjoint control samples revealed to their chooser.
fn control_samples(session: &mut Session) {
    let v_fraction = session.config.sizing.v_fraction;
    for p in PlayerId::ALL {
        let state = session.player(p);
        let used: BTreeSet<u32> = state.v_sets.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let pool: Vec<u32> = state.m_hat.iter().copied().filter(|i| !used.contains(i)).collect();
        let count = fraction_count(v_fraction, state.m_hat.len());
        let honest = session.draw_subset(p, &pool, count);
        let v = fabricated(session, p, honest, &pool);
        for q in p.others() {
            session.net.send(p, q, MessageKind::IndexDemand { label: "V".into(), indices: v.iter().copied().collect() });
        }
        session.player_mut(p).v_sets.push((p, v.clone()));
        session.net.next_round();
        for q in p.others() {
            let mut demanded = BTreeSet::new();
            for msg in session.receive(q) {
                if let MessageKind::IndexDemand { label, indices } = msg.kind {
                    if label == "V" {
                        demanded = indices.into_iter().collect::<BTreeSet<u32>>();
                    }
                }
            }
            let state = session.player(q);
            let used: BTreeSet<u32> = state.v_sets.iter().flat_map(|(_, v)| v.iter().copied()).collect();
            let valid = demanded.len() == fraction_count(v_fraction, state.m_hat.len())
                && demanded.is_subset(&state.m_hat)
                && demanded.is_disjoint(&used);
            let readings: Vec<Reading> = demanded
                .iter()
                .map(|&id| Reading { instance: id, mode: q, bit: state.singles.get(&id).copied().flatten() })
                .collect();
            if !valid {
                session.fail(q);
            }
            session.player_mut(q).v_sets.push((p, demanded));
            session.net.send(q, p, MessageKind::MeasurementReport { label: "V".into(), readings });
        }
        session.net.next_round();
        let mut reported: BTreeMap<(u32, PlayerId), Option<Bit>> = BTreeMap::new();
        for msg in session.receive(p) {
            if let MessageKind::MeasurementReport { readings, .. } = msg.kind {
                reported.extend(readings.into_iter().filter(|r| r.mode == msg.sender).map(|r| ((r.instance, r.mode), r.bit)));
            }
        }
        let mut triples = Vec::with_capacity(v.len());
        let mut complete = true;
        for &id in &v {
            let mut bits = [0u8; 3];
            for q in PlayerId::ALL {
                let bit = if q == p {
                    session.player(p).singles.get(&id).copied().flatten()
                } else {
                    reported.get(&(id, q)).copied().flatten()
                };
                match bit {
                    Some(b) => bits[q.index()] = b.as_u8(),
                    None => complete = false,
                }
            }
            triples.push(OutcomeTriple::from_bits(bits));
        }
        if !complete {
            session.fail(p);
        } else {
            session.triple_tests("ii.7", p, "V", &triples);
        }
    }
}

/// Step (ii.8): flags, then the shared set `W` and each player's trits.
fn extract(session: &mut Session) -> Result<()> {
    for p in PlayerId::ALL {
        let state = session.player(p);
        let used: BTreeSet<u32> = state.v_sets.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let mut w: Vec<u32> = state.m_hat.iter().copied().filter(|i| !used.contains(i)).collect();
        if w.len() % 2 == 1 {
            w.pop();
        }
        let bits: Vec<Bit> = w.iter().filter_map(|id| state.singles.get(id).copied().flatten()).collect();
        if bits.len() != w.len() {
            // Already flagged in (ii.6).
            continue;
        }
        let trits = player_trits(&bits)?;
        let state = session.player_mut(p);
        state.w = w;
        state.trits = trits;
    }
    Ok(())
}

/// Runs steps (ii.1) to (ii.8) and returns the flags after the exchange.
pub fn phase_invocation(session: &mut Session) -> Result<[bool; 3]> {
    agree_survivors(session);
    demand_l_sets(session)?;
    measure_retained(session)?;
    announce(session);
    pair_tests(session);
    own_marginal_tests(session);
    control_samples(session);
    let flags = session.exchange_flags();
    session.invocation_flags = Some(flags);
    extract(session)?;
    Ok(flags)
}
