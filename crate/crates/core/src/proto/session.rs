use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::message::{Message, MessageKind};
use super::{Consistency, Decision, Network, PlayerId, QuantumRegistry, RunConfig, RunVerdict, SamplingMode};
use crate::adversary::{displacement_delta, ShiftTiming, Strategy};
use crate::error::Result;
use crate::gauss::{outcome_table_closed_form, tripartite_state, GaussianState, OutcomeTriple, ProbabilityTable, TripartiteParams};
use crate::primitive::{Bit, Trit};
use crate::stats::{forbidden_rate_test, goodness_of_fit, uniform_test, TestOutcome};

/// Number of hypothesis tests a run can perform; `alpha` is split evenly.
///
/// Phase (i): two samples, each with one-hot uniformity, forbidden rate and
/// acceptance rate. (ii.5): each player tests two pair samples the same way.
/// (ii.6): each player tests its own marginal and the public acceptance rate.
/// (ii.7): each player's control sample gets uniformity and forbidden rate.
pub const TESTS_PER_RUN: u32 = 6 + 18 + 6 + 6;

/// Stream ids for the per-run RNGs.
const QUANTUM_STREAM: u64 = 0;
const ADVERSARY_STREAM: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct TestRecord {
    pub phase: &'static str,
    pub player: PlayerId,
    pub name: String,
    pub outcome: TestOutcome,
}

/// What one player knows and holds.
#[derive(Debug, Clone)]
pub struct PlayerState {
    pub id: PlayerId,
    pub flag: bool,
    /// K sets: for R1 the two sets it chose, for S and R0 the one received.
    pub k_sets: BTreeMap<PlayerId, BTreeSet<u32>>,
    /// Agreed accepted subsets of the tested K sets, keyed by the forwarding player.
    pub k_tilde: BTreeMap<PlayerId, BTreeSet<u32>>,
    pub m_tilde: BTreeSet<u32>,
    /// Modes demanded from and actually received from each other player.
    pub l_sets: BTreeMap<PlayerId, BTreeSet<u32>>,
    /// Own-mode readouts of instances measured alone.
    pub singles: BTreeMap<u32, Option<Bit>>,
    /// `(other player, own readout, readout of the other's mode)`.
    pub pairs: BTreeMap<u32, (PlayerId, Option<Bit>, Option<Bit>)>,
    /// Public announcements `(measured, accepted)` by player.
    pub announcements: BTreeMap<PlayerId, (BTreeSet<u32>, BTreeSet<u32>)>,
    pub m_hat: BTreeSet<u32>,
    pub v_sets: Vec<(PlayerId, BTreeSet<u32>)>,
    pub w: Vec<u32>,
    pub trits: Vec<Trit>,
    pub received_bit: Option<Bit>,
    pub consistency: Option<Consistency>,
    pub decision: Decision,
}

impl PlayerState {
    fn new(id: PlayerId) -> Self {
        Self {
            id,
            flag: true,
            k_sets: BTreeMap::new(),
            k_tilde: BTreeMap::new(),
            m_tilde: BTreeSet::new(),
            l_sets: BTreeMap::new(),
            singles: BTreeMap::new(),
            pairs: BTreeMap::new(),
            announcements: BTreeMap::new(),
            m_hat: BTreeSet::new(),
            v_sets: Vec::new(),
            w: Vec::new(),
            trits: Vec::new(),
            received_bit: None,
            consistency: None,
            decision: Decision::Pending,
        }
    }
}

/// All mutable state of one run.
pub struct Session {
    pub config: RunConfig,
    /// Predicted outcome law of honest instances.
    pub table: ProbabilityTable,
    pub registry: QuantumRegistry,
    pub net: Network,
    pub players: [PlayerState; 3],
    pub(crate) rngs: [ChaCha8Rng; 3],
    pub(crate) adversary_rng: ChaCha8Rng,
    pub(crate) tests: Vec<TestRecord>,
    pub(crate) distribution_flags: Option<[bool; 3]>,
    pub(crate) invocation_flags: Option<[bool; 3]>,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model()?;
        let table = outcome_table_closed_form(config.a, &model)?;
        let seed = config.seed;
        Ok(Self {
            table,
            registry: QuantumRegistry::new(config.mode, model, stream(seed, QUANTUM_STREAM)),
            net: Network::new(config.record_transcript),
            players: PlayerId::ALL.map(PlayerState::new),
            rngs: PlayerId::ALL.map(|p| stream(seed, 1 + p.index() as u64)),
            adversary_rng: stream(seed, ADVERSARY_STREAM),
            tests: Vec::new(),
            distribution_flags: None,
            invocation_flags: None,
            config,
        })
    }

    pub fn player(&self, p: PlayerId) -> &PlayerState {
        &self.players[p.index()]
    }

    pub(crate) fn player_mut(&mut self, p: PlayerId) -> &mut PlayerState {
        &mut self.players[p.index()]
    }

    pub fn traitor(&self) -> Option<PlayerId> {
        self.config.adversary.as_ref().map(|a| a.player)
    }

    /// The strategy of `p` if it is a traitor deviating from the protocol.
    pub fn deviation(&self, p: PlayerId) -> Option<&Strategy> {
        self.config
            .adversary
            .as_ref()
            .filter(|a| a.player == p && a.strategy != Strategy::Honest)
            .map(|a| &a.strategy)
    }

    pub fn family_state(&self) -> Result<GaussianState> {
        tripartite_state(&TripartiteParams::new(self.config.a, self.config.x0))
    }

    pub(crate) fn alpha_test(&self) -> f64 {
        self.config.alpha / TESTS_PER_RUN as f64
    }

    fn rate_floor(&self, predicted: f64) -> f64 {
        self.config.rate_floor.unwrap_or(2.0 * predicted + 1e-6)
    }

    pub(crate) fn fail(&mut self, p: PlayerId) {
        self.player_mut(p).flag = false;
    }

    /// Uniform random subset of `pool` with `count` elements.
    pub(crate) fn draw_subset(&mut self, p: PlayerId, pool: &[u32], count: usize) -> BTreeSet<u32> {
        let rng = &mut self.rngs[p.index()];
        sample(rng, pool.len(), count.min(pool.len())).into_iter().map(|i| pool[i]).collect()
    }

    fn record(&mut self, phase: &'static str, player: PlayerId, name: String, outcome: Result<TestOutcome>) -> bool {
        // Degenerate inputs (nothing to test) count as a failed test only if
        // there was something to see; callers guard the empty cases.
        let outcome = outcome.unwrap_or(TestOutcome { statistic: f64::INFINITY, threshold: 0.0, pass: false, n: 0 });
        let pass = outcome.pass;
        self.tests.push(TestRecord { phase, player, name, outcome });
        if !pass {
            self.fail(player);
        }
        pass
    }

    /// Acceptance-rate test: `accepted` of `candidates` against the model's mass.
    /// Skipped in continuous mode, where the window probability is not tabulated.
    pub(crate) fn acceptance_test(&mut self, phase: &'static str, p: PlayerId, label: &str, accepted: u64, candidates: u64) {
        if self.config.mode != SamplingMode::Discrete || candidates == 0 {
            return;
        }
        let mass = self.table.accept_mass.min(1.0);
        let outcome = goodness_of_fit(&[accepted, candidates - accepted], &[mass, 1.0 - mass], self.alpha_test());
        self.record(phase, p, format!("{label}:acceptance"), outcome);
    }

    /// W-flip tests on accepted triples: one-hot uniformity and forbidden rate.
    pub(crate) fn triple_tests(&mut self, phase: &'static str, p: PlayerId, label: &str, triples: &[OutcomeTriple]) {
        if triples.is_empty() {
            return;
        }
        let mut one_hot = [0u64; 3];
        let mut forbidden = 0u64;
        for t in triples {
            match t.bits() {
                [1, 0, 0] => one_hot[0] += 1,
                [0, 1, 0] => one_hot[1] += 1,
                [0, 0, 1] => one_hot[2] += 1,
                _ => forbidden += 1,
            }
        }
        let alpha = self.alpha_test();
        let uniform = uniform_test(&one_hot, alpha);
        self.record(phase, p, format!("{label}:uniform"), uniform);
        let predicted = self.table.forbidden_conditional();
        let outcome = forbidden_rate_test(forbidden, triples.len() as u64, predicted, self.rate_floor(predicted), alpha);
        self.record(phase, p, format!("{label}:forbidden"), outcome);
    }

    /// Pair tests on `(own bit, forwarded mode's bit)`: uniform over
    /// `00, 10, 01` and the rate of `11`.
    pub(crate) fn pair_tests(&mut self, p: PlayerId, other: PlayerId, pairs: &[(Bit, Bit)]) {
        if pairs.is_empty() {
            return;
        }
        let mut cells = [0u64; 4];
        for (a, b) in pairs {
            cells[(2 * a.as_u8() + b.as_u8()) as usize] += 1;
        }
        let alpha = self.alpha_test();
        let label = format!("pair_{other:?}");
        let uniform = uniform_test(&[cells[0], cells[2], cells[1]], alpha);
        self.record("ii.5", p, format!("{label}:uniform"), uniform);
        let predicted = self.table.pair_conditional(p.index(), other.index())[3];
        let outcome = forbidden_rate_test(cells[3], pairs.len() as u64, predicted, self.rate_floor(predicted), alpha);
        self.record("ii.5", p, format!("{label}:forbidden"), outcome);
    }

    pub(crate) fn own_marginal_test(&mut self, p: PlayerId, bits: &[Bit]) {
        if bits.is_empty() {
            return;
        }
        let ones = bits.iter().filter(|&&b| b == Bit::One).count() as u64;
        let q = self.table.own_conditional(p.index());
        let outcome = goodness_of_fit(&[ones, bits.len() as u64 - ones], &[q, 1.0 - q], self.alpha_test());
        self.record("ii.6", p, "own_marginal".into(), outcome);
    }

    /// Applies a before-forwarding displacement to every own-party mode `p` holds.
    pub(crate) fn forwarding_shift(&mut self, p: PlayerId) -> Result<()> {
        let Some(delta) = self.deviation(p).and_then(|s| displacement_delta(s, ShiftTiming::BeforeForwarding, self.config.x0)) else {
            return Ok(());
        };
        for id in 1..=self.registry.len() as u32 {
            if self.registry.instance(id).and_then(|i| i.owner(p)) == Some(p) {
                self.registry.shift(id, p, p, delta)?;
            }
        }
        Ok(())
    }

    /// Applies a before-measuring displacement to the own-party modes of
    /// `ids` that `p` still holds.
    pub(crate) fn measuring_shift(&mut self, p: PlayerId, ids: &[u32]) -> Result<()> {
        let Some(delta) = self.deviation(p).and_then(|s| displacement_delta(s, ShiftTiming::BeforeMeasuring, self.config.x0)) else {
            return Ok(());
        };
        for &id in ids {
            let held = self.registry.instance(id).is_some_and(|i| i.owner(p) == Some(p) && !i.is_measured(p));
            if held {
                self.registry.shift(id, p, p, delta)?;
            }
        }
        Ok(())
    }

    /// One round in which every player sends its flag to both others; a
    /// received 0 lowers the receiver's flag. Deviating traitors always send 1.
    pub(crate) fn exchange_flags(&mut self) -> [bool; 3] {
        for p in PlayerId::ALL {
            let value = self.deviation(p).is_some() || self.player(p).flag;
            for q in p.others() {
                self.net.send(p, q, MessageKind::Flag { value });
            }
        }
        self.net.next_round();
        for p in PlayerId::ALL {
            for m in self.net.receive(p) {
                if let MessageKind::Flag { value: false } = m.kind {
                    self.fail(p);
                }
            }
        }
        PlayerId::ALL.map(|p| self.player(p).flag)
    }

    /// True when some honest player ended a flag exchange with flag 0.
    pub fn honest_abort(&self, flags: &[bool; 3]) -> bool {
        PlayerId::ALL.iter().any(|&p| self.deviation(p).is_none() && !flags[p.index()])
    }

    pub(crate) fn receive(&mut self, p: PlayerId) -> Vec<Message> {
        self.net.receive(p)
    }

    pub(crate) fn adversary_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.adversary_rng
    }

    fn verdict(mut self, aborted: bool) -> RunVerdict {
        let w_size = self.players[0].w.len();
        RunVerdict {
            decisions: PlayerId::ALL.map(|p| self.player(p).decision),
            distribution_flags: self.distribution_flags,
            invocation_flags: self.invocation_flags,
            aborted,
            seed: self.config.seed,
            config_digest: self.config.digest(),
            traitor: self.traitor(),
            strategy: self.config.adversary.as_ref().map(|a| a.strategy.name()),
            sender_bit: self.config.sender_bit,
            m_hat_size: self.players[0].m_hat.len(),
            w_size,
            trit_rounds: w_size / 2,
            consistency: PlayerId::ALL.map(|p| self.player(p).consistency),
            tests: std::mem::take(&mut self.tests),
            transcript: self.net.take_transcript(),
        }
    }

    /// Every player aborts.
    pub fn finish_aborted(mut self) -> RunVerdict {
        for p in &mut self.players {
            p.decision = Decision::Abort;
        }
        self.verdict(true)
    }

    pub fn finish(self) -> RunVerdict {
        let aborted = PlayerId::ALL
            .iter()
            .filter(|&&p| self.deviation(p).is_none())
            .all(|&p| self.player(p).decision == Decision::Abort);
        self.verdict(aborted)
    }
}
