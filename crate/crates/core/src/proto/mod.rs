//! The three-player protocol over simulated secure channels.
//!
//! A run has three phases:
//!
//! 1. distribution and test: R1 prepares and distributes the entangled
//!    instances, and two disjoint samples are sacrificed to check the W-flip
//!    correlations ([`phase_distribution`]);
//! 2. invocation: players forward secret samples to each other, measure the
//!    rest, announce acceptances and test them, yielding the shared index
//!    set `W` ([`phase_invocation`]);
//! 3. broadcast: trits extracted from `W` drive the classical detectable
//!    broadcast ([`phase_broadcast`]).
//!
//! Every step is a synchronous round on [`Network`]. Test failures and
//! malformed traitor messages lower flags; they never surface as errors.

mod broadcast;
mod config;
mod distribution;
mod invocation;
mod message;
mod network;
mod registry;
mod session;
mod transcript;

pub use broadcast::{
    consistency_check, evidence_set, phase_broadcast, sender_index_set, verify_evidence, BroadcastRules,
};
pub use config::{RunConfig, SetSizing};
pub use distribution::phase_distribution;
pub use invocation::phase_invocation;
pub use message::{Message, MessageKind, Reading};
pub use network::Network;
pub use registry::{QuantumInstance, QuantumRegistry, SamplingMode};
pub use session::{PlayerState, Session, TestRecord};
pub use transcript::{transcript_digest, transcript_jsonl, verdict_json, VERDICT_SCHEMA};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::Result;
use crate::primitive::Bit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerId {
    S,
    R0,
    R1,
}

impl PlayerId {
    pub const ALL: [PlayerId; 3] = [PlayerId::S, PlayerId::R0, PlayerId::R1];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn others(self) -> [PlayerId; 2] {
        match self {
            PlayerId::S => [PlayerId::R0, PlayerId::R1],
            PlayerId::R0 => [PlayerId::S, PlayerId::R1],
            PlayerId::R1 => [PlayerId::S, PlayerId::R0],
        }
    }

    /// The player that is neither `self` nor `other`.
    pub fn third(self, other: PlayerId) -> PlayerId {
        PlayerId::ALL.into_iter().find(|&p| p != self && p != other).expect("distinct players")
    }

    pub fn parse(s: &str) -> Option<PlayerId> {
        match s {
            "S" | "s" => Some(PlayerId::S),
            "R0" | "r0" => Some(PlayerId::R0),
            "R1" | "r1" => Some(PlayerId::R1),
            _ => None,
        }
    }
}

/// A receiver's consistency flag: the received bit, or bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Option<Bit>", from = "Option<Bit>")]
pub enum Consistency {
    Value(Bit),
    Bottom,
}

impl From<Consistency> for Option<Bit> {
    fn from(c: Consistency) -> Self {
        match c {
            Consistency::Value(b) => Some(b),
            Consistency::Bottom => None,
        }
    }
}

impl From<Option<Bit>> for Consistency {
    fn from(b: Option<Bit>) -> Self {
        b.map_or(Consistency::Bottom, Consistency::Value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Decided(Bit),
    Abort,
    Pending,
}

impl Serialize for Decision {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Decision::Decided(Bit::Zero) => "0",
            Decision::Decided(Bit::One) => "1",
            Decision::Abort => "abort",
            Decision::Pending => "pending",
        })
    }
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, Serialize)]
pub struct RunVerdict {
    pub decisions: [Decision; 3],
    /// Flags after the exchanges closing phases (i) and (ii); `None` if not reached.
    pub distribution_flags: Option<[bool; 3]>,
    pub invocation_flags: Option<[bool; 3]>,
    /// Whether the honest players aborted.
    pub aborted: bool,
    pub seed: u64,
    pub config_digest: String,
    pub traitor: Option<PlayerId>,
    pub strategy: Option<&'static str>,
    pub sender_bit: Bit,
    pub m_hat_size: usize,
    pub w_size: usize,
    pub trit_rounds: usize,
    pub consistency: [Option<Consistency>; 3],
    pub tests: Vec<TestRecord>,
    #[serde(skip)]
    pub transcript: Vec<Message>,
}

impl RunVerdict {
    pub fn decision(&self, p: PlayerId) -> Decision {
        self.decisions[p.index()]
    }

    /// Tests that failed, as `phase/player/name`.
    pub fn failed_tests(&self) -> Vec<String> {
        self.tests
            .iter()
            .filter(|t| !t.outcome.pass)
            .map(|t| format!("{}/{:?}/{}", t.phase, t.player, t.name))
            .collect()
    }
}

/// Runs all three phases, stopping at the first abort.
pub fn full_run(config: &RunConfig) -> Result<RunVerdict> {
    config.validate_for_run()?;
    let mut session = Session::new(config.clone())?;
    let flags = phase_distribution(&mut session)?;
    if session.honest_abort(&flags) {
        return Ok(session.finish_aborted());
    }
    let flags = phase_invocation(&mut session)?;
    if session.honest_abort(&flags) {
        return Ok(session.finish_aborted());
    }
    phase_broadcast(&mut session)?;
    Ok(session.finish())
}

/// The detectable-broadcast guarantee for one run.
///
/// Without a traitor every player must decide the sender's bit. With one,
/// the honest players must either all abort or all decide the same bit,
/// which must be the sender's bit when the sender is honest.
pub fn check_detectable_broadcast(verdict: &RunVerdict) -> bool {
    let honest: Vec<PlayerId> = PlayerId::ALL.into_iter().filter(|&p| Some(p) != verdict.traitor).collect();
    let decisions: Vec<Decision> = honest.iter().map(|&p| verdict.decision(p)).collect();
    match verdict.traitor {
        None => decisions.iter().all(|&d| d == Decision::Decided(verdict.sender_bit)),
        Some(traitor) => {
            if decisions.iter().all(|&d| d == Decision::Abort) {
                return true;
            }
            let first = decisions[0];
            let Decision::Decided(bit) = first else { return false };
            decisions.iter().all(|&d| d == first) && (traitor == PlayerId::S || bit == verdict.sender_bit)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(decisions: [Decision; 3], traitor: Option<PlayerId>) -> RunVerdict {
        RunVerdict {
            decisions,
            distribution_flags: None,
            invocation_flags: None,
            aborted: false,
            seed: 0,
            config_digest: String::new(),
            traitor,
            strategy: None,
            sender_bit: Bit::Zero,
            m_hat_size: 0,
            w_size: 0,
            trit_rounds: 0,
            consistency: [None; 3],
            tests: Vec::new(),
            transcript: Vec::new(),
        }
    }

    use Decision::*;

    #[test]
    fn detectable_broadcast_examples() {
        let zero = Decided(Bit::Zero);
        let one = Decided(Bit::One);
        assert!(check_detectable_broadcast(&verdict([zero; 3], None)));
        assert!(!check_detectable_broadcast(&verdict([zero, zero, Abort], None)));
        assert!(!check_detectable_broadcast(&verdict([zero, zero, one], Some(PlayerId::S))));
        assert!(check_detectable_broadcast(&verdict([Abort, one, Abort], Some(PlayerId::R0))));
        assert!(check_detectable_broadcast(&verdict([zero, one, one], Some(PlayerId::S))));
        // Honest sender: the agreed bit must be the sender's.
        assert!(!check_detectable_broadcast(&verdict([one, zero, one], Some(PlayerId::R0))));
        assert!(check_detectable_broadcast(&verdict([zero, one, zero], Some(PlayerId::R0))));
        assert!(!check_detectable_broadcast(&verdict([zero, zero, Abort], Some(PlayerId::R0))));
        assert!(check_detectable_broadcast(&verdict([zero, Abort, zero], Some(PlayerId::R0))));
        assert!(!check_detectable_broadcast(&verdict([Pending, zero, zero], Some(PlayerId::R1))));
    }

    #[test]
    fn player_helpers() {
        assert_eq!(PlayerId::S.third(PlayerId::R1), PlayerId::R0);
        assert_eq!(PlayerId::R1.others(), [PlayerId::S, PlayerId::R0]);
        assert_eq!(PlayerId::parse("R0"), Some(PlayerId::R0));
        assert_eq!(serde_json::to_string(&Consistency::Bottom).unwrap(), "null");
        assert_eq!(serde_json::to_string(&Consistency::Value(Bit::One)).unwrap(), "1");
    }
}
