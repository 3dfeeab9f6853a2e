use serde::{Deserialize, Serialize};

use super::{Consistency, PlayerId};
use crate::primitive::Bit;

/// One quadrature readout; `bit: None` is a rejected value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub instance: u32,
    pub mode: PlayerId,
    pub bit: Option<Bit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum MessageKind {
    /// Hands over the sender's-party `mode` of each listed instance.
    ModeTransfer { mode: PlayerId, instances: Vec<u32> },
    IndexSet { label: String, indices: Vec<u32> },
    MeasurementReport { label: String, readings: Vec<Reading> },
    /// Instances measured as singles, and the subset read as `+-x0`.
    AcceptanceAnnouncement { measured: Vec<u32>, accepted: Vec<u32> },
    Flag { value: bool },
    BroadcastBit { bit: Bit },
    IndexDemand { label: String, indices: Vec<u32> },
    CrossCheckIndices { indices: Vec<u32> },
    FlagValue { value: Consistency },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub round: u32,
    pub sender: PlayerId,
    pub receiver: PlayerId,
    #[serde(flatten)]
    pub kind: MessageKind,
}
