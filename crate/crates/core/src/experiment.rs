//! Seeded batches of protocol runs: detection power and safety.
//!
//! Run `i` of a batch uses seed `master + i` and its own session, so a batch
//! gives the same verdicts whatever the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{FabricationPolicy, ShiftTiming, Strategy};
use crate::error::Result;
use crate::gauss::GaussianState;
use crate::primitive::Bit;
use crate::proto::{check_detectable_broadcast, full_run, PlayerId, RunConfig, RunVerdict};
use crate::stats::wilson_interval;

/// Normal quantile of the reported two-sided 95% interval.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Runs `trials` copies of `base` with seeds `master_seed + i`, without transcripts.
pub fn run_trials(base: &RunConfig, trials: u64, master_seed: u64) -> Result<Vec<RunVerdict>> {
    base.validate_for_run()?;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let cfg = RunConfig { seed: master_seed.wrapping_add(i), record_transcript: false, ..base.clone() };
            full_run(&cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub label: String,
    pub trials: u64,
    /// Runs where the honest players aborted.
    pub aborts: u64,
    pub abort_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Runs where [`check_detectable_broadcast`] failed.
    pub violations: u64,
}

pub fn summarize(label: &str, verdicts: &[RunVerdict]) -> TrialSummary {
    let trials = verdicts.len() as u64;
    let aborts = verdicts.iter().filter(|v| v.aborted).count() as u64;
    let violations = verdicts.iter().filter(|v| !check_detectable_broadcast(v)).count() as u64;
    let (ci_low, ci_high) = wilson_interval(aborts, trials, WILSON_Z);
    let abort_rate = if trials == 0 { 0.0 } else { aborts as f64 / trials as f64 };
    TrialSummary { label: label.to_string(), trials, aborts, abort_rate, ci_low, ci_high, violations }
}

/// One `(player, strategy)` case per kind of deviation and player able to play it.
pub fn strategy_catalog() -> Vec<(PlayerId, Strategy)> {
    use FabricationPolicy::*;
    use PlayerId::*;
    let mut out = Vec::new();
    for p in PlayerId::ALL {
        out.push((p, Strategy::Honest));
        for k in [0.0, 3.0] {
            for when in [ShiftTiming::BeforeForwarding, ShiftTiming::BeforeMeasuring] {
                out.push((p, Strategy::DisplacementShift { k, when }));
            }
        }
        out.push((p, Strategy::HideResults { hide_prob: 0.5 }));
        for policy in [Superset, Subset, Disjoint] {
            out.push((p, Strategy::FabricateIndexSets(policy)));
            if p != S {
                out.push((p, Strategy::LieInCrossCheck(policy)));
            }
        }
        if p != S {
            out.push((p, Strategy::FalseConsistency));
        }
    }
    out.push((R1, Strategy::RoguePrep(GaussianState::vacuum(3))));
    out.push((S, Strategy::InconsistentSenderBits { to_r0: Bit::Zero, to_r1: Bit::One }));
    out.push((S, Strategy::InconsistentSenderBits { to_r0: Bit::One, to_r1: Bit::Zero }));
    out
}

/// Comma-free label such as `S:displacement_shift(k=3;before_forwarding)`.
pub fn case_label(player: PlayerId, strategy: &Strategy) -> String {
    let detail = match strategy {
        Strategy::DisplacementShift { k, when } => {
            let w = match when {
                ShiftTiming::BeforeForwarding => "before_forwarding",
                ShiftTiming::BeforeMeasuring => "before_measuring",
            };
            format!("(k={k};{w})")
        }
        Strategy::HideResults { hide_prob } => format!("(p={hide_prob})"),
        Strategy::InconsistentSenderBits { to_r0, to_r1 } => format!("({};{})", to_r0.as_u8(), to_r1.as_u8()),
        Strategy::FabricateIndexSets(p) | Strategy::LieInCrossCheck(p) => format!("({p:?})").to_lowercase(),
        Strategy::RoguePrep(_) | Strategy::Honest | Strategy::FalseConsistency => String::new(),
    };
    format!("{player:?}:{}{detail}", strategy.name())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { instances: 4000, ..RunConfig::default() }
    }

    #[test]
    fn batches_are_reproducible() {
        let a = run_trials(&small(), 4, 10).unwrap();
        let b = run_trials(&small(), 4, 10).unwrap();
        let key = |v: &[RunVerdict]| v.iter().map(|r| (r.seed, r.decisions, r.w_size)).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
        assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11, 12, 13]);
        assert!(a.iter().all(|r| r.transcript.is_empty()));
    }

    #[test]
    fn empty_batch_summary() {
        let s = summarize("none", &[]);
        assert_eq!((s.trials, s.aborts, s.abort_rate), (0, 0, 0.0));
        assert_eq!((s.ci_low, s.ci_high), (0.0, 1.0));
    }

    #[test]
    fn catalog_is_playable() {
        let cat = strategy_catalog();
        assert_eq!(cat.len(), 38);
        for (p, s) in cat {
            assert!(small().with_adversary(p, s).is_ok());
        }
    }

    #[test]
    fn labels() {
        let s = Strategy::DisplacementShift { k: 3.0, when: ShiftTiming::BeforeForwarding };
        assert_eq!(case_label(PlayerId::S, &s), "S:displacement_shift(k=3;before_forwarding)");
        assert_eq!(case_label(PlayerId::R0, &Strategy::LieInCrossCheck(FabricationPolicy::Subset)), "R0:lie_in_cross_check(subset)");
    }
}
