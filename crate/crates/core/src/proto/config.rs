//! Run configuration and its line-based `key = value` file format.
//!
//! ```text
//! a = 3
//! sigma = 0.2
//! seed = 42
//!
//! [adversary]
//! player = S
//! strategy = displacement_shift
//! k = 3
//! when = before_forwarding
//! ```
//!
//! Blank lines and `#` comments are ignored. Keys left out keep their
//! defaults, except `seed`, which must be given.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use super::{BroadcastRules, PlayerId, SamplingMode};
use crate::adversary::{Adversary, FabricationPolicy, ShiftTiming, Strategy};
use crate::error::{Error, Result};
use crate::gauss::{family_coefficients, outcome_table_closed_form, GaussianState, MeasurementModel};
use crate::primitive::{bin_two, Bit};

/// Test-set sizes as fractions: each K set of `M`, each L set of the
/// surviving instances, each V set of the publicly accepted set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetSizing {
    pub k_fraction: f64,
    pub l_fraction: f64,
    pub v_fraction: f64,
}

impl Default for SetSizing {
    fn default() -> Self {
        Self { k_fraction: 0.06, l_fraction: 0.02, v_fraction: 0.04 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub a: f64,
    pub sigma: f64,
    pub x0: f64,
    pub epsilon: f64,
    pub instances: u32,
    pub sizing: SetSizing,
    /// Significance level for the whole run, split evenly over all tests.
    pub alpha: f64,
    /// Tolerated forbidden-outcome rate; `None` uses twice the predicted rate plus `1e-6`.
    pub rate_floor: Option<f64>,
    pub seed: u64,
    pub mode: SamplingMode,
    pub adversary: Option<Adversary>,
    pub sender_bit: Bit,
    pub rules: BroadcastRules,
    pub record_transcript: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: 3.0,
            sigma: 0.2,
            x0: 1.0,
            epsilon: 0.05,
            instances: 20_000,
            sizing: SetSizing::default(),
            alpha: 0.01,
            rate_floor: None,
            seed: 0,
            mode: SamplingMode::Discrete,
            adversary: None,
            sender_bit: Bit::Zero,
            rules: BroadcastRules::default(),
            record_transcript: true,
        }
    }
}

impl RunConfig {
    pub fn model(&self) -> Result<MeasurementModel> {
        MeasurementModel::new(self.sigma, self.x0, self.epsilon)
    }

    pub fn with_adversary(mut self, player: PlayerId, strategy: Strategy) -> Result<Self> {
        self.adversary = Some(Adversary::new(player, strategy)?);
        Ok(self)
    }

    /// Checks everything a session needs.
    pub fn validate(&self) -> Result<()> {
        family_coefficients(self.a).map_err(|e| Error::Config(e.to_string()))?;
        self.model().map_err(|e| Error::Config(e.to_string()))?;
        bin_two(0.0, self.x0, self.epsilon)?;
        let SetSizing { k_fraction: k, l_fraction: l, v_fraction: v } = self.sizing;
        for (name, f) in [("k_fraction", k), ("l_fraction", l), ("v_fraction", v)] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("{name} = {f} outside [0, 1)")));
            }
        }
        if 2.0 * k >= 1.0 {
            return Err(Error::Config(format!("two K sets of fraction {k} cover all instances")));
        }
        if 6.0 * l >= 1.0 {
            return Err(Error::Config(format!("six L sets of fraction {l} cover all instances")));
        }
        if 3.0 * v >= 1.0 {
            return Err(Error::Config(format!("three V sets of fraction {v} cover the accepted set")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if let Some(f) = self.rate_floor {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("rate_floor = {f} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Expected size of the final set `W` for honest runs.
    pub fn expected_w_size(&self) -> Result<f64> {
        let table = outcome_table_closed_form(self.a, &self.model()?)?;
        let s = self.sizing;
        let survivors = self.instances as f64 * (1.0 - 2.0 * s.k_fraction) * (1.0 - 6.0 * s.l_fraction);
        Ok(survivors * table.accept_mass.min(1.0) * (1.0 - 3.0 * s.v_fraction))
    }

    /// [`validate`](Self::validate) plus an expected `W` of at least two instances.
    pub fn validate_for_run(&self) -> Result<()> {
        self.validate()?;
        let w = self.expected_w_size()?;
        if w < 2.0 {
            return Err(Error::Config(format!(
                "{} instances give an expected W of {w:.3}; at least 2 are needed",
                self.instances
            )));
        }
        Ok(())
    }

    /// Canonical file form; parsing it yields the same configuration.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("a", self.a.to_string());
        line("sigma", self.sigma.to_string());
        line("x0", self.x0.to_string());
        line("epsilon", self.epsilon.to_string());
        line("instances", self.instances.to_string());
        line("k_fraction", self.sizing.k_fraction.to_string());
        line("l_fraction", self.sizing.l_fraction.to_string());
        line("v_fraction", self.sizing.v_fraction.to_string());
        line("alpha", self.alpha.to_string());
        line("rate_floor", self.rate_floor.map_or("auto".into(), |f| f.to_string()));
        line("seed", self.seed.to_string());
        line("mode", match self.mode {
            SamplingMode::Discrete => "discrete".into(),
            SamplingMode::Continuous => "continuous".into(),
        });
        line("sender_bit", self.sender_bit.as_u8().to_string());
        line("broadcast_rules", if self.rules == BroadcastRules::strict() { "strict" } else { "default" }.into());
        line("record_transcript", self.record_transcript.to_string());
        if let Some(adv) = &self.adversary {
            out.push_str("\n[adversary]\n");
            out.push_str(&adversary_block(adv));
        }
        out
    }

    /// SHA-256 of the canonical file form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_config_string().as_bytes()))
    }

    /// Parses the file format; `seed_override` supplies or replaces `seed`.
    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut main = BTreeMap::new();
        let mut adversary: Option<BTreeMap<String, String>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if line != "[adversary]" {
                    return Err(Error::Config(format!("line {}: unknown block {line}", lineno + 1)));
                }
                if adversary.is_some() {
                    return Err(Error::Config(format!("line {}: second adversary block", lineno + 1)));
                }
                adversary = Some(BTreeMap::new());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let target = adversary.as_mut().unwrap_or(&mut main);
            if target.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {}", lineno + 1, k.trim())));
            }
        }

        let mut cfg = RunConfig::default();
        let mut seed = None;
        for (k, v) in &main {
            match k.as_str() {
                "a" => cfg.a = num(k, v)?,
                "sigma" => cfg.sigma = num(k, v)?,
                "x0" => cfg.x0 = num(k, v)?,
                "epsilon" => cfg.epsilon = num(k, v)?,
                "instances" => cfg.instances = int(k, v)?,
                "k_fraction" => cfg.sizing.k_fraction = num(k, v)?,
                "l_fraction" => cfg.sizing.l_fraction = num(k, v)?,
                "v_fraction" => cfg.sizing.v_fraction = num(k, v)?,
                "alpha" => cfg.alpha = num(k, v)?,
                "rate_floor" => cfg.rate_floor = if v == "auto" { None } else { Some(num(k, v)?) },
                "seed" => seed = Some(int(k, v)?),
                "mode" => {
                    cfg.mode = match v.as_str() {
                        "discrete" => SamplingMode::Discrete,
                        "continuous" => SamplingMode::Continuous,
                        _ => return Err(Error::Config(format!("mode must be discrete or continuous, got {v}"))),
                    }
                }
                "sender_bit" => cfg.sender_bit = bit(k, v)?,
                "broadcast_rules" => {
                    cfg.rules = match v.as_str() {
                        "default" => BroadcastRules::default(),
                        "strict" => BroadcastRules::strict(),
                        _ => return Err(Error::Config(format!("broadcast_rules must be default or strict, got {v}"))),
                    }
                }
                "record_transcript" => {
                    cfg.record_transcript =
                        v.parse().map_err(|_| Error::Config(format!("record_transcript: not a boolean: {v}")))?
                }
                _ => return Err(Error::Config(format!("unknown key {k}"))),
            }
        }
        cfg.seed = seed_override.or(seed).ok_or_else(|| Error::Config("missing seed".into()))?;
        if let Some(block) = adversary {
            cfg.adversary = Some(parse_adversary(&block)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn num(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Config(format!("{key}: not a number: {v}")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: not finite: {v}")));
    }
    Ok(x)
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: not a non-negative integer: {v}")))
}

fn bit(key: &str, v: &str) -> Result<Bit> {
    match v {
        "0" => Ok(Bit::Zero),
        "1" => Ok(Bit::One),
        _ => Err(Error::Config(format!("{key}: expected 0 or 1, got {v}"))),
    }
}

fn policy_name(p: FabricationPolicy) -> &'static str {
    match p {
        FabricationPolicy::Superset => "superset",
        FabricationPolicy::Subset => "subset",
        FabricationPolicy::Disjoint => "disjoint",
    }
}

fn policy(v: &str) -> Result<FabricationPolicy> {
    match v {
        "superset" => Ok(FabricationPolicy::Superset),
        "subset" => Ok(FabricationPolicy::Subset),
        "disjoint" => Ok(FabricationPolicy::Disjoint),
        _ => Err(Error::Config(format!("policy must be superset, subset or disjoint, got {v}"))),
    }
}

fn numbers(key: &str, v: &str, len: usize) -> Result<Vec<f64>> {
    let xs: Vec<f64> = v.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?;
    if xs.len() != len {
        return Err(Error::Config(format!("{key}: expected {len} numbers, got {}", xs.len())));
    }
    Ok(xs)
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn adversary_block(adv: &Adversary) -> String {
    let mut out = format!("player = {:?}\nstrategy = {}\n", adv.player, adv.strategy.name());
    match &adv.strategy {
        Strategy::Honest | Strategy::FalseConsistency => {}
        Strategy::RoguePrep(state) => {
            out += &format!("gamma = {}\n", join(state.gamma().transpose().iter().copied()));
            out += &format!("displacement = {}\n", join(state.displacement().iter().copied()));
        }
        Strategy::DisplacementShift { k, when } => {
            let when = match when {
                ShiftTiming::BeforeForwarding => "before_forwarding",
                ShiftTiming::BeforeMeasuring => "before_measuring",
            };
            out += &format!("k = {k}\nwhen = {when}\n");
        }
        Strategy::HideResults { hide_prob } => out += &format!("hide_prob = {hide_prob}\n"),
        Strategy::InconsistentSenderBits { to_r0, to_r1 } => {
            out += &format!("to_r0 = {}\nto_r1 = {}\n", to_r0.as_u8(), to_r1.as_u8())
        }
        Strategy::FabricateIndexSets(p) | Strategy::LieInCrossCheck(p) => {
            out += &format!("policy = {}\n", policy_name(*p))
        }
    }
    out
}

fn parse_adversary(block: &BTreeMap<String, String>) -> Result<Adversary> {
    let get = |k: &str| block.get(k).map(String::as_str).ok_or_else(|| Error::Config(format!("adversary: missing {k}")));
    let player = PlayerId::parse(get("player")?).ok_or_else(|| Error::Config("adversary: player must be S, R0 or R1".into()))?;
    let name = get("strategy")?;
    let allowed: &[&str] = match name {
        "honest" | "false_consistency" => &[],
        "rogue_prep" => &["gamma", "displacement"],
        "displacement_shift" => &["k", "when"],
        "hide_results" => &["hide_prob"],
        "inconsistent_sender_bits" => &["to_r0", "to_r1"],
        "fabricate_index_sets" | "lie_in_cross_check" => &["policy"],
        _ => return Err(Error::Config(format!("adversary: unknown strategy {name}"))),
    };
    if let Some(extra) = block.keys().find(|k| !["player", "strategy"].contains(&k.as_str()) && !allowed.contains(&k.as_str())) {
        return Err(Error::Config(format!("adversary: key {extra} does not apply to {name}")));
    }
    let strategy = match name {
        "honest" => Strategy::Honest,
        "false_consistency" => Strategy::FalseConsistency,
        "rogue_prep" => {
            let gamma = match block.get("gamma").map(String::as_str) {
                None | Some("vacuum") => DMatrix::identity(6, 6),
                Some(v) => DMatrix::from_row_slice(6, 6, &numbers("gamma", v, 36)?),
            };
            let d = match block.get("displacement") {
                None => DVector::zeros(6),
                Some(v) => DVector::from_vec(numbers("displacement", v, 6)?),
            };
            Strategy::RoguePrep(GaussianState::new(gamma, d).map_err(|e| Error::Config(format!("rogue state: {e}")))?)
        }
        "displacement_shift" => Strategy::DisplacementShift {
            k: num("k", get("k")?)?,
            when: match block.get("when").map(String::as_str).unwrap_or("before_forwarding") {
                "before_forwarding" => ShiftTiming::BeforeForwarding,
                "before_measuring" => ShiftTiming::BeforeMeasuring,
                other => return Err(Error::Config(format!("when must be before_forwarding or before_measuring, got {other}"))),
            },
        },
        "hide_results" => Strategy::HideResults { hide_prob: num("hide_prob", get("hide_prob")?)? },
        "inconsistent_sender_bits" => Strategy::InconsistentSenderBits {
            to_r0: bit("to_r0", get("to_r0")?)?,
            to_r1: bit("to_r1", get("to_r1")?)?,
        },
        "fabricate_index_sets" => Strategy::FabricateIndexSets(policy(get("policy")?)?),
        _ => Strategy::LieInCrossCheck(policy(get("policy")?)?),
    };
    Adversary::new(player, strategy)
}
