//! The W-flip primitive and its trit encoding.
//!
//! A W-flip round hands each player one bit; ideally exactly one player
//! reads 1. Two consecutive rounds give each player a pair of bits, which is
//! mapped to a trit: `(1,0) -> 0`, `(0,1) -> 1`, `(0,0) -> 2`, `(1,1) -> Z`.
//! Under ideal rounds the resulting columns are either a permutation of
//! `{0, 1, 2}` or one `Z` against two `2`s, each with probability 1/9.

mod feasibility;
mod qflip;
mod sampling;

pub use feasibility::{a_boundary, feasibility_margin, wflip_feasible, FeasibilityVerdict};
pub use qflip::{direct_qflip_table, QFlipTable};
pub use sampling::{ContinuousSample, ContinuousSampler, DiscreteSampler};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::OutcomeTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b.as_u8()
    }
}

impl TryFrom<u8> for Bit {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            _ => Err(Error::InvalidParameter(format!("bit must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trit {
    Zero,
    One,
    Two,
    Z,
}

impl Trit {
    /// The trit equal to a broadcast bit.
    pub fn from_bit(b: Bit) -> Self {
        match b {
            Bit::Zero => Trit::Zero,
            Bit::One => Trit::One,
        }
    }
}

/// Bins one measured quadrature into the `+x0` window (1), the `-x0` window
/// (0), or rejects it.
pub fn bin_two(x: f64, x0: f64, epsilon: f64) -> Result<Option<Bit>> {
    if !(x0 > 0.0) {
        return Err(Error::Config(format!("x0 must be positive, got {x0}")));
    }
    if !(epsilon >= 0.0) || epsilon >= x0 {
        return Err(Error::Config(format!("window half-width {epsilon} must lie in [0, x0 = {x0})")));
    }
    Ok(if (x - x0).abs() <= epsilon {
        Some(Bit::One)
    } else if (x + x0).abs() <= epsilon {
        Some(Bit::Zero)
    } else {
        None
    })
}

pub fn pair_to_trit(first: Bit, second: Bit) -> Trit {
    match (first, second) {
        (Bit::One, Bit::Zero) => Trit::Zero,
        (Bit::Zero, Bit::One) => Trit::One,
        (Bit::Zero, Bit::Zero) => Trit::Two,
        (Bit::One, Bit::One) => Trit::Z,
    }
}

/// One player's trits from its bits in canonical round order.
pub fn player_trits(bits: &[Bit]) -> Result<Vec<Trit>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("odd number of rounds ({})", bits.len())));
    }
    Ok(bits.chunks_exact(2).map(|p| pair_to_trit(p[0], p[1])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WFlipRound {
    pub index: u32,
    pub bits: OutcomeTriple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TritRound {
    /// 1-based position in the trit sequence.
    pub index: u32,
    pub trits: [Trit; 3],
}

/// Pairs rounds `(2j-1, 2j)` in index order and maps each player's pair to a trit.
pub fn build_trit_sequence(rounds: &[WFlipRound]) -> Result<Vec<TritRound>> {
    if !rounds.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("odd number of rounds ({})", rounds.len())));
    }
    let mut sorted = rounds.to_vec();
    sorted.sort_by_key(|r| r.index);
    if sorted.windows(2).any(|w| w[0].index == w[1].index) {
        return Err(Error::InvalidParameter("duplicate round index".into()));
    }
    let bit = |r: &WFlipRound, p: usize| if r.bits.bit(p) == 1 { Bit::One } else { Bit::Zero };
    Ok(sorted
        .chunks_exact(2)
        .enumerate()
        .map(|(j, pair)| TritRound {
            index: j as u32 + 1,
            trits: [0, 1, 2].map(|p| pair_to_trit(bit(&pair[0], p), bit(&pair[1], p))),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn round(index: u32, bits: [u8; 3]) -> WFlipRound {
        WFlipRound { index, bits: OutcomeTriple::from_bits(bits) }
    }

    #[test]
    fn binning() {
        assert_eq!(bin_two(1.0, 1.0, 0.0).unwrap(), Some(Bit::One));
        assert_eq!(bin_two(-1.0, 1.0, 0.05).unwrap(), Some(Bit::Zero));
        assert_eq!(bin_two(0.0, 1.0, 0.05).unwrap(), None);
        assert_eq!(bin_two(1.04, 1.0, 0.05).unwrap(), Some(Bit::One));
        assert!(matches!(bin_two(0.0, 1.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn trit_mapping() {
        assert_eq!(pair_to_trit(Bit::One, Bit::Zero), Trit::Zero);
        assert_eq!(pair_to_trit(Bit::Zero, Bit::One), Trit::One);
        assert_eq!(pair_to_trit(Bit::Zero, Bit::Zero), Trit::Two);
        assert_eq!(pair_to_trit(Bit::One, Bit::One), Trit::Z);
    }

    #[test]
    fn trit_sequence_examples() {
        let t = build_trit_sequence(&[round(1, [1, 0, 0]), round(2, [0, 1, 0])]).unwrap();
        assert_eq!(t[0].trits, [Trit::Zero, Trit::One, Trit::Two]);
        let t = build_trit_sequence(&[round(2, [1, 0, 0]), round(1, [1, 0, 0])]).unwrap();
        assert_eq!(t[0].trits, [Trit::Z, Trit::Two, Trit::Two]);
        assert!(build_trit_sequence(&[]).unwrap().is_empty());
        assert!(build_trit_sequence(&[round(1, [1, 0, 0])]).is_err());
        assert!(build_trit_sequence(&[round(1, [1, 0, 0]), round(1, [0, 1, 0])]).is_err());
    }

    #[test]
    fn ideal_rounds_give_nine_equiprobable_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let one_hot = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        let rounds: Vec<WFlipRound> =
            (0..200_000).map(|i| round(i + 1, one_hot[rng.random_range(0..3)])).collect();
        let trits = build_trit_sequence(&rounds).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for t in &trits {
            *counts.entry(format!("{:?}", t.trits)).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 9);
        let cells: Vec<u64> = counts.values().copied().collect();
        assert!(crate::stats::uniform_test(&cells, 0.01).unwrap().pass);
    }

    #[test]
    fn bit_serde_is_numeric() {
        assert_eq!(serde_json::to_string(&Bit::One).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Bit>("0").unwrap(), Bit::Zero);
        assert!(serde_json::from_str::<Bit>("2").is_err());
    }
}
