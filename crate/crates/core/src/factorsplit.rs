//! Complementary-pair splits on factors.
//!
//! A split of a factor with `L` labels is a bit vector of `ceil(L / 32)`
//! 32-bit words: bit `b` set sends label `b` to the left daughter. A pair and
//! its complement describe the same split, so only the canonical member (bit
//! 0 clear, label 0 always goes right) is ever built. That leaves exactly
//! `2^(L-1) - 1` distinct splits per factor.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FactorSchema;
use crate::error::{invalid, Error, Result};

/// Returned by [`num_complementary_pairs`] when the count does not fit in a
/// `u64` (more than 63 labels).
pub const UNBOUNDED_PAIRS: u64 = u64::MAX;

/// Largest factor whose pairs can be enumerated in one word.
pub const MAX_ENUMERABLE_LABELS: usize = 32;

/// Largest factor [`enumerate_pairs`] will materialize as a list.
pub const MAX_LISTED_LABELS: usize = 24;

const MAX_REJECTIONS: usize = 1000;

/// Number of distinct complementary pairs, `2^(L-1) - 1`.
pub fn num_complementary_pairs(label_count: usize) -> Result<u64> {
    if label_count < 2 {
        return Err(invalid(format!(
            "a factor needs at least 2 labels to split, got {label_count}"
        )));
    }
    Ok(pair_count_saturating(label_count))
}

pub(crate) fn pair_count_saturating(label_count: usize) -> u64 {
    match label_count {
        0 | 1 => 0,
        l if l > 63 => UNBOUNDED_PAIRS,
        l => (1u64 << (l - 1)) - 1,
    }
}

/// Upper bound on the splits evaluated at a root node,
/// `sum_j 2^(L_j - 1) - d`. Single-label variables contribute nothing.
pub fn max_root_splits(schema: &FactorSchema) -> u64 {
    schema
        .variables
        .iter()
        .map(|v| pair_count_saturating(v.label_count()))
        .fold(0u64, |acc, c| acc.saturating_add(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Daughter {
    Left,
    Right,
}

/// Canonical multi-word complementary pair.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct ComplementaryPair {
    words: Vec<u32>,
    label_count: usize,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    label_count: usize,
    words: Vec<u32>,
}

impl TryFrom<RawPair> for ComplementaryPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        ComplementaryPair::from_words(raw.label_count, raw.words)
    }
}

impl From<ComplementaryPair> for RawPair {
    fn from(p: ComplementaryPair) -> Self {
        RawPair {
            label_count: p.label_count,
            words: p.words,
        }
    }
}

pub(crate) fn word_count(label_count: usize) -> usize {
    label_count.div_ceil(32)
}

fn tail_mask(label_count: usize) -> u32 {
    match label_count % 32 {
        0 => u32::MAX,
        r => (1u32 << r) - 1,
    }
}

impl ComplementaryPair {
    /// Build from raw words. The pattern is canonicalized; it must leave
    /// both daughters non-empty and have no bits at or above `label_count`.
    pub fn from_words(label_count: usize, mut words: Vec<u32>) -> Result<Self> {
        if label_count < 2 {
            return Err(invalid("a split needs at least 2 labels"));
        }
        if words.len() != word_count(label_count) {
            return Err(invalid(format!(
                "{label_count} labels need {} words, got {}",
                word_count(label_count),
                words.len()
            )));
        }
        let last = words.len() - 1;
        if words[last] & !tail_mask(label_count) != 0 {
            return Err(invalid("bits set beyond the label count"));
        }
        let all_clear = words.iter().all(|&w| w == 0);
        let all_set = words[..last].iter().all(|&w| w == u32::MAX)
            && words[last] == tail_mask(label_count);
        if all_clear || all_set {
            return Err(invalid("one daughter would be empty"));
        }
        canonicalize(&mut words, label_count);
        Ok(Self { words, label_count })
    }

    /// Build from the labels that go left.
    pub fn from_left_labels(label_count: usize, left: &[usize]) -> Result<Self> {
        let mut words = vec![0u32; word_count(label_count)];
        for &l in left {
            if l >= label_count {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    label_count,
                });
            }
            words[l / 32] |= 1 << (l % 32);
        }
        Self::from_words(label_count, words)
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Whether `label` goes left. Labels beyond the factor go right.
    #[inline]
    pub fn is_left(&self, label: usize) -> bool {
        label < self.label_count && self.words[label / 32] >> (label % 32) & 1 == 1
    }

    pub fn assign_daughter(&self, label: usize) -> Result<Daughter> {
        if label >= self.label_count {
            return Err(Error::LabelOutOfRange {
                label,
                label_count: self.label_count,
            });
        }
        Ok(if self.is_left(label) {
            Daughter::Left
        } else {
            Daughter::Right
        })
    }

    pub fn left_labels(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.label_count).filter(|&l| self.is_left(l))
    }
}

impl fmt::Debug for ComplementaryPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let left: Vec<usize> = self.left_labels().collect();
        write!(f, "Pair(L={}, left={:?})", self.label_count, left)
    }
}

/// Flip to the member of the pair with bit 0 clear.
fn canonicalize(words: &mut [u32], label_count: usize) {
    if words[0] & 1 == 1 {
        let last = words.len() - 1;
        for w in words.iter_mut() {
            *w = !*w;
        }
        words[last] &= tail_mask(label_count);
    }
}

/// All canonical pairs of a single-word factor, in increasing word order.
pub fn enumerate_pairs(label_count: usize) -> Result<Vec<ComplementaryPair>> {
    if !(2..=MAX_LISTED_LABELS).contains(&label_count) {
        return Err(invalid(format!(
            "pair listing needs 2..={MAX_LISTED_LABELS} labels, got {label_count}; sample instead"
        )));
    }
    // canonical patterns are exactly the nonzero even values below 2^L - 1
    let top = (1u64 << label_count) - 1;
    Ok((1..)
        .map(|k| 2 * k as u64)
        .take_while(|&w| w < top)
        .map(|w| ComplementaryPair {
            words: vec![w as u32],
            label_count,
        })
        .collect())
}

/// Draw a canonical pair uniformly over all `2^(L-1) - 1` pairs.
///
/// Each label is a fair coin; all-left and all-right patterns are rejected
/// and the survivor is canonicalized. Every unordered pair owns exactly two
/// of the `2^L - 2` valid patterns, hence uniformity. Works for any `L`.
pub fn sample_pair<R: Rng + ?Sized>(label_count: usize, rng: &mut R) -> Result<ComplementaryPair> {
    if label_count < 2 {
        return Err(invalid("a split needs at least 2 labels"));
    }
    if label_count == 2 {
        return Ok(ComplementaryPair {
            words: vec![0b10],
            label_count,
        });
    }
    let n_words = word_count(label_count);
    let mask = tail_mask(label_count);
    for _ in 0..MAX_REJECTIONS {
        let mut words: Vec<u32> = (0..n_words).map(|_| rng.random::<u32>()).collect();
        words[n_words - 1] &= mask;
        let all_clear = words.iter().all(|&w| w == 0);
        let all_set =
            words[..n_words - 1].iter().all(|&w| w == u32::MAX) && words[n_words - 1] == mask;
        if all_clear || all_set {
            continue;
        }
        canonicalize(&mut words, label_count);
        return Ok(ComplementaryPair { words, label_count });
    }
    Err(invalid("pair sampling exceeded the rejection cap"))
}

/// Persisted split layout: variable index (u32 LE), label count (u32 LE),
/// then `ceil(L / 32)` little-endian u32 words.
pub fn encode_split(variable: usize, pair: &ComplementaryPair) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * pair.words.len());
    out.extend_from_slice(&(variable as u32).to_le_bytes());
    out.extend_from_slice(&(pair.label_count as u32).to_le_bytes());
    for w in &pair.words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn decode_split(bytes: &[u8]) -> Result<(usize, ComplementaryPair)> {
    let read = |k: usize| -> Result<u32> {
        bytes
            .get(4 * k..4 * k + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| invalid("persisted split is truncated"))
    };
    let variable = read(0)? as usize;
    let label_count = read(1)? as usize;
    let n_words = word_count(label_count);
    if bytes.len() != 8 + 4 * n_words {
        return Err(invalid(format!(
            "persisted split for {label_count} labels must be {} bytes, got {}",
            8 + 4 * n_words,
            bytes.len()
        )));
    }
    let words = (0..n_words).map(|k| read(2 + k)).collect::<Result<Vec<_>>>()?;
    let pair = ComplementaryPair::from_words(label_count, words)?;
    Ok((variable, pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use std::collections::{BTreeSet, HashMap};

    /// Unordered bipartitions of {0..L} by brute force over all subsets.
    fn brute_force_bipartitions(l: usize) -> BTreeSet<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for mask in 1u64..(1u64 << l) - 1 {
            let side: BTreeSet<usize> = (0..l).filter(|&b| mask >> b & 1 == 1).collect();
            let other: BTreeSet<usize> = (0..l).filter(|&b| mask >> b & 1 == 0).collect();
            // key each bipartition by the side without label 0
            out.insert(if side.contains(&0) { other } else { side });
        }
        out
    }

    #[test]
    fn pair_counts() {
        assert_eq!(num_complementary_pairs(2).unwrap(), 1);
        assert_eq!(num_complementary_pairs(3).unwrap(), 3);
        assert_eq!(num_complementary_pairs(30).unwrap(), (1 << 29) - 1);
        assert_eq!(num_complementary_pairs(63).unwrap(), (1 << 62) - 1);
        assert_eq!(num_complementary_pairs(64).unwrap(), UNBOUNDED_PAIRS);
        assert!(num_complementary_pairs(1).is_err());
        for l in 2..=10 {
            assert_eq!(
                num_complementary_pairs(l).unwrap() as usize,
                brute_force_bipartitions(l).len()
            );
        }
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for l in 2..=10 {
            let pairs = enumerate_pairs(l).unwrap();
            assert_eq!(pairs.len() as u64, num_complementary_pairs(l).unwrap());
            assert!(pairs.windows(2).all(|w| w[0].words[0] < w[1].words[0]));
            let lefts: BTreeSet<BTreeSet<usize>> =
                pairs.iter().map(|p| p.left_labels().collect()).collect();
            assert_eq!(lefts.len(), pairs.len());
            assert_eq!(lefts, brute_force_bipartitions(l));
            assert!(pairs.iter().all(|p| !p.is_left(0)));
        }
    }

    #[test]
    fn three_labels_give_three_pairings() {
        let lefts: Vec<Vec<usize>> = enumerate_pairs(3)
            .unwrap()
            .iter()
            .map(|p| p.left_labels().collect())
            .collect();
        assert_eq!(lefts, vec![vec![1], vec![2], vec![1, 2]]);
        assert_eq!(enumerate_pairs(2).unwrap()[0].words(), &[0b10]);
    }

    #[test]
    fn enumeration_range_is_limited() {
        assert!(enumerate_pairs(1).is_err());
        assert!(enumerate_pairs(25).is_err());
        assert_eq!(enumerate_pairs(12).unwrap().len(), 2047);
    }

    #[test]
    fn from_left_labels_canonicalizes() {
        let p = ComplementaryPair::from_left_labels(3, &[0]).unwrap();
        assert_eq!(p.left_labels().collect::<Vec<_>>(), vec![1, 2]);
        assert!(ComplementaryPair::from_left_labels(3, &[]).is_err());
        assert!(ComplementaryPair::from_left_labels(3, &[0, 1, 2]).is_err());
        assert!(ComplementaryPair::from_left_labels(3, &[3]).is_err());
    }

    #[test]
    fn assign_daughter_follows_bits() {
        let p = ComplementaryPair::from_left_labels(3, &[1, 2]).unwrap();
        assert_eq!(p.assign_daughter(0).unwrap(), Daughter::Right);
        let q = ComplementaryPair::from_left_labels(3, &[1]).unwrap();
        assert_eq!(q.assign_daughter(1).unwrap(), Daughter::Left);
        assert!(q.assign_daughter(3).is_err());
        for l in 2..=10 {
            for pair in enumerate_pairs(l).unwrap() {
                for label in 0..l {
                    let bit = pair.words()[0] >> label & 1 == 1;
                    let want = if bit { Daughter::Left } else { Daughter::Right };
                    assert_eq!(pair.assign_daughter(label).unwrap(), want);
                }
            }
        }
    }

    #[test]
    fn sampling_two_labels_is_the_unique_pair() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..10 {
            let p = sample_pair(2, &mut rng).unwrap();
            assert_eq!(p.left_labels().collect::<Vec<_>>(), vec![1]);
        }
    }

    #[test]
    fn sampling_three_labels_is_uniform() {
        let mut rng = stream_rng(11, 0);
        let draws = 100_000;
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(sample_pair(3, &mut rng).unwrap().words()[0]).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        let expected = draws as f64 / 3.0;
        let mut chi2 = 0.0;
        for &c in counts.values() {
            let frac = c as f64 / draws as f64;
            assert!((frac - 1.0 / 3.0).abs() < 0.01, "frequency {frac}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // chi-square, 2 dof: p > 0.001 <=> statistic < 13.816
        assert!(chi2 < 13.816, "chi2 = {chi2}");
    }

    #[test]
    fn sampling_five_labels_is_balanced() {
        let mut rng = stream_rng(5, 0);
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for _ in 0..100_000 {
            let p = sample_pair(5, &mut rng).unwrap();
            assert!(!p.is_left(0));
            *counts.entry(p.words()[0]).or_default() += 1;
        }
        assert_eq!(counts.len(), 15);
        let min = *counts.values().min().unwrap() as f64;
        let max = *counts.values().max().unwrap() as f64;
        assert!(max / min < 1.2, "ratio {}", max / min);
    }

    #[test]
    fn wide_factors_use_multiple_words() {
        let mut rng = stream_rng(3, 0);
        let p = sample_pair(512, &mut rng).unwrap();
        assert_eq!(p.words().len(), 16);
        let q = sample_pair(33, &mut rng).unwrap();
        assert_eq!(q.words().len(), 2);
        assert_eq!(q.words()[1] & !1, 0);
    }

    #[test]
    fn persisted_split_is_little_endian() {
        let p = ComplementaryPair::from_left_labels(40, &[1, 33]).unwrap();
        let bytes = encode_split(7, &p);
        assert_eq!(
            bytes,
            vec![7, 0, 0, 0, 40, 0, 0, 0, 0b10, 0, 0, 0, 0b10, 0, 0, 0]
        );
        let (v, back) = decode_split(&bytes).unwrap();
        assert_eq!(v, 7);
        assert_eq!(back, p);
        assert!(decode_split(&bytes[..12]).is_err());
    }

    #[test]
    fn persisted_split_rejects_non_canonical_garbage() {
        // bits above the label count
        let mut bytes = encode_split(0, &ComplementaryPair::from_left_labels(3, &[1]).unwrap());
        bytes[8] = 0b1010;
        assert!(decode_split(&bytes).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sampled_pairs_round_trip(
                l in prop::sample::select(vec![2usize, 31, 32, 33, 64, 512]),
                seed in any::<u64>(),
                var in 0usize..1000,
            ) {
                let mut rng = stream_rng(seed, 0);
                let p = sample_pair(l, &mut rng).unwrap();
                prop_assert!(!p.is_left(0));
                prop_assert!(p.left_labels().next().is_some());
                let (v, back) = decode_split(&encode_split(var, &p)).unwrap();
                prop_assert_eq!(v, var);
                prop_assert_eq!(back.words(), p.words());
                let json = serde_json::to_string(&p).unwrap();
                let from_json: ComplementaryPair = serde_json::from_str(&json).unwrap();
                prop_assert_eq!(from_json, p);
            }
        }
    }
}
