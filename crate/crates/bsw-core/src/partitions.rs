//! Copy partitions: the state space of the homogeneous delay chain.
//!
//! A message sprayed with replication factor `L = 2^k` is always split into
//! copy blocks whose sizes are powers of two, so the set of nodes holding
//! copies is described by a partition of `2^k` into powers of two. We store a
//! partition as the count vector `(a_0, ..., a_k)` where `a_j` is the number
//! of nodes holding `2^j` copies.
//!
//! The number of such partitions, `beta(k)`, grows quickly (27 338 for
//! `k = 7`); [`enumerate_partitions`] materializes them up to `k = 8` while
//! [`count_partitions`] evaluates `beta(k)` exactly without enumeration.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use thiserror::Error;

/// Largest exponent accepted by [`enumerate_partitions`] (692 004 partitions).
pub const MAX_ENUMERATION_EXPONENT: u32 = 8;

/// Largest exponent accepted by [`count_partitions`].
pub const MAX_COUNT_EXPONENT: u32 = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error(
        "replication exponent {k} exceeds the enumeration ceiling {MAX_ENUMERATION_EXPONENT} \
         (692004 partitions at the ceiling)"
    )]
    EnumerationCeiling { k: u32 },
    #[error("replication exponent {k} exceeds the counting ceiling {MAX_COUNT_EXPONENT}")]
    CountCeiling { k: u32 },
    #[error("copy counts {counts:?} sum to {total}, expected the power of two {expected}")]
    BrokenConservation {
        counts: Vec<u32>,
        total: u64,
        expected: u64,
    },
    #[error("a partition needs at least one count entry")]
    Empty,
}

/// A partition of `2^k` copies into power-of-two blocks, stored as counts.
///
/// `counts()[j]` is the number of nodes holding exactly `2^j` copies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CopyPartition {
    counts: Vec<u32>,
}

impl CopyPartition {
    /// Builds a partition from its count vector, checking copy conservation:
    /// the counts must sum (weighted by block size) to `2^(len - 1)`.
    pub fn new(counts: Vec<u32>) -> Result<Self, PartitionError> {
        if counts.is_empty() {
            return Err(PartitionError::Empty);
        }
        let expected = 1u64 << (counts.len() - 1);
        let total: u64 = counts
            .iter()
            .enumerate()
            .map(|(j, &a)| u64::from(a) << j)
            .sum();
        if total != expected {
            return Err(PartitionError::BrokenConservation {
                counts,
                total,
                expected,
            });
        }
        Ok(Self { counts })
    }

    /// Count vector `(a_0, ..., a_k)`.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// The exponent `k`, i.e. the partition is of `2^k` copies.
    pub fn exponent(&self) -> u32 {
        (self.counts.len() - 1) as u32
    }

    /// Number of nodes holding `2^j` copies (`a_j`); zero beyond the vector.
    pub fn count_at(&self, j: u32) -> u32 {
        self.counts.get(j as usize).copied().unwrap_or(0)
    }

    /// Total number of copies in circulation (always `2^k`).
    pub fn total_copies(&self) -> u64 {
        1u64 << self.exponent()
    }

    /// Number of nodes holding at least one copy (`n_p`).
    pub fn holder_count(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Block sizes in decreasing order, e.g. `[4, 1, 1]`.
    pub fn parts(&self) -> Vec<u64> {
        let mut parts = Vec::with_capacity(self.holder_count() as usize);
        for j in (0..self.counts.len()).rev() {
            for _ in 0..self.counts[j] {
                parts.push(1u64 << j);
            }
        }
        parts
    }

    /// Successor partition when a block of `2^m` copies is split in half:
    /// one node keeps `2^(m-1)` and a new holder receives `2^(m-1)`.
    ///
    /// Returns `None` when no block of that size exists or `m == 0`.
    pub fn split(&self, m: u32) -> Option<CopyPartition> {
        if m == 0 || self.count_at(m) == 0 {
            return None;
        }
        let mut counts = self.counts.clone();
        counts[m as usize] -= 1;
        counts[(m - 1) as usize] += 2;
        Some(Self { counts })
    }
}

impl std::fmt::Display for CopyPartition {
    /// Renders the block multiset, e.g. `{2,1,1}`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (idx, part) in self.parts().iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{part}")?;
        }
        write!(f, "}}")
    }
}

/// Enumerates every partition of `2^k` into powers of two, in canonical
/// order: lexicographically decreasing on `(a_k, a_(k-1), ..., a_0)`. The
/// all-copies-at-one-node partition is therefore always index 0.
pub fn enumerate_partitions(k: u32) -> Result<Vec<CopyPartition>, PartitionError> {
    if k > MAX_ENUMERATION_EXPONENT {
        return Err(PartitionError::EnumerationCeiling { k });
    }
    let mut out = Vec::new();
    let mut counts = vec![0u32; k as usize + 1];
    fill(k as usize, 1u64 << k, &mut counts, &mut out);
    Ok(out)
}

fn fill(j: usize, remaining: u64, counts: &mut Vec<u32>, out: &mut Vec<CopyPartition>) {
    if j == 0 {
        counts[0] = remaining as u32;
        out.push(CopyPartition {
            counts: counts.clone(),
        });
        counts[0] = 0;
        return;
    }
    let block = 1u64 << j;
    for a in (0..=remaining / block).rev() {
        counts[j] = a as u32;
        fill(j - 1, remaining - a * block, counts, out);
    }
    counts[j] = 0;
}

/// Exact number of partitions of `2^k` into powers of two (`beta(k)`),
/// without materializing them.
///
/// Let `P_j(c)` be the number of ways to write `c * 2^j` as a sum of powers
/// of two no larger than `2^j`. Then `P_0 = 1`, `P_j(c) = sum_{d<=c}
/// P_(j-1)(2d)` and `beta(k) = P_k(1)`. Each `P_j` is a degree-`j`
/// integer-valued polynomial, so the table is advanced with Newton forward
/// differences over exact big integers — valid far beyond the enumeration
/// ceiling.
pub fn count_partitions(k: u32) -> Result<BigUint, PartitionError> {
    if k > MAX_COUNT_EXPONENT {
        return Err(PartitionError::CountCeiling { k });
    }
    let mut values: Vec<BigInt> = vec![BigInt::one()];
    for j in 1..=k as usize {
        extend_polynomial_values(&mut values, 2 * j + 1);
        let mut next = Vec::with_capacity(j + 1);
        let mut acc = BigInt::zero();
        for c in 0..=j {
            acc += &values[2 * c];
            next.push(acc.clone());
        }
        values = next;
    }
    let idx = usize::min(1, values.len() - 1);
    Ok(values[idx]
        .to_biguint()
        .expect("partition counts are nonnegative"))
}

/// Extends a table of consecutive integer values of an integer-valued
/// polynomial (degree < current length) to `target_len` entries using its
/// forward-difference pyramid.
fn extend_polynomial_values(values: &mut Vec<BigInt>, target_len: usize) {
    let mut rows: Vec<Vec<BigInt>> = vec![std::mem::take(values)];
    while rows.last().unwrap().len() > 1 {
        let prev = rows.last().unwrap();
        let diff: Vec<BigInt> = prev.windows(2).map(|w| &w[1] - &w[0]).collect();
        rows.push(diff);
    }
    while rows[0].len() < target_len {
        let bottom = rows.len() - 1;
        let constant = rows[bottom].last().unwrap().clone();
        rows[bottom].push(constant);
        for i in (0..bottom).rev() {
            let next = rows[i].last().unwrap() + rows[i + 1].last().unwrap();
            rows[i].push(next);
        }
    }
    *values = rows.swap_remove(0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// beta(k) for k = 0..=8, cross-checked below by two independent routes.
    const KNOWN_COUNTS: [u64; 9] = [1, 2, 4, 10, 36, 202, 1828, 27338, 692004];

    /// Independent oracle: classic bounded-part partition recursion over the
    /// part values themselves (not count vectors), filtered to powers of two.
    fn brute_force_partitions(total: u64) -> Vec<Vec<u64>> {
        fn rec(remaining: u64, max_part: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if remaining == 0 {
                out.push(prefix.clone());
                return;
            }
            let mut part = max_part.min(remaining);
            while part >= 1 {
                if part.is_power_of_two() {
                    prefix.push(part);
                    rec(remaining - part, part, prefix, out);
                    prefix.pop();
                }
                part -= 1;
            }
        }
        let mut out = Vec::new();
        rec(total, total, &mut Vec::new(), &mut out);
        out
    }

    /// Independent oracle: coin-change dynamic program over an explicit value
    /// table, feasible for small exponents only.
    fn coin_change_count(k: u32) -> u128 {
        let n = 1usize << k;
        let mut table = vec![0u128; n + 1];
        table[0] = 1;
        for j in 0..=k {
            let part = 1usize << j;
            for s in part..=n {
                table[s] += table[s - part];
            }
        }
        table[n]
    }

    #[test]
    fn single_copy_has_one_partition() {
        let parts = enumerate_partitions(0).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].counts(), &[1]);
        assert_eq!(parts[0].to_string(), "{1}");
    }

    #[test]
    fn four_copies_enumerates_exactly_four_partitions() {
        let parts = enumerate_partitions(2).unwrap();
        let rendered: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
        assert_eq!(rendered, vec!["{4}", "{2,2}", "{2,1,1}", "{1,1,1,1}"]);
    }

    #[test]
    fn enumeration_matches_known_counts() {
        for k in 0..=6 {
            let parts = enumerate_partitions(k).unwrap();
            assert_eq!(parts.len() as u64, KNOWN_COUNTS[k as usize], "k={k}");
        }
    }

    #[test]
    fn enumeration_matches_brute_force_up_to_k4() {
        for k in 0..=4u32 {
            let enumerated: HashSet<Vec<u64>> = enumerate_partitions(k)
                .unwrap()
                .iter()
                .map(|p| p.parts())
                .collect();
            let oracle: HashSet<Vec<u64>> = brute_force_partitions(1 << k)
                .into_iter()
                .map(|mut parts| {
                    parts.sort_unstable_by(|a, b| b.cmp(a));
                    parts
                })
                .collect();
            assert_eq!(enumerated, oracle, "k={k}");
        }
    }

    #[test]
    fn enumeration_order_is_lexicographically_decreasing() {
        for k in 0..=6u32 {
            let parts = enumerate_partitions(k).unwrap();
            // Index 0 is the single-block partition: everything at one node.
            assert_eq!(parts[0].count_at(k), 1);
            assert_eq!(parts[0].holder_count(), 1);
            for pair in parts.windows(2) {
                let hi: Vec<u32> = pair[0].counts().iter().rev().copied().collect();
                let lo: Vec<u32> = pair[1].counts().iter().rev().copied().collect();
                assert!(hi > lo, "order violated at k={k}: {hi:?} !> {lo:?}");
            }
        }
    }

    #[test]
    fn enumeration_has_no_duplicates_and_conserves_copies() {
        for k in 0..=6u32 {
            let parts = enumerate_partitions(k).unwrap();
            let unique: HashSet<&[u32]> = parts.iter().map(|p| p.counts()).collect();
            assert_eq!(unique.len(), parts.len());
            for p in &parts {
                let total: u64 = p
                    .counts()
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| u64::from(a) << j)
                    .sum();
                assert_eq!(total, 1 << k);
                assert!(p.holder_count() >= 1);
            }
        }
    }

    #[test]
    fn enumeration_rejects_exponent_above_ceiling() {
        assert_eq!(
            enumerate_partitions(9),
            Err(PartitionError::EnumerationCeiling { k: 9 })
        );
    }

    #[test]
    fn count_matches_known_values() {
        for (k, &expected) in KNOWN_COUNTS.iter().enumerate() {
            assert_eq!(
                count_partitions(k as u32).unwrap(),
                BigUint::from(expected),
                "k={k}"
            );
        }
    }

    #[test]
    fn count_matches_coin_change_oracle_up_to_k10() {
        for k in 0..=10u32 {
            let expected = coin_change_count(k);
            let got = count_partitions(k).unwrap();
            assert_eq!(got.to_string(), expected.to_string(), "k={k}");
        }
    }

    #[test]
    fn count_matches_enumeration_everywhere_enumeration_works() {
        for k in 0..=MAX_ENUMERATION_EXPONENT {
            let enumerated = enumerate_partitions(k).unwrap().len();
            assert_eq!(count_partitions(k).unwrap(), BigUint::from(enumerated));
        }
    }

    #[test]
    fn count_handles_the_full_supported_range() {
        // Exact big-integer arithmetic: values grow roughly as 2^(k^2/2), far
        // beyond any fixed-width integer. Just check strict growth and size.
        let mut prev = count_partitions(0).unwrap();
        for k in 1..=MAX_COUNT_EXPONENT {
            let next = count_partitions(k).unwrap();
            assert!(next > prev, "beta must grow with k");
            prev = next;
        }
        assert!(prev.to_string().len() > 100, "beta(30) is astronomically large");
        assert_eq!(
            count_partitions(31),
            Err(PartitionError::CountCeiling { k: 31 })
        );
    }

    #[test]
    fn split_moves_one_block_down_a_level() {
        let start = CopyPartition::new(vec![0, 0, 1]).unwrap(); // {4}
        let next = start.split(2).unwrap();
        assert_eq!(next.counts(), &[0, 2, 0]); // {2,2}
        assert_eq!(next.split(2), None);
        let last = next.split(1).unwrap();
        assert_eq!(last.counts(), &[2, 1, 0]); // {2,1,1}
        assert_eq!(last.split(0), None);
    }

    #[test]
    fn constructor_rejects_broken_conservation() {
        let err = CopyPartition::new(vec![1, 0, 1]).unwrap_err();
        assert!(matches!(err, PartitionError::BrokenConservation { .. }));
        assert_eq!(CopyPartition::new(vec![]), Err(PartitionError::Empty));
    }
}
