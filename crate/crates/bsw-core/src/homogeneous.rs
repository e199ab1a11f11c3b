//! Delay chain for homogeneous networks: one shared contact rate `r`.
//!
//! When every pair meets at the same rate, nodes holding the same number of
//! copies are interchangeable and the chain state reduces to the copy
//! partition. From partition `A` with `n_p` holders:
//!
//! * splitting a block of `2^m` copies (`m >= 1`) happens at rate
//!   `a_m * (N - n_p - 1) * r` — each of the `a_m` holders meets each of the
//!   `N - n_p - 1` copy-less non-destination nodes;
//! * delivery happens at rate `n_p * r` (every holder may meet the
//!   destination), or `(n_p - 1) * r` in the no-direct-contact variant where
//!   the source-destination pair never meets.
//!
//! Spray transitions with a non-positive rate factor are omitted, and states
//! that become unreachable that way (possible once `L >= N`) are pruned.

use crate::chain::{retain_reachable, AbsorbingChain, ChainError, StateLabel, Transition};
use crate::network::ContactRateView;
use crate::partitions::{enumerate_partitions, CopyPartition};
use std::collections::HashMap;

impl StateLabel for CopyPartition {
    fn label(&self) -> String {
        self.to_string()
    }
}

/// Builds the homogeneous delay chain for `L = 2^k` copies from a validated
/// homogeneous network view (with direct contact: every holder, source
/// included, can deliver).
pub fn build_homogeneous_chain(
    view: &ContactRateView,
    k: u32,
) -> Result<AbsorbingChain<CopyPartition>, ChainError> {
    if !view.is_homogeneous() {
        return Err(ChainError::NotHomogeneous);
    }
    build_homogeneous_chain_from_rate(view.node_count(), view.rate(1, 2), k)
}

/// Same as [`build_homogeneous_chain`] but from the raw parameters: `n`
/// nodes, shared pair rate `rate`, replication exponent `k`.
pub fn build_homogeneous_chain_from_rate(
    node_count: usize,
    rate: f64,
    k: u32,
) -> Result<AbsorbingChain<CopyPartition>, ChainError> {
    assert!(
        rate.is_finite() && rate > 0.0,
        "shared contact rate must be positive, got {rate}"
    );
    assert!(node_count >= 2, "need at least source and destination");
    let states = enumerate_partitions(k)?;
    let index: HashMap<&[u32], usize> = states
        .iter()
        .enumerate()
        .map(|(i, p)| (p.counts(), i))
        .collect();
    let absorbing = states.len();
    let n = node_count as i64;

    let mut transitions = Vec::new();
    for (from, partition) in states.iter().enumerate() {
        let n_p = i64::from(partition.holder_count());
        let free_targets = n - n_p - 1;
        if free_targets > 0 {
            for m in 1..=k {
                let a_m = partition.count_at(m);
                if a_m == 0 {
                    continue;
                }
                let successor = partition.split(m).expect("a_m > 0 was just checked");
                assert_eq!(
                    successor.total_copies(),
                    partition.total_copies(),
                    "copy conservation violated by split of {partition}"
                );
                let to = index[successor.counts()];
                transitions.push(Transition {
                    from,
                    to,
                    rate: f64::from(a_m) * free_targets as f64 * rate,
                });
            }
        }
        transitions.push(Transition {
            from,
            to: absorbing,
            rate: n_p as f64 * rate,
        });
    }

    let (states, transitions, initial) = retain_reachable(states, transitions, 0);
    AbsorbingChain::new(states, transitions, initial)
}

/// No-direct-contact variant: the source never meets the destination, so each
/// delivery rate `n_p * r` becomes `(n_p - 1) * r` (the source always retains
/// at least one copy). The single-holder initial state loses its delivery
/// edge entirely.
pub fn ndc_variant(chain: &AbsorbingChain<CopyPartition>) -> AbsorbingChain<CopyPartition> {
    let absorbing = chain.absorbing_index();
    let transitions: Vec<Transition> = chain
        .transitions()
        .iter()
        .filter_map(|t| {
            if t.to != absorbing {
                return Some(*t);
            }
            let n_p = f64::from(chain.state(t.from).holder_count());
            let scaled = t.rate * (n_p - 1.0) / n_p;
            (scaled > 0.0).then_some(Transition {
                from: t.from,
                to: t.to,
                rate: scaled,
            })
        })
        .collect();
    AbsorbingChain::new(chain.states().to_vec(), transitions, chain.initial_index())
        .expect("rescaling delivery rates preserves chain validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkSpec;
    use crate::partitions::count_partitions;
    use num_bigint::BigUint;

    fn chain(n: usize, rate: f64, k: u32) -> AbsorbingChain<CopyPartition> {
        build_homogeneous_chain_from_rate(n, rate, k).unwrap()
    }

    fn edge_rate(c: &AbsorbingChain<CopyPartition>, from: usize, to: usize) -> Option<f64> {
        c.out_edges(from)
            .iter()
            .find(|t| t.to == to)
            .map(|t| t.rate)
    }

    #[test]
    fn six_node_four_copy_chain_has_the_expected_rates() {
        let view = NetworkSpec::homogeneous(6, 1.0, 1, 6, 4).validate().unwrap();
        let c = build_homogeneous_chain(&view, 2).unwrap();
        // States in canonical order: {4}, {2,2}, {2,1,1}, {1,1,1,1}, ABS.
        assert_eq!(c.state_count(), 5);
        assert_eq!(c.initial_index(), 0);
        assert_eq!(edge_rate(&c, 0, 1), Some(4.0)); // {4} -> {2,2}
        assert_eq!(edge_rate(&c, 0, 4), Some(1.0)); // {4} -> ABS
        assert_eq!(edge_rate(&c, 1, 2), Some(6.0)); // {2,2} -> {2,1,1}
        assert_eq!(edge_rate(&c, 1, 4), Some(2.0));
        assert_eq!(edge_rate(&c, 2, 3), Some(2.0)); // {2,1,1} -> {1,1,1,1}
        assert_eq!(edge_rate(&c, 2, 4), Some(3.0));
        assert_eq!(edge_rate(&c, 3, 4), Some(4.0));
        assert_eq!(c.transition_count(), 7);
    }

    #[test]
    fn single_copy_network_is_direct_delivery() {
        let c = chain(2, 0.5, 0);
        assert_eq!(c.state_count(), 2);
        assert_eq!(c.transition_count(), 1);
        assert_eq!(edge_rate(&c, 0, 1), Some(0.5));
    }

    #[test]
    fn state_count_is_partition_count_plus_one_when_copies_fit() {
        for k in 0..=4u32 {
            let c = chain(20, 0.005, k);
            let beta = count_partitions(k).unwrap();
            assert_eq!(BigUint::from(c.state_count() - 1), beta, "k={k}");
        }
        assert_eq!(chain(20, 0.005, 3).state_count(), 11);
    }

    #[test]
    fn ndc_variant_rescales_delivery_rates_only() {
        let wdc = chain(6, 0.02, 2);
        let ndc = ndc_variant(&wdc);
        let abs = ndc.absorbing_index();
        // {4}: the lone holder is the source, its delivery edge disappears.
        assert_eq!(edge_rate(&ndc, 0, abs), None);
        assert_eq!(edge_rate(&ndc, 1, abs), Some(0.02 * 1.0)); // {2,2}: n_p=2
        assert_eq!(edge_rate(&ndc, 2, abs), Some(0.02 * 2.0)); // {2,1,1}
        assert!((edge_rate(&ndc, 3, abs).unwrap() - 0.06).abs() < 1e-15); // {1,1,1,1}
        // Spray edges are untouched.
        assert_eq!(edge_rate(&ndc, 0, 1), edge_rate(&wdc, 0, 1));
        assert_eq!(edge_rate(&wdc, 0, 1), Some(0.08));
        assert_eq!(ndc.transition_count(), wdc.transition_count() - 1);
    }

    #[test]
    fn rejects_non_homogeneous_views() {
        let view = crate::network::five_node_sparse().validate().unwrap();
        assert_eq!(
            build_homogeneous_chain(&view, 2),
            Err(ChainError::NotHomogeneous)
        );
    }

    #[test]
    fn propagates_the_enumeration_ceiling() {
        assert!(matches!(
            build_homogeneous_chain_from_rate(2000, 0.01, 9),
            Err(ChainError::Partition(_))
        ));
    }

    #[test]
    fn prunes_states_that_need_more_holders_than_nodes() {
        // N = L = 8: the all-singles partition needs 8 holders but only 7
        // non-destination nodes exist, and the last split is rate-0 anyway.
        let c = chain(8, 0.01, 3);
        assert_eq!(c.state_count(), 10); // 10 partitions of 8, minus {1x8}, plus ABS
        assert!(c.states().iter().all(|p| p.holder_count() <= 7));
        // N = 7 also loses the seven-holder partition {2,1,1,1,1,1,1}.
        let c = chain(7, 0.01, 3);
        assert_eq!(c.state_count(), 9);
        assert!(c.states().iter().all(|p| p.holder_count() <= 6));
    }

    #[test]
    fn spray_edges_increase_holder_count_by_one() {
        let c = chain(12, 0.3, 3);
        for t in c.transitions() {
            if t.to != c.absorbing_index() {
                assert_eq!(
                    c.state(t.to).holder_count(),
                    c.state(t.from).holder_count() + 1
                );
                assert_eq!(c.state(t.to).total_copies(), c.state(t.from).total_copies());
            }
        }
    }

    #[test]
    fn every_state_has_a_delivery_edge_with_direct_contact() {
        let c = chain(9, 0.7, 2);
        for s in 0..c.transient_count() {
            let expected = f64::from(c.state(s).holder_count()) * 0.7;
            assert!((c.absorbing_rate(s) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dump_uses_partition_labels() {
        let c = chain(3, 2.0, 1);
        assert_eq!(c.dump(), "{2} -> {1,1} : 2\n{2} -> ABS : 2\n{1,1} -> ABS : 4\n");
    }
}
