//! Network descriptions and their validated rate view.
//!
//! A network is a set of `n` nodes (1-based indices), a replication factor
//! `L = 2^k`, a source/destination pair, and a symmetric partial map of mean
//! inter-contact times in seconds. Pairs that never meet are simply absent.
//! Configurations carry *means* because that is what experiments report; all
//! internal mathematics uses exponential contact *rates* `1 / mean`, the
//! conversion being done once here during validation.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// 1-based node index.
pub type NodeId = usize;

/// One symmetric contact entry: nodes `i` and `j` meet with the given mean
/// inter-contact time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPair {
    pub i: NodeId,
    pub j: NodeId,
    pub mean_s: f64,
}

/// Mean inter-contact times: one shared value for every pair, or an explicit
/// pair list (absent pairs never meet).
#[derive(Debug, Clone, PartialEq)]
pub enum ContactMeans {
    Scalar(f64),
    Pairs(Vec<ContactPair>),
}

/// Raw, unvalidated network description.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub node_count: usize,
    pub contact_means: ContactMeans,
    pub source: NodeId,
    pub destination: NodeId,
    /// Number of message copies sprayed, must be a power of two.
    pub replication_factor: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("node count n must be at least 2, got {node_count}")]
    NodeCountTooSmall { node_count: usize },
    #[error("replication factor L must be a power of two, got {l}")]
    ReplicationFactorNotPowerOfTwo { l: u64 },
    #[error("source {node} is outside the valid node range 1..={node_count}")]
    SourceOutOfRange { node: NodeId, node_count: usize },
    #[error("destination {destination} is outside the valid node range 1..={node_count}")]
    DestinationOutOfRange {
        destination: NodeId,
        node_count: usize,
    },
    #[error("source and destination must differ, both are node {node}")]
    SourceEqualsDestination { node: NodeId },
    #[error("contacts entry references node {node}, outside the valid range 1..={node_count}")]
    ContactNodeOutOfRange { node: NodeId, node_count: usize },
    #[error("contacts entry pairs node {node} with itself")]
    SelfContact { node: NodeId },
    #[error("mean inter-contact time for pair ({i},{j}) must be positive and finite, got {mean_s}")]
    NonpositiveMean { i: NodeId, j: NodeId, mean_s: f64 },
    #[error(
        "conflicting mean inter-contact times for pair ({i},{j}): {first} and {second} \
         (the contact map is symmetric)"
    )]
    ConflictingMean {
        i: NodeId,
        j: NodeId,
        first: f64,
        second: f64,
    },
}

/// Structural category of a validated network, used to pick a chain builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkClass {
    /// Every pair meets at one common rate (destination included).
    HomogeneousWdc { rate: f64 },
    /// Every pair meets at one common rate except the absent
    /// source-destination pair ("no direct contact").
    HomogeneousNdc { rate: f64 },
    /// Anything else: per-pair rates and/or sparse contact graph.
    Heterogeneous,
}

/// Validated network: dense symmetric mean/rate matrices plus the metadata
/// every downstream component needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRateView {
    node_count: usize,
    source: NodeId,
    destination: NodeId,
    replication_factor: u64,
    /// Row-major `n x n`; 0.0 encodes "this pair never meets".
    means: Vec<f64>,
    rates: Vec<f64>,
    is_homogeneous: bool,
    has_direct_contact: bool,
}

impl NetworkSpec {
    /// Convenience constructor for a full-contact network with one shared
    /// mean inter-contact time.
    pub fn homogeneous(
        node_count: usize,
        mean_s: f64,
        source: NodeId,
        destination: NodeId,
        replication_factor: u64,
    ) -> Self {
        Self {
            node_count,
            contact_means: ContactMeans::Scalar(mean_s),
            source,
            destination,
            replication_factor,
        }
    }

    /// Replication exponent `k` with `L = 2^k`. Only meaningful after
    /// validation has confirmed `L` is a power of two.
    pub fn replication_exponent(&self) -> u32 {
        self.replication_factor.trailing_zeros()
    }

    /// Checks every structural rule and converts means to rates.
    pub fn validate(&self) -> Result<ContactRateView, SpecError> {
        let n = self.node_count;
        if n < 2 {
            return Err(SpecError::NodeCountTooSmall { node_count: n });
        }
        if self.replication_factor == 0 || !self.replication_factor.is_power_of_two() {
            return Err(SpecError::ReplicationFactorNotPowerOfTwo {
                l: self.replication_factor,
            });
        }
        if self.source < 1 || self.source > n {
            return Err(SpecError::SourceOutOfRange {
                node: self.source,
                node_count: n,
            });
        }
        if self.destination < 1 || self.destination > n {
            return Err(SpecError::DestinationOutOfRange {
                destination: self.destination,
                node_count: n,
            });
        }
        if self.source == self.destination {
            return Err(SpecError::SourceEqualsDestination { node: self.source });
        }

        let mut means = vec![0.0f64; n * n];
        let mut set_mean = |i: NodeId, j: NodeId, mean_s: f64| -> Result<(), SpecError> {
            if i < 1 || i > n {
                return Err(SpecError::ContactNodeOutOfRange {
                    node: i,
                    node_count: n,
                });
            }
            if j < 1 || j > n {
                return Err(SpecError::ContactNodeOutOfRange {
                    node: j,
                    node_count: n,
                });
            }
            if i == j {
                return Err(SpecError::SelfContact { node: i });
            }
            if !(mean_s.is_finite() && mean_s > 0.0) {
                return Err(SpecError::NonpositiveMean { i, j, mean_s });
            }
            let existing = means[(i - 1) * n + (j - 1)];
            if existing != 0.0 && existing != mean_s {
                return Err(SpecError::ConflictingMean {
                    i: i.min(j),
                    j: i.max(j),
                    first: existing,
                    second: mean_s,
                });
            }
            means[(i - 1) * n + (j - 1)] = mean_s;
            means[(j - 1) * n + (i - 1)] = mean_s;
            Ok(())
        };
        match &self.contact_means {
            ContactMeans::Scalar(mean_s) => {
                for i in 1..=n {
                    for j in (i + 1)..=n {
                        set_mean(i, j, *mean_s)?;
                    }
                }
            }
            ContactMeans::Pairs(pairs) => {
                for pair in pairs {
                    set_mean(pair.i, pair.j, pair.mean_s)?;
                }
            }
        }

        let rates: Vec<f64> = means
            .iter()
            .map(|&m| if m > 0.0 { 1.0 / m } else { 0.0 })
            .collect();

        let mut view = ContactRateView {
            node_count: n,
            source: self.source,
            destination: self.destination,
            replication_factor: self.replication_factor,
            means,
            rates,
            is_homogeneous: false,
            has_direct_contact: false,
        };
        view.is_homogeneous = matches!(view.classification(), NetworkClass::HomogeneousWdc { .. });
        view.has_direct_contact = view.rate(view.source, view.destination) > 0.0;
        Ok(view)
    }
}

impl ContactRateView {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn replication_factor(&self) -> u64 {
        self.replication_factor
    }

    /// Replication exponent `k` with `L = 2^k`.
    pub fn replication_exponent(&self) -> u32 {
        self.replication_factor.trailing_zeros()
    }

    /// Contact rate of the unordered pair `(i, j)`; 0.0 when they never meet.
    pub fn rate(&self, i: NodeId, j: NodeId) -> f64 {
        self.rates[(i - 1) * self.node_count + (j - 1)]
    }

    /// Mean inter-contact seconds for `(i, j)`, if the pair ever meets.
    pub fn mean(&self, i: NodeId, j: NodeId) -> Option<f64> {
        let m = self.means[(i - 1) * self.node_count + (j - 1)];
        (m > 0.0).then_some(m)
    }

    /// True when every pair meets at one shared rate.
    pub fn is_homogeneous(&self) -> bool {
        self.is_homogeneous
    }

    /// True when source and destination can meet directly.
    pub fn has_direct_contact(&self) -> bool {
        self.has_direct_contact
    }

    /// Unordered contacting pairs `(i, j, mean_s)` with `i < j`.
    pub fn present_pairs(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut pairs = Vec::new();
        for i in 1..=self.node_count {
            for j in (i + 1)..=self.node_count {
                if let Some(m) = self.mean(i, j) {
                    pairs.push((i, j, m));
                }
            }
        }
        pairs
    }

    /// Smallest mean inter-contact time of any contacting pair.
    pub fn min_mean(&self) -> Option<f64> {
        self.present_pairs()
            .iter()
            .map(|&(_, _, m)| m)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Largest mean inter-contact time of any contacting pair.
    pub fn max_mean(&self) -> Option<f64> {
        self.present_pairs()
            .iter()
            .map(|&(_, _, m)| m)
            .max_by(|a, b| a.total_cmp(b))
    }

    /// Structural category, deciding which chain builder applies.
    pub fn classification(&self) -> NetworkClass {
        let mut missing: Vec<(NodeId, NodeId)> = Vec::new();
        let mut common: Option<f64> = None;
        let mut all_equal = true;
        for i in 1..=self.node_count {
            for j in (i + 1)..=self.node_count {
                match self.mean(i, j) {
                    None => missing.push((i, j)),
                    Some(m) => match common {
                        None => common = Some(m),
                        Some(v) if v != m => all_equal = false,
                        Some(_) => {}
                    },
                }
            }
        }
        let rate = match common {
            Some(m) if all_equal => 1.0 / m,
            _ => return NetworkClass::Heterogeneous,
        };
        if missing.is_empty() {
            return NetworkClass::HomogeneousWdc { rate };
        }
        let sd = (
            self.source.min(self.destination),
            self.source.max(self.destination),
        );
        if missing == [sd] {
            return NetworkClass::HomogeneousNdc { rate };
        }
        NetworkClass::Heterogeneous
    }

    /// Reconstructs an explicit-pairs description of this network. Validating
    /// the result reproduces this view exactly.
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            node_count: self.node_count,
            contact_means: ContactMeans::Pairs(
                self.present_pairs()
                    .into_iter()
                    .map(|(i, j, mean_s)| ContactPair { i, j, mean_s })
                    .collect(),
            ),
            source: self.source,
            destination: self.destination,
            replication_factor: self.replication_factor,
        }
    }
}

/// Generates a connected sparse network in the style used for randomized
/// robustness studies: per-node neighbour counts ("diversity") drawn from
/// 2..=8, per-pair means uniform in [200, 1200] seconds, source node 1 and
/// destination node `n`. Deterministic in `seed`.
pub fn random_sparse_spec(node_count: usize, replication_factor: u64, seed: u64) -> NetworkSpec {
    assert!(node_count >= 3, "need at least a source, a relay and a destination");
    let n = node_count;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let target: Vec<usize> = (0..=n).map(|_| rng.gen_range(2..=8usize)).collect();

    let mut adjacent = vec![false; (n + 1) * (n + 1)];
    let mut degree = vec![0usize; n + 1];
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let connect = |u: NodeId,
                   v: NodeId,
                       adjacent: &mut Vec<bool>,
                       degree: &mut Vec<usize>,
                       edges: &mut Vec<(NodeId, NodeId)>| {
        adjacent[u * (n + 1) + v] = true;
        adjacent[v * (n + 1) + u] = true;
        degree[u] += 1;
        degree[v] += 1;
        edges.push((u.min(v), u.max(v)));
    };

    // Random spanning tree keeps the graph connected.
    let mut order: Vec<NodeId> = (1..=n).collect();
    order.shuffle(&mut rng);
    for idx in 1..n {
        let v = order[idx];
        let candidates: Vec<NodeId> = order[..idx]
            .iter()
            .copied()
            .filter(|&u| degree[u] < 8)
            .collect();
        let u = if candidates.is_empty() {
            order[rng.gen_range(0..idx)]
        } else {
            candidates[rng.gen_range(0..candidates.len())]
        };
        connect(u, v, &mut adjacent, &mut degree, &mut edges);
    }

    // Top the degrees up towards each node's diversity target.
    for v in 1..=n {
        let mut attempts = 0;
        while degree[v] < target[v] && attempts < 64 {
            attempts += 1;
            let u = rng.gen_range(1..=n);
            if u != v && !adjacent[u * (n + 1) + v] && degree[u] < 8 {
                connect(u, v, &mut adjacent, &mut degree, &mut edges);
            }
        }
    }

    edges.sort_unstable();
    let pairs: Vec<ContactPair> = edges
        .into_iter()
        .map(|(i, j)| ContactPair {
            i,
            j,
            mean_s: rng.gen_range(200.0..=1200.0),
        })
        .collect();

    NetworkSpec {
        node_count: n,
        contact_means: ContactMeans::Pairs(pairs),
        source: 1,
        destination: n,
        replication_factor,
    }
}

/// The sparse 5-node testbed used throughout the crate's tests: four
/// distinct pair means, no source-destination contact, source 1 and
/// destination 5.
#[cfg(test)]
pub(crate) fn five_node_sparse() -> NetworkSpec {
    NetworkSpec {
        node_count: 5,
        contact_means: ContactMeans::Pairs(vec![
            ContactPair { i: 1, j: 2, mean_s: 100.0 },
            ContactPair { i: 1, j: 3, mean_s: 200.0 },
            ContactPair { i: 1, j: 4, mean_s: 500.0 },
            ContactPair { i: 2, j: 3, mean_s: 200.0 },
            ContactPair { i: 2, j: 4, mean_s: 200.0 },
            ContactPair { i: 3, j: 4, mean_s: 200.0 },
            ContactPair { i: 2, j: 5, mean_s: 200.0 },
            ContactPair { i: 3, j: 5, mean_s: 200.0 },
            ContactPair { i: 4, j: 5, mean_s: 200.0 },
        ]),
        source: 1,
        destination: 5,
        replication_factor: 4,
    }
}
