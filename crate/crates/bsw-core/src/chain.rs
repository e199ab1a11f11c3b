//! The absorbing continuous-time Markov chain shared by both builders.
//!
//! A chain stores its transient state labels (copy partitions for the
//! homogeneous model, copy matrices for the heterogeneous one), a merged
//! sorted transition list, and the index of the initial state. The absorbing
//! "delivered" state carries no label; its index is always one past the last
//! transient state.

use crate::network::NodeId;
use crate::partitions::PartitionError;
use thiserror::Error;

/// Label printed for the absorbing state in chain dumps.
pub const ABSORBING_LABEL: &str = "ABS";

/// A single directed transition with exponential rate `rate` (per second).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("a chain needs at least one transient state")]
    EmptyStateSpace,
    #[error("initial state index {initial} is out of range (transient states: {transient})")]
    InvalidInitial { initial: usize, transient: usize },
    #[error("transition ({from} -> {to}) references a state out of range")]
    TransitionOutOfRange { from: usize, to: usize },
    #[error("self-loop on state {state} is not allowed")]
    SelfLoop { state: usize },
    #[error("transition ({from} -> {to}) must have a positive finite rate, got {rate}")]
    NonpositiveRate { from: usize, to: usize, rate: f64 },
    #[error("state {index} is not reachable from the initial state")]
    UnreachableState { index: usize },
    #[error("the homogeneous builder requires one shared contact rate for all pairs")]
    NotHomogeneous,
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("replication factor {l} exceeds the node-resolved ceiling {max_l}")]
    ReplicationCeiling { l: u64, max_l: u64 },
    #[error("node count {n} exceeds the node-resolved ceiling {max_n}")]
    NodeCeiling { n: usize, max_n: usize },
    #[error("state space exceeds the safety ceiling of {limit} states")]
    StateLimitExceeded { limit: usize },
    #[error("copy matrix holds {total} copies, expected {expected}")]
    MatrixConservation { total: u64, expected: u64 },
    #[error("node {node} appears twice in one copy matrix")]
    DuplicateHolder { node: NodeId },
    #[error("the destination (node {node}) can never hold copies")]
    DestinationHoldsCopies { node: NodeId },
}

/// Renders a state for chain dumps.
pub trait StateLabel {
    fn label(&self) -> String;
}

/// An absorbing CTMC: transient states `0..transient_count()` plus one
/// absorbing state at index `transient_count()`. Transitions are kept sorted
/// by `(from, to)` with parallel edges merged by summing their rates.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingChain<S> {
    states: Vec<S>,
    transitions: Vec<Transition>,
    /// CSR-style offsets: edges of state `i` are `transitions[out[i]..out[i+1]]`.
    out: Vec<usize>,
    initial: usize,
}

impl<S> AbsorbingChain<S> {
    /// Builds a chain, merging parallel edges and checking every structural
    /// invariant including reachability of all transient states.
    pub fn new(
        states: Vec<S>,
        mut transitions: Vec<Transition>,
        initial: usize,
    ) -> Result<Self, ChainError> {
        let transient = states.len();
        if transient == 0 {
            return Err(ChainError::EmptyStateSpace);
        }
        if initial >= transient {
            return Err(ChainError::InvalidInitial { initial, transient });
        }
        for t in &transitions {
            if t.from >= transient || t.to > transient {
                return Err(ChainError::TransitionOutOfRange { from: t.from, to: t.to });
            }
            if t.from == t.to {
                return Err(ChainError::SelfLoop { state: t.from });
            }
            if !(t.rate.is_finite() && t.rate > 0.0) {
                return Err(ChainError::NonpositiveRate {
                    from: t.from,
                    to: t.to,
                    rate: t.rate,
                });
            }
        }
        transitions.sort_by_key(|t| (t.from, t.to));
        let mut merged: Vec<Transition> = Vec::with_capacity(transitions.len());
        for t in transitions {
            match merged.last_mut() {
                Some(last) if last.from == t.from && last.to == t.to => last.rate += t.rate,
                _ => merged.push(t),
            }
        }

        let mut out = vec![0usize; transient + 1];
        for t in &merged {
            out[t.from + 1] += 1;
        }
        for i in 0..transient {
            out[i + 1] += out[i];
        }

        let chain = Self {
            states,
            transitions: merged,
            out,
            initial,
        };
        if let Some(index) = chain.first_unreachable() {
            return Err(ChainError::UnreachableState { index });
        }
        Ok(chain)
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.transient_count()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for t in self.out_edges(s) {
                if t.to < self.transient_count() && !seen[t.to] {
                    seen[t.to] = true;
                    stack.push(t.to);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    /// Number of transient states.
    pub fn transient_count(&self) -> usize {
        self.states.len()
    }

    /// Total number of states, absorbing state included.
    pub fn state_count(&self) -> usize {
        self.states.len() + 1
    }

    /// Index of the absorbing "delivered" state.
    pub fn absorbing_index(&self) -> usize {
        self.states.len()
    }

    /// Index of the initial state.
    pub fn initial_index(&self) -> usize {
        self.initial
    }

    /// Transient state labels, indexed by state.
    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &S {
        &self.states[index]
    }

    /// All transitions, sorted by `(from, to)` with parallel edges merged.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    /// Outgoing transitions of one transient state.
    pub fn out_edges(&self, state: usize) -> &[Transition] {
        &self.transitions[self.out[state]..self.out[state + 1]]
    }

    /// Sum of all outgoing rates of one transient state.
    pub fn total_out_rate(&self, state: usize) -> f64 {
        self.out_edges(state).iter().map(|t| t.rate).sum()
    }

    /// Rate of the direct transition to the absorbing state, 0 when absent.
    pub fn absorbing_rate(&self, state: usize) -> f64 {
        self.out_edges(state)
            .iter()
            .filter(|t| t.to == self.absorbing_index())
            .map(|t| t.rate)
            .sum()
    }
}

impl<S: StateLabel> AbsorbingChain<S> {
    /// Text dump, one `FROM -> TO : RATE` line per transition, in `(from,
    /// to)` order. Deterministic for byte-comparison across runs.
    pub fn dump(&self) -> String {
        let mut text = String::new();
        for t in &self.transitions {
            let to = if t.to == self.absorbing_index() {
                ABSORBING_LABEL.to_string()
            } else {
                self.states[t.to].label()
            };
            text.push_str(&format!(
                "{} -> {} : {}\n",
                self.states[t.from].label(),
                to,
                t.rate
            ));
        }
        text
    }
}

/// Drops transient states that cannot be reached from `initial`, remapping
/// indices while preserving relative order. The absorbing index (one past the
/// original label count) is remapped to one past the surviving label count.
pub(crate) fn retain_reachable<S>(
    states: Vec<S>,
    transitions: Vec<Transition>,
    initial: usize,
) -> (Vec<S>, Vec<Transition>, usize) {
    let transient = states.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); transient];
    for t in &transitions {
        if t.to < transient {
            adjacency[t.from].push(t.to);
        }
    }
    let mut seen = vec![false; transient];
    let mut stack = vec![initial];
    seen[initial] = true;
    while let Some(s) = stack.pop() {
        for &to in &adjacency[s] {
            if !seen[to] {
                seen[to] = true;
                stack.push(to);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        return (states, transitions, initial);
    }

    let mut remap = vec![usize::MAX; transient + 1];
    let mut kept = 0usize;
    for (i, &s) in seen.iter().enumerate() {
        if s {
            remap[i] = kept;
            kept += 1;
        }
    }
    remap[transient] = kept; // absorbing index
    let states: Vec<S> = states
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| seen[i].then_some(s))
        .collect();
    let transitions: Vec<Transition> = transitions
        .into_iter()
        .filter(|t| seen[t.from])
        .map(|t| Transition {
            from: remap[t.from],
            to: remap[t.to],
            rate: t.rate,
        })
        .collect();
    let initial = remap[initial];
    (states, transitions, initial)
}
