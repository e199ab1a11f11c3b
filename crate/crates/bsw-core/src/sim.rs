//! Monte Carlo ground truth: pairwise exponential contacts driving the
//! spray-and-wait copy exchange, independent of the chain machinery.
//!
//! Every message is an independent replication with fresh contact processes.
//! Exponential inter-contacts are memoryless, so a message injected into a
//! long-running stationary contact trace sees exactly the same law as one
//! started on fresh processes — replications are statistically equivalent to
//! the single-trace methodology and embarrassingly parallel.
//!
//! Determinism: replication `m` of a run with master seed `s` draws from a
//! ChaCha stream with seed `s` and stream index `m`, so outcomes do not
//! depend on scheduling or on how many messages precede them.

use crate::network::{ContactRateView, NetworkSpec, NodeId, SpecError};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("horizon must be positive and finite, got {horizon}")]
    InvalidHorizon { horizon: f64 },
    #[error("need at least one message to simulate")]
    NoMessages,
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Number of independent messages (replications).
    pub n_messages: usize,
    /// Per-message cutoff in seconds; a message still undelivered then is
    /// counted as lost.
    pub horizon: f64,
    /// Master seed; replication `m` uses ChaCha stream `m` of this seed.
    pub seed: u64,
}

/// Result of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageOutcome {
    pub delivered: bool,
    /// Delivery time in seconds, present iff delivered; never exceeds the
    /// horizon.
    pub delay: Option<f64>,
    /// Copies the source had handed off when the replication ended.
    pub copies_spent: u64,
}

/// One pairwise meeting in a contact trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub time: f64,
    pub i: NodeId,
    pub j: NodeId,
}

impl fmt::Display for ContactEvent {
    /// Log line format: `t=<seconds> i=<node> j=<node>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} i={} j={}", self.time, self.i, self.j)
    }
}

/// Heap entry: next meeting of one pair. Ordered by time with `(pair, seq)`
/// as a deterministic tie-break; wrapped in `Reverse` for a min-heap.
#[derive(Debug, Clone, Copy)]
struct PendingContact {
    time: f64,
    pair: usize,
    seq: u64,
}

impl PartialEq for PendingContact {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PendingContact {}

impl PartialOrd for PendingContact {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PendingContact {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.pair.cmp(&self.pair))
            .then(other.seq.cmp(&self.seq))
    }
}

fn validate_config(cfg: &SimConfig) -> Result<(), SimError> {
    if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
        return Err(SimError::InvalidHorizon { horizon: cfg.horizon });
    }
    if cfg.n_messages == 0 {
        return Err(SimError::NoMessages);
    }
    Ok(())
}

/// Contacting pairs with their exponential rates (`present_pairs` carries
/// means).
fn contact_rates(view: &ContactRateView) -> Vec<(NodeId, NodeId, f64)> {
    view.present_pairs()
        .iter()
        .map(|&(i, j, _)| (i, j, view.rate(i, j)))
        .collect()
}

/// Runs `cfg.n_messages` independent replications of one message through the
/// network and reports each outcome.
pub fn simulate(spec: &NetworkSpec, cfg: &SimConfig) -> Result<Vec<MessageOutcome>, SimError> {
    let view = spec.validate()?;
    validate_config(cfg)?;
    let pairs = contact_rates(&view);
    Ok((0..cfg.n_messages)
        .map(|msg| run_replication(&view, &pairs, cfg, msg as u64))
        .collect())
}

/// Emits the ordered contact events of one replication (the stream used by
/// message 0), up to the horizon, without running the copy protocol.
pub fn replay_trace(spec: &NetworkSpec, cfg: &SimConfig) -> Result<Vec<ContactEvent>, SimError> {
    let view = spec.validate()?;
    validate_config(cfg)?;
    let pairs = contact_rates(&view);
    let mut driver = ContactDriver::new(&pairs, cfg, 0);
    let mut log = Vec::new();
    while let Some(event) = driver.next_event(cfg.horizon) {
        log.push(event);
    }
    Ok(log)
}

/// Outcome table rendering: `msg_id,delivered,delay_s` rows; the delay cell
/// is empty for undelivered messages.
pub fn outcome_csv(outcomes: &[MessageOutcome]) -> String {
    let mut out = String::from("msg_id,delivered,delay_s\n");
    for (id, o) in outcomes.iter().enumerate() {
        match o.delay {
            Some(delay) => out.push_str(&format!("{id},{},{delay}\n", o.delivered)),
            None => out.push_str(&format!("{id},{},\n", o.delivered)),
        }
    }
    out
}

/// Lazy merged stream of pairwise Poisson contact processes.
struct ContactDriver<'a> {
    pairs: &'a [(NodeId, NodeId, f64)],
    draws: Vec<Exp<f64>>,
    heap: BinaryHeap<PendingContact>,
    rng: ChaCha12Rng,
}

impl<'a> ContactDriver<'a> {
    fn new(pairs: &'a [(NodeId, NodeId, f64)], cfg: &SimConfig, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let draws: Vec<Exp<f64>> = pairs
            .iter()
            .map(|&(_, _, rate)| Exp::new(rate).expect("validated rates are positive"))
            .collect();
        let mut heap = BinaryHeap::with_capacity(pairs.len());
        for (pair, exp) in draws.iter().enumerate() {
            heap.push(PendingContact { time: exp.sample(&mut rng), pair, seq: 0 });
        }
        Self { pairs, draws, heap, rng }
    }

    /// Next contact at or before `horizon`, scheduling the pair's subsequent
    /// meeting. Returns `None` once every pending meeting lies beyond the
    /// horizon (or there are no pairs).
    fn next_event(&mut self, horizon: f64) -> Option<ContactEvent> {
        let next = self.heap.pop()?;
        if next.time > horizon {
            return None;
        }
        self.heap.push(PendingContact {
            time: next.time + self.draws[next.pair].sample(&mut self.rng),
            pair: next.pair,
            seq: next.seq + 1,
        });
        let (i, j, _) = self.pairs[next.pair];
        Some(ContactEvent { time: next.time, i, j })
    }
}

fn run_replication(
    view: &ContactRateView,
    pairs: &[(NodeId, NodeId, f64)],
    cfg: &SimConfig,
    stream: u64,
) -> MessageOutcome {
    let n = view.node_count();
    let source = view.source();
    let destination = view.destination();
    let total = view.replication_factor();
    let mut copies = vec![0u64; n + 1];
    copies[source] = total;

    let undelivered = |copies: &[u64]| MessageOutcome {
        delivered: false,
        delay: None,
        copies_spent: total - copies[source],
    };
    if !delivery_possible(view, &copies) {
        return undelivered(&copies);
    }

    let mut driver = ContactDriver::new(pairs, cfg, stream);
    while let Some(event) = driver.next_event(cfg.horizon) {
        let ContactEvent { time, i, j } = event;
        if i == destination || j == destination {
            let holder = if i == destination { j } else { i };
            if copies[holder] >= 1 {
                return MessageOutcome {
                    delivered: true,
                    delay: Some(time),
                    copies_spent: total - copies[source],
                };
            }
            continue;
        }
        // Spray step: a multi-copy node halves its copies into a copy-less
        // peer; single-copy holders wait for the destination.
        let (giver, taker) = if copies[i] > 1 && copies[j] == 0 {
            (i, j)
        } else if copies[j] > 1 && copies[i] == 0 {
            (j, i)
        } else {
            continue;
        };
        let handed = copies[giver] / 2;
        copies[giver] -= handed;
        copies[taker] += handed;
        assert_eq!(
            copies.iter().sum::<u64>(),
            total,
            "copy conservation violated at t={time}"
        );
        if !delivery_possible(view, &copies) {
            return undelivered(&copies);
        }
    }
    undelivered(&copies)
}

/// Sound early-termination check: can any node that might ever hold a copy
/// still meet the destination?
///
/// The potential-holder set over-approximates: current holders, plus — if
/// any holder still has copies to spray — everything reachable from a holder
/// through positive-rate contact edges (excluding the destination). When all
/// holders are down to one copy the set is exactly the holders, which is the
/// "all sprayed out, nobody meets the destination" stop condition.
#[allow(clippy::needless_range_loop)] // nodes are 1-based ids, not positions
fn delivery_possible(view: &ContactRateView, copies: &[u64]) -> bool {
    let n = view.node_count();
    let destination = view.destination();
    let mut potential = vec![false; n + 1];
    let mut stack: Vec<NodeId> = Vec::new();
    let mut can_spread = false;
    for u in 1..=n {
        if copies[u] >= 1 {
            potential[u] = true;
            stack.push(u);
            can_spread |= copies[u] >= 2;
        }
    }
    if can_spread {
        while let Some(u) = stack.pop() {
            for v in 1..=n {
                if v != destination && !potential[v] && view.rate(u, v) > 0.0 {
                    potential[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    (1..=n).any(|u| potential[u] && view.rate(u, destination) > 0.0)
}
