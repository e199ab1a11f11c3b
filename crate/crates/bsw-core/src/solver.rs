//! Transient analysis of the delay chain: CDF of the delivery time and the
//! eventual delivery probability.
//!
//! The delivery-time CDF is computed by uniformization: the continuous chain
//! is embedded into a discrete one at the fastest total exit rate `Λ`, and
//! `P(delivered by t)` becomes a Poisson-weighted mixture of "absorbed within
//! n jumps" probabilities. Poisson weights are generated outward from the
//! mode and normalized, which stays accurate even when `Λt` is in the
//! thousands (where `e^{-Λt}` alone underflows).
//!
//! The delivery ratio solves the absorption-probability system directly;
//! both builders emit states in breadth-first layers, so a reverse sweep is
//! already in topological order and the sweep loop terminates after one
//! verification pass (it would still converge on a cyclic chain).

use crate::chain::AbsorbingChain;
use crate::network::ContactRateView;
use thiserror::Error;

/// Absolute truncation bound the uniformization honors per grid point.
pub const TRUNCATION_TOLERANCE: f64 = 1e-9;
/// Relative cutoff for Poisson window weights; leaves truncated mass far
/// below [`TRUNCATION_TOLERANCE`].
const WEIGHT_CUTOFF: f64 = 1e-18;
/// Transient probability mass below which the jump recursion has converged.
const RESIDUAL_CUTOFF: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("time grid must contain at least one point")]
    EmptyGrid,
    #[error("time grid must be strictly increasing (violated at index {index})")]
    GridNotIncreasing { index: usize },
    #[error("time grid values must be finite and nonnegative, got {value} at index {index}")]
    InvalidGridValue { index: usize, value: f64 },
    #[error("empirical CDF needs a positive total message count")]
    EmptyDenominator,
    #[error("delivered count {delivered} exceeds total message count {total}")]
    MoreDeliveredThanTotal { delivered: usize, total: usize },
    #[error("delay samples must be finite and nonnegative, got {value}")]
    InvalidSample { value: f64 },
    #[error("cdf value {value} at index {index} outside [0, ratio + tolerance]")]
    CdfOutOfRange { index: usize, value: f64 },
    #[error("cdf must be nondecreasing (violated at index {index})")]
    CdfNotMonotone { index: usize },
}

/// How a [`DelayDistribution`] interpolates between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfKind {
    /// Piecewise-constant, jumps at grid points (empirical CDFs).
    Step,
    /// Piecewise-linear (solved CDFs, which are continuous).
    Linear,
}

/// A delivery-delay law: `cdf[i] = P(delivered and delay <= grid[i])`, plus
/// the eventual delivery probability. The grid always starts at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDistribution {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    delivery_ratio: f64,
    kind: CdfKind,
}

impl DelayDistribution {
    /// Validates and assembles a distribution. The grid must be strictly
    /// increasing starting at 0; the cdf must be nondecreasing, within
    /// `[0, delivery_ratio + tolerance]`, and of the same length.
    pub fn new(
        grid: Vec<f64>,
        cdf: Vec<f64>,
        delivery_ratio: f64,
        kind: CdfKind,
    ) -> Result<Self, SolveError> {
        if grid.is_empty() {
            return Err(SolveError::EmptyGrid);
        }
        if grid[0] != 0.0 {
            return Err(SolveError::InvalidGridValue { index: 0, value: grid[0] });
        }
        validate_grid(&grid)?;
        assert_eq!(grid.len(), cdf.len(), "grid and cdf lengths must match");
        assert!(
            (0.0..=1.0 + TRUNCATION_TOLERANCE).contains(&delivery_ratio),
            "delivery ratio {delivery_ratio} outside [0,1]"
        );
        let bound = delivery_ratio + TRUNCATION_TOLERANCE;
        for (index, &value) in cdf.iter().enumerate() {
            if !(0.0..=bound).contains(&value) {
                return Err(SolveError::CdfOutOfRange { index, value });
            }
            if index > 0 && value < cdf[index - 1] {
                return Err(SolveError::CdfNotMonotone { index });
            }
        }
        Ok(Self { grid, cdf, delivery_ratio, kind })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn delivery_ratio(&self) -> f64 {
        self.delivery_ratio
    }

    pub fn kind(&self) -> CdfKind {
        self.kind
    }

    /// CDF value at an arbitrary time, interpolating per [`CdfKind`] and
    /// holding the last value beyond the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.grid[0] {
            return 0.0;
        }
        let last = self.grid.len() - 1;
        if t >= self.grid[last] {
            return self.cdf[last];
        }
        // Index of the last grid point <= t.
        let idx = match self.grid.partition_point(|&g| g <= t) {
            0 => return 0.0,
            p => p - 1,
        };
        match self.kind {
            CdfKind::Step => self.cdf[idx],
            CdfKind::Linear => {
                let (t0, t1) = (self.grid[idx], self.grid[idx + 1]);
                let (c0, c1) = (self.cdf[idx], self.cdf[idx + 1]);
                c0 + (c1 - c0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Left limit at `t`: the value approached from below. Differs from
    /// [`Self::value_at`] only for step functions at their jump points.
    fn value_before(&self, t: f64) -> f64 {
        match self.kind {
            CdfKind::Linear => self.value_at(t),
            CdfKind::Step => {
                let idx = self.grid.partition_point(|&g| g < t);
                if idx == 0 {
                    0.0
                } else {
                    self.cdf[idx - 1]
                }
            }
        }
    }

    /// CSV rendering: `t_seconds,cdf` rows plus a trailing
    /// `# delivery_ratio=` comment. Plain `f64` formatting keeps the output
    /// byte-stable across runs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_seconds,cdf\n");
        for (t, c) in self.grid.iter().zip(&self.cdf) {
            out.push_str(&format!("{t},{c}\n"));
        }
        out.push_str(&format!("# delivery_ratio={}\n", self.delivery_ratio));
        out
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), SolveError> {
    for (index, &value) in grid.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(SolveError::InvalidGridValue { index, value });
        }
        if index > 0 && value <= grid[index - 1] {
            return Err(SolveError::GridNotIncreasing { index });
        }
    }
    Ok(())
}

/// Probability of eventual delivery from the initial state: the absorption
/// probability `h` solved over the transient states (`h = 1` at the absorbing
/// state, `h = 0` at states with no way out).
pub fn solve_delivery_ratio<S>(chain: &AbsorbingChain<S>) -> f64 {
    let m = chain.transient_count();
    let absorbing = chain.absorbing_index();
    let mut h = vec![0.0f64; m + 1];
    h[absorbing] = 1.0;
    // States are emitted in breadth-first layers, so the reverse order is
    // topological and the first sweep is exact on the builders' chains; the
    // loop guards against future chain sources that are not layered.
    for _ in 0..10_000 {
        let mut delta = 0.0f64;
        for s in (0..m).rev() {
            let total = chain.total_out_rate(s);
            if total <= 0.0 {
                continue;
            }
            let flow: f64 = chain
                .out_edges(s)
                .iter()
                .map(|t| t.rate * h[t.to])
                .sum();
            let next = flow / total;
            delta = delta.max((next - h[s]).abs());
            h[s] = next;
        }
        if delta <= 1e-15 {
            break;
        }
    }
    h[chain.initial_index()].clamp(0.0, 1.0)
}

/// First-hitting-time CDF of the absorbing state, by uniformization.
///
/// `grid` must be strictly increasing and nonnegative; a leading `t = 0`
/// point is prepended when absent. Each value carries truncation error below
/// [`TRUNCATION_TOLERANCE`].
pub fn solve_cdf<S>(
    chain: &AbsorbingChain<S>,
    grid: &[f64],
) -> Result<DelayDistribution, SolveError> {
    if grid.is_empty() {
        return Err(SolveError::EmptyGrid);
    }
    validate_grid(grid)?;
    let mut full_grid = Vec::with_capacity(grid.len() + 1);
    if grid[0] != 0.0 {
        full_grid.push(0.0);
    }
    full_grid.extend_from_slice(grid);

    let ratio = solve_delivery_ratio(chain);
    let m = chain.transient_count();
    let lambda = (0..m).fold(0.0f64, |acc, s| acc.max(chain.total_out_rate(s)));
    if lambda <= 0.0 {
        // No state has any way out: nothing is ever delivered.
        let cdf = vec![0.0; full_grid.len()];
        return DelayDistribution::new(full_grid, cdf, ratio, CdfKind::Linear);
    }

    let t_max = *full_grid.last().expect("grid is non-empty");
    let (_, hi) = window_bounds(lambda * t_max);
    let absorbed = absorbed_by_jump(chain, lambda, hi);

    let mut cdf = Vec::with_capacity(full_grid.len());
    let mut running_max = 0.0f64;
    for &t in &full_grid {
        let value = if t == 0.0 {
            0.0
        } else {
            let (lo, weights) = poisson_window(lambda * t);
            weights
                .iter()
                .enumerate()
                .map(|(offset, &w)| {
                    let n = lo + offset;
                    w * absorbed[n.min(absorbed.len() - 1)]
                })
                .sum()
        };
        // Uniformization is exact up to truncation; clamp the residual noise
        // so the distribution invariants hold exactly.
        running_max = running_max.max(value.clamp(0.0, ratio));
        cdf.push(running_max);
    }
    DelayDistribution::new(full_grid, cdf, ratio, CdfKind::Linear)
}

/// `absorbed[n]` = probability that the uniformized jump chain has entered
/// the absorbing state within `n` jumps. Stops early once the transient mass
/// that can still reach the absorbing state is negligible (the sequence is
/// constant from there on).
fn absorbed_by_jump<S>(chain: &AbsorbingChain<S>, lambda: f64, max_jumps: usize) -> Vec<f64> {
    let m = chain.transient_count();
    let can_reach = reaches_absorbing(chain);
    let mut pi = vec![0.0f64; m];
    pi[chain.initial_index()] = 1.0;
    let mut absorbed = vec![0.0f64];
    let mut next = vec![0.0f64; m];

    for _ in 1..=max_jumps {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut gained = 0.0f64;
        for s in 0..m {
            let p = pi[s];
            if p == 0.0 {
                continue;
            }
            let stay = 1.0 - chain.total_out_rate(s) / lambda;
            next[s] += p * stay;
            for t in chain.out_edges(s) {
                let flow = p * t.rate / lambda;
                if t.to < m {
                    next[t.to] += flow;
                } else {
                    gained += flow;
                }
            }
        }
        std::mem::swap(&mut pi, &mut next);
        let total = absorbed.last().expect("seeded with one entry") + gained;
        absorbed.push(total);
        let live: f64 = (0..m).filter(|&s| can_reach[s]).map(|s| pi[s]).sum();
        if live < RESIDUAL_CUTOFF {
            break;
        }
    }
    absorbed
}

/// Which transient states have any path to the absorbing state.
fn reaches_absorbing<S>(chain: &AbsorbingChain<S>) -> Vec<bool> {
    let m = chain.transient_count();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut can = vec![false; m];
    let mut stack = Vec::new();
    for t in chain.transitions() {
        if t.to == chain.absorbing_index() {
            if !can[t.from] {
                can[t.from] = true;
                stack.push(t.from);
            }
        } else {
            incoming[t.to].push(t.from);
        }
    }
    while let Some(s) = stack.pop() {
        for &p in &incoming[s] {
            if !can[p] {
                can[p] = true;
                stack.push(p);
            }
        }
    }
    can
}

/// Indices `[lo, hi]` of the Poisson(`lambda_t`) window that carries all but
/// a vanishing tail of the mass.
fn window_bounds(lambda_t: f64) -> (usize, usize) {
    if lambda_t <= 0.0 {
        return (0, 0);
    }
    let mode = lambda_t.floor();
    let spread = 10.0 * lambda_t.sqrt() + 60.0;
    let lo = (mode - spread).max(0.0) as usize;
    let hi = (mode + spread) as usize;
    (lo, hi)
}

/// Normalized Poisson(`lambda_t`) weights on a window around the mode,
/// computed relative to the mode so no intermediate value underflows.
fn poisson_window(lambda_t: f64) -> (usize, Vec<f64>) {
    if lambda_t <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = lambda_t.floor() as usize;
    // Below the mode (exclusive), collected downward then reversed.
    let mut below: Vec<f64> = Vec::new();
    let mut w = 1.0f64;
    let mut n = mode;
    while n > 0 {
        w *= n as f64 / lambda_t;
        if w < WEIGHT_CUTOFF {
            break;
        }
        below.push(w);
        n -= 1;
    }
    let lo = mode - below.len();
    below.reverse();

    let mut weights = below;
    weights.push(1.0);
    let mut w = 1.0f64;
    let mut j = mode;
    loop {
        w *= lambda_t / (j + 1) as f64;
        if w < WEIGHT_CUTOFF {
            break;
        }
        weights.push(w);
        j += 1;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (lo, weights)
}

/// Empirical CDF of delivered delays over `n_total` sent messages, evaluated
/// on `grid`: `cdf(t) = |{samples <= t}| / n_total`. Undelivered messages
/// stay in the denominator, so the plateau equals the observed delivery
/// ratio.
pub fn empirical_cdf(
    samples: &[f64],
    n_total: usize,
    grid: &[f64],
) -> Result<DelayDistribution, SolveError> {
    if n_total == 0 {
        return Err(SolveError::EmptyDenominator);
    }
    if samples.len() > n_total {
        return Err(SolveError::MoreDeliveredThanTotal {
            delivered: samples.len(),
            total: n_total,
        });
    }
    if let Some(&value) = samples.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(SolveError::InvalidSample { value });
    }
    if grid.is_empty() {
        return Err(SolveError::EmptyGrid);
    }
    validate_grid(grid)?;

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples are finite"));
    let mut full_grid = Vec::with_capacity(grid.len() + 1);
    if grid[0] != 0.0 {
        full_grid.push(0.0);
    }
    full_grid.extend_from_slice(grid);

    let cdf: Vec<f64> = full_grid
        .iter()
        .map(|&t| sorted.partition_point(|&s| s <= t) as f64 / n_total as f64)
        .collect();
    let ratio = samples.len() as f64 / n_total as f64;
    DelayDistribution::new(full_grid, cdf, ratio, CdfKind::Step)
}

/// Kolmogorov–Smirnov distance: the supremum of |a − b| over all times,
/// taking one-sided limits at the jump points of step inputs.
pub fn ks_distance(a: &DelayDistribution, b: &DelayDistribution) -> f64 {
    let mut points: Vec<f64> = a.grid().iter().chain(b.grid()).copied().collect();
    points.sort_by(|x, y| x.partial_cmp(y).expect("grids are finite"));
    points.dedup();
    let mut sup = 0.0f64;
    for &t in &points {
        sup = sup.max((a.value_at(t) - b.value_at(t)).abs());
        sup = sup.max((a.value_before(t) - b.value_before(t)).abs());
    }
    // Beyond both grids each CDF holds its plateau.
    sup.max((a.cdf.last().unwrap_or(&0.0) - b.cdf.last().unwrap_or(&0.0)).abs())
}

/// `points` log-spaced values from `from` to `to` inclusive.
pub fn log_grid(from: f64, to: f64, points: usize) -> Vec<f64> {
    assert!(from > 0.0 && to > from, "need 0 < from < to");
    assert!(points >= 2, "need at least the two endpoints");
    let ratio = (to / from).ln() / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| from * (ratio * i as f64).exp())
        .collect();
    grid[points - 1] = to;
    grid
}

/// Default solver grid for a network: `t = 0` plus 500 log-spaced points
/// from a hundredth of the fastest mean inter-contact time to twenty times
/// the slowest, covering both the early ramp and the plateau.
pub fn default_grid(view: &ContactRateView) -> Vec<f64> {
    let (min_mean, max_mean) = match (view.min_mean(), view.max_mean()) {
        (Some(lo), Some(hi)) => (lo, hi),
        // No contact pairs at all: any grid works, nothing ever moves.
        _ => (1.0, 1.0),
    };
    let mut grid = vec![0.0];
    grid.extend(log_grid(min_mean / 100.0, 20.0 * max_mean, 500));
    grid
}
