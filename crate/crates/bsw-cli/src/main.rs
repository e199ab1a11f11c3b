//! `bsw`: absorbing-chain analysis of binary spray-and-wait message delivery.
//!
//! Subcommands:
//! * `build` — build the chain for a network config, report its size.
//! * `solve` — solve the delay CDF and delivery ratio, emit `t_seconds,cdf` CSV.
//! * `compare` — solve and simulate, emit `t_seconds,cdf_model,cdf_sim` CSV plus
//!   a report; exits 4 when the KS distance is above threshold.
//! * `gen-random` — generate a random sparse network config (JSON).
//!
//! Exit codes: 0 success, 2 configuration error, 3 resource ceiling,
//! 4 comparison failure, 1 anything else. The env var `BSW_MAX_STATES`
//! overrides the node-resolved state-count ceiling (default 1,000,000).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bsw_core::{
    build_heterogeneous_chain_with_limit, build_homogeneous_chain_from_rate, default_grid,
    empirical_cdf, ks_distance, log_grid, ndc_variant, simulate, solve_cdf, AbsorbingChain,
    ChainError, ContactMeans, ContactPair, ContactRateView, CopyMatrix, CopyPartition,
    DelayDistribution, NetworkClass, NetworkSpec, SimConfig, SimError, DEFAULT_MAX_STATES,
};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Parser)]
#[command(
    name = "bsw",
    version,
    about = "Delay and delivery-ratio analysis of binary spray-and-wait routing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the absorbing chain for a network config and report its size.
    Build {
        /// Path to a JSON network config.
        config: PathBuf,
        /// Always build the node-resolved chain, even for homogeneous networks.
        #[arg(long)]
        force_hetero: bool,
        /// Emit the full transition list after the report.
        #[arg(long)]
        dump: bool,
        /// Write the dump to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the delay CDF and delivery ratio, writing `t_seconds,cdf` CSV.
    Solve {
        config: PathBuf,
        #[arg(long)]
        force_hetero: bool,
        /// Number of log-spaced grid points (default 500).
        #[arg(long)]
        grid_points: Option<usize>,
        /// Largest grid time in seconds (default twenty times the slowest mean).
        #[arg(long)]
        t_max: Option<f64>,
        /// Write the CSV to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and simulate, writing `t_seconds,cdf_model,cdf_sim` CSV and a report.
    Compare {
        config: PathBuf,
        #[arg(long)]
        force_hetero: bool,
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Number of simulated messages.
        #[arg(long, default_value_t = 2000)]
        ne: usize,
        /// Master seed for the simulator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-message simulation cutoff in seconds (default fifty times the
        /// slowest mean inter-contact time).
        #[arg(long)]
        horizon: Option<f64>,
        /// Exit with code 4 when the KS distance exceeds this value.
        #[arg(long, default_value_t = 0.05)]
        ks_threshold: f64,
        /// Write the CSV to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random sparse network config (JSON) for property testing.
    GenRandom {
        /// Number of nodes.
        #[arg(long, default_value_t = 12)]
        n: usize,
        /// Replication factor, a power of two.
        #[arg(long, default_value_t = 4)]
        l: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the config to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Flag(String),
    #[error("{0}")]
    Ceiling(String),
    #[error("comparison failed: {0}")]
    Comparison(String),
    #[error("{0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Flag(_) => 2,
            CliError::Ceiling(_) => 3,
            CliError::Comparison(_) => 4,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

/// On-disk JSON schema: exactly one of `mean` (full contact) and `contacts`
/// (explicit pair list) must be set; `direct_contact: false` removes the
/// source-destination pair from a full-contact network.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: usize,
    #[serde(rename = "L")]
    l: u64,
    source: usize,
    destination: usize,
    #[serde(default)]
    mean: Option<f64>,
    #[serde(default)]
    contacts: Option<Vec<ContactEntry>>,
    #[serde(default)]
    direct_contact: Option<bool>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ContactEntry {
    i: usize,
    j: usize,
    mean_s: f64,
}

fn load_spec(path: &Path) -> Result<NetworkSpec, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let parsed: ConfigFile = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    spec_from_config(parsed, path)
}

fn spec_from_config(cfg: ConfigFile, path: &Path) -> Result<NetworkSpec, CliError> {
    let config_err = |message: String| CliError::Config {
        path: path.display().to_string(),
        message,
    };
    let direct_pair = (
        cfg.source.min(cfg.destination),
        cfg.source.max(cfg.destination),
    );
    let contact_means = match (cfg.mean, cfg.contacts) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                "set exactly one of `mean` and `contacts`, not both".into(),
            ))
        }
        (None, None) => {
            return Err(config_err(
                "set exactly one of `mean` and `contacts`; both are missing".into(),
            ))
        }
        (Some(mean), None) => {
            if cfg.direct_contact == Some(false) {
                let mut pairs = Vec::new();
                for i in 1..=cfg.n {
                    for j in (i + 1)..=cfg.n {
                        if (i, j) != direct_pair {
                            pairs.push(ContactPair { i, j, mean_s: mean });
                        }
                    }
                }
                ContactMeans::Pairs(pairs)
            } else {
                ContactMeans::Scalar(mean)
            }
        }
        (None, Some(contacts)) => {
            let pairs: Vec<ContactPair> = contacts
                .iter()
                .map(|c| ContactPair { i: c.i, j: c.j, mean_s: c.mean_s })
                .collect();
            if let Some(wanted) = cfg.direct_contact {
                let actual = pairs
                    .iter()
                    .any(|p| (p.i.min(p.j), p.i.max(p.j)) == direct_pair);
                if wanted != actual {
                    return Err(config_err(format!(
                        "`direct_contact` is {wanted} but the `contacts` list {} a \
                         source-destination pair",
                        if actual { "contains" } else { "lacks" }
                    )));
                }
            }
            ContactMeans::Pairs(pairs)
        }
    };
    Ok(NetworkSpec {
        node_count: cfg.n,
        contact_means,
        source: cfg.source,
        destination: cfg.destination,
        replication_factor: cfg.l,
    })
}

fn validate_spec(spec: &NetworkSpec, path: &Path) -> Result<ContactRateView, CliError> {
    spec.validate().map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn state_limit() -> Result<usize, CliError> {
    match std::env::var("BSW_MAX_STATES") {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(limit) if limit > 0 => Ok(limit),
            _ => Err(CliError::Flag(format!(
                "BSW_MAX_STATES must be a positive integer, got `{text}`"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MAX_STATES),
        Err(e) => Err(CliError::Flag(format!("BSW_MAX_STATES: {e}"))),
    }
}

fn ceiling_error(e: ChainError) -> CliError {
    match e {
        ChainError::ReplicationCeiling { .. }
        | ChainError::NodeCeiling { .. }
        | ChainError::StateLimitExceeded { .. }
        | ChainError::Partition(_) => CliError::Ceiling(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

/// Either chain flavour behind one face, so the commands stay agnostic.
enum BuiltChain {
    Partition(AbsorbingChain<CopyPartition>),
    NodeResolved(AbsorbingChain<CopyMatrix>),
}

impl BuiltChain {
    fn state_count(&self) -> usize {
        match self {
            BuiltChain::Partition(c) => c.state_count(),
            BuiltChain::NodeResolved(c) => c.state_count(),
        }
    }

    fn transition_count(&self) -> usize {
        match self {
            BuiltChain::Partition(c) => c.transition_count(),
            BuiltChain::NodeResolved(c) => c.transition_count(),
        }
    }

    fn dump(&self) -> String {
        match self {
            BuiltChain::Partition(c) => c.dump(),
            BuiltChain::NodeResolved(c) => c.dump(),
        }
    }

    fn cdf(&self, grid: &[f64]) -> Result<DelayDistribution, CliError> {
        let solved = match self {
            BuiltChain::Partition(c) => solve_cdf(c, grid),
            BuiltChain::NodeResolved(c) => solve_cdf(c, grid),
        };
        solved.map_err(|e| CliError::Flag(format!("solver grid: {e}")))
    }
}

fn build_chain(view: &ContactRateView, force_hetero: bool) -> Result<BuiltChain, CliError> {
    let limit = state_limit()?;
    if force_hetero {
        return build_heterogeneous_chain_with_limit(view, limit)
            .map(BuiltChain::NodeResolved)
            .map_err(ceiling_error);
    }
    match view.classification() {
        NetworkClass::HomogeneousWdc { rate } => {
            build_homogeneous_chain_from_rate(view.node_count(), rate, view.replication_exponent())
                .map(BuiltChain::Partition)
                .map_err(ceiling_error)
        }
        NetworkClass::HomogeneousNdc { rate } => {
            build_homogeneous_chain_from_rate(view.node_count(), rate, view.replication_exponent())
                .map(|chain| BuiltChain::Partition(ndc_variant(&chain)))
                .map_err(ceiling_error)
        }
        NetworkClass::Heterogeneous => build_heterogeneous_chain_with_limit(view, limit)
            .map(BuiltChain::NodeResolved)
            .map_err(ceiling_error),
    }
}

fn grid_for(
    view: &ContactRateView,
    grid_points: Option<usize>,
    t_max: Option<f64>,
) -> Result<Vec<f64>, CliError> {
    if grid_points.is_none() && t_max.is_none() {
        return Ok(default_grid(view));
    }
    let points = grid_points.unwrap_or(500);
    if points < 2 {
        return Err(CliError::Flag(format!(
            "--grid-points must be at least 2, got {points}"
        )));
    }
    let (min_mean, max_mean) = match (view.min_mean(), view.max_mean()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => (1.0, 1.0),
    };
    let from = min_mean / 100.0;
    let to = t_max.unwrap_or(20.0 * max_mean);
    if !(to.is_finite() && to > from) {
        return Err(CliError::Flag(format!(
            "--t-max must be finite and greater than {from} (a hundredth of the fastest \
             mean inter-contact time), got {to}"
        )));
    }
    let mut grid = vec![0.0];
    grid.extend(log_grid(from, to, points));
    Ok(grid)
}

/// Human-readable run summary; `key: value` lines, wall times last.
struct RunReport {
    state_count: usize,
    transition_count: usize,
    delivery_ratio_model: Option<f64>,
    delivery_ratio_sim: Option<f64>,
    ks_distance: Option<f64>,
    wall_build_s: f64,
    wall_solve_s: Option<f64>,
    wall_sim_s: Option<f64>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(ks) = self.ks_distance {
            debug_assert!((0.0..=1.0).contains(&ks), "KS distance out of range");
        }
        writeln!(f, "state_count: {}", self.state_count)?;
        writeln!(f, "transition_count: {}", self.transition_count)?;
        if let Some(r) = self.delivery_ratio_model {
            writeln!(f, "delivery_ratio_model: {r}")?;
        }
        if let Some(r) = self.delivery_ratio_sim {
            writeln!(f, "delivery_ratio_sim: {r}")?;
        }
        if let Some(ks) = self.ks_distance {
            writeln!(f, "ks_distance: {ks}")?;
        }
        writeln!(f, "wall_time_build_s: {:.6}", self.wall_build_s)?;
        if let Some(t) = self.wall_solve_s {
            writeln!(f, "wall_time_solve_s: {t:.6}")?;
        }
        if let Some(t) = self.wall_sim_s {
            writeln!(f, "wall_time_simulate_s: {t:.6}")?;
        }
        Ok(())
    }
}

fn write_or_print(content: &str, out: Option<&Path>, what: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, content).map_err(|e| {
                CliError::Io(format!("cannot write {what} to {}: {e}", path.display()))
            })?;
            println!("{what} written to {}", path.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Exact empirical distribution: a step function with its own jump points as
/// the grid, so the KS distance is not blurred by binning.
fn empirical_on_samples(samples: &[f64], n_total: usize) -> DelayDistribution {
    let mut grid = samples.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
    grid.dedup();
    if grid.is_empty() {
        grid.push(1.0);
    }
    if grid[0] == 0.0 {
        grid[0] = f64::MIN_POSITIVE;
    }
    empirical_cdf(samples, n_total, &grid).expect("well-formed empirical inputs")
}

fn cmd_build(
    config: &Path,
    force_hetero: bool,
    dump: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let spec = load_spec(config)?;
    let view = validate_spec(&spec, config)?;
    let started = Instant::now();
    let chain = build_chain(&view, force_hetero)?;
    let report = RunReport {
        state_count: chain.state_count(),
        transition_count: chain.transition_count(),
        delivery_ratio_model: None,
        delivery_ratio_sim: None,
        ks_distance: None,
        wall_build_s: started.elapsed().as_secs_f64(),
        wall_solve_s: None,
        wall_sim_s: None,
    };
    print!("{report}");
    if dump {
        write_or_print(&chain.dump(), out, "chain dump")?;
    }
    Ok(())
}

fn cmd_solve(
    config: &Path,
    force_hetero: bool,
    grid_points: Option<usize>,
    t_max: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let spec = load_spec(config)?;
    let view = validate_spec(&spec, config)?;
    let build_started = Instant::now();
    let chain = build_chain(&view, force_hetero)?;
    let wall_build_s = build_started.elapsed().as_secs_f64();

    let grid = grid_for(&view, grid_points, t_max)?;
    let solve_started = Instant::now();
    let solved = chain.cdf(&grid)?;
    let wall_solve_s = solve_started.elapsed().as_secs_f64();

    if out.is_some() {
        let report = RunReport {
            state_count: chain.state_count(),
            transition_count: chain.transition_count(),
            delivery_ratio_model: Some(solved.delivery_ratio()),
            delivery_ratio_sim: None,
            ks_distance: None,
            wall_build_s,
            wall_solve_s: Some(wall_solve_s),
            wall_sim_s: None,
        };
        print!("{report}");
    }
    write_or_print(&solved.to_csv(), out, "cdf csv")
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    config: &Path,
    force_hetero: bool,
    grid_points: Option<usize>,
    t_max: Option<f64>,
    ne: usize,
    seed: u64,
    horizon: Option<f64>,
    ks_threshold: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if ne == 0 {
        return Err(CliError::Flag("--ne must be at least 1".into()));
    }
    if !(ks_threshold.is_finite() && ks_threshold > 0.0) {
        return Err(CliError::Flag(format!(
            "--ks-threshold must be positive and finite, got {ks_threshold}"
        )));
    }
    let spec = load_spec(config)?;
    let view = validate_spec(&spec, config)?;
    let horizon = match horizon {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => {
            return Err(CliError::Flag(format!(
                "--horizon must be positive and finite, got {h}"
            )))
        }
        None => 50.0 * view.max_mean().unwrap_or(1.0),
    };

    let build_started = Instant::now();
    let chain = build_chain(&view, force_hetero)?;
    let wall_build_s = build_started.elapsed().as_secs_f64();
    let grid = grid_for(&view, grid_points, t_max)?;
    let sim_cfg = SimConfig { n_messages: ne, horizon, seed };

    // The solver and the simulator are independent; run them side by side.
    let (solved, sim_result, wall_solve_s, wall_sim_s) = std::thread::scope(|scope| {
        let solver = scope.spawn(|| {
            let started = Instant::now();
            let solved = chain.cdf(&grid);
            (solved, started.elapsed().as_secs_f64())
        });
        let simulator = scope.spawn(|| {
            let started = Instant::now();
            let outcomes = simulate(&spec, &sim_cfg);
            (outcomes, started.elapsed().as_secs_f64())
        });
        let (solved, wall_solve_s) = solver.join().expect("solver thread panicked");
        let (outcomes, wall_sim_s) = simulator.join().expect("simulator thread panicked");
        (solved, outcomes, wall_solve_s, wall_sim_s)
    });
    let solved = solved?;
    let outcomes = sim_result.map_err(|e| match e {
        SimError::InvalidHorizon { .. } | SimError::NoMessages => CliError::Flag(e.to_string()),
        SimError::Spec(inner) => CliError::Config {
            path: config.display().to_string(),
            message: inner.to_string(),
        },
    })?;

    let delays: Vec<f64> = outcomes.iter().filter_map(|o| o.delay).collect();
    let ratio_sim = delays.len() as f64 / outcomes.len() as f64;
    let empirical_exact = empirical_on_samples(&delays, outcomes.len());
    let ks = ks_distance(&solved, &empirical_exact);
    let binned = empirical_cdf(&delays, outcomes.len(), solved.grid())
        .expect("model grid is valid for the empirical CDF");

    let mut csv = String::from("t_seconds,cdf_model,cdf_sim\n");
    for ((t, model), sim) in solved
        .grid()
        .iter()
        .zip(solved.cdf())
        .zip(binned.cdf())
    {
        csv.push_str(&format!("{t},{model},{sim}\n"));
    }
    csv.push_str(&format!(
        "# delivery_ratio_model={}\n# delivery_ratio_sim={ratio_sim}\n# ks_distance={ks}\n",
        solved.delivery_ratio()
    ));

    let report = RunReport {
        state_count: chain.state_count(),
        transition_count: chain.transition_count(),
        delivery_ratio_model: Some(solved.delivery_ratio()),
        delivery_ratio_sim: Some(ratio_sim),
        ks_distance: Some(ks),
        wall_build_s,
        wall_solve_s: Some(wall_solve_s),
        wall_sim_s: Some(wall_sim_s),
    };
    print!("{report}");
    write_or_print(&csv, out, "comparison csv")?;

    if ks > ks_threshold {
        return Err(CliError::Comparison(format!(
            "KS distance {ks:.6} exceeds threshold {ks_threshold}"
        )));
    }
    Ok(())
}

fn cmd_gen_random(n: usize, l: u64, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if n < 3 {
        return Err(CliError::Flag(format!(
            "--n must be at least 3 (source, relay, destination), got {n}"
        )));
    }
    if l == 0 || !l.is_power_of_two() {
        return Err(CliError::Flag(format!(
            "--l must be a power of two, got {l}"
        )));
    }
    let spec = bsw_core::random_sparse_spec(n, l, seed);
    let contacts = match &spec.contact_means {
        ContactMeans::Pairs(pairs) => pairs
            .iter()
            .map(|p| ContactEntry { i: p.i, j: p.j, mean_s: p.mean_s })
            .collect(),
        ContactMeans::Scalar(_) => Vec::new(),
    };
    let config = ConfigFile {
        n: spec.node_count,
        l: spec.replication_factor,
        source: spec.source,
        destination: spec.destination,
        mean: None,
        contacts: Some(contacts),
        direct_contact: None,
    };
    let mut text = serde_json::to_string_pretty(&config)
        .map_err(|e| CliError::Internal(format!("config serialization: {e}")))?;
    text.push('\n');
    write_or_print(&text, out, "network config")
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { config, force_hetero, dump, out } => {
            cmd_build(&config, force_hetero, dump, out.as_deref())
        }
        Command::Solve { config, force_hetero, grid_points, t_max, out } => {
            cmd_solve(&config, force_hetero, grid_points, t_max, out.as_deref())
        }
        Command::Compare {
            config,
            force_hetero,
            grid_points,
            t_max,
            ne,
            seed,
            horizon,
            ks_threshold,
            out,
        } => cmd_compare(
            &config,
            force_hetero,
            grid_points,
            t_max,
            ne,
            seed,
            horizon,
            ks_threshold,
            out.as_deref(),
        ),
        Command::GenRandom { n, l, seed, out } => cmd_gen_random(n, l, seed, out.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
