//! Command line front end: configuration parsing, experiment presets, and
//! CSV emission.
//!
//! The binary exposes two subcommands. `run` executes a single simulation
//! configuration assembled from flags and an optional flat `key=value`
//! config file (flags override the file) and emits one CSV of cumulative
//! regret curves. `preset` executes a named bundle of curves over a fixed
//! topology and arm set, writes one trace CSV per (curve, repetition), and a
//! summary CSV of mean and standard deviation curves next to closed-form
//! bound columns.
//!
//! All emitted floats use 17 significant digits so files round-trip to the
//! exact in-memory values, and every run is deterministic in the master
//! seed regardless of how many worker threads execute repetitions.

use std::fs;
use std::io::{self, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{dducb_finite_time_bound, problem_lower_bound, BoundInputs};
use crate::bandit::{gaps, BanditError, BanditInstance};
use crate::graph::{
    build_gossip_matrix, build_topology, GraphError, Topology, TopologySpec,
};
use crate::mixing::{compute_delay, MixError, MixParams};
use crate::policy::PolicyConfig;
use crate::simulator::{
    aggregate_traces, run_simulation, AggregateCurves, Algorithm, RegretTrace, SimError,
    SimulationConfig,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown preset `{name}`; available presets: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    #[error("unknown configuration key `{flag}`")]
    UnknownFlag { flag: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("malformed config line `{line}`: expected key=value")]
    MalformedConfigLine { line: String },
    #[error("no traces to emit")]
    NoTraces,
    #[error("malformed csv: {reason}")]
    MalformedCsv { reason: String },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Names accepted by the `preset` subcommand.
pub const PRESET_NAMES: [&str; 4] =
    ["fig1-cycle-100", "fig1-cycle-200", "fig1-grid-100", "fig1-grid-225"];

#[derive(Debug, Parser)]
#[command(
    name = "dducb",
    about = "Cooperative bandit simulator over gossip networks",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation configuration and emit a regret-curve CSV.
    Run(RunArgs),
    /// Run a named experiment preset and write its CSV files.
    Preset(PresetArgs),
}

/// Flags of the `run` subcommand. Every flag has a config-file counterpart
/// under the same name; a flag set on the command line wins.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Flat key=value config file providing defaults for the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Graph family: cycle, grid, complete, or custom.
    #[arg(long)]
    pub topology: Option<String>,
    /// Number of nodes (must be a perfect square for grids).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Edge list file (one `u v` pair per line) for the custom topology.
    #[arg(long)]
    pub edges_file: Option<PathBuf>,
    /// CSV file of arm means; defaults to the built-in 17-arm set.
    #[arg(long)]
    pub arms_file: Option<PathBuf>,
    /// Reward family: gaussian (default) or bernoulli.
    #[arg(long)]
    pub distribution: Option<String>,
    /// Subgaussian scale of gaussian rewards.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Number of rounds.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Algorithm: dducb, dducb-unaccel, centralized, independent,
    /// running-consensus.
    #[arg(long)]
    pub algo: Option<String>,
    /// Confidence exponent of the delayed-UCB index (must exceed 1).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Mixing accuracy target in (0, (eta-1)/(7(eta+1))).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Exploration knob of the running-consensus baseline (must exceed 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Master seed; every repetition derives its rewards from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent repetitions.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Policy variant: none, local-pulls, delta-mix, or share-pulls.
    #[arg(long)]
    pub variant: Option<String>,
    /// Per-round scalar budget for bandwidth-limited gossip.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Use this spectral bound instead of the computed one.
    #[arg(long)]
    pub lambda2_override: Option<f64>,
    /// Output CSV path; omitted means stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Preset name, one of the fig1 family.
    pub name: String,
    /// Directory receiving the trace and summary CSV files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Master seed shared by every curve of the preset.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// The arm means used when no `arms-file` is given: one optimal arm at 1.0
/// and sixteen suboptimal arms at 0.8.
pub fn default_arm_means() -> Vec<f64> {
    let mut means = vec![1.0];
    means.extend(std::iter::repeat(0.8).take(16));
    means
}

/// A fully resolved `run` invocation.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub config: SimulationConfig,
    /// Label written into the `algo` CSV column.
    pub label: String,
    pub out: Option<PathBuf>,
}

/// Merged view of the config file and command line flags, still unresolved.
#[derive(Debug, Default, Clone)]
struct Settings {
    topology: Option<String>,
    nodes: Option<usize>,
    edges_file: Option<PathBuf>,
    arms_file: Option<PathBuf>,
    distribution: Option<String>,
    sigma: Option<f64>,
    horizon: Option<u64>,
    algo: Option<String>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    gamma: Option<f64>,
    seed: Option<u64>,
    reps: Option<u64>,
    variant: Option<String>,
    bandwidth: Option<usize>,
    lambda2_override: Option<f64>,
    out: Option<PathBuf>,
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: format!("{e}"),
    })
}

impl Settings {
    /// Applies one config-file entry; keys use the flag spelling.
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "topology" => self.topology = Some(value.to_string()),
            "nodes" => self.nodes = Some(parse_scalar(key, value)?),
            "edges-file" => self.edges_file = Some(PathBuf::from(value)),
            "arms-file" => self.arms_file = Some(PathBuf::from(value)),
            "distribution" => self.distribution = Some(value.to_string()),
            "sigma" => self.sigma = Some(parse_scalar(key, value)?),
            "horizon" => self.horizon = Some(parse_scalar(key, value)?),
            "algo" => self.algo = Some(value.to_string()),
            "eta" => self.eta = Some(parse_scalar(key, value)?),
            "epsilon" => self.epsilon = Some(parse_scalar(key, value)?),
            "gamma" => self.gamma = Some(parse_scalar(key, value)?),
            "seed" => self.seed = Some(parse_scalar(key, value)?),
            "reps" => self.reps = Some(parse_scalar(key, value)?),
            "variant" => self.variant = Some(value.to_string()),
            "bandwidth" => self.bandwidth = Some(parse_scalar(key, value)?),
            "lambda2-override" => self.lambda2_override = Some(parse_scalar(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(CliError::UnknownFlag { flag: key.to_string() }),
        }
        Ok(())
    }

    /// Reads a flat key=value file; blank lines and `#` comments allowed.
    fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::MalformedConfigLine { line: line.to_string() })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn overlay(&mut self, args: &RunArgs) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &args.$field {
                    self.$field = Some(v.clone());
                }
            };
        }
        take!(topology);
        take!(nodes);
        take!(edges_file);
        take!(arms_file);
        take!(distribution);
        take!(sigma);
        take!(horizon);
        take!(algo);
        take!(eta);
        take!(epsilon);
        take!(gamma);
        take!(seed);
        take!(reps);
        take!(variant);
        take!(bandwidth);
        take!(lambda2_override);
        take!(out);
    }
}

fn invalid(key: &str, value: impl std::fmt::Display, reason: &str) -> CliError {
    CliError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn resolve_topology(settings: &Settings) -> Result<TopologySpec, CliError> {
    let kind = settings.topology.as_deref().unwrap_or("cycle");
    let nodes = settings.nodes.unwrap_or(100);
    match kind {
        "cycle" => Ok(TopologySpec::Cycle { nodes }),
        "grid" => Ok(TopologySpec::Grid { nodes }),
        "complete" => Ok(TopologySpec::Complete { nodes }),
        "custom" => {
            let path = settings.edges_file.as_ref().ok_or_else(|| {
                invalid("topology", "custom", "requires edges-file")
            })?;
            let topology = Topology::from_edge_list_file(path)?;
            if let Some(n) = settings.nodes {
                if n != topology.node_count() {
                    return Err(invalid(
                        "nodes",
                        n,
                        &format!("edge list defines {} nodes", topology.node_count()),
                    ));
                }
            }
            Ok(TopologySpec::Custom {
                nodes: topology.node_count(),
                edges: topology.edges().to_vec(),
            })
        }
        other => Err(invalid(
            "topology",
            other,
            "expected cycle, grid, complete, or custom",
        )),
    }
}

fn resolve_bandit(settings: &Settings) -> Result<BanditInstance, CliError> {
    let means = match &settings.arms_file {
        Some(path) => BanditInstance::means_from_csv_file(path)?,
        None => default_arm_means(),
    };
    let family = settings.distribution.as_deref().unwrap_or("gaussian");
    match family {
        "gaussian" => Ok(BanditInstance::gaussian(means, settings.sigma.unwrap_or(1.0))?),
        "bernoulli" => {
            if let Some(sigma) = settings.sigma {
                return Err(invalid(
                    "sigma",
                    sigma,
                    "bernoulli rewards fix the subgaussian scale at 1/2",
                ));
            }
            Ok(BanditInstance::bernoulli(means)?)
        }
        other => Err(invalid("distribution", other, "expected gaussian or bernoulli")),
    }
}

fn resolve_algorithm(settings: &Settings) -> Result<Algorithm, CliError> {
    let name = settings.algo.as_deref().unwrap_or("dducb");
    match name.replace('-', "_").as_str() {
        "dducb" => Ok(Algorithm::Dducb),
        "dducb_unaccel" => Ok(Algorithm::DducbUnaccel),
        "centralized" => Ok(Algorithm::Centralized),
        "independent" => Ok(Algorithm::Independent),
        "running_consensus" => Ok(Algorithm::RunningConsensus),
        _ => Err(invalid(
            "algo",
            name,
            "expected dducb, dducb-unaccel, centralized, independent, or running-consensus",
        )),
    }
}

/// Resolves the merged settings into a runnable plan, filling documented
/// defaults for everything left unset.
fn resolve(settings: &Settings) -> Result<RunPlan, CliError> {
    let topology = resolve_topology(settings)?;
    let bandit = resolve_bandit(settings)?;
    let algorithm = resolve_algorithm(settings)?;
    let is_dducb = matches!(algorithm, Algorithm::Dducb | Algorithm::DducbUnaccel);

    let mut policy = PolicyConfig {
        eta: settings.eta.unwrap_or(2.0),
        epsilon: settings.epsilon.unwrap_or(1.0 / 22.0),
        ..PolicyConfig::default()
    };
    match settings.variant.as_deref().unwrap_or("none").replace('-', "_").as_str() {
        "none" => {}
        "local_pulls" => policy.variant_local_pulls = true,
        "delta_mix" => policy.variant_delta_mix = true,
        "share_pulls" => policy.variant_share_pulls = true,
        other => {
            return Err(invalid(
                "variant",
                other,
                "expected none, local-pulls, delta-mix, or share-pulls",
            ))
        }
    }
    if !is_dducb && settings.variant.as_deref().map_or(false, |v| v != "none") {
        return Err(invalid(
            "variant",
            settings.variant.as_deref().unwrap_or(""),
            "variants apply only to the dducb algorithms",
        ));
    }
    if !is_dducb && settings.bandwidth.is_some() {
        return Err(invalid(
            "bandwidth",
            settings.bandwidth.unwrap_or(0),
            "bandwidth limits apply only to the dducb algorithms",
        ));
    }
    policy.bandwidth_limit = settings.bandwidth;

    let config = SimulationConfig {
        topology,
        bandit,
        algorithm,
        policy,
        consensus_gamma: settings.gamma.unwrap_or(2.0),
        lambda2_override: settings.lambda2_override,
        horizon: settings.horizon.unwrap_or(10_000),
        master_seed: settings.seed.unwrap_or(0),
        repetitions: settings.reps.unwrap_or(1),
    };
    // Surface configuration errors (bad grid size, bad eta, ...) now rather
    // than mid-run; effective_policy performs the full validation chain.
    config.effective_policy()?;
    Ok(RunPlan {
        label: config.algorithm.label().to_string(),
        config,
        out: settings.out.clone(),
    })
}

/// Builds the runnable plan for a `run` invocation: config file first (if
/// any), then flags on top, then defaults for the rest.
pub fn parse_config(args: &RunArgs) -> Result<RunPlan, CliError> {
    let mut settings = Settings::default();
    if let Some(path) = &args.config {
        settings.apply_file(&fs::read_to_string(path)?)?;
    }
    settings.overlay(args);
    resolve(&settings)
}

/// One algorithm curve of a preset.
#[derive(Debug, Clone)]
pub struct PresetCurve {
    pub label: String,
    pub config: SimulationConfig,
}

/// A named experiment bundle: several curves over one topology and arm set.
#[derive(Debug, Clone)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub curves: Vec<PresetCurve>,
    /// Stage length of the accelerated curve, reused by the summary bounds.
    pub accel_delay: usize,
    /// Spectral bound of the preset topology's gossip matrix.
    pub lambda2_abs: f64,
}

fn preset_topology(name: &str) -> Option<(&'static str, TopologySpec)> {
    match name {
        "fig1-cycle-100" => Some(("fig1-cycle-100", TopologySpec::Cycle { nodes: 100 })),
        "fig1-cycle-200" => Some(("fig1-cycle-200", TopologySpec::Cycle { nodes: 200 })),
        "fig1-grid-100" => Some(("fig1-grid-100", TopologySpec::Grid { nodes: 100 })),
        "fig1-grid-225" => Some(("fig1-grid-225", TopologySpec::Grid { nodes: 225 })),
        _ => None,
    }
}

/// Assembles a preset: the delayed-UCB curve with accelerated mixing, the
/// plain-mixing curve with its stage length forced to match the accelerated
/// one, and three running-consensus curves with exploration knob 2, 1.01,
/// and 1.001. All curves share the 17-arm gaussian instance, horizon 10^4,
/// and 10 repetitions.
pub fn build_preset(name: &str, seed: u64) -> Result<ExperimentPreset, CliError> {
    let (canonical, topology) =
        preset_topology(name).ok_or_else(|| CliError::UnknownPreset { name: name.to_string() })?;
    let bandit = BanditInstance::gaussian(default_arm_means(), 1.0)?;
    let built = build_topology(&topology)?;
    let matrix = build_gossip_matrix(&built);
    let lambda2_abs = matrix.lambda2_abs().expect("preset matrices have a spectrum");
    let params = MixParams::new(lambda2_abs, built.node_count(), 1.0 / 22.0)?;
    let accel_delay = compute_delay(&params, true);

    let base = SimulationConfig {
        topology,
        bandit,
        algorithm: Algorithm::Dducb,
        policy: PolicyConfig { variant_local_pulls: true, ..PolicyConfig::default() },
        consensus_gamma: 2.0,
        lambda2_override: None,
        horizon: 10_000,
        master_seed: seed,
        repetitions: 10,
    };

    let mut curves = Vec::new();
    curves.push(PresetCurve { label: "dducb".into(), config: base.clone() });
    let mut unaccel = base.clone();
    unaccel.algorithm = Algorithm::DducbUnaccel;
    unaccel.policy.delay_override = Some(accel_delay);
    curves.push(PresetCurve { label: "dducb_unaccel".into(), config: unaccel });
    for gamma in [2.0, 1.01, 1.001] {
        let mut rc = base.clone();
        rc.algorithm = Algorithm::RunningConsensus;
        rc.consensus_gamma = gamma;
        rc.policy.variant_local_pulls = false;
        curves.push(PresetCurve { label: format!("rc_gamma_{gamma}"), config: rc });
    }
    Ok(ExperimentPreset { name: canonical, curves, accel_delay, lambda2_abs })
}

/// File name of one curve repetition inside a preset output directory.
pub fn trace_file_name(preset: &str, label: &str, rep: u64) -> String {
    format!("{preset}-{label}-rep{rep}.csv")
}

/// File name of the preset summary.
pub fn summary_file_name(preset: &str) -> String {
    format!("{preset}-summary.csv")
}

/// Runs every curve of a preset, writes one CSV per (curve, repetition) and
/// the summary CSV, and returns the written paths (summary last).
pub fn run_preset(name: &str, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let preset = build_preset(name, seed)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut labels = Vec::new();
    let mut aggregates: Vec<AggregateCurves> = Vec::new();
    for curve in &preset.curves {
        let traces = run_simulation(&curve.config)?;
        for trace in &traces {
            let path = out_dir.join(trace_file_name(preset.name, &curve.label, trace.rep));
            emit_csv(&path, &curve.label, std::slice::from_ref(trace))?;
            written.push(path);
        }
        aggregates.push(aggregate_traces(&traces)?);
        labels.push(curve.label.clone());
    }

    let reference = &preset.curves[0].config;
    let profile = gaps(&reference.bandit);
    let bound_inputs = BoundInputs {
        gaps: profile.gaps.clone(),
        sigma: reference.bandit.sigma(),
        eta: reference.policy.eta,
        epsilon: reference.policy.epsilon,
        n_nodes: reference.topology.nodes(),
        horizon: reference.horizon,
        delay: preset.accel_delay,
        lambda2_abs: preset.lambda2_abs,
        gamma: 2.0,
        gap_cap: profile.max_gap(),
        full_spectrum: None,
    };
    let summary_path = out_dir.join(summary_file_name(preset.name));
    let mut file = io::BufWriter::new(fs::File::create(&summary_path)?);
    write_summary(&mut file, &labels, &aggregates, &bound_inputs)?;
    file.flush()?;
    written.push(summary_path);
    Ok(written)
}

/// Writes the per-round summary table: mean and standard deviation of every
/// curve plus the finite-time bound of the delayed-UCB configuration and
/// the order-level problem lower bound (unit constants), both evaluated at
/// each round.
pub fn write_summary<W: IoWrite>(
    out: &mut W,
    labels: &[String],
    aggregates: &[AggregateCurves],
    bound_inputs: &BoundInputs,
) -> Result<(), CliError> {
    if labels.len() != aggregates.len() || labels.is_empty() {
        return Err(CliError::NoTraces);
    }
    let horizon = aggregates[0].mean.len();
    if aggregates.iter().any(|a| a.mean.len() != horizon) {
        return Err(CliError::MalformedCsv {
            reason: "summary curves have unequal lengths".into(),
        });
    }
    write!(out, "t")?;
    for label in labels {
        write!(out, ",{label}_mean,{label}_stddev")?;
    }
    writeln!(out, ",dducb_finite_time_bound,problem_lower_bound_unit_constants")?;
    let mut at_round = bound_inputs.clone();
    for t in 1..=horizon {
        at_round.horizon = t as u64;
        write!(out, "{t}")?;
        for aggregate in aggregates {
            write!(
                out,
                ",{:.16e},{:.16e}",
                aggregate.mean[t - 1],
                aggregate.stddev[t - 1]
            )?;
        }
        writeln!(
            out,
            ",{:.16e},{:.16e}",
            dducb_finite_time_bound(&at_round),
            problem_lower_bound(&at_round)
        )?;
    }
    Ok(())
}

/// Writes regret traces as CSV with header `rep,t,algo,cum_regret`, one row
/// per (repetition, round), sorted by repetition then round. Floats carry
/// 17 significant digits so parsing the file back reproduces them exactly.
pub fn write_traces_csv<W: IoWrite>(
    out: &mut W,
    label: &str,
    traces: &[RegretTrace],
) -> Result<(), CliError> {
    if traces.is_empty() {
        return Err(CliError::NoTraces);
    }
    let mut ordered: Vec<&RegretTrace> = traces.iter().collect();
    ordered.sort_by_key(|trace| trace.rep);
    writeln!(out, "rep,t,algo,cum_regret")?;
    for trace in ordered {
        for (i, value) in trace.cumulative_pseudo_regret.iter().enumerate() {
            writeln!(out, "{},{},{label},{value:.16e}", trace.rep, i + 1)?;
        }
    }
    Ok(())
}

/// Writes traces to a file; see [`write_traces_csv`].
pub fn emit_csv(path: &Path, label: &str, traces: &[RegretTrace]) -> Result<(), CliError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    write_traces_csv(&mut file, label, traces)?;
    file.flush()?;
    Ok(())
}

/// One curve read back from an emitted CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCurve {
    pub rep: u64,
    pub algo: String,
    pub cum_regret: Vec<f64>,
}

/// Parses text produced by [`write_traces_csv`]. Rows are grouped by
/// (repetition, algorithm label) in order of first appearance; round
/// indices must run 1, 2, ... within each group.
pub fn parse_csv(text: &str) -> Result<Vec<ParsedCurve>, CliError> {
    let malformed = |reason: String| CliError::MalformedCsv { reason };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed("empty file".into()))?;
    if header != "rep,t,algo,cum_regret" {
        return Err(malformed(format!("unexpected header `{header}`")));
    }
    let mut curves: Vec<ParsedCurve> = Vec::new();
    for (index, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(malformed(format!("row {} has {} fields", index + 2, fields.len())));
        }
        let rep: u64 = fields[0]
            .parse()
            .map_err(|e| malformed(format!("row {}: bad rep: {e}", index + 2)))?;
        let t: usize = fields[1]
            .parse()
            .map_err(|e| malformed(format!("row {}: bad t: {e}", index + 2)))?;
        let value: f64 = fields[3]
            .parse()
            .map_err(|e| malformed(format!("row {}: bad cum_regret: {e}", index + 2)))?;
        let algo = fields[2];
        let matching = curves
            .iter_mut()
            .find(|c| c.rep == rep && c.algo == algo);
        let curve = match matching {
            Some(curve) => curve,
            None => {
                curves.push(ParsedCurve {
                    rep,
                    algo: algo.to_string(),
                    cum_regret: Vec::new(),
                });
                curves.last_mut().expect("just pushed")
            }
        };
        if t != curve.cum_regret.len() + 1 {
            return Err(malformed(format!(
                "row {}: expected t = {}, found {t}",
                index + 2,
                curve.cum_regret.len() + 1
            )));
        }
        curve.cum_regret.push(value);
    }
    if curves.is_empty() {
        return Err(malformed("no data rows".into()));
    }
    Ok(curves)
}

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => execute_run(args),
        Command::Preset(args) => {
            run_preset(&args.name, args.seed, &args.out_dir)?;
            Ok(())
        }
    }
}

fn execute_run(args: &RunArgs) -> Result<(), CliError> {
    let plan = parse_config(args)?;
    let traces = run_simulation(&plan.config)?;
    match &plan.out {
        Some(path) => emit_csv(path, &plan.label, &traces),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_traces_csv(&mut lock, &plan.label, &traces)
        }
    }
}
