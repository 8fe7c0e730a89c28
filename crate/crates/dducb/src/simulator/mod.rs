//! Deterministic synchronous round engine for networks of bandit agents.
//!
//! A run proceeds in global rounds. Every agent pulls exactly once per
//! round; messages produced in a round are delivered to graph neighbors at
//! the exchange barrier of that same round and influence decisions from the
//! next round on. Rewards are drawn from a counter-based stream keyed by
//! `(master seed, repetition, agent, round)`, so traces depend only on the
//! configuration and never on scheduling; repetitions may therefore run on
//! a thread pool of any size without affecting output.
//!
//! Regret is pseudo-regret: after each round the engine recomputes
//! `sum_k gap_k * n_t^k` from its integer ground-truth pull counters, which
//! makes the cumulative curve nondecreasing and its final value exactly the
//! gap-weighted count identity.

mod node_count;

pub use node_count::{estimate_node_count, estimate_node_count_from_draws, NodeCountEstimate};

use rayon::prelude::*;
use thiserror::Error;

use crate::bandit::{gaps, sample_reward, BanditError, BanditInstance, GapProfile, RewardKey};
use crate::graph::{build_gossip_matrix, build_topology, GossipMatrix, GraphError, Topology, TopologySpec};
use crate::policy::{
    dducb_begin_round, dducb_finish_round, dducb_init, AgentState, PolicyConfig, PolicyError,
    RoundMessage, RunningConsensusUcb, UcbBaseline,
};
use crate::mixing::unaccel_mix_step;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mix(#[from] crate::mixing::MixError),
    #[error("invalid simulation configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("trace length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no traces to aggregate")]
    EmptyTraceSet,
    #[error("node {node} has no mixed mass after {steps} steps")]
    ZeroMixedValue { node: usize, steps: usize },
}

/// Which policy drives the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Delayed UCB with Chebyshev-accelerated mixing.
    Dducb,
    /// Delayed UCB with plain power-iteration mixing.
    DducbUnaccel,
    /// One shared UCB state fed by all nodes, `N` sequential pulls per round.
    Centralized,
    /// Independent per-node UCB, no communication.
    Independent,
    /// Per-node UCB over running-consensus statistics.
    RunningConsensus,
}

impl Algorithm {
    /// Stable label used in CSV output and CLI parsing.
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Dducb => "dducb",
            Algorithm::DducbUnaccel => "dducb_unaccel",
            Algorithm::Centralized => "centralized",
            Algorithm::Independent => "independent",
            Algorithm::RunningConsensus => "running_consensus",
        }
    }
}

/// Everything that defines one experiment cell.
///
/// The embedded [`PolicyConfig`] carries the tunables (`eta`, `epsilon`,
/// variants, bandwidth, delay override); its `n_nodes`, `lambda2_bound`,
/// `sigma`, and `accelerated` fields are derived from the topology, the
/// gossip spectrum (unless `lambda2_override` is set), the bandit instance,
/// and the algorithm before a run starts.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub topology: TopologySpec,
    pub bandit: BanditInstance,
    pub algorithm: Algorithm,
    pub policy: PolicyConfig,
    /// Exploration knob of the running-consensus baseline.
    pub consensus_gamma: f64,
    pub lambda2_override: Option<f64>,
    pub horizon: u64,
    pub master_seed: u64,
    pub repetitions: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::InvalidConfig { reason: "horizon must be >= 1".into() });
        }
        if self.repetitions == 0 {
            return Err(SimError::InvalidConfig { reason: "repetitions must be >= 1".into() });
        }
        if self.algorithm == Algorithm::RunningConsensus && !(self.consensus_gamma > 1.0) {
            return Err(SimError::InvalidConfig {
                reason: format!(
                    "consensus gamma must be > 1, got {}",
                    self.consensus_gamma
                ),
            });
        }
        if let Some(l) = self.lambda2_override {
            if !(0.0..1.0).contains(&l) {
                return Err(SimError::InvalidConfig {
                    reason: format!("lambda2 override must be in [0, 1), got {l}"),
                });
            }
        }
        Ok(())
    }

    /// The policy configuration a run will actually use, with the derived
    /// fields filled in and validated.
    pub fn effective_policy(&self) -> Result<PolicyConfig, SimError> {
        Ok(self.prepare()?.policy)
    }

    fn prepare(&self) -> Result<Prepared, SimError> {
        self.validate()?;
        let topology = build_topology(&self.topology)?;
        let matrix = build_gossip_matrix(&topology);
        let lambda2 = match self.lambda2_override {
            Some(l) => l,
            None => matrix.lambda2_abs().ok_or_else(|| SimError::InvalidConfig {
                reason: "gossip matrix has no real spectrum; set an explicit lambda2".into(),
            })?,
        };
        let mut policy = self.policy.clone();
        policy.n_nodes = topology.node_count();
        policy.lambda2_bound = lambda2;
        policy.sigma = self.bandit.sigma();
        match self.algorithm {
            Algorithm::Dducb => policy.accelerated = true,
            Algorithm::DducbUnaccel => policy.accelerated = false,
            _ => {}
        }
        policy.validate()?;
        let gap_profile = gaps(&self.bandit);
        Ok(Prepared { topology, matrix, policy, gap_profile })
    }
}

struct Prepared {
    topology: Topology,
    matrix: GossipMatrix,
    policy: PolicyConfig,
    gap_profile: GapProfile,
}

/// One repetition's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub rep: u64,
    /// `sum_k gap_k * n_t^k` after each round `t = 1..=T`.
    pub cumulative_pseudo_regret: Vec<f64>,
    /// Network-wide final pull counts `n_T^k`.
    pub pull_counts: Vec<u64>,
    /// Arms pulled per round per agent; populated only by instrumented runs.
    pub per_round_choices: Option<Vec<Vec<usize>>>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        *self.cumulative_pseudo_regret.last().unwrap_or(&0.0)
    }
}

/// Sanity record captured at each stage boundary of an instrumented run.
#[derive(Debug, Clone)]
pub struct StageAudit {
    /// Global round at which the stage committed.
    pub round: u64,
    /// Effective sample count installed by the commit.
    pub s: u64,
    /// `(round - stage length) * N`, what the commit must install.
    pub s_expected: u64,
    /// Max over arms of the relative gap between `sum_i a_i^k` and the
    /// ground-truth network pull count of the covered prefix.
    pub total_rel_error: f64,
    /// Max over nodes and arms of the relative gap between `N * a_i^k` and
    /// that ground-truth count.
    pub node_rel_error: f64,
}

/// Pointwise mean and sample standard deviation across repetitions.
#[derive(Debug, Clone)]
pub struct AggregateCurves {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

/// Runs every repetition of the configured experiment. Repetitions are
/// independent and execute in parallel; the returned traces are ordered by
/// repetition index regardless of scheduling.
pub fn run_simulation(config: &SimulationConfig) -> Result<Vec<RegretTrace>, SimError> {
    let prep = config.prepare()?;
    (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_rep(&prep, config, rep, &mut None, false))
        .collect()
}

/// Runs one delayed-UCB repetition with per-round choice recording and a
/// stage-boundary audit trail.
pub fn run_dducb_instrumented(
    config: &SimulationConfig,
    rep: u64,
) -> Result<(RegretTrace, Vec<StageAudit>), SimError> {
    if !matches!(config.algorithm, Algorithm::Dducb | Algorithm::DducbUnaccel) {
        return Err(SimError::InvalidConfig {
            reason: "instrumented runs require a delayed-UCB algorithm".into(),
        });
    }
    let prep = config.prepare()?;
    let mut audits = Some(Vec::new());
    let trace = run_rep(&prep, config, rep, &mut audits, true)?;
    Ok((trace, audits.unwrap()))
}

fn run_rep(
    prep: &Prepared,
    config: &SimulationConfig,
    rep: u64,
    audits: &mut Option<Vec<StageAudit>>,
    record_choices: bool,
) -> Result<RegretTrace, SimError> {
    match config.algorithm {
        Algorithm::Dducb | Algorithm::DducbUnaccel => {
            run_dducb_rep(prep, config, rep, audits, record_choices)
        }
        Algorithm::Centralized => run_centralized_rep(prep, config, rep, record_choices),
        Algorithm::Independent => run_independent_rep(prep, config, rep, record_choices),
        Algorithm::RunningConsensus => run_consensus_rep(prep, config, rep, record_choices),
    }
}

/// Bookkeeping shared by all engines: integer pull counters, the recomputed
/// cumulative pseudo-regret, and optional per-round choices.
struct Ledger {
    counts: Vec<u64>,
    cumulative: Vec<f64>,
    choices: Option<Vec<Vec<usize>>>,
    gaps: Vec<f64>,
    n_nodes: u64,
}

impl Ledger {
    fn new(arms: usize, horizon: u64, n_nodes: usize, gaps: &[f64], record: bool) -> Self {
        Ledger {
            counts: vec![0; arms],
            cumulative: Vec::with_capacity(horizon as usize),
            choices: record.then(Vec::new),
            gaps: gaps.to_vec(),
            n_nodes: n_nodes as u64,
        }
    }

    fn close_round(&mut self, round: u64, arms: Vec<usize>) {
        for &arm in &arms {
            self.counts[arm] += 1;
        }
        debug_assert_eq!(
            self.counts.iter().sum::<u64>(),
            self.n_nodes * round,
            "every agent must pull exactly once per round"
        );
        let regret: f64 =
            self.gaps.iter().zip(&self.counts).map(|(g, &c)| g * c as f64).sum();
        self.cumulative.push(regret);
        if let Some(choices) = &mut self.choices {
            choices.push(arms);
        }
    }

    fn into_trace(self, rep: u64) -> RegretTrace {
        RegretTrace {
            rep,
            cumulative_pseudo_regret: self.cumulative,
            pull_counts: self.counts,
            per_round_choices: self.choices,
        }
    }
}

fn reward_key(config: &SimulationConfig, rep: u64, agent: usize, round: u64) -> RewardKey {
    RewardKey { master_seed: config.master_seed, rep, agent: agent as u64, round }
}

fn run_dducb_rep(
    prep: &Prepared,
    config: &SimulationConfig,
    rep: u64,
    audits: &mut Option<Vec<StageAudit>>,
    record_choices: bool,
) -> Result<RegretTrace, SimError> {
    let n = prep.topology.node_count();
    let k = config.bandit.means().len();
    let horizon = config.horizon;
    let mut ledger = Ledger::new(k, horizon, n, &prep.gap_profile.gaps, record_choices);

    // Warm-up: every agent pulls arm (round - 1) in rounds 1..=K.
    let warm_rounds = horizon.min(k as u64);
    let mut warm_rewards: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    for round in 1..=warm_rounds {
        let arm = (round - 1) as usize;
        for (agent, rewards) in warm_rewards.iter_mut().enumerate() {
            let reward = sample_reward(&config.bandit, arm, reward_key(config, rep, agent, round))?;
            rewards.push(reward);
        }
        ledger.close_round(round, vec![arm; n]);
    }
    if horizon <= k as u64 {
        return Ok(ledger.into_trace(rep));
    }

    let mut agents: Vec<AgentState> = warm_rewards
        .iter()
        .map(|w| dducb_init(w, &prep.policy))
        .collect::<Result<_, _>>()?;

    // Counts at the current stage start; at a commit this is exactly the
    // prefix the freshly installed (alpha, a) covers.
    let mut stage_start_counts = ledger.counts.clone();
    let mut messages: Vec<RoundMessage> = Vec::with_capacity(n);
    for round in (k as u64 + 1)..=horizon {
        if agents[0].stage_step() == 0 {
            stage_start_counts.copy_from_slice(&ledger.counts);
        }
        messages.clear();
        let mut arms = Vec::with_capacity(n);
        for (agent_id, agent) in agents.iter_mut().enumerate() {
            let key = reward_key(config, rep, agent_id, round);
            let bandit = &config.bandit;
            let (arm, msg) = dducb_begin_round(agent, &prep.policy, |a| {
                sample_reward(bandit, a, key).expect("selected arm is within the instance")
            })?;
            arms.push(arm);
            messages.push(msg);
        }
        let mut commits = 0usize;
        for (agent_id, agent) in agents.iter_mut().enumerate() {
            let row = prep.matrix.row(agent_id);
            debug_assert!(
                row.neighbors.iter().all(|&(j, _)| prep.topology.are_neighbors(agent_id, j)),
                "message delivered from outside the neighborhood"
            );
            let incoming: Vec<&RoundMessage> =
                row.neighbors.iter().map(|&(j, _)| &messages[j]).collect();
            if dducb_finish_round(agent, row, &incoming, &prep.policy)? {
                commits += 1;
            }
        }
        debug_assert!(commits == 0 || commits == n, "agents must commit in lockstep");
        ledger.close_round(round, arms);
        if commits > 0 {
            if let Some(audits) = audits {
                audits.push(make_stage_audit(&agents, &stage_start_counts, round, &prep.policy));
            }
        }
    }
    Ok(ledger.into_trace(rep))
}

fn make_stage_audit(
    agents: &[AgentState],
    prefix_counts: &[u64],
    round: u64,
    policy: &PolicyConfig,
) -> StageAudit {
    let n = policy.n_nodes as f64;
    let stage_len = agents[0].stage_len() as u64;
    let s = agents[0].s();
    debug_assert!(agents.iter().all(|a| a.s() == s));
    let mut total_rel_error = 0.0f64;
    let mut node_rel_error = 0.0f64;
    for (arm, &truth) in prefix_counts.iter().enumerate() {
        let truth = truth as f64;
        let denom = truth.max(1.0);
        let total: f64 = agents.iter().map(|a| a.a()[arm]).sum();
        total_rel_error = total_rel_error.max((total - truth).abs() / denom);
        for agent in agents {
            node_rel_error = node_rel_error.max((n * agent.a()[arm] - truth).abs() / denom);
        }
    }
    StageAudit {
        round,
        s,
        s_expected: (round - stage_len) * policy.n_nodes as u64,
        total_rel_error,
        node_rel_error,
    }
}

fn run_centralized_rep(
    prep: &Prepared,
    config: &SimulationConfig,
    rep: u64,
    record_choices: bool,
) -> Result<RegretTrace, SimError> {
    let n = prep.topology.node_count();
    let k = config.bandit.means().len();
    let mut ledger = Ledger::new(k, config.horizon, n, &prep.gap_profile.gaps, record_choices);
    let mut ucb = UcbBaseline::new(k, prep.policy.eta, config.bandit.sigma());
    for round in 1..=config.horizon {
        let mut arms = Vec::with_capacity(n);
        for agent in 0..n {
            let arm = ucb.choose();
            let reward = sample_reward(&config.bandit, arm, reward_key(config, rep, agent, round))?;
            ucb.record(arm, reward);
            arms.push(arm);
        }
        ledger.close_round(round, arms);
    }
    Ok(ledger.into_trace(rep))
}

fn run_independent_rep(
    prep: &Prepared,
    config: &SimulationConfig,
    rep: u64,
    record_choices: bool,
) -> Result<RegretTrace, SimError> {
    let n = prep.topology.node_count();
    let k = config.bandit.means().len();
    let mut ledger = Ledger::new(k, config.horizon, n, &prep.gap_profile.gaps, record_choices);
    let mut nodes = vec![UcbBaseline::new(k, prep.policy.eta, config.bandit.sigma()); n];
    for round in 1..=config.horizon {
        let mut arms = Vec::with_capacity(n);
        for (agent, node) in nodes.iter_mut().enumerate() {
            let arm = node.choose();
            let reward = sample_reward(&config.bandit, arm, reward_key(config, rep, agent, round))?;
            node.record(arm, reward);
            arms.push(arm);
        }
        ledger.close_round(round, arms);
    }
    Ok(ledger.into_trace(rep))
}

fn run_consensus_rep(
    prep: &Prepared,
    config: &SimulationConfig,
    rep: u64,
    record_choices: bool,
) -> Result<RegretTrace, SimError> {
    let n = prep.topology.node_count();
    let k = config.bandit.means().len();
    let sigma = config.bandit.sigma();
    let mut ledger = Ledger::new(k, config.horizon, n, &prep.gap_profile.gaps, record_choices);
    let mut nodes: Vec<RunningConsensusUcb> = (0..n).map(|_| RunningConsensusUcb::new(k)).collect();
    for round in 1..=config.horizon {
        let arms: Vec<usize> =
            nodes.iter().map(|nd| nd.choose(config.consensus_gamma, sigma, n)).collect();
        let m_snapshot: Vec<Vec<f64>> = nodes.iter().map(|nd| nd.m_hat().to_vec()).collect();
        let n_snapshot: Vec<Vec<f64>> = nodes.iter().map(|nd| nd.n_hat().to_vec()).collect();
        for (agent, node) in nodes.iter_mut().enumerate() {
            let row = prep.matrix.row(agent);
            let m_in: Vec<&[f64]> =
                row.neighbors.iter().map(|&(j, _)| m_snapshot[j].as_slice()).collect();
            let n_in: Vec<&[f64]> =
                row.neighbors.iter().map(|&(j, _)| n_snapshot[j].as_slice()).collect();
            let mixed_m = unaccel_mix_step(&m_snapshot[agent], row, &m_in)?;
            let mixed_n = unaccel_mix_step(&n_snapshot[agent], row, &n_in)?;
            let arm = arms[agent];
            let reward = sample_reward(&config.bandit, arm, reward_key(config, rep, agent, round))?;
            node.apply_consensus(mixed_m, mixed_n, arm, reward);
        }
        ledger.close_round(round, arms);
    }
    Ok(ledger.into_trace(rep))
}

/// Pointwise mean and sample standard deviation (n - 1 normalization; zero
/// for a single trace) of the cumulative regret curves.
pub fn aggregate_traces(traces: &[RegretTrace]) -> Result<AggregateCurves, SimError> {
    let first = traces.first().ok_or(SimError::EmptyTraceSet)?;
    let len = first.cumulative_pseudo_regret.len();
    for trace in traces {
        if trace.cumulative_pseudo_regret.len() != len {
            return Err(SimError::LengthMismatch {
                expected: len,
                got: trace.cumulative_pseudo_regret.len(),
            });
        }
    }
    let count = traces.len() as f64;
    let mut mean = vec![0.0; len];
    for trace in traces {
        for (m, v) in mean.iter_mut().zip(&trace.cumulative_pseudo_regret) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut stddev = vec![0.0; len];
    if traces.len() > 1 {
        for trace in traces {
            for (s, (v, m)) in
                stddev.iter_mut().zip(trace.cumulative_pseudo_regret.iter().zip(&mean))
            {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stddev {
            *s = (*s / (count - 1.0)).sqrt();
        }
    }
    Ok(AggregateCurves { mean, stddev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config(algorithm: Algorithm) -> SimulationConfig {
        SimulationConfig {
            topology: TopologySpec::Cycle { nodes: 5 },
            bandit: BanditInstance::gaussian(vec![1.0, 0.6, 0.4], 0.5).unwrap(),
            algorithm,
            policy: PolicyConfig::default(),
            consensus_gamma: 2.0,
            lambda2_override: None,
            horizon: 300,
            master_seed: 42,
            repetitions: 2,
        }
    }

    #[test]
    fn traces_are_deterministic_and_monotone() {
        for algorithm in [
            Algorithm::Dducb,
            Algorithm::DducbUnaccel,
            Algorithm::Centralized,
            Algorithm::Independent,
            Algorithm::RunningConsensus,
        ] {
            let config = small_config(algorithm);
            let first = run_simulation(&config).unwrap();
            let second = run_simulation(&config).unwrap();
            assert_eq!(first.len(), 2);
            for (x, y) in first.iter().zip(&second) {
                assert_eq!(x, y, "{algorithm:?} traces must be reproducible");
            }
            for trace in &first {
                assert_eq!(trace.cumulative_pseudo_regret.len(), 300);
                assert!(trace
                    .cumulative_pseudo_regret
                    .windows(2)
                    .all(|w| w[1] >= w[0]));
                // Final value is exactly the gap-weighted count identity.
                let profile = gaps(&config.bandit);
                let direct: f64 = profile
                    .gaps
                    .iter()
                    .zip(&trace.pull_counts)
                    .map(|(g, &c)| g * c as f64)
                    .sum();
                assert_eq!(trace.final_regret(), direct);
                assert_eq!(trace.pull_counts.iter().sum::<u64>(), 5 * 300);
            }
        }
    }

    #[test]
    fn distinct_reps_differ() {
        let config = small_config(Algorithm::Dducb);
        let traces = run_simulation(&config).unwrap();
        assert_ne!(
            traces[0].cumulative_pseudo_regret, traces[1].cumulative_pseudo_regret,
            "different repetitions should see different rewards"
        );
    }

    #[test]
    fn truncated_horizon_stops_mid_warmup() {
        let mut config = small_config(Algorithm::Dducb);
        config.horizon = 2; // fewer rounds than arms
        let traces = run_simulation(&config).unwrap();
        assert_eq!(traces[0].cumulative_pseudo_regret.len(), 2);
        assert_eq!(traces[0].pull_counts, vec![5, 5, 0]);
    }

    #[test]
    fn instrumented_run_audits_stage_commits() {
        let mut config = small_config(Algorithm::Dducb);
        config.horizon = 500;
        let (trace, audits) = run_dducb_instrumented(&config, 0).unwrap();
        assert!(trace.per_round_choices.is_some());
        assert!(!audits.is_empty());
        let policy = config.effective_policy().unwrap();
        let stage_len = policy.delay() as u64;
        for audit in &audits {
            assert_eq!(audit.s, audit.s_expected);
            assert_eq!(audit.s_expected, (audit.round - stage_len) * 5);
            assert!(audit.total_rel_error < 1e-9, "count drift {}", audit.total_rel_error);
            assert!(audit.node_rel_error < policy.epsilon, "node drift {}", audit.node_rel_error);
        }
    }

    #[test]
    fn single_node_matches_delayed_ucb_oracle() {
        let config = SimulationConfig {
            topology: TopologySpec::Complete { nodes: 1 },
            bandit: BanditInstance::gaussian(vec![0.8, 0.5], 0.4).unwrap(),
            algorithm: Algorithm::Dducb,
            policy: PolicyConfig::default(),
            consensus_gamma: 2.0,
            lambda2_override: None,
            horizon: 400,
            master_seed: 9,
            repetitions: 1,
        };
        let policy = config.effective_policy().unwrap();
        assert_eq!(policy.delay(), 1, "single node must mix in one step");
        let (trace, _) = run_dducb_instrumented(&config, 0).unwrap();
        let choices = trace.per_round_choices.unwrap();

        // Reference: plain UCB whose statistics lag one round behind (the
        // pull of round t enters the index only from round t + 2 on).
        let mut sums = [0.0f64; 2];
        let mut counts = [0u64; 2];
        let mut pending: Option<(usize, f64)> = None;
        for round in 1..=400u64 {
            let arm = if round <= 2 {
                (round - 1) as usize
            } else {
                // Effective sample count = pulls represented in the stats.
                let s = (counts[0] + counts[1]) as f64;
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for a in 0..2 {
                    let value = sums[a] / counts[a] as f64
                        + (2.0 * 2.0 * 0.4 * 0.4 * s.ln().max(0.0) / counts[a] as f64).sqrt();
                    if value > best_value {
                        best_value = value;
                        best = a;
                    }
                }
                best
            };
            assert_eq!(choices[(round - 1) as usize], vec![arm], "round {round} diverged");
            let reward = sample_reward(
                &config.bandit,
                arm,
                RewardKey { master_seed: 9, rep: 0, agent: 0, round },
            )
            .unwrap();
            if let Some((pa, pr)) = pending.take() {
                sums[pa] += pr;
                counts[pa] += 1;
            }
            if round <= 2 {
                // Warm-up pulls enter the statistics immediately at init.
                sums[arm] += reward;
                counts[arm] += 1;
            } else {
                pending = Some((arm, reward));
            }
        }
    }

    #[test]
    fn consensus_on_complete_graph_tracks_lagged_counts() {
        // On the complete graph one plain mix step averages exactly, so each
        // node's count estimate equals (network counts before this round)/N
        // plus its own fresh pull.
        let n = 4;
        let config = SimulationConfig {
            topology: TopologySpec::Complete { nodes: n },
            bandit: BanditInstance::gaussian(vec![1.0, 0.7], 0.3).unwrap(),
            algorithm: Algorithm::RunningConsensus,
            policy: PolicyConfig::default(),
            consensus_gamma: 1.01,
            lambda2_override: None,
            horizon: 50,
            master_seed: 5,
            repetitions: 1,
        };
        let prep = config.prepare().unwrap();
        let mut nodes: Vec<RunningConsensusUcb> =
            (0..n).map(|_| RunningConsensusUcb::new(2)).collect();
        let mut counts = vec![0u64; 2];
        for round in 1..=config.horizon {
            let before = counts.clone();
            let arms: Vec<usize> =
                nodes.iter().map(|nd| nd.choose(1.01, 0.3, n)).collect();
            let m_snap: Vec<Vec<f64>> = nodes.iter().map(|nd| nd.m_hat().to_vec()).collect();
            let n_snap: Vec<Vec<f64>> = nodes.iter().map(|nd| nd.n_hat().to_vec()).collect();
            for (agent, node) in nodes.iter_mut().enumerate() {
                let row = prep.matrix.row(agent);
                let m_in: Vec<&[f64]> =
                    row.neighbors.iter().map(|&(j, _)| m_snap[j].as_slice()).collect();
                let n_in: Vec<&[f64]> =
                    row.neighbors.iter().map(|&(j, _)| n_snap[j].as_slice()).collect();
                let mixed_m = unaccel_mix_step(&m_snap[agent], row, &m_in).unwrap();
                let mixed_n = unaccel_mix_step(&n_snap[agent], row, &n_in).unwrap();
                let key = RewardKey { master_seed: 5, rep: 0, agent: agent as u64, round };
                let reward = sample_reward(&config.bandit, arms[agent], key).unwrap();
                node.apply_consensus(mixed_m, mixed_n, arms[agent], reward);
                counts[arms[agent]] += 1;
            }
            for (agent, node) in nodes.iter().enumerate() {
                for arm in 0..2 {
                    let own = if arms[agent] == arm { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(
                        node.n_hat()[arm],
                        before[arm] as f64 / n as f64 + own,
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn independent_single_node_equals_centralized_single_node() {
        let mut config = small_config(Algorithm::Independent);
        config.topology = TopologySpec::Complete { nodes: 1 };
        config.repetitions = 1;
        let independent = run_simulation(&config).unwrap();
        config.algorithm = Algorithm::Centralized;
        let centralized = run_simulation(&config).unwrap();
        assert_eq!(
            independent[0].cumulative_pseudo_regret,
            centralized[0].cumulative_pseudo_regret
        );
    }

    #[test]
    fn dducb_beats_independent_on_easy_instance() {
        // Communication must pay off: on a clear-gap instance the mixed
        // statistics concentrate pulls faster than isolated nodes.
        let mut config = small_config(Algorithm::Dducb);
        config.horizon = 2000;
        config.repetitions = 3;
        let dducb = aggregate_traces(&run_simulation(&config).unwrap()).unwrap();
        config.algorithm = Algorithm::Independent;
        let independent = aggregate_traces(&run_simulation(&config).unwrap()).unwrap();
        assert!(
            dducb.mean.last().unwrap() < independent.mean.last().unwrap(),
            "dducb {} vs independent {}",
            dducb.mean.last().unwrap(),
            independent.mean.last().unwrap()
        );
    }

    #[test]
    fn aggregate_examples() {
        let constant = |rep: u64, value: f64| RegretTrace {
            rep,
            cumulative_pseudo_regret: vec![value; 4],
            pull_counts: vec![0, 0],
            per_round_choices: None,
        };
        let single = aggregate_traces(&[constant(0, 3.0)]).unwrap();
        assert_eq!(single.mean, vec![3.0; 4]);
        assert_eq!(single.stddev, vec![0.0; 4]);
        let pair = aggregate_traces(&[constant(0, 0.0), constant(1, 2.0)]).unwrap();
        assert_eq!(pair.mean, vec![1.0; 4]);
        for s in pair.stddev {
            assert_abs_diff_eq!(s, std::f64::consts::SQRT_2, epsilon = 1e-15);
        }
        assert!(matches!(aggregate_traces(&[]), Err(SimError::EmptyTraceSet)));
        let mismatched = [
            constant(0, 1.0),
            RegretTrace {
                rep: 1,
                cumulative_pseudo_regret: vec![0.0; 3],
                pull_counts: vec![0, 0],
                per_round_choices: None,
            },
        ];
        assert!(matches!(
            aggregate_traces(&mismatched),
            Err(SimError::LengthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut config = small_config(Algorithm::Dducb);
        config.horizon = 0;
        assert!(matches!(config.validate(), Err(SimError::InvalidConfig { .. })));
        let mut config = small_config(Algorithm::RunningConsensus);
        config.consensus_gamma = 1.0;
        assert!(matches!(config.validate(), Err(SimError::InvalidConfig { .. })));
        let mut config = small_config(Algorithm::Dducb);
        config.lambda2_override = Some(1.5);
        assert!(matches!(config.validate(), Err(SimError::InvalidConfig { .. })));
    }

    #[test]
    fn effective_policy_fills_derived_fields() {
        let config = small_config(Algorithm::DducbUnaccel);
        let policy = config.effective_policy().unwrap();
        assert_eq!(policy.n_nodes, 5);
        assert!(!policy.accelerated);
        assert!(policy.lambda2_bound > 0.0 && policy.lambda2_bound < 1.0);
        assert_eq!(policy.sigma, 0.5);
        let mut config = config;
        config.lambda2_override = Some(0.25);
        assert_eq!(config.effective_policy().unwrap().lambda2_bound, 0.25);
    }

    #[test]
    fn bernoulli_rewards_supported_end_to_end() {
        let config = SimulationConfig {
            topology: TopologySpec::Cycle { nodes: 4 },
            bandit: BanditInstance::bernoulli(vec![0.9, 0.3]).unwrap(),
            algorithm: Algorithm::Dducb,
            policy: PolicyConfig::default(),
            consensus_gamma: 2.0,
            lambda2_override: None,
            horizon: 600,
            master_seed: 21,
            repetitions: 1,
        };
        let traces = run_simulation(&config).unwrap();
        let share = traces[0].pull_counts[0] as f64 / (4.0 * 600.0);
        assert!(share > 0.7, "optimal-arm share {share} too low");
    }
}
