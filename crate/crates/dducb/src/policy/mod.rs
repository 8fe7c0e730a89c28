//! The decentralized delayed-UCB policy and its baselines.
//!
//! Each agent keeps four pairs of per-arm statistics. `(alpha, a)` are mixed
//! reward sums and pull counts divided by the node count, the only pair the
//! UCB index reads; `(beta, b)` are the pair currently being gossip-mixed;
//! `(gamma, c)` are fresh local accumulators for the running stage; and
//! `(delta, d)` are running totals of every finished mix, which realize the
//! overwrite of `(alpha, a)` at stage boundaries. Time is split into stages
//! of `C` rounds (`C` = the mixing delay): within a stage the agent plays the
//! arm chosen at the stage start while `(beta, b)` advance one gossip step
//! per round; at the stage boundary the freshly mixed pair is folded into
//! `(delta, d)`, `(alpha, a)` are overwritten, and `(gamma, c)` become the
//! next `(beta, b)`.
//!
//! Variants: `variant_local_pulls` folds each local pull into `(alpha, a)`
//! immediately (and reselects the arm every round); `variant_delta_mix`
//! additionally mixes `(delta, d)` one plain gossip step per round and lets
//! the index read them; `variant_share_pulls` attaches the sender's current
//! pull to each message; `bandwidth_limit` stretches a stage over
//! `E = ceil(2KC/L)` rounds, sending at most `L` of the `2K` iterate entries
//! per round so that every entry still takes exactly `C` mixing steps.

mod baselines;

pub use baselines::{RunningConsensusUcb, UcbBaseline};

use thiserror::Error;

use crate::mixing::{compute_delay, mix_step, unaccel_mix_step, MixError, MixParams, MixerState};
use crate::graph::SparseRow;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("arm {arm} has zero observed count; UCB index undefined")]
    ZeroCount { arm: usize },
    #[error("neighbor iterate from stage step {got} cannot be mixed at stage step {expected}")]
    StaleNeighborIterate { expected: usize, got: usize },
    #[error("malformed round message: {reason}")]
    MalformedMessage { reason: String },
    #[error("invalid policy configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Mix(#[from] MixError),
}

/// Tunables of the policy plus the network facts it needs.
///
/// `eta` is the exploration exponent (> 1) and `epsilon` the mixing accuracy
/// target, constrained to `(0, (eta-1)/(7(eta+1)))` so the confidence radius
/// absorbs the mixing error. `sigma` is the reward subgaussian proxy and must
/// match the bandit instance. `lambda2_bound` is `|lambda2|` of the gossip
/// matrix (or a deliberate override), `n_nodes` the network size.
/// `delay_override` forces the stage length to a chosen upper bound instead
/// of the computed delay.
#[derive(Debug, Clone)]
pub struct PolicyConfig {
    pub eta: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub accelerated: bool,
    pub variant_local_pulls: bool,
    pub variant_delta_mix: bool,
    pub variant_share_pulls: bool,
    pub bandwidth_limit: Option<usize>,
    pub delay_override: Option<usize>,
    pub n_nodes: usize,
    pub lambda2_bound: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            eta: 2.0,
            epsilon: 1.0 / 22.0,
            sigma: 1.0,
            accelerated: true,
            variant_local_pulls: false,
            variant_delta_mix: false,
            variant_share_pulls: false,
            bandwidth_limit: None,
            delay_override: None,
            n_nodes: 1,
            lambda2_bound: 0.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let fail = |reason: String| Err(PolicyError::InvalidConfig { reason });
        if !(self.eta > 1.0) {
            return fail(format!("eta must be > 1, got {}", self.eta));
        }
        let eps_cap = (self.eta - 1.0) / (7.0 * (self.eta + 1.0));
        if !(self.epsilon > 0.0 && self.epsilon < eps_cap) {
            return fail(format!(
                "epsilon must lie in (0, {eps_cap:.6}) for eta = {}, got {}",
                self.eta, self.epsilon
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.n_nodes == 0 {
            return fail("n_nodes must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.lambda2_bound) {
            return fail(format!(
                "lambda2_bound must be in [0, 1), got {}",
                self.lambda2_bound
            ));
        }
        if let Some(l) = self.bandwidth_limit {
            if l == 0 {
                return fail("bandwidth limit must be >= 1 scalar per round".into());
            }
            if self.variant_share_pulls {
                return fail("bandwidth limit cannot be combined with pull sharing".into());
            }
            if self.variant_delta_mix {
                return fail("bandwidth limit cannot be combined with delta mixing".into());
            }
        }
        if self.delay_override == Some(0) {
            return fail("delay override must be >= 1".into());
        }
        Ok(())
    }

    pub fn mix_params(&self) -> MixParams {
        MixParams {
            lambda2_abs: self.lambda2_bound,
            n_nodes: self.n_nodes,
            epsilon: self.epsilon,
        }
    }

    /// Stage mixing delay `C`: the override if set, otherwise the computed
    /// delay for the configured spectrum and acceleration mode.
    pub fn delay(&self) -> usize {
        match self.delay_override {
            Some(c) => c.max(1),
            None => compute_delay(&self.mix_params(), self.accelerated),
        }
    }

    /// Stage length and transmission plan for `arms` arms: `(C, None)`
    /// without an effective bandwidth limit, otherwise the stretched
    /// schedule.
    pub fn stage_plan(&self, arms: usize) -> (usize, Option<BandwidthSchedule>) {
        let c = self.delay();
        match self.bandwidth_limit {
            Some(l) if l < 2 * arms => {
                let schedule = limited_bandwidth_schedule(arms, c, l);
                (schedule.stage_len, Some(schedule))
            }
            _ => (c, None),
        }
    }
}

/// Per-round transmission plan under a bandwidth limit: `rounds[i]` lists
/// the iterate entries (0..K = reward entries, K..2K = count entries) sent
/// and mixed in round `i` of the stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandwidthSchedule {
    pub stage_len: usize,
    pub rounds: Vec<Vec<usize>>,
}

/// Stretches a stage so that all `2K` iterate entries take exactly `delay`
/// mixing steps while at most `limit` scalars are sent per round.
///
/// `E = ceil(2K*delay/limit)`, clamped below by `delay` because an entry can
/// take at most one mixing step per round; with `limit >= 2K` this is just
/// full vectors for `delay` rounds. The plan packs the `delay`-fold
/// repetition of the entry list into consecutive rounds; since a round holds
/// fewer than `2K` consecutive items it never contains the same entry twice,
/// so per-entry steps remain sequential. All agents share the plan.
pub fn limited_bandwidth_schedule(arms: usize, delay: usize, limit: usize) -> BandwidthSchedule {
    assert!(arms > 0 && delay > 0 && limit > 0);
    let width = 2 * arms;
    if limit >= width {
        return BandwidthSchedule {
            stage_len: delay,
            rounds: vec![(0..width).collect(); delay],
        };
    }
    let total = width * delay;
    let stage_len = total.div_ceil(limit).max(delay);
    let mut rounds = Vec::with_capacity(stage_len);
    let mut item = 0usize;
    while item < total {
        let end = (item + limit).min(total);
        rounds.push((item..end).map(|x| x % width).collect());
        item = end;
    }
    debug_assert_eq!(rounds.len(), stage_len);
    BandwidthSchedule { stage_len, rounds }
}

/// What one agent sends to all neighbors in one round.
///
/// Base form carries the full `(beta, b)` iterates (`2K` scalars). Under a
/// bandwidth limit the iterates are empty and `scheduled` holds the values
/// of this round's planned entries (at most `L`). With delta mixing the
/// `(delta, d)` iterates ride along; with pull sharing the sender's current
/// `(arm, reward)` is attached.
#[derive(Debug, Clone)]
pub struct RoundMessage {
    /// Sender's within-stage step; receivers mix only same-step iterates.
    pub stage_step: usize,
    pub beta_iterate: Vec<f64>,
    pub b_iterate: Vec<f64>,
    pub delta_iterate: Option<Vec<f64>>,
    pub d_iterate: Option<Vec<f64>>,
    pub scheduled: Option<Vec<f64>>,
    pub fresh_pull: Option<(usize, f64)>,
}

impl RoundMessage {
    /// Number of scalar values on the wire (the stage step is shared clock
    /// state, not payload).
    pub fn scalar_count(&self) -> usize {
        self.beta_iterate.len()
            + self.b_iterate.len()
            + self.delta_iterate.as_ref().map_or(0, Vec::len)
            + self.d_iterate.as_ref().map_or(0, Vec::len)
            + self.scheduled.as_ref().map_or(0, Vec::len)
            + if self.fresh_pull.is_some() { 2 } else { 0 }
    }
}

/// One gossip chain: Chebyshev-accelerated or plain.
#[derive(Debug, Clone)]
enum GossipLane {
    Accelerated(MixerState),
    Plain(Vec<f64>),
}

impl GossipLane {
    fn new(values: Vec<f64>, accelerated: bool) -> Self {
        if accelerated {
            GossipLane::Accelerated(MixerState::new(values))
        } else {
            GossipLane::Plain(values)
        }
    }

    fn iterate(&self) -> &[f64] {
        match self {
            GossipLane::Accelerated(m) => m.iterate(),
            GossipLane::Plain(v) => v,
        }
    }

    fn step(
        &mut self,
        row: &SparseRow,
        incoming: &[&[f64]],
        params: &MixParams,
    ) -> Result<(), MixError> {
        match self {
            GossipLane::Accelerated(m) => mix_step(m, row, incoming, params),
            GossipLane::Plain(v) => {
                *v = unaccel_mix_step(v, row, incoming)?;
                Ok(())
            }
        }
    }
}

/// How the `(beta, b)` iterates travel: as two full vectors, or sliced into
/// `2K` scalar chains driven by a bandwidth plan.
#[derive(Debug, Clone)]
enum MixPipes {
    Full { beta: GossipLane, b: GossipLane },
    Scheduled { entries: Vec<GossipLane>, plan: BandwidthSchedule },
}

/// Full per-agent policy state.
#[derive(Debug, Clone)]
pub struct AgentState {
    alpha: Vec<f64>,
    a: Vec<f64>,
    pipes: MixPipes,
    gamma: Vec<f64>,
    c: Vec<f64>,
    delta: Vec<f64>,
    d: Vec<f64>,
    /// Completed rounds (warm-up included).
    t: u64,
    /// Pull count represented by the committed `(alpha, a)`: `(t_S - E) * N`
    /// at each stage boundary.
    s_stage: u64,
    /// `s_stage` plus pulls folded in locally since the boundary.
    s_local: u64,
    k_star: Option<usize>,
    /// Within-stage step, `0..stage_len`.
    r: usize,
    stage_len: usize,
}

impl AgentState {
    pub fn arm_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Current `(beta, b)` iterates, reassembled from the transmission form.
    pub fn beta(&self) -> Vec<f64> {
        match &self.pipes {
            MixPipes::Full { beta, .. } => beta.iterate().to_vec(),
            MixPipes::Scheduled { entries, .. } => {
                (0..self.arm_count()).map(|k| entries[k].iterate()[0]).collect()
            }
        }
    }

    pub fn b(&self) -> Vec<f64> {
        match &self.pipes {
            MixPipes::Full { b, .. } => b.iterate().to_vec(),
            MixPipes::Scheduled { entries, .. } => {
                let k = self.arm_count();
                (0..k).map(|j| entries[k + j].iterate()[0]).collect()
            }
        }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn s(&self) -> u64 {
        self.s_stage
    }

    pub fn k_star(&self) -> Option<usize> {
        self.k_star
    }

    pub fn stage_step(&self) -> usize {
        self.r
    }

    pub fn stage_len(&self) -> usize {
        self.stage_len
    }
}

/// Per-arm UCB index values over `(numerators, counts)` statistics: the
/// empirical mean plus `sqrt(2 eta sigma^2 max(ln s, 0) / (n * count))`.
pub fn ucb_indices(
    numerators: &[f64],
    counts: &[f64],
    s: u64,
    config: &PolicyConfig,
) -> Result<Vec<f64>, PolicyError> {
    let ln_s = (s as f64).ln().max(0.0);
    let scale = 2.0 * config.eta * config.sigma * config.sigma * ln_s / config.n_nodes as f64;
    numerators
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(arm, (num, cnt))| {
            if *cnt <= 0.0 {
                return Err(PolicyError::ZeroCount { arm });
            }
            Ok(num / cnt + (scale / cnt).sqrt())
        })
        .collect()
}

/// Arm with the largest UCB index; ties resolve to the lowest index.
pub fn ucb_index(
    numerators: &[f64],
    counts: &[f64],
    s: u64,
    config: &PolicyConfig,
) -> Result<usize, PolicyError> {
    let values = ucb_indices(numerators, counts, s, config)?;
    let mut best = 0usize;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Initializes an agent from its warm-up rewards (one pull per arm).
pub fn dducb_init(
    initial_rewards: &[f64],
    config: &PolicyConfig,
) -> Result<AgentState, PolicyError> {
    config.validate()?;
    let k = initial_rewards.len();
    if k == 0 {
        return Err(PolicyError::InvalidConfig { reason: "need at least one arm".into() });
    }
    let n = config.n_nodes as f64;
    let (stage_len, plan) = config.stage_plan(k);
    let pipes = match plan {
        None => MixPipes::Full {
            beta: GossipLane::new(initial_rewards.to_vec(), config.accelerated),
            b: GossipLane::new(vec![1.0; k], config.accelerated),
        },
        Some(plan) => {
            let entries = initial_rewards
                .iter()
                .map(|&x| GossipLane::new(vec![x], config.accelerated))
                .chain((0..k).map(|_| GossipLane::new(vec![1.0], config.accelerated)))
                .collect();
            MixPipes::Scheduled { entries, plan }
        }
    };
    Ok(AgentState {
        alpha: initial_rewards.iter().map(|x| x / n).collect(),
        a: vec![1.0 / n; k],
        pipes,
        gamma: vec![0.0; k],
        c: vec![0.0; k],
        delta: vec![0.0; k],
        d: vec![0.0; k],
        t: k as u64,
        s_stage: k as u64,
        s_local: k as u64,
        k_star: None,
        r: 0,
        stage_len,
    })
}

/// Selects (at stage starts, or every round with local pulls), plays the arm
/// via `pull`, folds the reward into the stage accumulators, and emits the
/// message for this round's exchange. Returns the pulled arm.
pub fn dducb_begin_round(
    state: &mut AgentState,
    config: &PolicyConfig,
    pull: impl FnOnce(usize) -> f64,
) -> Result<(usize, RoundMessage), PolicyError> {
    if config.variant_local_pulls || state.k_star.is_none() {
        let use_delta = config.variant_delta_mix && state.d.iter().all(|x| *x > 0.0);
        let arm = if use_delta {
            ucb_index(&state.delta, &state.d, state.s_stage, config)?
        } else {
            ucb_index(&state.alpha, &state.a, state.s_local, config)?
        };
        state.k_star = Some(arm);
    }
    let arm = state.k_star.expect("arm selected above");
    let reward = pull(arm);
    state.gamma[arm] += reward;
    state.c[arm] += 1.0;
    if config.variant_local_pulls {
        let n = config.n_nodes as f64;
        state.alpha[arm] += reward / n;
        state.a[arm] += 1.0 / n;
        state.s_local += 1;
    }

    let message = match &state.pipes {
        MixPipes::Full { beta, b } => RoundMessage {
            stage_step: state.r,
            beta_iterate: beta.iterate().to_vec(),
            b_iterate: b.iterate().to_vec(),
            delta_iterate: config.variant_delta_mix.then(|| state.delta.clone()),
            d_iterate: config.variant_delta_mix.then(|| state.d.clone()),
            scheduled: None,
            fresh_pull: config.variant_share_pulls.then_some((arm, reward)),
        },
        MixPipes::Scheduled { entries, plan } => RoundMessage {
            stage_step: state.r,
            beta_iterate: Vec::new(),
            b_iterate: Vec::new(),
            delta_iterate: None,
            d_iterate: None,
            scheduled: Some(
                plan.rounds[state.r].iter().map(|&e| entries[e].iterate()[0]).collect(),
            ),
            fresh_pull: None,
        },
    };
    Ok((arm, message))
}

/// Consumes the neighbors' same-round messages (aligned with
/// `row.neighbors`), advances the gossip chains one step, applies variant
/// side channels, and advances time. Commits the stage when it completes;
/// returns whether that happened.
pub fn dducb_finish_round(
    state: &mut AgentState,
    row: &SparseRow,
    incoming: &[&RoundMessage],
    config: &PolicyConfig,
) -> Result<bool, PolicyError> {
    if incoming.len() != row.neighbors.len() {
        return Err(MixError::MissingNeighborValue {
            expected: row.neighbors.len(),
            got: incoming.len(),
        }
        .into());
    }
    for msg in incoming {
        if msg.stage_step != state.r {
            return Err(PolicyError::StaleNeighborIterate {
                expected: state.r,
                got: msg.stage_step,
            });
        }
    }
    if config.variant_share_pulls {
        let n = config.n_nodes as f64;
        for msg in incoming {
            if let Some((arm, reward)) = msg.fresh_pull {
                if arm >= state.arm_count() {
                    return Err(PolicyError::MalformedMessage {
                        reason: format!("shared pull references arm {arm}"),
                    });
                }
                state.alpha[arm] += reward / n;
                state.a[arm] += 1.0 / n;
                state.s_local += 1;
            }
        }
    }

    let params = config.mix_params();
    match &mut state.pipes {
        MixPipes::Full { beta, b } => {
            let beta_in: Vec<&[f64]> =
                incoming.iter().map(|m| m.beta_iterate.as_slice()).collect();
            beta.step(row, &beta_in, &params)?;
            let b_in: Vec<&[f64]> = incoming.iter().map(|m| m.b_iterate.as_slice()).collect();
            b.step(row, &b_in, &params)?;
        }
        MixPipes::Scheduled { entries, plan } => {
            let slots = plan.rounds[state.r].len();
            let mut values = Vec::with_capacity(incoming.len());
            for msg in incoming {
                let v = msg.scheduled.as_deref().ok_or_else(|| PolicyError::MalformedMessage {
                    reason: "missing scheduled entries".into(),
                })?;
                if v.len() != slots {
                    return Err(PolicyError::MalformedMessage {
                        reason: format!("expected {slots} scheduled values, got {}", v.len()),
                    });
                }
                values.push(v);
            }
            for (slot, &entry) in plan.rounds[state.r].iter().enumerate() {
                let incoming_refs: Vec<&[f64]> =
                    values.iter().map(|v| &v[slot..slot + 1]).collect();
                entries[entry].step(row, &incoming_refs, &params)?;
            }
        }
    }

    if config.variant_delta_mix {
        let mut delta_in = Vec::with_capacity(incoming.len());
        let mut d_in = Vec::with_capacity(incoming.len());
        for msg in incoming {
            match (&msg.delta_iterate, &msg.d_iterate) {
                (Some(dv), Some(cv)) => {
                    delta_in.push(dv.as_slice());
                    d_in.push(cv.as_slice());
                }
                _ => {
                    return Err(PolicyError::MalformedMessage {
                        reason: "missing delta iterates for delta-mix variant".into(),
                    })
                }
            }
        }
        state.delta = unaccel_mix_step(&state.delta, row, &delta_in)?;
        state.d = unaccel_mix_step(&state.d, row, &d_in)?;
    }

    state.t += 1;
    state.r += 1;
    if state.r == state.stage_len {
        stage_commit(state, config);
        return Ok(true);
    }
    Ok(false)
}

/// Stage boundary: folds the finished mix into the running totals,
/// overwrites `(alpha, a)`, rotates the stage accumulators into the next
/// mixing chains, and resets the within-stage clock.
pub fn stage_commit(state: &mut AgentState, config: &PolicyConfig) {
    debug_assert!(
        state.c.iter().sum::<f64>() > 0.0,
        "committing a stage with no recorded pulls"
    );
    let k = state.arm_count();
    let beta = state.beta();
    let b = state.b();
    for j in 0..k {
        state.delta[j] += beta[j];
        state.d[j] += b[j];
    }
    state.alpha = state.delta.clone();
    state.a = state.d.clone();
    state.s_stage = (state.t - state.stage_len as u64) * config.n_nodes as u64;
    state.s_local = state.s_stage;
    let gamma = std::mem::replace(&mut state.gamma, vec![0.0; k]);
    let c = std::mem::replace(&mut state.c, vec![0.0; k]);
    state.pipes = match &state.pipes {
        MixPipes::Full { .. } => MixPipes::Full {
            beta: GossipLane::new(gamma, config.accelerated),
            b: GossipLane::new(c, config.accelerated),
        },
        MixPipes::Scheduled { plan, .. } => {
            let entries = gamma
                .iter()
                .map(|&x| GossipLane::new(vec![x], config.accelerated))
                .chain(c.iter().map(|&x| GossipLane::new(vec![x], config.accelerated)))
                .collect();
            MixPipes::Scheduled { entries, plan: plan.clone() }
        }
    };
    state.k_star = None;
    state.r = 0;
}
