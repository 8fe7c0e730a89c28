//! Baseline index policies the decentralized agent is compared against.
//!
//! `UcbBaseline` is classic UCB over one pull stream; it serves both as the
//! centralized controller (all nodes feed one shared state) and as each
//! node's isolated policy in the no-communication baseline.
//! `RunningConsensusUcb` keeps per-node weighted averages of reward sums and
//! pull counts that take one plain gossip step per round and absorb the
//! node's own pull afterwards, so statistics reach other nodes with
//! geometric attenuation rather than in delayed exact batches.

/// Classic UCB with index `mean + sqrt(4 eta sigma^2 ln(tau) / n_k)`, where
/// `tau` counts pulls recorded so far. Arms never pulled are chosen first,
/// lowest index first.
#[derive(Debug, Clone)]
pub struct UcbBaseline {
    sums: Vec<f64>,
    counts: Vec<u64>,
    pulls: u64,
    eta: f64,
    sigma: f64,
}

impl UcbBaseline {
    pub fn new(arms: usize, eta: f64, sigma: f64) -> Self {
        assert!(arms > 0 && eta > 1.0 && sigma >= 0.0);
        UcbBaseline { sums: vec![0.0; arms], counts: vec![0; arms], pulls: 0, eta, sigma }
    }

    /// Arm to play now: the first never-pulled arm if any, else the index
    /// maximizer (ties to the lowest index).
    pub fn choose(&self) -> usize {
        if let Some(arm) = self.counts.iter().position(|&c| c == 0) {
            return arm;
        }
        let ln_tau = (self.pulls as f64).ln().max(0.0);
        let scale = 4.0 * self.eta * self.sigma * self.sigma * ln_tau;
        let mut best = 0usize;
        let mut best_value = f64::NEG_INFINITY;
        for (arm, (&sum, &count)) in self.sums.iter().zip(&self.counts).enumerate() {
            let value = sum / count as f64 + (scale / count as f64).sqrt();
            if value > best_value {
                best_value = value;
                best = arm;
            }
        }
        best
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.sums[arm] += reward;
        self.counts[arm] += 1;
        self.pulls += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }
}

/// Per-node state of the running-consensus baseline.
///
/// `m_hat` and `n_hat` estimate the network-average reward sum and pull
/// count per arm. Each round the caller mixes them one plain gossip step
/// across neighbors and hands back the result together with the node's own
/// pull via [`RunningConsensusUcb::apply_consensus`].
#[derive(Debug, Clone)]
pub struct RunningConsensusUcb {
    m_hat: Vec<f64>,
    n_hat: Vec<f64>,
    rounds: u64,
}

impl RunningConsensusUcb {
    pub fn new(arms: usize) -> Self {
        assert!(arms > 0);
        RunningConsensusUcb { m_hat: vec![0.0; arms], n_hat: vec![0.0; arms], rounds: 0 }
    }

    /// Arm to play this round: the sweep arm during the first `K` rounds,
    /// then the maximizer of
    /// `m_hat/n_hat + sqrt(2 gamma sigma^2 max(ln(t n), 0) / (n n_hat))`.
    pub fn choose(&self, gamma: f64, sigma: f64, n_nodes: usize) -> usize {
        let arms = self.m_hat.len();
        if (self.rounds as usize) < arms {
            return self.rounds as usize;
        }
        let n = n_nodes as f64;
        let ln_term = ((self.rounds as f64) * n).ln().max(0.0);
        let scale = 2.0 * gamma * sigma * sigma * ln_term / n;
        let mut best = 0usize;
        let mut best_value = f64::NEG_INFINITY;
        for (arm, (&m, &c)) in self.m_hat.iter().zip(&self.n_hat).enumerate() {
            let value = if c > 0.0 { m / c + (scale / c).sqrt() } else { f64::INFINITY };
            if value > best_value {
                best_value = value;
                best = arm;
            }
        }
        best
    }

    /// Installs the gossip-mixed statistics, then folds in the node's own
    /// pull of this round and advances the round counter.
    pub fn apply_consensus(
        &mut self,
        mixed_m: Vec<f64>,
        mixed_n: Vec<f64>,
        own_arm: usize,
        own_reward: f64,
    ) {
        debug_assert_eq!(mixed_m.len(), self.m_hat.len());
        debug_assert_eq!(mixed_n.len(), self.n_hat.len());
        self.m_hat = mixed_m;
        self.n_hat = mixed_n;
        self.m_hat[own_arm] += own_reward;
        self.n_hat[own_arm] += 1.0;
        self.rounds += 1;
    }

    pub fn m_hat(&self) -> &[f64] {
        &self.m_hat
    }

    pub fn n_hat(&self) -> &[f64] {
        &self.n_hat
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }
}
