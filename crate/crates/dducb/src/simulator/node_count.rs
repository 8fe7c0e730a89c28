//! Distributed estimation of the network size.
//!
//! Every node draws a uniform value from (0, 1) and starts a mass equal to
//! that draw. Each round a node adopts the smallest value seen in its
//! closed neighborhood and replaces its mass by the gossip-weighted sum of
//! the masses of exactly those neighbors that already carried the newly
//! adopted value. Nodes not yet carrying the eventual global minimum hold
//! zero relevant mass, so the mass attached to the winning value evolves as
//! the plain gossip powers applied to a one-hot vector scaled by the
//! winning draw. Once the minimum has reached everyone and the mass has
//! mixed to near-uniform, `u_min / mass` estimates the node count at every
//! node.
//!
//! If two nodes draw the same minimal value the mass has two sources and
//! the estimate lands near `N / 2`; a single execution cannot detect this,
//! which is why the procedure is repeated in practice. At 64-bit draw
//! precision collisions are vanishingly rare.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::GossipMatrix;
use crate::mixing::{compute_delay, MixParams};
use crate::simulator::SimError;

/// Result of one estimation pass.
#[derive(Debug, Clone)]
pub struct NodeCountEstimate {
    /// Per-node estimates `u_min / mass_i`.
    pub per_node: Vec<f64>,
    /// Smallest per-node estimate.
    pub lower: f64,
    /// Largest per-node estimate.
    pub upper: f64,
    /// The random draws used (exposed so callers can detect collisions).
    pub draws: Vec<f64>,
    /// Gossip rounds executed.
    pub steps: usize,
}

/// Runs the protocol with fresh uniform draws from a seeded stream.
///
/// `steps` defaults to the plain-mixing delay for the matrix spectrum at the
/// requested accuracy, which also covers the graph diameter so the minimum
/// reaches every node.
pub fn estimate_node_count(
    matrix: &GossipMatrix,
    epsilon: f64,
    steps: Option<usize>,
    seed: u64,
) -> Result<NodeCountEstimate, SimError> {
    let n = matrix.node_count();
    let steps = match steps {
        Some(s) => s,
        None => {
            let lambda2 = matrix.lambda2_abs().ok_or_else(|| SimError::InvalidConfig {
                reason: "gossip matrix has no real spectrum; pass explicit steps".into(),
            })?;
            if lambda2 >= 1.0 {
                return Err(SimError::InvalidConfig {
                    reason: "matrix does not mix (|lambda2| >= 1); pass explicit steps".into(),
                });
            }
            compute_delay(
                &MixParams { lambda2_abs: lambda2, n_nodes: n, epsilon },
                false,
            )
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..n)
        .map(|_| loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    estimate_node_count_from_draws(matrix, &draws, steps)
}

/// Runs the protocol from externally supplied draws (all in (0, 1)).
pub fn estimate_node_count_from_draws(
    matrix: &GossipMatrix,
    draws: &[f64],
    steps: usize,
) -> Result<NodeCountEstimate, SimError> {
    let n = matrix.node_count();
    if draws.len() != n {
        return Err(SimError::InvalidConfig {
            reason: format!("need {n} draws, got {}", draws.len()),
        });
    }
    if draws.iter().any(|u| !(0.0..1.0).contains(u) || *u == 0.0) {
        return Err(SimError::InvalidConfig { reason: "draws must lie in (0, 1)".into() });
    }
    let mut candidate = draws.to_vec();
    let mut mass = draws.to_vec();
    let mut next_candidate = vec![0.0; n];
    let mut next_mass = vec![0.0; n];
    for _ in 0..steps {
        for i in 0..n {
            let row = matrix.row(i);
            // Exact value comparison is intentional: the draws act as ids.
            let mut best = candidate[i];
            for &(j, _) in &row.neighbors {
                if candidate[j] < best {
                    best = candidate[j];
                }
            }
            let mut carried = if candidate[i] == best { row.self_weight * mass[i] } else { 0.0 };
            for &(j, w) in &row.neighbors {
                if candidate[j] == best {
                    carried += w * mass[j];
                }
            }
            next_candidate[i] = best;
            next_mass[i] = carried;
        }
        std::mem::swap(&mut candidate, &mut next_candidate);
        std::mem::swap(&mut mass, &mut next_mass);
    }
    let mut per_node = Vec::with_capacity(n);
    for i in 0..n {
        if mass[i] <= 0.0 {
            return Err(SimError::ZeroMixedValue { node: i, steps });
        }
        per_node.push(candidate[i] / mass[i]);
    }
    let lower = per_node.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = per_node.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(NodeCountEstimate { per_node, lower, upper, draws: draws.to_vec(), steps })
}
