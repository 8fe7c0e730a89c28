//! Gossip mixing iterations and the communication-delay formula.
//!
//! Plain gossip multiplies a vector by the gossip matrix `P` each round and
//! contracts toward the uniform average like `|lambda2|^s`. The accelerated
//! iteration applies the degree-`r` Chebyshev polynomial
//! `q_r(P) = T_r(P/|lambda2|) / T_r(1/|lambda2|)` instead, using the
//! three-term recursion
//!
//! ```text
//! w_{r+1} q_{r+1}(P) = (2/|lambda2|) w_r P q_r(P) - w_{r-1} q_{r-1}(P),
//! w_r = T_r(1/|lambda2|),  w_0 = 1,  w_1 = 1/|lambda2|,
//! ```
//!
//! which each node can run with one neighbor exchange per step. `q_r(1) = 1`,
//! so the average (and the entry sum) is preserved exactly, and the distance
//! to the uniform average after `C = compute_delay(..)` steps is at most
//! `epsilon/n` for any stochastic input vector. The weights stay modest:
//! `w_C = T_C(1/|lambda2|) ~ n/epsilon` by the choice of `C`, independent of
//! how close `|lambda2|` is to 1, so the recursion is overflow-safe for any
//! reasonable `n/epsilon`.
//!
//! The first step needs the conventional values `w_{-1} = 0`, `y_{-1} = 0`
//! and a one-time halving of the `w_0 * y_0` product (because
//! `T_{-1} = T_1`); [`mix_step`] applies the halving to the transmitted
//! iterates and runs the weight recursion from `w_0/2`, while the update
//! coefficient reads the restored full-scale `w_0`, which keeps `y_1 = P y_0`
//! and `q_r(1) = 1` exact.
//!
//! `|lambda2| = 0` (complete graph, single node) is special-cased: a single
//! plain multiplication already yields the exact average, so the Chebyshev
//! weights are never formed.

use thiserror::Error;

use crate::graph::{GossipMatrix, SparseRow, LAMBDA2_ZERO_TOL};

#[derive(Debug, Error)]
pub enum MixError {
    #[error("expected {expected} neighbor iterates, got {got}")]
    MissingNeighborValue { expected: usize, got: usize },
    #[error("neighbor iterate has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid mixing parameters: {reason}")]
    InvalidParams { reason: String },
}

/// Network facts the mixing layer needs: `|lambda2|` of the gossip matrix,
/// the node count, and the mixing accuracy target `epsilon`.
#[derive(Debug, Clone, Copy)]
pub struct MixParams {
    pub lambda2_abs: f64,
    pub n_nodes: usize,
    pub epsilon: f64,
}

impl MixParams {
    pub fn new(lambda2_abs: f64, n_nodes: usize, epsilon: f64) -> Result<Self, MixError> {
        if !(0.0..1.0).contains(&lambda2_abs) {
            return Err(MixError::InvalidParams {
                reason: format!("lambda2_abs must be in [0, 1), got {lambda2_abs}"),
            });
        }
        if n_nodes == 0 {
            return Err(MixError::InvalidParams { reason: "n_nodes must be >= 1".into() });
        }
        if epsilon <= 0.0 {
            return Err(MixError::InvalidParams {
                reason: format!("epsilon must be > 0, got {epsilon}"),
            });
        }
        Ok(MixParams { lambda2_abs, n_nodes, epsilon })
    }
}

/// Number of gossip steps after which every node's iterate is within
/// `epsilon/n` (in 2-norm) of the uniform average of any stochastic input.
///
/// Accelerated: `ceil(ln(2n/eps) / sqrt(2 ln(1/|lambda2|)))`.
/// Plain:       `ceil(ln(n/eps) / ln(1/|lambda2|))`.
/// `|lambda2| = 0` needs exactly one step; the result is clamped to >= 1.
pub fn compute_delay(params: &MixParams, accelerated: bool) -> usize {
    let lam = params.lambda2_abs;
    if lam <= LAMBDA2_ZERO_TOL {
        return 1;
    }
    let n = params.n_nodes as f64;
    let raw = if accelerated {
        (2.0 * n / params.epsilon).ln() / (2.0 * (1.0 / lam).ln()).sqrt()
    } else {
        (n / params.epsilon).ln() / (1.0 / lam).ln()
    };
    (raw.ceil() as usize).max(1)
}

/// Per-node state of the accelerated iteration: the current and previous
/// iterates plus the matching Chebyshev weights and the step counter.
#[derive(Debug, Clone)]
pub struct MixerState {
    y_curr: Vec<f64>,
    y_prev: Vec<f64>,
    w_curr: f64,
    w_prev: f64,
    r: usize,
}

impl MixerState {
    /// Starts a fresh chain at step 0 from the node's initial vector.
    pub fn new(y0: Vec<f64>) -> Self {
        let len = y0.len();
        MixerState { y_curr: y0, y_prev: vec![0.0; len], w_curr: 1.0, w_prev: 0.0, r: 0 }
    }

    /// The node's current iterate (what it transmits this round).
    pub fn iterate(&self) -> &[f64] {
        &self.y_curr
    }

    pub fn round(&self) -> usize {
        self.r
    }

    pub fn weight(&self) -> f64 {
        self.w_curr
    }
}

fn check_alignment(
    row: &SparseRow,
    neighbor_values: &[&[f64]],
    dim: usize,
) -> Result<(), MixError> {
    if neighbor_values.len() != row.neighbors.len() {
        return Err(MixError::MissingNeighborValue {
            expected: row.neighbors.len(),
            got: neighbor_values.len(),
        });
    }
    for v in neighbor_values {
        if v.len() != dim {
            return Err(MixError::DimensionMismatch { expected: dim, got: v.len() });
        }
    }
    Ok(())
}

/// Advances one node of the accelerated iteration by one step.
///
/// `neighbor_values` must align with `row.neighbors` and hold the neighbors'
/// current full-scale iterates for the same step `r` as `state`; the r = 0
/// halving is applied internally and uniformly to the local and received
/// values, so callers always exchange the stored iterates.
pub fn mix_step(
    state: &mut MixerState,
    row: &SparseRow,
    neighbor_values: &[&[f64]],
    params: &MixParams,
) -> Result<(), MixError> {
    let dim = state.y_curr.len();
    check_alignment(row, neighbor_values, dim)?;
    let lam = params.lambda2_abs;

    let mut product = vec![0.0; dim];
    for (k, p) in product.iter_mut().enumerate() {
        let mut acc = row.self_weight * state.y_curr[k];
        for (&(_, w), v) in row.neighbors.iter().zip(neighbor_values) {
            acc += w * v[k];
        }
        *p = acc;
    }

    if lam <= LAMBDA2_ZERO_TOL {
        // One plain product is already the exact average.
        state.y_prev = std::mem::replace(&mut state.y_curr, product);
        state.w_prev = state.w_curr;
        state.r += 1;
        return Ok(());
    }

    let first = state.r == 0;
    // Halved w_0 drives the weight recursion (T_1 = 2x*(1/2) - 0).
    let w_for_recursion = if first { state.w_curr * 0.5 } else { state.w_curr };
    let w_next = 2.0 * w_for_recursion / lam - state.w_prev;
    // One net halving of the w_r * y_r product; the update coefficient uses
    // the restored full-scale w_0.
    let transmit_scale = if first { 0.5 } else { 1.0 };
    let coeff_curr = state.w_curr / w_next;
    let coeff_prev = state.w_prev / w_next;
    let mut y_next = vec![0.0; dim];
    for (k, y) in y_next.iter_mut().enumerate() {
        let y_hat = 2.0 * (product[k] * transmit_scale) / lam;
        *y = coeff_curr * y_hat - coeff_prev * state.y_prev[k];
    }

    state.y_prev = std::mem::replace(&mut state.y_curr, y_next);
    state.w_prev = state.w_curr;
    state.w_curr = w_next;
    state.r += 1;
    Ok(())
}

/// One step of plain gossip for one node: the weighted average of its own
/// and its neighbors' values (self-weight included).
pub fn unaccel_mix_step(
    own: &[f64],
    row: &SparseRow,
    neighbor_values: &[&[f64]],
) -> Result<Vec<f64>, MixError> {
    check_alignment(row, neighbor_values, own.len())?;
    let mut out = vec![0.0; own.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = row.self_weight * own[k];
        for (&(_, w), v) in row.neighbors.iter().zip(neighbor_values) {
            acc += w * v[k];
        }
        *o = acc;
    }
    Ok(out)
}

/// Full-matrix reference for both iterations: returns the network-wide
/// vector after `steps` rounds starting from `v` (one entry per node).
///
/// Plain mode computes `P^steps v`; accelerated mode runs the three-term
/// weight recursion on the whole vector. This path shares no code with
/// [`mix_step`], so the two can be checked against each other. The matrix
/// must carry spectral info (be symmetric).
pub fn dense_mix_oracle(
    matrix: &GossipMatrix,
    v: &[f64],
    steps: usize,
    accelerated: bool,
) -> Vec<f64> {
    let n = matrix.node_count();
    assert_eq!(v.len(), n, "vector length must match node count");
    let lam = matrix
        .lambda2_abs()
        .expect("dense_mix_oracle requires a symmetric matrix with spectral info");
    let p = matrix.entries();
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| p[(i, j)] * x[j]).sum())
            .collect()
    };
    if steps == 0 {
        return v.to_vec();
    }
    if !accelerated || lam == 0.0 {
        let mut y = v.to_vec();
        for _ in 0..steps {
            y = apply(&y);
        }
        return y;
    }
    // y_1 = P y_0, w_0 = 1, w_1 = 1/lam.
    let mut y_prev = v.to_vec();
    let mut y_curr = apply(v);
    let mut w_prev = 1.0;
    let mut w_curr = 1.0 / lam;
    for _ in 1..steps {
        let w_next = 2.0 * w_curr / lam - w_prev;
        let py = apply(&y_curr);
        let y_next: Vec<f64> = (0..n)
            .map(|i| (2.0 * w_curr / (lam * w_next)) * py[i] - (w_prev / w_next) * y_prev[i])
            .collect();
        y_prev = y_curr;
        y_curr = y_next;
        w_prev = w_curr;
        w_curr = w_next;
    }
    y_curr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_gossip_matrix, Topology};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Runs the distributed iteration on scalar per-node values and returns
    /// the assembled network vector after each of `steps` rounds.
    fn distributed_trajectory(
        matrix: &GossipMatrix,
        v: &[f64],
        steps: usize,
        params: &MixParams,
        accelerated: bool,
    ) -> Vec<Vec<f64>> {
        let mut states: Vec<MixerState> =
            v.iter().map(|&x| MixerState::new(vec![x])).collect();
        let mut plain: Vec<Vec<f64>> = v.iter().map(|&x| vec![x]).collect();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            if accelerated {
                let snapshot: Vec<Vec<f64>> =
                    states.iter().map(|s| s.iterate().to_vec()).collect();
                for (i, state) in states.iter_mut().enumerate() {
                    let row = matrix.row(i);
                    let incoming: Vec<&[f64]> =
                        row.neighbors.iter().map(|&(j, _)| snapshot[j].as_slice()).collect();
                    mix_step(state, row, &incoming, params).unwrap();
                }
                out.push(states.iter().map(|s| s.iterate()[0]).collect());
            } else {
                let snapshot = plain.clone();
                for (i, value) in plain.iter_mut().enumerate() {
                    let row = matrix.row(i);
                    let incoming: Vec<&[f64]> =
                        row.neighbors.iter().map(|&(j, _)| snapshot[j].as_slice()).collect();
                    *value = unaccel_mix_step(value, row, &incoming).unwrap();
                }
                out.push(plain.iter().map(|x| x[0]).collect());
            }
        }
        out
    }

    fn random_connected_topology(rng: &mut ChaCha8Rng, max_nodes: usize) -> Topology {
        let n = rng.gen_range(2..=max_nodes);
        let mut edges = Vec::new();
        for i in 1..n {
            edges.push((rng.gen_range(0..i), i));
        }
        for _ in 0..rng.gen_range(0..=n) {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        Topology::custom(n, &edges).unwrap()
    }

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| -(rng.gen::<f64>().ln())).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    }

    #[test]
    fn delay_matches_closed_form_cycle_100() {
        // |lambda2| = cos(2*pi/100) for the half-weight cycle matrix; the raw
        // quotients are 133.48 and 3896.38, far from integer boundaries.
        let lam = (2.0 * PI / 100.0).cos();
        let params = MixParams::new(lam, 100, 1.0 / 22.0).unwrap();
        assert_eq!(compute_delay(&params, true), 134);
        assert_eq!(compute_delay(&params, false), 3897);
    }

    #[test]
    fn delay_zero_lambda_is_one_step() {
        let params = MixParams::new(0.0, 50, 1.0 / 22.0).unwrap();
        assert_eq!(compute_delay(&params, true), 1);
        assert_eq!(compute_delay(&params, false), 1);
    }

    #[test]
    fn delay_clamps_to_one() {
        let params = MixParams::new(0.01, 2, 3.0).unwrap();
        assert_eq!(compute_delay(&params, true), 1);
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(MixParams::new(1.0, 10, 0.1).is_err());
        assert!(MixParams::new(-0.1, 10, 0.1).is_err());
        assert!(MixParams::new(0.5, 0, 0.1).is_err());
        assert!(MixParams::new(0.5, 10, 0.0).is_err());
    }

    #[test]
    fn weight_sequence_is_chebyshev() {
        // lambda = 0.5 gives 1/lambda = 2 and T_r(2) = 1, 2, 7, 26, 97.
        let t = Topology::cycle(5).unwrap();
        let m = build_gossip_matrix(&t);
        let params = MixParams::new(0.5, 5, 0.1).unwrap();
        let mut state = MixerState::new(vec![1.0, 0.0]);
        let zeros = vec![vec![0.0, 0.0]; 2];
        for expect in [2.0, 7.0, 26.0, 97.0] {
            let incoming: Vec<&[f64]> = zeros.iter().map(|v| v.as_slice()).collect();
            mix_step(&mut state, m.row(0), &incoming, &params).unwrap();
            assert_abs_diff_eq!(state.weight(), expect, epsilon = 1e-12);
        }
        assert_eq!(state.round(), 4);
    }

    #[test]
    fn first_step_equals_plain_product() {
        let t = Topology::cycle(7).unwrap();
        let m = build_gossip_matrix(&t);
        let lam = m.lambda2_abs().unwrap();
        let params = MixParams::new(lam, 7, 1.0 / 22.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = distributed_trajectory(&m, &v, 1, &params, true);
        let expect = dense_mix_oracle(&m, &v, 1, false); // P v
        for (g, e) in got[0].iter().zip(&expect) {
            assert_abs_diff_eq!(*g, *e, epsilon = 1e-14);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let t = Topology::grid(16).unwrap();
        let m = build_gossip_matrix(&t);
        let lam = m.lambda2_abs().unwrap();
        let params = MixParams::new(lam, 16, 1.0 / 22.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mass0: f64 = v.iter().sum();
        let norm1: f64 = v.iter().map(|x| x.abs()).sum();
        let traj = distributed_trajectory(&m, &v, 40, &params, true);
        for step in &traj {
            let mass: f64 = step.iter().sum();
            assert!((mass - mass0).abs() <= 1e-9 * norm1.max(1.0));
        }
    }

    #[test]
    fn all_ones_is_fixed_point() {
        let t = Topology::cycle(9).unwrap();
        let m = build_gossip_matrix(&t);
        let lam = m.lambda2_abs().unwrap();
        let params = MixParams::new(lam, 9, 1.0 / 22.0).unwrap();
        let v = vec![1.0; 9];
        let c = compute_delay(&params, true);
        let traj = distributed_trajectory(&m, &v, c, &params, true);
        for x in &traj[c - 1] {
            assert_abs_diff_eq!(*x, 1.0, epsilon = 1e-12);
        }
        let oracle = dense_mix_oracle(&m, &v, c, true);
        for x in &oracle {
            assert_abs_diff_eq!(*x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn accelerated_meets_target_on_cycle_100() {
        let t = Topology::cycle(100).unwrap();
        let m = build_gossip_matrix(&t);
        let lam = m.lambda2_abs().unwrap();
        let eps = 1.0 / 22.0;
        let params = MixParams::new(lam, 100, eps).unwrap();
        let c = compute_delay(&params, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v = random_simplex(&mut rng, 100);
            let out = dense_mix_oracle(&m, &v, c, true);
            let err: f64 = out
                .iter()
                .map(|x| (x - 1.0 / 100.0).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= eps / 100.0, "mixing error {err} exceeds eps/n");
        }
    }

    #[test]
    fn plain_contraction_obeys_spectral_bound() {
        let t = Topology::cycle(5).unwrap();
        let m = build_gossip_matrix(&t);
        let lam = m.lambda2_abs().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_simplex(&mut rng, 5);
        let mut y = v.clone();
        for s in 1..=50 {
            y = dense_mix_oracle(&m, &y, 1, false);
            let err: f64 = y.iter().map(|x| (x - 0.2).powi(2)).sum::<f64>().sqrt();
            assert!(
                err <= lam.powi(s) + 1e-12,
                "step {s}: error {err} above |lambda2|^s = {}",
                lam.powi(s)
            );
        }
    }

    #[test]
    fn distributed_matches_oracle_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(20240817);
        for _ in 0..20 {
            let topo = random_connected_topology(&mut rng, 50);
            let n = topo.node_count();
            let m = build_gossip_matrix(&topo);
            let lam = m.lambda2_abs().unwrap();
            let params = MixParams::new(lam, n, 1.0 / 22.0).unwrap();
            let steps = compute_delay(&params, true).min(60);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for accelerated in [true, false] {
                let traj = distributed_trajectory(&m, &v, steps, &params, accelerated);
                for (s, got) in traj.iter().enumerate() {
                    let expect = dense_mix_oracle(&m, &v, s + 1, accelerated);
                    for (g, e) in got.iter().zip(&expect) {
                        assert!(
                            (g - e).abs() <= 1e-9,
                            "divergence at step {} (accelerated={accelerated})",
                            s + 1
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn complete_graph_one_step_is_exact_average() {
        let t = Topology::complete(8).unwrap();
        let m = build_gossip_matrix(&t);
        assert_eq!(m.lambda2_abs(), Some(0.0));
        let params = MixParams::new(0.0, 8, 0.1).unwrap();
        let v: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let avg = v.iter().sum::<f64>() / 8.0;
        let traj = distributed_trajectory(&m, &v, 1, &params, true);
        for x in &traj[0] {
            assert_abs_diff_eq!(*x, avg, epsilon = 1e-12);
        }
        let oracle = dense_mix_oracle(&m, &v, 1, true);
        for x in &oracle {
            assert_abs_diff_eq!(*x, avg, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_steps_returns_input() {
        let t = Topology::cycle(4).unwrap();
        let m = build_gossip_matrix(&t);
        let v = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(dense_mix_oracle(&m, &v, 0, true), v);
        assert_eq!(dense_mix_oracle(&m, &v, 0, false), v);
    }

    #[test]
    fn misaligned_neighbors_error() {
        let t = Topology::cycle(5).unwrap();
        let m = build_gossip_matrix(&t);
        let params = MixParams::new(m.lambda2_abs().unwrap(), 5, 0.1).unwrap();
        let mut state = MixerState::new(vec![1.0]);
        let one = [1.0];
        let incoming: Vec<&[f64]> = vec![&one]; // row has two neighbors
        assert!(matches!(
            mix_step(&mut state, m.row(0), &incoming, &params),
            Err(MixError::MissingNeighborValue { expected: 2, got: 1 })
        ));
        let own = [1.0];
        assert!(unaccel_mix_step(&own, m.row(0), &incoming).is_err());
    }
}
