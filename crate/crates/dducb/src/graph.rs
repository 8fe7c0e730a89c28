//! Network topologies and gossip matrix construction.
//!
//! A [`Topology`] is an undirected, connected, self-loop-free graph over
//! `0..n` nodes. A [`GossipMatrix`] is a symmetric doubly stochastic matrix
//! whose off-diagonal sparsity pattern respects the topology's edges; its
//! second-largest eigenvalue magnitude `|lambda2|` controls how fast repeated
//! multiplication drives any vector toward the uniform average.
//!
//! Two constructions are provided. [`build_gossip_matrix`] uses the
//! normalized-Laplacian recipe: with `L = I - D^{-1/2} A D^{-1/2}`, a
//! `delta`-regular graph gets `P = I - (delta/(delta+1)) L` and a non-regular
//! graph gets `P = I - (1/(delta_max+1)) D^{1/2} L D^{1/2}`. Both are doubly
//! stochastic with nonnegative entries and positive diagonal.
//! [`GossipMatrix::cycle_neighbor_averaging`] is the classical zero-diagonal
//! cycle matrix with weight 1/2 on each neighbor, whose eigenvalues are
//! `cos(2*pi*j/n)`; it is used as a closed-form spectral reference.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Default absolute tolerance for row/column stochasticity checks.
///
/// The shipped constructions are exact up to a handful of rounding steps, so
/// sums sit within a few ulps of 1; 1e-12 leaves two orders of headroom.
pub const STOCHASTICITY_TOL: f64 = 1e-12;

/// Default absolute tolerance for spectral checks (`lambda1 = 1`,
/// `|lambda2| < 1`). Dense symmetric eigensolves on the matrix sizes used
/// here are accurate to ~1e-13; 1e-9 absorbs that comfortably.
pub const SPECTRUM_TOL: f64 = 1e-9;

/// Below this magnitude `|lambda2|` is treated as exactly zero (one gossip
/// step already produces the exact average). Eigensolver output for the
/// complete graph lands at ~1e-16 rather than 0.
pub const LAMBDA2_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("grid topology requires a perfect-square node count, got {nodes}")]
    NonSquareGrid { nodes: usize },
    #[error("custom graph is not connected")]
    DisconnectedCustomGraph,
    #[error("self-loop on node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("edge endpoint {node} is out of range for {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("topology must have at least {need} nodes, got {got}")]
    TooFewNodes { need: usize, got: usize },
    #[error("edge list line {line} is malformed: {reason}")]
    EdgeListParse { line: usize, reason: String },
    #[error("matrix is not symmetric; spectral summary is only defined for symmetric matrices")]
    NonSymmetricMatrix,
    #[error("failed to read edge list: {0}")]
    Io(#[from] std::io::Error),
}

/// The shape family of a topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Cycle,
    Grid,
    Complete,
    Custom,
}

/// Construction parameters for [`build_topology`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySpec {
    Cycle { nodes: usize },
    Grid { nodes: usize },
    Complete { nodes: usize },
    Custom { nodes: usize, edges: Vec<(usize, usize)> },
}

impl TopologySpec {
    pub fn nodes(&self) -> usize {
        match self {
            TopologySpec::Cycle { nodes }
            | TopologySpec::Grid { nodes }
            | TopologySpec::Complete { nodes }
            | TopologySpec::Custom { nodes, .. } => *nodes,
        }
    }
}

/// An undirected connected graph over nodes `0..n`, stored as a normalized
/// edge list (`u < v`, sorted, deduplicated) plus per-node sorted adjacency.
#[derive(Debug, Clone)]
pub struct Topology {
    kind: TopologyKind,
    nodes: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Ring over `0..n`: node `i` is adjacent to `i +- 1 (mod n)`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        require_nodes(n, 1)?;
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j {
                edges.push((i.min(j), i.max(j)));
            }
        }
        Self::assemble(TopologyKind::Cycle, n, edges)
    }

    /// Square lattice with 4-neighbor adjacency; `n` must be a perfect square.
    pub fn grid(n: usize) -> Result<Self, GraphError> {
        require_nodes(n, 1)?;
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n {
            return Err(GraphError::NonSquareGrid { nodes: n });
        }
        let id = |r: usize, c: usize| r * side + c;
        let mut edges = Vec::new();
        for r in 0..side {
            for c in 0..side {
                if c + 1 < side {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < side {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Self::assemble(TopologyKind::Grid, n, edges)
    }

    /// Complete graph: every pair of distinct nodes is adjacent.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        require_nodes(n, 1)?;
        let mut edges = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v));
            }
        }
        Self::assemble(TopologyKind::Complete, n, edges)
    }

    /// Explicit edge list over `0..n` nodes. Edges are deduplicated and
    /// normalized; self-loops, out-of-range endpoints, and disconnected
    /// graphs are rejected.
    pub fn custom(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        require_nodes(n, 1)?;
        let mut normalized = BTreeSet::new();
        for &(u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            for e in [u, v] {
                if e >= n {
                    return Err(GraphError::NodeOutOfRange { node: e, nodes: n });
                }
            }
            normalized.insert((u.min(v), u.max(v)));
        }
        Self::assemble(TopologyKind::Custom, n, normalized.into_iter().collect())
    }

    /// Parses a custom topology from edge-list text: one `u v` pair of
    /// 0-indexed nodes per line, blank lines and `#` comments ignored.
    /// The node count is inferred as `max endpoint + 1`.
    pub fn from_edge_list_str(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut max_node = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>, idx: usize| -> Result<usize, GraphError> {
                tok.ok_or_else(|| GraphError::EdgeListParse {
                    line: idx + 1,
                    reason: "expected two node indices".into(),
                })?
                .parse::<usize>()
                .map_err(|e| GraphError::EdgeListParse {
                    line: idx + 1,
                    reason: e.to_string(),
                })
            };
            let u = parse(parts.next(), idx)?;
            let v = parse(parts.next(), idx)?;
            if parts.next().is_some() {
                return Err(GraphError::EdgeListParse {
                    line: idx + 1,
                    reason: "expected exactly two node indices".into(),
                });
            }
            max_node = max_node.max(u).max(v);
            edges.push((u, v));
        }
        if edges.is_empty() {
            return Err(GraphError::TooFewNodes { need: 1, got: 0 });
        }
        Self::custom(max_node + 1, &edges)
    }

    /// Reads an edge-list file (see [`Topology::from_edge_list_str`]).
    pub fn from_edge_list_file(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_edge_list_str(&text)
    }

    fn assemble(
        kind: TopologyKind,
        nodes: usize,
        mut edges: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        edges.sort_unstable();
        edges.dedup();
        let mut neighbors = vec![Vec::new(); nodes];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let topo = Topology { kind, nodes, edges, neighbors };
        if !topo.is_connected() {
            return Err(GraphError::DisconnectedCustomGraph);
        }
        Ok(topo)
    }

    fn is_connected(&self) -> bool {
        if self.nodes == 0 {
            return false;
        }
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.nodes
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Normalized `(u, v)` pairs with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor ids of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_regular(&self) -> bool {
        let d0 = self.degree(0);
        (0..self.nodes).all(|i| self.degree(i) == d0)
    }

    pub fn are_neighbors(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }
}

fn require_nodes(n: usize, need: usize) -> Result<(), GraphError> {
    if n < need {
        Err(GraphError::TooFewNodes { need, got: n })
    } else {
        Ok(())
    }
}

/// Builds the [`Topology`] described by `spec`.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology, GraphError> {
    match spec {
        TopologySpec::Cycle { nodes } => Topology::cycle(*nodes),
        TopologySpec::Grid { nodes } => Topology::grid(*nodes),
        TopologySpec::Complete { nodes } => Topology::complete(*nodes),
        TopologySpec::Custom { nodes, edges } => Topology::custom(*nodes, edges),
    }
}

/// One row of a gossip matrix in sparse form: the diagonal weight plus
/// `(neighbor, weight)` pairs for every nonzero off-diagonal entry.
#[derive(Debug, Clone)]
pub struct SparseRow {
    pub self_weight: f64,
    pub neighbors: Vec<(usize, f64)>,
}

/// Spectral facts about a symmetric gossip matrix.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// Magnitude of the second-largest-in-magnitude eigenvalue; 0 for a
    /// single-node network, which has no second eigenvalue.
    pub lambda2_abs: f64,
    /// `1 - lambda2_abs`.
    pub spectral_gap: f64,
    /// All eigenvalues, sorted by magnitude, descending.
    pub full_spectrum: Vec<f64>,
}

/// A gossip weight matrix together with its cached spectrum.
///
/// The shipped constructors always produce symmetric matrices and compute the
/// spectrum eagerly. [`GossipMatrix::from_dense`] accepts arbitrary square
/// matrices; if the input is not symmetric (to 1e-12) the spectrum is left
/// unset and [`spectral_summary`] reports an error.
#[derive(Debug, Clone)]
pub struct GossipMatrix {
    entries: DMatrix<f64>,
    rows: Vec<SparseRow>,
    /// Adjacency the off-diagonal pattern is expected to respect.
    pattern: Vec<Vec<usize>>,
    symmetric: bool,
    /// Eigenvalues sorted by magnitude, descending; `None` if not symmetric.
    spectrum: Option<Vec<f64>>,
}

impl GossipMatrix {
    /// Wraps an arbitrary square matrix. The sparsity pattern is taken from
    /// the nonzero off-diagonal entries themselves; symmetry is detected and
    /// the spectrum computed only in the symmetric case.
    pub fn from_dense(entries: DMatrix<f64>) -> Self {
        let n = entries.nrows();
        assert_eq!(n, entries.ncols(), "gossip matrix must be square");
        let mut pattern = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && entries[(i, j)] != 0.0 {
                    pattern[i].push(j);
                }
            }
        }
        Self::with_pattern(entries, pattern)
    }

    fn with_pattern(entries: DMatrix<f64>, pattern: Vec<Vec<usize>>) -> Self {
        let n = entries.nrows();
        let symmetric = (0..n).all(|i| {
            (i + 1..n).all(|j| (entries[(i, j)] - entries[(j, i)]).abs() <= STOCHASTICITY_TOL)
        });
        let spectrum = symmetric.then(|| {
            let mut eig: Vec<f64> = SymmetricEigen::new(entries.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eig.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite eigenvalues"));
            eig
        });
        let rows = (0..n)
            .map(|i| SparseRow {
                self_weight: entries[(i, i)],
                neighbors: (0..n)
                    .filter(|&j| j != i && entries[(i, j)] != 0.0)
                    .map(|j| (j, entries[(i, j)]))
                    .collect(),
            })
            .collect();
        GossipMatrix { entries, rows, pattern, symmetric, spectrum }
    }

    /// Classical cycle averaging matrix: zero diagonal, weight 1/2 on each of
    /// the two ring neighbors. Its eigenvalues are `cos(2*pi*j/n)`; for even
    /// `n` that includes -1, so the matrix is only a valid gossip matrix on
    /// odd cycles.
    pub fn cycle_neighbor_averaging(n: usize) -> Result<Self, GraphError> {
        require_nodes(n, 3)?;
        let topo = Topology::cycle(n)?;
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if topo.are_neighbors(i, j) {
                0.5
            } else {
                0.0
            }
        });
        Ok(Self::with_pattern(
            entries,
            (0..n).map(|i| topo.neighbors(i).to_vec()).collect(),
        ))
    }

    pub fn node_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn sparse_rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Eigenvalues sorted by magnitude, descending; `None` if the matrix is
    /// not symmetric.
    pub fn spectrum(&self) -> Option<&[f64]> {
        self.spectrum.as_deref()
    }

    /// `|lambda2|` with sub-tolerance values clamped to exactly 0; `None` if
    /// the spectrum is unavailable.
    pub fn lambda2_abs(&self) -> Option<f64> {
        let spec = self.spectrum.as_ref()?;
        if spec.len() < 2 {
            return Some(0.0);
        }
        let raw = spec[1].abs();
        Some(if raw <= LAMBDA2_ZERO_TOL { 0.0 } else { raw })
    }
}

/// Builds the Laplacian-based gossip matrix for `topology`.
///
/// With `L = I - D^{-1/2} A D^{-1/2}`: regular graphs of degree `delta` use
/// `P = I - (delta/(delta+1)) L`, non-regular graphs use
/// `P = I - (1/(delta_max+1)) D^{1/2} L D^{1/2}`. The result is symmetrized
/// to scrub last-ulp asymmetry from the floating-point matrix products.
pub fn build_gossip_matrix(topology: &Topology) -> GossipMatrix {
    let n = topology.node_count();
    let pattern: Vec<Vec<usize>> = (0..n).map(|i| topology.neighbors(i).to_vec()).collect();
    if n == 1 {
        return GossipMatrix::with_pattern(DMatrix::from_element(1, 1, 1.0), pattern);
    }
    let adjacency = DMatrix::from_fn(n, n, |i, j| {
        if topology.are_neighbors(i, j) {
            1.0
        } else {
            0.0
        }
    });
    let degrees: Vec<f64> = (0..n).map(|i| topology.degree(i) as f64).collect();
    let d_inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        degrees.iter().map(|d| 1.0 / d.sqrt()),
    ));
    let laplacian = DMatrix::identity(n, n) - &d_inv_sqrt * &adjacency * &d_inv_sqrt;
    let mut p = if topology.is_regular() {
        let delta = topology.degree(0) as f64;
        DMatrix::identity(n, n) - laplacian * (delta / (delta + 1.0))
    } else {
        let d_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            degrees.iter().map(|d| d.sqrt()),
        ));
        let delta_max = topology.max_degree() as f64;
        DMatrix::identity(n, n) - (&d_sqrt * laplacian * &d_sqrt) / (delta_max + 1.0)
    };
    p = (&p + p.transpose()) * 0.5;
    // Entries that should be structural zeros pick up nothing from the
    // products above, but make the pattern exact regardless.
    for i in 0..n {
        for j in 0..n {
            if i != j && !topology.are_neighbors(i, j) {
                p[(i, j)] = 0.0;
            }
        }
    }
    GossipMatrix::with_pattern(p, pattern)
}

/// Returns `|lambda2|`, the spectral gap, and the full magnitude-sorted
/// spectrum. Errors if the matrix is not symmetric.
pub fn spectral_summary(matrix: &GossipMatrix) -> Result<SpectralInfo, GraphError> {
    let spectrum = matrix
        .spectrum()
        .ok_or(GraphError::NonSymmetricMatrix)?
        .to_vec();
    let lambda2_abs = matrix.lambda2_abs().expect("spectrum present");
    Ok(SpectralInfo {
        lambda2_abs,
        spectral_gap: 1.0 - lambda2_abs,
        full_spectrum: spectrum,
    })
}

/// Tolerances for [`validate_gossip`].
#[derive(Debug, Clone, Copy)]
pub struct ValidationTolerances {
    /// Absolute tolerance on row/column sums and structural zeros.
    pub stochasticity: f64,
    /// Absolute tolerance on `lambda1 = 1` and margin required for
    /// `|lambda2| < 1`.
    pub spectrum: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        ValidationTolerances { stochasticity: STOCHASTICITY_TOL, spectrum: SPECTRUM_TOL }
    }
}

/// Outcome of one validation check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail report for every gossip matrix invariant.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks sparsity, row/column stochasticity, spectrum realness (symmetry),
/// `lambda1 = 1`, and `|lambda2| < 1`, each reported individually.
pub fn validate_gossip(matrix: &GossipMatrix, tol: &ValidationTolerances) -> ValidationReport {
    let n = matrix.node_count();
    let entries = matrix.entries();
    let mut checks = Vec::new();

    let mut worst_structural = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j && !matrix.pattern[i].contains(&j) {
                worst_structural = worst_structural.max(entries[(i, j)].abs());
            }
        }
    }
    checks.push(Check {
        name: "sparsity",
        passed: worst_structural <= tol.stochasticity,
        detail: format!("max magnitude outside edge pattern = {worst_structural:.3e}"),
    });

    let mut worst_row = 0.0f64;
    let mut worst_col = 0.0f64;
    for i in 0..n {
        let row_sum: f64 = (0..n).map(|j| entries[(i, j)]).sum();
        let col_sum: f64 = (0..n).map(|j| entries[(j, i)]).sum();
        worst_row = worst_row.max((row_sum - 1.0).abs());
        worst_col = worst_col.max((col_sum - 1.0).abs());
    }
    checks.push(Check {
        name: "row_sums",
        passed: worst_row <= tol.stochasticity,
        detail: format!("max |row sum - 1| = {worst_row:.3e}"),
    });
    checks.push(Check {
        name: "col_sums",
        passed: worst_col <= tol.stochasticity,
        detail: format!("max |col sum - 1| = {worst_col:.3e}"),
    });

    match matrix.spectrum() {
        Some(spec) => {
            checks.push(Check {
                name: "real_spectrum",
                passed: true,
                detail: "matrix symmetric; spectrum real".into(),
            });
            let lambda1 = spec[0];
            checks.push(Check {
                name: "lambda1",
                passed: (lambda1 - 1.0).abs() <= tol.spectrum,
                detail: format!("lambda1 = {lambda1:.12}"),
            });
            let lambda2_abs = matrix.lambda2_abs().expect("spectrum present");
            checks.push(Check {
                name: "lambda2_lt_1",
                passed: lambda2_abs < 1.0 - tol.spectrum,
                detail: format!("|lambda2| = {lambda2_abs:.12}"),
            });
        }
        None => {
            checks.push(Check {
                name: "real_spectrum",
                passed: false,
                detail: "matrix not symmetric; spectrum not computed".into(),
            });
            checks.push(Check {
                name: "lambda1",
                passed: false,
                detail: "spectrum unavailable".into(),
            });
            checks.push(Check {
                name: "lambda2_lt_1",
                passed: false,
                detail: "spectrum unavailable".into(),
            });
        }
    }

    ValidationReport { checks }
}
