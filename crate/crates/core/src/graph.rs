//! Immutable undirected simple graph plus the dense-matrix kernels used by
//! every numeric path in the crate.
//!
//! The graph is stored in compressed sparse row form with sorted,
//! deduplicated neighbor lists. Dense matrices are row-major f64 and are
//! only ever materialized at subgraph scale; the full input graph never
//! becomes dense.
//!
//! All reductions here (matrix products, traces, row sums) accumulate in
//! ascending index order from a zero accumulator. That fixed order is a
//! contract relied on elsewhere: it makes feature extraction bitwise
//! invariant to swapping the two focal endpoints of a candidate link.

use std::collections::VecDeque;
use thiserror::Error;

/// Sentinel hop distance for nodes unreachable from every BFS source.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node id {node} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("self-loop at node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("bfs requires at least one source node")]
    EmptySources,
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("negative edge weight {weight} on pair ({u}, {v})")]
    NegativeWeight { u: usize, v: usize, weight: f64 },
    #[error("missing edge weight for adjacent pair ({u}, {v})")]
    MissingWeight { u: usize, v: usize },
}

/// Immutable undirected simple graph in CSR form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    adj: Vec<usize>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from undirected edges. Duplicate edges and orientation
    /// flips collapse to one edge; self-loops and out-of-range ids are
    /// rejected.
    pub fn build(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes {
                return Err(GraphError::NodeOutOfRange { node: u, num_nodes });
            }
            if v >= num_nodes {
                return Err(GraphError::NodeOutOfRange { node: v, num_nodes });
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut adj = Vec::new();
        offsets.push(0);
        let mut half_edges = 0usize;
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
            half_edges += list.len();
            adj.extend_from_slice(list);
            offsets.push(adj.len());
        }
        Ok(Graph {
            num_nodes,
            offsets,
            adj,
            edge_count: half_edges / 2,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// All undirected edges as (u, v) with u < v, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for u in 0..self.num_nodes {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    fn check_node(&self, v: usize) -> Result<(), GraphError> {
        if v >= self.num_nodes {
            return Err(GraphError::NodeOutOfRange {
                node: v,
                num_nodes: self.num_nodes,
            });
        }
        Ok(())
    }
}

/// Multi-source BFS hop distances; unreachable nodes get [`UNREACHABLE`].
pub fn bfs_distances(g: &Graph, sources: &[usize]) -> Result<Vec<usize>, GraphError> {
    if sources.is_empty() {
        return Err(GraphError::EmptySources);
    }
    let mut dist = vec![UNREACHABLE; g.num_nodes()];
    let mut queue = VecDeque::new();
    for &s in sources {
        g.check_node(s)?;
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in g.neighbors(u) {
            if dist[v] == UNREACHABLE {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    Ok(dist)
}

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> DenseMatrix {
        assert_eq!(rows * cols, data.len(), "entry count must match shape");
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Matrix product with a pinned summation order: each output entry
    /// accumulates a[i][k] * b[k][j] for k ascending, starting from zero.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        matmul_into(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.cols,
            &mut out.data,
        );
        out
    }

    /// Trace accumulated over the diagonal in ascending index order.
    pub fn trace(&self) -> f64 {
        assert!(self.is_square(), "trace requires a square matrix");
        let mut t = 0.0;
        for i in 0..self.rows {
            t += self.data[i * self.cols + i];
        }
        t
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }
}

/// Shared kernel: c (r x n) += a (r x m) * b (m x n), k ascending per entry.
/// `c` must be zeroed (or hold a partial sum) on entry.
pub(crate) fn matmul_into(a: &[f64], r: usize, m: usize, b: &[f64], n: usize, c: &mut [f64]) {
    // k outermost keeps each c[i, j] accumulating in ascending k while
    // streaming b once; c stays cache-resident for the shapes used here.
    for k in 0..m {
        let b_row = &b[k * n..(k + 1) * n];
        for i in 0..r {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                c_row[j] += aik * b_row[j];
            }
        }
    }
}

/// Number of length-`tau` walks between every node pair, as A^tau.
/// `tau` = 0 gives the identity by convention.
pub fn path_count_matrix(g: &Graph, tau: usize) -> DenseMatrix {
    let n = g.num_nodes();
    let a = adjacency_matrix(g);
    let mut out = DenseMatrix::identity(n);
    for _ in 0..tau {
        out = out.matmul(&a);
    }
    out
}

/// Dense 0/1 adjacency matrix of a (subgraph-sized) graph.
pub fn adjacency_matrix(g: &Graph) -> DenseMatrix {
    let n = g.num_nodes();
    let mut a = DenseMatrix::zeros(n, n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            a.set(u, v, 1.0);
        }
    }
    a
}

/// Edge weights for [`transition_matrix`]: uniform, or an explicit map over
/// ordered adjacent pairs.
pub enum EdgeWeights<'a> {
    Uniform,
    Map(&'a std::collections::HashMap<(usize, usize), f64>),
}

/// Row-stochastic transition matrix: row v is the (weighted) distribution
/// over neighbors(v). Isolated nodes get an all-zero row; a row whose
/// weights sum to zero also stays zero.
pub fn transition_matrix(g: &Graph, weights: EdgeWeights) -> Result<DenseMatrix, GraphError> {
    let n = g.num_nodes();
    let mut p = DenseMatrix::zeros(n, n);
    for u in 0..n {
        let nbrs = g.neighbors(u);
        if nbrs.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(nbrs.len());
        for &v in nbrs {
            let w = match weights {
                EdgeWeights::Uniform => 1.0,
                EdgeWeights::Map(m) => *m
                    .get(&(u, v))
                    .ok_or(GraphError::MissingWeight { u, v })?,
            };
            if w < 0.0 {
                return Err(GraphError::NegativeWeight { u, v, weight: w });
            }
            row.push(w);
        }
        let mut total = 0.0;
        for &w in &row {
            total += w;
        }
        if total == 0.0 {
            continue;
        }
        for (idx, &v) in nbrs.iter().enumerate() {
            p.set(u, v, row[idx] / total);
        }
    }
    Ok(p)
}

/// Mean local clustering coefficient; nodes of degree below two count 0,
/// the empty graph maps to 0.
pub fn average_clustering(g: &Graph) -> f64 {
    let n = g.num_nodes();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for v in 0..n {
        let nbrs = g.neighbors(v);
        let d = nbrs.len();
        if d < 2 {
            continue;
        }
        let mut links = 0usize;
        for (idx, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[idx + 1..] {
                if g.has_edge(a, b) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (d as f64 * (d - 1) as f64);
    }
    total / n as f64
}

/// Repeated right-multiplication power: m^tau with m^0 = I, m^1 = m,
/// and m^t = m^(t-1) * m.
pub fn matrix_power(m: &DenseMatrix, tau: usize) -> Result<DenseMatrix, GraphError> {
    if !m.is_square() {
        return Err(GraphError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let mut out = DenseMatrix::identity(m.rows());
    for _ in 0..tau {
        out = out.matmul(m);
    }
    Ok(out)
}
