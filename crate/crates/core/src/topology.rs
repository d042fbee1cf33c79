//! Communication graphs and doubly stochastic combination matrices.
//!
//! Every neighbour-averaging step in the learner (belief combination, critic
//! diffusion, importance-ratio consensus) is driven by one fixed
//! [`CombinationMatrix`]. Matrices are built from undirected graphs with the
//! Metropolis-Hastings rule, or loaded verbatim from a configuration file and
//! checked afterwards.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// Tolerance on row and column sums of a combination matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Ring,
    Path,
    Complete,
    Custom(Vec<(usize, usize)>),
}

/// Undirected communication graph over `num_agents` agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    num_agents: usize,
    edges: BTreeSet<(usize, usize)>,
    self_loops: BTreeSet<usize>,
}

impl Graph {
    /// Builds a graph from an explicit edge list. Pairs `(i, i)` are recorded
    /// as self-loops; every agent also gets a self-loop unless
    /// `explicit_self_loops` is set.
    pub fn from_edges(
        num_agents: usize,
        edges: &[(usize, usize)],
        explicit_self_loops: bool,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut loops = BTreeSet::new();
        for &(i, j) in edges {
            if i >= num_agents || j >= num_agents {
                return Err(Error::Config(format!(
                    "edge ({i}, {j}) references an agent outside 0..{num_agents}"
                )));
            }
            if i == j {
                loops.insert(i);
            } else {
                set.insert((i.min(j), i.max(j)));
            }
        }
        if !explicit_self_loops {
            loops.extend(0..num_agents);
        }
        Ok(Graph {
            num_agents,
            edges: set,
            self_loops: loops,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    /// Unordered edges, each stored as `(min, max)`.
    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn self_loops(&self) -> &BTreeSet<usize> {
        &self.self_loops
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(i, j)| match (i == k, j == k) {
                (true, _) => Some(j),
                (_, true) => Some(i),
                _ => None,
            })
            .collect()
    }

    pub fn degree(&self, k: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == k || j == k).count()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_agents];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    fn bfs_depths(&self, adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.num_agents];
        depth[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = depth[u].unwrap();
            for &v in &adj[u] {
                if depth[v].is_none() {
                    depth[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        if self.num_agents == 0 {
            return false;
        }
        let adj = self.adjacency();
        self.bfs_depths(&adj, 0).iter().all(Option::is_some)
    }

    /// Longest shortest path, or `None` when the graph is disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let adj = self.adjacency();
        let mut diameter = 0;
        for source in 0..self.num_agents {
            for d in self.bfs_depths(&adj, source) {
                diameter = diameter.max(d?);
            }
        }
        Some(diameter)
    }
}

/// Builds one of the standard topologies, or validates a custom edge list.
pub fn build_graph(kind: &GraphKind, num_agents: usize) -> Result<Graph> {
    if num_agents < 2 {
        return Err(Error::Config(format!(
            "a network needs at least 2 agents, got {num_agents}"
        )));
    }
    let edges: Vec<(usize, usize)> = match kind {
        GraphKind::Ring => (0..num_agents).map(|i| (i, (i + 1) % num_agents)).collect(),
        GraphKind::Path => (0..num_agents - 1).map(|i| (i, i + 1)).collect(),
        GraphKind::Complete => (0..num_agents)
            .flat_map(|i| (i + 1..num_agents).map(move |j| (i, j)))
            .collect(),
        GraphKind::Custom(edges) => edges.clone(),
    };
    Graph::from_edges(num_agents, &edges, false)
}

/// Square nonnegative matrix with unit row and column sums, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinationMatrix {
    k: usize,
    weights: Vec<f64>,
}

impl CombinationMatrix {
    /// Loads a matrix from rows, rejecting anything that is not square,
    /// nonnegative and doubly stochastic.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Self::from_rows_unchecked(rows)?;
        let (row_err, col_err) = m.stochasticity_error();
        if row_err > STOCHASTIC_TOL || col_err > STOCHASTIC_TOL {
            return Err(Error::Topology(format!(
                "combination matrix is not doubly stochastic \
                 (max row deviation {row_err:e}, max column deviation {col_err:e})"
            )));
        }
        Ok(m)
    }

    /// Checks shape and sign only; stochasticity is left to the caller.
    pub fn from_rows_unchecked(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Topology(
                "combination matrix must be square and non-empty".into(),
            ));
        }
        let m = CombinationMatrix {
            k,
            weights: rows.iter().flatten().copied().collect(),
        };
        if let Some(&w) = m.weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Topology(format!(
                "combination weights must be finite and nonnegative, found {w}"
            )));
        }
        Ok(m)
    }

    pub fn identity(k: usize) -> Self {
        let mut weights = vec![0.0; k * k];
        for i in 0..k {
            weights[i * k + i] = 1.0;
        }
        CombinationMatrix { k, weights }
    }

    /// Uniform averaging matrix `11ᵀ/K`.
    pub fn uniform(k: usize) -> Self {
        CombinationMatrix {
            k,
            weights: vec![1.0 / k as f64; k * k],
        }
    }

    pub fn num_agents(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.k..(i + 1) * self.k]
    }

    /// Column `k`, i.e. the weights `c_{ℓk}` agent `k` applies to each `ℓ`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.k).map(|l| self.get(l, k)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Largest absolute deviation of the row sums and of the column sums from 1.
    pub fn stochasticity_error(&self) -> (f64, f64) {
        let mut row_err: f64 = 0.0;
        let mut col_err: f64 = 0.0;
        for i in 0..self.k {
            let r: f64 = self.row(i).iter().sum();
            let c: f64 = (0..self.k).map(|l| self.get(l, i)).sum();
            row_err = row_err.max((r - 1.0).abs());
            col_err = col_err.max((c - 1.0).abs());
        }
        (row_err, col_err)
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        let (r, c) = self.stochasticity_error();
        self.weights.iter().all(|&w| w >= 0.0) && r <= STOCHASTIC_TOL && c <= STOCHASTIC_TOL
    }

    /// True when every positive off-diagonal weight sits on an edge of `g`.
    pub fn respects(&self, g: &Graph) -> bool {
        g.num_agents() == self.k
            && (0..self.k).all(|i| {
                (0..self.k).all(|j| i == j || self.get(i, j) == 0.0 || g.has_edge(i, j))
            })
    }

    /// `y = C x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|i| self.row(i).iter().zip(x).map(|(c, v)| c * v).sum())
            .collect()
    }

    /// `y = Cᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.k];
        for (l, &xl) in x.iter().enumerate() {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += self.get(l, k) * xl;
            }
        }
        y
    }
}

/// Metropolis-Hastings weights without the connectivity precondition.
///
/// The result is doubly stochastic for any undirected graph; the assumption
/// validators use it to inspect disconnected topologies.
pub fn metropolis_rule(g: &Graph) -> CombinationMatrix {
    let k = g.num_agents();
    let deg: Vec<usize> = (0..k).map(|i| g.degree(i)).collect();
    let mut weights = vec![0.0; k * k];
    for &(i, j) in g.edges() {
        let w = 1.0 / (1 + deg[i].max(deg[j])) as f64;
        weights[i * k + j] = w;
        weights[j * k + i] = w;
    }
    for i in 0..k {
        let off: f64 = (0..k).filter(|&j| j != i).map(|j| weights[i * k + j]).sum();
        weights[i * k + i] = 1.0 - off;
    }
    CombinationMatrix { k, weights }
}

/// Metropolis-Hastings combination matrix of a connected graph:
/// `c_ij = 1/(1 + max(deg_i, deg_j))` on edges and the remainder on the diagonal.
pub fn metropolis_weights(g: &Graph) -> Result<CombinationMatrix> {
    if !g.is_connected() {
        return Err(Error::Topology(
            "Metropolis weights require a connected graph".into(),
        ));
    }
    Ok(metropolis_rule(g))
}

/// Strong connectivity of the positive-weight digraph plus at least one
/// positive self-loop.
pub fn check_strong_connectivity(c: &CombinationMatrix) -> bool {
    let k = c.num_agents();
    let has_self_loop = (0..k).any(|i| c.get(i, i) > 0.0);
    let reaches_all = |forward: bool| {
        let mut seen = vec![false; k];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for v in 0..k {
                let w = if forward { c.get(u, v) } else { c.get(v, u) };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    has_self_loop && reaches_all(true) && reaches_all(false)
}

/// Spectral norm of `Cᵀ(I − 11ᵀ/K)C`, by power iteration on the symmetric
/// positive semi-definite product. Values below 1 mean the disagreement
/// contracts under repeated combination.
pub fn spectral_contraction_value(c: &CombinationMatrix) -> f64 {
    let k = c.num_agents();
    let kf = k as f64;
    // M x = Cᵀ (I − J/K) C x
    let apply = |x: &[f64]| {
        let mut y = c.apply(x);
        let mean = y.iter().sum::<f64>() / kf;
        y.iter_mut().for_each(|v| *v -= mean);
        c.apply_transpose(&y)
    };

    // Fixed, generic starting direction.
    let mut x: Vec<f64> = (0..k)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n0 = norm(&x);
    x.iter_mut().for_each(|v| *v /= n0);

    let mut lambda = 0.0;
    for _ in 0..POWER_ITER_MAX {
        let y = apply(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        let next = ny;
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= POWER_ITER_TOL * next.max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Round-off leaves ~1e-17 residue on the annihilated direction.
    if lambda < 1e-14 {
        0.0
    } else {
        lambda
    }
}
