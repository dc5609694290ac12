//! Fusion on undirected graphs through depth-first-search chain reduction.
//!
//! A connected graph is reduced to the tree edges E_C discovered by a DFS
//! from a root vertex; each tree edge (parent, child) carries one difference
//! η = θ[child] − θ[parent] with its own local scale, the root mean carries
//! the fixed-scale prior, and non-tree edges are ignored. Posterior draws from
//! several roots are pooled.
//!
//! Vertex ids are 0-based in the API and 1-based in edge-list files and in
//! error messages.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{derive_seed, seeded_rng, InverseGammaParams};
use crate::error::{FusionError, Result};
use crate::model::{GibbsState, McmcConfig, PosteriorSamples, PriorConfig, SampleMeta};
use crate::sampler::{
    drive, gibbs_sweep_for, initial_state_for, lambda_sq_conditional_for, nu_conditional,
    sigma_sq_conditional_for, tau_sq_conditional_for, xi_conditional, ConditionalNormalParams,
    Coupling, ScaleGuard,
};

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UGraph {
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl UGraph {
    /// Builds a graph on vertices `0..n_vertices` from 0-based edges.
    pub fn new(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_vertices == 0 {
            return Err(FusionError::Graph("graph must have at least one vertex".into()));
        }
        let mut adjacency = vec![Vec::new(); n_vertices];
        let mut stored = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(FusionError::Graph(format!(
                    "edge ({}, {}) refers to a vertex outside 1..={n_vertices}",
                    a + 1,
                    b + 1
                )));
            }
            if a == b {
                return Err(FusionError::Graph(format!("self-loop at vertex {}", a + 1)));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
            stored.push((a.min(b), a.max(b)));
        }
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(FusionError::Graph(format!(
                    "duplicate edge ({}, {})",
                    v + 1,
                    w[0] + 1
                )));
            }
        }
        Ok(Self {
            edges: stored,
            adjacency,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as (smaller, larger) 0-based pairs, in input order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbours of `v` in ascending order.
    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn is_connected(&self) -> bool {
        dfs_chain(self, 0).is_ok()
    }
}

/// Parses "i j" lines with 1-based ids; blank lines and `#` comments are
/// skipped. `n_vertices` defaults to the largest id seen.
pub fn parse_edge_list(text: &str, n_vertices: Option<usize>, path: &Path) -> Result<UGraph> {
    let mut edges = Vec::new();
    let mut max_id = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| FusionError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(format!("expected two vertex ids, found '{line}'")));
        }
        let mut ids = [0usize; 2];
        for (slot, f) in ids.iter_mut().zip(&fields) {
            *slot = f
                .parse::<usize>()
                .map_err(|_| parse_err(format!("'{f}' is not a vertex id")))?;
            if *slot == 0 {
                return Err(parse_err("vertex ids are 1-based".into()));
            }
        }
        max_id = max_id.max(ids[0]).max(ids[1]);
        edges.push((ids[0] - 1, ids[1] - 1));
    }
    let n = match n_vertices {
        Some(n) if n < max_id => {
            return Err(FusionError::Graph(format!(
                "edge list mentions vertex {max_id} but the graph has {n} vertices"
            )))
        }
        Some(n) => n,
        None => max_id,
    };
    UGraph::new(n, &edges)
}

pub fn read_edge_list(path: &Path, n_vertices: Option<usize>) -> Result<UGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| FusionError::io(path, e))?;
    parse_edge_list(&text, n_vertices, path)
}

/// Tree edges of a depth-first search, in discovery order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfsChain {
    pub root: usize,
    /// (parent, child) pairs; position k is the storage index of that edge.
    pub chain_edges: Vec<(usize, usize)>,
    edge_index: BTreeMap<(usize, usize), usize>,
}

impl DfsChain {
    pub fn n_vertices(&self) -> usize {
        self.chain_edges.len() + 1
    }

    /// Storage index of the tree edge joining `i` and `j`, in either direction.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edge_index.get(&(i.min(j), i.max(j))).copied()
    }
}

/// DFS from `root` visiting neighbours in ascending id order.
pub fn dfs_chain(g: &UGraph, root: usize) -> Result<DfsChain> {
    let n = g.n_vertices();
    if root >= n {
        return Err(FusionError::IndexOutOfRange { index: root, len: n });
    }
    let mut visited = vec![false; n];
    let mut chain_edges = Vec::with_capacity(n.saturating_sub(1));
    // (vertex, position of the next neighbour to try)
    let mut stack = vec![(root, 0usize)];
    visited[root] = true;
    while let Some(top) = stack.last_mut() {
        let (v, pos) = *top;
        match g.neighbours(v)[pos..].iter().position(|&u| !visited[u]) {
            Some(offset) => {
                let u = g.neighbours(v)[pos + offset];
                top.1 = pos + offset + 1;
                visited[u] = true;
                chain_edges.push((v, u));
                stack.push((u, 0));
            }
            None => {
                stack.pop();
            }
        }
    }
    if let Some(missing) = visited.iter().position(|&seen| !seen) {
        return Err(FusionError::Disconnected { vertex: missing + 1 });
    }
    let edge_index = chain_edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| ((a.min(b), a.max(b)), k))
        .collect();
    Ok(DfsChain {
        root,
        chain_edges,
        edge_index,
    })
}

/// Number of edges whose endpoints differ.
pub fn tv_l0(theta: &[f64], edges: &[(usize, usize)]) -> usize {
    edges.iter().filter(|&&(a, b)| theta[a] != theta[b]).count()
}

/// Number of edges whose endpoints differ by more than `tol`.
pub fn tv_l0_tol(theta: &[f64], edges: &[(usize, usize)], tol: f64) -> usize {
    edges
        .iter()
        .filter(|&&(a, b)| (theta[a] - theta[b]).abs() > tol)
        .count()
}

pub fn tv_l1(theta: &[f64], edges: &[(usize, usize)]) -> f64 {
    edges.iter().map(|&(a, b)| (theta[a] - theta[b]).abs()).sum()
}

/// The fusion model on one DFS tree.
#[derive(Debug, Clone)]
pub struct GraphModel {
    chain: DfsChain,
    /// (neighbour, edge index) per vertex, in E_C order.
    incident: Vec<Vec<(usize, usize)>>,
}

impl GraphModel {
    pub fn new(g: &UGraph, root: usize) -> Result<Self> {
        Ok(Self::from_chain(dfs_chain(g, root)?))
    }

    pub fn from_chain(chain: DfsChain) -> Self {
        let mut incident = vec![Vec::new(); chain.n_vertices()];
        for (k, &(p, c)) in chain.chain_edges.iter().enumerate() {
            incident[p].push((c, k));
            incident[c].push((p, k));
        }
        Self { chain, incident }
    }

    pub fn chain(&self) -> &DfsChain {
        &self.chain
    }

    pub fn n(&self) -> usize {
        self.incident.len()
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(FusionError::domain(format!(
                "{what} has length {len} but the graph has {} vertices",
                self.n()
            )));
        }
        Ok(())
    }

    /// Warm start with σ² from the sample variance of y over tree edges.
    pub fn initial_state(&self, y: &[f64]) -> Result<GibbsState> {
        self.check_len("signal", y.len())?;
        if self.n() < 2 {
            return Err(FusionError::domain("graph needs at least two vertices"));
        }
        Ok(initial_state_for(self, y))
    }

    pub fn theta_conditional(
        &self,
        i: usize,
        state: &GibbsState,
        y: &[f64],
        prior: &PriorConfig,
    ) -> Result<ConditionalNormalParams> {
        Coupling::theta_conditional(self, i, state, y, prior)
    }

    pub fn lambda_sq_conditional(&self, state: &GibbsState, k: usize) -> Result<InverseGammaParams> {
        lambda_sq_conditional_for(self, state, k)
    }

    pub fn nu_conditional(&self, state: &GibbsState, k: usize) -> Result<InverseGammaParams> {
        nu_conditional(state, k)
    }

    pub fn tau_sq_conditional(&self, state: &GibbsState) -> Result<InverseGammaParams> {
        tau_sq_conditional_for(self, state)
    }

    pub fn xi_conditional(&self, state: &GibbsState) -> Result<InverseGammaParams> {
        xi_conditional(state)
    }

    pub fn sigma_sq_conditional(
        &self,
        state: &GibbsState,
        y: &[f64],
        prior: &PriorConfig,
    ) -> Result<InverseGammaParams> {
        sigma_sq_conditional_for(self, state, y, prior)
    }

    pub fn gibbs_sweep<R: Rng + ?Sized>(
        &self,
        state: &mut GibbsState,
        y: &[f64],
        prior: &PriorConfig,
        rng: &mut R,
        guard: &mut ScaleGuard,
    ) -> Result<()> {
        gibbs_sweep_for(self, state, y, prior, rng, guard)
    }

    /// Runs one chain on this tree with `mcmc.seed`.
    pub fn run(&self, y: &[f64], prior: &PriorConfig, mcmc: &McmcConfig) -> Result<PosteriorSamples> {
        prior.validate()?;
        mcmc.validate()?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::domain("signal contains non-finite values"));
        }
        let state = self.initial_state(y)?;
        let mut rng = seeded_rng(mcmc.seed);
        let meta = SampleMeta {
            seed: mcmc.seed,
            prior: *prior,
            mcmc: *mcmc,
            root: Some(self.chain.root),
        };
        drive(state, mcmc, meta, |state, guard| {
            self.gibbs_sweep(state, y, prior, &mut rng, guard)
        })
    }
}

impl Coupling for GraphModel {
    fn difference(&self, theta: &[f64], k: usize) -> f64 {
        let (p, c) = self.chain.chain_edges[k];
        theta[c] - theta[p]
    }

    fn anchor(&self) -> usize {
        self.chain.root
    }

    fn theta_conditional(
        &self,
        i: usize,
        state: &GibbsState,
        y: &[f64],
        prior: &PriorConfig,
    ) -> Result<ConditionalNormalParams> {
        if i >= self.n() {
            return Err(FusionError::IndexOutOfRange { index: i, len: self.n() });
        }
        let mut prec = 1.0;
        let mut num = y[i];
        if i == self.chain.root {
            prec += 1.0 / (prior.lambda_first * prior.lambda_first);
        }
        for &(j, k) in &self.incident[i] {
            let w = 1.0 / (state.lambda_sq[k] * state.tau_sq);
            prec += w;
            num += state.theta[j] * w;
        }
        Ok(ConditionalNormalParams {
            mu: num / prec,
            zeta: state.sigma_sq / prec,
        })
    }
}

/// Draws from every root plus their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPosterior {
    pub per_root: Vec<PosteriorSamples>,
    pub pooled: PosteriorSamples,
}

impl GraphPosterior {
    pub fn posterior_mean(&self) -> Result<Vec<f64>> {
        self.pooled.posterior_mean()
    }
}

/// Seed used for the chain of the `index`-th root; the first root uses the
/// master seed itself.
pub fn root_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Runs one chain per root (in parallel) and pools their draws in root order.
pub fn run_graph_fusion(
    g: &UGraph,
    y: &[f64],
    roots: &[usize],
    prior: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<GraphPosterior> {
    prior.validate()?;
    mcmc.validate()?;
    if roots.is_empty() {
        return Err(FusionError::Config("at least one root is required".into()));
    }
    if y.len() != g.n_vertices() {
        return Err(FusionError::Config(format!(
            "signal has length {} but the graph has {} vertices",
            y.len(),
            g.n_vertices()
        )));
    }
    for (i, r) in roots.iter().enumerate() {
        if *r >= g.n_vertices() {
            return Err(FusionError::Config(format!("root {} is not a vertex", r + 1)));
        }
        if roots[..i].contains(r) {
            return Err(FusionError::Config(format!("root {} given twice", r + 1)));
        }
    }
    let models = roots
        .iter()
        .map(|&r| GraphModel::new(g, r))
        .collect::<Result<Vec<_>>>()?;
    let per_root = models
        .par_iter()
        .enumerate()
        .map(|(idx, model)| {
            let run = McmcConfig {
                seed: root_seed(mcmc.seed, idx),
                ..*mcmc
            };
            model.run(y, prior, &run)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = per_root[0].clone();
    pooled.meta.root = None;
    for s in &per_root[1..] {
        pooled.append(s)?;
    }
    Ok(GraphPosterior { per_root, pooled })
}

/// `count` distinct vertices chosen uniformly without replacement.
pub fn choose_roots(n_vertices: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > n_vertices {
        return Err(FusionError::Config(format!(
            "cannot choose {count} roots from {n_vertices} vertices"
        )));
    }
    let mut rng = seeded_rng(seed);
    Ok(rand::seq::index::sample(&mut rng, n_vertices, count).into_vec())
}

/// Random connected graph: a random recursive tree plus `extra` distinct
/// non-tree edges (fewer if the graph saturates).
pub fn random_connected_graph<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> Result<UGraph> {
    let mut seen = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        edges.push((u, v));
    }
    let max_edges = n * (n - 1) / 2;
    let target = (edges.len() + extra).min(max_edges);
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        }
    }
    UGraph::new(n, &edges)
}
