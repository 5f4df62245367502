//! Weighted directed contact networks.
//!
//! Weights follow the adjacency convention `a_ij > 0` iff there is an edge
//! from node `j` to node `i`, so row `i` lists the in-neighbours of node `i`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Default number of draws before [`random_strongly_connected`] gives up.
pub const DEFAULT_RETRY_BUDGET: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    weights: Matrix,
}

impl DirectedGraph {
    /// Graph on `n` nodes without edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            weights: Matrix::zeros(n, n),
        }
    }

    /// Builds a graph from an adjacency matrix, checking nonnegativity,
    /// finiteness and the absence of self-loops.
    pub fn from_adjacency(weights: Matrix) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidArgument(format!(
                "adjacency must be square, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        let n = weights.rows();
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j });
                }
                if i == j && w != 0.0 {
                    return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
                }
            }
        }
        Ok(Self { n, weights })
    }

    /// Builds a graph from `(i, j, a_ij)` triples.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (i, j, w) in edges {
            g.set_weight(i, j, w)?;
        }
        Ok(g)
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0` with unit weights.
    pub fn cycle(n: usize) -> Self {
        let mut g = Self::empty(n);
        if n > 1 {
            for j in 0..n {
                g.weights[((j + 1) % n, j)] = 1.0;
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.weights.as_slice().iter().filter(|&&w| w > 0.0).count()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.weights
    }

    /// `a_ij`, the weight of the edge from `j` to `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Sets `a_ij`; zero removes the edge.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidArgument(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.n
            )));
        }
        if i == j && w != 0.0 {
            return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::NegativeEntry { row: i, col: j });
        }
        self.weights[(i, j)] = w;
        Ok(())
    }

    /// In-neighbours of `i` with their weights, in increasing index order.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(j, &w)| (j, w))
    }

    /// Out-neighbours of `j`, in increasing index order.
    pub fn out_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.weights[(i, j)] > 0.0)
    }

    /// Union of in- and out-neighbours: the undirected support around `i`.
    pub fn undirected_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| j != i && (self.weights[(i, j)] > 0.0 || self.weights[(j, i)] > 0.0))
            .collect()
    }

    /// Edges as `(i, j, a_ij)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.in_neighbors(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn is_strongly_connected(&self) -> bool {
        is_irreducible(&self.weights)
    }

    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        strongly_connected_components(&self.weights)
    }
}

/// Strongly connected components of the support of a square matrix
/// (edge `j -> i` whenever `m_ij != 0`, diagonal ignored), via an iterative
/// Tarjan pass. Components come out in reverse topological order.
pub fn strongly_connected_components(m: &Matrix) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = m.rows();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j && m[(i, j)] != 0.0).collect())
        .collect();

    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next = 0usize;
    // (node, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = succ[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// True when the support of `m` is strongly connected. A 1x1 matrix counts
/// as irreducible.
pub fn is_irreducible(m: &Matrix) -> bool {
    m.rows() > 0 && strongly_connected_components(m).len() == 1
}

/// Interval from which random edge weights are drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for WeightRange {
    fn default() -> Self {
        Self { lo: 1.0, hi: 1.0 }
    }
}

/// Directed Erdős–Rényi draws (each ordered pair independently with
/// probability `p`), repeated until strongly connected.
pub fn random_strongly_connected(n: usize, p: f64, seed: u64, weights: WeightRange) -> Result<DirectedGraph> {
    random_strongly_connected_with_budget(n, p, seed, weights, DEFAULT_RETRY_BUDGET)
}

pub fn random_strongly_connected_with_budget(
    n: usize,
    p: f64,
    seed: u64,
    weights: WeightRange,
    budget: usize,
) -> Result<DirectedGraph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    if !(weights.lo > 0.0 && weights.lo <= weights.hi && weights.hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight range [{}, {}] must satisfy 0 < lo <= hi < inf",
            weights.lo, weights.hi
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..budget {
        rng.set_stream(attempt as u64);
        rng.set_word_pos(0);
        let mut g = DirectedGraph::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i == j || !rng.random_bool(p) {
                    continue;
                }
                let w = if weights.lo == weights.hi {
                    weights.lo
                } else {
                    rng.random_range(weights.lo..=weights.hi)
                };
                g.weights[(i, j)] = w;
            }
        }
        if g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(Error::GenerationExhausted {
        n,
        p,
        attempts: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> DirectedGraph {
        DirectedGraph::from_edges(n, (1..n).map(|i| (i, i - 1, 1.0))).unwrap()
    }

    /// All-pairs reachability by repeated relaxation.
    fn brute_force_strong(g: &DirectedGraph) -> bool {
        let n = g.node_count();
        let mut reach = vec![vec![false; n]; n];
        for s in 0..n {
            reach[s][s] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for (i, j, _) in g.edges() {
                    if reach[s][j] && !reach[s][i] {
                        reach[s][i] = true;
                        changed = true;
                    }
                }
            }
        }
        reach.iter().all(|r| r.iter().all(|&x| x))
    }

    #[test]
    fn cycle_is_strongly_connected_path_is_not() {
        assert!(DirectedGraph::cycle(3).is_strongly_connected());
        assert!(!path(3).is_strongly_connected());
        assert_eq!(path(3).strongly_connected_components().len(), 3);
    }

    #[test]
    fn complete_two_node_draw_is_two_cycle() {
        let g = random_strongly_connected(2, 1.0, 9, WeightRange::default()).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 0), 1.0);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn zero_probability_exhausts_budget() {
        let err = random_strongly_connected(5, 0.0, 1, WeightRange::default()).unwrap_err();
        assert!(matches!(err, Error::GenerationExhausted { attempts: 1000, .. }));
    }

    #[test]
    fn random_graphs_agree_with_brute_force_reachability() {
        for seed in 0..20 {
            let g = random_strongly_connected(8, 0.32, seed, WeightRange::default()).unwrap();
            assert!(brute_force_strong(&g));
            assert_eq!(g.node_count(), 8);
        }
        // Reducible draws too: single attempts at low density.
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = DirectedGraph::empty(6);
            for i in 0..6 {
                for j in 0..6 {
                    if i != j && rng.random_bool(0.25) {
                        g.set_weight(i, j, 1.0).unwrap();
                    }
                }
            }
            assert_eq!(g.is_strongly_connected(), brute_force_strong(&g), "seed {seed}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let w = WeightRange { lo: 0.5, hi: 2.0 };
        let a = random_strongly_connected(10, 0.32, 77, w).unwrap();
        let b = random_strongly_connected(10, 0.32, 77, w).unwrap();
        assert_eq!(a, b);
        assert!(a.edges().all(|(_, _, x)| (0.5..=2.0).contains(&x)));
    }

    #[test]
    fn undirected_neighbors_union_in_and_out() {
        let g = path(3);
        assert_eq!(g.undirected_neighbors(1), vec![0, 2]);
        assert_eq!(g.undirected_neighbors(0), vec![1]);
    }

    #[test]
    fn rejects_self_loops_and_negative_weights() {
        let mut g = DirectedGraph::empty(2);
        assert!(g.set_weight(0, 0, 1.0).is_err());
        assert!(g.set_weight(0, 1, -1.0).is_err());
        assert!(g.set_weight(0, 2, 1.0).is_err());
    }
}
