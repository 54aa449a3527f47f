//! Communication graphs and the matrices derived from them.
//!
//! `a_ij > 0` encodes an edge from node `j` to node `i`: agent `i` receives
//! information from agent `j`. Root nodes (`ι_i = 1`) additionally see their
//! output relative to the exosystem.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::spectral::{spectral_radius, RealMatrix};

/// Rootedness by spectral test requires `ρ(D̄) < 1 − ROOTED_SPECTRAL_MARGIN`.
pub const ROOTED_SPECTRAL_MARGIN: f64 = 1e-9;

/// Weighted directed graph with a root set.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    adjacency: RealMatrix,
    roots: Vec<bool>,
}

impl CommGraph {
    pub fn new(adjacency: RealMatrix, roots: Vec<bool>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::Dimension(format!(
                "adjacency must be square and non-empty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if roots.len() != n {
            return Err(Error::Dimension(format!(
                "root flags have length {} but the graph has {n} nodes",
                roots.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Scenario(format!("weight a[{i}][{j}] = {w} must be finite and non-negative")));
                }
                if i == j && w != 0.0 {
                    return Err(Error::Scenario(format!("self-loop a[{i}][{i}] = {w}")));
                }
            }
        }
        Ok(CommGraph { adjacency, roots })
    }

    /// Unweighted graph from `(receiver, sender)` pairs, zero-based.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], roots: &[usize]) -> Result<Self> {
        let mut adjacency = RealMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            adjacency[(i, j)] = 1.0;
        }
        let mut flags = vec![false; n];
        for &r in roots {
            if r >= n {
                return Err(Error::Dimension(format!("root {r} out of range for {n} nodes")));
            }
            flags[r] = true;
        }
        CommGraph::new(adjacency, flags)
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn adjacency(&self) -> &RealMatrix {
        &self.adjacency
    }

    pub fn roots(&self) -> &[bool] {
        &self.roots
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn root_flag(&self, i: usize) -> f64 {
        if self.roots[i] {
            1.0
        } else {
            0.0
        }
    }

    /// `d_in(i) = Σ_j a_ij`.
    pub fn in_degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).sum()
    }

    /// `(2 + d_in(i))⁻¹`, the per-node normalization of every exchange.
    pub fn normalization(&self, i: usize) -> f64 {
        1.0 / (2.0 + self.in_degree(i))
    }
}

/// `L`, `L̄ = L + diag(ι)`, `d_in` and `D̄ = I − (2I + D_in)⁻¹L̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    pub laplacian: RealMatrix,
    pub expanded_laplacian: RealMatrix,
    pub in_degree: Vec<f64>,
    pub d_bar: RealMatrix,
}

pub fn laplacian(g: &CommGraph) -> RealMatrix {
    let n = g.len();
    let mut l = -g.adjacency.clone();
    for i in 0..n {
        // Diagonal from the off-diagonals so that rows sum to zero exactly.
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| l[(i, j)]).sum();
        l[(i, i)] = -off;
    }
    l
}

pub fn expanded_laplacian(g: &CommGraph) -> RealMatrix {
    let mut l = laplacian(g);
    for i in 0..g.len() {
        l[(i, i)] += g.root_flag(i);
    }
    l
}

pub fn d_bar(g: &CommGraph) -> Result<NetworkMatrices> {
    let n = g.len();
    let laplacian = laplacian(g);
    let expanded = expanded_laplacian(g);
    let in_degree: Vec<f64> = (0..n).map(|i| g.in_degree(i)).collect();
    let mut d = -expanded.clone();
    for i in 0..n {
        let scale = 1.0 / (2.0 + in_degree[i]);
        d.row_mut(i).scale_mut(scale);
        d[(i, i)] += 1.0;
    }
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if d[(i, j)] < -1e-15 {
                return Err(Error::Consistency(format!("D̄[{i}][{j}] = {} is negative", d[(i, j)])));
            }
            row_sum += d[(i, j)];
        }
        if row_sum > 1.0 + 1e-12 {
            return Err(Error::Consistency(format!("row {i} of D̄ sums to {row_sum} > 1")));
        }
    }
    Ok(NetworkMatrices {
        laplacian,
        expanded_laplacian: expanded,
        in_degree,
        d_bar: d,
    })
}

/// Nodes reachable from the root set along edge direction (sender → receiver).
pub fn reachable_from_roots(g: &CommGraph) -> Vec<bool> {
    let n = g.len();
    let mut seen = g.roots.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| seen[i]).collect();
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && g.weight(i, j) > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

/// Every node lies on a directed tree rooted in the root set.
///
/// Decided by graph search and cross-checked against `ρ(D̄) < 1`; the two
/// must agree.
pub fn is_rooted(g: &CommGraph) -> Result<bool> {
    let by_search = reachable_from_roots(g).iter().all(|&r| r);
    let radius = spectral_radius(&d_bar(g)?.d_bar)?;
    let by_spectrum = radius < 1.0 - ROOTED_SPECTRAL_MARGIN;
    if by_search != by_spectrum {
        return Err(Error::Consistency(format!(
            "graph search says rooted = {by_search} but ρ(D̄) = {radius:.12}"
        )));
    }
    Ok(by_search)
}
