//! Critical geometric Galton–Watson trees stored in depth-first order.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::Proportion;

/// Outcome of a capped sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TruncationReport {
    pub truncated: bool,
    pub cap_nodes: u64,
    pub nodes_generated: u64,
}

/// A finite rooted ordered tree given by its offspring counts in DFS order.
///
/// Vertex `i > 0` is the child end of DFS edge `i - 1`, so edge labels of the
/// embedding can be indexed by vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GwTree {
    offspring: Vec<u32>,
}

impl GwTree {
    /// Validates that the counts describe exactly one finite tree: the running
    /// sum of `children - 1` reaches `-1` at the last vertex and not before.
    pub fn from_offspring(offspring: Vec<u32>) -> Result<Self> {
        if offspring.is_empty() {
            return Err(Error::InvalidTree);
        }
        let mut open: i64 = 1;
        let last = offspring.len() - 1;
        for (i, &k) in offspring.iter().enumerate() {
            open += k as i64 - 1;
            if open == 0 && i != last {
                return Err(Error::InvalidTree);
            }
        }
        if open != 0 {
            return Err(Error::InvalidTree);
        }
        Ok(Self { offspring })
    }

    pub fn leaf() -> Self {
        Self { offspring: vec![0] }
    }

    pub fn offspring(&self) -> &[u32] {
        &self.offspring
    }

    pub fn size(&self) -> usize {
        self.offspring.len()
    }

    /// Parent index of every vertex; the root has none.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parents = Vec::with_capacity(self.size());
        let mut stack: Vec<(usize, u32)> = Vec::new();
        for (i, &k) in self.offspring.iter().enumerate() {
            while let Some(top) = stack.last() {
                if top.1 == 0 {
                    stack.pop();
                } else {
                    break;
                }
            }
            match stack.last_mut() {
                Some(top) => {
                    parents.push(Some(top.0));
                    top.1 -= 1;
                }
                None => parents.push(None),
            }
            stack.push((i, k));
        }
        parents
    }

    /// Generation (depth) of every vertex.
    pub fn depths(&self) -> Vec<u32> {
        let parents = self.parents();
        let mut depth = vec![0u32; self.size()];
        for i in 1..self.size() {
            // Parents precede children in DFS order.
            depth[i] = depth[parents[i].unwrap()] + 1;
        }
        depth
    }

    /// `S_T(0), S_T(1), ..., S_T(height)`.
    pub fn generation_sizes(&self) -> Vec<u64> {
        let mut sizes = Vec::new();
        for d in self.depths() {
            let d = d as usize;
            if sizes.len() <= d {
                sizes.resize(d + 1, 0);
            }
            sizes[d] += 1;
        }
        sizes
    }

    pub fn height(&self) -> u32 {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Index of `v_{n,k}`, the `k`-th (1-based) explored vertex of generation
    /// `n`, if it exists.
    pub fn vertex(&self, n: u32, k: u64) -> Option<usize> {
        if k == 0 {
            return None;
        }
        self.depths()
            .into_iter()
            .enumerate()
            .filter(|&(_, d)| d == n)
            .nth((k - 1) as usize)
            .map(|(i, _)| i)
    }
}

/// One draw from `P(k) = 2^-(k+1)`.
pub fn sample_offspring(rng: &mut RngStream) -> u32 {
    rng.offspring()
}

/// DFS sampling with a node cap. If the cap is hit while children are still
/// pending, the explored prefix is returned as a valid tree with the pending
/// children removed, and the report is flagged.
pub fn sample_tree(rng: &mut RngStream, cap_nodes: u64) -> (GwTree, TruncationReport) {
    sample_tree_capped(rng, cap_nodes, None)
}

/// Like [`sample_tree`], but vertices at depth `max_depth` are given no
/// children. The first `max_depth + 1` generations have their exact law.
pub fn sample_tree_to_depth(
    rng: &mut RngStream,
    max_depth: u32,
    cap_nodes: u64,
) -> (GwTree, TruncationReport) {
    sample_tree_capped(rng, cap_nodes, Some(max_depth))
}

fn sample_tree_capped(
    rng: &mut RngStream,
    cap_nodes: u64,
    max_depth: Option<u32>,
) -> (GwTree, TruncationReport) {
    assert!(cap_nodes >= 1, "cap_nodes must be positive");
    let mut offspring: Vec<u32> = Vec::new();
    // (vertex index, depth, children still to generate)
    let mut stack: Vec<(usize, u32, u32)> = Vec::new();
    let mut depth = 0u32;
    loop {
        let k = match max_depth {
            Some(h) if depth >= h => 0,
            _ => rng.offspring(),
        };
        let idx = offspring.len();
        offspring.push(k);
        stack.push((idx, depth, k));
        // Find the next pending child.
        while let Some(top) = stack.last() {
            if top.2 == 0 {
                stack.pop();
            } else {
                break;
            }
        }
        let Some(top) = stack.last_mut() else {
            let n = offspring.len() as u64;
            return (
                GwTree { offspring },
                TruncationReport {
                    truncated: false,
                    cap_nodes,
                    nodes_generated: n,
                },
            );
        };
        if offspring.len() as u64 >= cap_nodes {
            for &(i, _, pending) in &stack {
                offspring[i] -= pending;
            }
            let n = offspring.len() as u64;
            return (
                GwTree { offspring },
                TruncationReport {
                    truncated: true,
                    cap_nodes,
                    nodes_generated: n,
                },
            );
        }
        top.2 -= 1;
        depth = top.1 + 1;
    }
}

/// One row of [`height_tail_experiment`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub n: u32,
    pub p: f64,
    pub se: f64,
}

/// Empirical `P(height >= n)` for each threshold. Trees are sampled to depth
/// `max(thresholds)`, which decides every event exactly.
pub fn height_tail_experiment(reps: u64, thresholds: &[u32], rng: &mut RngStream) -> Vec<TailRow> {
    let top = thresholds.iter().copied().max().unwrap_or(0);
    let mut counts = vec![Proportion::default(); thresholds.len()];
    for _ in 0..reps {
        let (tree, _) = sample_tree_to_depth(rng, top, u64::MAX);
        let h = tree.height();
        for (c, &n) in counts.iter_mut().zip(thresholds) {
            c.record(h >= n);
        }
    }
    thresholds
        .iter()
        .zip(counts)
        .map(|(&n, c)| TailRow {
            n,
            p: c.p(),
            se: c.se(),
        })
        .collect()
}
