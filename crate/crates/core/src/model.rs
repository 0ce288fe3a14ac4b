//! Core domain types: model parameters, simple graphs and color assignments,
//! with the Hamiltonian, Forb and overlap operations shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{PottsError, Result};
use crate::matrix::StochasticMatrix;
use crate::numeric::pair_count;

/// Experiment coordinates (k, n, d, beta). The edge count m = ceil(d*n/2) and
/// c_beta = 1 - exp(-beta) are always derived, never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub k: usize,
    pub n: usize,
    pub d: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(k: usize, n: usize, d: f64, beta: f64) -> Result<Self> {
        if k < 2 {
            return Err(PottsError::InvalidParameter(format!(
                "k = {k}, need k >= 2"
            )));
        }
        if k > u8::MAX as usize {
            return Err(PottsError::InvalidParameter(format!(
                "k = {k} exceeds the supported color range"
            )));
        }
        if n < 1 {
            return Err(PottsError::InvalidParameter("n must be >= 1".into()));
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(PottsError::InvalidParameter(format!("d = {d}, need d > 0")));
        }
        if beta < 0.0 || !beta.is_finite() {
            return Err(PottsError::InvalidParameter(format!(
                "beta = {beta}, need beta >= 0"
            )));
        }
        Ok(Self { k, n, d, beta })
    }

    /// m = ceil(d*n/2), recomputed on demand.
    pub fn edge_count(&self) -> u64 {
        (self.d * self.n as f64 / 2.0).ceil() as u64
    }

    /// c_beta = 1 - exp(-beta); zero iff beta is zero.
    pub fn c_beta(&self) -> f64 {
        -(-self.beta).exp_m1()
    }
}

/// Undirected simple graph: no loops, no multi-edges. Edges are kept sorted
/// with u < v.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut canon: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(PottsError::InvalidParameter(format!(
                    "self-loop at vertex {a}"
                )));
            }
            if a as usize >= n || b as usize >= n {
                return Err(PottsError::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        if canon.len() != before {
            return Err(PottsError::InvalidParameter("duplicate edge".into()));
        }
        Ok(Self { n, edges: canon })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(pair_count(n) as usize);
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                edges.push((u, v));
            }
        }
        Self { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        adj
    }
}

/// A map \[n\] -> \[k\], stored 0-based. Class sizes are derived on construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorAssignment {
    colors: Vec<u8>,
    k: usize,
}

impl ColorAssignment {
    pub fn new(colors: Vec<u8>, k: usize) -> Result<Self> {
        if k < 2 || k > u8::MAX as usize {
            return Err(PottsError::InvalidParameter(format!(
                "k = {k} out of range"
            )));
        }
        if colors.is_empty() {
            return Err(PottsError::InvalidParameter("empty assignment".into()));
        }
        if let Some(&c) = colors.iter().find(|&&c| c as usize >= k) {
            return Err(PottsError::InvalidParameter(format!(
                "color {c} out of range for k = {k}"
            )));
        }
        Ok(Self { colors, k })
    }

    pub fn n(&self) -> usize {
        self.colors.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    pub fn color(&self, v: usize) -> u8 {
        self.colors[v]
    }

    pub(crate) fn set_color_unchecked(&mut self, v: usize, c: u8) {
        debug_assert!((c as usize) < self.k);
        self.colors[v] = c;
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &c in &self.colors {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Balanced iff every class size is within sqrt(n) of n/k. The comparison
    /// is on reals; ties at exactly sqrt(n) count as balanced.
    pub fn is_balanced(&self) -> bool {
        let n = self.n() as f64;
        let target = n / self.k as f64;
        let slack = n.sqrt();
        self.class_sizes()
            .iter()
            .all(|&s| (s as f64 - target).abs() <= slack)
    }

    /// Relabel colors through a permutation of \[k\].
    pub fn permute_colors(&self, perm: &[u8]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(PottsError::DimensionMismatch(
                "permutation length != k".into(),
            ));
        }
        let colors = self.colors.iter().map(|&c| perm[c as usize]).collect();
        Self::new(colors, self.k)
    }
}

/// Number of monochromatic edges of `g` under `sigma`.
pub fn hamiltonian(g: &SimpleGraph, sigma: &ColorAssignment) -> Result<u64> {
    if sigma.n() != g.n() {
        return Err(PottsError::DimensionMismatch(format!(
            "assignment has {} vertices, graph has {}",
            sigma.n(),
            g.n()
        )));
    }
    Ok(hamiltonian_unchecked(g, sigma.colors()))
}

#[inline]
pub(crate) fn hamiltonian_unchecked(g: &SimpleGraph, colors: &[u8]) -> u64 {
    g.edges()
        .iter()
        .filter(|&&(u, v)| colors[u as usize] == colors[v as usize])
        .count() as u64
}

/// Forb(sigma) = sum_i C(|sigma^-1(i)|, 2): the monochromatic edges of the
/// complete graph.
pub fn forb(sigma: &ColorAssignment) -> u64 {
    forb_from_sizes(&sigma.class_sizes())
}

pub(crate) fn forb_from_sizes(sizes: &[usize]) -> u64 {
    sizes.iter().map(|&s| pair_count(s)).sum()
}

/// Overlap matrix rho_ij = (k/n) |sigma^-1(i) cap tau^-1(j)|.
pub fn overlap_matrix(sigma: &ColorAssignment, tau: &ColorAssignment) -> Result<StochasticMatrix> {
    if sigma.n() != tau.n() {
        return Err(PottsError::DimensionMismatch(format!(
            "assignments on {} and {} vertices",
            sigma.n(),
            tau.n()
        )));
    }
    if sigma.k() != tau.k() {
        return Err(PottsError::DimensionMismatch(format!(
            "assignments with k = {} and k = {}",
            sigma.k(),
            tau.k()
        )));
    }
    let counts = joint_counts(sigma.colors(), tau.colors(), sigma.k());
    let scale = sigma.k() as f64 / sigma.n() as f64;
    let entries = counts.iter().map(|&c| c as f64 * scale).collect();
    Ok(StochasticMatrix::overlap_empirical(sigma.k(), entries))
}

/// Joint class counts n_ij = |sigma^-1(i) cap tau^-1(j)|, row-major.
pub fn joint_counts(sigma: &[u8], tau: &[u8], k: usize) -> Vec<u32> {
    debug_assert_eq!(sigma.len(), tau.len());
    let mut counts = vec![0u32; k * k];
    for (&a, &b) in sigma.iter().zip(tau) {
        counts[a as usize * k + b as usize] += 1;
    }
    counts
}
