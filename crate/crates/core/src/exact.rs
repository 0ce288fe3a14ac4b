//! Ground-truth evaluation of Z_beta(G) on small instances by two independent
//! algorithms: exhaustive enumeration (via an exact energy histogram) and the
//! random-cluster subset expansion. These are the oracles everything else is
//! checked against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PottsError, Result};
use crate::model::SimpleGraph;
use crate::numeric::{log_sum_exp, NeumaierSum};

pub const ENUMERATION_GUARD: u128 = 100_000_000;
pub const GIBBS_GUARD: u128 = 1_000_000;
pub const FK_EDGE_GUARD: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionMethod {
    Enumeration,
    FkExpansion,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PartitionValue {
    pub log_z: f64,
    pub method: PartitionMethod,
}

fn state_count(k: usize, n: usize) -> u128 {
    (k as u128).saturating_pow(n as u32)
}

fn guard(k: usize, n: usize, limit: u128, what: &str) -> Result<()> {
    if state_count(k, n) > limit {
        return Err(PottsError::CapacityExceeded(format!(
            "{what}: k^n = {k}^{n} exceeds {limit}"
        )));
    }
    Ok(())
}

/// Exact counts of assignments by Hamiltonian value: hist\[h\] = #{sigma :
/// H_G(sigma) = h}. Integer-exact regardless of the parallel block split.
pub fn hamiltonian_histogram(g: &SimpleGraph, k: usize) -> Result<Vec<u64>> {
    guard(k, g.n(), ENUMERATION_GUARD, "hamiltonian_histogram")?;
    Ok(enumerate_histogram(g, k, false).0)
}

/// Histogram restricted to balanced assignments, plus the count |B|.
pub fn balanced_histogram(g: &SimpleGraph, k: usize) -> Result<(Vec<u64>, u64)> {
    guard(k, g.n(), ENUMERATION_GUARD, "balanced_histogram")?;
    let (hist, total) = enumerate_histogram(g, k, true);
    Ok((hist, total))
}

/// Odometer walk over all k^n assignments with incremental Hamiltonian and
/// class-size updates. Digits are ordered by ascending degree so the
/// fast-changing positions are the cheap ones.
fn enumerate_histogram(g: &SimpleGraph, k: usize, balanced_only: bool) -> (Vec<u64>, u64) {
    let n = g.n();
    let m = g.edge_count();
    let adj = g.adjacency();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| adj[v].len());

    let total = state_count(k, n) as u64;
    // window table: ok[s] iff |s - n/k| <= sqrt(n), evaluated on reals
    let target = n as f64 / k as f64;
    let slack = (n as f64).sqrt();
    let size_ok: Vec<bool> = (0..=n)
        .map(|s| (s as f64 - target).abs() <= slack)
        .collect();

    let block = 1u64 << 16;
    let blocks: Vec<u64> = (0..total.div_ceil(block)).collect();
    let (hist, count) = blocks
        .par_iter()
        .map(|&b| {
            let start = b * block;
            let end = (start + block).min(total);
            walk_block(&adj, &order, k, m, start, end, balanced_only, &size_ok, n)
        })
        .reduce(
            || (vec![0u64; m + 1], 0u64),
            |(mut ha, ca), (hb, cb)| {
                for (a, b) in ha.iter_mut().zip(&hb) {
                    *a += b;
                }
                (ha, ca + cb)
            },
        );
    (hist, count)
}

#[allow(clippy::too_many_arguments)]
fn walk_block(
    adj: &[Vec<u32>],
    order: &[usize],
    k: usize,
    m: usize,
    start: u64,
    end: u64,
    balanced_only: bool,
    size_ok: &[bool],
    n: usize,
) -> (Vec<u64>, u64) {
    let mut colors = vec![0u8; n];
    // decode start: digit p belongs to vertex order[p]
    let mut idx = start;
    for &v in order {
        colors[v] = (idx % k as u64) as u8;
        idx /= k as u64;
    }
    let mut h: i64 = adj
        .iter()
        .enumerate()
        .map(|(v, nb)| {
            nb.iter()
                .filter(|&&u| (u as usize) > v && colors[u as usize] == colors[v])
                .count() as i64
        })
        .sum();
    let mut sizes = vec![0i64; k];
    for &c in &colors {
        sizes[c as usize] += 1;
    }
    let mut violations = sizes.iter().filter(|&&s| !size_ok[s as usize]).count() as i64;

    let mut hist = vec![0u64; m + 1];
    let mut count = 0u64;
    let recolor = |colors: &mut Vec<u8>,
                   sizes: &mut Vec<i64>,
                   h: &mut i64,
                   violations: &mut i64,
                   v: usize,
                   new: u8| {
        let old = colors[v];
        for &u in &adj[v] {
            let cu = colors[u as usize];
            if cu == old {
                *h -= 1;
            }
            if cu == new {
                *h += 1;
            }
        }
        *violations -= !size_ok[sizes[old as usize] as usize] as i64;
        sizes[old as usize] -= 1;
        *violations += !size_ok[sizes[old as usize] as usize] as i64;
        *violations -= !size_ok[sizes[new as usize] as usize] as i64;
        sizes[new as usize] += 1;
        *violations += !size_ok[sizes[new as usize] as usize] as i64;
        colors[v] = new;
    };

    for step in start..end {
        if !balanced_only || violations == 0 {
            hist[h as usize] += 1;
            count += 1;
        }
        if step + 1 == end {
            break;
        }
        // increment the base-k odometer
        let mut p = 0;
        loop {
            let v = order[p];
            let old = colors[v];
            if (old as usize) + 1 == k {
                recolor(&mut colors, &mut sizes, &mut h, &mut violations, v, 0);
                p += 1;
            } else {
                recolor(&mut colors, &mut sizes, &mut h, &mut violations, v, old + 1);
                break;
            }
        }
    }
    (hist, count)
}

fn log_z_from_histogram(hist: &[u64], beta: f64) -> f64 {
    let terms: Vec<f64> = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(h, &c)| (c as f64).ln() - beta * h as f64)
        .collect();
    log_sum_exp(&terms)
}

/// ln Z by exhaustive enumeration. Guard: k^n <= 1e8.
pub fn z_enumerate(g: &SimpleGraph, k: usize, beta: f64) -> Result<PartitionValue> {
    let hist = hamiltonian_histogram(g, k)?;
    Ok(PartitionValue {
        log_z: log_z_from_histogram(&hist, beta),
        method: PartitionMethod::Enumeration,
    })
}

/// ln Z_bal: the sum restricted to balanced assignments.
pub fn z_balanced(g: &SimpleGraph, k: usize, beta: f64) -> Result<PartitionValue> {
    let (hist, _) = balanced_histogram(g, k)?;
    Ok(PartitionValue {
        log_z: log_z_from_histogram(&hist, beta),
        method: PartitionMethod::Enumeration,
    })
}

/// Mean energy `<H>` under the Gibbs measure, exactly from a histogram.
pub fn mean_energy_from_histogram(hist: &[u64], beta: f64) -> f64 {
    let shift = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(h, &c)| (c as f64).ln() - beta * h as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = NeumaierSum::new();
    let mut zh = NeumaierSum::new();
    for (h, &c) in hist.iter().enumerate() {
        if c > 0 {
            let w = ((c as f64).ln() - beta * h as f64 - shift).exp();
            z.add(w);
            zh.add(w * h as f64);
        }
    }
    zh.value() / z.value()
}

/// ln Z via the random-cluster identity Z = sum_{A subset E} (e^-beta - 1)^|A|
/// k^c(A). Sign-alternating terms are accumulated in separate positive and
/// negative compensated sums and subtracted once. Guard: |E| <= 26.
pub fn z_fk(g: &SimpleGraph, k: usize, beta: f64) -> Result<PartitionValue> {
    let m = g.edge_count();
    if m > FK_EDGE_GUARD {
        return Err(PottsError::CapacityExceeded(format!(
            "z_fk: |E| = {m} exceeds {FK_EDGE_GUARD}"
        )));
    }
    let w = (-beta).exp() - 1.0;
    let mut dsu = RollbackDsu::new(g.n());
    let mut pos = NeumaierSum::new();
    let mut neg = NeumaierSum::new();
    fk_recurse(g.edges(), 0, &mut dsu, 1.0, k, w, &mut pos, &mut neg);
    let z = pos.value() - neg.value();
    if z.is_nan() || z <= 0.0 {
        return Err(PottsError::NumericFailure(format!(
            "fk expansion collapsed to {z}"
        )));
    }
    Ok(PartitionValue {
        log_z: z.ln(),
        method: PartitionMethod::FkExpansion,
    })
}

#[allow(clippy::too_many_arguments)]
fn fk_recurse(
    edges: &[(u32, u32)],
    idx: usize,
    dsu: &mut RollbackDsu,
    weight: f64, // (e^-beta - 1)^(included so far), carries the sign
    k: usize,
    w: f64,
    pos: &mut NeumaierSum,
    neg: &mut NeumaierSum,
) {
    if idx == edges.len() {
        let term = weight * (k as f64).powi(dsu.components() as i32);
        if term >= 0.0 {
            pos.add(term);
        } else {
            neg.add(-term);
        }
        return;
    }
    // edge excluded
    fk_recurse(edges, idx + 1, dsu, weight, k, w, pos, neg);
    // edge included
    let mark = dsu.checkpoint();
    let (u, v) = edges[idx];
    dsu.union(u as usize, v as usize);
    fk_recurse(edges, idx + 1, dsu, weight * w, k, w, pos, neg);
    dsu.rollback(mark);
}

/// Union-find with rollback (union by rank, no path compression).
struct RollbackDsu {
    parent: Vec<u32>,
    rank: Vec<u8>,
    components: usize,
    // (attached root, old rank of the surviving root)
    history: Vec<(u32, u8)>,
}

impl RollbackDsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            components: n,
            history: Vec::new(),
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            x = self.parent[x] as usize;
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.rank[ra] > self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        // ra attaches under rb
        self.history.push((ra as u32, self.rank[rb]));
        self.parent[ra] = rb as u32;
        if self.rank[ra] == self.rank[rb] {
            self.rank[rb] += 1;
        }
        self.components -= 1;
    }

    fn checkpoint(&self) -> usize {
        self.history.len()
    }

    fn rollback(&mut self, mark: usize) {
        while self.history.len() > mark {
            let (child, old_rank) = self.history.pop().unwrap();
            let parent = self.parent[child as usize] as usize;
            self.rank[parent] = old_rank;
            self.parent[child as usize] = child;
            self.components += 1;
        }
    }

    fn components(&self) -> usize {
        self.components
    }
}

/// Exact Gibbs table over all k^n assignments, indexed by the base-k encoding
/// sum_v color(v) * k^v. Guard: k^n <= 1e6.
#[derive(Clone, Debug)]
pub struct GibbsTable {
    pub k: usize,
    pub n: usize,
    pub log_z: f64,
    pub probs: Vec<f64>,
}

impl GibbsTable {
    pub fn state_index(&self, colors: &[u8]) -> usize {
        colors
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.k + c as usize)
    }

    pub fn mean_energy(&self, energies: &[u32]) -> f64 {
        self.probs
            .iter()
            .zip(energies)
            .map(|(&p, &h)| p * h as f64)
            .sum()
    }
}

/// Per-assignment energies in canonical index order (digit v = vertex v).
pub fn energy_table(g: &SimpleGraph, k: usize) -> Result<Vec<u32>> {
    guard(k, g.n(), GIBBS_GUARD, "energy_table")?;
    let n = g.n();
    let total = state_count(k, n) as usize;
    let adj = g.adjacency();
    let mut colors = vec![0u8; n];
    // the all-zeros coloring makes every edge monochromatic
    let mut h: i64 = g.edge_count() as i64;
    let mut out = Vec::with_capacity(total);
    for step in 0..total {
        out.push(h as u32);
        if step + 1 == total {
            break;
        }
        let mut v = 0usize;
        loop {
            let old = colors[v];
            let new = if (old as usize) + 1 == k { 0 } else { old + 1 };
            for &u in &adj[v] {
                let cu = colors[u as usize];
                if cu == old {
                    h -= 1;
                }
                if cu == new {
                    h += 1;
                }
            }
            colors[v] = new;
            if new != 0 {
                break;
            }
            v += 1;
        }
    }
    Ok(out)
}

/// Normalized Gibbs measure mu(sigma) = exp(-beta H)/Z. Guard: k^n <= 1e6.
pub fn gibbs_exact(g: &SimpleGraph, k: usize, beta: f64) -> Result<GibbsTable> {
    let energies = energy_table(g, k)?;
    let terms: Vec<f64> = energies.iter().map(|&h| -beta * h as f64).collect();
    let log_z = log_sum_exp(&terms);
    let probs = terms.iter().map(|&t| (t - log_z).exp()).collect();
    Ok(GibbsTable {
        k,
        n: g.n(),
        log_z,
        probs,
    })
}
