//! Exact first and second moments of Z and Z_bal over G(n, m), the annealed
//! free-energy formula, and the overlap-resolved pair sums.
//!
//! All moment arithmetic happens in log space; every summand is positive, so
//! log-sum-exp with compensated summation is exact to a few ulps.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_gnm, SeededStream};
use crate::error::{PottsError, Result};
use crate::exact::z_enumerate;
use crate::model::{forb, joint_counts, ColorAssignment, ModelParams};
use crate::numeric::{pair_count, LnFactorialTable, NeumaierSum, StreamingLse};

/// Comparison of an exact log-moment against a Monte Carlo estimate of the
/// same quantity. `mc_estimate` and `mc_std_error` are on the linear scale.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub exact_value: f64,
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    pub n_samples: usize,
}

/// Pairwise refinement of the complete-graph pair classes for two
/// assignments: `a` pairs monochromatic under both, `b` under sigma only,
/// `c` under tau only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairClassCounts {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub total: u64,
}

impl PairClassCounts {
    pub fn from_assignments(sigma: &ColorAssignment, tau: &ColorAssignment) -> Result<Self> {
        if sigma.n() != tau.n() || sigma.k() != tau.k() {
            return Err(PottsError::DimensionMismatch(
                "pair class counts need assignments on the same [n] and [k]".into(),
            ));
        }
        let joint = joint_counts(sigma.colors(), tau.colors(), sigma.k());
        let a: u64 = joint.iter().map(|&c| pair_count(c as usize)).sum();
        let fs = forb(sigma);
        let ft = forb(tau);
        Ok(Self {
            a,
            b: fs - a,
            c: ft - a,
            total: pair_count(sigma.n()),
        })
    }
}

/// Per-vertex annealed free energy: ln k + (d/2) ln(1 - c_beta/k).
pub fn annealed_free_energy(params: &ModelParams) -> f64 {
    let k = params.k as f64;
    (k).ln() + params.d / 2.0 * (1.0 - params.c_beta() / k).ln()
}

/// ln of the first-moment reference scale k^n (1 - c_beta/k)^m.
pub fn first_moment_reference(params: &ModelParams) -> f64 {
    let k = params.k as f64;
    params.n as f64 * k.ln() + params.edge_count() as f64 * (1.0 - params.c_beta() / k).ln()
}

/// ln E[exp(-beta H_G(sigma))] for a fixed assignment, as an exact
/// hypergeometric sum over the number of monochromatic edges drawn.
pub fn exact_first_moment_sigma(sigma: &ColorAssignment, params: &ModelParams) -> Result<f64> {
    if sigma.n() != params.n {
        return Err(PottsError::DimensionMismatch(
            "assignment size differs from params.n".into(),
        ));
    }
    let table = factorial_table(params)?;
    Ok(log_first_moment_from_forb(forb(sigma), params, &table))
}

fn factorial_table(params: &ModelParams) -> Result<LnFactorialTable> {
    let n_pairs = pair_count(params.n);
    if params.edge_count() > n_pairs {
        return Err(PottsError::InvalidParameter(format!(
            "m = {} exceeds C(n, 2) = {n_pairs}",
            params.edge_count()
        )));
    }
    if n_pairs > 4_000_000 {
        return Err(PottsError::CapacityExceeded(format!(
            "factorial table for C(n, 2) = {n_pairs} entries"
        )));
    }
    Ok(LnFactorialTable::new(n_pairs as usize))
}

fn log_first_moment_from_forb(f: u64, params: &ModelParams, table: &LnFactorialTable) -> f64 {
    let n_pairs = pair_count(params.n);
    let m = params.edge_count();
    let beta = params.beta;
    let (f, n_pairs, m) = (f as usize, n_pairs as usize, m as usize);
    let ln_denom = table.ln_binomial(n_pairs, m);
    let lo = m.saturating_sub(n_pairs - f);
    let hi = m.min(f);
    let mut lse = StreamingLse::new();
    for m1 in lo..=hi {
        lse.add(
            -beta * m1 as f64 + table.ln_binomial(f, m1) + table.ln_binomial(n_pairs - f, m - m1)
                - ln_denom,
        );
    }
    lse.value()
}

/// Exact ln E\[Z\] (or ln E\[Z_bal\]) together with its ratio against the
/// reference scale k^n (1 - c_beta/k)^m, which stays Theta(1) along n-grids.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FirstMomentValue {
    pub log_moment: f64,
    pub log_reference: f64,
    pub ratio: f64,
    pub balanced: bool,
}

/// Exact first moment by class-size-profile aggregation: assignments are
/// grouped by the multiset of their class sizes, which determines Forb.
pub fn exact_first_moment_total(
    params: &ModelParams,
    restrict_balanced: bool,
) -> Result<FirstMomentValue> {
    if params.n > 400 {
        return Err(PottsError::CapacityExceeded(format!(
            "profile aggregation at n = {}",
            params.n
        )));
    }
    let table = factorial_table(params)?;
    let fact_small = LnFactorialTable::new(params.n.max(params.k));
    let target = params.n as f64 / params.k as f64;
    let slack = (params.n as f64).sqrt();

    let mut lse = StreamingLse::new();
    let mut profile = vec![0usize; params.k];
    enumerate_profiles(params.n, params.k, params.n, 0, &mut profile, &mut |p| {
        if restrict_balanced && !p.iter().all(|&s| (s as f64 - target).abs() <= slack) {
            return;
        }
        // assignments with this class-size multiset: n!/prod(c_i!) orderings
        // of vertices times k!/prod(mult_s!) color labelings
        let mut ln_count = fact_small.ln_factorial(params.n) + fact_small.ln_factorial(params.k);
        for &c in p.iter() {
            ln_count -= fact_small.ln_factorial(c);
        }
        let mut run = 1usize;
        for i in 1..=p.len() {
            if i < p.len() && p[i] == p[i - 1] {
                run += 1;
            } else {
                ln_count -= fact_small.ln_factorial(run);
                run = 1;
            }
        }
        let f: u64 = p.iter().map(|&s| pair_count(s)).sum();
        lse.add(ln_count + log_first_moment_from_forb(f, params, &table));
    });
    let log_moment = lse.value();
    let log_reference = first_moment_reference(params);
    Ok(FirstMomentValue {
        log_moment,
        log_reference,
        ratio: (log_moment - log_reference).exp(),
        balanced: restrict_balanced,
    })
}

/// Nonincreasing compositions of `n` into exactly `k` parts (class-size
/// profiles).
fn enumerate_profiles(
    remaining: usize,
    slots: usize,
    cap: usize,
    idx: usize,
    profile: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if slots == 1 {
        if remaining <= cap {
            profile[idx] = remaining;
            f(profile);
        }
        return;
    }
    // largest part first keeps profiles nonincreasing
    let lo = remaining.div_ceil(slots);
    for part in lo..=remaining.min(cap) {
        profile[idx] = part;
        enumerate_profiles(remaining - part, slots - 1, part, idx + 1, profile, f);
    }
}

/// Monte Carlo estimate of E\[Z\] over sampled G(n, m), compared against the
/// exact profile sum. Estimates are on the linear scale.
pub fn first_moment_mc(
    params: &ModelParams,
    samples: usize,
    stream: &SeededStream,
) -> Result<MomentReport> {
    if samples < 2 {
        return Err(PottsError::InvalidParameter(
            "need at least 2 samples".into(),
        ));
    }
    let exact = exact_first_moment_total(params, false)?;
    let mut sum = NeumaierSum::new();
    let mut sum_sq = NeumaierSum::new();
    for i in 0..samples {
        let g = sample_gnm(params, &stream.substream(i as u64))?;
        let z = z_enumerate(&g, params.k, params.beta)?.log_z.exp();
        sum.add(z);
        sum_sq.add(z * z);
    }
    let mean = sum.value() / samples as f64;
    let var = (sum_sq.value() / samples as f64 - mean * mean).max(0.0) * samples as f64
        / (samples as f64 - 1.0);
    Ok(MomentReport {
        exact_value: exact.log_moment,
        mc_estimate: mean,
        mc_std_error: (var / samples as f64).sqrt(),
        n_samples: samples,
    })
}

/// ln E[exp(-beta (H(sigma) + H(tau)))]: the four-category hypergeometric sum
/// over how many drawn edges fall in each pair class.
pub fn exact_pair_moment(
    sigma: &ColorAssignment,
    tau: &ColorAssignment,
    params: &ModelParams,
) -> Result<f64> {
    let counts = PairClassCounts::from_assignments(sigma, tau)?;
    if sigma.n() != params.n {
        return Err(PottsError::DimensionMismatch(
            "assignment size differs from params.n".into(),
        ));
    }
    let table = factorial_table(params)?;
    let m = params.edge_count();
    let comp_bound = (m + 1).pow(3);
    if comp_bound > 20_000_000 {
        return Err(PottsError::CapacityExceeded(format!(
            "pair moment with {comp_bound} compositions"
        )));
    }
    Ok(log_pair_moment_from_counts(&counts, params, &table))
}

fn log_pair_moment_from_counts(
    counts: &PairClassCounts,
    params: &ModelParams,
    table: &LnFactorialTable,
) -> f64 {
    let (a, b, c) = (counts.a as usize, counts.b as usize, counts.c as usize);
    let n_pairs = counts.total as usize;
    let rest = n_pairs - a - b - c;
    let m = params.edge_count() as usize;
    let beta = params.beta;
    let ln_denom = table.ln_binomial(n_pairs, m);
    let mut lse = StreamingLse::new();
    for ma in 0..=m.min(a) {
        let la = table.ln_binomial(a, ma);
        for mb in 0..=(m - ma).min(b) {
            let lb = table.ln_binomial(b, mb);
            let lo = (m - ma - mb).saturating_sub(rest);
            let hi = (m - ma - mb).min(c);
            for mc in lo..=hi {
                let m_rest = m - ma - mb - mc;
                lse.add(
                    -beta * (2 * ma + mb + mc) as f64
                        + la
                        + lb
                        + table.ln_binomial(c, mc)
                        + table.ln_binomial(rest, m_rest)
                        - ln_denom,
                );
            }
        }
    }
    lse.value()
}

/// One overlap group of the balanced second moment: the joint count matrix
/// (whose (k/n)-multiple is the overlap), how many pairs realize it, and the
/// group's ln E\[Z_rho,bal\] contribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlapGroup {
    pub joint_counts: Vec<u32>,
    pub pair_count: f64,
    pub log_moment: f64,
}

/// The overlap-resolved balanced second moment: E\[Z_bal^2\] split over all
/// realizable overlap matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondMomentByOverlap {
    pub k: usize,
    pub n: usize,
    pub groups: BTreeMap<Vec<u32>, OverlapGroup>,
    pub log_total: f64,
}

/// Groups E\[Z_bal^2\] by overlap matrix. Pairs (sigma, tau) are never
/// enumerated: each joint count matrix with balanced marginals is one overlap
/// class, realized by exactly n!/prod(n_ij!) pairs, all with the same pair
/// moment.
pub fn second_moment_by_overlap(params: &ModelParams) -> Result<SecondMomentByOverlap> {
    let k = params.k;
    let n = params.n;
    if k > 4 || n > 40 {
        return Err(PottsError::CapacityExceeded(format!(
            "overlap grouping at k = {k}, n = {n}"
        )));
    }
    let table = factorial_table(params)?;
    let fact_small = LnFactorialTable::new(n);
    let (lo, hi) = balance_window(n, k);
    let n_pairs = pair_count(n);

    let mut groups = BTreeMap::new();
    let mut lse = StreamingLse::new();
    let mut moment_cache: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut cells = vec![0u32; k * k];
    enumerate_balanced_joint_matrices(n, k, lo, hi, &mut cells, &mut |m| {
        let mut ln_pairs = fact_small.ln_factorial(n);
        for &v in m.iter() {
            ln_pairs -= fact_small.ln_factorial(v as usize);
        }
        let a: u64 = m.iter().map(|&v| pair_count(v as usize)).sum();
        let forb_rows: u64 = (0..k)
            .map(|i| pair_count(m[i * k..(i + 1) * k].iter().map(|&v| v as usize).sum()))
            .sum();
        let forb_cols: u64 = (0..k)
            .map(|j| pair_count((0..k).map(|i| m[i * k + j] as usize).sum()))
            .sum();
        let counts = PairClassCounts {
            a,
            b: forb_rows - a,
            c: forb_cols - a,
            total: n_pairs,
        };
        let moment = *moment_cache
            .entry((counts.a, counts.b, counts.c))
            .or_insert_with(|| log_pair_moment_from_counts(&counts, params, &table));
        let log_group = ln_pairs + moment;
        lse.add(log_group);
        groups.insert(
            m.to_vec(),
            OverlapGroup {
                joint_counts: m.to_vec(),
                pair_count: ln_pairs.exp(),
                log_moment: log_group,
            },
        );
    });
    Ok(SecondMomentByOverlap {
        k,
        n,
        groups,
        log_total: lse.value(),
    })
}

/// Integer window \[lo, hi\] of class sizes satisfying |s - n/k| <= sqrt(n).
pub(crate) fn balance_window(n: usize, k: usize) -> (u32, u32) {
    let target = n as f64 / k as f64;
    let slack = (n as f64).sqrt();
    let ok = |s: usize| (s as f64 - target).abs() <= slack;
    let lo = (0..=n).find(|&s| ok(s)).expect("window nonempty") as u32;
    let hi = (0..=n).rev().find(|&s| ok(s)).expect("window nonempty") as u32;
    (lo, hi)
}

/// All k x k nonnegative integer matrices with total n whose row and column
/// sums lie in \[lo, hi\].
fn enumerate_balanced_joint_matrices(
    n: usize,
    k: usize,
    lo: u32,
    hi: u32,
    cells: &mut Vec<u32>,
    f: &mut impl FnMut(&[u32]),
) {
    let mut col_sums = vec![0u32; k];
    recurse_cells(n as u32, k, lo, hi, 0, 0, &mut col_sums, cells, f);
}

#[allow(clippy::too_many_arguments)]
fn recurse_cells(
    n: u32,
    k: usize,
    lo: u32,
    hi: u32,
    cell: usize,
    used: u32,
    col_sums: &mut Vec<u32>,
    cells: &mut Vec<u32>,
    f: &mut impl FnMut(&[u32]),
) {
    if cell == k * k {
        if used == n {
            f(cells);
        }
        return;
    }
    let i = cell / k;
    let j = cell % k;
    let row_partial: u32 = cells[i * k..i * k + j].iter().sum();
    let rows_left_after = (k - 1 - i) as u32;

    // value bounds from the row window, the column window and the total
    let mut v_hi = hi - row_partial;
    v_hi = v_hi.min(hi - col_sums[j]).min(n - used);
    let mut v_lo = 0u32;
    if j == k - 1 {
        // closing the row: row sum must land in [lo, hi]
        v_lo = lo.saturating_sub(row_partial);
        // and the remaining rows must be able to absorb what is left
        let rest_after_row = n - used; // before placing v
                                       // v must leave between rows_left_after*lo and rows_left_after*hi
        let min_rest = rows_left_after * lo;
        let max_rest = rows_left_after * hi;
        v_lo = v_lo.max(rest_after_row.saturating_sub(max_rest));
        if rest_after_row < min_rest {
            return;
        }
        v_hi = v_hi.min(rest_after_row - min_rest);
    }
    if i == k - 1 {
        // last row: this cell closes column j
        v_lo = v_lo.max(lo.saturating_sub(col_sums[j]));
    }
    if v_lo > v_hi {
        return;
    }
    for v in v_lo..=v_hi {
        cells[cell] = v;
        col_sums[j] += v;
        recurse_cells(n, k, lo, hi, cell + 1, used + v, col_sums, cells, f);
        col_sums[j] -= v;
    }
    cells[cell] = 0;
}

/// All balanced assignments \[n\] -> \[k\], by exhaustive filter. Guard k^n.
pub fn balanced_assignments(n: usize, k: usize) -> Result<Vec<ColorAssignment>> {
    let states = (k as u128).saturating_pow(n as u32);
    if states > 20_000_000 {
        return Err(PottsError::CapacityExceeded(format!(
            "balanced enumeration over k^n = {states}"
        )));
    }
    let mut out = Vec::new();
    let mut colors = vec![0u8; n];
    loop {
        let asg = ColorAssignment::new(colors.clone(), k).expect("valid colors");
        if asg.is_balanced() {
            out.push(asg);
        }
        // odometer
        let mut v = 0;
        loop {
            if v == n {
                return Ok(out);
            }
            if (colors[v] as usize) + 1 == k {
                colors[v] = 0;
                v += 1;
            } else {
                colors[v] += 1;
                break;
            }
        }
    }
}

/// ln E\[Z_bal^2\] by explicit enumeration of balanced pairs; the independent
/// route the overlap grouping is checked against.
pub fn direct_second_moment_balanced(params: &ModelParams) -> Result<f64> {
    let assignments = balanced_assignments(params.n, params.k)?;
    if assignments.len() > 3000 {
        return Err(PottsError::CapacityExceeded(format!(
            "direct pair sum over {}^2 pairs",
            assignments.len()
        )));
    }
    let table = factorial_table(params)?;
    let n_pairs = pair_count(params.n);
    let forbs: Vec<u64> = assignments.iter().map(forb).collect();
    let mut cache: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut lse = StreamingLse::new();
    for (si, sigma) in assignments.iter().enumerate() {
        for (ti, tau) in assignments.iter().enumerate() {
            let joint = joint_counts(sigma.colors(), tau.colors(), params.k);
            let a: u64 = joint.iter().map(|&c| pair_count(c as usize)).sum();
            let counts = PairClassCounts {
                a,
                b: forbs[si] - a,
                c: forbs[ti] - a,
                total: n_pairs,
            };
            let v = *cache
                .entry((counts.a, counts.b, counts.c))
                .or_insert_with(|| log_pair_moment_from_counts(&counts, params, &table));
            lse.add(v);
        }
    }
    Ok(lse.value())
}
