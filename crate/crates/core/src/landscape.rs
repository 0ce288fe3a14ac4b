//! The overlap-landscape function f_{d,beta} over stochastic matrices, its
//! analytic gradients, the special comparison matrices and row surgeries, and
//! multistart projected-gradient ascent over S, D and the separable subset of
//! D.

use rand::Rng;
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::entropy_raw;
use crate::error::{PottsError, Result};
use crate::matrix::{MatrixKind, StochasticMatrix};

/// Entries are clamped at this floor inside logarithms; the entropy gradient
/// blowing up near zero is what keeps ascent iterates off the boundary.
pub const LOG_FLOOR: f64 = 1e-12;

pub const PG_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 10_000;
pub const DYKSTRA_TOL: f64 = 1e-13;
pub const DYKSTRA_MAX_SWEEPS: usize = 100_000;

/// Landscape coordinates (k, d, beta) plus the effective separability gap.
/// kappa_eff = min(ln^20(k)/k, kappa_cap); the cap (default 0.25) keeps the
/// forbidden band (0.51, 1 - kappa_eff) nonempty at desk-scale k.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LandscapeParams {
    pub k: usize,
    pub d: f64,
    pub beta: f64,
    pub kappa_cap: f64,
}

impl LandscapeParams {
    pub fn new(k: usize, d: f64, beta: f64) -> Result<Self> {
        Self::with_kappa_cap(k, d, beta, 0.25)
    }

    pub fn with_kappa_cap(k: usize, d: f64, beta: f64, kappa_cap: f64) -> Result<Self> {
        if k < 2 {
            return Err(PottsError::InvalidParameter(format!(
                "k = {k}, need k >= 2"
            )));
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(PottsError::InvalidParameter(format!("d = {d}, need d > 0")));
        }
        if beta < 0.0 || !beta.is_finite() {
            return Err(PottsError::InvalidParameter(format!("beta = {beta}")));
        }
        if kappa_cap <= 0.0 || kappa_cap >= 0.49 || kappa_cap.is_nan() {
            return Err(PottsError::InvalidParameter(format!(
                "kappa_cap = {kappa_cap} outside (0, 0.49)"
            )));
        }
        Ok(Self {
            k,
            d,
            beta,
            kappa_cap,
        })
    }

    pub fn c_beta(&self) -> f64 {
        -(-self.beta).exp_m1()
    }

    pub fn kappa_eff(&self) -> f64 {
        let ln_k = (self.k as f64).ln();
        (ln_k.powi(20) / self.k as f64).min(self.kappa_cap)
    }
}

// ---------------------------------------------------------------------------
// f, energy and gradients
// ---------------------------------------------------------------------------

fn energy_argument(k: f64, c: f64, frob_sq: f64) -> f64 {
    1.0 - 2.0 * c / k + frob_sq * c * c / (k * k)
}

pub(crate) fn f_raw(k: usize, entries: &[f64], p: &LandscapeParams) -> f64 {
    entropy_term_raw(k, entries) + energy_raw(k, entries, p)
}

fn entropy_term_raw(k: usize, entries: &[f64]) -> f64 {
    let kf = k as f64;
    let scaled: Vec<f64> = entries.iter().map(|e| e / kf).collect();
    entropy_raw(&scaled)
}

fn energy_raw(k: usize, entries: &[f64], p: &LandscapeParams) -> f64 {
    let frob_sq: f64 = entries.iter().map(|e| e * e).sum();
    let c = p.c_beta();
    p.d / 2.0 * energy_argument(k as f64, c, frob_sq).ln()
}

/// f_{d,beta}(rho) = H(k^-1 rho) + (d/2) ln[1 - (2/k) c + (|rho|_2^2/k^2) c^2].
/// Any nonnegative matrix is accepted; 0 ln 0 = 0.
pub fn f_eval(rho: &StochasticMatrix, p: &LandscapeParams) -> f64 {
    f_raw(rho.k(), rho.entries(), p)
}

/// f on raw entries, for finite-difference probes at points that are not
/// exactly stochastic.
pub fn f_eval_raw(k: usize, entries: &[f64], p: &LandscapeParams) -> f64 {
    f_raw(k, entries, p)
}

/// The energy term alone.
pub fn energy_eval(rho: &StochasticMatrix, p: &LandscapeParams) -> f64 {
    energy_raw(rho.k(), rho.entries(), p)
}

/// Gradient of the per-row entropy term (1/k) sum_i H(rho_i): entry (i, j) is
/// (1/k)(-1 - ln rho_ij). Differs from the gradient of the full entropy term
/// H(k^-1 rho) by the constant ln(k)/k in every coordinate, which projections
/// onto stochastic domains annihilate.
pub fn grad_row_entropy(rho: &StochasticMatrix) -> Vec<f64> {
    let k = rho.k() as f64;
    rho.entries()
        .iter()
        .map(|&e| (-1.0 - e.max(LOG_FLOOR).ln()) / k)
        .collect()
}

/// Gradient of the energy term: (d/k^2) c^2 rho_ij / (1 - (2/k)c + |rho|^2 c^2/k^2).
pub fn grad_energy(rho: &StochasticMatrix, p: &LandscapeParams) -> Vec<f64> {
    grad_energy_raw(rho.k(), rho.entries(), p)
}

fn grad_energy_raw(k: usize, entries: &[f64], p: &LandscapeParams) -> Vec<f64> {
    let kf = k as f64;
    let c = p.c_beta();
    let frob_sq: f64 = entries.iter().map(|e| e * e).sum();
    let denom = energy_argument(kf, c, frob_sq);
    let scale = p.d / (kf * kf) * c * c / denom;
    entries.iter().map(|&e| scale * e).collect()
}

/// Full Euclidean gradient of f_eval, validated against central differences.
pub fn grad_f(rho: &StochasticMatrix, p: &LandscapeParams) -> Vec<f64> {
    grad_f_raw(rho.k(), rho.entries(), p)
}

fn grad_f_raw(k: usize, entries: &[f64], p: &LandscapeParams) -> Vec<f64> {
    let kf = k as f64;
    let ln_k = kf.ln();
    let mut g = grad_energy_raw(k, entries, p);
    for (gi, &e) in g.iter_mut().zip(entries) {
        *gi += (ln_k - 1.0 - e.max(LOG_FLOOR).ln()) / kf;
    }
    g
}

// ---------------------------------------------------------------------------
// special matrices
// ---------------------------------------------------------------------------

/// The barycenter: every entry 1/k.
pub fn make_rho_bar(k: usize) -> StochasticMatrix {
    StochasticMatrix::doubly_stochastic(k, vec![1.0 / k as f64; k * k])
        .expect("barycenter is doubly stochastic")
}

/// Top s rows equal to the identity, remaining k - s rows uniform. Row sums
/// are 1 for every s; column sums are 1 only for s = 0 and s = k, so the
/// intermediate matrices are tagged row-stochastic.
pub fn make_rho_s(k: usize, s: usize) -> Result<StochasticMatrix> {
    if s > k {
        return Err(PottsError::InvalidParameter(format!("s = {s} > k = {k}")));
    }
    let mut entries = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            entries[i * k + j] = if i < s {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            } else {
                1.0 / k as f64
            };
        }
    }
    if s == 0 || s == k {
        StochasticMatrix::doubly_stochastic(k, entries)
    } else {
        StochasticMatrix::row_stochastic(k, entries)
    }
}

/// (1 - 1/k) Id + (1/k^2) * all-ones: diagonal 1 - 1/k + 1/k^2, off-diagonal
/// 1/k^2. Doubly stochastic, fully stable.
pub fn make_rho_stable(k: usize) -> StochasticMatrix {
    let kf = k as f64;
    let off = 1.0 / (kf * kf);
    let diag = 1.0 - 1.0 / kf + off;
    let mut entries = vec![off; k * k];
    for i in 0..k {
        entries[i * k + i] = diag;
    }
    StochasticMatrix::doubly_stochastic(k, entries).expect("rho_stable is doubly stochastic")
}

// ---------------------------------------------------------------------------
// xi
// ---------------------------------------------------------------------------

/// xi(eps) = k^(2 eps / k) (1/eps - 1/k) on (0, k/2).
pub fn xi_eval(eps: f64, k: usize) -> Result<f64> {
    let kf = k as f64;
    if !(eps > 0.0 && eps < kf / 2.0) {
        return Err(PottsError::InvalidParameter(format!(
            "eps = {eps} outside (0, {})",
            kf / 2.0
        )));
    }
    Ok(kf.powf(2.0 * eps / kf) * (1.0 / eps - 1.0 / kf))
}

/// Location of xi's interior minimum: mu = (k/2)(1 - sqrt(1 - 2/ln k)).
/// Real only once ln k > 2; we require k >= 9.
pub fn xi_min_location(k: usize) -> Result<f64> {
    if k < 9 {
        return Err(PottsError::InvalidParameter(format!(
            "k = {k} too small: need 2/ln k < 1"
        )));
    }
    let kf = k as f64;
    Ok(kf / 2.0 * (1.0 - (1.0 - 2.0 / kf.ln()).sqrt()))
}

// ---------------------------------------------------------------------------
// row surgeries
// ---------------------------------------------------------------------------

/// Averages the entries of row `i` over the column set `J`, leaving the rest
/// of the matrix (and the row sum) unchanged.
pub fn smooth_rows(rho: &StochasticMatrix, i: usize, j_set: &[usize]) -> Result<StochasticMatrix> {
    let k = rho.k();
    if j_set.is_empty() {
        return Err(PottsError::InvalidParameter("empty column set".into()));
    }
    if i >= k || j_set.iter().any(|&j| j >= k) {
        return Err(PottsError::InvalidParameter(
            "row or column out of range".into(),
        ));
    }
    let mut entries = rho.entries().to_vec();
    let avg: f64 = j_set.iter().map(|&j| entries[i * k + j]).sum::<f64>() / j_set.len() as f64;
    for &j in j_set {
        entries[i * k + j] = avg;
    }
    rebuild_with_kind(rho.kind(), k, entries)
}

/// Replaces row `i` by the uniform row (1/k, ..., 1/k).
pub fn flatten_row(rho: &StochasticMatrix, i: usize) -> Result<StochasticMatrix> {
    let k = rho.k();
    if i >= k {
        return Err(PottsError::InvalidParameter("row out of range".into()));
    }
    let mut entries = rho.entries().to_vec();
    for j in 0..k {
        entries[i * k + j] = 1.0 / k as f64;
    }
    rebuild_with_kind(rho.kind(), k, entries)
}

/// Replaces row `i` by the stabilized row: diagonal entry 1 - alpha, all
/// off-diagonal entries alpha/(k-1).
pub fn stabilize_row(rho: &StochasticMatrix, i: usize, alpha: f64) -> Result<StochasticMatrix> {
    let k = rho.k();
    if i >= k {
        return Err(PottsError::InvalidParameter("row out of range".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PottsError::InvalidParameter(format!(
            "alpha = {alpha} outside [0, 1]"
        )));
    }
    let mut entries = rho.entries().to_vec();
    for j in 0..k {
        entries[i * k + j] = if i == j {
            1.0 - alpha
        } else {
            alpha / (k - 1) as f64
        };
    }
    rebuild_with_kind(rho.kind(), k, entries)
}

fn rebuild_with_kind(kind: MatrixKind, k: usize, entries: Vec<f64>) -> Result<StochasticMatrix> {
    match kind {
        // row surgeries preserve row sums but generally break column sums
        MatrixKind::RowStochastic | MatrixKind::DoublyStochastic => {
            StochasticMatrix::row_stochastic(k, entries)
        }
        MatrixKind::OverlapEmpirical => Err(PottsError::InvalidParameter(
            "row surgery on an empirical overlap".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// projections
// ---------------------------------------------------------------------------

/// Euclidean projection of a vector onto the probability simplex
/// (Held/Wolfe/Crowder pivot form).
pub(crate) fn project_simplex(v: &[f64], out: &mut [f64]) {
    let n = v.len();
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cssv = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &u) in sorted.iter().enumerate() {
        cssv += u;
        let t = (cssv - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    debug_assert!(rho > 0);
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    // enforce an exact unit sum against roundoff
    let s: f64 = out.iter().sum();
    if s != 1.0 && s > 0.0 {
        let mass: f64 = 1.0 / s;
        for o in out.iter_mut() {
            *o *= mass;
        }
    }
    let _ = n;
}

fn project_rows_raw(k: usize, m: &[f64], out: &mut [f64]) {
    for i in 0..k {
        let (src, dst) = (&m[i * k..(i + 1) * k], &mut out[i * k..(i + 1) * k]);
        project_simplex(src, dst);
    }
}

fn project_cols_raw(k: usize, m: &[f64], out: &mut [f64]) {
    let mut col = vec![0.0; k];
    let mut proj = vec![0.0; k];
    for j in 0..k {
        for i in 0..k {
            col[i] = m[i * k + j];
        }
        project_simplex(&col, &mut proj);
        for i in 0..k {
            out[i * k + j] = proj[i];
        }
    }
}

/// Exact per-row Euclidean simplex projection.
pub fn project_row_stochastic(k: usize, m: &[f64]) -> Result<StochasticMatrix> {
    if m.len() != k * k {
        return Err(PottsError::DimensionMismatch("matrix size".into()));
    }
    let mut out = vec![0.0; k * k];
    project_rows_raw(k, m, &mut out);
    StochasticMatrix::row_stochastic(k, out)
}

/// Euclidean projection onto the doubly-stochastic polytope by Dykstra's
/// alternating projections between the row and column simplex products.
pub fn project_doubly_stochastic(k: usize, m: &[f64]) -> Result<StochasticMatrix> {
    if m.len() != k * k {
        return Err(PottsError::DimensionMismatch("matrix size".into()));
    }
    let out = dykstra_raw(k, m)?;
    StochasticMatrix::doubly_stochastic(k, out)
}

fn dykstra_raw(k: usize, m: &[f64]) -> Result<Vec<f64>> {
    dykstra_boxed(k, m, None)
}

/// Per-entry interval constraints realizing one convex piece of the
/// separable set: every entry is confined to [0, 0.51] or to [1-kappa, 1].
#[derive(Clone)]
struct SideBoxes {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SideBoxes {
    /// The nearer-endpoint rule: entries at or below the band midpoint are
    /// boxed into [0, 0.51], entries above it into [1-kappa, 1].
    fn nearest(entries: &[f64], kappa_eff: f64) -> Self {
        let band_hi = 1.0 - kappa_eff;
        let mid = (0.51 + band_hi) / 2.0;
        let mut lo = vec![0.0; entries.len()];
        let mut hi = vec![0.0; entries.len()];
        for (i, &e) in entries.iter().enumerate() {
            if e <= mid {
                lo[i] = 0.0;
                hi[i] = 0.51;
            } else {
                lo[i] = band_hi;
                hi[i] = 1.0;
            }
        }
        Self { lo, hi }
    }

    fn project(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..v.len() {
            out[i] = v[i].clamp(self.lo[i], self.hi[i]);
        }
    }
}

/// Dykstra's alternating projections onto the row simplices, the column
/// simplices, and (optionally) per-entry boxes. With boxes present the limit
/// is the Euclidean projection onto one convex piece of the separable set.
fn dykstra_boxed(k: usize, m: &[f64], boxes: Option<&SideBoxes>) -> Result<Vec<f64>> {
    let len = k * k;
    let mut x = m.to_vec();
    let mut p = vec![0.0; len];
    let mut q = vec![0.0; len];
    let mut r = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut work = vec![0.0; len];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        for i in 0..len {
            work[i] = x[i] + p[i];
        }
        project_rows_raw(k, &work, &mut y);
        for i in 0..len {
            p[i] = work[i] - y[i];
            work[i] = y[i] + q[i];
        }
        project_cols_raw(k, &work, &mut x);
        for i in 0..len {
            q[i] = work[i] - x[i];
        }
        if let Some(b) = boxes {
            // third set: per-entry boxes; x lands exactly inside them
            for i in 0..len {
                work[i] = x[i] + r[i];
            }
            b.project(&work, &mut x);
            for i in 0..len {
                r[i] = work[i] - x[i];
            }
        }
        // x satisfies the final set exactly; watch the residual of the others
        let mut row_dev: f64 = 0.0;
        for i in 0..k {
            let s: f64 = x[i * k..(i + 1) * k].iter().sum();
            row_dev = row_dev.max((s - 1.0).abs());
        }
        let mut col_dev: f64 = 0.0;
        if boxes.is_some() {
            for j in 0..k {
                let s: f64 = (0..k).map(|i| x[i * k + j]).sum();
                col_dev = col_dev.max((s - 1.0).abs());
            }
        }
        if row_dev <= DYKSTRA_TOL && col_dev <= DYKSTRA_TOL {
            return Ok(x);
        }
    }
    let dev: f64 = (0..k)
        .map(|i| (x[i * k..(i + 1) * k].iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
        .max(
            (0..k)
                .map(|j| ((0..k).map(|i| x[i * k + j]).sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max),
        );
    Err(PottsError::NumericFailure(format!(
        "Dykstra projection stalled with residual {dev:.3e} after {DYKSTRA_MAX_SWEEPS} sweeps"
    )))
}

// ---------------------------------------------------------------------------
// stability and separability
// ---------------------------------------------------------------------------

/// s-stability index: the number of entries exceeding 0.51.
pub fn stability_index(rho: &StochasticMatrix) -> usize {
    rho.entries().iter().filter(|&&e| e > 0.51).count()
}

/// Separable iff no entry lies in the open band (0.51, 1 - kappa_eff).
pub fn is_separable_matrix(rho: &StochasticMatrix, kappa_eff: f64) -> bool {
    rho.entries()
        .iter()
        .all(|&e| !(e > 0.51 && e < 1.0 - kappa_eff))
}

// ---------------------------------------------------------------------------
// monotonicity derivatives
// ---------------------------------------------------------------------------

/// Analytic d f_{d,beta}(rho) / d beta:
/// -(d/2) e^-beta [2/k - 2 c |rho|^2 / k^2] / [1 - (2/k)c + (|rho|^2/k^2)c^2].
/// Strictly negative on S for beta > 0, and minimal at the barycenter
/// (|rho|^2 = 1) for fixed beta. Validated against central differences.
pub fn monotonicity_check_beta(rho: &StochasticMatrix, p: &LandscapeParams) -> f64 {
    let kf = rho.k() as f64;
    let c = p.c_beta();
    let frob_sq = rho.frobenius_sq();
    let numer = 2.0 / kf - frob_sq * 2.0 * c / (kf * kf);
    -(p.d / 2.0) * (-p.beta).exp() * numer / energy_argument(kf, c, frob_sq)
}

/// Analytic d f_{d,infinity}(rho) / d d = (1/2) ln(1 - 2/k + |rho|^2/k^2):
/// the zero-temperature energy slope per unit degree, strictly negative on S.
pub fn monotonicity_check_d(rho: &StochasticMatrix) -> f64 {
    let kf = rho.k() as f64;
    0.5 * (1.0 - 2.0 / kf + rho.frobenius_sq() / (kf * kf)).ln()
}

// ---------------------------------------------------------------------------
// barmax margins
// ---------------------------------------------------------------------------

/// Margins f(rho_bar) - f(rho_s) for s = 1..k and f(rho_bar) - f(rho_stable).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarmaxReport {
    pub k: usize,
    pub d: f64,
    pub beta: f64,
    pub f_bar: f64,
    /// margin for s = i + 1
    pub margins: Vec<f64>,
    pub stable_margin: f64,
}

pub fn verify_barmax(k: usize, d: f64, beta: f64) -> Result<BarmaxReport> {
    if k < 3 {
        return Err(PottsError::InvalidParameter(format!(
            "k = {k}, need k >= 3"
        )));
    }
    let p = LandscapeParams::new(k, d, beta)?;
    let f_bar = f_eval(&make_rho_bar(k), &p);
    let margins = (1..=k)
        .map(|s| Ok(f_bar - f_eval(&make_rho_s(k, s)?, &p)))
        .collect::<Result<Vec<f64>>>()?;
    let stable_margin = f_bar - f_eval(&make_rho_stable(k), &p);
    Ok(BarmaxReport {
        k,
        d,
        beta,
        f_bar,
        margins,
        stable_margin,
    })
}

// ---------------------------------------------------------------------------
// multistart projected ascent
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Row-stochastic matrices.
    S,
    /// Doubly-stochastic matrices.
    D,
    /// Doubly-stochastic matrices with no entry in (0.51, 1 - kappa_eff).
    DSep,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub f: f64,
    pub pg_norm: f64,
}

/// Outcome of a multistart maximization: the best terminal point, its value,
/// the projected-gradient norm there, and which start won.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LandscapeResult {
    pub maximizer: StochasticMatrix,
    pub f_value: f64,
    pub pg_norm: f64,
    pub stability: usize,
    pub start_label: String,
    pub iterations: usize,
    /// labels of every terminal point within 1e-9 of the best value
    pub near_optimal_starts: Vec<String>,
    pub trace: Vec<TracePoint>,
}

struct AscentOutcome {
    x: Vec<f64>,
    f: f64,
    pg_norm: f64,
    iterations: usize,
    converged: bool,
    label: String,
    trace: Vec<TracePoint>,
}

fn project_domain(domain: Domain, k: usize, m: &[f64], kappa_eff: f64) -> Result<Vec<f64>> {
    match domain {
        Domain::S => {
            let mut out = vec![0.0; k * k];
            project_rows_raw(k, m, &mut out);
            Ok(out)
        }
        Domain::D => dykstra_raw(k, m),
        Domain::DSep => {
            // project onto D first; entries the projection leaves inside the
            // forbidden band pick their nearer endpoint, which selects one
            // convex piece of the separable set, and a boxed Dykstra pass
            // projects onto that piece so the iterate stays feasible
            let x = dykstra_raw(k, m)?;
            let band_hi = 1.0 - kappa_eff;
            if x.iter().all(|&e| !(e > 0.51 && e < band_hi)) {
                return Ok(x);
            }
            let sides = SideBoxes::nearest(&x, kappa_eff);
            dykstra_boxed(k, m, Some(&sides))
        }
    }
}

fn frob_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn ascend(
    start: &[f64],
    label: &str,
    k: usize,
    p: &LandscapeParams,
    domain: Domain,
) -> Result<AscentOutcome> {
    let kappa = p.kappa_eff();
    let mut x = project_domain(domain, k, start, kappa)?;
    let mut fx = f_raw(k, &x, p);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut pg_norm = f64::INFINITY;

    while iterations < MAX_ITERS {
        let g = grad_f_raw(k, &x, p);
        let ahead: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        let full_step = project_domain(domain, k, &ahead, kappa)?;
        pg_norm = frob_dist(&full_step, &x);
        trace.push(TracePoint {
            iteration: iterations,
            f: fx,
            pg_norm,
        });
        if pg_norm < PG_TOL {
            converged = true;
            break;
        }

        // backtracking line search along the projected arc (Armijo 1e-4)
        let mut t = 1.0;
        let mut candidate = full_step;
        let mut accepted = false;
        loop {
            let fc = f_raw(k, &candidate, p);
            let dir_gain: f64 = g
                .iter()
                .zip(candidate.iter().zip(&x))
                .map(|(gi, (ci, xi))| gi * (ci - xi))
                .sum();
            if fc >= fx + 1e-4 * dir_gain && fc > fx - 1e-15 {
                x = candidate;
                fx = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
            if t < 1e-16 {
                break;
            }
            let ahead_t: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            candidate = project_domain(domain, k, &ahead_t, kappa)?;
        }
        iterations += 1;
        if !accepted {
            // no ascent direction left at line-search resolution
            converged = pg_norm < PG_TOL * 10.0;
            break;
        }
    }
    Ok(AscentOutcome {
        f: fx,
        pg_norm,
        iterations,
        converged,
        label: label.to_string(),
        trace,
        x,
    })
}

fn standard_starts(k: usize, rng: &mut Pcg64, random_starts: usize) -> Vec<(String, Vec<f64>)> {
    let mut starts = Vec::new();
    starts.push(("rho_bar".to_string(), make_rho_bar(k).entries().to_vec()));
    for s in 1..=k {
        starts.push((
            format!("rho_s_{s}"),
            make_rho_s(k, s).expect("s <= k").entries().to_vec(),
        ));
    }
    starts.push((
        "rho_stable".to_string(),
        make_rho_stable(k).entries().to_vec(),
    ));
    for r in 0..random_starts {
        let raw: Vec<f64> = (0..k * k).map(|_| rng.random::<f64>()).collect();
        starts.push((format!("random_{r:02}"), raw));
    }
    starts
}

/// Heuristic canonical form under row/column permutations: sort rows
/// lexicographically, then columns. Deterministic, used only for tie-breaks.
fn canonical_entries(k: usize, entries: &[f64]) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = (0..k)
        .map(|i| entries[i * k..(i + 1) * k].to_vec())
        .collect();
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..k).map(|i| rows[i][j]).collect())
        .collect();
    cols.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = vec![0.0; k * k];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..k {
            out[i * k + j] = col[i];
        }
    }
    out
}

/// Multistart projected-gradient ascent of f over the chosen domain.
/// Starts: rho_bar, rho_1..rho_k, rho_stable and `random_starts` uniform
/// matrices (projected). Convergence at projected-gradient norm < 1e-8.
pub fn maximize_f(
    p: &LandscapeParams,
    domain: Domain,
    rng: &mut Pcg64,
    random_starts: usize,
) -> Result<LandscapeResult> {
    let k = p.k;
    let starts = standard_starts(k, rng, random_starts);
    let outcomes: Vec<Result<AscentOutcome>> = starts
        .par_iter()
        .map(|(label, start)| ascend(start, label, k, p, domain))
        .collect();
    let mut outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    // deterministic winner: best f, ties broken by canonical entries then label
    let best_f = outcomes
        .iter()
        .map(|o| o.f)
        .fold(f64::NEG_INFINITY, f64::max);
    let near: Vec<usize> = (0..outcomes.len())
        .filter(|&i| outcomes[i].f >= best_f - 1e-9)
        .collect();
    let near_labels: Vec<String> = near.iter().map(|&i| outcomes[i].label.clone()).collect();
    let winner_idx = *near
        .iter()
        .min_by(|&&a, &&b| {
            let ca = canonical_entries(k, &outcomes[a].x);
            let cb = canonical_entries(k, &outcomes[b].x);
            ca.partial_cmp(&cb)
                .unwrap()
                .then_with(|| outcomes[a].label.cmp(&outcomes[b].label))
        })
        .expect("at least one start");

    if !outcomes.iter().any(|o| o.converged) {
        return Err(PottsError::OptimizationFailure {
            best_f,
            detail: format!(
                "no start reached pg_norm < {PG_TOL}; best was {}",
                outcomes[winner_idx].label
            ),
        });
    }

    let winner = outcomes.swap_remove(winner_idx);
    let kind = match domain {
        Domain::S => MatrixKind::RowStochastic,
        Domain::D | Domain::DSep => MatrixKind::DoublyStochastic,
    };
    let maximizer = StochasticMatrix::from_projected(k, winner.x, kind);
    let stability = stability_index(&maximizer);
    Ok(LandscapeResult {
        f_value: winner.f,
        pg_norm: winner.pg_norm,
        stability,
        start_label: winner.label,
        iterations: winner.iterations,
        near_optimal_starts: near_labels,
        trace: winner.trace,
        maximizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::SeededStream;

    fn bar_f(k: usize, d: f64, beta: f64) -> f64 {
        let p = LandscapeParams::new(k, d, beta).unwrap();
        f_eval(&make_rho_bar(k), &p)
    }

    #[test]
    fn f_at_barycenter_closed_form() {
        for (k, d, beta) in [(3usize, 2.0, 1.0), (5, 9.0, 1.6), (10, 40.0, 2.3)] {
            let p = LandscapeParams::new(k, d, beta).unwrap();
            let kf = k as f64;
            let expected = 2.0 * kf.ln() + d * (1.0 - p.c_beta() / kf).ln();
            assert!((bar_f(k, d, beta) - expected).abs() < 1e-12);
        }
        // k=3, d=2, beta=ln 3: f(rho_bar) = 2 ln(7/3)
        let v = bar_f(3, 2.0, 3f64.ln());
        assert!((v - 2.0 * (7.0f64 / 3.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn f_at_beta_zero_is_pure_entropy() {
        let p = LandscapeParams::new(4, 3.0, 0.0).unwrap();
        let rho = make_rho_stable(4);
        let scaled: Vec<f64> = rho.entries().iter().map(|e| e / 4.0).collect();
        assert_eq!(f_eval(&rho, &p), entropy_raw(&scaled));
    }

    #[test]
    fn energy_reference_values() {
        let (k, d, beta) = (4usize, 3.0, 1.2);
        let p = LandscapeParams::new(k, d, beta).unwrap();
        let kf = k as f64;
        // at rho_bar: E = d ln(1 - c/k)
        let e_bar = energy_eval(&make_rho_bar(k), &p);
        assert!((e_bar - d * (1.0 - p.c_beta() / kf).ln()).abs() < 1e-13);
        // identity matrix: |rho|^2 = k
        let ident = make_rho_s(k, k).unwrap();
        assert!((ident.frobenius_sq() - kf).abs() < 1e-13);
        // rho_stable: |rho|^2 = k(k-1)/k^4 + k (1 - 1/k + 1/k^2)^2
        let stable = make_rho_stable(k);
        let expected =
            kf * (kf - 1.0) / kf.powi(4) + kf * (1.0 - 1.0 / kf + 1.0 / (kf * kf)).powi(2);
        assert!((stable.frobenius_sq() - expected).abs() < 1e-13);
        // rho_s: |rho|^2 = (k-s)/k + s
        for s in 0..=k {
            let rs = make_rho_s(k, s).unwrap();
            let want = (k - s) as f64 / kf + s as f64;
            assert!((rs.frobenius_sq() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn special_matrices_shape_and_stability() {
        let k = 5;
        assert_eq!(make_rho_s(k, 0).unwrap(), make_rho_bar(k));
        let ident = make_rho_s(k, k).unwrap();
        for i in 0..k {
            for j in 0..k {
                assert_eq!(ident.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(make_rho_s(k, k + 1).is_err());
        // row sums of rho_stable are exactly 1
        let stable = make_rho_stable(k);
        assert!(stable.max_row_sum_deviation() < 1e-15);
        assert_eq!(stability_index(&make_rho_bar(k)), 0);
        for s in 1..=k {
            assert_eq!(stability_index(&make_rho_s(k, s).unwrap()), s);
        }
        assert_eq!(stability_index(&make_rho_stable(k)), k);
        // rho_s for 0 < s < k is row- but not column-stochastic
        let r2 = make_rho_s(k, 2).unwrap();
        assert_eq!(r2.kind(), MatrixKind::RowStochastic);
        assert!(r2.max_col_sum_deviation() > 0.1);
    }

    #[test]
    fn gradient_pieces_at_barycenter() {
        let (k, d, beta) = (3usize, 2.0, 3f64.ln());
        let p = LandscapeParams::new(k, d, beta).unwrap();
        let bar = make_rho_bar(k);
        let kf = k as f64;
        // row-entropy part: (ln k - 1)/k in every coordinate
        for &g in &grad_row_entropy(&bar) {
            assert!((g - (kf.ln() - 1.0) / kf).abs() < 1e-13);
        }
        // energy part: (d c^2 / k^3) / (1 - c/k)^2
        let c = p.c_beta();
        let expected = d * c * c / kf.powi(3) / (1.0 - c / kf).powi(2);
        for &g in &grad_energy(&bar, &p) {
            assert!((g - expected).abs() < 1e-13);
        }
        // full gradient = row entropy + ln k / k + energy
        let ge = grad_energy(&bar, &p);
        let gh = grad_row_entropy(&bar);
        for ((gf, ge), gh) in grad_f(&bar, &p).iter().zip(&ge).zip(&gh) {
            assert!((gf - (gh + kf.ln() / kf + ge)).abs() < 1e-14);
        }
    }

    #[test]
    fn xi_reference_values() {
        // k = 10: mu = 5 (1 - sqrt(1 - 2/ln 10))
        let mu = xi_min_location(10).unwrap();
        let expected = 5.0 * (1.0 - (1.0f64 - 2.0 / 10f64.ln()).sqrt());
        assert!((mu - expected).abs() < 1e-15);
        assert!((mu - 3.18747).abs() < 1e-4);
        // k = 10, eps = 1: 10^0.2 * 0.9
        let v = xi_eval(1.0, 10).unwrap();
        assert!((v - 10f64.powf(0.2) * 0.9).abs() < 1e-14);
        assert!((v - 1.42640).abs() < 1e-4);
        assert!(xi_eval(0.0, 10).is_err());
        assert!(xi_eval(5.0, 10).is_err());
        assert!(xi_min_location(8).is_err());
    }

    #[test]
    fn xi_monotone_split_at_mu() {
        for k in [10usize, 50, 200] {
            let mu = xi_min_location(k).unwrap();
            let grid = 400;
            let mut prev = f64::INFINITY;
            for i in 1..grid {
                let eps = mu * i as f64 / grid as f64;
                let v = xi_eval(eps, k).unwrap();
                assert!(v < prev, "xi not decreasing at eps={eps}, k={k}");
                prev = v;
            }
            let mut prev = xi_eval(mu, k).unwrap();
            for i in 1..grid {
                let eps = mu + (k as f64 / 2.0 - mu) * i as f64 / grid as f64;
                if eps >= k as f64 / 2.0 {
                    break;
                }
                let v = xi_eval(eps, k).unwrap();
                assert!(v > prev, "xi not increasing at eps={eps}, k={k}");
                prev = v;
            }
        }
    }

    #[test]
    fn surgeries_reference_behavior() {
        let k = 4;
        let rho = StochasticMatrix::row_stochastic(
            k,
            vec![
                0.7, 0.1, 0.1, 0.1, //
                0.25, 0.25, 0.25, 0.25, //
                0.4, 0.3, 0.2, 0.1, //
                0.1, 0.2, 0.3, 0.4,
            ],
        )
        .unwrap();
        // smoothing the whole row makes it uniform at (row sum)/k
        let smoothed = smooth_rows(&rho, 0, &[0, 1, 2, 3]).unwrap();
        for j in 0..k {
            assert!((smoothed.get(0, j) - 0.25).abs() < 1e-15);
        }
        // a row already constant on J is a fixed point
        let fixed = smooth_rows(&rho, 1, &[1, 2]).unwrap();
        assert_eq!(fixed.entries(), rho.entries());
        // row sums preserved
        let partial = smooth_rows(&rho, 2, &[0, 3]).unwrap();
        assert!((partial.row(2).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(smooth_rows(&rho, 0, &[]).is_err());

        // flatten on rho_bar is a fixed point
        let bar = make_rho_bar(k);
        assert_eq!(flatten_row(&bar, 2).unwrap().entries(), bar.entries());
        // stabilize_row sets the diagonal to 1 - alpha
        let st = stabilize_row(&rho, 1, 1.0 / k as f64).unwrap();
        assert!((st.get(1, 1) - (1.0 - 0.25)).abs() < 1e-15);
        assert!((st.get(1, 0) - 0.25 / 3.0).abs() < 1e-15);
        assert!(stabilize_row(&rho, 1, 1.5).is_err());
    }

    #[test]
    fn projections_reference_behavior() {
        let k = 3;
        // a point already in the polytope projects to itself
        let bar = make_rho_bar(k);
        let proj = project_doubly_stochastic(k, bar.entries()).unwrap();
        assert!(proj.max_abs_diff(&bar) < 1e-14);
        // all-ones projects to the barycenter
        let ones = vec![1.0; k * k];
        let proj = project_doubly_stochastic(k, &ones).unwrap();
        assert!(proj.max_abs_diff(&bar) < 1e-12);
        // row projection of a row-stochastic matrix is itself
        let rho = StochasticMatrix::row_stochastic(
            k,
            vec![
                0.5,
                0.3,
                0.2,
                0.1,
                0.8,
                0.1,
                1.0 / 3.0,
                1.0 / 3.0,
                1.0 / 3.0,
            ],
        )
        .unwrap();
        let proj = project_row_stochastic(k, rho.entries()).unwrap();
        assert!(proj.max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn projection_nonexpansive_around_barycenter() {
        let k = 4;
        let bar = make_rho_bar(k);
        let mut rng = SeededStream::new(7, 0).rng();
        for _ in 0..50 {
            let noise: Vec<f64> = (0..k * k).map(|_| rng.random::<f64>() - 0.5).collect();
            let scale = 0.3;
            let perturbed: Vec<f64> = bar
                .entries()
                .iter()
                .zip(&noise)
                .map(|(b, n)| b + scale * n)
                .collect();
            let proj = project_doubly_stochastic(k, &perturbed).unwrap();
            let d_proj = proj.max_abs_diff(&bar);
            let d_raw: f64 = noise
                .iter()
                .map(|n| (scale * n) * (scale * n))
                .sum::<f64>()
                .sqrt();
            // ||P(x) - P(bar)||_F <= ||x - bar||_F, and max <= frobenius
            assert!(d_proj <= d_raw + 1e-12);
        }
    }

    #[test]
    fn separability_checks() {
        let k = 4;
        let kappa = 0.25;
        assert!(is_separable_matrix(&make_rho_bar(k), kappa));
        assert!(is_separable_matrix(&make_rho_s(k, k).unwrap(), kappa));
        // an entry at 0.7 falls inside (0.51, 0.75)
        let m = StochasticMatrix::row_stochastic(
            k,
            vec![
                0.7, 0.1, 0.1, 0.1, //
                0.25, 0.25, 0.25, 0.25, //
                0.25, 0.25, 0.25, 0.25, //
                0.25, 0.25, 0.25, 0.25,
            ],
        )
        .unwrap();
        assert!(!is_separable_matrix(&m, kappa));
        // k = 2: 1/k = 0.5 <= 0.51, so the barycenter is 0-stable
        assert_eq!(stability_index(&make_rho_bar(2)), 0);
    }

    #[test]
    fn monotonicity_closed_form_at_barycenter() {
        let (k, d, beta) = (5usize, 8.0, 1.3);
        let p = LandscapeParams::new(k, d, beta).unwrap();
        let kf = k as f64;
        let c = p.c_beta();
        let bar = make_rho_bar(k);
        // |rho_bar|^2 = 1
        let expected =
            -(d / 2.0) * (-beta).exp() * (2.0 / kf - 2.0 * c / (kf * kf)) / (1.0 - c / kf).powi(2);
        assert!((monotonicity_check_beta(&bar, &p) - expected).abs() < 1e-13);
        assert!(monotonicity_check_beta(&bar, &p) < 0.0);
        assert!(monotonicity_check_d(&bar) < 0.0);
    }

    #[test]
    fn barmax_reference_margins() {
        // s = 0 would be a zero margin by construction
        let k = 10;
        let d = (2 * k - 1) as f64 * (k as f64).ln() - 2.0;
        let beta = (k as f64).ln();
        let report = verify_barmax(k, d, beta).unwrap();
        assert_eq!(report.margins.len(), k);
        for (i, &m) in report.margins.iter().enumerate() {
            assert!(m > 0.0, "margin at s = {} is {m}", i + 1);
        }
        assert!(report.stable_margin > 0.0);
        let p = LandscapeParams::new(k, d, beta).unwrap();
        let zero_margin = report.f_bar - f_eval(&make_rho_s(k, 0).unwrap(), &p);
        assert!(zero_margin.abs() < 1e-14);
    }

    #[test]
    fn kappa_eff_capped() {
        let p = LandscapeParams::new(20, 50.0, 3.0).unwrap();
        assert_eq!(p.kappa_eff(), 0.25);
        assert!(0.51 < 1.0 - p.kappa_eff());
        // small k with ln k < 1: the raw formula is below any cap
        let p2 = LandscapeParams::new(2, 1.0, 1.0).unwrap();
        assert!(p2.kappa_eff() < 1e-3);
        assert!(p2.kappa_eff() > 0.0);
    }

    #[test]
    fn maximize_easy_region_small() {
        // k=3, d=2 < 2(k-1)ln(k-1), beta=1: the maximizer over S is rho_bar
        let p = LandscapeParams::new(3, 2.0, 1.0).unwrap();
        let mut rng = SeededStream::new(99, 0).rng();
        let res = maximize_f(&p, Domain::S, &mut rng, 8).unwrap();
        let bar = make_rho_bar(3);
        assert!(
            res.maximizer.max_abs_diff(&bar) < 1e-4,
            "dist {}",
            res.maximizer.max_abs_diff(&bar)
        );
        assert!((res.f_value - f_eval(&bar, &p)).abs() < 1e-9);
        assert!(res.pg_norm < PG_TOL);

        // over D the value can never fall below f(rho_bar): it is a start
        let mut rng = SeededStream::new(99, 1).rng();
        let res_d = maximize_f(&p, Domain::D, &mut rng, 8).unwrap();
        assert!(res_d.f_value >= f_eval(&bar, &p) - 1e-12);
    }
}
