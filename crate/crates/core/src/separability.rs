//! SEP1/SEP2 predicates, membership in the low-monochromatic set, and
//! empirical separability rates in the planted model.

use serde::{Deserialize, Serialize};

use crate::ensembles::{condition_on_balanced, SeededStream};
use crate::error::{PottsError, Result};
use crate::landscape::LandscapeParams;
use crate::mcmc::{Chain, Kernel};
use crate::model::{overlap_matrix, ColorAssignment, ModelParams, SimpleGraph};
use crate::moments::balanced_assignments;

/// Shared separability configuration. Thresholds are derived on demand so
/// they can never go stale against the params.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SepConfig {
    pub kappa_eff: f64,
}

impl SepConfig {
    pub fn from_params(params: &ModelParams) -> Self {
        let lp = LandscapeParams::new(params.k, params.d, params.beta)
            .expect("valid model params imply valid landscape params");
        Self {
            kappa_eff: lp.kappa_eff(),
        }
    }

    pub fn with_kappa_cap(params: &ModelParams, kappa_cap: f64) -> Result<Self> {
        let lp = LandscapeParams::with_kappa_cap(params.k, params.d, params.beta, kappa_cap)?;
        Ok(Self {
            kappa_eff: lp.kappa_eff(),
        })
    }
}

/// Edge budget per color class: 2 n e^-beta ln(k) / k.
pub fn sep1_threshold(params: &ModelParams) -> f64 {
    2.0 * params.n as f64 * (-params.beta).exp() * (params.k as f64).ln() / params.k as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sep1Report {
    pub pass: bool,
    pub threshold: f64,
    pub class_edge_counts: Vec<u64>,
}

/// SEP1: every color class spans at most the threshold number of edges.
pub fn sep1_check(
    g: &SimpleGraph,
    sigma: &ColorAssignment,
    params: &ModelParams,
) -> Result<Sep1Report> {
    if sigma.n() != g.n() {
        return Err(PottsError::DimensionMismatch(
            "assignment and graph sizes differ".into(),
        ));
    }
    let mut counts = vec![0u64; sigma.k()];
    for &(u, v) in g.edges() {
        let (cu, cv) = (sigma.color(u as usize), sigma.color(v as usize));
        if cu == cv {
            counts[cu as usize] += 1;
        }
    }
    let threshold = sep1_threshold(params);
    let pass = counts.iter().all(|&c| c as f64 <= threshold);
    Ok(Sep1Report {
        pass,
        threshold,
        class_edge_counts: counts,
    })
}

/// Membership filter for the low-monochromatic balanced set: keeps the
/// candidates that are balanced and satisfy SEP1.
pub fn sigma_set_filter(
    g: &SimpleGraph,
    params: &ModelParams,
    candidates: &[ColorAssignment],
) -> Result<Vec<ColorAssignment>> {
    let mut out = Vec::new();
    for c in candidates {
        if c.is_balanced() && sep1_check(g, c, params)?.pass {
            out.push(c.clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sep2Report {
    pub pass: bool,
    pub witnesses_checked: usize,
    /// (witness index, i, j, overlap entry) for every band violation
    pub violations: Vec<(usize, usize, usize, f64)>,
}

/// SEP2 against an explicit witness list: for every witness that itself lies
/// in the low-monochromatic balanced set, no overlap entry with sigma may
/// fall in the open band (0.51, 1 - kappa_eff). A partial check unless the
/// witnesses exhaust the set.
pub fn sep2_check(
    g: &SimpleGraph,
    sigma: &ColorAssignment,
    params: &ModelParams,
    config: &SepConfig,
    witnesses: &[ColorAssignment],
) -> Result<Sep2Report> {
    if !sigma.is_balanced() || !sep1_check(g, sigma, params)?.pass {
        return Err(PottsError::InvalidParameter(
            "sigma must be balanced and satisfy the class-edge budget".into(),
        ));
    }
    let band_hi = 1.0 - config.kappa_eff;
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for (w_idx, tau) in witnesses.iter().enumerate() {
        if !tau.is_balanced() || !sep1_check(g, tau, params)?.pass {
            continue;
        }
        checked += 1;
        let overlap = overlap_matrix(sigma, tau)?;
        for i in 0..sigma.k() {
            for j in 0..sigma.k() {
                let e = overlap.get(i, j);
                if e > 0.51 && e < band_hi {
                    violations.push((w_idx, i, j, e));
                }
            }
        }
    }
    Ok(Sep2Report {
        pass: violations.is_empty(),
        witnesses_checked: checked,
        violations,
    })
}

/// SEP2 with the witness quantifier made exhaustive over all balanced
/// assignments. Only viable at tiny n.
pub fn sep2_check_exhaustive(
    g: &SimpleGraph,
    sigma: &ColorAssignment,
    params: &ModelParams,
    config: &SepConfig,
) -> Result<Sep2Report> {
    let all = balanced_assignments(g.n(), params.k)?;
    sep2_check(g, sigma, params, config, &all)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateInterval {
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval at the given z.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> RateInterval {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    RateInterval {
        rate: p,
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparabilityRateReport {
    pub samples: u64,
    pub sep1_passes: u64,
    pub sep1: RateInterval,
    /// present when witness sampling was requested
    pub sep2: Option<RateInterval>,
    pub sep2_passes: u64,
    pub mean_attempts: f64,
    pub regime_warnings: Vec<String>,
}

/// Options for the empirical separability experiment.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeparabilityOptions {
    /// Glauber-sampled witnesses per sample for the SEP2 side; 0 skips SEP2.
    pub witnesses: usize,
    /// sweeps between harvested witnesses
    pub witness_spacing_sweeps: usize,
    pub max_balance_tries: u64,
}

impl Default for SeparabilityOptions {
    fn default() -> Self {
        Self {
            witnesses: 0,
            witness_spacing_sweeps: 20,
            max_balance_tries: 10_000,
        }
    }
}

/// Fraction of balanced planted samples whose planted assignment passes SEP1
/// (and SEP2 against Glauber-sampled witnesses when requested), with Wilson
/// intervals. A finite-n surrogate: the asymptotic statement it mirrors gives
/// no finite-n bound.
pub fn empirical_separability_rate(
    params: &ModelParams,
    config: &SepConfig,
    samples: u64,
    options: &SeparabilityOptions,
    stream: &SeededStream,
) -> Result<SeparabilityRateReport> {
    if samples == 0 {
        return Err(PottsError::InvalidParameter(
            "samples must be positive".into(),
        ));
    }
    let regime_warnings = regime_warnings(params);

    let results: Vec<Result<(bool, bool, u64)>> = {
        use rayon::prelude::*;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let sub = stream.substream(i);
                let out = condition_on_balanced(params, &sub, options.max_balance_tries)?;
                let sep1 = sep1_check(&out.sample.graph, &out.sample.sigma_hat, params)?;
                let mut sep2_pass = sep1.pass;
                if sep1.pass && options.witnesses > 0 {
                    let witnesses = glauber_witnesses(
                        &out.sample.graph,
                        params,
                        options,
                        &sub.substream(u64::MAX),
                    )?;
                    let rep = sep2_check(
                        &out.sample.graph,
                        &out.sample.sigma_hat,
                        params,
                        config,
                        &witnesses,
                    )?;
                    sep2_pass = rep.pass;
                }
                Ok((sep1.pass, sep2_pass, out.attempts))
            })
            .collect()
    };

    let mut sep1_passes = 0u64;
    let mut sep2_passes = 0u64;
    let mut attempts = 0u64;
    for r in results {
        let (s1, s2, a) = r?;
        sep1_passes += s1 as u64;
        sep2_passes += s2 as u64;
        attempts += a;
    }
    let sep2 = (options.witnesses > 0).then(|| wilson_interval(sep2_passes, samples, 1.96));
    Ok(SeparabilityRateReport {
        samples,
        sep1_passes,
        sep1: wilson_interval(sep1_passes, samples, 1.96),
        sep2,
        sep2_passes,
        mean_attempts: attempts as f64 / samples as f64,
        regime_warnings,
    })
}

fn regime_warnings(params: &ModelParams) -> Vec<String> {
    let mut warnings = Vec::new();
    let kf = params.k as f64;
    let d_lo = 2.0 * (kf - 1.0) * (kf - 1.0).ln();
    let d_hi = (2.0 * kf - 1.0) * kf.ln() - 2.0;
    if params.d < d_lo || params.d > d_hi {
        warnings.push(format!("d = {} outside [{d_lo:.4}, {d_hi:.4}]", params.d));
    }
    if params.beta < kf.ln() {
        warnings.push(format!(
            "beta = {} below ln k = {:.4}",
            params.beta,
            kf.ln()
        ));
    }
    warnings
}

/// Harvests witness assignments from a Glauber chain on the given graph.
fn glauber_witnesses(
    g: &SimpleGraph,
    params: &ModelParams,
    options: &SeparabilityOptions,
    stream: &SeededStream,
) -> Result<Vec<ColorAssignment>> {
    let mut rng = stream.rng();
    let mut chain = Chain::new(g, params, Kernel::Glauber, &mut rng)?;
    let mut out = Vec::with_capacity(options.witnesses);
    chain.run_sweeps(options.witness_spacing_sweeps * 3, &mut rng);
    for _ in 0..options.witnesses {
        chain.run_sweeps(options.witness_spacing_sweeps, &mut rng);
        out.push(chain.state().assignment.clone());
    }
    Ok(out)
}
