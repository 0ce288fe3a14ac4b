//! Glauber/Metropolis dynamics for the Gibbs measure, mean-energy estimation,
//! and thermodynamic integration of ln Z along a beta grid.

use rand::Rng;
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_gnm, sample_uniform_assignment, SeededStream};
use crate::error::{PottsError, Result};
use crate::exact::{hamiltonian_histogram, mean_energy_from_histogram, z_enumerate};
use crate::model::{hamiltonian, ColorAssignment, ModelParams, SimpleGraph};
use crate::moments::annealed_free_energy;
use crate::numeric::NeumaierSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    /// Heat bath: resample the vertex color from its conditional Gibbs
    /// distribution. No tuning knobs.
    Glauber,
    /// Uniform color proposal accepted with min(1, e^(-beta dH)).
    Metropolis,
}

/// Chain state: the assignment, the incrementally maintained monochromatic
/// edge count, and how many single-vertex steps have been taken.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainState {
    pub assignment: ColorAssignment,
    pub mono_edges: u64,
    pub step_count: u64,
}

/// Single-site dynamics bound to one graph. A chain is strictly sequential;
/// run replicas on separate chains with separate streams.
pub struct Chain {
    adj: Vec<Vec<u32>>,
    n: usize,
    k: usize,
    beta: f64,
    kernel: Kernel,
    state: ChainState,
    /// exp(-beta j) for j = 0..=max_degree
    boltzmann: Vec<f64>,
    scratch_counts: Vec<u32>,
}

impl Chain {
    pub fn new(
        g: &SimpleGraph,
        params: &ModelParams,
        kernel: Kernel,
        rng: &mut Pcg64,
    ) -> Result<Self> {
        let assignment = sample_uniform_assignment(params, rng);
        Self::from_assignment(g, params, kernel, assignment)
    }

    pub fn from_assignment(
        g: &SimpleGraph,
        params: &ModelParams,
        kernel: Kernel,
        assignment: ColorAssignment,
    ) -> Result<Self> {
        if assignment.n() != g.n() {
            return Err(PottsError::DimensionMismatch(
                "assignment and graph sizes differ".into(),
            ));
        }
        if assignment.k() != params.k {
            return Err(PottsError::DimensionMismatch("assignment k differs".into()));
        }
        let mono = hamiltonian(g, &assignment)?;
        let adj = g.adjacency();
        let max_deg = adj.iter().map(Vec::len).max().unwrap_or(0);
        let mut chain = Self {
            adj,
            n: g.n(),
            k: params.k,
            beta: params.beta,
            kernel,
            state: ChainState {
                assignment,
                mono_edges: mono,
                step_count: 0,
            },
            boltzmann: Vec::new(),
            scratch_counts: vec![0; params.k],
        };
        chain.rebuild_boltzmann(max_deg);
        Ok(chain)
    }

    fn rebuild_boltzmann(&mut self, max_deg: usize) {
        self.boltzmann = (0..=max_deg)
            .map(|j| (-self.beta * j as f64).exp())
            .collect();
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta;
        let max_deg = self.boltzmann.len().saturating_sub(1);
        self.rebuild_boltzmann(max_deg);
    }

    /// One single-vertex update.
    pub fn step(&mut self, rng: &mut Pcg64) {
        let v = rng.random_range(0..self.n);
        let counts = &mut self.scratch_counts;
        counts.fill(0);
        let colors = self.state.assignment.colors();
        for &u in &self.adj[v] {
            counts[colors[u as usize] as usize] += 1;
        }
        let old = colors[v] as usize;
        let new = match self.kernel {
            Kernel::Glauber => {
                // conditional distribution proportional to exp(-beta * count)
                let total: f64 = counts.iter().map(|&cnt| self.boltzmann[cnt as usize]).sum();
                let mut target = rng.random::<f64>() * total;
                let mut chosen = self.k - 1;
                for (c, &cnt) in counts.iter().enumerate() {
                    target -= self.boltzmann[cnt as usize];
                    if target <= 0.0 {
                        chosen = c;
                        break;
                    }
                }
                chosen
            }
            Kernel::Metropolis => {
                let proposal = rng.random_range(0..self.k);
                let delta = counts[proposal] as i64 - counts[old] as i64;
                if delta <= 0 || rng.random::<f64>() < (-self.beta * delta as f64).exp() {
                    proposal
                } else {
                    old
                }
            }
        };
        if new != old {
            self.state.mono_edges =
                (self.state.mono_edges as i64 + counts[new] as i64 - counts[old] as i64) as u64;
            self.state.assignment.set_color_unchecked(v, new as u8);
        }
        self.state.step_count += 1;
    }

    /// n single-vertex updates.
    pub fn run_sweeps(&mut self, sweeps: usize, rng: &mut Pcg64) {
        for _ in 0..sweeps * self.n {
            self.step(rng);
        }
    }

    /// Confirms the incremental count against a recomputation.
    pub fn audit(&self, g: &SimpleGraph) -> Result<bool> {
        Ok(hamiltonian(g, &self.state.assignment)? == self.state.mono_edges)
    }
}

/// Explicit Glauber transition matrix over all k^n states, for detailed
/// balance checks. Guard: n <= 4.
pub fn glauber_transition_matrix(g: &SimpleGraph, k: usize, beta: f64) -> Result<Vec<Vec<f64>>> {
    let n = g.n();
    if n > 4 {
        return Err(PottsError::CapacityExceeded(format!(
            "transition matrix at n = {n}"
        )));
    }
    let states = (k as u64).pow(n as u32) as usize;
    let adj = g.adjacency();
    let mut t = vec![vec![0.0; states]; states];
    let decode = |mut idx: usize| -> Vec<u8> {
        (0..n)
            .map(|_| {
                let c = (idx % k) as u8;
                idx /= k;
                c
            })
            .collect()
    };
    let encode = |colors: &[u8]| -> usize {
        colors
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * k + c as usize)
    };
    for (x, row) in t.iter_mut().enumerate() {
        let colors = decode(x);
        for v in 0..n {
            let mut counts = vec![0u32; k];
            for &u in &adj[v] {
                counts[colors[u as usize] as usize] += 1;
            }
            let weights: Vec<f64> = counts.iter().map(|&c| (-beta * c as f64).exp()).collect();
            let total: f64 = weights.iter().sum();
            for (c, &w) in weights.iter().enumerate() {
                let mut to = colors.clone();
                to[v] = c as u8;
                row[encode(&to)] += w / total / n as f64;
            }
        }
    }
    Ok(t)
}

/// Burn-in and measurement budget, in sweeps. The default burn-in follows
/// the 100 n sweeps convention.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SamplingBudget {
    pub burn_in_sweeps: usize,
    pub sample_sweeps: usize,
    pub batches: usize,
}

impl SamplingBudget {
    pub fn new(burn_in_sweeps: usize, sample_sweeps: usize) -> Result<Self> {
        let budget = Self {
            burn_in_sweeps,
            sample_sweeps,
            batches: 20,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn default_for(n: usize) -> Self {
        Self {
            burn_in_sweeps: 100 * n,
            sample_sweeps: 200 * n,
            batches: 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batches < 2 || self.sample_sweeps < self.batches {
            return Err(PottsError::InvalidParameter(format!(
                "budget too small: {} sample sweeps across {} batches",
                self.sample_sweeps, self.batches
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub sweeps: usize,
}

/// Time-average of the monochromatic edge count after burn-in, with
/// batch-means error bars. One measurement per sweep.
pub fn estimate_mean_energy(
    g: &SimpleGraph,
    params: &ModelParams,
    budget: &SamplingBudget,
    stream: &SeededStream,
) -> Result<EnergyEstimate> {
    budget.validate()?;
    let mut rng = stream.rng();
    let mut chain = Chain::new(g, params, Kernel::Glauber, &mut rng)?;
    chain.run_sweeps(budget.burn_in_sweeps, &mut rng);
    let estimate = measure_energy(&mut chain, budget, &mut rng);
    debug_assert!(chain.audit(g)?);
    Ok(estimate)
}

fn measure_energy(chain: &mut Chain, budget: &SamplingBudget, rng: &mut Pcg64) -> EnergyEstimate {
    let per_batch = budget.sample_sweeps / budget.batches;
    let mut batch_means = Vec::with_capacity(budget.batches);
    for _ in 0..budget.batches {
        let mut acc = NeumaierSum::new();
        for _ in 0..per_batch {
            chain.run_sweeps(1, rng);
            acc.add(chain.state().mono_edges as f64);
        }
        batch_means.push(acc.value() / per_batch as f64);
    }
    let b = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / (b - 1.0);
    EnergyEstimate {
        mean,
        std_error: (var / b).sqrt(),
        sweeps: per_batch * budget.batches,
    }
}

/// Beta grid for thermodynamic integration: starts at 0, strictly increasing,
/// uniformly spaced, odd point count (composite Simpson).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiSchedule {
    pub beta_grid: Vec<f64>,
    pub sweeps_per_point: usize,
    pub burn_in: usize,
}

impl TiSchedule {
    /// Uniform grid with `points` nodes on [0, beta].
    pub fn uniform(
        beta: f64,
        points: usize,
        sweeps_per_point: usize,
        burn_in: usize,
    ) -> Result<Self> {
        if beta < 0.0 {
            return Err(PottsError::InvalidParameter("negative beta".into()));
        }
        if beta == 0.0 {
            return Ok(Self {
                beta_grid: vec![0.0],
                sweeps_per_point,
                burn_in,
            });
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(PottsError::InvalidParameter(
                "Simpson grid needs an odd point count >= 3".into(),
            ));
        }
        let grid = (0..points)
            .map(|i| beta * i as f64 / (points - 1) as f64)
            .collect();
        Ok(Self {
            beta_grid: grid,
            sweeps_per_point,
            burn_in,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.beta_grid;
        if g.is_empty() || g[0] != 0.0 {
            return Err(PottsError::InvalidParameter("grid must start at 0".into()));
        }
        if g.len() == 1 {
            return Ok(());
        }
        if g.len().is_multiple_of(2) || g.len() < 3 {
            return Err(PottsError::InvalidParameter(
                "Simpson grid needs an odd point count >= 3".into(),
            ));
        }
        let h = g[1] - g[0];
        for w in g.windows(2) {
            if w[1] <= w[0] {
                return Err(PottsError::InvalidParameter("grid not increasing".into()));
            }
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1e-300) {
                return Err(PottsError::InvalidParameter("grid not uniform".into()));
            }
        }
        Ok(())
    }

    fn simpson_weights(&self) -> Vec<f64> {
        let g = &self.beta_grid;
        if g.len() == 1 {
            return vec![0.0];
        }
        let h = g[1] - g[0];
        let mut w = vec![0.0; g.len()];
        let mut seg = 0;
        while seg + 2 < g.len() + 1 {
            w[seg] += h / 3.0;
            w[seg + 1] += 4.0 * h / 3.0;
            w[seg + 2] += h / 3.0;
            seg += 2;
        }
        w
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiEstimate {
    pub log_z: f64,
    pub statistical_error: f64,
    /// Richardson-style difference against the half-resolution grid; absent
    /// when the grid cannot be halved (fewer than 5 points or odd segments).
    pub quadrature_error_estimate: Option<f64>,
    pub mean_energies: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// ln Z(beta) = n ln k - integral of `<H>` d gamma, composite Simpson on the
/// schedule, chain re-equilibrated at each grid point.
pub fn thermo_integrate_lnz(
    g: &SimpleGraph,
    params: &ModelParams,
    schedule: &TiSchedule,
    stream: &SeededStream,
) -> Result<TiEstimate> {
    thermo_integrate_lnz_with_kernel(g, params, schedule, Kernel::Glauber, stream)
}

/// As `thermo_integrate_lnz`, with an explicit update kernel.
pub fn thermo_integrate_lnz_with_kernel(
    g: &SimpleGraph,
    params: &ModelParams,
    schedule: &TiSchedule,
    kernel: Kernel,
    stream: &SeededStream,
) -> Result<TiEstimate> {
    schedule.validate()?;
    let mut rng = stream.rng();
    let p0 = ModelParams::new(params.k, params.n, params.d, 0.0)?;
    let mut chain = Chain::new(g, &p0, kernel, &mut rng)?;
    let budget = SamplingBudget {
        burn_in_sweeps: schedule.burn_in,
        sample_sweeps: schedule.sweeps_per_point,
        batches: 20.min(schedule.sweeps_per_point.max(2)),
    };
    budget.validate()?;

    let mut means = Vec::with_capacity(schedule.beta_grid.len());
    let mut errs = Vec::with_capacity(schedule.beta_grid.len());
    for &beta in &schedule.beta_grid {
        chain.set_beta(beta);
        chain.run_sweeps(schedule.burn_in, &mut rng);
        let est = measure_energy(&mut chain, &budget, &mut rng);
        means.push(est.mean);
        errs.push(est.std_error);
    }
    Ok(assemble_ti(g.n(), params.k, schedule, &means, &errs))
}

/// Deterministic variant: grid energies taken from the exact histogram.
/// Isolates the Simpson quadrature error from Monte Carlo noise.
pub fn thermo_integrate_lnz_exact(
    g: &SimpleGraph,
    k: usize,
    schedule: &TiSchedule,
) -> Result<TiEstimate> {
    schedule.validate()?;
    let hist = hamiltonian_histogram(g, k)?;
    let means: Vec<f64> = schedule
        .beta_grid
        .iter()
        .map(|&b| mean_energy_from_histogram(&hist, b))
        .collect();
    let errs = vec![0.0; means.len()];
    Ok(assemble_ti(g.n(), k, schedule, &means, &errs))
}

fn assemble_ti(
    n: usize,
    k: usize,
    schedule: &TiSchedule,
    means: &[f64],
    errs: &[f64],
) -> TiEstimate {
    let weights = schedule.simpson_weights();
    let mut integral = NeumaierSum::new();
    let mut var = 0.0;
    for ((&w, &m), &e) in weights.iter().zip(means).zip(errs) {
        integral.add(w * m);
        var += (w * e) * (w * e);
    }
    let log_z = n as f64 * (k as f64).ln() - integral.value();

    // halve the grid resolution for a quadrature error estimate
    let quad = if schedule.beta_grid.len() >= 5 && (schedule.beta_grid.len() - 1).is_multiple_of(4)
    {
        let coarse: Vec<f64> = schedule.beta_grid.iter().copied().step_by(2).collect();
        let coarse_means: Vec<f64> = means.iter().copied().step_by(2).collect();
        let cs = TiSchedule {
            beta_grid: coarse,
            sweeps_per_point: schedule.sweeps_per_point,
            burn_in: schedule.burn_in,
        };
        let cw = cs.simpson_weights();
        let coarse_integral: f64 = cw.iter().zip(&coarse_means).map(|(w, m)| w * m).sum();
        Some((integral.value() - coarse_integral).abs() / 15.0)
    } else {
        None
    };
    TiEstimate {
        log_z,
        statistical_error: var.sqrt(),
        quadrature_error_estimate: quad,
        mean_energies: means.to_vec(),
        std_errors: errs.to_vec(),
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum FreeEnergyEstimator {
    /// Exact enumeration of ln Z per replica (small n only).
    Exact,
    /// Thermodynamic integration per replica.
    ThermoIntegration {
        grid_points: usize,
        sweeps_per_point: usize,
        burn_in: usize,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FreeEnergyRow {
    pub n: usize,
    pub replicas: usize,
    /// mean of (1/n) ln Z over sampled graphs
    pub mean: f64,
    /// sample standard deviation of (1/n) ln Z
    pub std: f64,
    pub formula: f64,
    pub gap: f64,
}

/// Estimates (1/n) ln Z over G(n, m) replicas along an n-grid and reports the
/// gap to the annealed formula.
pub fn free_energy_experiment(
    k: usize,
    d: f64,
    beta: f64,
    n_grid: &[usize],
    replicas: usize,
    estimator: FreeEnergyEstimator,
    stream: &SeededStream,
) -> Result<Vec<FreeEnergyRow>> {
    if replicas < 2 {
        return Err(PottsError::InvalidParameter(
            "need at least 2 replicas".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let params = ModelParams::new(k, n, d, beta)?;
        let grid_stream = stream.substream(gi as u64);
        let values: Vec<Result<f64>> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let sub = grid_stream.substream(r as u64);
                let g = sample_gnm(&params, &sub)?;
                let log_z = match estimator {
                    FreeEnergyEstimator::Exact => z_enumerate(&g, k, beta)?.log_z,
                    FreeEnergyEstimator::ThermoIntegration {
                        grid_points,
                        sweeps_per_point,
                        burn_in,
                    } => {
                        let schedule =
                            TiSchedule::uniform(beta, grid_points, sweeps_per_point, burn_in)?;
                        thermo_integrate_lnz(&g, &params, &schedule, &sub.substream(u64::MAX))?
                            .log_z
                    }
                };
                Ok(log_z / n as f64)
            })
            .collect();
        let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
        let mean = values.iter().sum::<f64>() / replicas as f64;
        let var =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (replicas as f64 - 1.0);
        let formula = annealed_free_energy(&params);
        rows.push(FreeEnergyRow {
            n,
            replicas,
            mean,
            std: var.sqrt(),
            formula,
            gap: (mean - formula).abs(),
        });
    }
    Ok(rows)
}
