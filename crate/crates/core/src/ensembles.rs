//! Seeded random generation of the null model G(n, m) and the planted model.

use rand::Rng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{PottsError, Result};
use crate::model::{ColorAssignment, ModelParams, SimpleGraph};
use crate::numeric::{pair_count, pair_unrank};

/// Reproducible RNG stream addressed by (master_seed, stream_id). Identical
/// coordinates reproduce identical draws; distinct stream ids are derived by
/// splitmix-style hashing so replica order does not matter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> Pcg64 {
        let mut sid = self.stream_id;
        let mut state = self.master_seed ^ splitmix64(&mut sid);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        rand::SeedableRng::from_seed(seed)
    }

    /// Child stream; hashing keeps (parent, index) pairs collision-resistant.
    pub fn substream(&self, index: u64) -> Self {
        let mut state = self.master_seed;
        let a = splitmix64(&mut state);
        let mut state2 = a ^ self.stream_id;
        let derived = splitmix64(&mut state2);
        Self {
            master_seed: derived,
            stream_id: index,
        }
    }
}

/// Planted-model output: the assignment drawn first, the graph drawn around
/// it, and the edge probabilities actually used.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantedSample {
    pub graph: SimpleGraph,
    pub sigma_hat: ColorAssignment,
    pub p1: f64,
    pub p2: f64,
}

/// Probabilities of the planted model: p2 = dk/(n(k - c_beta)) for
/// bichromatic pairs and p1 = p2 exp(-beta) for monochromatic ones.
pub fn planted_probabilities(params: &ModelParams) -> (f64, f64) {
    let p2 = params.d * params.k as f64 / (params.n as f64 * (params.k as f64 - params.c_beta()));
    let p1 = p2 * (-params.beta).exp();
    (p1, p2)
}

/// Uniform sample from all m-subsets of the vertex pairs, via a partial
/// Fisher-Yates shuffle over pair ranks (exact, no rejection).
pub fn sample_gnm(params: &ModelParams, stream: &SeededStream) -> Result<SimpleGraph> {
    let n = params.n;
    let m = params.edge_count();
    let total = pair_count(n);
    if m > total {
        return Err(PottsError::InvalidParameter(format!(
            "m = {m} exceeds C({n}, 2) = {total}"
        )));
    }
    let mut rng = stream.rng();
    let mut replacements: HashMap<u64, u64> = HashMap::new();
    let mut edges = Vec::with_capacity(m as usize);
    for i in 0..m {
        let j = rng.random_range(i..total);
        let vj = replacements.get(&j).copied().unwrap_or(j);
        let vi = replacements.get(&i).copied().unwrap_or(i);
        replacements.insert(j, vi);
        let (u, v) = pair_unrank(n, vj);
        edges.push((u as u32, v as u32));
    }
    SimpleGraph::new(n, edges)
}

/// PM1 alone: a uniform assignment \[n\] -> \[k\].
pub fn sample_uniform_assignment(params: &ModelParams, rng: &mut Pcg64) -> ColorAssignment {
    let colors = (0..params.n)
        .map(|_| rng.random_range(0..params.k) as u8)
        .collect();
    ColorAssignment::new(colors, params.k).expect("uniform colors are valid")
}

/// Full planted model: PM1 assignment, then every monochromatic pair kept
/// with p1 and every bichromatic pair with p2, independently.
pub fn sample_planted(params: &ModelParams, stream: &SeededStream) -> Result<PlantedSample> {
    let mut rng = stream.rng();
    let sigma_hat = sample_uniform_assignment(params, &mut rng);
    plant_graph(params, sigma_hat, &mut rng)
}

/// Edge-planting step alone, conditioned on a fixed assignment.
pub fn sample_planted_with_assignment(
    params: &ModelParams,
    sigma_hat: &ColorAssignment,
    stream: &SeededStream,
) -> Result<PlantedSample> {
    if sigma_hat.n() != params.n || sigma_hat.k() != params.k {
        return Err(PottsError::DimensionMismatch(
            "assignment does not match params".into(),
        ));
    }
    let mut rng = stream.rng();
    plant_graph(params, sigma_hat.clone(), &mut rng)
}

fn plant_graph(
    params: &ModelParams,
    sigma_hat: ColorAssignment,
    rng: &mut Pcg64,
) -> Result<PlantedSample> {
    let (p1, p2) = planted_probabilities(params);
    if p2 >= 1.0 {
        return Err(PottsError::InvalidParameter(format!(
            "p2 = {p2} >= 1; increase n relative to d and k"
        )));
    }
    let k = params.k;
    let mut classes: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (v, &c) in sigma_hat.colors().iter().enumerate() {
        classes[c as usize].push(v as u32);
    }

    let mut edges = Vec::new();
    // monochromatic pairs, class by class
    for class in &classes {
        let s = class.len();
        for rank in bernoulli_subset(pair_count(s), p1, rng) {
            let (a, b) = pair_unrank(s, rank);
            edges.push((class[a], class[b]));
        }
    }
    // bichromatic pairs, one class pair at a time
    for i in 0..k {
        for j in (i + 1)..k {
            let (si, sj) = (classes[i].len() as u64, classes[j].len() as u64);
            for rank in bernoulli_subset(si * sj, p2, rng) {
                let a = classes[i][(rank / sj) as usize];
                let b = classes[j][(rank % sj) as usize];
                edges.push((a, b));
            }
        }
    }
    let graph = SimpleGraph::new(params.n, edges)?;
    Ok(PlantedSample {
        graph,
        sigma_hat,
        p1,
        p2,
    })
}

/// Indices of an iid Bernoulli(p) subset of 0..total, generated by geometric
/// skips so the cost is proportional to the number of successes.
fn bernoulli_subset(total: u64, p: f64, rng: &mut Pcg64) -> Vec<u64> {
    let mut out = Vec::new();
    if total == 0 || p <= 0.0 {
        return out;
    }
    let ln_q = (1.0 - p).ln();
    let mut pos: u64 = 0;
    loop {
        let u: f64 = rng.random();
        // skip ~ Geometric(p): number of failures before the next success
        let skip = ((1.0 - u).ln() / ln_q).floor();
        if !skip.is_finite() || pos as f64 + skip >= total as f64 {
            break;
        }
        pos += skip as u64;
        if pos >= total {
            break;
        }
        out.push(pos);
        pos += 1;
        if pos >= total {
            break;
        }
    }
    out
}

/// A planted sample conditioned on the assignment being balanced, with the
/// number of PM1 draws it took.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalancedPlantedSample {
    pub sample: PlantedSample,
    pub attempts: u64,
}

/// Rejection-samples PM1 until the assignment is balanced, then plants the
/// graph once. Balance probability decays like n^-((k-1)/2), so size
/// `max_tries` accordingly.
pub fn condition_on_balanced(
    params: &ModelParams,
    stream: &SeededStream,
    max_tries: u64,
) -> Result<BalancedPlantedSample> {
    if max_tries < 1 {
        return Err(PottsError::InvalidParameter(
            "max_tries must be >= 1".into(),
        ));
    }
    let mut rng = stream.rng();
    for attempt in 1..=max_tries {
        let sigma = sample_uniform_assignment(params, &mut rng);
        if sigma.is_balanced() {
            let sample = plant_graph(params, sigma, &mut rng)?;
            return Ok(BalancedPlantedSample {
                sample,
                attempts: attempt,
            });
        }
    }
    Err(PottsError::SamplingFailed(format!(
        "no balanced assignment in {max_tries} tries at n = {}, k = {}",
        params.n, params.k
    )))
}
