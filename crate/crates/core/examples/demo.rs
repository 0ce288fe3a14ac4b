//! Small tour of the library: sample a graph, evaluate the exact oracles,
//! compare against the annealed formula, and maximize the overlap functional.

use potts_core::ensembles::{sample_gnm, SeededStream};
use potts_core::exact::{z_enumerate, z_fk};
use potts_core::landscape::{f_eval, make_rho_bar, maximize_f, Domain, LandscapeParams};
use potts_core::model::ModelParams;
use potts_core::moments::{annealed_free_energy, exact_first_moment_total};

fn main() {
    let params = ModelParams::new(3, 12, 2.0, 1.0).expect("valid parameters");
    let stream = SeededStream::new(42, 0);

    let g = sample_gnm(&params, &stream).expect("m <= C(n,2)");
    println!("G(n={}, m={}) sampled with seed 42", g.n(), g.edge_count());

    let z = z_enumerate(&g, params.k, params.beta).unwrap();
    let z_cluster = z_fk(&g, params.k, params.beta).unwrap();
    println!(
        "ln Z = {:.10} (enumeration) vs {:.10} (random-cluster expansion)",
        z.log_z, z_cluster.log_z
    );
    println!(
        "per-vertex: {:.6}; annealed formula: {:.6}",
        z.log_z / params.n as f64,
        annealed_free_energy(&params)
    );

    let first = exact_first_moment_total(&params, false).unwrap();
    println!(
        "ln E[Z] = {:.6}, ratio to k^n (1 - c/k)^m: {:.4}",
        first.log_moment, first.ratio
    );

    let lp = LandscapeParams::new(params.k, params.d, params.beta).unwrap();
    let mut rng = stream.substream(1).rng();
    let result = maximize_f(&lp, Domain::D, &mut rng, 10).unwrap();
    println!(
        "max f over doubly-stochastic matrices: {:.8} (f at barycenter: {:.8}), won by {}",
        result.f_value,
        f_eval(&make_rho_bar(params.k), &lp),
        result.start_label
    );
}
