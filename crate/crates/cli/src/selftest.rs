//! Packaged oracle suite: quick closed-form checks runnable by users and CI
//! through `potts selftest`.

use potts_core::ensembles::{planted_probabilities, sample_gnm, SeededStream};
use potts_core::entropy::{binary_entropy, entropy_vec};
use potts_core::exact::{z_enumerate, z_fk};
use potts_core::landscape::{
    f_eval, flatten_row, is_separable_matrix, make_rho_bar, make_rho_s, make_rho_stable,
    stability_index, LandscapeParams,
};
use potts_core::model::{
    forb, hamiltonian, overlap_matrix, ColorAssignment, ModelParams, SimpleGraph,
};
use potts_core::moments::annealed_free_energy;

struct Suite {
    failures: usize,
    total: usize,
}

impl Suite {
    fn check(&mut self, name: &str, pass: bool) {
        self.total += 1;
        if pass {
            println!("ok   {name}");
        } else {
            self.failures += 1;
            println!("FAIL {name}");
        }
    }

    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.check(name, (got - want).abs() <= tol);
    }
}

pub fn run() -> i32 {
    let mut s = Suite {
        failures: 0,
        total: 0,
    };

    let k3 = SimpleGraph::complete(3);
    let mono = ColorAssignment::new(vec![0, 0, 0], 3).unwrap();
    let proper = ColorAssignment::new(vec![0, 1, 2], 3).unwrap();
    s.check(
        "hamiltonian K3 monochromatic",
        hamiltonian(&k3, &mono).unwrap() == 3,
    );
    s.check(
        "hamiltonian K3 proper",
        hamiltonian(&k3, &proper).unwrap() == 0,
    );
    let path = SimpleGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
    let half = ColorAssignment::new(vec![0, 0, 1], 3).unwrap();
    s.check("hamiltonian path", hamiltonian(&path, &half).unwrap() == 1);

    s.check(
        "forb two pairs",
        forb(&ColorAssignment::new(vec![0, 0, 1, 1], 2).unwrap()) == 2,
    );
    s.check("forb triangle", forb(&mono) == 3);

    let a = ColorAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
    let b = ColorAssignment::new(vec![1, 1, 0, 0], 2).unwrap();
    let anti = overlap_matrix(&a, &b).unwrap();
    s.check(
        "overlap anti-diagonal",
        anti.entries() == [0.0, 1.0, 1.0, 0.0],
    );

    s.close(
        "entropy uniform",
        entropy_vec(&[0.25; 4]).unwrap(),
        4f64.ln(),
        1e-12,
    );
    s.close(
        "entropy point mass",
        entropy_vec(&[1.0, 0.0]).unwrap(),
        0.0,
        0.0,
    );
    s.close(
        "binary entropy half",
        binary_entropy(0.5).unwrap(),
        2f64.ln(),
        1e-14,
    );

    let edge = SimpleGraph::new(2, vec![(0, 1)]).unwrap();
    s.close(
        "single edge Z (enumeration)",
        z_enumerate(&edge, 3, 3f64.ln()).unwrap().log_z,
        7f64.ln(),
        1e-12,
    );
    s.close(
        "single edge Z (fk expansion)",
        z_fk(&edge, 3, 3f64.ln()).unwrap().log_z,
        7f64.ln(),
        1e-12,
    );
    s.close(
        "empty graph Z = k^n",
        z_enumerate(&SimpleGraph::empty(4), 3, 1.0).unwrap().log_z,
        4.0 * 3f64.ln(),
        1e-12,
    );

    let p = ModelParams::new(3, 300, 6.0, 3f64.ln()).unwrap();
    let (p1, p2) = planted_probabilities(&p);
    s.close("planted p1", p1, 6.0 / 700.0, 1e-16);
    s.close("planted p2", p2, 18.0 / 700.0, 1e-16);
    s.close(
        "planted mixture = d/n",
        p1 / 3.0 + 2.0 / 3.0 * p2,
        0.02,
        1e-16,
    );

    let p0 = ModelParams::new(3, 10, 2.0, 0.0).unwrap();
    s.close(
        "annealed at beta=0",
        annealed_free_energy(&p0),
        3f64.ln(),
        1e-14,
    );
    let pl = ModelParams::new(3, 10, 2.0, 3f64.ln()).unwrap();
    s.close(
        "annealed at beta=ln 3",
        annealed_free_energy(&pl),
        (7.0f64 / 3.0).ln(),
        1e-13,
    );

    let lp = LandscapeParams::new(3, 2.0, 3f64.ln()).unwrap();
    s.close(
        "f at barycenter",
        f_eval(&make_rho_bar(3), &lp),
        2.0 * (7.0f64 / 3.0).ln(),
        1e-12,
    );
    s.check(
        "rho_0 is the barycenter",
        make_rho_s(4, 0).unwrap() == make_rho_bar(4),
    );
    s.check("rho_k is the identity", {
        let ident = make_rho_s(4, 4).unwrap();
        (0..4).all(|i| (0..4).all(|j| ident.get(i, j) == f64::from(u8::from(i == j))))
    });
    s.check("rho_stable row sums", {
        make_rho_stable(5).max_row_sum_deviation() < 1e-14
    });
    s.check("stability indices", {
        stability_index(&make_rho_bar(5)) == 0 && stability_index(&make_rho_stable(5)) == 5
    });
    s.check(
        "barycenter separable",
        is_separable_matrix(&make_rho_bar(5), 0.25),
    );
    s.check("flatten fixed point", {
        let bar = make_rho_bar(4);
        flatten_row(&bar, 1).unwrap().entries() == bar.entries()
    });

    let p = ModelParams::new(2, 2, 1.0, 0.5).unwrap();
    let g = sample_gnm(&p, &SeededStream::new(0, 0)).unwrap();
    s.check("gnm n=2 m=1 forced edge", g.edges() == [(0, 1)]);
    let p = ModelParams::new(2, 4, 3.0, 0.5).unwrap();
    let g = sample_gnm(&p, &SeededStream::new(0, 1)).unwrap();
    s.check("gnm n=4 m=6 is K4", g.edge_count() == 6);

    println!(
        "selftest: {}/{} checks passed",
        s.total - s.failures,
        s.total
    );
    i32::from(s.failures > 0)
}
