//! `potts`: command-line front end for the Potts antiferromagnet laboratory.

mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use output::{csv_document, emit, float17, ExperimentConfig, RunTimer};
use potts_core::ensembles::{condition_on_balanced, SeededStream};
use potts_core::exact::{z_enumerate, z_fk};
use potts_core::io;
use potts_core::landscape::{
    f_eval, f_eval_raw, grad_f, make_rho_bar, maximize_f, monotonicity_check_beta,
    monotonicity_check_d, project_row_stochastic, verify_barmax, Domain, LandscapeParams,
};
use potts_core::mcmc::{
    free_energy_experiment, thermo_integrate_lnz_with_kernel, FreeEnergyEstimator, Kernel,
    TiSchedule,
};
use potts_core::model::ModelParams;
use potts_core::moments::{exact_first_moment_total, first_moment_mc, second_moment_by_overlap};
use potts_core::separability::{
    empirical_separability_rate, sep2_check_exhaustive, SepConfig, SeparabilityOptions,
};
use potts_core::PottsError;

#[derive(Parser)]
#[command(
    name = "potts",
    version,
    about = "Exact oracles, moment formulas, landscape optimization and MCMC for the Potts antiferromagnet on sparse random graphs"
)]
struct Cli {
    /// Master seed; every stream derives from it deterministically.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: POTTS_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactMethod {
    Enum,
    Fk,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum MomentMode {
    First,
    Second,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    S,
    D,
    Dsep,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Exact,
    Ti,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Glauber,
    Metropolis,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-truth ln Z on a graph file by enumeration and/or FK expansion.
    Exact {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = ExactMethod::Both)]
        method: ExactMethod,
    },
    /// Exact first or overlap-resolved second moments of Z over G(n, m).
    Moments {
        #[arg(long, value_enum)]
        mode: MomentMode,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        beta: f64,
        /// Restrict the first moment to balanced assignments.
        #[arg(long)]
        balanced: bool,
        /// Monte Carlo cross-check samples for the first moment (0 = skip).
        #[arg(long, default_value_t = 0)]
        mc_samples: usize,
    },
    /// Multistart projected-gradient maximization of the overlap functional.
    Landscape {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = DomainArg::D)]
        domain: DomainArg,
        #[arg(long, default_value_t = 0.25)]
        kappa_cap: f64,
        #[arg(long, default_value_t = 20)]
        starts: usize,
        /// Write the winning run's (iteration, f, pg_norm) trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Margin, monotonicity and gradient self-checks for the landscape.
    LandscapeVerify {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        beta: f64,
    },
    /// Empirical SEP1/SEP2 rates over balanced planted samples.
    Separability {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        samples: u64,
        /// Glauber witnesses per sample for SEP2 (0 = SEP1 only).
        #[arg(long, default_value_t = 0)]
        witnesses: usize,
        /// Also run one exhaustive SEP2 check (tiny n only).
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = 0.25)]
        kappa_cap: f64,
        /// Dump sampled graph/assignment pairs into this directory.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Quenched free-energy estimates along an n-grid vs the annealed formula.
    Freeenergy {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        nmin: usize,
        #[arg(long)]
        nmax: usize,
        #[arg(long, default_value_t = 2)]
        nstep: usize,
        #[arg(long)]
        replicas: usize,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Exact)]
        estimator: EstimatorArg,
        /// TI sweeps per grid point (ti estimator only).
        #[arg(long, default_value_t = 400)]
        budget: usize,
    },
    /// Thermodynamic integration of ln Z on a graph file.
    Ti {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 33)]
        points: usize,
        #[arg(long, default_value_t = 400)]
        sweeps: usize,
        #[arg(long, default_value_t = 100)]
        burnin: usize,
        /// Update kernel for the chain.
        #[arg(long, value_enum, default_value_t = KernelArg::Glauber)]
        kernel: KernelArg,
    },
    /// Run the packaged closed-form oracle suite.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("POTTS_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        // a second init in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match run(cli, threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn config_for(
    cli: &Cli,
    command: &str,
    params: serde_json::Value,
    threads: Option<usize>,
) -> ExperimentConfig {
    ExperimentConfig {
        command: command.to_string(),
        params,
        master_seed: cli.seed,
        threads,
        out: cli.out.clone(),
        format: match cli.format {
            Format::Json => "json".into(),
            Format::Csv => "csv".into(),
        },
    }
}

fn run(cli: Cli, threads: Option<usize>) -> Result<ExitCode, PottsError> {
    let stream = SeededStream::new(cli.seed, 0);
    match &cli.command {
        Command::Exact {
            graph,
            k,
            beta,
            method,
        } => {
            let g = io::read_graph(graph)?;
            let timer = RunTimer::start();
            let started = Instant::now();
            let mut result = serde_json::Map::new();
            if matches!(method, ExactMethod::Enum | ExactMethod::Both) {
                let z = z_enumerate(&g, *k, *beta)?;
                result.insert("log_z_enumerate".into(), json!(z.log_z));
            }
            if matches!(method, ExactMethod::Fk | ExactMethod::Both) {
                let z = z_fk(&g, *k, *beta)?;
                result.insert("log_z_fk".into(), json!(z.log_z));
            }
            if let (Some(a), Some(b)) = (result.get("log_z_enumerate"), result.get("log_z_fk")) {
                let diff = a.as_f64().unwrap() - b.as_f64().unwrap();
                result.insert("difference".into(), json!(diff));
            }
            result.insert(
                "runtime_ms".into(),
                json!(started.elapsed().as_millis() as u64),
            );
            let config = config_for(
                &cli,
                "exact",
                json!({"graph": graph, "k": k, "beta": beta}),
                threads,
            );
            let record = timer.finish(config, vec![], serde_json::Value::Object(result));
            emit(&record, None)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Moments {
            mode,
            k,
            n,
            d,
            beta,
            balanced,
            mc_samples,
        } => {
            let params = ModelParams::new(*k, *n, *d, *beta)?;
            let timer = RunTimer::start();
            let config = config_for(
                &cli,
                "moments",
                json!({"mode": match mode { MomentMode::First => "first", MomentMode::Second => "second" },
                       "k": k, "n": n, "d": d, "beta": beta, "balanced": balanced, "mc_samples": mc_samples}),
                threads,
            );
            match mode {
                MomentMode::First => {
                    let value = exact_first_moment_total(&params, *balanced)?;
                    let mut result = serde_json::to_value(value).expect("serializable");
                    if *mc_samples > 1 {
                        let mc = first_moment_mc(&params, *mc_samples, &stream)?;
                        result["mc"] = serde_json::to_value(mc).expect("serializable");
                    }
                    let record = timer.finish(config, vec![], result);
                    emit(&record, None)?;
                }
                MomentMode::Second => {
                    let report = second_moment_by_overlap(&params)?;
                    let summary = json!({
                        "log_total": report.log_total,
                        "group_count": report.groups.len(),
                    });
                    let csv = (cli.format == Format::Csv).then(|| {
                        let scale = *k as f64 / *n as f64;
                        let rows: Vec<String> = report
                            .groups
                            .values()
                            .map(|g| {
                                let overlap: Vec<String> = g
                                    .joint_counts
                                    .iter()
                                    .map(|&c| float17(c as f64 * scale))
                                    .collect();
                                format!(
                                    "{},{},{}",
                                    overlap.join(";"),
                                    float17(g.pair_count),
                                    float17(g.log_moment)
                                )
                            })
                            .collect();
                        csv_document(&config, "overlap,pair_count,log_moment", &rows)
                    });
                    let record = timer.finish(config, vec![], summary);
                    emit(&record, csv)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Landscape {
            k,
            d,
            beta,
            domain,
            kappa_cap,
            starts,
            trace,
        } => {
            let p = LandscapeParams::with_kappa_cap(*k, *d, *beta, *kappa_cap)?;
            let domain = match domain {
                DomainArg::S => Domain::S,
                DomainArg::D => Domain::D,
                DomainArg::Dsep => Domain::DSep,
            };
            let timer = RunTimer::start();
            let mut rng = stream.rng();
            let result = maximize_f(&p, domain, &mut rng, *starts)?;
            let config = config_for(
                &cli,
                "landscape",
                json!({"k": k, "d": d, "beta": beta, "domain": format!("{domain:?}"),
                       "kappa_cap": kappa_cap, "starts": starts}),
                threads,
            );
            if let Some(path) = trace {
                let rows: Vec<String> = result
                    .trace
                    .iter()
                    .map(|t| format!("{},{},{}", t.iteration, float17(t.f), float17(t.pg_norm)))
                    .collect();
                let doc = csv_document(&config, "iteration,f,pg_norm", &rows);
                std::fs::write(path, doc)?;
            }
            let payload = json!({
                "f_value": result.f_value,
                "pg_norm": result.pg_norm,
                "stability": result.stability,
                "start_label": result.start_label,
                "iterations": result.iterations,
                "near_optimal_starts": result.near_optimal_starts,
                "f_at_barycenter": f_eval(&make_rho_bar(*k), &p),
                "maximizer": result.maximizer.entries(),
            });
            let record = timer.finish(config, vec![], payload);
            emit(&record, None)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::LandscapeVerify { k, d, beta } => {
            let timer = RunTimer::start();
            let report = verify_barmax(*k, *d, *beta)?;
            let p = LandscapeParams::new(*k, *d, *beta)?;
            // gradient spot check by central differences at the barycenter
            let bar = make_rho_bar(*k);
            let g = grad_f(&bar, &p);
            let h = 1e-6;
            let mut max_rel = 0.0f64;
            let mut entries = bar.entries().to_vec();
            for idx in [0usize, k * k / 2, k * k - 1] {
                let orig = entries[idx];
                entries[idx] = orig + h;
                let up = f_eval_raw(*k, &entries, &p);
                entries[idx] = orig - h;
                let down = f_eval_raw(*k, &entries, &p);
                entries[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                max_rel = max_rel.max((fd - g[idx]).abs() / g[idx].abs().max(1.0));
            }
            let mono_ok = {
                use rand::Rng;
                let mut rng = stream.rng();
                let mut ok = true;
                for _ in 0..200 {
                    let raw: Vec<f64> = (0..k * k).map(|_| rng.random::<f64>()).collect();
                    let rho = project_row_stochastic(*k, &raw)?;
                    ok &= monotonicity_check_beta(&rho, &p) < 0.0;
                    ok &= monotonicity_check_d(&rho) < 0.0;
                }
                ok
            };
            let config = config_for(
                &cli,
                "landscape-verify",
                json!({"k": k, "d": d, "beta": beta}),
                threads,
            );
            let payload = json!({
                "f_bar": report.f_bar,
                "margins": report.margins,
                "stable_margin": report.stable_margin,
                "min_margin": report.margins.iter().cloned().fold(f64::INFINITY, f64::min),
                "gradient_fd_max_rel": max_rel,
                "monotonicity_negative": mono_ok,
            });
            let record = timer.finish(config, vec![], payload);
            emit(&record, None)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Separability {
            n,
            k,
            d,
            beta,
            samples,
            witnesses,
            exhaustive,
            kappa_cap,
            dump_dir,
        } => {
            let params = ModelParams::new(*k, *n, *d, *beta)?;
            let sep_config = SepConfig::with_kappa_cap(&params, *kappa_cap)?;
            let timer = RunTimer::start();
            let options = SeparabilityOptions {
                witnesses: *witnesses,
                ..Default::default()
            };
            let report =
                empirical_separability_rate(&params, &sep_config, *samples, &options, &stream)?;
            let mut payload = serde_json::to_value(&report).expect("serializable");
            if *exhaustive {
                let sample =
                    condition_on_balanced(&params, &stream.substream(u64::MAX - 1), 100_000)?;
                let rep = sep2_check_exhaustive(
                    &sample.sample.graph,
                    &sample.sample.sigma_hat,
                    &params,
                    &sep_config,
                );
                payload["exhaustive_sep2"] = match rep {
                    Ok(r) => json!({"pass": r.pass, "witnesses": r.witnesses_checked}),
                    Err(e) => json!({"error": e.to_string()}),
                };
            }
            if let Some(dir) = dump_dir {
                std::fs::create_dir_all(dir)?;
                for i in 0..(*samples).min(16) {
                    let s = condition_on_balanced(
                        &params,
                        &stream.substream(i),
                        options.max_balance_tries,
                    )?;
                    io::write_graph(&dir.join(format!("sample_{i:03}.graph")), &s.sample.graph)?;
                    io::write_assignment(
                        &dir.join(format!("sample_{i:03}.assignment")),
                        &s.sample.sigma_hat,
                    )?;
                }
            }
            let config = config_for(
                &cli,
                "separability",
                json!({"n": n, "k": k, "d": d, "beta": beta, "samples": samples,
                       "witnesses": witnesses, "exhaustive": exhaustive, "kappa_cap": kappa_cap}),
                threads,
            );
            let record = timer.finish(config, (0..*samples).collect(), payload);
            emit(&record, None)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Freeenergy {
            k,
            d,
            beta,
            nmin,
            nmax,
            nstep,
            replicas,
            estimator,
            budget,
        } => {
            if *nstep == 0 || nmax < nmin {
                return Err(PottsError::InvalidParameter("bad n grid".into()));
            }
            let n_grid: Vec<usize> = (*nmin..=*nmax).step_by(*nstep).collect();
            let estimator = match estimator {
                EstimatorArg::Exact => FreeEnergyEstimator::Exact,
                EstimatorArg::Ti => FreeEnergyEstimator::ThermoIntegration {
                    grid_points: 33,
                    sweeps_per_point: *budget,
                    burn_in: (*budget / 4).max(1),
                },
            };
            let timer = RunTimer::start();
            let rows =
                free_energy_experiment(*k, *d, *beta, &n_grid, *replicas, estimator, &stream)?;
            let config = config_for(
                &cli,
                "freeenergy",
                json!({"k": k, "d": d, "beta": beta, "nmin": nmin, "nmax": nmax,
                       "nstep": nstep, "replicas": replicas, "budget": budget}),
                threads,
            );
            let csv = (cli.format == Format::Csv).then(|| {
                let body: Vec<String> = rows
                    .iter()
                    .map(|r| {
                        format!(
                            "{},{},{},{},{}",
                            r.n,
                            float17(r.mean),
                            float17(r.std),
                            float17(r.formula),
                            float17(r.gap)
                        )
                    })
                    .collect();
                csv_document(&config, "n,mean,std,formula,gap", &body)
            });
            let payload = serde_json::to_value(&rows).expect("serializable");
            let record = timer.finish(config, (0..*replicas as u64).collect(), payload);
            emit(&record, csv)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Ti {
            graph,
            k,
            beta,
            points,
            sweeps,
            burnin,
            kernel,
        } => {
            let g = io::read_graph(graph)?;
            // the degree parameter only feeds bookkeeping here
            let d = (2.0 * g.edge_count() as f64 / g.n() as f64).max(1e-9);
            let params = ModelParams::new(*k, g.n(), d, *beta)?;
            let schedule = TiSchedule::uniform(*beta, *points, *sweeps, *burnin)?;
            let kernel = match kernel {
                KernelArg::Glauber => Kernel::Glauber,
                KernelArg::Metropolis => Kernel::Metropolis,
            };
            let timer = RunTimer::start();
            let est = thermo_integrate_lnz_with_kernel(&g, &params, &schedule, kernel, &stream)?;
            let config = config_for(
                &cli,
                "ti",
                json!({"graph": graph, "k": k, "beta": beta, "points": points,
                       "sweeps": sweeps, "burnin": burnin, "kernel": format!("{kernel:?}")}),
                threads,
            );
            let payload = serde_json::to_value(&est).expect("serializable");
            let record = timer.finish(config, vec![], payload);
            emit(&record, None)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Selftest => {
            let code = selftest::run();
            Ok(ExitCode::from(code as u8))
        }
    }
}
