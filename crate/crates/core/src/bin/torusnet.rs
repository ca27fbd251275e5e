//! Command-line front end: simulate networks, compute weight sequences,
//! sample Gibbs connection fields, measure empirical distances, and run
//! the Monte-Carlo diagnostics.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use torusnet::config::AppConfig;
use torusnet::connectivity::{metropolis_sample, GibbsModel};
use torusnet::dynamics::assumption_audit;
use torusnet::harness::{
    emit_results, ldp_scan, manifest_table, read_csv, replica_seeds, run_replicas, write_csv,
    RunManifest,
};
use torusnet::lattice::TorusSpec;
use torusnet::measure::{
    ac_membership, double_layer_measure, dp_truncated, empirical_measure, AcThresholds,
    TrajectoryMeasure,
};
use torusnet::solver::{apriori_bound_certificate, integrate_network, sample_noise};
use torusnet::weights::{compute_weights, weight_certificates, QuadratureGrid};

#[derive(Parser)]
#[command(name = "torusnet", about = "lattice networks with sparse random connections", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one network and write trajectories plus a run manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output prefix: writes <out>.csv and <out>.manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Also write the empirical measure to <out>.measure.json.
        #[arg(long, default_value_t = false)]
        emit_measure: bool,
    },
    /// Compute a weight sequence and its certificates.
    Weights {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: i64,
        #[arg(long)]
        rho: f64,
        /// Window radius; defaults to 4m.
        #[arg(long)]
        window: Option<i64>,
        /// Quadrature half-resolution K; defaults to 64(2m+1).
        #[arg(long)]
        grid: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a Gibbs-tilted connection field and write the edge list.
    Gibbs {
        /// Torus as "d,n", e.g. "1,3".
        #[arg(long)]
        spec: String,
        /// JSON file describing the model (space, potentials, upsilon,
        /// gamma, m0, p_near).
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        sweeps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Truncation radius for the conditional energies; defaults to n.
        #[arg(long)]
        m: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncated Lévy-Prokhorov distance between two serialized measures.
    Metric {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 5)]
        jmax: u32,
    },
    /// Monte-Carlo probabilities of a named event over the torus sweep.
    LdpScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        event: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the drift and interaction bounds on simulated trajectories.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate A_c membership across a run manifest.
    AcCheck {
        /// A manifest JSON produced by `simulate` batches or `ldp-scan`.
        #[arg(long)]
        run: PathBuf,
        /// Comma-separated admissibility levels, e.g. "0.5,1,2".
        #[arg(long)]
        c_grid: String,
    },
    /// Run every replica of the configured experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_spec(text: &str) -> Result<TorusSpec, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"d,n\", got {text:?}"));
    }
    let d = parts[0].trim().parse().map_err(|e| format!("bad d: {e}"))?;
    let n = parts[1].trim().parse().map_err(|e| format!("bad n: {e}"))?;
    Ok(TorusSpec::new(d, n))
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            emit_measure,
        } => {
            let mut cfg = AppConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let n = cfg.torus.n_sweep[0];
            let spec = TorusSpec::new(cfg.torus.d, n);
            let (noise_seed, field_seed) = replica_seeds(cfg.experiment.seed, n, 0);
            let noise = sample_noise(spec, cfg.integration.dt, cfg.integration.t_end, noise_seed)?;
            let model = cfg.gibbs_model();
            let field = torusnet::connectivity::sample_base_field(spec, &model, field_seed);
            let state = integrate_network(&noise, &field, &cfg.solve_params())?;

            // trajectories: t, site, U, w
            let mut rows = Vec::new();
            for (rank, site) in spec.sites().enumerate() {
                let u = &state.u[rank];
                let w = &state.w_aux[rank];
                for (i, (&uv, &wv)) in u.values.iter().zip(&w.values).enumerate() {
                    rows.push(vec![
                        (i as f64 * cfg.integration.dt).to_string(),
                        site.to_string(),
                        uv.to_string(),
                        wv.to_string(),
                    ]);
                }
            }
            let csv_path = out.with_extension("csv");
            write_csv(&csv_path, &["t", "site", "U", "w"], &rows)?;

            let c_affine = torusnet::harness::audit_c_affine(&state);
            let apriori = apriori_bound_certificate(&state, &noise, &field, c_affine);
            let mu = double_layer_measure(&noise, &field);
            let thr = AcThresholds {
                c: cfg.experiment.ac_c,
                rho: cfg.experiment.rho,
                c_j: field.space.c_j(),
                t_end: cfg.integration.t_end,
                m0: model.m0.min(n.max(1)),
                m_max: cfg.experiment.ac_m_max.min(n.max(1)),
            };
            let ac = ac_membership(&mu, &thr);
            let g_in_box = state.g.values().all(|p| {
                p.values
                    .iter()
                    .all(|&g| (0.0..=cfg.dynamics.j_bar).contains(&g))
            });
            let manifest = serde_json::json!({
                "config_hash": cfg.hash(),
                "seed": cfg.experiment.seed,
                "torus": {"d": cfg.torus.d, "n": n},
                "edges": field.edge_count(),
                "certificates": {
                    "c_affine": c_affine,
                    "apriori_max_ratio": apriori.max_ratio,
                    "apriori_holds": apriori.max_ratio <= 1.0,
                    "hebbian_in_box": g_in_box,
                    "ac_smallest_c": ac.smallest_c,
                    "ac_member": ac.member,
                },
            });
            let manifest_path = out.with_extension("manifest.json");
            std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            if emit_measure {
                let measure = empirical_measure(&state);
                std::fs::write(
                    out.with_extension("measure.json"),
                    serde_json::to_string(&measure)?,
                )?;
            }
            println!(
                "simulated d={} n={} ({} sites, {} edges): wrote {} and {}",
                cfg.torus.d,
                n,
                spec.volume(),
                field.edge_count(),
                csv_path.display(),
                manifest_path.display()
            );
            Ok(())
        }
        Command::Weights {
            d,
            m,
            rho,
            window,
            grid,
            out,
        } => {
            let window = window.unwrap_or(4 * m);
            let grid = grid
                .map(|k| QuadratureGrid { k })
                .unwrap_or_else(|| QuadratureGrid::for_m(m));
            let w = compute_weights(m, rho, d, window, grid)?;
            let cert = weight_certificates(&w);
            let rows: Vec<Vec<String>> = w
                .values
                .iter()
                .map(|(j, lam)| vec![j.to_string(), lam.to_string()])
                .collect();
            match out {
                Some(path) => write_csv(&path, &["j", "lambda"], &rows)?,
                None => {
                    println!("j,lambda");
                    for r in &rows {
                        println!("{},{}", r[0], r[1]);
                    }
                }
            }
            println!(
                "certificates: sum={:.12} tail={:.3e} h_integral={:.9} min_conv_slack={:.3e} all_positive={} min|V_m|lambda={:.6} target={:.6} ok={}",
                w.stored_sum(),
                w.tail_mass,
                w.h_integral,
                cert.min_convolution_slack,
                cert.all_positive,
                cert.min_scaled_in_vm,
                cert.lower_bound_target,
                cert.convolution_ok && cert.all_positive
            );
            Ok(())
        }
        Command::Gibbs {
            spec,
            model_file,
            sweeps,
            seed,
            m,
            out,
        } => {
            let spec = parse_spec(&spec)?;
            let text = std::fs::read_to_string(&model_file)?;
            let model: GibbsModel = serde_json::from_str(&text)?;
            model.validate()?;
            let m = m.unwrap_or(spec.n);
            let field = metropolis_sample(spec, &model, m, sweeps, seed);
            let rows: Vec<Vec<String>> = field
                .edges()
                .map(|(j, k, e)| {
                    vec![
                        j.to_string(),
                        k.to_string(),
                        model.space.labels[e].clone(),
                    ]
                })
                .collect();
            match out {
                Some(path) => {
                    write_csv(&path, &["j", "k", "value"], &rows)?;
                    println!(
                        "sampled {} edges on d={} n={} after {} sweeps -> {}",
                        rows.len(),
                        spec.d,
                        spec.n,
                        sweeps,
                        path.display()
                    );
                }
                None => {
                    println!("j,k,value");
                    for r in &rows {
                        println!("{},{},{}", r[0], r[1], r[2]);
                    }
                }
            }
            Ok(())
        }
        Command::Metric { a, b, jmax } => {
            let ma: TrajectoryMeasure = serde_json::from_str(&std::fs::read_to_string(&a)?)?;
            let mb: TrajectoryMeasure = serde_json::from_str(&std::fs::read_to_string(&b)?)?;
            let result = dp_truncated(&ma, &mb, jmax);
            println!(
                "d^P(a,b) = {} (levels {:?}, truncation bound {})",
                result.value, result.per_level, result.truncation_bound
            );
            Ok(())
        }
        Command::LdpScan { config, event, out } => {
            let cfg = AppConfig::from_path(&config)?;
            let rows = ldp_scan(&cfg, &event)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.volume.to_string(),
                        r.hits.to_string(),
                        r.replicas.to_string(),
                        r.p_hat.to_string(),
                        r.wilson_lo.to_string(),
                        r.wilson_hi.to_string(),
                        r.norm_log.map(|v| v.to_string()).unwrap_or_default(),
                        r.zero_hits.to_string(),
                    ]
                })
                .collect();
            let header = [
                "n", "volume", "hits", "replicas", "p_hat", "wilson_lo", "wilson_hi",
                "norm_log", "zero_hits",
            ];
            match out {
                Some(path) => write_csv(&path, &header, &table)?,
                None => {
                    println!("{}", header.join(","));
                    for r in &table {
                        println!("{}", r.join(","));
                    }
                }
            }
            Ok(())
        }
        Command::Audit { config, seed, out } => {
            let mut cfg = AppConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let n = cfg.torus.n_sweep[0];
            let spec = TorusSpec::new(cfg.torus.d, n);
            let model = cfg.gibbs_model();
            // corpus: per-site trajectories from pairs of replicas
            let mut corpus = Vec::new();
            for r in 0..cfg.experiment.replicas.max(2) / 2 {
                let (sa, fa) = replica_seeds(cfg.experiment.seed, n, 2 * r);
                let (sb, fb) = replica_seeds(cfg.experiment.seed, n, 2 * r + 1);
                let na = sample_noise(spec, cfg.integration.dt, cfg.integration.t_end, sa)?;
                let nb = sample_noise(spec, cfg.integration.dt, cfg.integration.t_end, sb)?;
                let field_a = torusnet::connectivity::sample_base_field(spec, &model, fa);
                let field_b = torusnet::connectivity::sample_base_field(spec, &model, fb);
                let state_a = integrate_network(&na, &field_a, &cfg.solve_params())?;
                let state_b = integrate_network(&nb, &field_b, &cfg.solve_params())?;
                for (ua, ub) in state_a.u.iter().zip(&state_b.u) {
                    corpus.push((ua.values.clone(), ub.values.clone()));
                }
            }
            let report = assumption_audit(
                &cfg.fhn_params(),
                &cfg.hebb_params(),
                &model.space,
                &corpus,
                cfg.integration.dt,
                1e-9,
            );
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &json)?;
                    println!(
                        "audited {} pairs: C_one_sided={:.6} C_affine={:.6} violations={}",
                        report.pairs_checked,
                        report.c_one_sided,
                        report.c_affine,
                        report.violations.len()
                    );
                }
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::AcCheck { run, c_grid } => {
            let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(&run)?)?;
            let levels: Vec<f64> = c_grid
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()?;
            let valid: Vec<f64> = manifest
                .rows
                .iter()
                .filter(|r| r.blow_up.is_none())
                .map(|r| r.ac_smallest_c)
                .collect();
            println!("c,replicas_admitted,fraction");
            for c in levels {
                let hits = valid.iter().filter(|&&v| v <= c).count();
                println!("{c},{hits},{}", hits as f64 / valid.len() as f64);
            }
            let worst = valid.iter().cloned().fold(0.0f64, f64::max);
            println!("smallest admissible c over all replicas: {worst}");
            Ok(())
        }
        Command::Run { config, out } => {
            let cfg = AppConfig::from_path(&config)?;
            let manifest = run_replicas(&cfg);
            let json_path = out.with_extension("json");
            let csv_path = out.with_extension("csv");
            emit_results(&manifest, &cfg.experiment.events, &json_path, &csv_path)?;
            let (_, rows) = manifest_table(&manifest, &cfg.experiment.events);
            println!(
                "ran {} replicas -> {} and {}",
                rows.len(),
                json_path.display(),
                csv_path.display()
            );
            let _ = read_csv(&csv_path)?;
            Ok(())
        }
    }
}
