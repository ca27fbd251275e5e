//! Monte-Carlo experiment orchestration.
//!
//! Replicas are mutually independent counter-keyed streams, so they can run
//! on any number of threads and still produce byte-identical manifests:
//! `(config, seed)` determines every output.
//!
//! Besides plain replication this module carries the finite-size
//! diagnostics: the large-deviation scan `-|V_n|^{-1} log P̂(E)` over a
//! torus sweep, the noise exponential-moment estimate, the
//! connection-growth exponential moments, exact relative entropy, and the
//! per-site Gibbs energy/partition ingredients `Γ_m` on enumerable sizes.

use crate::config::{AppConfig, EventSpec};
use crate::connectivity::{
    enumerate_exact_window, eval_potential, sample_base_field, GibbsModel,
};
use crate::lattice::{LatticeVec, TorusSpec};
use crate::measure::{ac_membership, double_layer_measure, path_average_hn, AcThresholds};
use crate::rng::StreamKey;
use crate::solver::{integrate_network, sample_noise};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event {0:?} is not defined in the config")]
    UnknownEvent(String),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("{0}")]
    Connectivity(#[from] crate::connectivity::ConnectivityError),
}

/// Summary of one replica at one torus size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub n: i64,
    pub replica: u64,
    pub volume: usize,
    pub h_n: f64,
    /// max over sites of LHS/RHS in the a-priori trajectory bound
    pub apriori_max_ratio: f64,
    /// affine drift constant audited on this replica's own trajectories
    pub c_affine: f64,
    pub ac_smallest_c: f64,
    pub edges: usize,
    pub events: BTreeMap<String, bool>,
    /// blow-up diagnostic; the replica is recorded, not fatal to the batch
    pub blow_up: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ReplicaSummary>,
}

/// Derive the per-replica noise/field seeds from the master seed.
pub fn replica_seeds(master: u64, n: i64, replica: u64) -> (u64, u64) {
    let key = StreamKey::new(master).with(n as u64).with(replica);
    (key.bits(0), key.bits(1))
}

/// Affine drift constant along simulated trajectories:
/// `max_j max_t |b_t(U^j)| / (1 + ‖U^j‖_t)` with `b = U - U³/3 - w`.
pub fn audit_c_affine(state: &crate::solver::NetworkState) -> f64 {
    let mut c = 0.0f64;
    for (u, w) in state.u.iter().zip(&state.w_aux) {
        let mut sup = 0.0f64;
        for (i, (&ui, &wi)) in u.values.iter().zip(&w.values).enumerate() {
            sup = sup.max(ui.abs());
            if i == 0 {
                continue;
            }
            let b = ui - ui * ui * ui / 3.0 - wi;
            c = c.max(b.abs() / (1.0 + sup));
        }
    }
    c
}

fn run_one(cfg: &AppConfig, n: i64, replica: u64) -> ReplicaSummary {
    let spec = TorusSpec::new(cfg.torus.d, n);
    let model = cfg.gibbs_model();
    let params = cfg.solve_params();
    let (noise_seed, field_seed) = replica_seeds(cfg.experiment.seed, n, replica);
    let noise = sample_noise(spec, cfg.integration.dt, cfg.integration.t_end, noise_seed)
        .expect("validated grid");
    let field = sample_base_field(spec, &model, field_seed);
    let edges = field.edge_count();
    match integrate_network(&noise, &field, &params) {
        Ok(state) => {
            let obs = cfg.experiment.observable;
            let h_n = path_average_hn(&state, 0, |w| obs.eval(w[0]));
            let c_affine = audit_c_affine(&state);
            let apriori =
                crate::solver::apriori_bound_certificate(&state, &noise, &field, c_affine);
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
            let events = cfg
                .experiment
                .events
                .iter()
                .map(|e| (e.name.clone(), e.holds(h_n)))
                .collect();
            ReplicaSummary {
                n,
                replica,
                volume: spec.volume(),
                h_n,
                apriori_max_ratio: apriori.max_ratio,
                c_affine,
                ac_smallest_c: ac.smallest_c,
                edges,
                events,
                blow_up: None,
            }
        }
        Err(err) => ReplicaSummary {
            n,
            replica,
            volume: spec.volume(),
            h_n: f64::NAN,
            apriori_max_ratio: f64::NAN,
            c_affine: f64::NAN,
            ac_smallest_c: f64::NAN,
            edges,
            events: BTreeMap::new(),
            blow_up: Some(err.to_string()),
        },
    }
}

/// Execute every (n, replica) cell of the experiment. Replicas run in
/// parallel; the manifest is a deterministic fold in (n, replica) order.
pub fn run_replicas(cfg: &AppConfig) -> RunManifest {
    let cells: Vec<(i64, u64)> = cfg
        .torus
        .n_sweep
        .iter()
        .flat_map(|&n| (0..cfg.experiment.replicas).map(move |r| (n, r)))
        .collect();
    let rows: Vec<ReplicaSummary> = cells
        .par_iter()
        .map(|&(n, r)| run_one(cfg, n, r))
        .collect();
    RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.experiment.seed,
        rows,
    }
}

/// 95% Wilson score interval for `hits` successes out of `total`.
pub fn wilson_interval(hits: u64, total: u64) -> (f64, f64) {
    let z = 1.959963984540054f64;
    let n = total as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == total { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LdpRow {
    pub n: i64,
    pub volume: usize,
    pub hits: u64,
    pub replicas: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// `-|V_n|^{-1} log P̂(E)`; absent on zero-hit rows, which report the
    /// Wilson upper bound instead of -infinity.
    pub norm_log: Option<f64>,
    pub zero_hits: bool,
}

/// The desk-scale LDP diagnostic: event probability and its normalised
/// log over the configured torus sweep.
pub fn ldp_scan(cfg: &AppConfig, event_name: &str) -> Result<Vec<LdpRow>, HarnessError> {
    let event: &EventSpec = cfg
        .experiment
        .events
        .iter()
        .find(|e| e.name == event_name)
        .ok_or_else(|| HarnessError::UnknownEvent(event_name.to_string()))?;
    let manifest = run_replicas(cfg);
    let mut rows = Vec::new();
    for &n in &cfg.torus.n_sweep {
        let cell: Vec<&ReplicaSummary> = manifest
            .rows
            .iter()
            .filter(|r| r.n == n && r.blow_up.is_none())
            .collect();
        let total = cell.len() as u64;
        let hits = cell
            .iter()
            .filter(|r| *r.events.get(&event.name).unwrap_or(&false))
            .count() as u64;
        let volume = TorusSpec::new(cfg.torus.d, n).volume();
        let p_hat = hits as f64 / total as f64;
        let (lo, hi) = wilson_interval(hits, total);
        rows.push(LdpRow {
            n,
            volume,
            hits,
            replicas: total,
            p_hat,
            wilson_lo: lo,
            wilson_hi: hi,
            norm_log: if hits > 0 {
                Some(-p_hat.ln() / volume as f64)
            } else {
                None
            },
            zero_hits: hits == 0,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MgfReport {
    pub c1: f64,
    pub replicas: u64,
    /// `|V_n|^{-1} log E[exp(c1 Σ_j ‖W^j‖²_T)]`, Monte-Carlo estimate.
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub overflow: bool,
}

/// Estimate the noise exponential moment. `c1` should stay below the
/// Brownian threshold `1/(2T)`; overflowing draws flag the report rather
/// than poisoning the average (log-sum-exp throughout).
pub fn mgf_noise_check(
    spec: TorusSpec,
    dt: f64,
    t_end: f64,
    c1: f64,
    replicas: u64,
    seed: u64,
) -> MgfReport {
    let exponents: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (noise_seed, _) = replica_seeds(seed, spec.n, r);
            let noise = sample_noise(spec, dt, t_end, noise_seed).expect("grid");
            let total: f64 = noise
                .paths
                .iter()
                .map(|p| {
                    let s = p.sup_norm();
                    s * s
                })
                .sum();
            c1 * total
        })
        .collect();
    let overflow = exponents.iter().any(|x| !x.is_finite());
    let max_x = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = exponents.iter().map(|x| (x - max_x).exp()).collect();
    let mean = shifted.iter().sum::<f64>() / replicas as f64;
    let var = shifted.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>()
        / (replicas as f64 - 1.0).max(1.0);
    let half = 1.959963984540054 * (var / replicas as f64).sqrt();
    let volume = spec.volume() as f64;
    let log_mean = max_x + mean.ln();
    MgfReport {
        c1,
        replicas,
        estimate: log_mean / volume,
        ci_lo: if mean - half > 0.0 {
            (max_x + (mean - half).ln()) / volume
        } else {
            f64::NEG_INFINITY
        },
        ci_hi: (max_x + (mean + half).ln()) / volume,
        overflow,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthRow {
    pub m: i64,
    /// `|V_n|^{-1} log E[exp(a1 |V_m|^{2ρ+2} e^{(4+2ρ)TC_J|V_m|} Σ_j (Σ_{k∉V_m}‖J‖)²)]`
    pub moment_sq: f64,
    /// first-moment analogue with `|V_m|^{ρ+1} e^{(3+ρ)TC_J|V_m|}`
    pub moment_first: f64,
    /// implied `a2` so that the assumption bound `exp(a2 |V_n|)` holds
    pub implied_a2: f64,
    pub overflow: bool,
    /// analytic union bound on the probability that any row has a non-null
    /// connection beyond `V_m`, for the MC cross-check
    pub analytic_tail_prob: f64,
}

/// Per-m estimates of the two connection-growth exponential moments.
#[allow(clippy::too_many_arguments)]
pub fn connection_growth_check(
    spec: TorusSpec,
    model: &GibbsModel,
    m_range: &[i64],
    a1: f64,
    rho: f64,
    t_end: f64,
    replicas: u64,
    seed: u64,
) -> Vec<GrowthRow> {
    let c_j = model.space.c_j();
    let volume = spec.volume() as f64;
    // tail sums per replica, per m
    let tails: Vec<Vec<(f64, f64)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (_, field_seed) = replica_seeds(seed, spec.n, r);
            let field = sample_base_field(spec, model, field_seed);
            m_range
                .iter()
                .map(|&m| {
                    let (mut sq, mut first) = (0.0, 0.0);
                    for j in spec.sites() {
                        let t = field.row_tail_norm(&j, m);
                        sq += t * t;
                        first += t;
                    }
                    (sq, first)
                })
                .collect()
        })
        .collect();
    m_range
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let vm = (2.0 * m as f64 + 1.0).powi(spec.d as i32);
            let log_pref_sq = a1.ln() + (2.0 * rho + 2.0) * vm.ln() + (4.0 + 2.0 * rho) * t_end * c_j * vm;
            let log_pref_first = a1.ln() + (rho + 1.0) * vm.ln() + (3.0 + rho) * t_end * c_j * vm;
            let exponent = |log_pref: f64, s: f64| -> f64 {
                if s == 0.0 {
                    0.0
                } else {
                    (log_pref + s.ln()).exp()
                }
            };
            let xs_sq: Vec<f64> = tails.iter().map(|t| exponent(log_pref_sq, t[mi].0)).collect();
            let xs_first: Vec<f64> = tails
                .iter()
                .map(|t| exponent(log_pref_first, t[mi].1))
                .collect();
            let overflow = xs_sq.iter().chain(&xs_first).any(|x| !x.is_finite());
            let lse = |xs: &[f64]| -> f64 {
                let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mean = xs.iter().map(|x| (x - mx).exp()).sum::<f64>() / xs.len() as f64;
                (mx + mean.ln()) / volume
            };
            let moment_sq = lse(&xs_sq);
            let moment_first = lse(&xs_first);
            // analytic union bound: Σ_j Σ_{k∉V_m, k∈V_n} P(non-null at k)
            let per_row: f64 = spec
                .sites()
                .filter(|k| k.norm_inf() > m)
                .map(|k| crate::connectivity::connect_prob(&k, model))
                .sum();
            GrowthRow {
                m,
                moment_sq,
                moment_first,
                implied_a2: moment_sq.max(moment_first),
                overflow,
                analytic_tail_prob: (per_row * volume).min(1.0),
            }
        })
        .collect()
}

/// Exact relative entropy `R(p || q) = Σ p log(p/q)` on a common finite
/// support; infinite when `p` charges a point `q` does not.
pub fn relative_entropy_exact(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "supports must align");
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    total
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaMEstimate {
    pub m: i64,
    /// `E^μ[Σ_A |A|_*^{-1} Φ_A(ζ(ω))]` under the exactly enumerated Gibbs
    /// measure: one term per base potential by stationarity.
    pub energy_density: f64,
    /// `|V_n|^{-1} log Z` with the partition function enumerated over the
    /// pair domain `(j ∈ V_n, k ∈ V_m)`.
    pub log_z_density: f64,
    /// `Γ_m = energy_density + log_z_density`.
    pub gamma_m: f64,
}

/// Tabulate the finite-m rate-function ingredient `Γ_m` on an exactly
/// enumerable torus.
pub fn gamma_m_estimate(
    spec: TorusSpec,
    model: &GibbsModel,
    m: i64,
) -> Result<GammaMEstimate, HarnessError> {
    // expectation layer: exact measure over the full offset cube
    let full = enumerate_exact_window(spec, model, m, spec.n)?;
    let origin = LatticeVec::zero(spec.d);
    let mut energy_density = 0.0;
    for (idx, &prob) in full.probs.iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        let field = full.field_for(idx, &model.space);
        let e: f64 = model
            .potentials
            .iter()
            .map(|pot| eval_potential(&field, pot, &origin, m))
            .sum();
        energy_density += prob * e;
    }
    // partition layer: normaliser over the truncated pair domain
    let truncated = enumerate_exact_window(spec, model, m, m)?;
    let log_z_density = truncated.log_z / spec.volume() as f64;
    Ok(GammaMEstimate {
        m,
        energy_density,
        log_z_density,
        gamma_m: energy_density + log_z_density,
    })
}

/// Write rows as CSV with a fixed header; floats use the shortest
/// round-trip representation, so re-emission is byte-identical.
pub fn write_csv(
    path: &std::path::Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), HarnessError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a CSV written by [`write_csv`] back into header and rows.
pub fn read_csv(path: &std::path::Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

/// The manifest's CSV projection: one row per replica, stable column order.
pub fn manifest_table(manifest: &RunManifest, events: &[EventSpec]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let mut header = vec![
        "n", "replica", "volume", "h_n", "apriori_max_ratio", "c_affine", "ac_smallest_c",
        "edges", "blow_up",
    ];
    // event columns are appended in config order with a leaked name; the
    // set of event names is tiny and fixed per run
    let event_names: Vec<&'static str> = events
        .iter()
        .map(|e| Box::leak(format!("event_{}", e.name).into_boxed_str()) as &'static str)
        .collect();
    header.extend(event_names.iter());
    let rows = manifest
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.n.to_string(),
                r.replica.to_string(),
                r.volume.to_string(),
                r.h_n.to_string(),
                r.apriori_max_ratio.to_string(),
                r.c_affine.to_string(),
                r.ac_smallest_c.to_string(),
                r.edges.to_string(),
                r.blow_up.clone().unwrap_or_default(),
            ];
            for e in events {
                row.push(
                    r.events
                        .get(&e.name)
                        .map(|b| b.to_string())
                        .unwrap_or_default(),
                );
            }
            row
        })
        .collect();
    (header, rows)
}

/// Emit the manifest as JSON plus its CSV table. Returns the JSON text.
pub fn emit_results(
    manifest: &RunManifest,
    events: &[EventSpec],
    json_path: &std::path::Path,
    csv_path: &std::path::Path,
) -> Result<String, HarnessError> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(json_path, &json)?;
    let (header, rows) = manifest_table(manifest, events);
    write_csv(csv_path, &header, &rows)?;
    Ok(json)
}
