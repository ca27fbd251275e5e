//! Python bindings for the torusnet toolkit: torus geometry, weight
//! sequences, connection-field samplers, the network integrator, and the
//! empirical-measure metrics, exposed as plain functions over lists and
//! dicts. Models and configs cross the boundary as JSON strings using the
//! same schemas as the CLI.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use torusnet::config::AppConfig;
use torusnet::connectivity::{
    connect_prob, enumerate_exact, metropolis_sample as rust_metropolis, sample_base_field,
    GibbsModel,
};
use torusnet::harness::{audit_c_affine, gamma_m_estimate, relative_entropy_exact, replica_seeds};
use torusnet::lattice::{LatticeVec, TorusSpec};
use torusnet::measure::{lp_distance_finite, WeightedAtoms};
use torusnet::solver::{apriori_bound_certificate, integrate_network, sample_noise};
use torusnet::weights::{
    compute_weights as rust_compute_weights, normalizer_h as rust_normalizer_h,
    weight_certificates, QuadratureGrid,
};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_model(model_json: &str) -> PyResult<GibbsModel> {
    let model: GibbsModel = serde_json::from_str(model_json).map_err(value_err)?;
    model.validate().map_err(value_err)?;
    Ok(model)
}

/// Reduce a lattice index into the cube `[-n, n]^d`, componentwise
/// modulo `2n+1`.
#[pyfunction]
fn mod_torus(j: Vec<i64>, d: usize, n: i64) -> PyResult<Vec<i64>> {
    let spec = TorusSpec::new(d, n);
    let reduced = spec.mod_torus(&LatticeVec(j)).map_err(value_err)?;
    Ok(reduced.0)
}

/// The sites of `V_n` in lexicographic order.
#[pyfunction]
fn cube_sites(d: usize, n: i64) -> Vec<Vec<i64>> {
    TorusSpec::new(d, n).sites().map(|j| j.0).collect()
}

/// The Dirichlet kernel product at `theta` for window radius `m`.
#[pyfunction]
fn dirichlet_kernel(theta: Vec<f64>, m: i64) -> f64 {
    torusnet::weights::dirichlet_kernel(&theta, m)
}

/// Integral-normalised `h` for the weight family, by quadrature.
#[pyfunction]
#[pyo3(signature = (m, rho, d, grid_k=None))]
fn normalizer_h(m: i64, rho: f64, d: usize, grid_k: Option<usize>) -> PyResult<f64> {
    let grid = grid_k
        .map(|k| QuadratureGrid { k })
        .unwrap_or_else(|| QuadratureGrid::for_m(m));
    rust_normalizer_h(m, rho, d, grid).map_err(runtime_err)
}

/// Compute the weight sequence `λ_m^j` and its certificates. Returns a
/// dict with `values` (index tuple -> weight), `tail_mass`, `h_integral`,
/// `min_convolution_slack`, `min_scaled_in_vm`, and `lower_bound_target`.
#[pyfunction]
#[pyo3(signature = (m, rho, d, window=None, grid_k=None))]
fn compute_weights<'py>(
    py: Python<'py>,
    m: i64,
    rho: f64,
    d: usize,
    window: Option<i64>,
    grid_k: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = grid_k
        .map(|k| QuadratureGrid { k })
        .unwrap_or_else(|| QuadratureGrid::for_m(m));
    let w = rust_compute_weights(m, rho, d, window.unwrap_or(4 * m), grid).map_err(runtime_err)?;
    let cert = weight_certificates(&w);
    let out = PyDict::new(py);
    let values = PyDict::new(py);
    for (j, lam) in &w.values {
        let key: Vec<i64> = j.0.clone();
        values.set_item(pyo3::types::PyTuple::new(py, key)?, *lam)?;
    }
    out.set_item("values", values)?;
    out.set_item("tail_mass", w.tail_mass)?;
    out.set_item("h_integral", w.h_integral)?;
    out.set_item("mass_scale", w.mass_scale)?;
    out.set_item("min_convolution_slack", cert.min_convolution_slack)?;
    out.set_item("min_scaled_in_vm", cert.min_scaled_in_vm)?;
    out.set_item("lower_bound_target", cert.lower_bound_target)?;
    out.set_item("all_positive", cert.all_positive)?;
    Ok(out)
}

/// Brownian driving noise: one path per site, `steps+1` points each.
#[pyfunction]
fn noise_paths(d: usize, n: i64, dt: f64, t_end: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let noise = sample_noise(TorusSpec::new(d, n), dt, t_end, seed).map_err(value_err)?;
    Ok(noise.paths.into_iter().map(|p| p.values).collect())
}

/// Probability that the connection at offset `k` is non-null under the
/// base measure of the JSON model.
#[pyfunction]
fn base_connect_prob(k: Vec<i64>, model_json: &str) -> PyResult<f64> {
    let model = parse_model(model_json)?;
    Ok(connect_prob(&LatticeVec(k), &model))
}

fn edge_list(field: &torusnet::connectivity::ConnectionField) -> Vec<(Vec<i64>, Vec<i64>, String)> {
    field
        .edges()
        .map(|(j, k, e)| (j.0.clone(), k.0.clone(), field.space.labels[e].clone()))
        .collect()
}

/// Sample the independent base connection field; returns the sparse edge
/// list as `(site, offset, label)` triples.
#[pyfunction]
fn base_field(
    d: usize,
    n: i64,
    model_json: &str,
    seed: u64,
) -> PyResult<Vec<(Vec<i64>, Vec<i64>, String)>> {
    let model = parse_model(model_json)?;
    let field = sample_base_field(TorusSpec::new(d, n), &model, seed);
    Ok(edge_list(&field))
}

/// Metropolis-sample the Gibbs-tilted connection field.
#[pyfunction]
#[pyo3(signature = (d, n, model_json, sweeps, seed, m=None))]
fn metropolis_field(
    d: usize,
    n: i64,
    model_json: &str,
    sweeps: usize,
    seed: u64,
    m: Option<i64>,
) -> PyResult<Vec<(Vec<i64>, Vec<i64>, String)>> {
    let model = parse_model(model_json)?;
    let spec = TorusSpec::new(d, n);
    let field = rust_metropolis(spec, &model, m.unwrap_or(n), sweeps, seed);
    Ok(edge_list(&field))
}

/// Exact per-pair marginals of the Gibbs measure on an enumerable torus:
/// returns `(pairs, marginals)` with one probability row per pair.
#[pyfunction]
fn gibbs_exact_marginals(
    d: usize,
    n: i64,
    model_json: &str,
    m: i64,
) -> PyResult<(Vec<(Vec<i64>, Vec<i64>)>, Vec<Vec<f64>>)> {
    let model = parse_model(model_json)?;
    let dist = enumerate_exact(TorusSpec::new(d, n), &model, m).map_err(runtime_err)?;
    let pairs = dist
        .pairs
        .iter()
        .map(|(j, k)| (j.0.clone(), k.0.clone()))
        .collect();
    let marginals = (0..dist.pairs.len()).map(|i| dist.marginal(i)).collect();
    Ok((pairs, marginals))
}

/// Integrate the network described by a full config JSON document.
/// Returns a dict with `sites`, `u`, `w`, `edges`, and `certificates`.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None))]
fn simulate<'py>(
    py: Python<'py>,
    config_json: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg: AppConfig = serde_json::from_str(config_json).map_err(value_err)?;
    cfg.validate().map_err(value_err)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    let n = cfg.torus.n_sweep[0];
    let spec = TorusSpec::new(cfg.torus.d, n);
    let (noise_seed, field_seed) = replica_seeds(cfg.experiment.seed, n, 0);
    let noise =
        sample_noise(spec, cfg.integration.dt, cfg.integration.t_end, noise_seed).map_err(value_err)?;
    let field = sample_base_field(spec, &cfg.gibbs_model(), field_seed);
    let state = integrate_network(&noise, &field, &cfg.solve_params()).map_err(runtime_err)?;
    let c_affine = audit_c_affine(&state);
    let apriori = apriori_bound_certificate(&state, &noise, &field, c_affine);

    let out = PyDict::new(py);
    out.set_item(
        "sites",
        spec.sites().map(|j| j.0).collect::<Vec<Vec<i64>>>(),
    )?;
    out.set_item(
        "u",
        state.u.iter().map(|p| p.values.clone()).collect::<Vec<Vec<f64>>>(),
    )?;
    out.set_item(
        "w",
        state
            .w_aux
            .iter()
            .map(|p| p.values.clone())
            .collect::<Vec<Vec<f64>>>(),
    )?;
    out.set_item("edges", edge_list(&field))?;
    let certs = PyDict::new(py);
    certs.set_item("c_affine", c_affine)?;
    certs.set_item("apriori_max_ratio", apriori.max_ratio)?;
    certs.set_item(
        "hebbian_in_box",
        state.g.values().all(|p| {
            p.values
                .iter()
                .all(|&g| (0.0..=cfg.dynamics.j_bar).contains(&g))
        }),
    )?;
    out.set_item("certificates", certs)?;
    Ok(out)
}

/// Exact Lévy-Prokhorov distance between finite weighted atom sets in
/// Euclidean space.
#[pyfunction]
fn lp_distance(
    atoms_a: Vec<Vec<f64>>,
    weights_a: Vec<f64>,
    atoms_b: Vec<Vec<f64>>,
    weights_b: Vec<f64>,
) -> PyResult<f64> {
    if atoms_a.len() != weights_a.len() || atoms_b.len() != weights_b.len() {
        return Err(PyValueError::new_err("atoms and weights lengths differ"));
    }
    let a = WeightedAtoms {
        atoms: atoms_a,
        weights: weights_a,
    };
    let b = WeightedAtoms {
        atoms: atoms_b,
        weights: weights_b,
    };
    Ok(lp_distance_finite(&a, &b, |x, y| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }))
}

/// Exact relative entropy `Σ p log(p/q)`; `inf` on support violation.
#[pyfunction]
fn relative_entropy(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    if p.len() != q.len() {
        return Err(PyValueError::new_err("supports must align"));
    }
    Ok(relative_entropy_exact(&p, &q))
}

/// The finite-m Gibbs rate ingredient `Γ_m` on an enumerable torus:
/// returns `(energy_density, log_z_density, gamma_m)`.
#[pyfunction]
fn gamma_m(d: usize, n: i64, model_json: &str, m: i64) -> PyResult<(f64, f64, f64)> {
    let model = parse_model(model_json)?;
    let g = gamma_m_estimate(TorusSpec::new(d, n), &model, m).map_err(runtime_err)?;
    Ok((g.energy_density, g.log_z_density, g.gamma_m))
}

/// Tail sum of potential sup-norms outside the double cube of radius `p`.
#[pyfunction]
fn phi_tail(model_json: &str, p: i64) -> PyResult<f64> {
    let model = parse_model(model_json)?;
    Ok(torusnet::connectivity::phi_tail_epsilon(&model, p))
}

/// Mean-field comparison baseline: `N` particles with `1/N`-scaled bounded
/// coupling; returns one path per particle.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn mean_field(
    n_particles: usize,
    config_json: &str,
    coupling: f64,
    sigma: f64,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg: AppConfig = serde_json::from_str(config_json).map_err(value_err)?;
    cfg.validate().map_err(value_err)?;
    let paths = torusnet::solver::mean_field_baseline(
        n_particles,
        &cfg.solve_params(),
        coupling,
        sigma,
        dt,
        t_end,
        seed,
    )
    .map_err(runtime_err)?;
    Ok(paths.into_iter().map(|p| p.values).collect())
}

#[pymodule]
fn torusnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mod_torus, m)?)?;
    m.add_function(wrap_pyfunction!(cube_sites, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(normalizer_h, m)?)?;
    m.add_function(wrap_pyfunction!(compute_weights, m)?)?;
    m.add_function(wrap_pyfunction!(noise_paths, m)?)?;
    m.add_function(wrap_pyfunction!(base_connect_prob, m)?)?;
    m.add_function(wrap_pyfunction!(base_field, m)?)?;
    m.add_function(wrap_pyfunction!(metropolis_field, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_exact_marginals, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(lp_distance, m)?)?;
    m.add_function(wrap_pyfunction!(relative_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_m, m)?)?;
    m.add_function(wrap_pyfunction!(phi_tail, m)?)?;
    m.add_function(wrap_pyfunction!(mean_field, m)?)?;
    Ok(())
}
