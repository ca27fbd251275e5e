//! Network integration on the torus and the trajectory-bound certificates.
//!
//! The scheme is explicit Euler-Maruyama at fixed `dt` for the fast
//! variable,
//!
//! ```text
//! U^j_{i+1} = U^j_i + ( b_i(U^j) + Σ_{k ∈ V_m, non-null} G^{j,k}_i f(U^j_i) f(U^{(j+k) mod V_n}_i) ) dt + ΔW^j_i,
//! ```
//!
//! with the recovery variable and the Hebbian weights advanced by their
//! exact exponential substeps (additive noise gives strong order 1, and the
//! exact substeps remove the stiffness of the linear parts). The window
//! radius `m` restricts the interaction sum; `m = n` is the full network
//! and smaller `m` realises the truncated solution maps.
//!
//! Per-site updates read only the previous time slice, so they commute with
//! torus rotation bit-for-bit: integrating rotated inputs equals rotating
//! the integrated output exactly. The interaction sum always iterates the
//! sparse row in offset order, which keeps that equivariance at the level
//! of floating-point operation order.

use crate::connectivity::ConnectionField;
use crate::dynamics::{hebbian_step, FhnParams, HebbParams, Trajectory};
use crate::lattice::{LatticeVec, TorusSpec};
use crate::rng::StreamKey;
use crate::weights::WeightSequence;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Any |U| beyond this aborts the run: the cubic drift makes genuine
/// blow-up fast and unambiguous.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("state blew up at site {site:?}, t = {time}: |U| = {value:e}")]
    BlowUp {
        site: LatticeVec,
        time: f64,
        value: f64,
    },
    #[error("dt = {dt} does not divide t_end = {t_end}")]
    BadGrid { dt: f64, t_end: f64 },
    #[error("inconsistent specs: noise on {noise:?}, field on {field:?}")]
    SpecMismatch { noise: TorusSpec, field: TorusSpec },
    #[error("truncation window m = {m} exceeds torus radius n = {n}")]
    WindowTooLarge { m: i64, n: i64 },
}

/// Driving noise: one path per site of `V_n`, in lexicographic site order,
/// all starting at 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseField {
    pub spec: TorusSpec,
    pub dt: f64,
    pub paths: Vec<Trajectory>,
}

impl NoiseField {
    pub fn path(&self, j: &LatticeVec) -> &Trajectory {
        &self.paths[self.spec.rank(j)]
    }

    pub fn steps(&self) -> usize {
        self.paths[0].values.len() - 1
    }

    /// Rotate the site layer: `(S^r W)^j = W^{(j+r) mod V_n}`.
    pub fn shift(&self, r: &LatticeVec) -> NoiseField {
        let paths = self
            .spec
            .sites()
            .map(|j| self.path(&j.add(r)).clone())
            .collect();
        NoiseField {
            spec: self.spec,
            dt: self.dt,
            paths,
        }
    }
}

/// Independent Brownian paths with increments of variance `dt`, keyed by
/// absolute site coordinates so replica- or site-level parallelism cannot
/// change a single sampled bit.
pub fn sample_noise(
    spec: TorusSpec,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> Result<NoiseField, SolverError> {
    let steps_f = t_end / dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 {
        return Err(SolverError::BadGrid { dt, t_end });
    }
    let key = StreamKey::new(seed).with(0xb70);
    let sqrt_dt = dt.sqrt();
    let paths = spec
        .sites()
        .map(|j| {
            let kj = key.with_coords(&j.0);
            let mut values = Vec::with_capacity(steps + 1);
            values.push(0.0);
            for i in 0..steps {
                values.push(values[i] + sqrt_dt * kj.normal(i as u64));
            }
            Trajectory { dt, values }
        })
        .collect();
    Ok(NoiseField { spec, dt, paths })
}

/// Full state of one integrated network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkState {
    pub spec: TorusSpec,
    pub dt: f64,
    /// Fast variable per site, lexicographic site order. `U^j_0 = 0`.
    pub u: Vec<Trajectory>,
    /// Recovery variable per site. `w^j_0 = 0`.
    pub w_aux: Vec<Trajectory>,
    /// Learned weight path per non-null edge inside the interaction window.
    pub g: BTreeMap<(LatticeVec, LatticeVec), Trajectory>,
    /// The interaction window radius the run used.
    pub window_m: i64,
}

impl NetworkState {
    pub fn site(&self, j: &LatticeVec) -> &Trajectory {
        &self.u[self.spec.rank(j)]
    }

    /// Largest grid-sup distance over sites to another state.
    pub fn sup_distance(&self, other: &NetworkState) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .fold(0.0f64, |m, (a, b)| m.max(a.sup_distance(b)))
    }

    /// Rotate the whole state: site paths move and edge keys re-anchor.
    pub fn shift(&self, r: &LatticeVec) -> NetworkState {
        let spec = self.spec;
        let u = spec.sites().map(|j| self.site(&j.add(r)).clone()).collect();
        let w_aux = spec
            .sites()
            .map(|j| self.w_aux[spec.rank(&j.add(r))].clone())
            .collect();
        let g = self
            .g
            .iter()
            .map(|((j, k), path)| {
                ((spec.mod_torus(&j.sub(r)).unwrap(), k.clone()), path.clone())
            })
            .collect();
        NetworkState {
            spec,
            dt: self.dt,
            u,
            w_aux,
            g,
            window_m: self.window_m,
        }
    }
}

/// Dynamics parameters of one run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolveParams {
    pub fhn: FhnParams,
    pub hebb: HebbParams,
}

struct Edge {
    /// rank of the source site
    source: usize,
    /// rank of the target site `(j+k) mod V_n`
    target: usize,
}

/// Integrate with the interaction sum restricted to offsets `‖k‖_∞ ≤ m`.
/// At `m = n` this is the full network equation; the output is identical
/// bit-for-bit because the same code path runs either way.
pub fn psi_m_truncated(
    noise: &NoiseField,
    field: &ConnectionField,
    params: &SolveParams,
    m: i64,
) -> Result<NetworkState, SolverError> {
    let spec = noise.spec;
    if field.spec != spec {
        return Err(SolverError::SpecMismatch {
            noise: spec,
            field: field.spec,
        });
    }
    if m > spec.n {
        return Err(SolverError::WindowTooLarge { m, n: spec.n });
    }
    let dt = noise.dt;
    let steps = noise.steps();
    let volume = spec.volume();
    let fhn = params.fhn;
    let hebb = params.hebb;

    // Flatten the sparse rows once, in (site, offset) lexicographic order,
    // so the per-step interaction loop is allocation-free and its FP
    // evaluation order is a function of row content only. Edge index i
    // owns weight path i; rows are contiguous runs of the flat list.
    let mut edges: Vec<Edge> = Vec::new();
    let mut row_bounds: Vec<(usize, usize)> = Vec::with_capacity(volume);
    let mut g_paths: Vec<Trajectory> = Vec::new();
    let mut g_keys: Vec<(LatticeVec, LatticeVec)> = Vec::new();
    for j in spec.sites() {
        let source = spec.rank(&j);
        let start = edges.len();
        for (k, _elem) in field.row(&j) {
            if k.norm_inf() > m {
                continue;
            }
            let target = spec.rank(&j.add(k));
            let mut path = Trajectory::zeros(dt, steps);
            path.values[0] = hebb.g_ini;
            g_paths.push(path);
            g_keys.push((j.clone(), k.clone()));
            edges.push(Edge { source, target });
        }
        row_bounds.push((start, edges.len()));
    }

    let mut u: Vec<Trajectory> = (0..volume).map(|_| Trajectory::zeros(dt, steps)).collect();
    let mut w: Vec<Trajectory> = (0..volume).map(|_| Trajectory::zeros(dt, steps)).collect();

    for i in 0..steps {
        for site in 0..volume {
            let u_i = u[site].values[i];
            let w_i = w[site].values[i];
            let drift = u_i - u_i * u_i * u_i / 3.0 - w_i;
            let mut interaction = 0.0;
            let (start, end) = row_bounds[site];
            for (e, path) in edges[start..end].iter().zip(&g_paths[start..end]) {
                interaction += path.values[i] * fhn.f.eval(u_i) * fhn.f.eval(u[e.target].values[i]);
            }
            let dw_noise = noise.paths[site].values[i + 1] - noise.paths[site].values[i];
            let next = u_i + (drift + interaction) * dt + dw_noise;
            if !next.is_finite() || next.abs() > BLOW_UP_THRESHOLD {
                return Err(SolverError::BlowUp {
                    site: spec.sites().nth(site).unwrap(),
                    time: (i + 1) as f64 * dt,
                    value: next,
                });
            }
            u[site].values[i + 1] = next;
            w[site].values[i + 1] = fhn.w_step(w_i, u_i, dt);
        }
        for (e, path) in edges.iter().zip(g_paths.iter_mut()) {
            let x = u[e.source].values[i];
            let y = u[e.target].values[i];
            let g_i = path.values[i];
            path.values[i + 1] = hebbian_step(g_i, x, y, &hebb, &fhn, dt);
        }
    }

    let g = g_keys.into_iter().zip(g_paths).collect();
    Ok(NetworkState {
        spec,
        dt,
        u,
        w_aux: w,
        g,
        window_m: m,
    })
}

/// Integrate the full network equation: interactions over all of `V_n`.
pub fn integrate_network(
    noise: &NoiseField,
    field: &ConnectionField,
    params: &SolveParams,
) -> Result<NetworkState, SolverError> {
    psi_m_truncated(noise, field, params, noise.spec.n)
}

/// One row of the a-priori Gronwall certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AprioriRow {
    pub site: LatticeVec,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AprioriReport {
    pub rows: Vec<AprioriRow>,
    pub max_ratio: f64,
    pub c_used: f64,
}

/// Check, per site,
///
/// ```text
/// ‖U^j‖_T ≤ exp(T(C + 2 Σ_{k∈V_m} ‖ω^{j,k}‖)) + 2 exp(T(C + Σ_k ‖ω^{j,k}‖)) ‖W^j‖_T
/// ```
///
/// with `C` the affine-relaxed drift constant from the dynamics audit
/// (the additive `a`-offset is folded into it).
pub fn apriori_bound_certificate(
    state: &NetworkState,
    noise: &NoiseField,
    field: &ConnectionField,
    c_affine: f64,
) -> AprioriReport {
    let t_end = state.u[0].t_end();
    let m = state.window_m;
    let mut rows = Vec::with_capacity(state.spec.volume());
    let mut max_ratio = 0.0f64;
    for j in state.spec.sites() {
        let conn_sum = field.row_window_norm(&j, m);
        let lhs = state.site(&j).sup_norm();
        let rhs = (t_end * (c_affine + 2.0 * conn_sum)).exp()
            + 2.0 * (t_end * (c_affine + conn_sum)).exp() * noise.path(&j).sup_norm();
        let ratio = lhs / rhs;
        max_ratio = max_ratio.max(ratio);
        rows.push(AprioriRow {
            site: j,
            lhs,
            rhs,
            ratio,
        });
    }
    AprioriReport {
        rows,
        max_ratio,
        c_used: c_affine,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; the certificate asks for ≥ -1e-6 · rhs.
    pub slack: f64,
    /// Relative slack `(rhs - lhs) / rhs`.
    pub relative_slack: f64,
    pub noise_term: f64,
    pub connection_term: f64,
    pub tail_term: f64,
    pub prefactor: f64,
}

/// The weighted trajectory-difference bound between a window-`m` solution
/// `X = Ψ^m(inputs_a)` and a window-`n` solution `Z = Ψ^n(inputs_b)`,
/// `n ≥ m`, evaluated over the stored weight window with all lattice sums
/// read through the periodic interpolants:
///
/// ```text
/// Σ_j λ_m^j ‖X^j - Z^j‖_T ≤ exp(TC + T(1+ρ) C_J |V_m|) [
///     (1+√ρ) T |V_m|^{1/2} (Σ_j λ_m^j ‖Z^j‖²_T)^{1/2} (Σ_{j,k∈V_m} λ_m^j d(ω^{j,k}, β^{j,k})²)^{1/2}
///   + 2 Σ_j λ_m^j ‖Q^j - R^j‖_T
///   + T Σ_{j, k ∈ V_n−V_m} λ_m^j ‖β^{j,k}‖ (‖Z^j‖_T + 1) ]
/// ```
#[allow(clippy::too_many_arguments)]
pub fn pair_bound_certificate(
    state_m: &NetworkState,
    state_n: &NetworkState,
    noise_a: &NoiseField,
    noise_b: &NoiseField,
    field_a: &ConnectionField,
    field_b: &ConnectionField,
    weights: &WeightSequence,
    c_one_sided: f64,
) -> PairBoundReport {
    let spec = state_m.spec;
    let t_end = state_m.u[0].t_end();
    let m = state_m.window_m;
    let rho = weights.rho;
    let vm = weights.volume_m();
    let c_j = field_b.space.c_j();

    let mut lhs = 0.0;
    let mut noise_term = 0.0;
    let mut z_sq = 0.0;
    let mut conn_sq = 0.0;
    let mut tail_term = 0.0;
    for (j, &lam) in &weights.values {
        // all configurations are V_n-periodic interpolants
        let x = state_m.site(j);
        let z = state_n.site(j);
        lhs += lam * x.sup_distance(z);
        noise_term += lam * noise_a.path(j).sup_distance(noise_b.path(j));
        let z_sup = z.sup_norm();
        z_sq += lam * z_sup * z_sup;
        for k in crate::lattice::cube(spec.d, m.min(spec.n)) {
            let da = field_a.get(j, &k);
            let db = field_b.get(j, &k);
            let d = field_a.space.dist(da, db);
            conn_sq += lam * d * d;
        }
        // offsets in V_n - V_m of the wider solution's field
        tail_term += lam * field_b.row_tail_norm(j, m) * (z_sup + 1.0);
    }
    let prefactor = (t_end * c_one_sided + t_end * (1.0 + rho) * c_j * vm).exp();
    let rhs = prefactor
        * ((1.0 + rho.sqrt()) * t_end * vm.sqrt() * z_sq.sqrt() * conn_sq.sqrt()
            + 2.0 * noise_term
            + t_end * tail_term);
    let slack = rhs - lhs;
    PairBoundReport {
        lhs,
        rhs,
        slack,
        relative_slack: if rhs > 0.0 { slack / rhs } else { slack },
        noise_term,
        connection_term: conn_sq.sqrt(),
        tail_term,
        prefactor,
    }
}

/// Mean-field comparison baseline:
/// `dX^j = [g(X^j) + N^{-1} Σ_k h(X^j, X^k)] dt + σ dW^j`, with the same
/// FitzHugh-Nagumo internal dynamics and the bounded coupling
/// `h(x, y) = coupling · f(x) f(y)`.
pub fn mean_field_baseline(
    n_particles: usize,
    params: &SolveParams,
    coupling: f64,
    sigma: f64,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> Result<Vec<Trajectory>, SolverError> {
    let steps_f = t_end / dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 {
        return Err(SolverError::BadGrid { dt, t_end });
    }
    let fhn = params.fhn;
    let key = StreamKey::new(seed).with(0x3f);
    let sqrt_dt = dt.sqrt();
    let mut x: Vec<Trajectory> = (0..n_particles)
        .map(|_| Trajectory::zeros(dt, steps))
        .collect();
    let mut w = vec![0.0; n_particles];
    let inv_n = 1.0 / n_particles as f64;
    for i in 0..steps {
        let f_vals: Vec<f64> = (0..n_particles)
            .map(|p| fhn.f.eval(x[p].values[i]))
            .collect();
        let f_mean: f64 = f_vals.iter().sum::<f64>() * inv_n;
        for p in 0..n_particles {
            let u_i = x[p].values[i];
            let drift = u_i - u_i * u_i * u_i / 3.0 - w[p];
            // N^{-1} Σ_k h(X^p, X^k) = coupling f(X^p) mean_k f(X^k)
            let inter = coupling * f_vals[p] * f_mean;
            let dw = sigma * sqrt_dt * key.with(p as u64).normal(i as u64);
            let next = u_i + (drift + inter) * dt + dw;
            if !next.is_finite() || next.abs() > BLOW_UP_THRESHOLD {
                return Err(SolverError::BlowUp {
                    site: LatticeVec(vec![p as i64]),
                    time: (i + 1) as f64 * dt,
                    value: next,
                });
            }
            w[p] = fhn.w_step(w[p], u_i, dt);
            x[p].values[i + 1] = next;
        }
    }
    Ok(x)
}
