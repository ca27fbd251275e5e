//! Empirical measures, marginal projections, Lévy-Prokhorov distances, and
//! the `A_c` membership thresholds.
//!
//! An empirical measure here is the uniform mixture of the `|V_n|` torus
//! shifts of one periodic interpolant: atom `j` is `S^j X̃` with weight
//! `1/|V_n|`. The double-layer variant shifts noise paths and connection
//! rows jointly. Both are stationary by construction.
//!
//! On finite atom sets the Lévy-Prokhorov distance
//!
//! ```text
//! d^P(A, B) = inf { ε : A(S) ≤ B(S^ε) + ε and B(S) ≤ A(S^ε) + ε for all S }
//! ```
//!
//! is computed exactly. By Strassen's coupling characterisation the subset
//! conditions at level ε are equivalent to a feasible coupling of mass
//! ≥ 1 - ε supported on pairs within distance ε, so each candidate ε is
//! tested with a bipartite max-flow. The optimum has the form
//! `min_δ max(δ, 1 - F(δ))` over the finite set of pairwise distances δ.
//! Weights are dyadic rationals (they are f64s), so the flow runs on exact
//! integer numerators and the result carries no arithmetic slop beyond the
//! final conversion back to f64.
//!
//! The product metric `d^P(μ, ν) = Σ_j min(2^{-j}, d_j^P(marginals))` is
//! truncated at `j_max` with the `2^{-j_max}` remainder reported, never
//! silently dropped.

use crate::connectivity::ConnectionField;
use crate::dynamics::Trajectory;
use crate::lattice::{cube, TorusSpec};
use crate::solver::{NetworkState, NoiseField};
use serde::{Deserialize, Serialize};

/// Empirical measure of a trajectory configuration: the `|V_n|` torus
/// shifts of the stored periodic interpolant, each with weight `1/|V_n|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryMeasure {
    pub spec: TorusSpec,
    pub dt: f64,
    pub paths: Vec<Trajectory>,
}

impl TrajectoryMeasure {
    pub fn atom_count(&self) -> usize {
        self.spec.volume()
    }
}

/// Build the empirical measure of a network state.
pub fn empirical_measure(state: &NetworkState) -> TrajectoryMeasure {
    TrajectoryMeasure {
        spec: state.spec,
        dt: state.dt,
        paths: state.u.clone(),
    }
}

/// Double-layer empirical measure: each atom carries the shifted noise
/// paths together with the shifted connection rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoubleLayerMeasure {
    pub spec: TorusSpec,
    pub dt: f64,
    pub noise: Vec<Trajectory>,
    pub field: ConnectionField,
}

pub fn double_layer_measure(noise: &NoiseField, field: &ConnectionField) -> DoubleLayerMeasure {
    assert_eq!(noise.spec, field.spec, "noise and field specs must agree");
    DoubleLayerMeasure {
        spec: noise.spec,
        dt: noise.dt,
        noise: noise.paths.clone(),
        field: field.clone(),
    }
}

/// A finite weighted atom set; weights are positive and sum to ~1.
#[derive(Clone, Debug)]
pub struct WeightedAtoms<A> {
    pub atoms: Vec<A>,
    pub weights: Vec<f64>,
}

impl<A> WeightedAtoms<A> {
    pub fn uniform(atoms: Vec<A>) -> Self {
        let w = 1.0 / atoms.len() as f64;
        let weights = vec![w; atoms.len()];
        WeightedAtoms { atoms, weights }
    }
}

/// A projected trajectory window: one path per site of `V_q`, cube order.
pub type TrajWindow = Vec<Vec<f64>>;

/// Project the measure onto the `V_q` marginal: every atom becomes the
/// window of site paths it shows on `V_q` (periodic wraparound, so any
/// `q` is representable).
pub fn project_marginal(mu: &TrajectoryMeasure, q: i64) -> WeightedAtoms<TrajWindow> {
    let spec = mu.spec;
    let atoms = spec
        .sites()
        .map(|s| {
            cube(spec.d, q)
                .map(|j| mu.paths[spec.rank(&j.add(&s))].values.clone())
                .collect()
        })
        .collect();
    WeightedAtoms::uniform(atoms)
}

/// Sum over window sites of the grid sup distance:
/// `‖x - y‖_{T,q} = Σ_{j∈V_q} ‖x^j - y^j‖_T`.
pub fn traj_window_dist(a: &TrajWindow, b: &TrajWindow) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        })
        .sum()
}

/// A projected double-layer window: noise paths on `V_q` plus the
/// connection block `ω^{j,k}` for `j, k ∈ V_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleWindow {
    pub noise: TrajWindow,
    /// element indices, row-major over (site, offset) in cube order
    pub conn: Vec<usize>,
}

/// Project the double-layer measure onto the `V̄_q` marginal.
pub fn project_marginal_double(mu: &DoubleLayerMeasure, q: i64) -> WeightedAtoms<DoubleWindow> {
    let spec = mu.spec;
    let atoms = spec
        .sites()
        .map(|s| {
            let noise = cube(spec.d, q)
                .map(|j| mu.noise[spec.rank(&j.add(&s))].values.clone())
                .collect();
            let conn = cube(spec.d, q)
                .flat_map(|j| {
                    let site = j.add(&s);
                    cube(spec.d, q)
                        .map(move |k| (site.clone(), k))
                })
                .map(|(site, k)| mu.field.get(&site, &k))
                .collect();
            DoubleWindow { noise, conn }
        })
        .collect();
    WeightedAtoms::uniform(atoms)
}

/// The double-layer window metric: sup-norm sum over the noise layer plus
/// the root-sum-square of the connection distances,
/// `d̄_q(Y, Z) = Σ_j ‖R^j - X^j‖_T + (Σ_{j,k} d(ω^{j,k}, β^{j,k})²)^{1/2}`.
pub fn double_window_dist(
    a: &DoubleWindow,
    b: &DoubleWindow,
    space: &crate::connectivity::ConnSpace,
) -> f64 {
    let noise_part = traj_window_dist(&a.noise, &b.noise);
    let conn_sq: f64 = a
        .conn
        .iter()
        .zip(&b.conn)
        .map(|(&x, &y)| {
            let d = space.dist(x, y);
            d * d
        })
        .sum();
    noise_part + conn_sq.sqrt()
}

/// Exact dyadic integerisation of a weight vector: returns numerators and
/// the shared power-of-two exponent L with `w_i = num_i / 2^L` exactly.
fn dyadic_numerators(weights: &[f64]) -> (Vec<u128>, i32) {
    let mut l = 0i32;
    for &w in weights {
        assert!(w > 0.0 && w.is_finite(), "atom weights must be positive and finite");
        let mut x = w;
        let mut lw = 0i32;
        while x.fract() != 0.0 {
            x *= 2.0; // exact scaling
            lw += 1;
        }
        l = l.max(lw);
    }
    assert!(l <= 100, "weights too extreme for exact dyadic arithmetic");
    let nums = weights
        .iter()
        .map(|&w| {
            let scaled = w * (l as f64).exp2();
            debug_assert_eq!(scaled.fract(), 0.0);
            scaled as u128
        })
        .collect();
    (nums, l)
}

/// Dinic max-flow on u128 capacities.
struct Dinic {
    graph: Vec<Vec<(usize, u128, usize)>>, // (to, cap, reverse index)
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            graph: vec![Vec::new(); n],
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u128) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push((to, cap, rev_from));
        self.graph[to].push((from, 0, rev_to));
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.fill(-1);
        let mut queue = std::collections::VecDeque::new();
        self.level[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &(to, cap, _) in &self.graph[v] {
                if cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
        self.level[sink] >= 0
    }

    fn dfs(&mut self, v: usize, sink: usize, f: u128) -> u128 {
        if v == sink {
            return f;
        }
        while self.iter[v] < self.graph[v].len() {
            let (to, cap, rev) = self.graph[v][self.iter[v]];
            if cap > 0 && self.level[v] < self.level[to] {
                let d = self.dfs(to, sink, f.min(cap));
                if d > 0 {
                    self.graph[v][self.iter[v]].1 -= d;
                    self.graph[to][rev].1 += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> u128 {
        let mut flow = 0u128;
        while self.bfs(source, sink) {
            self.iter.fill(0);
            loop {
                let f = self.dfs(source, sink, u128::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// Largest coupling numerator over pairs within distance `delta`:
/// source caps `num_a`, sink caps `num_b`, edges where `dmat ≤ delta`.
fn coupling_flow(num_a: &[u128], num_b: &[u128], dmat: &[Vec<f64>], delta: f64) -> u128 {
    let na = num_a.len();
    let nb = num_b.len();
    let source = na + nb;
    let sink = na + nb + 1;
    let mut dinic = Dinic::new(na + nb + 2);
    for (i, &w) in num_a.iter().enumerate() {
        dinic.add_edge(source, i, w);
    }
    for (j, &w) in num_b.iter().enumerate() {
        dinic.add_edge(na + j, sink, w);
    }
    for i in 0..na {
        for j in 0..nb {
            if dmat[i][j] <= delta {
                dinic.add_edge(i, na + j, u128::MAX / 4);
            }
        }
    }
    dinic.max_flow(source, sink)
}

/// The exact Lévy-Prokhorov distance between two finite weighted atom sets
/// under the supplied atom metric.
pub fn lp_distance_finite<A>(
    a: &WeightedAtoms<A>,
    b: &WeightedAtoms<A>,
    metric: impl Fn(&A, &A) -> f64,
) -> f64 {
    let dmat: Vec<Vec<f64>> = a
        .atoms
        .iter()
        .map(|x| b.atoms.iter().map(|y| metric(x, y)).collect())
        .collect();
    let all_weights: Vec<f64> = a.weights.iter().chain(&b.weights).copied().collect();
    let (nums, l) = dyadic_numerators(&all_weights);
    let (num_a, num_b) = nums.split_at(a.weights.len());
    let total_a: u128 = num_a.iter().sum();
    let total_b: u128 = num_b.iter().sum();
    let total = total_a.max(total_b);
    let scale = (-(l as f64)).exp2();

    let mut candidates: Vec<f64> = dmat.iter().flatten().copied().collect();
    candidates.push(0.0);
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.dedup();

    let mut best = f64::INFINITY;
    for &delta in &candidates {
        let flow = coupling_flow(num_a, num_b, &dmat, delta);
        let deficiency = ((total - flow) as f64) * scale;
        best = best.min(delta.max(deficiency));
        if deficiency <= delta {
            // F(δ) only grows with δ, so no later candidate can beat δ
            break;
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DpResult {
    /// `Σ_{j=1}^{j_max} min(2^{-j}, d_j^P)`.
    pub value: f64,
    /// The geometric remainder `2^{-j_max}` the truncation leaves unbounded.
    pub truncation_bound: f64,
    pub per_level: Vec<f64>,
}

/// Truncated product metric on trajectory empirical measures.
pub fn dp_truncated(a: &TrajectoryMeasure, b: &TrajectoryMeasure, j_max: u32) -> DpResult {
    let mut value = 0.0;
    let mut per_level = Vec::with_capacity(j_max as usize);
    for j in 1..=j_max {
        let pa = project_marginal(a, j as i64);
        let pb = project_marginal(b, j as i64);
        let d = lp_distance_finite(&pa, &pb, traj_window_dist);
        let term = d.min((-(j as f64)).exp2());
        per_level.push(d);
        value += term;
    }
    DpResult {
        value,
        truncation_bound: (-(j_max as f64)).exp2(),
        per_level,
    }
}

/// Truncated product metric on double-layer empirical measures.
pub fn dp_truncated_double(
    a: &DoubleLayerMeasure,
    b: &DoubleLayerMeasure,
    j_max: u32,
) -> DpResult {
    let space = a.field.space.clone();
    let mut value = 0.0;
    let mut per_level = Vec::with_capacity(j_max as usize);
    for j in 1..=j_max {
        let pa = project_marginal_double(a, j as i64);
        let pb = project_marginal_double(b, j as i64);
        let d = lp_distance_finite(&pa, &pb, |x, y| double_window_dist(x, y, &space));
        let term = d.min((-(j as f64)).exp2());
        per_level.push(d);
        value += term;
    }
    DpResult {
        value,
        truncation_bound: (-(j_max as f64)).exp2(),
        per_level,
    }
}

/// Thresholds defining the compactness sets `A_c`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AcThresholds {
    pub c: f64,
    pub rho: f64,
    pub c_j: f64,
    pub t_end: f64,
    pub m0: i64,
    pub m_max: i64,
}

/// Per-m evaluation of the three `A_c` conditions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcRow {
    pub m: i64,
    /// `E[(Σ_{k∉V_m} ‖ω^{0,k}‖)²]` under the empirical measure.
    pub tail_sq_moment: f64,
    /// `E[Σ_{k∉V_m} ‖ω^{0,k}‖]`.
    pub tail_moment: f64,
    /// Threshold for the squared moment at c = 1.
    pub threshold_sq_unit: f64,
    /// Threshold for the first moment at c = 1.
    pub threshold_first_unit: f64,
    /// Smallest c making both tail conditions hold at this m.
    pub required_c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcReport {
    /// `E[‖X^0‖²_T]` under the empirical measure (m-independent).
    pub noise_sq_moment: f64,
    pub rows: Vec<AcRow>,
    /// Smallest admissible c over all three conditions and all m.
    pub smallest_c: f64,
    /// Whether the configured `thr.c` admits the measure.
    pub member: bool,
}

/// Evaluate the `A_c` membership conditions of the double-layer empirical
/// measure:
///
/// ```text
/// E‖X^0‖²_T ≤ c,
/// E[(Σ_{k∉V_m}‖ω^{0,k}‖)²] ≤ c e^{-(4+2ρ) T C_J |V_m|} |V_m|^{-2ρ-2},
/// E[Σ_{k∉V_m}‖ω^{0,k}‖]    ≤ c e^{-(3+ρ) T C_J |V_m|} |V_m|^{-ρ-1},
/// ```
///
/// for every `m ∈ [m0, m_max]`, and report the smallest admissible `c`.
pub fn ac_membership(mu: &DoubleLayerMeasure, thr: &AcThresholds) -> AcReport {
    let spec = mu.spec;
    let volume = spec.volume() as f64;
    let noise_sq_moment = mu
        .noise
        .iter()
        .map(|p| {
            let s = p.sup_norm();
            s * s
        })
        .sum::<f64>()
        / volume;
    let mut rows = Vec::new();
    let mut smallest_c = noise_sq_moment;
    for m in thr.m0..=thr.m_max {
        let vm = (2.0 * m as f64 + 1.0).powi(spec.d as i32);
        let (mut sq, mut first) = (0.0, 0.0);
        for j in spec.sites() {
            let tail = mu.field.row_tail_norm(&j, m);
            sq += tail * tail;
            first += tail;
        }
        sq /= volume;
        first /= volume;
        let threshold_sq_unit = (-(4.0 + 2.0 * thr.rho) * thr.t_end * thr.c_j * vm).exp()
            * vm.powf(-2.0 * thr.rho - 2.0);
        let threshold_first_unit =
            (-(3.0 + thr.rho) * thr.t_end * thr.c_j * vm).exp() * vm.powf(-thr.rho - 1.0);
        let required_c = (sq / threshold_sq_unit).max(first / threshold_first_unit);
        smallest_c = smallest_c.max(required_c);
        rows.push(AcRow {
            m,
            tail_sq_moment: sq,
            tail_moment: first,
            threshold_sq_unit,
            threshold_first_unit,
            required_c,
        });
    }
    AcReport {
        noise_sq_moment,
        rows,
        smallest_c,
        member: smallest_c <= thr.c,
    }
}

/// The network average `H_n = |V_n|^{-1} Σ_j g(S^j Ũ)` of a bounded
/// functional of `V_q` windows; `g` receives the window's site paths in
/// cube order.
pub fn path_average_hn(
    state: &NetworkState,
    q: i64,
    g: impl Fn(&[&[f64]]) -> f64,
) -> f64 {
    let spec = state.spec;
    let mut total = 0.0;
    for s in spec.sites() {
        let window: Vec<&[f64]> = cube(spec.d, q)
            .map(|j| state.site(&j.add(&s)).values.as_slice())
            .collect();
        total += g(&window);
    }
    total / spec.volume() as f64
}
