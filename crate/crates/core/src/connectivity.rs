//! Sparse random connection fields.
//!
//! Connections take values in a finite metric space with a distinguished
//! null element producing zero interaction. Under the base measure the
//! entries are mutually independent with connect probability
//!
//! ```text
//! P(ω^{j,k} ≠ null) = exp(-υ exp(|V_{‖k‖}|^γ)),   ‖k‖_∞ ≥ m0,
//! ```
//!
//! which decays super-exponentially in the lattice distance; offsets with
//! `‖k‖_∞ < m0` connect with a free probability `p_near`. Correlations are
//! added by tilting the base measure with finite-range potentials: the
//! density relative to the base measure is `exp(-H(ω)) / Z` where `H` sums
//! each potential over all torus translations, and connections at offsets
//! outside `V_m` are read as null (the truncation `ζ(m)`).
//!
//! Sampling from the tilted measure is single-site Metropolis with
//! systematic sweep order and proposals drawn from the base measure, which
//! gives acceptance probability `min(1, exp(-ΔH))` and detailed balance.
//! Tiny systems can instead be enumerated exactly, which the tests use as
//! the sampler's oracle.

use crate::lattice::{cube, LatticeVec, TorusSpec};
use crate::rng::StreamKey;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConnectivityError {
    #[error("connection metric is not a metric: {0}")]
    BadMetric(String),
    #[error("potential {index} has no site with zero first coordinate")]
    PotentialNotAnchored { index: usize },
    #[error("potential {index} table has {found} entries, expected {expected}")]
    BadTableSize {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("state space too large: {pairs} pairs of {elements} elements exceed 2^20 states")]
    StateSpaceTooLarge { pairs: usize, elements: usize },
}

/// A finite connection space: a list of labelled elements, a distinguished
/// null element, and a metric given as a full matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnSpace {
    pub labels: Vec<String>,
    pub null_index: usize,
    pub metric: Vec<Vec<f64>>,
}

impl ConnSpace {
    /// The binary space {null, connected} with `d(null, 1) = j_bar`.
    pub fn binary(j_bar: f64) -> Self {
        ConnSpace {
            labels: vec!["0".into(), "1".into()],
            null_index: 0,
            metric: vec![vec![0.0, j_bar], vec![j_bar, 0.0]],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.metric[a][b]
    }

    /// `‖x‖ = d(null, x)`.
    pub fn norm(&self, e: usize) -> f64 {
        self.metric[self.null_index][e]
    }

    /// The uniform bound `C_J = max_x ‖x‖`.
    pub fn c_j(&self) -> f64 {
        (0..self.len()).map(|e| self.norm(e)).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), ConnectivityError> {
        let n = self.len();
        if self.null_index >= n {
            return Err(ConnectivityError::BadMetric("null index out of range".into()));
        }
        if self.metric.len() != n || self.metric.iter().any(|r| r.len() != n) {
            return Err(ConnectivityError::BadMetric("matrix shape".into()));
        }
        for i in 0..n {
            if self.metric[i][i] != 0.0 {
                return Err(ConnectivityError::BadMetric(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if self.metric[i][j] < 0.0 {
                    return Err(ConnectivityError::BadMetric(format!("negative entry {i},{j}")));
                }
                if (self.metric[i][j] - self.metric[j][i]).abs() > 1e-12 {
                    return Err(ConnectivityError::BadMetric(format!("asymmetric at {i},{j}")));
                }
                for k in 0..n {
                    if self.metric[i][j] > self.metric[i][k] + self.metric[k][j] + 1e-12 {
                        return Err(ConnectivityError::BadMetric(format!(
                            "triangle inequality fails at {i},{j},{k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A sparse connection field over the torus: entries map
/// `(site j ∈ V_n, offset k ∈ V_n)` to a connection-space element;
/// absent entries are null, and offsets outside `V_n` are always null.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionField {
    pub spec: TorusSpec,
    pub space: ConnSpace,
    entries: BTreeMap<(LatticeVec, LatticeVec), usize>,
}

impl ConnectionField {
    pub fn empty(spec: TorusSpec, space: ConnSpace) -> Self {
        ConnectionField {
            spec,
            space,
            entries: BTreeMap::new(),
        }
    }

    /// Element at `(j, k)`; null for absent entries and out-of-cube offsets.
    pub fn get(&self, j: &LatticeVec, k: &LatticeVec) -> usize {
        if !self.spec.contains(k) {
            return self.space.null_index;
        }
        let j = self.spec.mod_torus(j).expect("dimension checked by spec");
        self.entries
            .get(&(j, k.clone()))
            .copied()
            .unwrap_or(self.space.null_index)
    }

    pub fn set(&mut self, j: LatticeVec, k: LatticeVec, element: usize) {
        debug_assert!(self.spec.contains(&k), "offset outside V_n");
        if element == self.space.null_index {
            self.entries.remove(&(j, k));
        } else {
            self.entries.insert((j, k), element);
        }
    }

    /// Non-null entries of row `j`, ordered by offset.
    pub fn row(&self, j: &LatticeVec) -> impl Iterator<Item = (&LatticeVec, usize)> {
        let d = self.spec.d;
        let lo = (j.clone(), LatticeVec(vec![i64::MIN; d]));
        let hi = (j.clone(), LatticeVec(vec![i64::MAX; d]));
        self.entries.range(lo..=hi).map(|((_, k), &e)| (k, e))
    }

    /// All non-null entries, ordered by (site, offset).
    pub fn edges(&self) -> impl Iterator<Item = (&LatticeVec, &LatticeVec, usize)> {
        self.entries.iter().map(|((j, k), &e)| (j, k, e))
    }

    pub fn edge_count(&self) -> usize {
        self.entries.len()
    }

    /// `Σ_{k ∈ V_n, ‖k‖_∞ > m} ‖ω^{j,k}‖`: the tail norm of row `j`.
    pub fn row_tail_norm(&self, j: &LatticeVec, m: i64) -> f64 {
        self.row(j)
            .filter(|(k, _)| k.norm_inf() > m)
            .map(|(_, e)| self.space.norm(e))
            .sum()
    }

    /// `Σ_{k ∈ V_n, ‖k‖_∞ ≤ m} ‖ω^{j,k}‖`.
    pub fn row_window_norm(&self, j: &LatticeVec, m: i64) -> f64 {
        self.row(j)
            .filter(|(k, _)| k.norm_inf() <= m)
            .map(|(_, e)| self.space.norm(e))
            .sum()
    }

    /// The joint shift: `(S̄^r J)^{j,k} = J^{(j+r) mod V_n, k}`. Offsets are
    /// preserved; only the site layer rotates.
    pub fn shift(&self, r: &LatticeVec) -> ConnectionField {
        let mut out = ConnectionField::empty(self.spec, self.space.clone());
        for ((j, k), &e) in &self.entries {
            let src = self.spec.mod_torus(&j.sub(r)).unwrap();
            out.entries.insert((src, k.clone()), e);
        }
        out
    }
}

/// A finite-range potential: a shape of `(site, offset)` pairs relative to
/// the origin (at least one pair must have site 0, anchoring the shape),
/// and a dense table of energies indexed mixed-radix by the elements
/// assigned to the shape's pairs, last pair fastest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub sites: Vec<(LatticeVec, LatticeVec)>,
    pub table: Vec<f64>,
}

impl PotentialSpec {
    pub fn sup_abs(&self) -> f64 {
        self.table.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Number of distinct site coordinates, `|A|_*`.
    pub fn distinct_sites(&self) -> usize {
        self.sites
            .iter()
            .map(|(s, _)| s.clone())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Largest coordinate magnitude over sites and offsets.
    pub fn range(&self) -> i64 {
        self.sites
            .iter()
            .map(|(s, o)| s.norm_inf().max(o.norm_inf()))
            .max()
            .unwrap_or(0)
    }
}

/// Base-measure parameters and Gibbs potentials.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsModel {
    pub space: ConnSpace,
    pub potentials: Vec<PotentialSpec>,
    pub upsilon: f64,
    pub gamma: f64,
    pub m0: i64,
    pub p_near: f64,
}

impl GibbsModel {
    /// Independent base measure only: no potentials.
    pub fn base_only(space: ConnSpace, upsilon: f64, gamma: f64, m0: i64, p_near: f64) -> Self {
        GibbsModel {
            space,
            potentials: Vec::new(),
            upsilon,
            gamma,
            m0,
            p_near,
        }
    }

    pub fn validate(&self) -> Result<(), ConnectivityError> {
        self.space.validate()?;
        for (index, p) in self.potentials.iter().enumerate() {
            if !p.sites.iter().any(|(s, _)| s.norm_inf() == 0) {
                return Err(ConnectivityError::PotentialNotAnchored { index });
            }
            let expected = self.space.len().pow(p.sites.len() as u32);
            if p.table.len() != expected {
                return Err(ConnectivityError::BadTableSize {
                    index,
                    expected,
                    found: p.table.len(),
                });
            }
        }
        Ok(())
    }
}

/// Probability that the connection at offset `k` is non-null under the base
/// measure: `p_near` inside the near range (`‖k‖_∞ < m0`, where the base law
/// is a free choice), and `exp(-υ exp(((2‖k‖+1)^d)^γ))` beyond it. The cube
/// volume at a vector offset is read through its sup norm.
pub fn connect_prob(k: &LatticeVec, model: &GibbsModel) -> f64 {
    let r = k.norm_inf();
    if r < model.m0 {
        return model.p_near;
    }
    let vol = (2.0 * r as f64 + 1.0).powi(k.dim() as i32);
    (-model.upsilon * vol.powf(model.gamma).exp()).exp()
}

/// Draw one element at `(j, k)` from the base measure using the counter
/// stream `key`; non-null mass is split uniformly over non-null elements.
fn base_draw(key: StreamKey, k_offset: &LatticeVec, model: &GibbsModel) -> usize {
    let p = connect_prob(k_offset, model);
    if key.uniform(0) >= p {
        return model.space.null_index;
    }
    let non_null = model.space.len() - 1;
    let pick = key.below(1, non_null as u64) as usize;
    // skip the null slot
    if pick >= model.space.null_index {
        pick + 1
    } else {
        pick
    }
}

/// Sample the independent base field: every `(j ∈ V_n, k ∈ V_n)` entry is
/// non-null with probability `connect_prob(k)`, independently, and the
/// result is a pure function of `seed`.
pub fn sample_base_field(spec: TorusSpec, model: &GibbsModel, seed: u64) -> ConnectionField {
    let key = StreamKey::new(seed).with(0x0f1e);
    let mut field = ConnectionField::empty(spec, model.space.clone());
    for j in spec.sites() {
        let kj = key.with_coords(&j.0);
        for k in spec.sites() {
            let e = base_draw(kj.with_coords(&k.0), &k, model);
            if e != model.space.null_index {
                field.set(j.clone(), k.clone(), e);
            }
        }
    }
    field
}

/// Sum of every translated potential touching the pair set `B`, evaluated
/// on `field` with the truncation `ζ(m)` (offsets outside `V_m` read as
/// null). Translations act on the site layer and wrap around the torus, so
/// the energy is invariant under a joint torus shift of `(field, B)`.
pub fn gibbs_conditional_energy(
    field: &ConnectionField,
    b: &[(LatticeVec, LatticeVec)],
    model: &GibbsModel,
    m: i64,
) -> f64 {
    let spec = field.spec;
    let mut total = 0.0;
    for pot in &model.potentials {
        let mut translations = BTreeSet::new();
        for (a_site, a_off) in &pot.sites {
            for (b_site, b_off) in b {
                if a_off == b_off {
                    translations.insert(spec.mod_torus(&b_site.sub(a_site)).unwrap());
                }
            }
        }
        for t in translations {
            total += eval_potential(field, pot, &t, m);
        }
    }
    total
}

/// Evaluate one potential translated by `t` (site layer, torus-wrapped),
/// with offsets beyond `V_m` read as null.
pub fn eval_potential(field: &ConnectionField, pot: &PotentialSpec, t: &LatticeVec, m: i64) -> f64 {
    let null = field.space.null_index;
    let mut idx = 0usize;
    for (a_site, a_off) in &pot.sites {
        let e = if a_off.norm_inf() > m {
            null
        } else {
            field.get(&t.add(a_site), a_off)
        };
        idx = idx * field.space.len() + e;
    }
    pot.table[idx]
}

/// Total energy of a configuration: every potential summed over all torus
/// translations, with the `ζ(m)` truncation.
pub fn total_energy(field: &ConnectionField, model: &GibbsModel, m: i64) -> f64 {
    let mut total = 0.0;
    for pot in &model.potentials {
        for t in field.spec.sites() {
            total += eval_potential(field, pot, &t, m);
        }
    }
    total
}

/// Single-site Metropolis with systematic sweep order over all
/// `(j, k) ∈ V_n × V_n` pairs, proposals from the base measure and
/// acceptance `min(1, exp(-ΔH))`. Deterministic given `seed`.
pub fn metropolis_sample(
    spec: TorusSpec,
    model: &GibbsModel,
    m: i64,
    sweeps: usize,
    seed: u64,
) -> ConnectionField {
    let mut field = sample_base_field(spec, model, seed);
    metropolis_run(&mut field, model, m, sweeps, seed, |_, _| {});
    field
}

/// Run the chain, calling `observe(sweep_index, &field)` after every sweep.
pub fn metropolis_run(
    field: &mut ConnectionField,
    model: &GibbsModel,
    m: i64,
    sweeps: usize,
    seed: u64,
    mut observe: impl FnMut(usize, &ConnectionField),
) {
    let spec = field.spec;
    let key = StreamKey::new(seed).with(0x3e7);
    let pairs: Vec<(LatticeVec, LatticeVec)> = spec
        .sites()
        .flat_map(|j| spec.sites().map(move |k| (j.clone(), k)))
        .collect();
    for sweep in 0..sweeps {
        let ks = key.with(sweep as u64);
        for (pair_idx, (j, k)) in pairs.iter().enumerate() {
            let kp = ks.with(pair_idx as u64);
            let current = field.get(j, k);
            let proposal = base_draw(kp, k, model);
            if proposal == current {
                continue;
            }
            let b = [(j.clone(), k.clone())];
            let before = gibbs_conditional_energy(field, &b, model, m);
            field.set(j.clone(), k.clone(), proposal);
            let after = gibbs_conditional_energy(field, &b, model, m);
            let delta = after - before;
            // accept with min(1, e^{-ΔH}); a move with ΔH = 0 always accepts
            if delta > 0.0 && kp.uniform(2) >= (-delta).exp() {
                field.set(j.clone(), k.clone(), current); // reject
            }
        }
        observe(sweep, field);
    }
}

/// An exactly enumerated distribution over connection configurations on a
/// fixed pair domain. Configurations are indexed mixed-radix over `pairs`
/// (last pair fastest), with digit = element index.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub spec: TorusSpec,
    pub pairs: Vec<(LatticeVec, LatticeVec)>,
    pub n_elements: usize,
    pub probs: Vec<f64>,
    /// log of the normalisation constant `Z = Σ μ0(ω) exp(-H(ω))`.
    pub log_z: f64,
}

impl ExactDistribution {
    pub fn field_for(&self, index: usize, space: &ConnSpace) -> ConnectionField {
        let mut field = ConnectionField::empty(self.spec, space.clone());
        for (pos, (j, k)) in self.pairs.iter().enumerate().rev() {
            let radix = self.n_elements.pow((self.pairs.len() - 1 - pos) as u32);
            let e = (index / radix) % self.n_elements;
            if e != space.null_index {
                field.set(j.clone(), k.clone(), e);
            }
        }
        field
    }

    /// Marginal distribution of the element at one pair.
    pub fn marginal(&self, pair_index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_elements];
        let radix = self
            .n_elements
            .pow((self.pairs.len() - 1 - pair_index) as u32);
        for (idx, &p) in self.probs.iter().enumerate() {
            out[(idx / radix) % self.n_elements] += p;
        }
        out
    }
}

/// Enumerate the exact tilted distribution over pairs
/// `(j ∈ V_n, k ∈ V_{min(offset_radius, n)})`. Errors out past 2^20 states.
pub fn enumerate_exact_window(
    spec: TorusSpec,
    model: &GibbsModel,
    m: i64,
    offset_radius: i64,
) -> Result<ExactDistribution, ConnectivityError> {
    let off_r = offset_radius.min(spec.n);
    let pairs: Vec<(LatticeVec, LatticeVec)> = spec
        .sites()
        .flat_map(|j| cube(spec.d, off_r).map(move |k| (j.clone(), k)))
        .collect();
    let elements = model.space.len();
    let states = (elements as f64).powi(pairs.len() as i32);
    if states > (1u64 << 20) as f64 {
        return Err(ConnectivityError::StateSpaceTooLarge {
            pairs: pairs.len(),
            elements,
        });
    }
    let states = states as usize;
    let base_log: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(_, k)| {
            let p = connect_prob(k, model);
            (0..elements)
                .map(|e| {
                    if e == model.space.null_index {
                        (1.0 - p).ln()
                    } else {
                        (p / (elements - 1) as f64).ln()
                    }
                })
                .collect()
        })
        .collect();

    let mut log_weights = Vec::with_capacity(states);
    let dist_stub = ExactDistribution {
        spec,
        pairs: pairs.clone(),
        n_elements: elements,
        probs: Vec::new(),
        log_z: 0.0,
    };
    for idx in 0..states {
        let field = dist_stub.field_for(idx, &model.space);
        let mut lw = -total_energy(&field, model, m);
        let mut rem = idx;
        for pos in (0..pairs.len()).rev() {
            lw += base_log[pos][rem % elements];
            rem /= elements;
        }
        log_weights.push(lw);
    }
    let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_weights.iter().map(|lw| (lw - max_lw).exp()).collect();
    let z_shifted: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z_shifted;
    }
    Ok(ExactDistribution {
        spec,
        pairs,
        n_elements: elements,
        probs,
        log_z: max_lw + z_shifted.ln(),
    })
}

/// Enumerate over the full offset cube `k ∈ V_n`.
pub fn enumerate_exact(
    spec: TorusSpec,
    model: &GibbsModel,
    m: i64,
) -> Result<ExactDistribution, ConnectivityError> {
    enumerate_exact_window(spec, model, m, spec.n)
}

/// Apply one full systematic Metropolis sweep, as a Markov kernel, to an
/// exact distribution vector. Used to certify that the chain holds the
/// enumerated target invariant.
pub fn sweep_kernel_apply(dist: &ExactDistribution, model: &GibbsModel, m: i64) -> Vec<f64> {
    let elements = dist.n_elements;
    let mut probs = dist.probs.clone();
    for (pos, (j, k)) in dist.pairs.iter().enumerate() {
        let radix = elements.pow((dist.pairs.len() - 1 - pos) as u32);
        // base proposal law at this pair
        let p_conn = connect_prob(k, model);
        let proposal: Vec<f64> = (0..elements)
            .map(|e| {
                if e == model.space.null_index {
                    1.0 - p_conn
                } else {
                    p_conn / (elements - 1) as f64
                }
            })
            .collect();
        let mut next = vec![0.0; probs.len()];
        for (idx, &mass) in probs.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let current = (idx / radix) % elements;
            let field = dist.field_for(idx, &model.space);
            let b = [(j.clone(), k.clone())];
            let e_current = gibbs_conditional_energy(&field, &b, model, m);
            let mut stay = 0.0;
            for (e, &q) in proposal.iter().enumerate() {
                if e == current {
                    stay += q;
                    continue;
                }
                let mut moved = field.clone();
                moved.set(j.clone(), k.clone(), e);
                let e_new = gibbs_conditional_energy(&moved, &b, model, m);
                let accept = (-(e_new - e_current)).exp().min(1.0);
                let target = (idx as i64 + (e as i64 - current as i64) * radix as i64) as usize;
                next[target] += mass * q * accept;
                stay += q * (1.0 - accept);
            }
            next[idx] += mass * stay;
        }
        probs = next;
    }
    probs
}

/// Total-variation distance between two distributions on the same index set.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// `ε_p = Σ sup|Φ_A|` over potentials (with their anchored translates)
/// whose shape is not contained in the double cube
/// `V̄_p = {(j,k) : j, k ∈ V_p}`. Non-increasing in `p`, and zero once `p`
/// exceeds every potential's range.
pub fn phi_tail_epsilon(model: &GibbsModel, p: i64) -> f64 {
    let mut total = 0.0;
    for pot in &model.potentials {
        let coords: BTreeSet<LatticeVec> = pot.sites.iter().map(|(s, _)| s.clone()).collect();
        for c in coords {
            // the anchored translate by -c keeps a zero site coordinate
            let contained = pot.sites.iter().all(|(s, o)| {
                s.sub(&c).norm_inf() <= p && o.norm_inf() <= p
            });
            if !contained {
                total += pot.sup_abs();
            }
        }
    }
    total
}
