//! Independent oracles shared by the integration tests. Everything here
//! recomputes its target quantity by a different route than the library:
//! the weight sequences by Neumann-series convolution powers instead of
//! Fourier quadrature, and the Lévy-Prokhorov distance by exhaustive
//! subset enumeration instead of max-flow.

use std::collections::BTreeMap;

/// One-dimensional Neumann-series weights:
///
///   λ_m^j = (h / ρ|V_m|) Σ_{k≥0} (ρ|V_m|)^{-k} (κ_m^{*k})^j,  h = (ρ-1)|V_m|,
///
/// with κ_m the indicator of [-m, m] and convolution powers accumulated
/// until the remaining series mass ρ^{-(K+1)} drops below 1e-12.
pub struct NeumannWeights {
    pub values: BTreeMap<i64, f64>,
    /// Bound on the mass the truncated series leaves out.
    pub series_remainder: f64,
}

pub fn neumann_weights_1d(m: i64, rho: f64) -> NeumannWeights {
    let vm = (2 * m + 1) as f64;
    let h = (rho - 1.0) * vm;
    let prefactor = h / (rho * vm);
    let ratio = 1.0 / (rho * vm);

    // dense arrays centred at 0; conv^0 = delta_0
    let mut power: Vec<f64> = vec![1.0];
    let mut power_center = 0i64; // index of j = 0
    let mut values: BTreeMap<i64, f64> = BTreeMap::new();
    let mut k = 0u32;
    let mut scale = prefactor; // prefactor * (ρ|V_m|)^{-k}
    loop {
        for (idx, &v) in power.iter().enumerate() {
            if v != 0.0 {
                let j = idx as i64 - power_center;
                *values.entry(j).or_insert(0.0) += scale * v;
            }
        }
        // remaining mass after terms 0..=k is ρ^{-(k+1)}
        let remainder = rho.powi(-(k as i32) - 1);
        if remainder < 1e-12 {
            return NeumannWeights {
                values,
                series_remainder: remainder,
            };
        }
        // next convolution power with the indicator of [-m, m]
        let new_len = power.len() + 2 * m as usize;
        let mut next = vec![0.0; new_len];
        for (idx, &v) in power.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for off in 0..=(2 * m as usize) {
                next[idx + off] += v;
            }
        }
        power = next;
        power_center += m;
        k += 1;
        scale *= ratio;
    }
}

/// Exhaustive-subset Lévy-Prokhorov oracle over weighted atom sets given
/// their distance matrix. Works on the same dyadic-integer scaling of the
/// f64 weights as the library so results are comparable exactly, but
/// evaluates the subset deficiencies `max_S (A(S) - B(S^δ))` directly
/// instead of through a flow.
pub fn lp_brute_force(weights_a: &[f64], weights_b: &[f64], dmat: &[Vec<f64>]) -> f64 {
    let (num_a, num_b, l) = dyadic(weights_a, weights_b);
    let scale = (-(l as f64)).exp2();
    let na = weights_a.len();
    let nb = weights_b.len();

    let mut candidates: Vec<f64> = dmat.iter().flatten().copied().collect();
    candidates.push(0.0);
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.dedup();

    let mut best = f64::INFINITY;
    for &delta in &candidates {
        // deficiency of A against B's δ-enlargements
        let mut worst: i128 = 0;
        for mask in 0u32..(1 << na) {
            let mut a_mass: i128 = 0;
            let mut b_mass: i128 = 0;
            for j in 0..nb {
                let mut in_enlargement = false;
                for i in 0..na {
                    if mask & (1 << i) != 0 && dmat[i][j] <= delta {
                        in_enlargement = true;
                        break;
                    }
                }
                if in_enlargement {
                    b_mass += num_b[j] as i128;
                }
            }
            for (i, &w) in num_a.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    a_mass += w as i128;
                }
            }
            worst = worst.max(a_mass - b_mass);
        }
        // and symmetrically for B against A
        for mask in 0u32..(1 << nb) {
            let mut b_mass: i128 = 0;
            let mut a_mass: i128 = 0;
            for i in 0..na {
                let mut in_enlargement = false;
                for j in 0..nb {
                    if mask & (1 << j) != 0 && dmat[i][j] <= delta {
                        in_enlargement = true;
                        break;
                    }
                }
                if in_enlargement {
                    a_mass += num_a[i] as i128;
                }
            }
            for (j, &w) in num_b.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    b_mass += w as i128;
                }
            }
            worst = worst.max(b_mass - a_mass);
        }
        let deficiency = worst.max(0) as f64 * scale;
        best = best.min(delta.max(deficiency));
    }
    best
}

fn dyadic(weights_a: &[f64], weights_b: &[f64]) -> (Vec<u128>, Vec<u128>, i32) {
    let mut l = 0i32;
    for &w in weights_a.iter().chain(weights_b) {
        assert!(w > 0.0 && w.is_finite());
        let mut x = w;
        let mut lw = 0;
        while x.fract() != 0.0 {
            x *= 2.0;
            lw += 1;
        }
        l = l.max(lw);
    }
    let conv = |ws: &[f64]| -> Vec<u128> {
        ws.iter().map(|&w| (w * (l as f64).exp2()) as u128).collect()
    };
    (conv(weights_a), conv(weights_b), l)
}
