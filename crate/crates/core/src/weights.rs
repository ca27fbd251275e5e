//! The summable weight sequences `λ_m^j` controlling truncation error.
//!
//! With `κ_m^k = 1_{k ∈ V_m}` and its Fourier series
//! `κ̃_m(θ) = Σ_k κ_m^k exp(-i⟨θ,k⟩)` (a product of Dirichlet kernels),
//! the weights are the Fourier coefficients of
//!
//! ```text
//! λ̃_m(θ) = h (ρ|V_m| - κ̃_m(θ))^{-1},    ρ > 1,
//! λ_m^j   = (2π)^{-d} ∫ exp(i⟨θ,j⟩) λ̃_m(θ) dθ.
//! ```
//!
//! Two normalisations of `h` are in circulation and they differ:
//! `(2π)^{-d} ∫ λ̃_m dθ = 1` pins the j = 0 coefficient to 1, while the
//! identities actually used downstream,
//!
//! ```text
//! Σ_j λ_m^j = 1,    λ_m^j > 0,    Σ_{k∈V_m} λ_m^{j-k} κ_m^k ≤ ρ|V_m| λ_m^j,
//! ```
//!
//! need `Σ_j λ_m^j = λ̃_m(0) = 1`, i.e. `h = (ρ-1)|V_m|`. This module
//! builds the sum-normalised family (so the identities above are certifiable)
//! and also reports the integral-normalised value `h_integral` obtained by
//! quadrature, together with its lower bound `h ≥ |V_m|(ρ-1)`.
//!
//! Quadrature is the tensor-product trapezoid rule on a uniform periodic
//! grid of `(2K+1)^d` points with `K ≥ 64(2m+1)` by default; the integrand
//! is smooth and periodic so the rule converges spectrally. Grid sums are
//! accumulated pairwise so the result is independent of evaluation order.

use crate::lattice::{cube, LatticeVec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("rho must exceed 1, got {0}")]
    RhoTooSmall(f64),
    #[error("window radius {window} is smaller than m = {m}")]
    WindowTooSmall { window: i64, m: i64 },
    #[error("quadrature failed to stabilize: relative change {rel:.3e} after grid doubling")]
    QuadratureNotConverged { rel: f64 },
    #[error("quadrature produced a non-positive weight at {at:?}: {value}")]
    NonPositiveWeight { at: LatticeVec, value: f64 },
}

/// Quadrature resolution: the grid has `2k+1` points per dimension.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub k: usize,
}

impl QuadratureGrid {
    /// Default resolution for window radius m: `K = 64(2m+1)`.
    pub fn for_m(m: i64) -> Self {
        QuadratureGrid {
            k: 64 * (2 * m as usize + 1),
        }
    }

    fn points(&self) -> usize {
        2 * self.k + 1
    }
}

/// Pairwise (cascade) summation: order-stable and accurate for long sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// The real Dirichlet kernel product
/// `κ̃_m(θ) = ∏_p sin((2m+1)θ_p/2) / sin(θ_p/2)`,
/// with the removable singularity at `θ_p = 0` evaluated by series,
/// so `κ̃_m(0) = (2m+1)^d = |V_m|`.
pub fn dirichlet_kernel(theta: &[f64], m: i64) -> f64 {
    let a = (2 * m + 1) as f64;
    theta
        .iter()
        .map(|&t| {
            if t.abs() < 1e-8 {
                // sin(a t/2)/sin(t/2) = a (1 - (a^2-1) t^2/24 + O(t^4))
                a * (1.0 - (a * a - 1.0) * t * t / 24.0)
            } else {
                (a * t / 2.0).sin() / (t / 2.0).sin()
            }
        })
        .product()
}

/// Uniform periodic grid over `[-π, π)`: `θ_i = -π + 2πi/N`.
fn grid_points(n: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    (0..n).map(|i| -std::f64::consts::PI + i as f64 * step).collect()
}

/// Mean of `f` over the full tensor grid, i.e. the trapezoid value of
/// `(2π)^{-d} ∫ f dθ` for a 2π-periodic integrand.
fn grid_mean(d: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let pts = grid_points(n);
    let mut theta = vec![0.0; d];
    let mut values = Vec::with_capacity(n.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        for (p, &i) in idx.iter().enumerate() {
            theta[p] = pts[i];
        }
        values.push(f(&theta));
        // odometer
        let mut p = d;
        loop {
            if p == 0 {
                let total = pairwise_sum(&values);
                return total / values.len() as f64;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < n {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// The integral-normalised `h`: the value making
/// `(2π)^{-d} ∫ h (ρ|V_m| - κ̃_m(θ))^{-1} dθ = 1`,
/// computed by trapezoid quadrature with one grid doubling as a
/// convergence check (relative tolerance 1e-10). Satisfies
/// `h ≥ |V_m|(ρ-1)` since `κ̃_m ≤ |V_m|`.
pub fn normalizer_h(m: i64, rho: f64, d: usize, grid: QuadratureGrid) -> Result<f64, WeightsError> {
    if rho <= 1.0 {
        return Err(WeightsError::RhoTooSmall(rho));
    }
    let vm = (2.0 * m as f64 + 1.0).powi(d as i32);
    let integrand = |theta: &[f64]| 1.0 / (rho * vm - dirichlet_kernel(theta, m));
    let coarse = grid_mean(d, grid.points(), integrand);
    let fine = grid_mean(d, 2 * grid.points() + 1, integrand);
    let rel = ((fine - coarse) / fine).abs();
    if rel > 1e-10 {
        return Err(WeightsError::QuadratureNotConverged { rel });
    }
    Ok(1.0 / fine)
}

/// The weight family `λ_m^j` on the window `‖j‖_∞ ≤ R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightSequence {
    pub m: i64,
    pub rho: f64,
    pub d: usize,
    pub window_radius: i64,
    /// `λ_m^j` for every `j` in the window, keyed lexicographically.
    pub values: BTreeMap<LatticeVec, f64>,
    /// `1 - Σ_{stored} λ_m^j`: the mass the window does not capture.
    /// Recorded rather than renormalised so identity checks stay honest.
    pub tail_mass: f64,
    /// Integral-normalised `h` from [`normalizer_h`], reported as a certificate.
    pub h_integral: f64,
    /// The scale actually applied to the Fourier coefficients so that
    /// `Σ_{j∈Z^d} λ_m^j = λ̃_m(0) = 1`; equals `(ρ-1)|V_m|`.
    pub mass_scale: f64,
}

impl WeightSequence {
    pub fn volume_m(&self) -> f64 {
        (2.0 * self.m as f64 + 1.0).powi(self.d as i32)
    }

    pub fn get(&self, j: &LatticeVec) -> Option<f64> {
        self.values.get(j).copied()
    }

    pub fn stored_sum(&self) -> f64 {
        let vals: Vec<f64> = self.values.values().copied().collect();
        pairwise_sum(&vals)
    }
}

/// Compute `λ_m^j` for `‖j‖_∞ ≤ window` by trapezoid quadrature of the
/// Fourier inversion integral, scaled so the full-lattice sum is 1.
/// Each coefficient is checked for stability under one grid doubling.
pub fn compute_weights(
    m: i64,
    rho: f64,
    d: usize,
    window: i64,
    grid: QuadratureGrid,
) -> Result<WeightSequence, WeightsError> {
    if rho <= 1.0 {
        return Err(WeightsError::RhoTooSmall(rho));
    }
    if window < m {
        return Err(WeightsError::WindowTooSmall { window, m });
    }
    let vm = (2.0 * m as f64 + 1.0).powi(d as i32);
    let scale = (rho - 1.0) * vm;
    let h_integral = normalizer_h(m, rho, d, grid)?;

    let coeff = |j: &LatticeVec, n_pts: usize| -> f64 {
        grid_mean(d, n_pts, |theta| {
            let dot: f64 = theta.iter().zip(&j.0).map(|(t, &c)| t * c as f64).sum();
            dot.cos() / (rho * vm - dirichlet_kernel(theta, m))
        })
    };

    let mut values = BTreeMap::new();
    for j in cube(d, window) {
        let coarse = coeff(&j, grid.points());
        let fine = coeff(&j, 2 * grid.points() + 1);
        let lambda = scale * fine;
        let rel = (scale * coarse - lambda).abs() / lambda.abs().max(1e-300);
        if rel > 1e-9 {
            return Err(WeightsError::QuadratureNotConverged { rel });
        }
        if lambda <= 0.0 {
            return Err(WeightsError::NonPositiveWeight { at: j, value: lambda });
        }
        values.insert(j, lambda);
    }
    let stored: Vec<f64> = values.values().copied().collect();
    let tail_mass = 1.0 - pairwise_sum(&stored);
    Ok(WeightSequence {
        m,
        rho,
        d,
        window_radius: window,
        values,
        tail_mass,
        h_integral,
        mass_scale: scale,
    })
}

/// One certificate row per window index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateRow {
    pub j: LatticeVec,
    /// `ρ|V_m| λ_m^j - Σ_{k∈V_m} λ_m^{j-k}`: must be ≥ -1e-8.
    pub convolution_slack: f64,
    /// Whether every term `λ_m^{j-k}` was inside the stored window.
    /// When false, missing (positive) terms were dropped, so the slack
    /// is an over-estimate and the row is only a partial check.
    pub complete: bool,
    /// `|V_m| λ_m^j` for `j ∈ V_m`, to compare against `(ρ-1)/ρ²`.
    pub scaled_value: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightCertificates {
    pub rows: Vec<CertificateRow>,
    pub min_convolution_slack: f64,
    pub all_positive: bool,
    /// `min_{j∈V_m} |V_m| λ_m^j`.
    pub min_scaled_in_vm: f64,
    /// `(ρ-1)/ρ²`, the asymptotic lower bound on `|V_m| λ_m^j` for `j ∈ V_m`.
    pub lower_bound_target: f64,
    /// True when the convolution inequality holds at tolerance 1e-8
    /// at every window index.
    pub convolution_ok: bool,
}

/// Evaluate the convolution inequality and the Taylor lower bound on a
/// computed weight sequence. Violations are flagged, not raised.
pub fn weight_certificates(w: &WeightSequence) -> WeightCertificates {
    let vm = w.volume_m();
    let rho = w.rho;
    let mut rows = Vec::with_capacity(w.values.len());
    let mut min_slack = f64::INFINITY;
    let mut min_scaled = f64::INFINITY;
    let mut all_positive = true;
    for (j, &lam) in &w.values {
        if lam <= 0.0 {
            all_positive = false;
        }
        let mut conv = 0.0;
        let mut complete = true;
        for k in cube(w.d, w.m) {
            match w.get(&j.sub(&k)) {
                Some(v) => conv += v,
                None => complete = false,
            }
        }
        let slack = rho * vm * lam - conv;
        min_slack = min_slack.min(slack);
        let scaled_value = if j.norm_inf() <= w.m {
            let s = vm * lam;
            min_scaled = min_scaled.min(s);
            Some(s)
        } else {
            None
        };
        rows.push(CertificateRow {
            j: j.clone(),
            convolution_slack: slack,
            complete,
            scaled_value,
        });
    }
    WeightCertificates {
        rows,
        min_convolution_slack: min_slack,
        all_positive,
        min_scaled_in_vm: min_scaled,
        lower_bound_target: (rho - 1.0) / (rho * rho),
        convolution_ok: min_slack >= -1e-8,
    }
}
