//! Internal FitzHugh-Nagumo dynamics, Hebbian interaction weights, and
//! numeric audits of the drift and interaction bounds.
//!
//! The fast variable is `U := v`; the recovery variable is eliminated into
//! the drift,
//!
//! ```text
//! b_t(U) = U_t - U_t^3/3 - w_t,
//! w_t    = c^{-1} ∫_0^t e^{-c(t-s)} (U_s + a) ds,
//! ```
//!
//! equivalently `ẇ = c^{-1}(U_t + a) - c w`, integrated by the exact
//! exponential recurrence with `U` frozen over each step. The learned
//! weight on an existing connection follows the Hebbian rule
//!
//! ```text
//! dG/dt = J_corr (J_bar - G) v(x) v(y) - J_dec G,
//! ```
//!
//! stepped by the exact linear-ODE update with the activities frozen over
//! the step; `[0, J_bar]` is invariant for it. The interaction itself is
//! `Λ = G f(U_t) f(X_t)`, zero on null connections.
//!
//! The drift is not Lipschitz (cubic decay) and does not vanish at the zero
//! path when `a > 0`, so the audit fits two constants: the one-sided
//! difference constant `C` with `b_t(X) - b_t(Z) ≤ C ‖X-Z‖_t` whenever
//! `X_t ≥ Z_t`, and the affine growth constant with
//! `|b_t(Z)| ≤ C_affine (1 + ‖Z‖_t)`.

use crate::connectivity::ConnSpace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("g_ini = {g_ini} is outside [0, j_bar = {j_bar}]")]
    GIniOutOfRange { g_ini: f64, j_bar: f64 },
    #[error("synaptic gain must satisfy sup|f| <= 1, got {0}")]
    GainNotNormalized(f64),
    #[error("parameter {name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

/// A pluggable bounded scalar map with declared sup and Lipschitz bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ScalarFn {
    /// tanh(x): sup 1, Lipschitz 1.
    Tanh,
    /// 1/(1+e^{-x}): sup 1, Lipschitz 1/4.
    Logistic,
    /// Constant value: sup |c|, Lipschitz 0.
    Constant(f64),
    /// Identically zero.
    Zero,
}

impl ScalarFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Tanh => x.tanh(),
            ScalarFn::Logistic => 1.0 / (1.0 + (-x).exp()),
            ScalarFn::Constant(c) => *c,
            ScalarFn::Zero => 0.0,
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match self {
            ScalarFn::Tanh | ScalarFn::Logistic => 1.0,
            ScalarFn::Constant(c) => c.abs(),
            ScalarFn::Zero => 0.0,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            ScalarFn::Tanh => 1.0,
            ScalarFn::Logistic => 0.25,
            ScalarFn::Constant(_) | ScalarFn::Zero => 0.0,
        }
    }
}

/// FitzHugh-Nagumo parameters: `a`, `c` positive, synaptic gain `f`
/// (entering the interaction) and activity `v_act` (entering the Hebbian
/// rule), both bounded.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FhnParams {
    pub a: f64,
    pub c: f64,
    pub f: ScalarFn,
    pub v_act: ScalarFn,
}

impl Default for FhnParams {
    fn default() -> Self {
        FhnParams {
            a: 0.7,
            c: 0.8,
            f: ScalarFn::Tanh,
            v_act: ScalarFn::Logistic,
        }
    }
}

impl FhnParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.a <= 0.0 {
            return Err(DynamicsError::NotPositive { name: "a", value: self.a });
        }
        if self.c <= 0.0 {
            return Err(DynamicsError::NotPositive { name: "c", value: self.c });
        }
        // |Λ| ≤ ‖conn‖(1 + ‖X‖) needs sup|f|² ≤ 1
        if self.f.sup_bound() > 1.0 {
            return Err(DynamicsError::GainNotNormalized(self.f.sup_bound()));
        }
        Ok(())
    }

    /// One exact exponential step of the recovery recurrence with `U`
    /// frozen at `u` over `[t, t+dt]`.
    pub fn w_step(&self, w: f64, u: f64, dt: f64) -> f64 {
        let decay = (-self.c * dt).exp();
        // (1 - e^{-c dt}) evaluated stably
        let growth = -(-self.c * dt).exp_m1();
        w * decay + (u + self.a) * growth / (self.c * self.c)
    }

    /// The reduced drift at the last grid point of a trajectory prefix:
    /// `U_t - U_t^3/3 - w_t`, with `w_t` rebuilt by the exponential
    /// recurrence from zero initial data.
    pub fn drift_on_prefix(&self, u: &[f64], dt: f64) -> f64 {
        let mut w = 0.0;
        for i in 0..u.len().saturating_sub(1) {
            w = self.w_step(w, u[i], dt);
        }
        let ut = *u.last().expect("non-empty trajectory prefix");
        ut - ut * ut * ut / 3.0 - w
    }
}

/// Hebbian learning parameters. `j_bar` doubles as the connection bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HebbParams {
    pub j_corr: f64,
    pub j_dec: f64,
    pub j_bar: f64,
    pub g_ini: f64,
}

impl Default for HebbParams {
    fn default() -> Self {
        HebbParams {
            j_corr: 1.0,
            j_dec: 0.5,
            j_bar: 1.0,
            g_ini: 0.5,
        }
    }
}

impl HebbParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.g_ini < 0.0 || self.g_ini > self.j_bar {
            return Err(DynamicsError::GIniOutOfRange {
                g_ini: self.g_ini,
                j_bar: self.j_bar,
            });
        }
        Ok(())
    }
}

/// One exact step of `dG/dt = J_corr (J_bar - G) v(x)v(y) - J_dec G` with
/// the activity product frozen over the step. The update is a convex
/// combination of `G` and the step equilibrium, so `[0, J_bar]` is
/// invariant; the final clamp only absorbs float rounding.
pub fn hebbian_step(g: f64, x: f64, y: f64, params: &HebbParams, fhn: &FhnParams, dt: f64) -> f64 {
    let alpha = params.j_corr * fhn.v_act.eval(x) * fhn.v_act.eval(y);
    let rate = alpha + params.j_dec;
    if rate == 0.0 {
        return g;
    }
    let equilibrium = alpha * params.j_bar / rate;
    let decay = (-rate * dt).exp();
    (equilibrium + (g - equilibrium) * decay).clamp(0.0, params.j_bar)
}

/// The interaction `Λ^k(conn, U, X)` at one time point: zero on the null
/// connection, otherwise `G f(U_t) f(X_t)`.
pub fn interaction_lambda(
    space: &ConnSpace,
    element: usize,
    g: f64,
    u_t: f64,
    x_t: f64,
    f: &ScalarFn,
) -> f64 {
    if element == space.null_index {
        0.0
    } else {
        g * f.eval(u_t) * f.eval(x_t)
    }
}

/// A sample path on the uniform grid over `[0, T]`, `values[i] = U_{i dt}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(dt: f64, steps: usize) -> Self {
        Trajectory {
            dt,
            values: vec![0.0; steps + 1],
        }
    }

    pub fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// `‖·‖_T`: sup over the whole grid.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `‖·‖_{t_i}`: sup over grid points 0..=i.
    pub fn sup_norm_upto(&self, i: usize) -> f64 {
        self.values[..=i].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Grid sup distance to another path on the same grid.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Running sup of a sample path: `‖u‖_{t_i}` for every i.
pub fn running_sup(u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    let mut m = 0.0f64;
    for &x in u {
        m = m.max(x.abs());
        out.push(m);
    }
    out
}

/// A single violation entry: which pair, which grid index, observed ratio.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditViolation {
    pub pair: usize,
    pub time_index: usize,
    pub ratio: f64,
    pub inequality: String,
}

/// Result of the drift/interaction audit over a corpus of trajectory pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    /// Smallest C with `b_t(X) - b_t(Z) ≤ C ‖X-Z‖_t` when `X_t ≥ Z_t`
    /// (and the mirrored inequality), over the corpus.
    pub c_one_sided: f64,
    /// Smallest C with `|b_t(Z)| ≤ C (1 + ‖Z‖_t)` over the corpus. The
    /// strict form `|b| ≤ C‖Z‖` fails at the zero path when a > 0, so the
    /// affine relaxation is what downstream Gronwall certificates consume.
    pub c_affine: f64,
    /// Largest ratio of `|Λ(x,U,X) - Λ(x,U,Z)|` to `‖x‖ ‖X-Z‖_t`.
    pub lambda_state_lipschitz_ratio: f64,
    /// Largest ratio of `|Λ(x,U,X) - Λ(y,U,X)|` to `(‖U‖_t + ‖X‖_t) d(x,y)`.
    pub lambda_conn_lipschitz_ratio: f64,
    /// Largest ratio of `|Λ(x,U,X)|` to `‖x‖ (1 + ‖X‖_t)`.
    pub lambda_abs_ratio: f64,
    pub violations: Vec<AuditViolation>,
    pub pairs_checked: usize,
}

/// Estimate the smallest constants for which the drift and interaction
/// inequalities hold over a corpus of trajectory pairs on a shared grid.
/// Interaction ratios exceeding `1 + tolerance` are recorded as violations
/// (report entries, not errors).
pub fn assumption_audit(
    fhn: &FhnParams,
    hebb: &HebbParams,
    space: &ConnSpace,
    corpus: &[(Vec<f64>, Vec<f64>)],
    dt: f64,
    tolerance: f64,
) -> AuditReport {
    let mut report = AuditReport {
        c_one_sided: 0.0,
        c_affine: 0.0,
        lambda_state_lipschitz_ratio: 0.0,
        lambda_conn_lipschitz_ratio: 0.0,
        lambda_abs_ratio: 0.0,
        violations: Vec::new(),
        pairs_checked: corpus.len(),
    };
    for (pair_idx, (x, z)) in corpus.iter().enumerate() {
        let len = x.len().min(z.len());
        let sup_x = running_sup(&x[..len]);
        let sup_z = running_sup(&z[..len]);
        let diff: Vec<f64> = x[..len].iter().zip(&z[..len]).map(|(a, b)| a - b).collect();
        let sup_diff = running_sup(&diff);
        for t in 1..len {
            let bx = fhn.drift_on_prefix(&x[..=t], dt);
            let bz = fhn.drift_on_prefix(&z[..=t], dt);
            // one-sided drift difference constant
            if sup_diff[t] > 1e-12 {
                let gap = if x[t] >= z[t] { bx - bz } else { bz - bx };
                report.c_one_sided = report.c_one_sided.max(gap / sup_diff[t]);
            }
            // affine growth constant, on both paths of the pair
            report.c_affine = report.c_affine.max(bz.abs() / (1.0 + sup_z[t]));
            report.c_affine = report.c_affine.max(bx.abs() / (1.0 + sup_x[t]));

            // interaction inequalities at weight G = j_bar (worst case)
            let g = hebb.j_bar;
            for e in 0..space.len() {
                let norm_e = space.norm(e);
                let l_xx = interaction_lambda(space, e, g, x[t], x[t], &fhn.f);
                let l_xz = interaction_lambda(space, e, g, x[t], z[t], &fhn.f);
                if norm_e > 0.0 && sup_diff[t] > 1e-12 {
                    let ratio = (l_xx - l_xz).abs() / (norm_e * sup_diff[t]);
                    report.lambda_state_lipschitz_ratio =
                        report.lambda_state_lipschitz_ratio.max(ratio);
                    if ratio > 1.0 + tolerance {
                        report.violations.push(AuditViolation {
                            pair: pair_idx,
                            time_index: t,
                            ratio,
                            inequality: "lambda state lipschitz".into(),
                        });
                    }
                }
                if norm_e > 0.0 {
                    let ratio = l_xz.abs() / (norm_e * (1.0 + sup_z[t]));
                    report.lambda_abs_ratio = report.lambda_abs_ratio.max(ratio);
                    if ratio > 1.0 + tolerance {
                        report.violations.push(AuditViolation {
                            pair: pair_idx,
                            time_index: t,
                            ratio,
                            inequality: "lambda absolute bound".into(),
                        });
                    }
                }
                for e2 in 0..space.len() {
                    let dist = space.dist(e, e2);
                    if dist == 0.0 {
                        continue;
                    }
                    let l2 = interaction_lambda(space, e2, g, x[t], z[t], &fhn.f);
                    let denom = (sup_x[t] + sup_z[t]) * dist;
                    if denom > 1e-12 {
                        let ratio = (l_xz - l2).abs() / denom;
                        report.lambda_conn_lipschitz_ratio =
                            report.lambda_conn_lipschitz_ratio.max(ratio);
                        if ratio > 1.0 + tolerance {
                            report.violations.push(AuditViolation {
                                pair: pair_idx,
                                time_index: t,
                                ratio,
                                inequality: "lambda connection lipschitz".into(),
                            });
                        }
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1e-3;

    #[test]
    fn drift_at_rest_is_zero_when_a_is_zero() {
        let fhn = FhnParams {
            a: 0.0,
            c: 0.8,
            ..FhnParams::default()
        };
        let u = vec![0.0; 500];
        for t in 1..u.len() {
            assert_eq!(fhn.drift_on_prefix(&u[..=t], DT), 0.0);
        }
    }

    #[test]
    fn drift_at_rest_matches_closed_form() {
        // U ≡ 0, a > 0: drift = -(a/c²)(1 - e^{-ct})
        let fhn = FhnParams {
            a: 0.7,
            c: 0.8,
            ..FhnParams::default()
        };
        let steps = 1000;
        let u = vec![0.0; steps + 1];
        for &t_idx in &[100usize, 500, 1000] {
            let t = t_idx as f64 * DT;
            let expect = -(fhn.a / (fhn.c * fhn.c)) * (1.0 - (-fhn.c * t).exp());
            let got = fhn.drift_on_prefix(&u[..=t_idx], DT);
            assert!((got - expect).abs() < 1e-9, "t={t}: {got} vs {expect}");
            assert!((got.abs() - expect.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_constant_path_matches_closed_form() {
        // U ≡ u: drift = u - u³/3 - (u+a)(1-e^{-ct})/c²
        let fhn = FhnParams {
            a: 0.4,
            c: 1.3,
            ..FhnParams::default()
        };
        let u_val: f64 = 0.9;
        let steps = 2000;
        let u = vec![u_val; steps + 1];
        let t = steps as f64 * DT;
        let expect =
            u_val - u_val.powi(3) / 3.0 - (u_val + fhn.a) * (1.0 - (-fhn.c * t).exp()) / (fhn.c * fhn.c);
        let got = fhn.drift_on_prefix(&u, DT);
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn hebbian_pure_decay_matches_closed_form() {
        // J_corr = 0: G_t = G_ini e^{-J_dec t}
        let fhn = FhnParams::default();
        let hebb = HebbParams {
            j_corr: 0.0,
            j_dec: 0.8,
            j_bar: 1.0,
            g_ini: 0.9,
        };
        let mut g = hebb.g_ini;
        let steps = 1000;
        for _ in 0..steps {
            g = hebbian_step(g, 0.3, -0.2, &hebb, &fhn, DT);
        }
        let t = steps as f64 * DT;
        let expect = hebb.g_ini * (-hebb.j_dec * t).exp();
        assert!((g - expect).abs() < 1e-6, "{g} vs {expect}");
    }

    #[test]
    fn hebbian_pure_growth_matches_closed_form() {
        // J_dec = 0, constant activity v̄: G_t = J_bar + (G_ini - J_bar) e^{-J_corr v̄² t}
        let v_bar = 0.6;
        let fhn = FhnParams {
            v_act: ScalarFn::Constant(v_bar),
            ..FhnParams::default()
        };
        let hebb = HebbParams {
            j_corr: 1.7,
            j_dec: 0.0,
            j_bar: 2.0,
            g_ini: 0.25,
        };
        let mut g = hebb.g_ini;
        let steps = 1000;
        for _ in 0..steps {
            g = hebbian_step(g, 0.0, 0.0, &hebb, &fhn, DT);
        }
        let t = steps as f64 * DT;
        let expect = hebb.j_bar
            + (hebb.g_ini - hebb.j_bar) * (-hebb.j_corr * v_bar * v_bar * t).exp();
        assert!((g - expect).abs() < 1e-6, "{g} vs {expect}");
    }

    #[test]
    fn hebbian_saturated_weight_is_fixed_point() {
        // G_ini = J_bar with no decay stays at J_bar exactly
        let fhn = FhnParams::default();
        let hebb = HebbParams {
            j_corr: 1.0,
            j_dec: 0.0,
            j_bar: 1.5,
            g_ini: 1.5,
        };
        let mut g = hebb.g_ini;
        for i in 0..500 {
            g = hebbian_step(g, (i as f64).sin(), 0.4, &hebb, &fhn, DT);
            assert_eq!(g, hebb.j_bar);
        }
    }

    #[test]
    fn hebbian_step_preserves_the_box() {
        let fhn = FhnParams::default();
        let hebb = HebbParams::default();
        let key = crate::rng::StreamKey::new(31);
        for trial in 0..2000u64 {
            let k = key.with(trial);
            let g0 = k.uniform(0) * hebb.j_bar;
            let x = 4.0 * (k.uniform(1) - 0.5);
            let y = 4.0 * (k.uniform(2) - 0.5);
            let dt = 10.0f64.powf(-3.0 * k.uniform(3));
            let g1 = hebbian_step(g0, x, y, &hebb, &fhn, dt);
            assert!((0.0..=hebb.j_bar).contains(&g1), "g0={g0} -> g1={g1}");
        }
    }

    #[test]
    fn interaction_lambda_basics() {
        let space = ConnSpace::binary(2.0);
        let f = ScalarFn::Tanh;
        // null connection gives zero
        assert_eq!(interaction_lambda(&space, 0, 1.3, 0.7, -0.2, &f), 0.0);
        // zero gain gives zero
        assert_eq!(
            interaction_lambda(&space, 1, 1.3, 0.7, -0.2, &ScalarFn::Zero),
            0.0
        );
        // G = j_bar with f ≡ 1 gives j_bar
        assert_eq!(
            interaction_lambda(&space, 1, 2.0, 0.7, -0.2, &ScalarFn::Constant(1.0)),
            2.0
        );
    }

    #[test]
    fn interaction_is_bilinear_in_the_gains() {
        // Λ factors exactly as G f(U) f(X)
        let space = ConnSpace::binary(1.0);
        let f = ScalarFn::Tanh;
        let key = crate::rng::StreamKey::new(5);
        for trial in 0..200u64 {
            let k = key.with(trial);
            let g = k.uniform(0);
            let u = 3.0 * (k.uniform(1) - 0.5);
            let x = 3.0 * (k.uniform(2) - 0.5);
            let v = interaction_lambda(&space, 1, g, u, x, &f);
            assert!((v - g * u.tanh() * x.tanh()).abs() < 1e-15);
        }
    }

    fn brownian_corpus(pairs: usize, steps: usize, scale: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let key = crate::rng::StreamKey::new(77);
        (0..pairs)
            .map(|p| {
                let ka = key.with(p as u64).with(0);
                let kb = key.with(p as u64).with(1);
                let mut a = vec![0.0];
                let mut b = vec![0.0];
                for i in 0..steps {
                    a.push(a[i] + scale * DT.sqrt() * ka.normal(i as u64));
                    b.push(b[i] + scale * DT.sqrt() * kb.normal(i as u64));
                }
                (a, b)
            })
            .collect()
    }

    #[test]
    fn audit_empty_corpus_is_empty() {
        let report = assumption_audit(
            &FhnParams::default(),
            &HebbParams::default(),
            &ConnSpace::binary(1.0),
            &[],
            DT,
            1e-9,
        );
        assert_eq!(report.pairs_checked, 0);
        assert!(report.violations.is_empty());
        assert_eq!(report.c_one_sided, 0.0);
    }

    #[test]
    fn audit_constants_on_bounded_corpus() {
        // paths bounded by ~1: one-sided constant within 1 + 1/c² + margin
        let fhn = FhnParams {
            a: 0.7,
            c: 0.8,
            ..FhnParams::default()
        };
        let corpus: Vec<_> = brownian_corpus(30, 300, 0.4)
            .into_iter()
            .map(|(a, b)| {
                (
                    a.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect::<Vec<_>>(),
                    b.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect::<Vec<_>>(),
                )
            })
            .collect();
        let report = assumption_audit(
            &fhn,
            &HebbParams::default(),
            &ConnSpace::binary(1.0),
            &corpus,
            DT,
            1e-9,
        );
        let c_bound = 1.0 + 1.0 / (fhn.c * fhn.c) + 0.05;
        assert!(
            report.c_one_sided <= c_bound,
            "C = {} > {}",
            report.c_one_sided,
            c_bound
        );
        assert!(report.c_affine.is_finite() && report.c_affine > 0.0);
        // tanh gain keeps every interaction inequality satisfied
        assert!(report.lambda_state_lipschitz_ratio <= 1.0 + 1e-9);
        assert!(report.lambda_conn_lipschitz_ratio <= 1.0 + 1e-9);
        assert!(report.lambda_abs_ratio <= 1.0 + 1e-9);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut fhn = FhnParams::default();
        fhn.f = ScalarFn::Constant(1.4);
        assert!(fhn.validate().is_err());
        let hebb = HebbParams {
            g_ini: 1.2,
            j_bar: 1.0,
            ..HebbParams::default()
        };
        assert!(hebb.validate().is_err());
    }
}
