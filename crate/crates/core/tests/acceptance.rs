//! Acceptance suite: one test per release criterion, each printing a
//! PASS line once its assertions hold. Tolerances are pinned here, not
//! configurable. Oracles live in `common` and are independent of the
//! library code paths they check.

mod common;

use std::time::Instant;
use torusnet::config::{AppConfig, EventSpec, ObservableSpec};
use torusnet::connectivity::{
    enumerate_exact, metropolis_run, sample_base_field, sweep_kernel_apply, tv_distance,
    ConnSpace, GibbsModel, PotentialSpec,
};
use torusnet::dynamics::Trajectory;
use torusnet::harness::{ldp_scan, replica_seeds, run_replicas};
use torusnet::lattice::{LatticeVec, TorusSpec};
use torusnet::measure::{lp_distance_finite, WeightedAtoms};
use torusnet::rng::StreamKey;
use torusnet::solver::{
    apriori_bound_certificate, integrate_network, pair_bound_certificate, psi_m_truncated,
    sample_noise, NoiseField, SolveParams,
};
use torusnet::weights::{compute_weights, weight_certificates, QuadratureGrid, WeightSequence};

fn lv(coords: &[i64]) -> LatticeVec {
    LatticeVec(coords.to_vec())
}

fn pass(id: u32, name: &str) {
    println!("acceptance {id:02} {name}: PASS");
}

fn default_params() -> SolveParams {
    AppConfig::example().solve_params()
}

/// Dense near-range connectivity: every offset connects with prob 1/2,
/// so truncation windows always have work to do.
fn dense_model(j_bar: f64) -> GibbsModel {
    GibbsModel::base_only(ConnSpace::binary(j_bar), 1.0, 1.5, 10, 0.5)
}

fn weight_sweep() -> Vec<(i64, f64, WeightSequence)> {
    let mut out = Vec::new();
    for &m in &[1i64, 2, 3, 4] {
        for &rho in &[1.5f64, 2.0] {
            let w = compute_weights(m, rho, 1, 4 * m, QuadratureGrid::for_m(m))
                .expect("weight quadrature converges");
            out.push((m, rho, w));
        }
    }
    out
}

#[test]
fn criterion_01_weight_identities() {
    let start = Instant::now();
    for (m, rho, w) in weight_sweep() {
        // total mass: quadrature window sum plus the independent
        // series-oracle tail must reproduce 1
        let oracle = common::neumann_weights_1d(m, rho);
        let out_of_window: f64 = oracle
            .values
            .iter()
            .filter(|(j, _)| j.abs() > 4 * m)
            .map(|(_, v)| v)
            .sum();
        let total = w.stored_sum() + out_of_window;
        assert!(
            (total - 1.0).abs() <= 1e-8 + oracle.series_remainder,
            "m={m} rho={rho}: mass {total}"
        );
        let cert = weight_certificates(&w);
        assert!(cert.all_positive, "m={m} rho={rho}: non-positive weight");
        assert!(
            cert.min_convolution_slack >= -1e-8,
            "m={m} rho={rho}: slack {}",
            cert.min_convolution_slack
        );
        if m >= 3 {
            let lam0 = w.get(&lv(&[0])).unwrap();
            let scaled = w.volume_m() * lam0;
            let target = 0.9 * (rho - 1.0) / (rho * rho);
            assert!(
                scaled >= target,
                "m={m} rho={rho}: |V_m| lambda^0 = {scaled} < {target}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(1, "weight identities (mass, positivity, convolution, lower bound)");
}

#[test]
fn criterion_02_quadrature_neumann_agreement() {
    for (m, rho, w) in weight_sweep() {
        let oracle = common::neumann_weights_1d(m, rho);
        for (j, &lam) in &w.values {
            let reference = oracle.values.get(&j.0[0]).copied().unwrap_or(0.0);
            assert!(
                (lam - reference).abs() <= 1e-8,
                "m={m} rho={rho} j={j:?}: quadrature {lam} vs series {reference}"
            );
        }
    }
    // frozen spot values for d=1, m=1, rho=2 from the series oracle
    let w = compute_weights(1, 2.0, 1, 4, QuadratureGrid::for_m(1)).unwrap();
    let frozen = [
        (0i64, 0.6546536707079772),
        (1, 0.13663417676994286),
        (2, 0.028517213141737153),
        (3, 0.005951888938742909),
        (4, 0.0012422315519773908),
    ];
    for (j, expect) in frozen {
        let got = w.get(&lv(&[j])).unwrap();
        assert!((got - expect).abs() < 1e-12, "j={j}: {got} vs {expect}");
        let sym = w.get(&lv(&[-j])).unwrap();
        assert!((sym - expect).abs() < 1e-12);
    }
    pass(2, "quadrature matches Neumann-series oracle on every weight");
}

#[test]
fn criterion_03_shift_equivariance_bit_exact() {
    let params = default_params();
    let model = dense_model(1.0);
    let cases: Vec<(TorusSpec, u64)> = (0..10u64)
        .map(|s| (TorusSpec::new(1, 3), s))
        .chain((0..10u64).map(|s| (TorusSpec::new(2, 1), s + 50)))
        .collect();
    assert_eq!(cases.len(), 20);
    for (case_idx, (spec, seed)) in cases.into_iter().enumerate() {
        let (noise_seed, field_seed) = replica_seeds(7000 + seed, spec.n, 0);
        let noise = sample_noise(spec, 1e-3, 0.3, noise_seed).unwrap();
        let field = sample_base_field(spec, &model, field_seed);
        // a pseudorandom non-trivial shift for this case
        let key = StreamKey::new(900).with(case_idx as u64);
        let r = LatticeVec(
            (0..spec.d)
                .map(|p| key.with(p as u64).below(0, spec.side() as u64) as i64 - spec.n)
                .collect(),
        );
        let direct = integrate_network(&noise, &field, &params).unwrap();
        let rotated = integrate_network(&noise.shift(&r), &field.shift(&r), &params).unwrap();
        let expected = direct.shift(&r);
        for (a, b) in rotated.u.iter().zip(&expected.u) {
            let bits_a: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "case {case_idx} shift {r:?}");
        }
        for (a, b) in rotated.w_aux.iter().zip(&expected.w_aux) {
            assert_eq!(a.values, b.values);
        }
        assert_eq!(rotated.g, expected.g);
    }
    pass(3, "integrator commutes with torus rotation bit-for-bit (20 cases)");
}

#[test]
fn criterion_04_truncation_consistency() {
    let spec = TorusSpec::new(1, 3);
    let params = default_params();
    let model = dense_model(1.0);
    let replicas = 20u64;
    let mut mean_diffs = vec![0.0f64; (spec.n + 1) as usize];
    for r in 0..replicas {
        let (noise_seed, field_seed) = replica_seeds(77, spec.n, r);
        let noise = sample_noise(spec, 1e-3, 1.0, noise_seed).unwrap();
        let field = sample_base_field(spec, &model, field_seed);
        let full = integrate_network(&noise, &field, &params).unwrap();
        // bit equality at the full window
        let at_n = psi_m_truncated(&noise, &field, &params, spec.n).unwrap();
        for (a, b) in at_n.u.iter().zip(&full.u) {
            let bits_a: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(at_n.g, full.g);
        for m in 0..=spec.n {
            let truncated = psi_m_truncated(&noise, &field, &params, m).unwrap();
            mean_diffs[m as usize] += truncated.sup_distance(&full) / replicas as f64;
        }
    }
    // corpus-mean truncation error shrinks as the window grows
    for w in mean_diffs.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "mean diffs {mean_diffs:?}");
    }
    assert!(mean_diffs[0] > 0.0, "corpus should exercise the truncation");
    assert_eq!(*mean_diffs.last().unwrap(), 0.0);
    pass(4, "truncated maps: bit-equal at m=n, mean error non-increasing in m");
}

#[test]
fn criterion_05_trajectory_certificates() {
    let start = Instant::now();
    let params = default_params();
    let model = dense_model(1.0);
    // one-sided drift difference constant: slope of u - u^3/3 is at most 1
    // and the recovery kernel contributes at most 1/c^2
    let c_one_sided = 1.0 + 1.0 / (params.fhn.c * params.fhn.c);
    let mut worst_apriori = 0.0f64;
    let mut worst_pair = f64::INFINITY;
    for &n in &[2i64, 3] {
        let spec = TorusSpec::new(1, n);
        let weights: Vec<WeightSequence> = (1..n)
            .map(|m| compute_weights(m, 2.0, 1, 4 * m, QuadratureGrid::for_m(m)).unwrap())
            .collect();
        for r in 0..100u64 {
            let (noise_seed, field_seed) = replica_seeds(4242, n, r);
            let noise = sample_noise(spec, 1e-3, 1.0, noise_seed).unwrap();
            let field = sample_base_field(spec, &model, field_seed);
            let full = integrate_network(&noise, &field, &params).unwrap();
            let c_affine = torusnet::harness::audit_c_affine(&full);
            let apriori = apriori_bound_certificate(&full, &noise, &field, c_affine);
            worst_apriori = worst_apriori.max(apriori.max_ratio);
            assert!(
                apriori.max_ratio <= 1.0 + 1e-6,
                "n={n} r={r}: a-priori ratio {}",
                apriori.max_ratio
            );
            for m in 1..n {
                let truncated = psi_m_truncated(&noise, &field, &params, m).unwrap();
                let report = pair_bound_certificate(
                    &truncated,
                    &full,
                    &noise,
                    &noise,
                    &field,
                    &field,
                    &weights[(m - 1) as usize],
                    c_one_sided,
                );
                worst_pair = worst_pair.min(report.relative_slack);
                assert!(
                    report.relative_slack >= -1e-6,
                    "n={n} m={m} r={r}: pair slack {}",
                    report.relative_slack
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "  worst a-priori ratio {worst_apriori:.4}, worst pair relative slack {worst_pair:.4}"
    );
    pass(5, "a-priori and pair trajectory bounds hold over 100 replicas");
}

#[test]
fn criterion_06_hebbian_box_and_decay() {
    // box invariance, exactly, over a simulated corpus
    let params = default_params();
    let model = dense_model(1.0);
    let spec = TorusSpec::new(1, 2);
    let mut edges_seen = 0usize;
    for r in 0..20u64 {
        let (noise_seed, field_seed) = replica_seeds(31, spec.n, r);
        let noise = sample_noise(spec, 1e-3, 1.0, noise_seed).unwrap();
        let field = sample_base_field(spec, &model, field_seed);
        let state = integrate_network(&noise, &field, &params).unwrap();
        edges_seen += state.g.len();
        for path in state.g.values() {
            assert!(path
                .values
                .iter()
                .all(|&g| (0.0..=params.hebb.j_bar).contains(&g)));
        }
    }
    assert!(edges_seen > 50, "corpus should carry many learned edges");

    // pure decay matches the closed form to 1e-6 at dt = 1e-3
    let mut decay_params = params;
    decay_params.hebb.j_corr = 0.0;
    decay_params.hebb.j_dec = 0.5;
    decay_params.hebb.g_ini = 0.8;
    let (noise_seed, field_seed) = replica_seeds(32, spec.n, 0);
    let noise = sample_noise(spec, 1e-3, 1.0, noise_seed).unwrap();
    let field = sample_base_field(spec, &model, field_seed);
    let state = integrate_network(&noise, &field, &decay_params).unwrap();
    assert!(!state.g.is_empty());
    for path in state.g.values() {
        for (i, &g) in path.values.iter().enumerate() {
            let t = i as f64 * 1e-3;
            let expect = decay_params.hebb.g_ini * (-decay_params.hebb.j_dec * t).exp();
            assert!((g - expect).abs() <= 1e-6, "t={t}: {g} vs {expect}");
        }
    }
    pass(6, "learned weights stay in [0, J_bar]; pure decay matches closed form");
}

#[test]
fn criterion_07_levy_prokhorov_exactness() {
    let key = StreamKey::new(1234);
    // random weighted atom sets on the line, up to 6 atoms per side,
    // with occasional coincident points
    let gen = |k: StreamKey, tag: u64| -> (Vec<f64>, Vec<f64>) {
        let kk = k.with(tag);
        let n = 1 + kk.below(0, 6) as usize;
        let atoms: Vec<f64> = (0..n)
            .map(|i| {
                let grid = kk.below(1000 + i as u64, 8) as f64;
                grid * 0.5 // coarse grid forces ties and zero distances
            })
            .collect();
        let nums: Vec<u64> = (0..n).map(|i| 1 + kk.below(2000 + i as u64, 30)).collect();
        let total: u64 = nums.iter().sum();
        let weights: Vec<f64> = nums.iter().map(|&v| v as f64 / total as f64).collect();
        (atoms, weights)
    };
    for trial in 0..200u64 {
        let (atoms_a, weights_a) = gen(key, 2 * trial);
        let (atoms_b, weights_b) = gen(key, 2 * trial + 1);
        let a = WeightedAtoms {
            atoms: atoms_a.clone(),
            weights: weights_a.clone(),
        };
        let b = WeightedAtoms {
            atoms: atoms_b.clone(),
            weights: weights_b.clone(),
        };
        let got = lp_distance_finite(&a, &b, |x: &f64, y: &f64| (x - y).abs());
        let dmat: Vec<Vec<f64>> = atoms_a
            .iter()
            .map(|x| atoms_b.iter().map(|y| (x - y).abs()).collect())
            .collect();
        let oracle = common::lp_brute_force(&weights_a, &weights_b, &dmat);
        assert_eq!(
            got.to_bits(),
            oracle.to_bits(),
            "trial {trial}: flow {got} vs subsets {oracle}"
        );
    }
    // metric axioms on random triples
    let key = StreamKey::new(777);
    for trial in 0..100u64 {
        let (xa, wa) = gen(key, 3 * trial);
        let (xb, wb) = gen(key, 3 * trial + 1);
        let (xc, wc) = gen(key, 3 * trial + 2);
        let m = |x: &f64, y: &f64| (x - y).abs();
        let a = WeightedAtoms { atoms: xa, weights: wa };
        let b = WeightedAtoms { atoms: xb, weights: wb };
        let c = WeightedAtoms { atoms: xc, weights: wc };
        let dab = lp_distance_finite(&a, &b, m);
        let dba = lp_distance_finite(&b, &a, m);
        let daa = lp_distance_finite(&a, &a, m);
        let dac = lp_distance_finite(&a, &c, m);
        let dcb = lp_distance_finite(&c, &b, m);
        assert_eq!(daa, 0.0);
        assert_eq!(dab.to_bits(), dba.to_bits(), "symmetry");
        assert!(dab >= 0.0);
        assert!(dab <= dac + dcb + 1e-12, "triangle {dab} > {dac}+{dcb}");
    }
    pass(7, "exact LP distance equals subset oracle; metric axioms hold");
}

#[test]
fn criterion_08_gibbs_sampler_correctness() {
    let space = ConnSpace::binary(1.0);
    // three enumerable models on the 3-site torus (9 binary bonds each):
    // pure base, independent single-bond tilt, correlated adjacent bonds
    let base = GibbsModel::base_only(space.clone(), 1.0, 1.5, 2, 0.45);
    let mut single = base.clone();
    single.potentials.push(PotentialSpec {
        sites: vec![(lv(&[0]), lv(&[1]))],
        table: vec![0.0, -1.0],
    });
    let mut correlated = base.clone();
    correlated.potentials.push(PotentialSpec {
        sites: vec![(lv(&[0]), lv(&[1])), (lv(&[1]), lv(&[1]))],
        table: vec![0.0, 0.0, 0.0, -1.0],
    });
    correlated.potentials.push(PotentialSpec {
        sites: vec![(lv(&[0]), lv(&[0]))],
        table: vec![0.0, 0.7],
    });
    let spec = TorusSpec::new(1, 1);
    for (tag, model) in [(0u64, &base), (1, &single), (2, &correlated)] {
        let dist = enumerate_exact(spec, model, 1).unwrap();
        // one full systematic sweep holds the target invariant
        let pushed = sweep_kernel_apply(&dist, model, 1);
        let kernel_tv = tv_distance(&dist.probs, &pushed);
        assert!(kernel_tv <= 1e-10, "model {tag}: kernel TV {kernel_tv:e}");

        // empirical marginals after 1e5 sweeps
        let pairs = dist.pairs.clone();
        let sweeps = 100_000usize;
        let mut counts = vec![0usize; pairs.len()];
        let mut field = sample_base_field(spec, model, 500 + tag);
        metropolis_run(&mut field, model, 1, sweeps, 500 + tag, |_, f| {
            for (i, (j, k)) in pairs.iter().enumerate() {
                if f.get(j, k) != 0 {
                    counts[i] += 1;
                }
            }
        });
        for (i, &count) in counts.iter().enumerate() {
            let estimate = count as f64 / sweeps as f64;
            let exact = dist.marginal(i)[1];
            assert!(
                (estimate - exact).abs() <= 0.02,
                "model {tag} pair {i}: {estimate} vs {exact}"
            );
        }
    }
    pass(8, "Metropolis marginals match exact enumeration; kernel is invariant");
}

#[test]
fn criterion_09_entropy_and_gamma_m() {
    // Bernoulli closed form at 1e-12
    let key = StreamKey::new(55);
    for trial in 0..200u64 {
        let p = 0.999 * key.with(trial).uniform(0) + 5e-4;
        let q = 0.999 * key.with(trial).uniform(1) + 5e-4;
        let got = torusnet::harness::relative_entropy_exact(&[1.0 - p, p], &[1.0 - q, q]);
        let closed = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        assert!((got - closed).abs() <= 1e-12, "p={p} q={q}");
    }

    // Gamma_m locks in once the truncation passes the potential range
    let spec = TorusSpec::new(1, 1);
    let mut model = GibbsModel::base_only(ConnSpace::binary(1.0), 1.0, 1.5, 5, 0.4);
    model.potentials.push(PotentialSpec {
        sites: vec![(lv(&[0]), lv(&[1]))],
        table: vec![0.0, -0.9],
    });
    let gammas: Vec<f64> = (0..=3i64)
        .map(|m| {
            torusnet::harness::gamma_m_estimate(spec, &model, m)
                .unwrap()
                .gamma_m
        })
        .collect();
    // the m = 0 truncation kills the only potential
    assert!(gammas[0].abs() < 1e-12);
    assert!((gammas[0] - gammas[1]).abs() > 1e-3, "truncation must bite");
    for w in gammas[1..].windows(2) {
        assert!(
            (w[0] - w[1]).abs() <= 1e-12,
            "gamma_m not stable: {gammas:?}"
        );
    }
    pass(9, "relative entropy exact to 1e-12; Gamma_m stabilizes past range");
}

#[test]
fn criterion_10_concentration_trend() {
    let mut cfg = AppConfig::example();
    cfg.torus.n_sweep = vec![1, 2, 3, 4];
    cfg.integration.dt = 2e-3;
    cfg.integration.t_end = 1.0;
    cfg.experiment.replicas = 200;
    cfg.experiment.seed = 2024;
    cfg.experiment.observable = ObservableSpec::TanhMean;
    cfg.connectivity.m0 = 2;
    cfg.connectivity.p_near = 0.5;
    cfg.experiment.events = vec![EventSpec {
        name: "elevated".into(),
        op: ">=".into(),
        threshold: 0.1,
    }];
    let manifest = run_replicas(&cfg);
    let mut variances = Vec::new();
    for &n in &cfg.torus.n_sweep {
        let h: Vec<f64> = manifest
            .rows
            .iter()
            .filter(|r| r.n == n && r.blow_up.is_none())
            .map(|r| r.h_n)
            .collect();
        assert_eq!(h.len(), 200, "no replica may blow up at n={n}");
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        let var = h.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (h.len() - 1) as f64;
        variances.push(var);
    }
    let inversions = variances.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(
        inversions <= 1,
        "H_n variance not concentrating: {variances:?}"
    );

    let rows = ldp_scan(&cfg, "elevated").unwrap();
    assert!(rows.iter().all(|r| !r.zero_hits), "event must stay moderate");
    let norm_log: Vec<f64> = rows.iter().map(|r| r.norm_log.unwrap()).collect();
    let first_spread = (norm_log[0] - norm_log[1]).abs();
    let last_spread = (norm_log[2] - norm_log[3]).abs();
    assert!(
        last_spread < first_spread,
        "normalized log not stabilizing: {norm_log:?}"
    );
    println!(
        "  variances {variances:?}, norm-log spreads {first_spread:.4} -> {last_spread:.4}"
    );
    pass(10, "H_n variance concentrates; normalized log-probability stabilizes");
}

#[test]
fn criterion_11_strong_order_richardson() {
    let spec = TorusSpec::new(1, 2);
    let params = default_params();
    let model = dense_model(1.0);
    let subsample = |noise: &NoiseField, k: usize| -> NoiseField {
        NoiseField {
            spec: noise.spec,
            dt: noise.dt * k as f64,
            paths: noise
                .paths
                .iter()
                .map(|p| Trajectory {
                    dt: p.dt * k as f64,
                    values: p.values.iter().step_by(k).cloned().collect(),
                })
                .collect(),
        }
    };
    // sup distance over the coarsest common grid
    let grid_dist = |a: &torusnet::solver::NetworkState,
                     b: &torusnet::solver::NetworkState|
     -> f64 {
        let steps_a = a.u[0].values.len() - 1;
        let steps_b = b.u[0].values.len() - 1;
        let common = steps_a.min(steps_b);
        let (ka, kb) = (steps_a / common, steps_b / common);
        let mut worst = 0.0f64;
        for (pa, pb) in a.u.iter().zip(&b.u) {
            for i in 0..=common {
                worst = worst.max((pa.values[i * ka] - pb.values[i * kb]).abs());
            }
        }
        worst
    };
    let mut ratios = Vec::new();
    for r in 0..50u64 {
        let (noise_seed, field_seed) = replica_seeds(99, spec.n, r);
        // one Brownian path at the finest grid drives all three runs
        let fine = sample_noise(spec, 2.5e-4, 1.0, noise_seed).unwrap();
        let field = sample_base_field(spec, &model, field_seed);
        let x_fine = integrate_network(&fine, &field, &params).unwrap();
        let x_mid = integrate_network(&subsample(&fine, 2), &field, &params).unwrap();
        let x_coarse = integrate_network(&subsample(&fine, 4), &field, &params).unwrap();
        let err_coarse = grid_dist(&x_coarse, &x_mid);
        let err_mid = grid_dist(&x_mid, &x_fine);
        if err_coarse > 1e-12 {
            ratios.push(err_mid / err_coarse);
        }
    }
    assert!(ratios.len() >= 45, "corpus too degenerate");
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (0.4..=0.6).contains(&mean),
        "Richardson ratio {mean} outside [0.4, 0.6]"
    );
    println!("  mean Richardson ratio {mean:.4} over {} replicas", ratios.len());
    pass(11, "dt-halving error ratio sits in the strong-order-1 band");
}
