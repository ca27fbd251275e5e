#!/usr/bin/env python3
"""Smoke test for the torusnet_py extension module.

Builds nothing itself: expects `cargo build -p torusnet-py` (or --release)
to have produced the cdylib, which it copies next to itself under the
importable name before exercising the main entry points.
"""

import json
import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def locate_extension():
    candidates = [
        ROOT / "target" / "release" / "libtorusnet_py.so",
        ROOT / "target" / "debug" / "libtorusnet_py.so",
        ROOT / "target" / "release" / "libtorusnet_py.dylib",
        ROOT / "target" / "debug" / "libtorusnet_py.dylib",
    ]
    for c in candidates:
        if c.exists():
            return c
    raise SystemExit(
        "extension not built; run `cargo build -p torusnet-py` first"
    )


def import_module():
    src = locate_extension()
    dst = HERE / ("torusnet_py" + src.suffix)
    if not dst.exists() or src.stat().st_mtime > dst.stat().st_mtime:
        shutil.copyfile(src, dst)
    sys.path.insert(0, str(HERE))
    import torusnet_py

    return torusnet_py


def main():
    tn = import_module()
    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "ok" if ok else "FAIL"
        print(f"  {name}: {status}")
        if not ok:
            raise SystemExit(f"smoke test failed at {name}")

    print("torusnet_py smoke test")

    # torus arithmetic
    check("mod_torus", tn.mod_torus([2], 1, 1) == [-1]
          and tn.mod_torus([4, -2], 2, 1) == [1, 1])
    sites = tn.cube_sites(1, 1)
    check("cube_sites", sites == [[-1], [0], [1]])

    # weight sequences
    check("dirichlet_at_zero", tn.dirichlet_kernel([0.0], 1) == 3.0)
    h = tn.normalizer_h(1, 2.0, 1)
    check("normalizer_h", abs(h - math.sqrt(21.0)) < 1e-9)
    w = tn.compute_weights(1, 2.0, 1)
    total = sum(w["values"].values()) + w["tail_mass"]
    check("weights_mass", abs(total - 1.0) < 1e-12)
    check("weights_certificates",
          w["all_positive"] and w["min_convolution_slack"] > -1e-8
          and w["min_scaled_in_vm"] > w["lower_bound_target"])

    # noise determinism
    a = tn.noise_paths(1, 1, 0.01, 0.1, 7)
    b = tn.noise_paths(1, 1, 0.01, 0.1, 7)
    check("noise_deterministic", a == b and len(a) == 3 and a[0][0] == 0.0)

    # connection model
    model = {
        "space": {"labels": ["0", "1"], "null_index": 0,
                  "metric": [[0.0, 1.0], [1.0, 0.0]]},
        "potentials": [{"sites": [[[0], [1]]], "table": [0.0, -1.0]}],
        "upsilon": 1.0, "gamma": 1.5, "m0": 2, "p_near": 0.5,
    }
    model_json = json.dumps(model)
    p = tn.base_connect_prob([0], model_json)
    check("base_connect_prob", p == 0.5)
    edges = tn.base_field(1, 2, model_json, 11)
    check("base_field", all(abs(k[0]) <= 2 for _, k, _ in edges))
    pairs, marginals = tn.gibbs_exact_marginals(1, 1, model_json, 1)
    check("gibbs_exact", len(pairs) == 9
          and all(abs(sum(row) - 1.0) < 1e-12 for row in marginals))
    mcmc_edges = tn.metropolis_field(1, 1, model_json, 200, 3)
    check("metropolis_field", isinstance(mcmc_edges, list))

    # full simulation through the config schema
    config = {
        "torus": {"d": 1, "n_sweep": [1]},
        "dynamics": {"a": 0.7, "c": 0.8, "j_corr": 1.0, "j_dec": 0.5,
                     "j_bar": 1.0, "g_ini": 0.5,
                     "f": {"kind": "tanh"}, "v_act": {"kind": "logistic"}},
        "connectivity": {"upsilon": 1.0, "gamma": 1.5, "m0": 2,
                         "p_near": 0.5},
        "integration": {"dt": 0.001, "t_end": 0.2},
        "experiment": {"replicas": 1, "seed": 5, "ac_m_max": 1,
                       "rho": 2.0, "ac_c": 10.0},
    }
    run = tn.simulate(json.dumps(config))
    check("simulate_shapes", len(run["u"]) == 3 and len(run["u"][0]) == 201
          and run["u"][0][0] == 0.0)
    check("simulate_certificates",
          run["certificates"]["hebbian_in_box"]
          and run["certificates"]["apriori_max_ratio"] <= 1.0)
    rerun = tn.simulate(json.dumps(config))
    check("simulate_deterministic", run["u"] == rerun["u"])

    # empirical-measure metric
    d = tn.lp_distance([[0.0], [1.0]], [0.5, 0.5], [[0.0]], [1.0])
    check("lp_distance", d == 0.5)

    # entropy
    r = tn.relative_entropy([0.3, 0.7], [0.6, 0.4])
    closed = 0.3 * math.log(0.3 / 0.6) + 0.7 * math.log(0.7 / 0.4)
    check("relative_entropy", abs(r - closed) < 1e-12)
    check("relative_entropy_support",
          math.isinf(tn.relative_entropy([0.5, 0.5], [1.0, 0.0])))

    # Gibbs rate ingredient
    energy, log_z, gamma = tn.gamma_m(1, 1, model_json, 1)
    check("gamma_m", math.isfinite(gamma) and abs(energy + log_z - gamma) < 1e-12)

    # potential tail sums: the only potential has range 1
    check("phi_tail", tn.phi_tail(model_json, 0) == 1.0
          and tn.phi_tail(model_json, 1) == 0.0)

    # mean-field comparison baseline
    mf = tn.mean_field(4, json.dumps(config), 0.5, 0.3, 0.001, 0.1, 2)
    mf2 = tn.mean_field(4, json.dumps(config), 0.5, 0.3, 0.001, 0.1, 2)
    check("mean_field", len(mf) == 4 and len(mf[0]) == 101 and mf == mf2)

    print(f"all {checks} smoke checks passed")


if __name__ == "__main__":
    main()
