"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Criteria 1-5 train operators at desk scale and take tens of minutes each;
run `pytest tests/test_acceptance.py -v -s` to watch the lines appear.
"""

import json

import numpy as np
import pytest

from proxlearn import cli, experiments
from proxlearn.problems import make_family
from proxlearn.solvers import ppa, exact_prox_operator

SEED = 0


def report(name, passed, detail):
    print("ACCEPTANCE %-28s %s  (%s)" % (name, "PASS" if passed else "FAIL",
                                         detail))
    assert passed, "%s: %s" % (name, detail)


def test_criterion_1_shrinkage_recovery():
    r = experiments.exp_shrinkage(seed=SEED, iters=10000, lr=1e-3)
    ok_mse = r["per_dim_mse"] < 1e-3
    ok_bound = r["mse"] <= r["bound"] + 1e-12
    report("shrinkage-recovery", ok_mse and ok_bound,
           "per_dim_mse=%.2e (<1e-3), mse=%.2e <= bound=%.2e"
           % (r["per_dim_mse"], r["mse"], r["bound"]))


def test_criterion_2_proximal_term_ablation():
    r = experiments.exp_cosine_ablation(seed=SEED, iters=20000)
    ok_many = r["recovered_lam400"] >= 0.95 * r["n_minima"]
    ok_fewer = r["recovered_lam0"] < r["recovered_lam400"]
    report("proximal-term-ablation", ok_many and ok_fewer,
           "with prox %d/121 (>=115), without prox %d (< with)"
           % (r["recovered_lam400"], r["recovered_lam0"]))


def test_criterion_3_conic_pol_vs_gol():
    r = experiments.exp_conic(seed=SEED, iters=20000)
    ok_obj = r["pol_mean_objective"] <= r["gol_mean_objective"]
    ok_wp = r["pol_mean_wp"] >= r["gol_mean_wp"]
    report("conic-pol-vs-gol", ok_obj and ok_wp,
           "objective %.4g <= %.4g, mean WP %.3f >= %.3f (%d scored)"
           % (r["pol_mean_objective"], r["gol_mean_objective"],
              r["pol_mean_wp"], r["gol_mean_wp"], r["n_scored"]))


def test_criterion_4_sparse_vs_pgd():
    r = experiments.exp_sparse_pgd(seed=SEED, iters=10000)
    ok = r["pol_mean_objective"] <= r["pgd_mean_objective"]
    report("sparse-vs-pgd", ok,
           "learned %.4f <= pgd %.4f"
           % (r["pol_mean_objective"], r["pgd_mean_objective"]))


def test_criterion_5_maxcut_validity():
    # Optimality-fraction threshold pinned at 0.9 from the pilot run
    # (seed 0 reached 64/64); the floor required is one half.
    r = experiments.exp_maxcut(seed=SEED, iters=20000)
    ok = r["all_valid"] and r["fraction_optimal"] >= 0.9
    report("maxcut-validity", ok,
           "all cuts valid=%s, optimal on %d/%d graphs (>=90%%)"
           % (r["all_valid"], r["n_optimal"], r["n_graphs"]))


def test_criterion_6_witness_fixture():
    r = experiments.exp_witness_fixture(seed=SEED, n_witnesses=10000)
    ok = (abs(r["p_zero"] - 0.75) <= 0.02
          and abs(r["p_half"] - 0.25) <= 0.02
          and abs(r["hausdorff"] - 1.0) <= 0.05)
    report("witness-fixture", ok,
           "P(D<0.05)=%.3f (0.75+-0.02), P(0.45<D<0.55)=%.3f (0.25+-0.02), "
           "hausdorff=%.3f (1+-0.05)" % (r["p_zero"], r["p_half"],
                                         r["hausdorff"]))


def test_criterion_7_oracles_and_gradients():
    grad_failures = cli.cmd_gradcheck("all", seed=SEED, tolerance=1e-4)
    prox_failures = cli.cmd_oracle(seed=SEED, tolerance=2e-4)
    fam = make_family("quadratic")
    lam = 1.0
    x0 = np.array([[4.0, -3.0]])
    ratio = lam / (1.0 + lam)
    k = int(np.ceil(np.log(1e-10 / 5.0) / np.log(ratio)))
    sols = ppa(exact_prox_operator(fam, None, lam), fam, None, "q", x0, k)
    contracted = float(np.abs(sols.points).max())
    ok = not grad_failures and not prox_failures and contracted < 1e-10
    report("oracle-and-gradient-suite", ok,
           "gradcheck failures=%s, prox failures=%s, |x_k|=%.2e (<1e-10)"
           % (grad_failures, prox_failures, contracted))


def test_criterion_8_determinism(tmp_path):
    config = {
        "problem": {"name": "l1", "d": 2},
        "method": "pol",
        "train": {"lam": 2.0, "lr": 1e-3, "iters": 50, "tau_batch": 1,
                  "x_batch": 32},
        "solve": {"n_points": 64, "iters": 3},
        "seed": SEED,
    }
    outputs = []
    for run in ("first", "second"):
        config["out_dir"] = str(tmp_path / run)
        path = tmp_path / (run + ".json")
        path.write_text(json.dumps(config))
        cli.main(["train", "--config", str(path)])
        cli.main(["solve", "--config", str(path),
                  "--checkpoint", str(tmp_path / run / "checkpoint.ckpt")])
        outputs.append({
            name: (tmp_path / run / name).read_bytes()
            for name in ("loss_trace.csv", "solutions_pol.csv",
                         "trace_pol.csv")
        })
    same = outputs[0] == outputs[1]
    report("determinism", same,
           "train+solve CSVs byte-identical across reruns: %s" % same)
