"""Command-line harness: train / solve / eval / gradcheck / oracle / bench.

Configuration is a JSON file with the sections below; unknown keys are
rejected so typos fail fast.

    {
      "problem": {"name": "conic"},          # + family kwargs
      "method":  "pol",                      # pol|gol|pd|pgd|exact_prox
      "train":   {"lam": 0.1, "lr": 1e-4, "iters": 20000,
                  "tau_batch": 32, "x_batch": 256, "K": 5,
                  "gol_Q": 10, "gol_eta": 1.0},
      "solve":   {"n_points": 1024, "iters": 5, "step": 1.0, "lam": 0.1,
                  "tau_split": "test", "tau_index": 0},
      "metrics": {"t": [0.1], "delta_max": 1.0, "n_deltas": 50,
                  "witnesses": 1024, "trials": 10, "relative_t": false},
      "seed": 0,
      "out_dir": "runs/conic"
    }
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import experiments, metrics, solvers
from .network import load_network
from .problems import FAMILIES, make_family
from .rngs import stream
from .training import TrainConfig, train

_SECTION_KEYS = {
    "problem": {"name", "d", "kind", "instance_seed", "eps_norm", "fix_p"},
    "train": {"lam", "lr", "lr_final", "iters", "tau_batch", "x_batch", "K",
              "gol_Q", "gol_eta"},
    "solve": {"n_points", "iters", "step", "lam", "tau_split", "tau_index"},
    "metrics": {"t", "delta_max", "n_deltas", "witnesses", "trials",
                "relative_t"},
}

_DEFAULT_LAMBDA = {"conic": 0.1, "sparse": 10.0, "maxcut": 10.0,
                   "cosine2d": 400.0, "l1": 2.0, "quadratic": 1.0}


class ConfigError(ValueError):
    pass


def load_config(path, overrides=None):
    with open(path) as f:
        raw = json.load(f)
    known_top = {"problem", "method", "train", "solve", "metrics", "seed",
                 "out_dir"}
    unknown = set(raw) - known_top
    if unknown:
        raise ConfigError("unknown config keys: %s" % sorted(unknown))
    for section, allowed in _SECTION_KEYS.items():
        extra = set(raw.get(section, {})) - allowed
        if extra:
            raise ConfigError("unknown keys in %r: %s" % (section,
                                                          sorted(extra)))
    if "problem" not in raw or "name" not in raw["problem"]:
        raise ConfigError("config must name a problem family")
    if raw["problem"]["name"] not in FAMILIES:
        raise ConfigError("unknown problem family %r" % raw["problem"]["name"])
    method = raw.get("method", "pol")
    if method not in ("pol", "gol", "pd", "pgd", "exact_prox"):
        raise ConfigError("unknown method %r" % method)
    lam = raw.get("train", {}).get("lam")
    if lam is not None and lam < 0:
        raise ConfigError("negative proximal weight lam")
    for key in ("lr", "iters"):
        val = raw.get("train", {}).get(key)
        if val is not None and val <= 0:
            raise ConfigError("train.%s must be positive" % key)
    raw.setdefault("seed", 0)
    raw.setdefault("out_dir", "runs/default")
    raw["method"] = method
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "iters":
            raw.setdefault("train", {})["iters"] = value
        else:
            raw[key] = value
    return raw


def save_config(config, path):
    with open(path, "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")


def _build_family(config):
    kwargs = {k: v for k, v in config["problem"].items() if k != "name"}
    return make_family(config["problem"]["name"], **kwargs)


def _train_config(config, deterministic):
    section = dict(config.get("train", {}))
    section.setdefault("lam", _DEFAULT_LAMBDA[config["problem"]["name"]])
    mode = config["method"] if config["method"] in ("pol", "gol") else "pol"
    return TrainConfig(mode=mode, seed=config["seed"],
                       deterministic=deterministic, **section)


def cmd_train(config, deterministic=True):
    family = _build_family(config)
    tc = _train_config(config, deterministic)
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    save_config(config, os.path.join(out_dir, "config.json"))
    start = time.time()
    stamps = []

    def callback(it, loss, net):
        stamps.append((it, loss, 0.0 if deterministic
                       else time.time() - start))

    net, _ = train(tc, family, callback=callback)
    ckpt = os.path.join(out_dir, "checkpoint.ckpt")
    net.save(ckpt)
    with open(os.path.join(out_dir, "loss_trace.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "loss", "wallclock"])
        for it, loss, wall in stamps:
            writer.writerow([it, repr(loss), repr(wall)])
    return ckpt


def cmd_solve(config, checkpoint=None):
    family = _build_family(config)
    section = config.get("solve", {})
    method = config["method"]
    n_points = section.get("n_points", 1024)
    iters = section.get("iters", 5)
    tau_split = section.get("tau_split", "test")
    tau_index = section.get("tau_index", 0)
    tau = (family.sample_tau(config["seed"], tau_split, tau_index)
           if family.param_dim > 0 else np.zeros(0))
    tau_id = "%s:%d" % (tau_split, tau_index)
    x0 = family.sample_x(stream(config["seed"], "solve", method), n_points)

    if method in ("pol", "gol"):
        if checkpoint is None:
            raise ConfigError("method %r needs a checkpoint" % method)
        net = load_network(checkpoint)
        if net.d != family.d or net.r != family.param_dim:
            raise ConfigError("checkpoint dims (d=%d, r=%d) do not match "
                              "family (d=%d, r=%d)"
                              % (net.d, net.r, family.d, family.param_dim))
        op = solvers.learned_operator(net, family, tau)
        sols = solvers.ppa(op, family, tau, tau_id, x0, iters, method=method)
    elif method == "exact_prox":
        lam = section.get("lam", _DEFAULT_LAMBDA[config["problem"]["name"]])
        op = solvers.exact_prox_operator(family, tau, lam)
        sols = solvers.ppa(op, family, tau, tau_id, x0, iters,
                           method="exact_prox")
    elif method == "pd":
        sols = solvers.particle_descent(family, tau, tau_id, x0,
                                        section.get("step", 1.0), iters)
    else:
        sols = solvers.proximal_gradient_descent(family, tau, tau_id, x0,
                                                 section.get("step", 0.04),
                                                 iters)

    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "solutions_%s.csv" % method)
    sols.to_csv(path)
    with open(os.path.join(out_dir, "trace_%s.csv" % method), "w",
              newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "mean_objective"])
        for i, v in enumerate(sols.trace):
            writer.writerow([i, repr(v)])
    return path


def cmd_eval(config, candidate_path, reference_path):
    family = _build_family(config)
    cand = solvers.SolutionSet.from_csv(candidate_path, family.name)
    ref = solvers.SolutionSet.from_csv(reference_path, family.name)
    section = config.get("metrics", {})
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    cand_pts, cand_obj = cand.filtered()
    ref_pts, ref_obj = ref.filtered()
    if cand_pts.size == 0 or ref_pts.size == 0:
        raise metrics.EmptyThresholdedSet("no in-domain solutions to compare")
    paths = []
    for i, t in enumerate(section.get("t", [0.1])):
        actual_t = t * ref_obj.min() if section.get("relative_t") else t
        report = metrics.compute_report(
            cand_pts, cand_obj, ref_pts, ref_obj, family.sample_x, actual_t,
            stream(config["seed"], "eval-witness", str(i)),
            delta_max=section.get("delta_max", 1.0),
            n_deltas=section.get("n_deltas", 50),
            n_witnesses=section.get("witnesses", 1024),
            trials=section.get("trials", 10))
        path = os.path.join(out_dir, "metrics_t%d.csv" % i)
        report.to_csv(path)
        paths.append(path)
    return paths


def cmd_gradcheck(family_name, seed=0, tolerance=1e-4):
    names = sorted(set(FAMILIES) - {"quadratic"}) if family_name == "all" \
        else [family_name]
    failures = []
    for name in names:
        err = experiments.family_gradcheck(make_family(name), seed=seed)
        status = "ok" if err < tolerance else "FAIL"
        print("gradcheck %-10s max-rel-err %.3e  %s" % (name, err, status))
        if err >= tolerance:
            failures.append(name)
    return failures


def cmd_oracle(seed=0, tolerance=2e-4):
    """Closed-form proxes against the dense 1-D grid oracle."""
    from .problems import half_threshold, mcp_penalty, mcp_prox

    failures = []
    xs = np.concatenate([np.linspace(-3, 3, 25), [0.5, -0.5, 1.0, -1.0]])
    lams = [0.5, 1.0, 2.0, 10.0]

    def check(label, fn_closed, fn_pen, lam):
        # The prox may be set-valued at tie points, so compare objective
        # values when the points disagree.
        worst = 0.0
        for x in xs:
            closed = float(fn_closed(np.array([x]))[0])
            grid = experiments.grid_prox_oracle(fn_pen, x, lam)
            gap = abs(closed - grid)
            if gap > tolerance:
                def obj(y):
                    return float(fn_pen(np.array([y]))[0]
                                 + lam / 2.0 * (y - x) ** 2)
                gap = abs(obj(closed) - obj(grid))
            worst = max(worst, gap)
        status = "ok" if worst <= tolerance else "FAIL"
        print("oracle %-18s lam=%-5g max-err %.3e  %s"
              % (label, lam, worst, status))
        if worst > tolerance:
            failures.append(label)

    for lam in lams:
        check("l1", lambda v, lam=lam: np.sign(v) * np.maximum(
            np.abs(v) - 1.0 / lam, 0.0), np.abs, lam)
        for alpha in (0.3, 1.0):
            check("half p=1/2 a=%g" % alpha,
                  lambda v, a=alpha, lam=lam: half_threshold(v, a / lam),
                  lambda y, a=alpha: a * np.abs(y) ** 0.5, lam)
        for gamma in (0.5, 2.0):
            check("mcp g=%g" % gamma,
                  lambda v, g=gamma, lam=lam: mcp_prox(v, g, lam),
                  lambda y, g=gamma: mcp_penalty(y, g), lam)
    return failures


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="proxlearn",
        description="Learned-proximal-operator benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--iters", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--deterministic", action="store_true", default=True)

    add_common(sub.add_parser("train", help="train an operator network"))
    p_solve = sub.add_parser("solve", help="run a solver on one instance")
    add_common(p_solve)
    p_solve.add_argument("--checkpoint", default=None)
    p_eval = sub.add_parser("eval", help="witness metrics for two CSVs")
    add_common(p_eval)
    p_eval.add_argument("--candidate", required=True)
    p_eval.add_argument("--reference", required=True)
    p_grad = sub.add_parser("gradcheck", help="finite-difference checks")
    p_grad.add_argument("--family", default="all")
    p_grad.add_argument("--seed", type=int, default=0)
    p_oracle = sub.add_parser("oracle", help="closed prox vs grid oracle")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_bench = sub.add_parser("bench", help="run a named experiment")
    p_bench.add_argument("name", choices=sorted(experiments.EXPERIMENTS))
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=None)
    p_bench.add_argument("--iters", type=int, default=None)

    args = parser.parse_args(argv)
    if args.command == "gradcheck":
        return 1 if cmd_gradcheck(args.family, seed=args.seed) else 0
    if args.command == "oracle":
        return 1 if cmd_oracle(seed=args.seed) else 0
    if args.command == "bench":
        kwargs = {"seed": args.seed, "out_dir": args.out}
        if args.iters is not None:
            kwargs["iters"] = args.iters
        result = experiments.run_experiment(args.name, **kwargs)
        for key in sorted(result):
            print("%s=%r" % (key, result[key]))
        return 0

    overrides = {"seed": args.seed, "iters": args.iters, "out_dir": args.out}
    config = load_config(args.config, overrides)
    if args.command == "train":
        print(cmd_train(config, deterministic=args.deterministic))
    elif args.command == "solve":
        print(cmd_solve(config, checkpoint=args.checkpoint))
    elif args.command == "eval":
        for path in cmd_eval(config, args.candidate, args.reference):
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
