"""Named benchmark experiments tying training, solving, and evaluation
together. Each experiment returns a plain dict of results and optionally
writes CSV artifacts into an output directory."""

import csv
import os

import numpy as np

from . import metrics, solvers
from .problems import make_family, shrinkage
from .rngs import stream
from .training import TrainConfig, train


def _write_csv(out_dir, name, header, rows):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else repr(v)
                             for v in row])


def family_gradcheck(family, seed=0, n_points=100, h=1e-6, kink_margin=1e-3):
    """Max relative error between analytic and central-difference gradients.

    Points are sampled in the domain; coordinates within `kink_margin` of a
    known non-differentiable set (the l1 kinks at 0) are nudged away.
    """
    rng = stream(seed, "gradcheck", family.name)
    x = family.sample_x(rng, n_points)
    if family.name in ("l1", "sparse"):
        small = np.abs(x) < kink_margin
        x = np.where(small, np.sign(x + 1e-30) * kink_margin, x)
    if family.param_dim > 0:
        tau = family.sample_tau(seed, "train", 0)
    else:
        tau = np.zeros(0)
    analytic = family.gradient(tau, x)
    numeric = np.zeros_like(analytic)
    for i in range(family.d):
        e = np.zeros(family.d)
        e[i] = h
        numeric[:, i] = (family.objective(tau, x + e)
                         - family.objective(tau, x - e)) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grid_prox_oracle(fn, x, lam, lo=-4.0, hi=4.0, step=1e-4):
    """Dense 1-D minimizer of fn(y) + (lam/2)(y - x)^2."""
    ys = np.arange(lo, hi + step, step)
    vals = fn(ys) + 0.5 * lam * (ys - x) ** 2
    return float(ys[np.argmin(vals)])


def exp_witness_fixture(seed=0, n_witnesses=10000, out_dir=None):
    """Four-squares witness fixture: three matched point pairs and one
    unmatched candidate one unit away from the nearest reference."""
    a = np.array([[0.5, 0.5], [1.5, 0.5], [2.5, 0.5], [3.5, 0.5]])
    b = np.array([[0.5, 0.5], [1.5, 0.5], [2.5, 0.5]])

    def sample_witness(rng, n):
        return np.stack([rng.uniform(0.0, 4.0, n),
                         rng.uniform(0.0, 1.0, n)], axis=1)

    rng = stream(seed, "witness-fixture")
    d = metrics.witness_divergence(a, np.zeros(len(a)), b, np.zeros(len(b)),
                                   sample_witness, t=0.5,
                                   n_witnesses=n_witnesses, rng=rng)
    result = {
        "p_zero": float((d < 0.05).mean()),
        "p_half": float(((d > 0.45) & (d < 0.55)).mean()),
        "hausdorff": metrics.hausdorff(a, b),
        "wd": float(d.mean()),
    }
    _write_csv(out_dir, "witness_fixture.csv", ["metric", "value"],
               sorted(result.items()))
    return result


def exp_shrinkage(seed=0, iters=10000, lr=1e-3, x_batch=256, out_dir=None):
    """Train the operator on the l1 norm in 2-D and compare against the
    closed-form shrinkage, including the strong-convexity error bound."""
    family = make_family("l1", d=2)
    lam = 2.0  # matches the argmin ||y||_1 + ||y - x||^2 normalization
    config = TrainConfig(lam=lam, lr=lr, iters=iters, tau_batch=1,
                         x_batch=x_batch, seed=seed)
    net, trace = train(config, family)

    rng = stream(seed, "shrinkage-eval")
    xs = family.sample_x(rng, 1024)
    tau_rows = np.zeros((1024, 0))
    pred = net.forward(xs, tau_rows)
    target = shrinkage(xs)
    per_dim_mse = float(((pred - target) ** 2).mean())
    mse = float(((pred - target) ** 2).sum(axis=1).mean())

    def batch_loss(points):
        return float((family.objective(None, points)
                      + 0.5 * lam * ((points - xs) ** 2).sum(axis=1)).mean())

    achieved = batch_loss(pred)
    optimal = batch_loss(target)
    eps = achieved - optimal
    result = {
        "per_dim_mse": per_dim_mse,
        "mse": mse,
        "achieved_loss": achieved,
        "optimal_loss": optimal,
        "bound": 2.0 * eps / lam,
        "final_train_loss": trace[-1][1],
    }
    _write_csv(out_dir, "shrinkage.csv", ["metric", "value"],
               sorted(result.items()))
    if out_dir:
        net.save(os.path.join(out_dir, "shrinkage_net.ckpt"))
    return result


def exp_cosine_ablation(seed=0, iters=20000, lr=1e-3, lr_final=1e-5,
                        x_batch=256, ppa_iters=10, n_points=1024, radius=0.05,
                        out_dir=None):
    """Proximal-term ablation on the 2-D cosine landscape: lambda above the
    weak-convexity constant versus no proximal term at all."""
    family = make_family("cosine2d")
    lattice = family.planted_solution()
    recovered = {}
    for lam in (400.0, 0.0):
        config = TrainConfig(lam=lam, lr=lr, lr_final=lr_final, iters=iters,
                             tau_batch=1, x_batch=x_batch, seed=seed)
        net, _ = train(config, family)
        rng = stream(seed, "cosine-eval", str(lam))
        x0 = family.sample_x(rng, n_points)
        op = solvers.learned_operator(net, family, np.zeros(0))
        sols = solvers.ppa(op, family, np.zeros(0), "cosine", x0, ppa_iters,
                           method="pol")
        pts, _ = sols.filtered()
        recovered[lam] = metrics.count_recovered(pts, lattice, radius)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            sols.to_csv(os.path.join(out_dir,
                                     "cosine_lam%g_solutions.csv" % lam))
    result = {
        "recovered_lam400": recovered[400.0],
        "recovered_lam0": recovered[0.0],
        "n_minima": len(lattice),
    }
    _write_csv(out_dir, "cosine_ablation.csv", ["metric", "value"],
               sorted(result.items()))
    return result


def exp_conic(seed=0, iters=20000, tau_batch=32, x_batch=16, n_test=32,
              n_points=1024, ppa_iters=5, gol_iters=5, pd_steps=50000,
              pd_step=1.0, t=0.1, delta_max=0.2, n_witnesses=1024,
              trials=3, out_dir=None):
    """Conic level-set benchmark: learned proximal operator versus the
    gradient-operator baseline, scored against particle descent."""
    family = make_family("conic")
    pol_net, _ = train(TrainConfig(lam=0.1, iters=iters, tau_batch=tau_batch,
                                   x_batch=x_batch, seed=seed, mode="pol"),
                       family)
    gol_net, _ = train(TrainConfig(lam=0.1, iters=iters, tau_batch=tau_batch,
                                   x_batch=x_batch, seed=seed, mode="gol",
                                   gol_eta=1.0, gol_Q=10), family)

    rng = stream(seed, "conic-eval")
    pol_objs, gol_objs = [], []
    wp_pol, wp_gol = [], []
    skipped = 0
    rows = []
    for idx in range(n_test):
        tau = family.sample_tau(seed, "test", idx)
        x0 = family.sample_x(rng, n_points)
        pol = solvers.ppa(solvers.learned_operator(pol_net, family, tau),
                          family, tau, str(idx), x0, ppa_iters, method="pol")
        gol = solvers.ppa(solvers.learned_operator(gol_net, family, tau),
                          family, tau, str(idx), x0, gol_iters, method="gol")
        pd = solvers.particle_descent(family, tau, str(idx), x0, pd_step,
                                      pd_steps)
        pol_objs.append(pol.objectives.mean())
        gol_objs.append(gol.objectives.mean())

        pd_pts, pd_obj = pd.filtered()
        if pd_obj.size == 0 or pd_obj.min() > t:
            skipped += 1
            continue

        def wp_curve(sols):
            pts, obj = sols.filtered()
            try:
                report = metrics.compute_report(
                    pts, obj, pd_pts, pd_obj, family.sample_x, t,
                    stream(seed, "conic-witness", str(idx), sols.method),
                    delta_max=delta_max, n_witnesses=n_witnesses,
                    trials=trials)
                return report.wp_mean
            except metrics.EmptyThresholdedSet:
                return np.zeros(50)

        wp_pol.append(wp_curve(pol))
        wp_gol.append(wp_curve(gol))
        rows.append([idx, float(pol.objectives.mean()),
                     float(gol.objectives.mean()),
                     float(np.mean(wp_pol[-1])), float(np.mean(wp_gol[-1]))])

    result = {
        "pol_mean_objective": float(np.mean(pol_objs)),
        "gol_mean_objective": float(np.mean(gol_objs)),
        "pol_mean_wp": float(np.mean(wp_pol)) if wp_pol else float("nan"),
        "gol_mean_wp": float(np.mean(wp_gol)) if wp_gol else float("nan"),
        "n_scored": len(wp_pol),
        "n_skipped": skipped,
    }
    _write_csv(out_dir, "conic.csv",
               ["tau", "pol_obj", "gol_obj", "pol_wp", "gol_wp"], rows)
    return result


def exp_sparse_pgd(seed=0, iters=10000, tau_batch=32, x_batch=16,
                   alpha=0.627, n_points=1024, pol_iters=20, pgd_iters=200,
                   pgd_step=0.04, out_dir=None):
    """Sparse recovery at p = 1/2: the learned operator against proximal
    gradient descent with the closed-form half-thresholding prox."""
    family = make_family("sparse", instance_seed=seed, fix_p=0.5)
    net, _ = train(TrainConfig(lam=10.0, iters=iters, tau_batch=tau_batch,
                               x_batch=x_batch, seed=seed), family)
    tau = np.array([alpha, 0.5])
    rng = stream(seed, "sparse-eval")
    x0 = family.sample_x(rng, n_points)
    pol = solvers.ppa(solvers.learned_operator(net, family, tau), family,
                      tau, "sparse", x0, pol_iters, method="pol")
    pgd = solvers.proximal_gradient_descent(family, tau, "sparse", x0,
                                            pgd_step, pgd_iters)
    result = {
        "pol_mean_objective": float(pol.objectives.mean()),
        "pgd_mean_objective": float(pgd.objectives.mean()),
    }
    _write_csv(out_dir, "sparse_pgd.csv", ["metric", "value"],
               sorted(result.items()))
    if out_dir:
        pol.to_csv(os.path.join(out_dir, "sparse_pol_solutions.csv"))
        pgd.to_csv(os.path.join(out_dir, "sparse_pgd_solutions.csv"))
    return result


def exp_maxcut(seed=0, iters=20000, tau_batch=32, x_batch=16, n_graphs=64,
               n_points=256, ppa_iters=20, n_directions=64, out_dir=None):
    """Max-cut rounding validity and optimality against brute force on
    binary-weight Erdos-Renyi test graphs."""
    family = make_family("maxcut")
    net, _ = train(TrainConfig(lam=10.0, iters=iters, tau_batch=tau_batch,
                               x_batch=x_batch, seed=seed), family)
    rng = stream(seed, "maxcut-eval")
    n_optimal = 0
    all_valid = True
    rows = []
    for g in range(n_graphs):
        tau = family.sample_tau(seed, "test", 2 * g)  # even = binary ER(0.5)
        x0 = family.sample_x(rng, n_points)
        sols = solvers.ppa(solvers.learned_operator(net, family, tau),
                           family, tau, str(2 * g), x0, ppa_iters,
                           method="pol")
        cuts = solvers.round_cuts(sols.points, tau, family.pairs,
                                  n_directions=n_directions,
                                  rng=stream(seed, "maxcut-round", str(g)))
        best_value, _ = solvers.brute_force_max_cut(tau, family.pairs,
                                                    family.n_vertices)
        for cut in cuts:
            if cut.labels[0] != 1 or any(v not in (-1, 1) for v in cut.labels):
                all_valid = False
            if abs(cut.value - solvers.cut_value(cut.labels, tau,
                                                 family.pairs)) > 1e-12:
                all_valid = False
        best_found = cuts[0].value if cuts else 0.0
        if abs(best_found - best_value) <= 1e-12:
            n_optimal += 1
        rows.append([g, best_found, best_value, len(cuts)])
    result = {
        "n_graphs": n_graphs,
        "n_optimal": n_optimal,
        "fraction_optimal": n_optimal / n_graphs,
        "all_valid": all_valid,
    }
    _write_csv(out_dir, "maxcut.csv",
               ["graph", "best_found", "best_brute_force", "n_cuts"], rows)
    return result


EXPERIMENTS = {
    "witness-fixture": exp_witness_fixture,
    "shrinkage": exp_shrinkage,
    "cosine-ablation": exp_cosine_ablation,
    "conic": exp_conic,
    "sparse-pgd": exp_sparse_pgd,
    "maxcut": exp_maxcut,
}


def run_experiment(name, **kwargs):
    if name not in EXPERIMENTS:
        raise ValueError("unknown experiment %r; choose from %s"
                         % (name, sorted(EXPERIMENTS)))
    return EXPERIMENTS[name](**kwargs)
