"""Reference and inference-time solvers.

Includes the proximal-point iteration with either a learned or an exact
operator, multi-start particle descent, proximal gradient descent for sparse
recovery, a brute-force proximal oracle, and cut rounding / enumeration for
the max-cut family.
"""

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

DIVERGENCE_GUARD = 1e12


@dataclass
class SolutionSet:
    """Candidate solutions for one problem instance."""

    problem: str
    tau_id: str
    points: np.ndarray          # (n, d)
    objectives: np.ndarray      # (n,)
    method: str
    iters: int
    in_domain: np.ndarray = None        # (n,) bool
    trace: list = field(default_factory=list)  # mean objective per iteration

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.objectives = np.asarray(self.objectives, dtype=np.float64)
        if self.in_domain is None:
            self.in_domain = np.ones(len(self.points), dtype=bool)

    def filtered(self):
        """Only the candidates lying in the domain."""
        mask = self.in_domain
        return self.points[mask], self.objectives[mask]

    def to_csv(self, path):
        d = self.points.shape[1]
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["method", "tau_id", "iter"]
                            + ["x_%d" % i for i in range(d)]
                            + ["objective", "in_domain"])
            for k in range(len(self.points)):
                writer.writerow([self.method, self.tau_id, self.iters]
                                + [repr(float(v)) for v in self.points[k]]
                                + [repr(float(self.objectives[k])),
                                   int(self.in_domain[k])])

    @classmethod
    def from_csv(cls, path, problem=""):
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            d = sum(1 for h in header if h.startswith("x_"))
            rows = list(reader)
        if not rows:
            raise ValueError("empty solution file: %s" % path)
        points = np.array([[float(v) for v in row[3:3 + d]] for row in rows])
        objectives = np.array([float(row[3 + d]) for row in rows])
        in_domain = np.array([bool(int(row[4 + d])) for row in rows])
        return cls(problem, rows[0][1], points, objectives, rows[0][0],
                   int(rows[0][2]), in_domain)


def make_solution_set(family, tau, tau_id, points, method, iters, trace=None):
    points = np.atleast_2d(points)
    return SolutionSet(family.name, tau_id, points,
                       family.objective(tau, points), method, iters,
                       family.in_domain(points), trace or [])


def learned_operator(net, family, tau):
    """Bind a trained network to one problem instance, with projection."""
    z = net.encoder.encode(tau) if net.r > 0 else np.zeros((1, 0))

    def op(points):
        zz = np.broadcast_to(z, (len(points), net.r))
        return family.constrain(net.forward(points, zz))

    return op


def exact_prox_operator(family, tau, lam):
    def op(points):
        return family.closed_prox(tau, points, lam)

    return op


def ppa(operator, family, tau, tau_id, initial_points, k, method="ppa"):
    """Iterate an operator k times, recording the mean objective per step."""
    if k < 0:
        raise ValueError("iteration count must be >= 0")
    x = np.atleast_2d(np.asarray(initial_points, dtype=np.float64))
    trace = [float(family.objective(tau, x).mean())]
    for _ in range(k):
        x = operator(x)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite PPA iterate")
        trace.append(float(family.objective(tau, x).mean()))
    return make_solution_set(family, tau, tau_id, x, method, k, trace)


def _strict_project(family, x):
    # PD must never leave the domain: boxes clip, manifolds project.
    return family.constrain(x)


def particle_descent(family, tau, tau_id, initial_points, step, iters,
                     trace_every=100):
    """Projected gradient descent on a population of particles.

    tau may be a single parameter vector or one row per particle. Particles
    whose objective exceeds the divergence guard are frozen and flagged.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.atleast_2d(np.asarray(initial_points, dtype=np.float64)).copy()
    alive = np.ones(len(x), dtype=bool)
    trace = [float(family.objective(tau, x).mean())]
    for it in range(iters):
        g = family.gradient(tau, x[alive])
        x[alive] = _strict_project(family, x[alive] - step * g)
        obj = family.objective(tau, x)
        alive &= np.isfinite(obj) & (obj < DIVERGENCE_GUARD)
        if (it + 1) % trace_every == 0 or it + 1 == iters:
            trace.append(float(obj[alive].mean()) if alive.any()
                         else float("inf"))
    result = make_solution_set(family, tau, tau_id, x, "pd", iters, trace)
    result.in_domain &= alive
    return result


def proximal_gradient_descent(family, tau, tau_id, initial_points, step,
                              iters):
    """PGD for sparse recovery: gradient step on the least-squares term,
    then the closed-form regularizer prox with weight 1/step."""
    if step <= 0:
        raise ValueError("step must be positive")
    tau = np.asarray(tau, dtype=np.float64)
    x = np.atleast_2d(np.asarray(initial_points, dtype=np.float64)).copy()
    trace = [float(family.objective(tau, x).mean())]
    for _ in range(iters):
        res = x @ family.A.T - family.y_meas
        x = family.closed_prox(tau, x - step * 2.0 * res @ family.A,
                               1.0 / step)
        obj = family.objective(tau, x)
        mean_obj = float(obj.mean())
        if not np.isfinite(mean_obj) or mean_obj > DIVERGENCE_GUARD:
            raise FloatingPointError("PGD diverged at step size %g" % step)
        trace.append(mean_obj)
    return make_solution_set(family, tau, tau_id, x, "pgd", iters, trace)


def prox_oracle(family, tau, x, lam, inner_budget=2000, restarts=4, rng=None,
                grid_steps=None, tol=1e-8):
    """Minimize f(y) + (lam/2)||y - x||^2 numerically.

    Gradient descent with backtracking from y = x plus random restarts; for
    d <= 2, an optional dense grid search seeds the descent. Returns
    (point, converged); when the budget runs out the best point found is
    returned with converged=False.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    rng = rng if rng is not None else np.random.default_rng(0)

    def h(y):
        return float(family.objective(tau, y)[0]
                     + 0.5 * lam * ((y - x) ** 2).sum())

    def h_grad(y):
        return family.gradient(tau, y) + lam * (y - x)

    starts = [x.copy()]
    for _ in range(restarts):
        starts.append(family.sample_x(rng, 1))
    if grid_steps and family.d <= 2:
        axes = [np.linspace(family.lo[i], family.hi[i], grid_steps)
                for i in range(family.d)]
        mesh = np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, family.d)
        vals = family.objective(tau, mesh) + 0.5 * lam * ((mesh - x) ** 2).sum(axis=1)
        starts.append(mesh[np.argmin(vals)].reshape(1, -1))

    best, best_val, converged = x.copy(), h(x), False
    for y in starts:
        y = y.copy()
        val = h(y)
        step = 1.0 / lam
        for _ in range(inner_budget):
            g = h_grad(y)
            gnorm = float(np.linalg.norm(g))
            if gnorm < tol:
                converged = True
                break
            while step > 1e-16:
                cand = y - step * g
                cand_val = h(cand)
                if cand_val < val:
                    break
                step *= 0.5
            else:
                break
            y, val = cand, cand_val
            step *= 1.3
        if val < best_val:
            best, best_val = y, val

    # Coordinate-wise polish: plain descent stalls on kinked objectives
    # (e.g. l1) where the subgradient points uphill along the kink. Exact
    # 1-D minimization per coordinate fixes the last few digits.
    from scipy.optimize import minimize_scalar
    for _ in range(4):
        moved = False
        for i in range(best.shape[1]):
            def h_i(v, i=i):
                probe = best.copy()
                probe[0, i] = v
                return h(probe)

            res = minimize_scalar(h_i, bounds=(best[0, i] - 1.0,
                                               best[0, i] + 1.0),
                                  method="bounded",
                                  options={"xatol": 1e-12})
            if res.fun < best_val - 1e-15:
                best[0, i] = res.x
                best_val = res.fun
                moved = True
        if not moved:
            break
    return best.reshape(-1), converged


@dataclass(frozen=True)
class CutAssignment:
    """A two-coloring of the vertices with vertex 0 canonicalized to +1."""

    labels: tuple
    value: float


def cut_value(labels, weights, pairs):
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    return float(sum(w for (i, j), w in zip(pairs, weights)
                     if labels[i] != labels[j]))


def round_cuts(solutions, weights, pairs, n_directions=64, rng=None):
    """Goemans-Williamson style rounding of rank-2 solutions to cuts.

    Each solution is cut by random unit directions; sign ties resolve to +1,
    colorings are canonicalized so vertex 0 is +1, and exact duplicates are
    removed. Returns assignments sorted by decreasing cut value.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    solutions = np.atleast_2d(np.asarray(solutions, dtype=np.float64))
    n_vertices = solutions.shape[1] // 2
    seen = {}
    for sol in solutions:
        verts = sol.reshape(n_vertices, 2)
        theta = rng.uniform(0.0, 2 * np.pi, n_directions)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        proj = verts @ dirs.T  # (n_vertices, n_directions)
        labels = np.where(proj >= 0.0, 1, -1)
        labels *= labels[0:1, :]  # vertex 0 fixed to +1
        for col in labels.T:
            key = tuple(int(v) for v in col)
            if key not in seen:
                seen[key] = CutAssignment(key, cut_value(col, weights, pairs))
    return sorted(seen.values(), key=lambda c: (-c.value, c.labels))


def brute_force_max_cut(weights, pairs, n_vertices):
    """Exhaustive max cut with vertex 0 fixed to +1 (<= 20 vertices)."""
    if n_vertices > 20:
        raise ValueError("brute force limited to 20 vertices")
    best_value = -np.inf
    best = []
    for bits in itertools.product((1, -1), repeat=n_vertices - 1):
        labels = (1,) + bits
        v = cut_value(labels, weights, pairs)
        if v > best_value + 1e-12:
            best_value, best = v, [CutAssignment(labels, v)]
        elif abs(v - best_value) <= 1e-12:
            best.append(CutAssignment(labels, v))
    return best_value, best
