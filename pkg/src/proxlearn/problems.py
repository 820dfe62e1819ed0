"""Benchmark problem families.

Each family exposes the objective, its analytic gradient, parameter sampling
with fixed randomness, the search domain, projections where the domain is a
manifold, and closed-form proximal operators where they exist. Objectives
also come in a graph-building variant (``objective_graph``) used by the
training loss.

Conventions: ``x`` is a batch of row vectors with shape (n, d); ``tau`` is a
single parameter vector of shape (r,) or a per-row batch of shape (n, r).
"""

import itertools

import numpy as np

from . import autodiff as ad
from .rngs import stream

EPS_NORM = 1e-6  # smoothing inside sum (x_i^2 + eps)^{p/2}; configurable below


def _rows(tau, n, r):
    tau = np.asarray(tau, dtype=np.float64)
    if r == 0:
        return np.zeros((n, 0))
    if tau.ndim == 1:
        tau = tau[None, :]
    if tau.shape[1] != r:
        raise ValueError("expected parameter dimension %d, got %d"
                         % (r, tau.shape[1]))
    return np.broadcast_to(tau, (n, r))


def _col(y, j, d):
    e = np.zeros((d, 1))
    e[j, 0] = 1.0
    return ad.matmul(y, e)


class ProblemFamily:
    """Shared contract for the benchmark families."""

    name = "abstract"
    d = 0
    param_dim = 0
    has_closed_prox = False
    has_ground_truth = False
    needs_projection = False
    train_size = 1
    test_size = 1

    # Box domains store per-coordinate bounds; manifold domains override
    # sample_x / project / in_domain.
    lo = None
    hi = None

    def objective(self, tau, x):
        raise NotImplementedError

    def gradient(self, tau, x):
        raise NotImplementedError

    def objective_graph(self, tau_rows, y):
        raise NotImplementedError

    def sample_tau(self, seed, split, index):
        if split not in ("train", "test"):
            raise ValueError("split must be 'train' or 'test'")
        size = self.train_size if split == "train" else self.test_size
        if not 0 <= index < size:
            raise IndexError("tau index %d out of range for %s split of size %d"
                             % (index, split, size))
        rng = stream(seed, "tau", self.name, split, str(index))
        return self._draw_tau(rng, index)

    def _draw_tau(self, rng, index):
        return np.zeros(0)

    def sample_x(self, rng, n):
        return rng.uniform(self.lo, self.hi, (n, self.d))

    def project(self, x):
        return np.asarray(x, dtype=np.float64)

    def project_graph(self, y):
        return y

    def in_domain(self, x, tol=1e-9):
        x = np.atleast_2d(x)
        return np.all((x >= np.asarray(self.lo) - tol)
                      & (x <= np.asarray(self.hi) + tol), axis=1)

    def constrain(self, x):
        """Map points onto the domain: boxes clip, manifolds project."""
        if self.needs_projection:
            return self.project(x)
        if self.lo is not None:
            return np.clip(np.nan_to_num(x), self.lo, self.hi)
        return np.asarray(x, dtype=np.float64)

    def closed_prox(self, tau, x, lam):
        raise NotImplementedError("%s has no closed-form prox" % self.name)


class ConicSection(ProblemFamily):
    """Level-set sampling of conics: f(x) = g(x)^2 with
    g(x1, x2) = A x1^2 + B x1 x2 + C x2^2 + D x1 + E x2 + F."""

    name = "conic"
    d = 2
    param_dim = 6
    has_ground_truth = True
    train_size = 2 ** 20
    test_size = 256
    lo = (-5.0, -5.0)
    hi = (5.0, 5.0)

    def _g(self, tau, x):
        t = _rows(tau, x.shape[0], 6)
        x1, x2 = x[:, 0], x[:, 1]
        return (t[:, 0] * x1 ** 2 + t[:, 1] * x1 * x2 + t[:, 2] * x2 ** 2
                + t[:, 3] * x1 + t[:, 4] * x2 + t[:, 5])

    def objective(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self._g(tau, x) ** 2

    def gradient(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        t = _rows(tau, x.shape[0], 6)
        x1, x2 = x[:, 0], x[:, 1]
        g = self._g(tau, x)
        dg1 = 2 * t[:, 0] * x1 + t[:, 1] * x2 + t[:, 3]
        dg2 = t[:, 1] * x1 + 2 * t[:, 2] * x2 + t[:, 4]
        return 2 * g[:, None] * np.stack([dg1, dg2], axis=1)

    def objective_graph(self, tau_rows, y):
        t = _rows(tau_rows, y.value.shape[0], 6)
        x1, x2 = _col(y, 0, 2), _col(y, 1, 2)
        g = (t[:, 0:1] * ad.square(x1) + t[:, 1:2] * ad.mul(x1, x2)
             + t[:, 2:3] * ad.square(x2) + t[:, 3:4] * x1 + t[:, 4:5] * x2
             + t[:, 5:6])
        return ad.rowsum(ad.square(g))

    def _draw_tau(self, rng, index):
        return rng.uniform(-1.0, 1.0, 6)

    def on_curve(self, tau, x, tol=1e-6):
        """Membership in the zero level set: |g(x)| <= tol."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.abs(self._g(tau, x)) <= tol


class Cosine2D(ProblemFamily):
    """f(x) = -sum_i 10 cos(2 pi x_i) on [-5, 5]^2 with a singleton
    parameter space; all 121 integer lattice points are global minima."""

    name = "cosine2d"
    d = 2
    param_dim = 0
    has_ground_truth = True
    lo = (-5.0, -5.0)
    hi = (5.0, 5.0)
    weak_convexity = 40.0 * np.pi ** 2

    def objective(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return -10.0 * np.cos(2 * np.pi * x).sum(axis=1)

    def gradient(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return 20.0 * np.pi * np.sin(2 * np.pi * x)

    def objective_graph(self, tau_rows, y):
        return ad.rowsum(ad.mul(ad.cos(ad.mul(y, 2 * np.pi)), -10.0))

    def planted_solution(self):
        grid = np.arange(-5, 6, dtype=np.float64)
        return np.array(list(itertools.product(grid, grid)))


class L1Norm(ProblemFamily):
    """f(x) = ||x||_1 on [-1, 1]^d; closed-form prox is soft thresholding."""

    name = "l1"
    param_dim = 0
    has_closed_prox = True
    has_ground_truth = True

    def __init__(self, d=2):
        if d not in (2, 4, 8, 16, 32):
            raise ValueError("l1 dimension must be one of 2,4,8,16,32")
        self.d = d
        self.lo = tuple([-1.0] * d)
        self.hi = tuple([1.0] * d)

    def objective(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.abs(x).sum(axis=1)

    def gradient(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.sign(x)

    def objective_graph(self, tau_rows, y):
        return ad.rowsum(ad.absolute(y))

    def closed_prox(self, tau, x, lam):
        """Soft thresholding at 1/lam: argmin |y| + (lam/2)(y-x)^2."""
        if lam <= 0:
            raise ValueError("lam must be positive")
        x = np.asarray(x, dtype=np.float64)
        return np.sign(x) * np.maximum(np.abs(x) - 1.0 / lam, 0.0)


def shrinkage(x):
    """Soft thresholding at 1/2; the prox of ||.||_1 under the
    argmin_y ||y||_1 + ||y - x||^2 normalization."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - 0.5, 0.0)


def half_threshold(x, mu):
    """argmin_y mu*|y|^{1/2} + (1/2)(y - x)^2, computed component-wise.

    The nonzero stationary point solves u^3 - |x| u + mu/2 = 0 for u =
    sqrt(|y|); the trigonometric root is compared against 0 by objective
    value, which keeps branch boundaries exact.
    """
    x = np.asarray(x, dtype=np.float64)
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), x.shape)
    ax = np.abs(x)
    q = mu / 2.0
    # Three real roots exist iff 4 ax^3 >= 27 q^2.
    has_root = 4 * ax ** 3 >= 27 * q ** 2
    safe_ax = np.where(has_root, np.maximum(ax, 1e-300), 1.0)
    arg = np.clip(-(3 * q / (2 * safe_ax)) * np.sqrt(3 / safe_ax), -1.0, 1.0)
    u = 2 * np.sqrt(safe_ax / 3) * np.cos(np.arccos(arg) / 3.0)
    cand = np.where(has_root, u ** 2, 0.0)
    obj_cand = mu * np.sqrt(cand) + 0.5 * (cand - ax) ** 2
    obj_zero = 0.5 * ax ** 2
    y = np.where(obj_cand < obj_zero, cand, 0.0)
    return np.sign(x) * y


def mcp_penalty(x, gamma):
    """Minimax concave penalty: |x| - gamma x^2 for |x| <= 1/(2 gamma),
    constant 1/(4 gamma) beyond."""
    x = np.asarray(x, dtype=np.float64)
    inner = np.abs(x) <= 1.0 / (2 * gamma)
    return np.where(inner, np.abs(x) - gamma * x ** 2, 1.0 / (4 * gamma))


def mcp_prox(x, gamma, lam):
    """argmin_y MCP(y; gamma) + (lam/2)(y - x)^2, component-wise.

    All closed-form stationary candidates (zero, the firm-thresholding
    interior point, the flat branch, the branch boundary) are evaluated and
    the best is returned, so the result is exact even when the inner
    subproblem is non-convex (lam <= 2 gamma).
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.sign(x)
    ax = np.abs(x)
    bound = 1.0 / (2 * gamma)
    candidates = [np.zeros_like(ax), np.full_like(ax, bound), ax]
    denom = lam - 2 * gamma
    if abs(denom) > 1e-12:
        interior = np.clip((lam * ax - 1.0) / denom, 0.0, bound)
        candidates.append(interior)

    def value(y):
        return mcp_penalty(y, gamma) + 0.5 * lam * (y - ax) ** 2

    best = candidates[0]
    best_val = value(best)
    for cand in candidates[1:]:
        v = value(cand)
        better = v < best_val
        best = np.where(better, cand, best)
        best_val = np.where(better, v, best_val)
    return s * best


class SparseRecovery(ProblemFamily):
    """Noisy linear measurements with a sparsity regularizer.

    kind='lp':  f(x) = ||Ax - y||^2 + alpha * sum_i (x_i^2 + eps)^{p/2},
                tau = (alpha, p) in [0,1] x [0.2, 0.5].
    kind='mcp': f(x) = ||Ax - y||^2 + sum_i MCP(x_i; gamma),
                tau = (gamma,) in [0.5, 2].

    One fixed (A, y, x*) instance is generated per instance seed: A has
    i.i.d. N(0,1) entries, x* is uniform on the domain with half of its
    coordinates zeroed, and y = A x* + e with e ~ N(0, 0.1) (std 0.1).
    """

    name = "sparse"
    d = 8
    m = 4
    has_closed_prox = True
    has_ground_truth = True
    train_size = 1024
    test_size = 128
    lo = tuple([-2.0] * 8)
    hi = tuple([2.0] * 8)

    def __init__(self, kind="lp", instance_seed=0, eps_norm=EPS_NORM,
                 fix_p=None):
        if kind not in ("lp", "mcp"):
            raise ValueError("kind must be 'lp' or 'mcp'")
        self.kind = kind
        self.param_dim = 2 if kind == "lp" else 1
        self.eps_norm = eps_norm
        self.fix_p = fix_p  # restrict sampled taus to one exponent
        rng = stream(instance_seed, "sparse-instance")
        x_star = rng.uniform(-2.0, 2.0, self.d)
        zero_idx = rng.choice(self.d, self.d // 2, replace=False)
        x_star[zero_idx] = 0.0
        self.A = rng.normal(0.0, 1.0, (self.m, self.d))
        noise = rng.normal(0.0, 0.1, self.m)
        self.y_meas = self.A @ x_star + noise
        self.x_star = x_star

    def _penalty(self, tau_rows, x):
        if self.kind == "lp":
            alpha, p = tau_rows[:, 0], tau_rows[:, 1]
            return alpha * ((x ** 2 + self.eps_norm) ** (p[:, None] / 2)).sum(axis=1)
        gamma = tau_rows[:, 0:1]
        return mcp_penalty(x, gamma).sum(axis=1)

    def objective(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        t = _rows(tau, x.shape[0], self.param_dim)
        res = x @ self.A.T - self.y_meas
        return (res ** 2).sum(axis=1) + self._penalty(t, x)

    def gradient(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        t = _rows(tau, x.shape[0], self.param_dim)
        res = x @ self.A.T - self.y_meas
        grad = 2.0 * res @ self.A
        if self.kind == "lp":
            alpha, p = t[:, 0:1], t[:, 1:2]
            grad += alpha * p * x * (x ** 2 + self.eps_norm) ** (p / 2 - 1)
        else:
            gamma = t[:, 0:1]
            inner = np.abs(x) <= 1.0 / (2 * gamma)
            grad += np.where(inner, np.sign(x) - 2 * gamma * x, 0.0)
        return grad

    def objective_graph(self, tau_rows, y):
        n = y.value.shape[0]
        t = _rows(tau_rows, n, self.param_dim)
        res = ad.sub(ad.matmul(y, self.A.T), self.y_meas)
        lsq = ad.rowsum(ad.square(res))
        if self.kind == "lp":
            alpha, p = t[:, 0], t[:, 1]
            pen = ad.rowsum(ad.powc(ad.add(ad.square(y), self.eps_norm),
                                    p[:, None] / 2))
            return ad.add(lsq, ad.mul(pen, alpha))
        gamma = t[:, 0:1]
        inner = np.abs(y.value) <= 1.0 / (2 * gamma)
        quad = ad.sub(ad.absolute(y), ad.mul(ad.square(y), gamma))
        pen = ad.add(ad.mul(quad, inner.astype(np.float64)),
                     (~inner) / (4 * gamma))
        return ad.add(lsq, ad.rowsum(pen))

    def _draw_tau(self, rng, index):
        if self.kind == "lp":
            p = self.fix_p if self.fix_p is not None \
                else rng.uniform(0.2, 0.5)
            return np.array([rng.uniform(0.0, 1.0), p])
        return rng.uniform(0.5, 2.0, 1)

    def closed_prox(self, tau, x, lam):
        """Prox of the regularizer term alone (component-wise); the
        least-squares term is handled by the gradient step in PGD.

        Supported: lp with p = 1 or p = 1/2, and MCP. The p = 1/2 branch uses
        eps_norm = 0 (the exact quasi-norm), matching the thresholding
        formula.
        """
        if lam <= 0:
            raise ValueError("lam must be positive")
        tau = np.asarray(tau, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "mcp":
            return mcp_prox(x, float(tau[0]), lam)
        alpha, p = float(tau[0]), float(tau[1])
        if alpha == 0.0:
            return x.copy()
        if abs(p - 1.0) < 1e-12:
            return np.sign(x) * np.maximum(np.abs(x) - alpha / lam, 0.0)
        if abs(p - 0.5) < 1e-12:
            return half_threshold(x, alpha / lam)
        raise NotImplementedError("no thresholding formula for p=%g" % p)

    def planted_solution(self):
        return self.x_star.copy()


class MaxCutRank2(ProblemFamily):
    """Rank-2 relaxation of max-cut on K_8: each vertex is a unit circle
    vector, f(x) = sum over unordered edges of w_ij x_i . x_j."""

    name = "maxcut"
    n_vertices = 8
    d = 16
    param_dim = 28
    needs_projection = True
    train_size = 2 ** 20
    test_size = 1024

    def __init__(self):
        self.pairs = list(itertools.combinations(range(self.n_vertices), 2))
        n_pairs = len(self.pairs)
        # Selection matrices: (x @ Si) * (x @ Sj) summed in coordinate pairs
        # gives the per-edge inner products.
        self.Si = np.zeros((self.d, 2 * n_pairs))
        self.Sj = np.zeros((self.d, 2 * n_pairs))
        self.R = np.zeros((2 * n_pairs, n_pairs))
        for p, (i, j) in enumerate(self.pairs):
            for c in range(2):
                self.Si[2 * i + c, 2 * p + c] = 1.0
                self.Sj[2 * j + c, 2 * p + c] = 1.0
                self.R[2 * p + c, p] = 1.0
        # Pair-summing matrix for projections.
        self.P = np.zeros((self.d, self.n_vertices))
        for k in range(self.n_vertices):
            self.P[2 * k, k] = 1.0
            self.P[2 * k + 1, k] = 1.0

    def edge_dots(self, x):
        return ((x @ self.Si) * (x @ self.Sj)) @ self.R

    def objective(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        t = _rows(tau, x.shape[0], self.param_dim)
        return (t * self.edge_dots(x)).sum(axis=1)

    def gradient(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = x.shape[0]
        t = _rows(tau, n, self.param_dim)
        w = np.zeros((n, self.n_vertices, self.n_vertices))
        for p, (i, j) in enumerate(self.pairs):
            w[:, i, j] = t[:, p]
            w[:, j, i] = t[:, p]
        xp = x.reshape(n, self.n_vertices, 2)
        return np.einsum("nij,njc->nic", w, xp).reshape(n, self.d)

    def objective_graph(self, tau_rows, y):
        t = _rows(tau_rows, y.value.shape[0], self.param_dim)
        u = ad.matmul(y, self.Si)
        v = ad.matmul(y, self.Sj)
        dots = ad.matmul(ad.mul(u, v), self.R)
        return ad.rowsum(ad.mul(dots, t))

    def _draw_tau(self, rng, index):
        # Alternate graph types by index parity: even -> Erdos-Renyi(0.5)
        # with binary weights, odd -> complete graph with uniform weights.
        if index % 2 == 0:
            return (rng.random(self.param_dim) < 0.5).astype(np.float64)
        return rng.uniform(0.0, 1.0, self.param_dim)

    def sample_x(self, rng, n):
        theta = rng.uniform(0.0, 2 * np.pi, (n, self.n_vertices))
        x = np.empty((n, self.d))
        x[:, 0::2] = np.cos(theta)
        x[:, 1::2] = np.sin(theta)
        return x

    def project(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64)).copy()
        pairs = x.reshape(x.shape[0], self.n_vertices, 2)
        norms = np.linalg.norm(pairs, axis=2)
        degenerate = norms == 0.0
        pairs = np.where(degenerate[:, :, None],
                         np.array([1.0, 0.0]), pairs)
        norms = np.where(degenerate, 1.0, norms)
        return (pairs / norms[:, :, None]).reshape(x.shape[0], self.d)

    def project_graph(self, y):
        sq = ad.matmul(ad.square(y), self.P)
        norm = ad.powc(ad.clip_min(sq, 1e-24), 0.5)
        return ad.div(y, ad.matmul(norm, self.P.T))

    def in_domain(self, x, tol=1e-6):
        x = np.atleast_2d(x)
        norms = np.linalg.norm(x.reshape(x.shape[0], self.n_vertices, 2), axis=2)
        return np.all(np.abs(norms - 1.0) <= tol, axis=1)


class QuadraticBowl(ProblemFamily):
    """f(x) = 0.5 ||x||^2; used as a solver test fixture with a known prox."""

    name = "quadratic"
    param_dim = 0
    has_closed_prox = True

    def __init__(self, d=2, half_width=5.0):
        self.d = d
        self.lo = tuple([-half_width] * d)
        self.hi = tuple([half_width] * d)

    def objective(self, tau, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return 0.5 * (x ** 2).sum(axis=1)

    def gradient(self, tau, x):
        return np.atleast_2d(np.asarray(x, dtype=np.float64)).copy()

    def objective_graph(self, tau_rows, y):
        return ad.mul(ad.rowsum(ad.square(y)), 0.5)

    def closed_prox(self, tau, x, lam):
        return lam * np.asarray(x, dtype=np.float64) / (1.0 + lam)


FAMILIES = {
    "conic": ConicSection,
    "cosine2d": Cosine2D,
    "l1": L1Norm,
    "sparse": SparseRecovery,
    "maxcut": MaxCutRank2,
    "quadratic": QuadraticBowl,
}


def make_family(name, **kwargs):
    if name not in FAMILIES:
        raise ValueError("unknown problem family: %r" % (name,))
    return FAMILIES[name](**kwargs)
