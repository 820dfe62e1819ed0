"""Training loops for the proximal-operator learner and the gradient-operator
baseline, with importance sampling by unfolding the learned iteration."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .network import OperatorNet
from .rngs import stream


@dataclass
class TrainConfig:
    lam: float
    lr: float = 1e-4
    lr_final: float = 0.0
    iters: int = 20000
    tau_batch: int = 32
    x_batch: int = 256
    K: int = 5
    mode: str = "pol"
    gol_Q: int = 10
    gol_eta: float = 0.1
    seed: int = 0
    deterministic: bool = True
    log_every: int = 100
    checkpoint_every: int = 0
    checkpoint_path: str = ""

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.lr <= 0 or self.iters <= 0 or self.tau_batch <= 0 \
                or self.x_batch <= 0:
            raise ValueError("lr, iters and batch sizes must be positive")
        if self.lr_final < 0 or self.lr_final > self.lr:
            raise ValueError("lr_final must lie in [0, lr]")
        if self.K < 0 or self.gol_Q < 0 or self.gol_eta <= 0:
            raise ValueError("invalid unfolding/GOL settings")
        if self.mode not in ("pol", "gol"):
            raise ValueError("mode must be 'pol' or 'gol'")


def pol_minibatch_loss(net, family, tau_rows, xs, lam):
    """Mean of f(Phi(x, tau)) + (lam/2) ||Phi(x, tau) - x||^2 over the batch."""
    y = net.apply(xs, tau_rows)
    if family.needs_projection:
        y = family.project_graph(y)
    obj = family.objective_graph(tau_rows, y)
    prox = ad.rowsum(ad.square(ad.sub(y, xs)))
    return ad.mean(ad.add(obj, ad.mul(prox, lam / 2.0)))


def gol_target(family, tau_rows, xs, Q, eta):
    """Q explicit gradient steps from each x; no gradient flows through."""
    if Q < 0:
        raise ValueError("Q must be >= 0")
    if eta <= 0:
        raise ValueError("eta must be positive")
    x = np.atleast_2d(np.asarray(xs, dtype=np.float64)).copy()
    for _ in range(Q):
        # Constrain each step to the domain; the raw gradient flow can
        # escape to infinity for steep objectives and large steps.
        with np.errstate(over="ignore", invalid="ignore"):
            x = family.constrain(x - eta * family.gradient(tau_rows, x))
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("gradient-descent target diverged")
    return x


def gol_minibatch_loss(net, family, tau_rows, xs, Q, eta):
    """Mean squared distance to the Q-step gradient-descent target."""
    target = gol_target(family, tau_rows, xs, Q, eta)
    y = net.apply(xs, tau_rows)
    if family.needs_projection:
        y = family.project_graph(y)
    return ad.mean(ad.rowsum(ad.square(ad.sub(y, target))))


def importance_sample(net, family, rng, K, count, tau_rows=None):
    """Sample the unfolded-iteration mixture (1/(K+1)) sum_k (Phi^k)_# unif(X).

    Each point draws its own depth k uniformly from {0..K}; no gradient flows
    through these forward passes.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    xs = family.sample_x(rng, count)
    if K == 0:
        return xs
    depth = rng.integers(0, K + 1, count)
    if tau_rows is None:
        tau_rows = np.zeros((count, 0))
    for step in range(1, K + 1):
        mask = depth >= step
        if not mask.any():
            continue
        # Constrain each iterate to the domain; a partially trained operator
        # can escape it, and the proximal map's codomain is the domain.
        xs[mask] = family.constrain(net.forward(xs[mask], tau_rows[mask]))
    return xs


def _sample_taus(family, config, rng):
    """One parameter row per batch point (empty for singleton families)."""
    n = config.tau_batch * config.x_batch
    if family.param_dim == 0:
        return np.zeros((config.x_batch, 0))
    idx = rng.integers(0, family.train_size, config.tau_batch)
    taus = np.stack([family.sample_tau(config.seed, "train", int(i))
                     for i in idx])
    return np.repeat(taus, config.x_batch, axis=0)


def train(config, family, callback=None):
    """Run the configured training loop; returns (net, loss trace).

    The trace holds (iteration, loss) pairs sampled every log_every steps
    plus the final step. Deterministic given the config seed.
    """
    net = OperatorNet(family.d, family.param_dim,
                      rng=stream(config.seed, "init"))
    adam = ad.Adam(net.params)
    rng_tau = stream(config.seed, "train-tau")
    rng_x = stream(config.seed, "train-x")
    trace = []
    for it in range(config.iters):
        tau_rows = _sample_taus(family, config, rng_tau)
        xs = importance_sample(net, family, rng_x, config.K, len(tau_rows),
                               tau_rows)
        net.params.zero_grad()
        if config.mode == "pol":
            loss = pol_minibatch_loss(net, family, tau_rows, xs, config.lam)
        else:
            loss = gol_minibatch_loss(net, family, tau_rows, xs,
                                      config.gol_Q, config.gol_eta)
        loss_val = float(loss.value)
        if not np.isfinite(loss_val):
            raise FloatingPointError(
                "training loss diverged at iteration %d (trace: %r)"
                % (it, trace[-5:]))
        loss.backward()
        if config.lr_final > 0 and config.iters > 1:
            # Linear decay from lr to lr_final over the run; a shrinking
            # step is what lets the operator settle to high accuracy.
            frac = it / (config.iters - 1)
            lr_now = config.lr + (config.lr_final - config.lr) * frac
        else:
            lr_now = config.lr
        adam.step(net.params, net.params.grads(), lr_now)
        if it % config.log_every == 0 or it + 1 == config.iters:
            trace.append((it, loss_val))
            if callback is not None:
                callback(it, loss_val, net)
        if config.checkpoint_every and config.checkpoint_path \
                and (it + 1) % config.checkpoint_every == 0:
            net.save(config.checkpoint_path)
    return net, trace
