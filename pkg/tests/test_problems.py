import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxlearn import autodiff as ad
from proxlearn.experiments import family_gradcheck, grid_prox_oracle
from proxlearn.problems import (FAMILIES, half_threshold, make_family,
                                mcp_penalty, mcp_prox, shrinkage)

ALL_NAMES = sorted(set(FAMILIES) - {"quadratic"})


# ---------------------------------------------------------------- objectives

def test_conic_objective_on_unit_circle():
    # tau = (1, 0, 1, 0, 0, -1) is the unit circle; points on it score 0.
    fam = make_family("conic")
    tau = np.array([1.0, 0.0, 1.0, 0.0, 0.0, -1.0])
    on = np.array([[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    np.testing.assert_allclose(fam.objective(tau, on), 0.0, atol=1e-15)
    # Squared violation: at the origin g = -1, objective 1.
    assert fam.objective(tau, np.zeros((1, 2)))[0] == pytest.approx(1.0)
    assert fam.on_curve(tau, on).all()
    assert not fam.on_curve(tau, np.zeros((1, 2)))[0]


def test_cosine_objective_extremes():
    fam = make_family("cosine2d")
    assert fam.objective(None, np.zeros((1, 2)))[0] == pytest.approx(-20.0)
    assert fam.objective(None, np.array([[0.5, 0.5]]))[0] == pytest.approx(20.0)
    np.testing.assert_allclose(fam.gradient(None, np.zeros((1, 2))), 0.0,
                               atol=1e-12)


def test_l1_objective_and_dimensions():
    fam = make_family("l1", d=4)
    assert fam.objective(None, np.array([[1.0, -2.0, 0.0, 0.5]]))[0] \
        == pytest.approx(3.5)
    with pytest.raises(ValueError):
        make_family("l1", d=3)


def test_sparse_objective_hand_computed():
    fam = make_family("sparse", instance_seed=0)
    x = np.zeros((1, 8))
    tau = np.array([0.5, 0.5])
    # At x = 0 the residual is -y and each smoothed coordinate contributes
    # alpha * eps^(p/2).
    expected = (fam.y_meas ** 2).sum() + 0.5 * 8 * fam.eps_norm ** 0.25
    assert fam.objective(tau, x)[0] == pytest.approx(expected)


def test_maxcut_objective_same_vector_sums_weights():
    fam = make_family("maxcut")
    tau = np.arange(1.0, 29.0)
    x = np.tile([1.0, 0.0], 8)[None, :]  # all vertices identical
    assert fam.objective(tau, x)[0] == pytest.approx(tau.sum())


def test_maxcut_objective_opposite_pair():
    fam = make_family("maxcut")
    tau = np.zeros(28)
    tau[0] = 3.0  # edge (0, 1) only
    x = np.tile([1.0, 0.0], 8)[None, :].copy()
    x[0, 2:4] = [-1.0, 0.0]  # vertex 1 opposite vertex 0
    assert fam.objective(tau, x)[0] == pytest.approx(-3.0)


# ----------------------------------------------------------------- gradients

@pytest.mark.parametrize("name", ALL_NAMES)
def test_family_gradients_match_finite_differences(name):
    assert family_gradcheck(make_family(name), seed=0) < 1e-4


@pytest.mark.parametrize("name", ALL_NAMES)
def test_objective_graph_matches_objective(name):
    fam = make_family(name)
    rng = np.random.default_rng(5)
    x = fam.sample_x(rng, 6)
    tau = fam.sample_tau(0, "train", 1) if fam.param_dim else np.zeros(0)
    tau_rows = np.broadcast_to(tau, (6, fam.param_dim))
    graph_val = fam.objective_graph(tau_rows, ad.Tensor(x)).value
    np.testing.assert_allclose(graph_val, fam.objective(tau, x), rtol=1e-12)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_objective_graph_gradcheck_in_x(name):
    fam = make_family(name)
    rng = np.random.default_rng(6)
    x = fam.sample_x(rng, 4)
    if name in ("l1", "sparse"):
        x = np.where(np.abs(x) < 1e-2, 0.5, x)  # stay off the kinks
    tau = fam.sample_tau(0, "train", 2) if fam.param_dim else np.zeros(0)
    tau_rows = np.broadcast_to(tau, (4, fam.param_dim))
    store = ad.ParamStore()
    store.add("x", x)
    err = ad.grad_check(
        lambda s: ad.mean(fam.objective_graph(tau_rows, s["x"])), store)
    assert err < 1e-4


# ----------------------------------------------------------- parameter draws

def test_sample_tau_deterministic_and_ranged():
    fam = make_family("conic")
    a = fam.sample_tau(0, "train", 17)
    b = fam.sample_tau(0, "train", 17)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (6,)
    assert np.all((a >= -1.0) & (a <= 1.0))
    c = fam.sample_tau(1, "train", 17)
    assert not np.array_equal(a, c)
    d = fam.sample_tau(0, "test", 17)
    assert not np.array_equal(a, d)


def test_sample_tau_bounds_checked():
    fam = make_family("conic")
    with pytest.raises(IndexError):
        fam.sample_tau(0, "test", fam.test_size)
    with pytest.raises(ValueError):
        fam.sample_tau(0, "validation", 0)


def test_sparse_tau_ranges():
    fam = make_family("sparse")
    taus = np.stack([fam.sample_tau(0, "train", i) for i in range(64)])
    assert np.all((taus[:, 0] >= 0.0) & (taus[:, 0] <= 1.0))
    assert np.all((taus[:, 1] >= 0.2) & (taus[:, 1] <= 0.5))
    fixed = make_family("sparse", fix_p=0.5)
    taus = np.stack([fixed.sample_tau(0, "train", i) for i in range(8)])
    assert np.all(taus[:, 1] == 0.5)


def test_maxcut_tau_parity_mixture():
    fam = make_family("maxcut")
    even = fam.sample_tau(0, "test", 4)
    odd = fam.sample_tau(0, "test", 5)
    assert set(np.unique(even)) <= {0.0, 1.0}
    assert np.all((odd >= 0.0) & (odd <= 1.0))
    assert len(np.unique(odd)) > 2  # continuous weights


# ---------------------------------------------------------------- projection

def test_maxcut_projection_normalizes_pairs():
    fam = make_family("maxcut")
    x = np.random.default_rng(0).normal(size=(5, 16)) * 3.0
    p = fam.project(x)
    assert fam.in_domain(p).all()
    # Directions are preserved.
    pairs_in = x.reshape(5, 8, 2)
    pairs_out = p.reshape(5, 8, 2)
    cross = (pairs_in[..., 0] * pairs_out[..., 1]
             - pairs_in[..., 1] * pairs_out[..., 0])
    np.testing.assert_allclose(cross, 0.0, atol=1e-12)


def test_maxcut_projection_degenerate_pair():
    fam = make_family("maxcut")
    x = np.zeros((1, 16))
    p = fam.project(x)
    np.testing.assert_allclose(p.reshape(8, 2), np.tile([1.0, 0.0], (8, 1)))


def test_maxcut_projection_graph_matches_numpy():
    fam = make_family("maxcut")
    x = np.random.default_rng(1).normal(size=(3, 16))
    np.testing.assert_allclose(fam.project_graph(ad.Tensor(x)).value,
                               fam.project(x), rtol=1e-12)


def test_maxcut_sample_x_on_manifold():
    fam = make_family("maxcut")
    x = fam.sample_x(np.random.default_rng(2), 10)
    assert fam.in_domain(x).all()


def test_box_in_domain():
    fam = make_family("conic")
    assert fam.in_domain(np.array([[5.0, -5.0]]))[0]
    assert not fam.in_domain(np.array([[5.1, 0.0]]))[0]


# ------------------------------------------------------------- closed proxes

def test_l1_closed_prox_matches_soft_threshold():
    fam = make_family("l1", d=2)
    x = np.array([[2.0, -0.3], [0.5, 1.0]])
    np.testing.assert_allclose(fam.closed_prox(None, x, 2.0),
                               [[1.5, 0.0], [0.0, 0.5]])
    with pytest.raises(ValueError):
        fam.closed_prox(None, x, 0.0)


def test_shrinkage_threshold_half():
    x = np.array([-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0])
    np.testing.assert_allclose(shrinkage(x),
                               [-0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5])


@given(st.floats(-100, 100), st.floats(-100, 100))
@settings(max_examples=100, deadline=None)
def test_shrinkage_nonexpansive(a, b):
    fa, fb = shrinkage(np.array([a]))[0], shrinkage(np.array([b]))[0]
    assert abs(fa - fb) <= abs(a - b) + 1e-12


@pytest.mark.parametrize("mu", [0.1, 0.5, 1.0, 2.0])
def test_half_threshold_matches_grid(mu):
    xs = np.linspace(-3.0, 3.0, 61)
    # Include the exact branch boundary |x| = (3/2) mu^(2/3).
    boundary = 1.5 * mu ** (2.0 / 3.0)
    xs = np.concatenate([xs, [boundary, -boundary, boundary + 1e-9]])
    closed = half_threshold(xs, mu)
    for x, c in zip(xs, closed):
        g = grid_prox_oracle(lambda y: mu * np.abs(y) ** 0.5, x, 1.0)

        def obj(y):
            return mu * abs(y) ** 0.5 + 0.5 * (y - x) ** 2

        assert obj(c) <= obj(g) + 2e-4


def test_half_threshold_zero_below_cutoff():
    # Small inputs map exactly to 0.
    assert half_threshold(np.array([0.1]), 1.0)[0] == 0.0
    assert half_threshold(np.array([0.0]), 1.0)[0] == 0.0


@pytest.mark.parametrize("gamma,lam", [(0.5, 1.0), (0.5, 10.0), (2.0, 1.0),
                                       (2.0, 10.0), (1.0, 2.0)])
def test_mcp_prox_matches_grid(gamma, lam):
    xs = np.concatenate([np.linspace(-2.5, 2.5, 51),
                         [1.0 / (2 * gamma), -1.0 / (2 * gamma)]])
    closed = mcp_prox(xs, gamma, lam)
    for x, c in zip(xs, closed):
        g = grid_prox_oracle(lambda y: mcp_penalty(y, gamma), x, lam)

        def obj(y):
            return float(mcp_penalty(np.array([y]), gamma)[0]
                         + 0.5 * lam * (y - x) ** 2)

        assert obj(c) <= obj(g) + 2e-4


def test_mcp_penalty_shape():
    np.testing.assert_allclose(mcp_penalty(np.array([0.0, 0.25, 0.5, 5.0]), 1.0),
                               [0.0, 0.1875, 0.25, 0.25])


def test_sparse_closed_prox_branches():
    fam = make_family("sparse", instance_seed=0)
    x = np.array([1.0, -2.0])
    # alpha = 0: identity.
    np.testing.assert_array_equal(fam.closed_prox(np.array([0.0, 0.3]), x, 1.0), x)
    # p = 1: soft threshold at alpha/lam.
    np.testing.assert_allclose(fam.closed_prox(np.array([0.5, 1.0]), x, 1.0),
                               [0.5, -1.5])
    # p = 1/2 routes to half thresholding.
    np.testing.assert_allclose(fam.closed_prox(np.array([0.5, 0.5]), x, 1.0),
                               half_threshold(x, 0.5))
    with pytest.raises(NotImplementedError):
        fam.closed_prox(np.array([0.5, 0.3]), x, 1.0)


def test_sparse_mcp_kind_prox():
    fam = make_family("sparse", kind="mcp", instance_seed=0)
    x = np.array([1.0, -2.0])
    np.testing.assert_allclose(fam.closed_prox(np.array([1.0]), x, 10.0),
                               mcp_prox(x, 1.0, 10.0))


def test_quadratic_closed_prox():
    fam = make_family("quadratic")
    x = np.array([[3.0, -6.0]])
    np.testing.assert_allclose(fam.closed_prox(None, x, 2.0), [[2.0, -4.0]])


# ------------------------------------------------------------ ground truth

def test_cosine_planted_lattice():
    fam = make_family("cosine2d")
    lattice = fam.planted_solution()
    assert lattice.shape == (121, 2)
    np.testing.assert_allclose(fam.objective(None, lattice), -20.0)


def test_sparse_planted_solution_structure():
    fam = make_family("sparse", instance_seed=3)
    x_star = fam.planted_solution()
    assert x_star.shape == (8,)
    assert (x_star == 0.0).sum() == 4
    assert np.all(np.abs(x_star) <= 2.0)
    # Measurements are consistent with x* up to the noise scale.
    res = fam.A @ x_star - fam.y_meas
    assert np.abs(res).max() < 1.0


def test_sparse_instances_differ_by_seed():
    a = make_family("sparse", instance_seed=0)
    b = make_family("sparse", instance_seed=1)
    assert not np.array_equal(a.A, b.A)
    # Same seed reproduces the instance exactly.
    c = make_family("sparse", instance_seed=0)
    np.testing.assert_array_equal(a.A, c.A)
    np.testing.assert_array_equal(a.y_meas, c.y_meas)


# -------------------------------------------------------------- invariances

def test_conic_objective_sign_invariance():
    # f = g^2 is invariant under tau -> -tau.
    fam = make_family("conic")
    tau = fam.sample_tau(0, "train", 3)
    x = fam.sample_x(np.random.default_rng(4), 16)
    np.testing.assert_allclose(fam.objective(tau, x), fam.objective(-tau, x))


def test_maxcut_rotation_invariance():
    # Rotating every vertex by the same angle preserves all inner products.
    fam = make_family("maxcut")
    tau = fam.sample_tau(0, "test", 0)
    x = fam.sample_x(np.random.default_rng(5), 8)
    c, s = np.cos(0.7), np.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    xr = (x.reshape(-1, 8, 2) @ rot.T).reshape(-1, 16)
    np.testing.assert_allclose(fam.objective(tau, xr), fam.objective(tau, x),
                               rtol=1e-12)


def test_sparse_smoothing_monotone_in_eps():
    base = make_family("sparse", instance_seed=0, eps_norm=0.0)
    smooth = make_family("sparse", instance_seed=0, eps_norm=1e-2)
    tau = np.array([1.0, 0.4])
    x = np.random.default_rng(6).uniform(-2, 2, (8, 8))
    assert np.all(smooth.objective(tau, x) >= base.objective(tau, x))


def test_make_family_rejects_unknown():
    with pytest.raises(ValueError):
        make_family("rosenbrock")
