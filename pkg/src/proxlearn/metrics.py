"""Set-to-set evaluation: witnessed divergence/precision, Hausdorff and
chamfer distances, optimum-recovery counting, and objective histograms."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class EmptyThresholdedSet(ValueError):
    """Raised when no solutions fall under the objective threshold."""


def _threshold(points, objectives, t, label):
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    mask = np.asarray(objectives, dtype=np.float64) <= t
    if not mask.any():
        raise EmptyThresholdedSet(
            "no %s solutions under threshold %g" % (label, t))
    return points[mask]


def witness_divergence(a_points, a_objectives, b_points, b_objectives,
                       sample_witness, t, n_witnesses, rng):
    """Sampled witness distances D_t between the thresholded sets.

    For each witness W, D_t is the average of the distance from the nearest
    candidate to its nearest reference and vice versa. Nearest-neighbor ties
    break to the lowest index. Returns the sampled D_t values; summarize with
    mean (WD) and tail fractions (WP).
    """
    a = _threshold(a_points, a_objectives, t, "candidate")
    b = _threshold(b_points, b_objectives, t, "reference")
    w = sample_witness(rng, n_witnesses)
    # Distance from each point of one set to its nearest neighbor in the other.
    cross = cdist(a, b)
    a_to_b = cross.min(axis=1)
    b_to_a = cross.min(axis=0)
    ia = cdist(w, a).argmin(axis=1)
    ib = cdist(w, b).argmin(axis=1)
    return 0.5 * a_to_b[ia] + 0.5 * b_to_a[ib]


def hausdorff(a, b):
    """Symmetric max-min distance between two non-empty point sets."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("hausdorff of an empty set")
    m = cdist(a, b)
    return float(max(m.min(axis=1).max(), m.min(axis=0).max()))


def chamfer(a, b):
    """Symmetric mean-min distance between two non-empty point sets."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("chamfer of an empty set")
    m = cdist(a, b)
    return float(m.min(axis=1).mean() + m.min(axis=0).mean())


def count_recovered(solutions, targets, radius):
    """Number of targets with at least one solution within `radius`."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    targets = np.atleast_2d(targets)
    solutions = np.atleast_2d(solutions)
    if solutions.size == 0:
        return 0
    return int((cdist(targets, solutions).min(axis=1) <= radius).sum())


def objective_histogram(objectives, bins):
    """Histogram of objective values over [min, max]."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    objectives = np.asarray(objectives, dtype=np.float64)
    counts, edges = np.histogram(objectives, bins=bins)
    return counts, edges


@dataclass
class MetricReport:
    """Witness metrics for one (method, problem instance) pair."""

    t: float
    deltas: np.ndarray
    wd_mean: float
    wd_std: float
    wp_mean: np.ndarray   # per delta
    wp_std: np.ndarray    # per delta
    rho: float            # fraction of candidate solutions under threshold
    rho_gt: float         # fraction of reference solutions under threshold
    hausdorff: float
    chamfer: float
    n_witnesses: int
    trials: int

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["delta", "wp_mean", "wp_std"])
            for d, m, s in zip(self.deltas, self.wp_mean, self.wp_std):
                writer.writerow([repr(float(d)), repr(float(m)),
                                 repr(float(s))])
            writer.writerow(["summary", "", ""])
            for key in ("t", "wd_mean", "wd_std", "rho", "rho_gt",
                        "hausdorff", "chamfer", "n_witnesses", "trials"):
                writer.writerow([key, repr(float(getattr(self, key))), ""])


def compute_report(a_points, a_objectives, b_points, b_objectives,
                   sample_witness, t, rng, delta_max=1.0, n_deltas=50,
                   n_witnesses=1024, trials=10):
    """Full witness-metric report averaged over independent witness trials."""
    deltas = np.linspace(0.0, delta_max, n_deltas + 1)[1:]
    wd = np.zeros(trials)
    wp = np.zeros((trials, n_deltas))
    for trial in range(trials):
        d = witness_divergence(a_points, a_objectives, b_points, b_objectives,
                               sample_witness, t, n_witnesses, rng)
        wd[trial] = d.mean()
        wp[trial] = (d[None, :] < deltas[:, None]).mean(axis=1)
    a_t = _threshold(a_points, a_objectives, t, "candidate")
    b_t = _threshold(b_points, b_objectives, t, "reference")
    return MetricReport(
        t=t, deltas=deltas,
        wd_mean=float(wd.mean()), wd_std=float(wd.std()),
        wp_mean=wp.mean(axis=0), wp_std=wp.std(axis=0),
        rho=float((np.asarray(a_objectives) <= t).mean()),
        rho_gt=float((np.asarray(b_objectives) <= t).mean()),
        hausdorff=hausdorff(a_t, b_t), chamfer=chamfer(a_t, b_t),
        n_witnesses=n_witnesses, trials=trials)
