"""Learning proximal operators of parameterized non-convex objectives.

Subpackages:

* :mod:`proxlearn.autodiff` -- reverse-mode scalar-loss autodiff on numpy.
* :mod:`proxlearn.network`  -- the residual coupling operator network.
* :mod:`proxlearn.problems` -- benchmark objective families.
* :mod:`proxlearn.solvers`  -- learned/exact proximal iteration, particle
  descent, proximal gradient descent, max-cut rounding and brute force.
* :mod:`proxlearn.training` -- operator training objectives and loop.
* :mod:`proxlearn.metrics`  -- witnessed divergence / precision metrics.
* :mod:`proxlearn.cli`      -- ``proxlearn`` command-line entry point.
"""

__version__ = "0.1.0"
