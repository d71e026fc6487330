"""Fixed-order Gauss-Legendre rules for the three supported integration domains.

All rules are deterministic functions of (order, map parameters), so any
quantity computed from them is bit-reproducible. Unbounded domains are
mapped onto (0, 1) or (-1, 1) with smooth rational / tangent substitutions;
256 nodes give well below 1e-10 absolute error for exponential-family
densities whose scale matches the map scale.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

DEFAULT_NODES = 256


@lru_cache(maxsize=64)
def _unit_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on (0, 1), cached per order."""
    nodes, weights = leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def interval_rule(lower: float, upper: float, n: int = DEFAULT_NODES):
    """Nodes and weights integrating over the finite interval [lower, upper]."""
    u, w = _unit_rule(n)
    width = upper - lower
    return lower + width * u, width * w


def halfline_rule(scale: float = 1.0, n: int = DEFAULT_NODES):
    """Nodes and weights integrating over [0, inf).

    Uses x = scale * (1 - u) / u, which compresses the tail algebraically;
    `scale` should be of the order of the integrand's decay length.
    """
    u, w = _unit_rule(n)
    return scale * (1.0 - u) / u, scale * w / u**2


def realline_rule(center: float = 0.0, halfwidth: float = 1.0, n: int = DEFAULT_NODES):
    """Nodes and weights integrating over (-inf, inf).

    Uses x = center + halfwidth * tan(t); `halfwidth` should cover the bulk
    of the integrand's mass (a few standard deviations).
    """
    t, w = leggauss(n)
    t = 0.5 * np.pi * t
    w = 0.5 * np.pi * w
    return center + halfwidth * np.tan(t), halfwidth * w / np.cos(t) ** 2
