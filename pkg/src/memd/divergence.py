"""Divergences between fitted marginals and between discrete distributions.

For two maximum-entropy densities built on the same support and the same
moment functions, KL and Jeffreys divergences collapse to inner products of
multipliers and moments:

    KL(p || q) = (lambda_0' - lambda_0) + sum_k (lambda_k' - lambda_k) mu_k
    J(p || q)  = sum_k (lambda_k' - lambda_k) (mu_k - mu_k')

where primes are q's parameters and mu are p's matched moments. These are the
ranking primitives; the quadrature KL here exists as a cross-checking oracle
and is never used to rank.

The multi-distribution divergences: JS is the prior-weighted mean KL to the
arithmetic mixture (equal to the mutual information between a sample and its
class indicator); the geometric-mean variant trades the mixture for a
weighted geometric mean, which reduces to prior-weighted pairwise J sums and
therefore inherits the closed form. JS never exceeds the geometric-mean
variant (convexity of KL in its second argument).

All functions are pure; pairwise terms may be evaluated concurrently and
summed in any order within tolerance.
"""

from __future__ import annotations

import numpy as np

from .errors import IncompatibleDensities
from .maxent import MaxEntDensity, log_density, support_rule, _moment_hints

__all__ = [
    "kl_closed_form",
    "j_divergence",
    "kl_numeric",
    "js_divergence_discrete",
    "js_gm_discrete",
    "mutual_information_discrete",
    "js_gm",
    "as_weights",
    "as_distributions",
]

_WEIGHT_ATOL = 1e-12


def as_weights(weights) -> np.ndarray:
    """Validate a mixture weight vector: entries in [0, 1], summing to one."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be one-dimensional")
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("weights must lie in [0, 1]")
    if abs(w.sum() - 1.0) > _WEIGHT_ATOL:
        raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
    return w


def as_distributions(distributions) -> np.ndarray:
    """Validate a stack of discrete distributions over a shared support."""
    rows = [np.asarray(p, dtype=float) for p in distributions]
    sizes = {r.shape for r in rows}
    if len(sizes) != 1:
        raise ValueError(f"mismatched support sizes: {sorted(sizes)}")
    p = np.stack(rows)
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > _WEIGHT_ATOL):
        raise ValueError("each distribution must sum to 1")
    return p


def _check_compatible(p: MaxEntDensity, q: MaxEntDensity, specs: bool = True):
    if p.support != q.support:
        raise IncompatibleDensities(f"supports differ: {p.support} vs {q.support}")
    if specs and p.spec != q.spec:
        raise IncompatibleDensities(f"moment functions differ: {p.spec} vs {q.spec}")


def kl_closed_form(p: MaxEntDensity, q: MaxEntDensity) -> float:
    """KL(p || q) from multipliers and matched moments; clamped at zero."""
    _check_compatible(p, q)
    value = q.log_normalizer - p.log_normalizer
    for lam_q, lam_p, mu_p in zip(q.lambdas, p.lambdas, p.moments.values):
        value += (lam_q - lam_p) * mu_p
    # rounding can leave a -1e-16-ish residue; non-negativity is load-bearing
    return max(value, 0.0)


def j_divergence(p: MaxEntDensity, q: MaxEntDensity) -> float:
    """Jeffreys divergence sum_k (lambda_k' - lambda_k)(mu_k - mu_k')."""
    _check_compatible(p, q)
    value = 0.0
    for lam_p, lam_q, mu_p, mu_q in zip(
        p.lambdas, q.lambdas, p.moments.values, q.moments.values
    ):
        value += (lam_q - lam_p) * (mu_p - mu_q)
    return max(value, 0.0)


def kl_numeric(p: MaxEntDensity, q: MaxEntDensity, n_nodes: int = 512) -> float:
    """Quadrature estimate of the KL integral; test oracle only."""
    _check_compatible(p, q, specs=False)
    center_p, scale_p = _moment_hints(p.support, p.moments.values, p.spec.orders)
    center_q, scale_q = _moment_hints(q.support, q.moments.values, q.spec.orders)
    center = 0.5 * (center_p + center_q)
    scale = max(scale_p, scale_q) + abs(center_p - center_q)
    x, w = support_rule(p.support, n_nodes, center, scale)
    log_p = log_density(p, x)
    log_q = log_density(q, x)
    dens = np.exp(log_p)
    integrand = np.where(dens > 0, dens * (log_p - log_q), 0.0)
    return float(np.sum(w * integrand))


def js_divergence_discrete(distributions, weights) -> float:
    """Information radius: sum_i pi_i KL(P_i || mixture), computed exactly."""
    p = as_distributions(distributions)
    w = as_weights(weights)
    if w.shape[0] != p.shape[0]:
        raise ValueError("one weight per distribution required")
    mixture = w @ p
    ratio = np.divide(p, mixture, out=np.ones_like(p), where=(p > 0) & (mixture > 0))
    kl_terms = np.where(p > 0, p * np.log(ratio), 0.0).sum(axis=1)
    return float(w @ kl_terms)


def _kl_discrete(p: np.ndarray, q: np.ndarray) -> float:
    ratio = np.divide(p, q, out=np.ones_like(p), where=(p > 0) & (q > 0))
    if np.any((p > 0) & (q == 0)):
        return float("inf")
    return float(np.where(p > 0, p * np.log(ratio), 0.0).sum())


def js_gm_discrete(distributions, weights) -> float:
    """Geometric-mean variant on discrete distributions, via pairwise KL."""
    p = as_distributions(distributions)
    w = as_weights(weights)
    total = 0.0
    for i in range(p.shape[0]):
        for j in range(p.shape[0]):
            if i != j and w[i] > 0 and w[j] > 0:
                total += w[i] * w[j] * _kl_discrete(p[i], p[j])
    return total


def mutual_information_discrete(joint) -> float:
    """Mutual information of a joint table, with 0 log 0 = 0."""
    joint = np.asarray(joint, dtype=float)
    if np.any(joint < 0):
        raise ValueError("joint probabilities must be non-negative")
    if abs(joint.sum() - 1.0) > _WEIGHT_ATOL:
        raise ValueError("joint table must sum to 1")
    rows = joint.sum(axis=1, keepdims=True)
    cols = joint.sum(axis=0, keepdims=True)
    product = rows * cols
    ratio = np.divide(
        joint, product, out=np.ones_like(joint), where=(joint > 0) & (product > 0)
    )
    return float(np.where(joint > 0, joint * np.log(ratio), 0.0).sum())


def js_gm(densities, weights) -> float:
    """Geometric-mean divergence of fitted marginals via pairwise Jeffreys.

    Computed exclusively through 0.5 * sum_{i != j} pi_i pi_j J(P_i || P_j);
    the geometric-mean integrand itself is never formed (it is not a
    distribution, and the pairwise form is exact for same-family marginals).
    """
    densities = list(densities)
    w = as_weights(weights)
    if w.shape[0] != len(densities):
        raise ValueError("one weight per density required")
    total = 0.0
    for i in range(len(densities)):
        for j in range(i + 1, len(densities)):
            total += w[i] * w[j] * j_divergence(densities[i], densities[j])
    return total
