"""Per-feature maximum-entropy marginal densities.

A marginal constrained by raw moments mu_k = E[X^k] has the exponential-family
form

    p(x) = exp(-lambda_0 - sum_k lambda_k * x^k)        x in support,

where lambda_0 makes p integrate to one. Two cases admit closed forms and are
used on the hot path:

* orders {1} on [0, inf): the exponential density, lambda_1 = 1 / mu_1;
* orders {1, 2} on R: the Gaussian, lambda_2 = 1/(2 sigma^2),
  lambda_1 = -m / sigma^2, lambda_0 = m^2/(2 sigma^2) + ln(2 pi sigma^2)/2.

Everything else goes through a damped Newton iteration on the convex dual

    psi(lambda) = ln Z(lambda) + <lambda, mu>,

whose gradient is mu - E_p[phi] and whose Hessian is the covariance of the
moment functions under p. Expectations are evaluated with the fixed
Gauss-Legendre rules from `quadrature`.

Densities are immutable after construction and safe to share across threads;
fitting different (feature, class) cells needs no cross-cell communication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import quadrature
from .errors import ConfigError, EmptyClass, InvalidMoment, SolverDiverged

HALFLINE = "halfline"
REALLINE = "real"
INTERVAL = "interval"

#: iteration cap and moment-residual tolerance for the numeric solver
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100

#: default floors keeping degenerate empirical moments (absent words,
#: constant columns) away from the boundary of the feasible set
DEFAULT_SMOOTHING = 1e-6
DEFAULT_VARIANCE_FLOOR = 1e-4


@dataclass(frozen=True)
class SupportSpec:
    """Integration domain of a single feature."""

    kind: str
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if self.kind not in (HALFLINE, REALLINE, INTERVAL):
            raise ValueError(f"unknown support kind {self.kind!r}")
        if self.kind == INTERVAL:
            if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
                raise ValueError("interval bounds must be finite")
            if not self.lower < self.upper:
                raise ValueError("interval requires lower < upper")

    @classmethod
    def halfline(cls) -> "SupportSpec":
        return cls(HALFLINE, 0.0, math.inf)

    @classmethod
    def real(cls) -> "SupportSpec":
        return cls(REALLINE, -math.inf, math.inf)

    @classmethod
    def interval(cls, lower: float, upper: float) -> "SupportSpec":
        return cls(INTERVAL, float(lower), float(upper))

    def contains(self, x):
        return (x >= self.lower) & (x <= self.upper)


@dataclass(frozen=True)
class FeatureFunctionSpec:
    """Monomial moment constraints phi_k(x) = x^k for k in `orders`."""

    orders: tuple[int, ...]

    def __post_init__(self):
        if len(self.orders) == 0:
            raise ValueError("orders must be non-empty")
        if any(int(k) != k or k < 1 for k in self.orders):
            raise ValueError("orders must be positive integers")
        if any(a >= b for a, b in zip(self.orders, self.orders[1:])):
            raise ValueError("orders must be strictly increasing")
        object.__setattr__(self, "orders", tuple(int(k) for k in self.orders))

    @property
    def l(self) -> int:
        return len(self.orders)

    def evaluate(self, x) -> np.ndarray:
        """Stack of x^k, shape (l,) + shape(x)."""
        x = np.asarray(x, dtype=float)
        return np.stack([x**k for k in self.orders])


@dataclass(frozen=True)
class MomentVector:
    """Empirical expected values of the feature functions, plus sample size."""

    values: tuple[float, ...]
    sample_count: int

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) == 0:
            raise ValueError("moment vector must be non-empty")


@dataclass(frozen=True)
class MaxEntDensity:
    """A fitted maximum-entropy marginal.

    `moments` holds the moments the density actually matches (after any
    smoothing floors), so the closed-form divergence identities that read
    E_p[phi] off this field are exact up to `fit_tol`.
    """

    support: SupportSpec
    spec: FeatureFunctionSpec
    lambdas: tuple[float, ...]
    log_normalizer: float
    moments: MomentVector
    fit_tol: float = 0.0


def log_density(density: MaxEntDensity, x):
    """log p(x); -inf outside the support. Accepts scalars or arrays."""
    x_arr = np.asarray(x, dtype=float)
    value = np.full(x_arr.shape, -density.log_normalizer)
    for lam, k in zip(density.lambdas, density.spec.orders):
        value -= lam * x_arr**k
    value = np.where(density.support.contains(x_arr), value, -np.inf)
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(value)
    return value


def empirical_moments(samples, spec: FeatureFunctionSpec) -> MomentVector:
    """Sample means of the feature functions: mu_k = (1/N) sum_i x_i^k."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptyClass("cannot compute moments from an empty sample set")
    values = tuple(float(np.mean(samples**k)) for k in spec.orders)
    return MomentVector(values, int(samples.size))


def fit_exponential_halfline(
    moments: MomentVector, smoothing: float = DEFAULT_SMOOTHING
) -> MaxEntDensity:
    """Closed-form 1-moment fit on [0, inf): the exponential density."""
    if len(moments.values) != 1:
        raise ValueError("exponential fit expects exactly one moment")
    mean = moments.values[0]
    if mean < 0:
        raise InvalidMoment(f"negative mean {mean} on the half line")
    mean = max(mean, smoothing)
    rate = 1.0 / mean
    return MaxEntDensity(
        support=SupportSpec.halfline(),
        spec=FeatureFunctionSpec((1,)),
        lambdas=(rate,),
        log_normalizer=-math.log(rate),
        moments=MomentVector((mean,), moments.sample_count),
    )


def fit_gaussian_realline(
    moments: MomentVector, variance_floor: float = DEFAULT_VARIANCE_FLOOR
) -> MaxEntDensity:
    """Closed-form 2-moment fit on R: the Gaussian density."""
    if len(moments.values) != 2:
        raise ValueError("gaussian fit expects exactly two moments")
    m, raw_second = moments.values
    variance = raw_second - m * m
    if variance < -1e-8 * max(1.0, abs(raw_second)):
        raise InvalidMoment(
            f"second moment {raw_second} below squared mean {m * m}"
        )
    variance = max(variance, variance_floor)
    lam2 = 1.0 / (2.0 * variance)
    lam1 = -m / variance
    lam0 = m * m / (2.0 * variance) + 0.5 * math.log(2.0 * math.pi * variance)
    return MaxEntDensity(
        support=SupportSpec.real(),
        spec=FeatureFunctionSpec((1, 2)),
        lambdas=(lam1, lam2),
        log_normalizer=lam0,
        moments=MomentVector((m, m * m + variance), moments.sample_count),
    )


def support_rule(
    support: SupportSpec,
    n: int = quadrature.DEFAULT_NODES,
    center: float = 0.0,
    scale: float = 1.0,
):
    """Quadrature nodes/weights for a support, scaled to the density at hand."""
    if support.kind == INTERVAL:
        return quadrature.interval_rule(support.lower, support.upper, n)
    if support.kind == HALFLINE:
        return quadrature.halfline_rule(max(scale, 1e-12), n)
    return quadrature.realline_rule(center, max(scale, 1e-12), n)


def density_rule(density: MaxEntDensity, n: int = quadrature.DEFAULT_NODES):
    """Quadrature rule adapted to a fitted density's own location and scale."""
    center, scale = _moment_hints(density.support, density.moments.values, density.spec.orders)
    return support_rule(density.support, n, center, scale)


def _moment_hints(support: SupportSpec, values, orders) -> tuple[float, float]:
    """Location/scale hints for quadrature maps, derived from target moments."""
    mean = values[orders.index(1)] if 1 in orders else 0.0
    if support.kind == HALFLINE:
        return 0.0, max(abs(mean), 1e-6)
    if support.kind == REALLINE:
        second = values[orders.index(2)] if 2 in orders else mean * mean + 1.0
        sigma = math.sqrt(max(second - mean * mean, 1e-12))
        return mean, 4.0 * sigma
    return 0.0, 1.0


def _check_feasible(support: SupportSpec, orders, values):
    """Reject moment vectors outside the interior of the support's moment set."""
    mean = values[orders.index(1)] if 1 in orders else None
    second = values[orders.index(2)] if 2 in orders else None
    if support.kind == INTERVAL and mean is not None:
        if not support.lower < mean < support.upper:
            raise InvalidMoment(
                f"mean {mean} outside interval ({support.lower}, {support.upper})"
            )
        if second is not None:
            hull_cap = (support.lower + support.upper) * mean - support.lower * support.upper
            if not mean * mean < second < hull_cap:
                raise InvalidMoment(
                    f"second moment {second} outside ({mean * mean}, {hull_cap})"
                )
    elif support.kind == HALFLINE:
        if mean is not None and mean <= 0:
            raise InvalidMoment(f"mean {mean} not strictly positive on the half line")
        if mean is not None and second is not None and second <= mean * mean:
            raise InvalidMoment("degenerate variance on the half line")
    elif support.kind == REALLINE:
        if 2 not in orders:
            raise ConfigError("real-line support needs a second-order constraint")
        if mean is not None and second is not None and second <= mean * mean:
            raise InvalidMoment("degenerate variance on the real line")


def fit_numeric(
    moments: MomentVector,
    spec: FeatureFunctionSpec,
    support: SupportSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    n_nodes: int = quadrature.DEFAULT_NODES,
) -> MaxEntDensity:
    """Damped-Newton moment matching on the dual of the entropy problem.

    Converges when every quadrature moment of the iterate is within `tol` of
    its target. The dual value is non-increasing across accepted steps (step
    halving), so failure to converge within `max_iter` signals moments at or
    beyond the boundary of the feasible set.
    """
    mu = np.asarray(moments.values, dtype=float)
    _check_feasible(support, spec.orders, mu)
    center, scale = _moment_hints(support, mu, spec.orders)
    x, w = support_rule(support, n_nodes, center, scale)
    log_w = np.log(w)
    phi = spec.evaluate(x)  # (l, n)

    lam = np.zeros(spec.l)

    def dual_state(lam_try):
        exponent = log_w - lam_try @ phi
        log_z = float(logsumexp(exponent))
        p = np.exp(exponent - log_z)
        return log_z + float(lam_try @ mu), log_z, p

    psi, log_z, p = dual_state(lam)
    for _ in range(max_iter):
        expectations = phi @ p
        residual = mu - expectations
        if np.max(np.abs(residual)) <= tol:
            return MaxEntDensity(
                support=support,
                spec=spec,
                lambdas=tuple(lam),
                log_normalizer=log_z,
                moments=MomentVector(tuple(expectations), moments.sample_count),
                fit_tol=tol,
            )
        centered = phi - expectations[:, None]
        hessian = (centered * p) @ centered.T
        try:
            step = np.linalg.solve(
                hessian + 1e-14 * np.eye(spec.l), expectations - mu
            )
        except np.linalg.LinAlgError:
            raise SolverDiverged("singular moment covariance") from None
        # backtrack until the convex dual decreases
        t = 1.0
        while t > 1e-15:
            psi_new, log_z_new, p_new = dual_state(lam + t * step)
            if psi_new < psi:
                lam = lam + t * step
                psi, log_z, p = psi_new, log_z_new, p_new
                break
            t *= 0.5
        else:
            raise SolverDiverged("no descent direction on the dual")
    raise SolverDiverged(
        f"no convergence after {max_iter} iterations (residual "
        f"{np.max(np.abs(mu - phi @ p)):.3e})"
    )


def fit_marginal(
    moments: MomentVector,
    spec: FeatureFunctionSpec,
    support: SupportSpec,
    smoothing: float = DEFAULT_SMOOTHING,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MaxEntDensity:
    """Route a moment vector to the closed-form or numeric fitter.

    Applies the smoothing floors before the numeric path so that degenerate
    columns (all-zero word weights, constant genes) stay strictly inside the
    feasible set and every downstream divergence stays finite.
    """
    if support.kind == HALFLINE and spec.orders == (1,):
        return fit_exponential_halfline(moments, smoothing)
    if support.kind == REALLINE:
        if spec.orders == (1, 2):
            return fit_gaussian_realline(moments, variance_floor)
        if 2 not in spec.orders:
            raise ConfigError("real-line support needs a second-order constraint")
    conditioned = _condition_moments(moments, spec, support, smoothing, variance_floor)
    return fit_numeric(conditioned, spec, support, tol=tol, max_iter=max_iter)


def _condition_moments(
    moments: MomentVector,
    spec: FeatureFunctionSpec,
    support: SupportSpec,
    smoothing: float,
    variance_floor: float,
) -> MomentVector:
    values = list(moments.values)
    orders = spec.orders
    if 1 not in orders:
        return moments
    i1 = orders.index(1)
    if support.kind == INTERVAL:
        width = support.upper - support.lower
        # the 256-node rule cannot place mass closer to an endpoint than its
        # first node (~2e-5 of the width), so the clamp floor is coarser here
        margin = max(smoothing, 1e-4) * width
        values[i1] = min(max(values[i1], support.lower + margin), support.upper - margin)
        if 2 in orders:
            i2 = orders.index(2)
            mean = values[i1]
            hull_cap = (support.lower + support.upper) * mean - support.lower * support.upper
            max_var = hull_cap - mean * mean
            variance = values[i2] - mean * mean
            variance = min(max(variance, min(variance_floor, 0.5 * max_var)), (1.0 - smoothing) * max_var)
            values[i2] = mean * mean + variance
    elif support.kind == HALFLINE:
        values[i1] = max(values[i1], smoothing)
        if 2 in orders:
            i2 = orders.index(2)
            variance = values[i2] - values[i1] ** 2
            values[i2] = values[i1] ** 2 + max(variance, variance_floor)
    return MomentVector(tuple(values), moments.sample_count)
