"""Tail bounds for sums of Negative Binomial variables, and their inverses.

Four inequalities are implemented:

* a Chernoff bound on upward deviations of the NB sample mean, optimized
  over the restricted MGF domain;
* the maximal inequality for partial sums of independent heterogeneous NB
  variables (polynomial decay), with its closed-form control limit
  ``sqrt(V_n / alpha)`` in the NB2 parameterization;
* a maximal inequality for the shared-Gamma mixture model, split into a
  conditional-Poisson term and a mixing term (polynomial decay);
* a sub-exponential Bernstein refinement of the mixture bound whose two
  terms decay exponentially.

All probabilities are computed in the log domain and exponentiated last;
reported values are clamped to [0, 1] with the raw (unclamped) value kept
alongside. A small exact-tail oracle based on truncated PMF convolution is
included for validating the bounds on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .distributions import GammaMixture, NBParams, NB2Params, nb_log_mgf
from .errors import DomainError

__all__ = [
    "BoundResult",
    "OptimizerDiagnostics",
    "OracleTail",
    "chernoff_mean_deviation_bound",
    "tweedie_variance",
    "control_limit",
    "kolmogorov_independent_bound",
    "dependent_kolmogorov_bound",
    "bernstein_dependent_bound",
    "invert_bound",
    "exact_max_deviation_tail_oracle",
    "exact_mean_deviation_tail",
]

# Geometric bracket growth for bound inversion stops here.
_INVERT_LAMBDA_CAP = 1e12
# Marginal supports are truncated at this per-variable tail mass.
_ORACLE_TAIL_MASS = 1e-12
# Joint-state budget for the exact-tail oracle.
_ORACLE_MAX_STATES = 10**7

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizerDiagnostics:
    """Where the Chernoff optimizer stopped."""

    t_star: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class BoundResult:
    """An evaluated tail bound.

    ``bound_value`` is clamped to [0, 1]; ``raw_value`` keeps the
    unclamped bound. For the two-term mixture bounds, ``components``
    carries ``(cond_term, mix_term)`` whose (raw) sum equals
    ``raw_value``.
    """

    threshold: float
    bound_value: float
    raw_value: float
    components: tuple[float, float] | None = None
    optimizer: OptimizerDiagnostics | None = None


def _clamped(threshold, raw, components=None, optimizer=None) -> BoundResult:
    return BoundResult(
        threshold=float(threshold),
        bound_value=min(1.0, float(raw)),
        raw_value=float(raw),
        components=components,
        optimizer=optimizer,
    )


def _require_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise DomainError("invalid-parameter", f"{name} must be a positive real, got {value}")


def _golden_section_minimize(
    f: Callable[[float], float], lo: float, hi: float, tol: float
) -> tuple[float, float, int, bool]:
    """Minimize a unimodal function on [lo, hi].

    Returns ``(x_star, f(x_star), iterations, converged)``. Derivative-free
    so the restricted MGF domain is never evaluated outside the bracket.
    """
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    iterations = 0
    max_iterations = 300
    while (b - a) > tol and iterations < max_iterations:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        iterations += 1
    x_star = x1 if f1 <= f2 else x2
    return x_star, min(f1, f2), iterations, (b - a) <= tol


def chernoff_mean_deviation_bound(params: Sequence[NBParams], a: float) -> BoundResult:
    """Optimized exponential-moment bound on ``P(mean - E[mean] >= a)``.

    The log-domain objective ``-t*n*a - t*sum(mean_i) + sum(log_mgf_i(t))``
    is convex on ``(0, t_max)`` with ``t_max = -log(1 - p_min)``; a
    golden-section search over ``[eps*t_max, (1-eps)*t_max]`` finds the
    minimizer without ever leaving the MGF domain. The returned bound is
    ``exp(minimum)`` clamped to [0, 1].
    """
    params = list(params)
    if not params:
        raise DomainError("invalid-parameter", "params must be a nonempty sequence")
    _require_positive("a", a)

    n = len(params)
    total_mean = sum(q.mean() for q in params)
    p_min = min(q.p for q in params)
    t_max = -math.log1p(-p_min)

    def log_objective(t: float) -> float:
        return -t * n * a - t * total_mean + sum(nb_log_mgf(q, t) for q in params)

    eps = 1e-10
    lo, hi = eps * t_max, (1.0 - eps) * t_max
    t_star, log_min, iterations, converged = _golden_section_minimize(
        log_objective, lo, hi, tol=1e-10 * t_max
    )
    # the objective tends to 0 at t -> 0+, so its minimum is never positive
    # beyond rounding noise and exp cannot overflow
    raw = math.exp(log_min)
    return _clamped(
        a, raw, optimizer=OptimizerDiagnostics(t_star, iterations, converged)
    )


def tweedie_variance(params: Sequence[NB2Params]) -> float:
    """Total variance ``sum(mu_i + kappa_i * mu_i**2)`` of independent NB2 counts."""
    params = list(params)
    if not params:
        raise DomainError("invalid-parameter", "params must be a nonempty sequence")
    return float(sum(q.variance() for q in params))


def control_limit(v_n: float, alpha_level: float) -> float:
    """Closed-form threshold ``sqrt(v_n / alpha)``.

    The running deviation process exceeds this limit with probability at
    most ``alpha_level``, for any NB2 parameter values entering ``v_n``.
    """
    _require_positive("v_n", v_n)
    if not (0.0 < alpha_level < 1.0):
        raise DomainError("invalid-parameter", f"alpha_level must lie in (0, 1), got {alpha_level}")
    return math.sqrt(v_n / alpha_level)


def kolmogorov_independent_bound(params: Sequence[NBParams], lam: float) -> BoundResult:
    """Maximal inequality for independent NB partial sums.

    ``P(max_k |S_k| >= lam) <= lam**-2 * sum(r_i (1-p_i) / p_i**2)``.
    """
    params = list(params)
    if not params:
        raise DomainError("invalid-parameter", "params must be a nonempty sequence")
    _require_positive("lambda", lam)
    raw = sum(q.variance() for q in params) / lam**2
    return _clamped(lam, raw)


def dependent_kolmogorov_bound(model: GammaMixture, lam: float) -> BoundResult:
    """Maximal inequality under shared Gamma mixing (polynomial decay).

    The bound splits into a conditional-Poisson term
    ``4*(shape/rate)*Theta_n / lam**2`` and a mixing term
    ``4*M**2*shape / (rate**2 * lam**2)`` where ``Theta_n`` is the total
    loading and ``M`` the largest prefix loading.
    """
    _require_positive("lambda", lam)
    alpha, beta = model.gamma_shape, model.gamma_rate
    theta_n = model.total_theta()
    m = model.max_prefix()
    cond_term = 4.0 * (alpha / beta) * theta_n / lam**2
    mix_term = 4.0 * m**2 * alpha / (beta**2 * lam**2)
    return _clamped(lam, cond_term + mix_term, components=(cond_term, mix_term))


def bernstein_dependent_bound(model: GammaMixture, lam: float) -> BoundResult:
    """Sub-exponential refinement of the mixture bound (exponential decay).

    ``cond_term = 2*exp(-(lam^2/16) / (shape*Theta_n/rate + lam/6))`` and
    ``mix_term = 2*exp(-min(lam^2*rate^2/(32*M^2*shape), lam*rate/(4*M)))``;
    the mixing exponent switches from its quadratic to its linear branch at
    ``lam = 8*M*shape/rate``. Exponents are formed in the log domain.
    """
    _require_positive("lambda", lam)
    alpha, beta = model.gamma_shape, model.gamma_rate
    theta_n = model.total_theta()
    m = model.max_prefix()

    cond_exponent = (lam**2 / 16.0) / (alpha * theta_n / beta + lam / 6.0)
    mix_exponent = min(lam**2 * beta**2 / (32.0 * m**2 * alpha), lam * beta / (4.0 * m))
    # both exponents are >= 0, so each term lies in [0, 2]; exp underflows
    # to 0.0 harmlessly for huge exponents
    cond_term = 2.0 * math.exp(-cond_exponent)
    mix_term = 2.0 * math.exp(-mix_exponent)
    return _clamped(lam, cond_term + mix_term, components=(cond_term, mix_term))


def invert_bound(bound: Callable[[float], float], alpha_level: float) -> float:
    """Smallest threshold at which ``bound`` drops to ``alpha_level``.

    ``bound`` maps a threshold to a tail-probability bound and must be
    strictly decreasing once below 1. The bracket grows geometrically from
    1 (and shrinks below 1 if needed), then bisection refines to relative
    tolerance 1e-9. Raises ``uninvertible`` if no threshold up to 1e12
    brings the bound down to ``alpha_level``.
    """
    if not (0.0 < alpha_level < 1.0):
        raise DomainError("invalid-parameter", f"alpha_level must lie in (0, 1), got {alpha_level}")

    hi = 1.0
    while bound(hi) > alpha_level:
        hi *= 2.0
        if hi > _INVERT_LAMBDA_CAP:
            raise DomainError(
                "uninvertible",
                f"bound stays above {alpha_level} for thresholds up to {_INVERT_LAMBDA_CAP:g}",
            )
    lo = hi / 2.0
    while lo > 0 and bound(lo) <= alpha_level:
        lo /= 2.0
        if lo < 1e-300:
            break
    # invariant: bound(lo) > alpha_level >= bound(hi)
    while (hi - lo) > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if bound(mid) <= alpha_level:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class OracleTail:
    """Exact tail value with its truncation error budget.

    The true probability lies in ``[value, value + truncation_error]``;
    the error is the joint mass discarded by truncating each marginal at
    tail mass 1e-12.
    """

    value: float
    truncation_error: float


def _truncated_pmf(q: NBParams) -> np.ndarray:
    """PMF of NB(r, p) on ``0..K`` where the tail beyond K is <= 1e-12."""
    k_max = int(stats.nbinom.isf(_ORACLE_TAIL_MASS, q.r, q.p)) + 1
    return stats.nbinom.pmf(np.arange(k_max + 1), q.r, q.p)


def _check_oracle_feasible(pmfs: list[np.ndarray]) -> None:
    states = math.prod(len(p) for p in pmfs)
    if states > _ORACLE_MAX_STATES:
        raise DomainError(
            "oracle-infeasible",
            f"truncated joint support has {states} states, above the {_ORACLE_MAX_STATES} budget",
        )


def exact_max_deviation_tail_oracle(params: Sequence[NBParams], lam: float) -> OracleTail:
    """Exact ``P(max_k |S_k| >= lam)`` for small independent NB instances.

    Walks the truncated joint support one variable at a time: surviving
    probability mass is kept indexed by the integer partial sum, and any
    path whose running centered sum ever reaches ``lam`` in absolute value
    moves its mass to the exceedance accumulator. Equivalent to full joint
    enumeration but linear in the support sizes.
    """
    params = list(params)
    if not params:
        raise DomainError("invalid-parameter", "params must be a nonempty sequence")
    _require_positive("lambda", lam)
    pmfs = [_truncated_pmf(q) for q in params]
    _check_oracle_feasible(pmfs)

    surviving = np.array([1.0])  # mass by integer partial sum, not yet exceeded
    exceeded = 0.0
    cumulative_mean = 0.0
    for q, pmf in zip(params, pmfs):
        cumulative_mean += q.mean()
        surviving = np.convolve(surviving, pmf)
        deviations = np.abs(np.arange(len(surviving)) - cumulative_mean)
        hit = deviations >= lam
        exceeded += surviving[hit].sum()
        surviving = np.where(hit, 0.0, surviving)
    truncation_error = 1.0 - (exceeded + surviving.sum())
    return OracleTail(value=float(exceeded), truncation_error=float(max(truncation_error, 0.0)))


def exact_mean_deviation_tail(params: Sequence[NBParams], a: float) -> OracleTail:
    """Exact ``P(mean - E[mean] >= a)`` by truncated PMF convolution."""
    params = list(params)
    if not params:
        raise DomainError("invalid-parameter", "params must be a nonempty sequence")
    _require_positive("a", a)
    pmfs = [_truncated_pmf(q) for q in params]
    _check_oracle_feasible(pmfs)

    total = pmfs[0]
    for pmf in pmfs[1:]:
        total = np.convolve(total, pmf)
    threshold = sum(q.mean() for q in params) + len(params) * a
    value = total[np.arange(len(total)) >= threshold].sum()
    return OracleTail(value=float(value), truncation_error=float(max(1.0 - total.sum(), 0.0)))
