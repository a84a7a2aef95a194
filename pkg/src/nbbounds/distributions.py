"""Negative Binomial parameterizations, moments, MGFs, and sampling.

Two NB parameterizations are supported with exact interconversion: the
classical ``(r, p)`` form (``r`` successes, success probability ``p``; ``r``
may be any positive real) and the GLM-standard NB2 form ``(mu, kappa)`` with
variance ``mu + kappa * mu**2`` and ``kappa = 1/r``. ``kappa = 0`` denotes
the Poisson limit, which is representable for variance bookkeeping but not
convertible to ``(r, p)``.

The shared-Gamma mixture model couples components through a latent rate:
``Lambda ~ Gamma(shape, rate)`` and, given ``Lambda``, component ``i`` is
``Poisson(Lambda * theta_i)`` independently. Marginally each component is
NB with real-valued shape, which is why sampling always goes through the
Gamma-Poisson hierarchy rather than a Bernoulli-trial counting scheme.

All Gamma parameters are shape-rate (mean = shape/rate); interfaces say
"rate" explicitly to avoid shape-scale confusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .rng import RngHandle, as_generator

__all__ = [
    "NBParams",
    "NB2Params",
    "GammaMixture",
    "nb_from_mu_kappa",
    "nb_log_mgf",
    "sample_nb",
    "sample_nb2",
    "sample_mixture_counts",
]


@dataclass(frozen=True)
class NBParams:
    """Negative Binomial in the ``(r, p)`` parameterization.

    ``r > 0`` (real-valued allowed), ``0 < p < 1``. Mean is
    ``r(1-p)/p`` and variance ``r(1-p)/p**2``, strictly larger than the
    mean.
    """

    r: float
    p: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError("invalid-parameter", f"r must be a positive real, got {self.r}")
        if not (0.0 < self.p < 1.0):
            raise DomainError("invalid-parameter", f"p must lie in (0, 1), got {self.p}")

    def mean(self) -> float:
        return self.r * (1.0 - self.p) / self.p

    def variance(self) -> float:
        return self.r * (1.0 - self.p) / self.p**2

    def overdispersion_index(self) -> float:
        """Variance over mean, ``1 + (1-p)/p`` (equivalently ``1/p``)."""
        return 1.0 + (1.0 - self.p) / self.p

    def to_nb2(self) -> "NB2Params":
        """Exact conversion to the NB2 ``(mu, kappa)`` form."""
        return NB2Params(mu=self.mean(), kappa=1.0 / self.r)


@dataclass(frozen=True)
class NB2Params:
    """Negative Binomial in the NB2 ``(mu, kappa)`` parameterization.

    ``mu > 0``; ``kappa >= 0`` with ``kappa == 0`` denoting the Poisson
    limit. Variance is ``mu + kappa * mu**2``.
    """

    mu: float
    kappa: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError("invalid-parameter", f"mu must be a positive real, got {self.mu}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise DomainError("invalid-parameter", f"kappa must be nonnegative, got {self.kappa}")

    def mean(self) -> float:
        return self.mu

    def variance(self) -> float:
        return self.mu + self.kappa * self.mu**2


def nb_from_mu_kappa(params: NB2Params) -> NBParams:
    """Invert NB2 to ``(r, p)``: ``r = 1/kappa``, ``p = 1/(1 + kappa*mu)``.

    Mean and variance are preserved exactly. The Poisson limit
    ``kappa == 0`` has no ``(r, p)`` representation and is rejected.
    """
    if params.kappa == 0.0:
        raise DomainError(
            "poisson-limit-not-representable",
            "kappa == 0 (Poisson limit) cannot be converted to (r, p) form",
        )
    return NBParams(r=1.0 / params.kappa, p=1.0 / (1.0 + params.kappa * params.mu))


@dataclass(frozen=True)
class GammaMixture:
    """Shared latent-rate model for positively correlated NB counts.

    ``Lambda ~ Gamma(gamma_shape, rate=gamma_rate)`` and, given ``Lambda``,
    component ``i`` is ``Poisson(Lambda * thetas[i])`` independently. Each
    marginal is ``NB(gamma_shape, gamma_rate/(gamma_rate + theta_i))``.
    All loadings must be strictly positive.
    """

    gamma_shape: float
    gamma_rate: float
    thetas: tuple[float, ...]

    def __init__(self, gamma_shape: float, gamma_rate: float, thetas: Sequence[float]):
        if not (gamma_shape > 0 and math.isfinite(gamma_shape)):
            raise DomainError("invalid-parameter", f"gamma_shape must be positive, got {gamma_shape}")
        if not (gamma_rate > 0 and math.isfinite(gamma_rate)):
            raise DomainError("invalid-parameter", f"gamma_rate must be positive, got {gamma_rate}")
        thetas = tuple(float(t) for t in thetas)
        if not thetas:
            raise DomainError("invalid-parameter", "thetas must be a nonempty sequence")
        if any(not (t > 0 and math.isfinite(t)) for t in thetas):
            raise DomainError("invalid-parameter", "every theta must be a positive real")
        object.__setattr__(self, "gamma_shape", float(gamma_shape))
        object.__setattr__(self, "gamma_rate", float(gamma_rate))
        object.__setattr__(self, "thetas", thetas)

    @property
    def n(self) -> int:
        return len(self.thetas)

    def prefix_sums(self) -> np.ndarray:
        """Cumulative loadings, strictly increasing since thetas > 0."""
        return np.cumsum(self.thetas)

    def total_theta(self) -> float:
        return float(np.sum(self.thetas))

    def max_prefix(self) -> float:
        """Largest prefix sum; equals the total because loadings are positive."""
        return float(self.prefix_sums().max())

    def marginal(self, i: int) -> NBParams:
        theta = self.thetas[i]
        return NBParams(r=self.gamma_shape, p=self.gamma_rate / (self.gamma_rate + theta))

    def marginal_mean(self, i: int) -> float:
        return self.gamma_shape * self.thetas[i] / self.gamma_rate

    def marginal_variance(self, i: int) -> float:
        theta = self.thetas[i]
        return self.gamma_shape * theta * (self.gamma_rate + theta) / self.gamma_rate**2

    def marginal_means(self) -> np.ndarray:
        return self.gamma_shape * np.asarray(self.thetas) / self.gamma_rate

    def correlation(self, i: int, j: int) -> float:
        """Pairwise count correlation induced by the shared rate; in (0, 1)."""
        if i == j:
            return 1.0
        ti, tj = self.thetas[i], self.thetas[j]
        return math.sqrt(ti * tj) / math.sqrt((self.gamma_rate + ti) * (self.gamma_rate + tj))

    def subexp_nu_sq(self) -> float:
        """Sub-exponential variance parameter of the centered latent rate."""
        return self.gamma_shape / self.gamma_rate**2

    def subexp_b(self) -> float:
        """Sub-exponential scale parameter of the centered latent rate."""
        return 1.0 / self.gamma_rate


def nb_log_mgf(params: NBParams, t: float) -> float:
    """Log moment-generating function of NB(r, p) at ``t``.

    Valid for ``t < -log(1-p)``; returns ``r*(log p - log(1 - (1-p)*e^t))``
    computed in the log domain so that ``r`` in the thousands cannot
    overflow and values remain accurate arbitrarily close to the domain
    boundary.
    """
    log_q = math.log1p(-params.p)  # log(1-p), so t_max = -log_q
    if t >= -log_q:
        raise DomainError(
            "mgf-domain-exceeded",
            f"t = {t} is outside the MGF domain t < {-log_q}",
        )
    # 1 - (1-p) e^t = -expm1(t + log(1-p)), stable near the boundary
    return params.r * (math.log(params.p) - math.log(-math.expm1(t + log_q)))


def sample_nb(
    params: NBParams,
    rng: RngHandle | np.random.Generator,
    size: int | None = None,
):
    """Draw from NB(r, p) through the Gamma-Poisson hierarchy.

    ``G ~ Gamma(shape=r, rate=p/(1-p))`` then ``X | G ~ Poisson(G)``, which
    is exact for real-valued ``r``. With ``size=None`` returns a single
    integer; otherwise an integer array. Passing an ``RngHandle`` draws the
    leading elements of that stream.
    """
    gen = as_generator(rng)
    scale = (1.0 - params.p) / params.p  # 1/rate
    g = gen.gamma(params.r, scale, size=size)
    draw = gen.poisson(g, size=size)
    return int(draw) if size is None else draw


def sample_nb2(
    params: NB2Params,
    rng: RngHandle | np.random.Generator,
    size: int | None = None,
):
    """Draw from NB2(mu, kappa); ``kappa == 0`` samples the Poisson limit."""
    gen = as_generator(rng)
    if params.kappa == 0.0:
        draw = gen.poisson(params.mu, size=size)
        return int(draw) if size is None else draw
    return sample_nb(nb_from_mu_kappa(params), gen, size=size)


def sample_mixture_counts(
    model: GammaMixture,
    rng: RngHandle | np.random.Generator,
    size: int | None = None,
):
    """Draw the latent rate and the conditionally independent counts.

    Returns ``(lambda_draw, counts)``. With ``size=None``, ``lambda_draw``
    is a float and ``counts`` an integer array of length ``model.n``; with
    ``size=k`` they have shapes ``(k,)`` and ``(k, n)``. The latent draw is
    returned so downstream analyses can correlate it with realized
    deviations.
    """
    gen = as_generator(rng)
    thetas = np.asarray(model.thetas)
    lam = gen.gamma(model.gamma_shape, 1.0 / model.gamma_rate, size=size)
    if size is None:
        counts = gen.poisson(lam * thetas)
        return float(lam), counts
    counts = gen.poisson(np.asarray(lam)[:, None] * thetas[None, :])
    return lam, counts
