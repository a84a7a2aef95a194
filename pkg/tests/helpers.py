"""Independent oracles shared by the unit and acceptance suites.

Everything here deliberately avoids the package's own computational paths:
PMFs come from scipy, mixture marginals from numerical quadrature, and
Monte Carlo cross-checks from numpy's native samplers.
"""

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln


def quad_mixture_pmf(k: int, alpha: float, beta: float, theta: float) -> float:
    """Poisson-Gamma mixture PMF at k by adaptive quadrature.

    Integrates Poisson(k; lam*theta) against the Gamma(alpha, rate=beta)
    density; the integrand is evaluated through its logarithm for
    stability at large k.
    """

    def integrand(lam):
        if lam <= 0.0:
            return 0.0
        log_pois = k * np.log(lam * theta) - lam * theta - gammaln(k + 1)
        return np.exp(log_pois + stats.gamma.logpdf(lam, alpha, scale=1.0 / beta))

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=300)
    return value


def mc_max_deviation_tail(params, lam: float, reps: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of P(max_k |S_k| >= lam) for independent NB.

    Uses numpy's own negative_binomial sampler (not the package's
    Gamma-Poisson path). Returns (estimate, standard error).
    """
    gen = np.random.default_rng(seed)
    counts = np.column_stack(
        [gen.negative_binomial(q.r, q.p, size=reps) for q in params]
    ).astype(float)
    means = np.array([q.mean() for q in params])
    devs = np.abs(np.cumsum(counts - means, axis=1)).max(axis=1)
    emp = float(np.mean(devs >= lam))
    se = float(np.sqrt(max(emp * (1.0 - emp), 1.0 / reps) / reps))
    return emp, se


def mc_mixture_max_deviations(alpha, beta, thetas, reps: int, seed: int) -> np.ndarray:
    """Vectorized max-prefix-deviation draws from the shared-Gamma model."""
    gen = np.random.Generator(np.random.Philox(key=np.array([99, seed], dtype=np.uint64)))
    thetas = np.asarray(thetas, dtype=float)
    lam_draws = gen.gamma(alpha, 1.0 / beta, size=reps)
    counts = gen.poisson(lam_draws[:, None] * thetas[None, :])
    means = alpha * thetas / beta
    return np.abs(np.cumsum(counts - means, axis=1)).max(axis=1)
