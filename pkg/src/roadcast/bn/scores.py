"""Leaf scores: exact log marginal likelihoods under conjugate priors.

Two leaf families:

* multinomial with a symmetric Dirichlet prior (total pseudo-count
  ``ess`` spread evenly over the arity), for discrete targets;
* binary-Gaussian for continuous targets: a Beta(1,1) binomial over
  whether the value is present at all, plus a Normal-Inverse-Gamma
  marginal over the present values.  The two terms add in log space.

Continuous values are standardized by their training mean/std before
scoring so the fixed prior is on a comparable scale for every target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

DIRICHLET_ESS = 1.0
PRESENCE_ESS = 2.0  # Beta(1,1): one pseudo-observation per outcome

_LOG_2PI = math.log(2.0 * math.pi)


def score_multinomial_leaf(counts, ess: float = DIRICHLET_ESS) -> float:
    """Log marginal likelihood of counts under a symmetric Dirichlet."""
    if ess <= 0:
        raise ValueError("ess must be positive")
    counts = np.asarray(counts, dtype=float)
    if counts.size < 2:
        raise ValueError("need at least two outcome counts")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    n = counts.sum()
    alpha = ess / counts.size
    return float(
        gammaln(ess) - gammaln(ess + n) + np.sum(gammaln(alpha + counts) - gammaln(alpha))
    )


def multinomial_leaf_probs(counts, ess: float = DIRICHLET_ESS) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    alpha = ess / counts.size
    total = counts.sum() + ess
    return (counts + alpha) / total


@dataclass(frozen=True)
class GaussianPrior:
    mu0: float = 0.0
    kappa0: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self):
        if self.kappa0 <= 0 or self.alpha0 <= 0 or self.beta0 <= 0:
            raise ValueError("kappa0, alpha0, beta0 must be positive")

    def to_dict(self) -> dict:
        return {"mu0": self.mu0, "kappa0": self.kappa0, "alpha0": self.alpha0, "beta0": self.beta0}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianPrior":
        return cls(**d)


@dataclass(frozen=True)
class GaussianPosterior:
    mu: float
    kappa: float
    alpha: float
    beta: float
    n: int

    def predictive_mean(self) -> float:
        return self.mu

    def predictive_std(self) -> float:
        """Std of the posterior-predictive Student-t (inf if undefined)."""
        df = 2.0 * self.alpha
        scale_sq = self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa)
        if df <= 2.0:
            return math.inf
        return math.sqrt(scale_sq * df / (df - 2.0))

    def to_dict(self) -> dict:
        return {"mu": self.mu, "kappa": self.kappa, "alpha": self.alpha, "beta": self.beta, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianPosterior":
        return cls(**d)


def gaussian_posterior(values: np.ndarray, prior: GaussianPrior) -> GaussianPosterior:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return GaussianPosterior(prior.mu0, prior.kappa0, prior.alpha0, prior.beta0, 0)
    mean = float(values.mean())
    ss = float(np.sum((values - mean) ** 2))
    kappa_n = prior.kappa0 + n
    mu_n = (prior.kappa0 * prior.mu0 + n * mean) / kappa_n
    alpha_n = prior.alpha0 + n / 2.0
    beta_n = prior.beta0 + 0.5 * ss + prior.kappa0 * n * (mean - prior.mu0) ** 2 / (2.0 * kappa_n)
    return GaussianPosterior(mu_n, kappa_n, alpha_n, beta_n, n)


def log_marginal_gaussian(values: np.ndarray, prior: GaussianPrior) -> float:
    """Exact log marginal likelihood of values under the NIG prior."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return 0.0
    post = gaussian_posterior(values, prior)
    return float(
        -0.5 * n * _LOG_2PI
        + 0.5 * (math.log(prior.kappa0) - math.log(post.kappa))
        + prior.alpha0 * math.log(prior.beta0)
        - post.alpha * math.log(post.beta)
        + gammaln(post.alpha)
        - gammaln(prior.alpha0)
    )


def score_binary_gaussian_leaf(
    n_present: int,
    n_absent: int,
    present_values: np.ndarray,
    prior: GaussianPrior,
    presence_ess: float = PRESENCE_ESS,
) -> float:
    """Presence binomial score plus Gaussian marginal over present values."""
    if n_present != np.asarray(present_values).size:
        raise ValueError("n_present must match the number of present values")
    presence = score_multinomial_leaf([n_absent, n_present], ess=presence_ess)
    return presence + log_marginal_gaussian(present_values, prior)
