"""Independent numerical oracles used by the test suite.

These deliberately avoid the closed forms used by the package:

* the multinomial marginal is rebuilt as a sequential product of
  posterior-predictive draws (chain rule), and for two outcomes also
  as a ratio of Beta functions;
* the Gaussian marginal is a two-dimensional composite Gauss-Legendre
  quadrature over (mean, log variance), with the mean grid placed
  adaptively per variance node;
* small all-discrete networks get an exact posterior by enumerating
  every joint assignment.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln

from roadcast.bn.model import BayesNet
from roadcast.bn.scores import GaussianPrior
from roadcast.bn.tree import MultinomialLeaf


def chain_rule_log_marginal(counts, ess: float) -> float:
    """P(sequence) via sequential posterior-predictive probabilities.

    Expands the counts into a concrete sequence (order never matters
    under exchangeability) and multiplies P(next | seen so far).
    """
    counts = list(counts)
    k = len(counts)
    alpha = ess / k
    seen = [0] * k
    total = 0
    logp = 0.0
    for value, c in enumerate(counts):
        for _ in range(c):
            logp += math.log((alpha + seen[value]) / (ess + total))
            seen[value] += 1
            total += 1
    return logp


def beta_function_log_marginal(n1: int, n2: int, ess: float) -> float:
    """Two-outcome marginal as a Beta-function ratio."""
    a = ess / 2.0
    return float(betaln(a + n1, a + n2) - betaln(a, a))


def _gl_nodes(lo: float, hi: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def quadrature_log_marginal_gaussian(values, prior: GaussianPrior) -> float:
    """2-D quadrature of likelihood x NIG prior over (mean, log variance)."""
    vals = np.asarray(values, dtype=float)
    n = vals.size
    s_nodes, s_weights = _gl_nodes(-30.0, 30.0, 240, 10)
    var = np.exp(s_nodes)  # integration is over s = log(variance)
    post_mean = n * vals.mean() / (prior.kappa0 + n) if n else prior.mu0
    sd_mu = np.sqrt(var / (prior.kappa0 + n))

    t_nodes, t_weights = _gl_nodes(-12.0, 12.0, 8, 10)
    mu = post_mean + sd_mu[:, None] * t_nodes[None, :]  # [s, j]
    w_mu = sd_mu[:, None] * t_weights[None, :]

    if n:
        sq = ((vals[None, None, :] - mu[:, :, None]) ** 2).sum(axis=2)
        log_lik = -0.5 * n * np.log(2 * math.pi * var)[:, None] - 0.5 * sq / var[:, None]
    else:
        log_lik = np.zeros_like(mu)
    log_prior_mu = (
        0.5 * (np.log(prior.kappa0) - np.log(2 * math.pi * var))[:, None]
        - 0.5 * prior.kappa0 * (mu - prior.mu0) ** 2 / var[:, None]
    )
    log_prior_var = (
        prior.alpha0 * math.log(prior.beta0)
        - math.lgamma(prior.alpha0)
        - (prior.alpha0 + 1.0) * np.log(var)
        - prior.beta0 / var
    )
    integrand = np.exp(log_lik + log_prior_mu) * (np.exp(log_prior_var) * var)[:, None]
    total = float(np.sum(s_weights[:, None] * w_mu * integrand))
    return math.log(total)


def enumerate_posterior(net: BayesNet, evidence: dict, target: str) -> np.ndarray:
    """Exact posterior over a discrete target by joint enumeration.

    Only valid for all-discrete networks.  Evidence maps names to codes.
    """
    names = net.topological_order()
    arities = [net.by_name[n].arity for n in names]
    t_idx = names.index(target)
    probs = np.zeros(net.by_name[target].arity)
    assignment: dict[str, int] = {}

    def recurse(i: int, logp: float):
        if i == len(names):
            probs[assignment[target]] += math.exp(logp)
            return
        name = names[i]
        leaf = net.cpds[name].leaf_for(assignment)
        assert isinstance(leaf, MultinomialLeaf)
        table = leaf.probs()
        values = [evidence[name]] if name in evidence else range(arities[i])
        for v in values:
            assignment[name] = int(v)
            recurse(i + 1, logp + math.log(float(table[int(v)])))
        del assignment[name]

    recurse(0, 0.0)
    assert t_idx >= 0
    return probs / probs.sum()
