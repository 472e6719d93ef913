"""Shared fixture builders: random mixtures and quadrature ISD oracles."""

from math import exp

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from rfsfuse.gm import GaussianMixture


def random_spd(rng, d, scale=1.0):
    M = rng.normal(size=(d, d))
    return scale * (M @ M.T + d * np.eye(d))


def random_mixture(rng, n_components, d, w_lo=0.1, w_hi=1.5, mean_spread=3.0, cov_scale=1.0):
    weights = rng.uniform(w_lo, w_hi, n_components)
    means = rng.normal(0.0, mean_spread, (n_components, d))
    covs = np.array([random_spd(rng, d, cov_scale) for _ in range(n_components)])
    return GaussianMixture(weights, means, covs)


def _scalar_mixture_eval(gm):
    """Plain-Python mixture density evaluator (fast inside quadrature loops)."""
    terms = []
    for w, mu, P in zip(gm.weights, gm.means, gm.covs):
        inv = np.linalg.inv(P)
        norm = w / np.sqrt(((2 * np.pi) ** gm.dim) * np.linalg.det(P))
        terms.append((float(norm), [float(v) for v in mu], [[float(v) for v in r] for r in inv]))
    if gm.dim == 1:
        def f1(x):
            total = 0.0
            for norm, mu, inv in terms:
                dx = x - mu[0]
                total += norm * exp(-0.5 * inv[0][0] * dx * dx)
            return total

        return f1

    def f2(x, y):
        total = 0.0
        for norm, mu, inv in terms:
            dx = x - mu[0]
            dy = y - mu[1]
            total += norm * exp(
                -0.5 * (inv[0][0] * dx * dx + 2.0 * inv[0][1] * dx * dy + inv[1][1] * dy * dy)
            )
        return total

    return f2


def isd_quadrature(p, q, epsabs=1e-13, epsrel=1e-11):
    """Adaptive quadrature of the integrated squared difference.

    Independent of the closed form: integrates (p(x) - q(x))^2 over a box
    padded well past every component.
    """
    mixtures = [gm for gm in (p, q) if len(gm) > 0]
    dim = mixtures[0].dim
    los, his = [], []
    for axis in range(dim):
        lo, hi = np.inf, -np.inf
        for gm in mixtures:
            sd = np.sqrt(gm.covs[:, axis, axis])
            lo = min(lo, float(np.min(gm.means[:, axis] - 9.0 * sd)))
            hi = max(hi, float(np.max(gm.means[:, axis] + 9.0 * sd)))
        los.append(lo)
        his.append(hi)
    fp = _scalar_mixture_eval(p) if len(p) else (lambda *a: 0.0)
    fq = _scalar_mixture_eval(q) if len(q) else (lambda *a: 0.0)
    if dim == 1:
        f = lambda x: (fp(x) - fq(x)) ** 2
        val, _ = quad(f, los[0], his[0], epsabs=epsabs, epsrel=epsrel, limit=400)
        return val
    if dim == 2:
        f = lambda y, x: (fp(x, y) - fq(x, y)) ** 2
        val, _ = dblquad(f, los[0], his[0], los[1], his[1], epsabs=epsabs, epsrel=epsrel)
        return val
    raise ValueError("quadrature oracle supports 1-D and 2-D only")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
