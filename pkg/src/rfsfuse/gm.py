"""Gaussian and Gaussian-mixture primitives.

A Gaussian mixture here represents a PHD intensity: a weighted sum of
Gaussian densities whose weights are nonnegative masses (not probabilities),
so the mixture integral is the expected target count.  The module provides
density evaluation, mass, pruning/merging/capping, and the closed-form
integrated squared difference (ISD) between two mixtures

    ISD(p||q) = int (p(x) - q(x))^2 dx

together with its first and second partial derivatives with respect to a
single component weight.  All pair correlations N(mu_a; mu_b, P_a + P_b)
can be precomputed once into a CrossTermTable and reused, which is what
makes iterative weight fitting cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))

# Running count of Gaussian density evaluations (single points and pair
# correlations alike).  Lets tests assert that cached cross terms are
# actually reused instead of recomputed.
_gaussian_evals = 0


def gaussian_eval_count() -> int:
    """Total Gaussian density evaluations since import (or last reset)."""
    return _gaussian_evals


def reset_gaussian_eval_count() -> None:
    global _gaussian_evals
    _gaussian_evals = 0


def _count_evals(n: int) -> None:
    global _gaussian_evals
    _gaussian_evals += int(n)


class DegenerateCovarianceError(ValueError):
    """Covariance is not symmetric positive-definite."""


class DimensionMismatchError(ValueError):
    """Operands live in state spaces of different dimension."""


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    """Symmetry-enforcing pre-step; rejects genuinely asymmetric input."""
    cov = np.asarray(cov, dtype=float)
    scale = max(float(np.max(np.abs(cov))), 1.0)
    if np.max(np.abs(cov - np.swapaxes(cov, -1, -2))) > 1e-12 * scale:
        raise DegenerateCovarianceError("covariance is not symmetric")
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian term: weight >= 0, mean (d,), covariance (d, d)."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"component weight must be >= 0, got {self.weight}")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))
        object.__setattr__(self, "cov", _symmetrize(self.cov))
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise DimensionMismatchError(
                f"cov shape {self.cov.shape} does not match mean dimension {self.mean.size}"
            )

    @property
    def dim(self) -> int:
        return self.mean.size


class GaussianMixture:
    """Ordered weighted Gaussian components stored as stacked arrays.

    weights: (J,), means: (J, d), covs: (J, d, d).  Arrays are frozen
    (read-only) after construction; every operation returns new values,
    so mixtures are safe to share between concurrent pipelines.
    """

    __slots__ = ("weights", "means", "covs", "dim")

    def __init__(self, weights, means, covs, dim: int | None = None):
        weights = np.atleast_1d(np.asarray(weights, dtype=float))
        means = np.asarray(means, dtype=float)
        covs = np.asarray(covs, dtype=float)
        if weights.size == 0:
            if dim is None:
                raise ValueError("empty mixture needs an explicit dimension")
            means = np.zeros((0, dim))
            covs = np.zeros((0, dim, dim))
        else:
            means = means.reshape(weights.size, -1)
            d = means.shape[1]
            covs = covs.reshape(weights.size, d, d)
            if dim is not None and dim != d:
                raise DimensionMismatchError(f"dim {dim} != means dimension {d}")
            covs = _symmetrize(covs)
        if np.any(weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        self.weights = weights
        self.means = means
        self.covs = covs
        self.dim = means.shape[1]
        for a in (self.weights, self.means, self.covs):
            a.setflags(write=False)

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)), dim=dim)

    @classmethod
    def from_components(cls, components, dim: int | None = None) -> "GaussianMixture":
        components = list(components)
        if not components:
            if dim is None:
                raise ValueError("empty mixture needs an explicit dimension")
            return cls.empty(dim)
        d = components[0].dim
        if any(c.dim != d for c in components):
            raise DimensionMismatchError("components have mixed dimensions")
        return cls(
            np.array([c.weight for c in components]),
            np.stack([c.mean for c in components]),
            np.stack([c.cov for c in components]),
        )

    def __len__(self) -> int:
        return self.weights.size

    def __iter__(self):
        return iter(self.components)

    @property
    def components(self) -> tuple[GaussianComponent, ...]:
        return tuple(
            GaussianComponent(float(w), m.copy(), P.copy())
            for w, m, P in zip(self.weights, self.means, self.covs)
        )

    def with_weights(self, weights) -> "GaussianMixture":
        """Same means/covariances with a new weight vector."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != self.weights.shape:
            raise ValueError(f"expected {self.weights.shape} weights, got {weights.shape}")
        return GaussianMixture(weights, self.means, self.covs, dim=self.dim)

    def evaluate(self, x) -> float:
        """Mixture intensity sum_j w_j N(x; mu_j, P_j) at a single point."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatchError(f"point dim {x.size} != mixture dim {self.dim}")
        total = 0.0
        for w, m, P in zip(self.weights, self.means, self.covs):
            total += w * eval_gaussian(x, m, P)
        return total

    def __repr__(self) -> str:
        return f"GaussianMixture(J={len(self)}, dim={self.dim}, mass={gm_mass(self):.4g})"


def eval_gaussian(x, mean, cov) -> float:
    """Gaussian density N(x; mean, cov) via a Cholesky solve.

    The covariance is symmetrized first and never explicitly inverted;
    factorization failure raises DegenerateCovarianceError.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    mean = np.asarray(mean, dtype=float).reshape(-1)
    if x.size != mean.size:
        raise DimensionMismatchError(f"x dim {x.size} != mean dim {mean.size}")
    cov = _symmetrize(cov)
    if cov.shape != (x.size, x.size):
        raise DimensionMismatchError(f"cov shape {cov.shape} incompatible with dim {x.size}")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("covariance is not positive-definite") from exc
    z = np.linalg.solve(L, x - mean)
    log_det = 2.0 * np.sum(np.log(np.diag(L)))
    _count_evals(1)
    return float(np.exp(-0.5 * (z @ z + log_det + x.size * _LOG_2PI)))


def _quad_logdet_1(S, diff):
    v = S[..., 0, 0]
    return diff[..., 0] ** 2 / v, np.log(v)


def _quad_logdet_2(S, diff):
    a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
    det = a * c - b * b
    x, y = diff[..., 0], diff[..., 1]
    quad = (c * x * x - 2.0 * b * x * y + a * y * y) / det
    return quad, np.log(det)


def _quad_logdet_4(S, diff):
    """Unrolled Cholesky factorization and forward solve for 4x4 SPD stacks."""
    l11 = np.sqrt(S[..., 0, 0])
    l21 = S[..., 1, 0] / l11
    l31 = S[..., 2, 0] / l11
    l41 = S[..., 3, 0] / l11
    l22 = np.sqrt(S[..., 1, 1] - l21 * l21)
    l32 = (S[..., 2, 1] - l31 * l21) / l22
    l42 = (S[..., 3, 1] - l41 * l21) / l22
    l33 = np.sqrt(S[..., 2, 2] - l31 * l31 - l32 * l32)
    l43 = (S[..., 3, 2] - l41 * l31 - l42 * l32) / l33
    l44 = np.sqrt(S[..., 3, 3] - l41 * l41 - l42 * l42 - l43 * l43)
    y1 = diff[..., 0] / l11
    y2 = (diff[..., 1] - l21 * y1) / l22
    y3 = (diff[..., 2] - l31 * y1 - l32 * y2) / l33
    y4 = (diff[..., 3] - l41 * y1 - l42 * y2 - l43 * y3) / l44
    quad = y1 * y1 + y2 * y2 + y3 * y3 + y4 * y4
    log_det = 2.0 * (np.log(l11) + np.log(l22) + np.log(l33) + np.log(l44))
    return quad, log_det


def _quad_logdet_general(S, diff):
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("pair covariance sum not positive-definite") from exc
    z = np.linalg.solve(L, diff[..., None])[..., 0]
    quad = np.sum(z * z, axis=-1)
    log_det = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return quad, log_det

_QUAD_LOGDET = {1: _quad_logdet_1, 2: _quad_logdet_2, 4: _quad_logdet_4}


def pairwise_correlation(means_a, covs_a, means_b, covs_b, chunk: int = 1024) -> np.ndarray:
    """All-pairs Gaussian correlations N(mu_a[j]; mu_b[l], P_a[j] + P_b[l]).

    Returns a (Ja, Jb) matrix.  Row-chunked so the (chunk, Jb, d, d) summed
    covariance blocks stay small; dimensions 1, 2 and 4 use unrolled
    closed-form factorizations.
    """
    means_a = np.asarray(means_a, dtype=float)
    means_b = np.asarray(means_b, dtype=float)
    covs_a = np.asarray(covs_a, dtype=float)
    covs_b = np.asarray(covs_b, dtype=float)
    ja, jb = means_a.shape[0], means_b.shape[0]
    d = means_a.shape[1] if means_a.ndim == 2 else 0
    out = np.empty((ja, jb))
    if ja == 0 or jb == 0:
        return out
    _count_evals(ja * jb)
    kernel = _QUAD_LOGDET.get(d, _quad_logdet_general)
    with np.errstate(invalid="ignore"):
        for lo in range(0, ja, chunk):
            hi = min(lo + chunk, ja)
            S = covs_a[lo:hi, None, :, :] + covs_b[None, :, :, :]
            diff = means_a[lo:hi, None, :] - means_b[None, :, :]
            quad, log_det = kernel(S, diff)
            out[lo:hi] = np.exp(-0.5 * (quad + log_det + d * _LOG_2PI))
    if np.any(np.isnan(out)):
        raise DegenerateCovarianceError("pair covariance sum not positive-definite")
    return out


class CrossTermTable:
    """Write-once cache of Gaussian pair correlations between mixtures.

    Holds one block per mixture pair: block(a, b)[j, l] =
    N(mu_a[j]; mu_b[l], P_a[j] + P_b[l]).  Entry (a, b) equals entry
    (b, a) transposed exactly; each block is computed once and mirrored.
    Because weight fitting never touches means or covariances, one table
    serves every iteration of a fusion event.
    """

    def __init__(self, mixtures):
        mixtures = list(mixtures)
        if not mixtures:
            raise ValueError("need at least one mixture")
        dims = {gm.dim for gm in mixtures if len(gm) > 0}
        if len(dims) > 1:
            raise DimensionMismatchError(f"mixtures have mixed dimensions {sorted(dims)}")
        self.sizes = tuple(len(gm) for gm in mixtures)
        self._blocks: dict[tuple[int, int], np.ndarray] = {}
        for a, gm_a in enumerate(mixtures):
            for b in range(a, len(mixtures)):
                gm_b = mixtures[b]
                blk = pairwise_correlation(gm_a.means, gm_a.covs, gm_b.means, gm_b.covs)
                blk.setflags(write=False)
                self._blocks[(a, b)] = blk

    def block(self, a: int, b: int) -> np.ndarray:
        """Correlation block between mixtures a and b; (Ja, Jb)."""
        if a <= b:
            return self._blocks[(a, b)]
        return self._blocks[(b, a)].T

    @property
    def n_mixtures(self) -> int:
        return len(self.sizes)


def gm_mass(gm: GaussianMixture) -> float:
    """Mixture integral over the whole state space: sum of weights."""
    return float(np.sum(gm.weights))


def _check_isd_table(p: GaussianMixture, q: GaussianMixture, table: CrossTermTable):
    if table.n_mixtures != 2 or table.sizes != (len(p), len(q)):
        raise ValueError(
            f"table built for sizes {table.sizes}, mixtures have ({len(p)}, {len(q)})"
        )


def gm_isd(p: GaussianMixture, q: GaussianMixture, table: CrossTermTable | None = None) -> float:
    """Closed-form integrated squared difference between two mixtures.

    ISD = sum_nn' a_n a_n' N(mu_n; mu_n', P_n+P_n')
        + sum_mm' b_m b_m' N(m_m; m_m', S_m+S_m')
        - 2 sum_nm a_n b_m N(mu_n; m_m, P_n+S_m)

    A negative rounding residue is clamped to zero.  When a table built
    from (p, q) is supplied its blocks are used instead of recomputation.
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"mixture dims differ: {p.dim} vs {q.dim}")
    if table is not None:
        _check_isd_table(p, q, table)
        pp, qq, pq = table.block(0, 0), table.block(1, 1), table.block(0, 1)
    else:
        pp = pairwise_correlation(p.means, p.covs, p.means, p.covs)
        qq = pairwise_correlation(q.means, q.covs, q.means, q.covs)
        pq = pairwise_correlation(p.means, p.covs, q.means, q.covs)
    a, b = p.weights, q.weights
    isd = float(a @ pp @ a + b @ qq @ b - 2.0 * (a @ pq @ b))
    return max(isd, 0.0)


def gm_isd_gradient(
    p: GaussianMixture, q: GaussianMixture, n: int, table: CrossTermTable | None = None
) -> float:
    """d ISD(p||q) / d a_n holding every other weight fixed.

    Equals 2 sum_n' a_n' N(mu_n; mu_n', P_n+P_n')  (self term included via
    N(mu_n; mu_n, 2 P_n)) minus 2 sum_m b_m N(mu_n; m_m, P_n+S_m).
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"mixture dims differ: {p.dim} vs {q.dim}")
    if not 0 <= n < len(p):
        raise IndexError(f"component index {n} out of range for mixture of size {len(p)}")
    if table is not None:
        _check_isd_table(p, q, table)
        row_pp = table.block(0, 0)[n]
        row_pq = table.block(0, 1)[n]
    else:
        mean_n = p.means[n : n + 1]
        cov_n = p.covs[n : n + 1]
        row_pp = pairwise_correlation(mean_n, cov_n, p.means, p.covs)[0]
        row_pq = pairwise_correlation(mean_n, cov_n, q.means, q.covs)[0]
    return float(2.0 * (row_pp @ p.weights) - 2.0 * (row_pq @ q.weights))


def gm_isd_curvature(p: GaussianMixture, n: int) -> float:
    """d^2 ISD / d a_n^2 = 2 N(mu_n; mu_n, 2 P_n) = 2 / (|2 P_n|^(1/2) (2 pi)^(d/2)).

    Strictly positive for any valid component, so every single-weight slice
    of the ISD objective is convex.
    """
    if not 0 <= n < len(p):
        raise IndexError(f"component index {n} out of range for mixture of size {len(p)}")
    sign, log_det = np.linalg.slogdet(2.0 * p.covs[n])
    if sign <= 0:
        raise DegenerateCovarianceError("covariance is not positive-definite")
    return float(2.0 * np.exp(-0.5 * (log_det + p.dim * _LOG_2PI)))


def mahalanobis_sq(diff: np.ndarray, cov: np.ndarray) -> float:
    """Squared Mahalanobis distance diff' cov^-1 diff via Cholesky."""
    try:
        L = np.linalg.cholesky(_symmetrize(cov))
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("covariance is not positive-definite") from exc
    z = np.linalg.solve(L, np.asarray(diff, dtype=float).reshape(-1))
    return float(z @ z)


def _self_mahalanobis_matrix(chol, means, max_pairs: int = 4_000_000):
    """dist[i, j] = (mu_i - mu_j)' P_i^-1 (mu_i - mu_j) for all pairs, or None.

    Unrolled forward substitution per row covariance; only worth the memory
    for the dimensions the tracking stack uses.
    """
    J, d = means.shape
    if J * J > max_pairs or d not in (1, 2, 4):
        return None
    diff = means[:, None, :] - means[None, :, :]  # (i, j, d)
    L = chol[:, None, :, :]
    y1 = diff[..., 0] / L[..., 0, 0]
    if d == 1:
        return y1 * y1
    y2 = (diff[..., 1] - L[..., 1, 0] * y1) / L[..., 1, 1]
    if d == 2:
        return y1 * y1 + y2 * y2
    y3 = (diff[..., 2] - L[..., 2, 0] * y1 - L[..., 2, 1] * y2) / L[..., 2, 2]
    y4 = (
        diff[..., 3] - L[..., 3, 0] * y1 - L[..., 3, 1] * y2 - L[..., 3, 2] * y3
    ) / L[..., 3, 3]
    return y1 * y1 + y2 * y2 + y3 * y3 + y4 * y4


def merge_moments(weights, means, covs):
    """Moment-matched single Gaussian for a set of components (mass-preserving)."""
    w = float(np.sum(weights))
    mu = np.einsum("j,jd->d", weights, means) / w
    diff = means - mu
    P = (
        np.einsum("j,jab->ab", weights, covs)
        + np.einsum("j,ja,jb->ab", weights, diff, diff)
    ) / w
    return w, mu, 0.5 * (P + P.T)


def gm_reduce(
    gm: GaussianMixture, prune_threshold: float, merge_threshold: float, cap: int
) -> GaussianMixture:
    """Prune light components, merge near-coincident ones, cap the count.

    Components below prune_threshold are dropped.  Remaining components are
    greedily absorbed into the heaviest unmerged one when their squared
    Mahalanobis distance to it (in their own covariance) is below
    merge_threshold, using moment matching; merging preserves mass.  Finally
    only the cap heaviest components are kept.
    """
    if prune_threshold < 0 or merge_threshold < 0:
        raise ValueError("thresholds must be >= 0")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    keep = gm.weights >= prune_threshold
    weights, means, covs = gm.weights[keep], gm.means[keep], gm.covs[keep]
    if weights.size == 0:
        return GaussianMixture.empty(gm.dim)

    out_w, out_m, out_P = [], [], []
    alive = np.ones(weights.size, dtype=bool)
    try:
        chol = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("component covariance not positive-definite") from exc
    dist_all = _self_mahalanobis_matrix(chol, means)
    while np.any(alive):
        idx = np.flatnonzero(alive)
        pos = np.argmax(weights[idx])
        j = idx[pos]
        # distance of each candidate to the pivot in the candidate's own covariance
        if dist_all is not None:
            close = dist_all[idx, j] < merge_threshold
        else:
            z = np.linalg.solve(chol[idx], (means[idx] - means[j])[..., None])[..., 0]
            close = np.sum(z * z, axis=-1) < merge_threshold
        close[pos] = True
        group = idx[close]
        if group.size == 1:
            w, mu, P = weights[j], means[j], covs[j]
        else:
            w, mu, P = merge_moments(weights[group], means[group], covs[group])
        out_w.append(w)
        out_m.append(mu)
        out_P.append(P)
        alive[group] = False

    out_w = np.asarray(out_w)
    order = np.argsort(out_w)[::-1][:cap]
    order = np.sort(order)  # keep original heaviest-first discovery order stable
    return GaussianMixture(
        out_w[order], np.stack([out_m[i] for i in order]), np.stack([out_P[i] for i in order])
    )
