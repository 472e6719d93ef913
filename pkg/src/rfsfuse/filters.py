"""Per-sensor GM-PHD, GM-MB (CBMeMBer) and GM-LMB recursions.

These are the standard Gaussian-mixture implementations: the PHD recursion
of Vo & Ma (2006), the cardinality-balanced MeMBer update of Vo, Vo &
Cantoni (2009), and the LMB filter of Reuter et al. (2014) whose update
runs a delta-GLMB-style ranked-assignment enumeration per measurement
cluster and marginalizes back to LMB form.  Each sensor owns one
FilterState; states are replaced, never mutated, so distinct sensors can
run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assignment import FORBIDDEN, murty
from .gm import GaussianMixture, gm_reduce
from .models import (
    BirthModel,
    MotionModel,
    SensorModel,
    clutter_intensity,
    cv_predict_batch,
    measurement_kernel,
)
from .rfs import BernoulliComponent, LMBPosterior, MBPosterior, TrackLabel

PHD, MB, LMB = "phd", "mb", "lmb"

GC_PRUNE = 1e-5
GC_MERGE = 4.0
TRACK_PRUNE = 1e-3
EXTRACT_THRESHOLD = 0.5
GATE_SQ_MAHALANOBIS = 25.0
RANKED_HYPOTHESES = 100
_R_MAX = 1.0 - 1e-9
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class Caps:
    """Component/track budget of one local filter."""

    max_gcs: int = 200
    max_tracks: int = 50
    max_gcs_per_track: int = 20


@dataclass(frozen=True)
class FilterState:
    """One sensor's posterior plus bookkeeping.

    time is the index of the last processed step (0 before the first
    prediction); next_birth_index disambiguates labels born at one step.
    """

    kind: str
    posterior: object
    caps: Caps = Caps()
    time: int = 0
    next_birth_index: int = 1

    def __post_init__(self):
        if self.kind not in (PHD, MB, LMB):
            raise ValueError(f"unknown filter kind {self.kind!r}")


def make_filter_state(kind: str, dim: int = 4, caps: Caps = Caps()) -> FilterState:
    if kind == PHD:
        return FilterState(PHD, GaussianMixture.empty(dim), caps)
    if kind == MB:
        return FilterState(MB, MBPosterior(()), caps)
    return FilterState(LMB, LMBPosterior(()), caps)


def expected_cardinality(state: FilterState) -> float:
    if state.kind == PHD:
        return float(np.sum(state.posterior.weights))
    return state.posterior.expected_cardinality


# ---------------------------------------------------------------- PHD filter


def phd_predict(state: FilterState, motion: MotionModel, birth: BirthModel) -> FilterState:
    """Survival-scaled moment prediction plus Poisson birth intensity.

    An MB birth model is moment-matched: each site contributes intensity
    mass equal to its existence probability.
    """
    gm = state.posterior
    weights = motion.survival * gm.weights
    means, covs = cv_predict_batch(gm.means, gm.covs, motion)
    parts_w = [weights] + [[w] for w, _, _ in birth.components]
    parts_m = [means] + [[mu] for _, mu, _ in birth.components]
    parts_P = [covs] + [[P] for _, _, P in birth.components]
    new_gm = GaussianMixture(
        np.concatenate([np.asarray(p, dtype=float).reshape(-1) for p in parts_w]),
        np.concatenate([np.asarray(p, dtype=float).reshape(-1, gm.dim) for p in parts_m]),
        np.concatenate([np.asarray(p, dtype=float).reshape(-1, gm.dim, gm.dim) for p in parts_P]),
        dim=gm.dim,
    )
    return replace(state, posterior=new_gm, time=state.time + 1)


def phd_update(state: FilterState, measurements, sensor: SensorModel) -> FilterState:
    """Standard GM-PHD update: misdetection copies plus per-measurement terms."""
    gm = state.posterior
    pd = sensor.detection
    measurements = [np.asarray(z, dtype=float) for z in measurements]
    if len(gm) == 0:
        return state
    parts_w = [(1.0 - pd) * gm.weights]
    parts_m = [gm.means]
    parts_P = [gm.covs]
    if measurements:
        kern = measurement_kernel(gm.means, gm.covs, sensor)
        q, post_means = kern.apply_all(np.stack(measurements))
        for zi, z in enumerate(measurements):
            num = pd * gm.weights * q[:, zi]
            denom = clutter_intensity(z, sensor) + float(np.sum(num))
            if denom <= 0.0:
                continue
            parts_w.append(num / denom)
            parts_m.append(post_means[:, zi, :])
            parts_P.append(kern.post_covs)
    merged = GaussianMixture(
        np.concatenate(parts_w), np.concatenate(parts_m), np.concatenate(parts_P), dim=gm.dim
    )
    reduced = gm_reduce(merged, GC_PRUNE, GC_MERGE, state.caps.max_gcs)
    return replace(state, posterior=reduced)


def phd_extract(state: FilterState) -> list[np.ndarray]:
    """Means of components heavier than the extraction threshold, one each."""
    gm = state.posterior
    return [gm.means[j].copy() for j in range(len(gm)) if gm.weights[j] > EXTRACT_THRESHOLD]


# ----------------------------------------------------------- MB (CBMeMBer)


def _predict_track(bc: BernoulliComponent, motion: MotionModel) -> BernoulliComponent:
    means, covs = cv_predict_batch(bc.spatial.means, bc.spatial.covs, motion)
    spatial = GaussianMixture(bc.spatial.weights, means, covs, dim=bc.spatial.dim)
    return BernoulliComponent(min(bc.existence * motion.survival, 1.0), spatial)


def _birth_tracks(birth: BirthModel) -> list[BernoulliComponent]:
    out = []
    for w, mu, P in birth.components:
        spatial = GaussianMixture([1.0], [mu], [P])
        out.append(BernoulliComponent(min(w, 1.0), spatial))
    return out


def mb_predict(state: FilterState, motion: MotionModel, birth: BirthModel) -> FilterState:
    tracks = [_predict_track(t, motion) for t in state.posterior.tracks]
    tracks.extend(_birth_tracks(birth))
    return replace(state, posterior=MBPosterior(tuple(tracks)), time=state.time + 1)


def _reduce_spatial(weights, means, covs, cap: int) -> GaussianMixture | None:
    """Normalize, reduce, renormalize one track's spatial mixture."""
    total = float(np.sum(weights))
    if total <= 0.0 or not np.isfinite(total):
        return None
    gm = GaussianMixture(np.asarray(weights) / total, means, covs)
    reduced = gm_reduce(gm, GC_PRUNE, GC_MERGE, cap)
    mass = float(np.sum(reduced.weights))
    if mass <= 0.0:
        return None
    return reduced.with_weights(reduced.weights / mass)


def _cap_tracks(tracks: list, caps: Caps, key=None) -> list:
    key = key or (lambda t: t.existence)
    if len(tracks) <= caps.max_tracks:
        return tracks
    order = sorted(range(len(tracks)), key=lambda i: key(tracks[i]), reverse=True)
    keep = sorted(order[: caps.max_tracks])
    return [tracks[i] for i in keep]


def mb_update(state: FilterState, measurements, sensor: SensorModel) -> FilterState:
    """CBMeMBer update: legacy (misdetection) tracks plus one track per measurement."""
    tracks = list(state.posterior.tracks)
    pd = sensor.detection
    measurements = [np.asarray(z, dtype=float) for z in measurements]
    new_tracks: list[BernoulliComponent] = []

    for t in tracks:
        r = min(t.existence, _R_MAX)
        r_l = r * (1.0 - pd) / (1.0 - r * pd)
        new_tracks.append(BernoulliComponent(r_l, t.spatial))

    if measurements and tracks:
        kernels = [measurement_kernel(t.spatial.means, t.spatial.covs, sensor) for t in tracks]
        for z in measurements:
            num = den = 0.0
            parts_w, parts_m, parts_P = [], [], []
            for t, kern in zip(tracks, kernels):
                r = min(t.existence, _R_MAX)
                q, post_means = kern.apply(z)
                rho = pd * float(t.spatial.weights @ q)
                num += r * (1.0 - r) * rho / (1.0 - r * pd) ** 2
                den += r * rho / (1.0 - r * pd)
                parts_w.append((r / (1.0 - r)) * pd * t.spatial.weights * q)
                parts_m.append(post_means)
                parts_P.append(kern.post_covs)
            den += clutter_intensity(z, sensor)
            if den <= _TINY:
                continue
            r_u = float(np.clip(num / den, 0.0, _R_MAX))
            spatial = _reduce_spatial(
                np.concatenate(parts_w),
                np.concatenate(parts_m),
                np.concatenate(parts_P),
                state.caps.max_gcs_per_track,
            )
            if spatial is None or r_u < TRACK_PRUNE:
                continue
            new_tracks.append(BernoulliComponent(r_u, spatial))

    new_tracks = [t for t in new_tracks if t.existence >= TRACK_PRUNE]
    new_tracks = _cap_tracks(new_tracks, state.caps)
    return replace(state, posterior=MBPosterior(tuple(new_tracks)))


def cardinality_pmf(existences) -> np.ndarray:
    """Poisson-binomial probability mass over the target count."""
    pmf = np.array([1.0])
    for r in existences:
        pmf = np.convolve(pmf, [1.0 - r, r])
    return pmf


def mb_extract(state: FilterState) -> list[np.ndarray]:
    """Mean-states of the N highest-existence tracks, N the cardinality mode."""
    tracks = state.posterior.tracks
    if not tracks:
        return []
    n_hat = int(np.argmax(cardinality_pmf([t.existence for t in tracks])))
    order = sorted(range(len(tracks)), key=lambda i: tracks[i].existence, reverse=True)
    return [tracks[i].mean_state for i in order[:n_hat]]


# ------------------------------------------------------------------- LMB


def lmb_predict(state: FilterState, motion: MotionModel, birth: BirthModel) -> FilterState:
    """MB prediction arithmetic; new tracks get labels (birth time, index)."""
    time = state.time + 1
    tracks = [(label, _predict_track(bc, motion)) for label, bc in state.posterior.tracks]
    kappa = state.next_birth_index if any(l.birth_time == time for l, _ in tracks) else 1
    for bc in _birth_tracks(birth):
        tracks.append((TrackLabel(time, kappa), bc))
        kappa += 1
    return replace(
        state, posterior=LMBPosterior(tuple(tracks)), time=time, next_birth_index=kappa
    )


def _cluster_tracks(n_tracks: int, gated: list[set[int]]):
    """Connected components of tracks linked by shared gated measurements."""
    parent = list(range(n_tracks))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    meas_owner: dict[int, int] = {}
    for t, zs in enumerate(gated):
        for z in zs:
            if z in meas_owner:
                ra, rb = find(meas_owner[z]), find(t)
                if ra != rb:
                    parent[rb] = ra
            else:
                meas_owner[z] = t
    clusters: dict[int, list[int]] = {}
    for t in range(n_tracks):
        clusters.setdefault(find(t), []).append(t)
    out = []
    for members in clusters.values():
        zs = sorted(set().union(*[gated[t] for t in members]) if members else set())
        out.append((sorted(members), zs))
    out.sort()
    return out


def _marginalize_cluster(tracks, kernels, zs, measurements, sensor, caps) -> list:
    """Ranked-assignment update of one cluster, marginalized back to Bernoulli form.

    Rows are tracks; columns are the cluster's measurements, then one
    misdetection and one non-existence column per track.  Hypothesis weight
    is the exponentiated negative assignment cost; per-track existence is
    the total weight of hypotheses keeping the track, and the spatial
    density is the hypothesis-weighted mixture of the per-association
    conditionals.
    """
    pd = sensor.detection
    n, m = len(tracks), len(zs)
    likelihoods = []  # per track: dict z column -> (rho, raw weights, means, covs)
    cost = np.full((n, m + 2 * n), FORBIDDEN)
    for row, (t, kern) in enumerate(zip(tracks, kernels)):
        r = min(t.existence, _R_MAX)
        per_z = {}
        for col, zi in enumerate(zs):
            z = measurements[zi]
            q, post_means = kern.apply(z)
            rho = float(t.spatial.weights @ q)
            kap = max(clutter_intensity(z, sensor), _TINY)
            lik = r * pd * rho / kap
            if lik > 0.0:
                cost[row, col] = -np.log(lik)
            per_z[col] = (rho, t.spatial.weights * q, post_means, kern.post_covs)
        likelihoods.append(per_z)
        cost[row, m + row] = -np.log(max(r * (1.0 - pd), _TINY))
        cost[row, m + n + row] = -np.log(max(1.0 - r, _TINY))

    hypotheses = murty(cost, RANKED_HYPOTHESES)
    costs = np.array([c for c, _ in hypotheses])
    w_hyp = np.exp(-(costs - costs.min()))
    w_hyp /= w_hyp.sum()

    out = []
    for row, t in enumerate(tracks):
        assoc_weight: dict[int, float] = {}
        for (c, assign), w in zip(hypotheses, w_hyp):
            col = assign[row]
            if col >= m + n:  # non-existence
                continue
            key = col if col < m else -1  # -1 = misdetection
            assoc_weight[key] = assoc_weight.get(key, 0.0) + float(w)
        r_post = sum(assoc_weight.values())
        if r_post < TRACK_PRUNE:
            out.append(None)
            continue
        if set(assoc_weight) == {-1}:
            # misdetection only: the spatial density is exactly the prediction
            out.append(BernoulliComponent(min(r_post, 1.0), t.spatial))
            continue
        parts_w, parts_m, parts_P = [], [], []
        for key, w in sorted(assoc_weight.items()):
            if key == -1:
                parts_w.append(w * t.spatial.weights)
                parts_m.append(t.spatial.means)
                parts_P.append(t.spatial.covs)
            else:
                rho, wq, post_means, post_covs = likelihoods[row][key]
                if rho <= 0.0:
                    continue
                parts_w.append(w * wq / rho)
                parts_m.append(post_means)
                parts_P.append(post_covs)
        spatial = _reduce_spatial(
            np.concatenate(parts_w),
            np.concatenate(parts_m),
            np.concatenate(parts_P),
            caps.max_gcs_per_track,
        )
        if spatial is None:
            out.append(None)
        else:
            out.append(BernoulliComponent(min(r_post, 1.0), spatial))
    return out


def lmb_update(state: FilterState, measurements, sensor: SensorModel) -> FilterState:
    """Cluster-wise delta-GLMB-style update marginalized back to LMB form."""
    labeled = list(state.posterior.tracks)
    measurements = [np.asarray(z, dtype=float) for z in measurements]
    if not labeled:
        return state
    tracks = [bc for _, bc in labeled]
    kernels = [measurement_kernel(t.spatial.means, t.spatial.covs, sensor) for t in tracks]
    gated: list[set[int]] = []
    for kern in kernels:
        zs = set()
        for zi, z in enumerate(measurements):
            if float(np.min(kern.gate_sq_mahalanobis(z))) < GATE_SQ_MAHALANOBIS:
                zs.add(zi)
        gated.append(zs)

    new_tracks = []
    for members, zs in _cluster_tracks(len(tracks), gated):
        cluster = [tracks[i] for i in members]
        kerns = [kernels[i] for i in members]
        updated = _marginalize_cluster(cluster, kerns, zs, measurements, sensor, state.caps)
        for i, bc in zip(members, updated):
            if bc is not None:
                new_tracks.append((labeled[i][0], bc))

    new_tracks.sort(key=lambda t: t[0])
    new_tracks = _cap_tracks(new_tracks, state.caps, key=lambda t: t[1].existence)
    return replace(state, posterior=LMBPosterior(tuple(new_tracks)))


def lmb_extract(state: FilterState) -> list[tuple[TrackLabel, np.ndarray]]:
    """Labeled mean-states of tracks with existence strictly above threshold."""
    return [
        (label, bc.mean_state)
        for label, bc in state.posterior.tracks
        if bc.existence > EXTRACT_THRESHOLD
    ]


# ------------------------------------------------------------- dispatch


def predict(state: FilterState, motion: MotionModel, birth: BirthModel) -> FilterState:
    return {PHD: phd_predict, MB: mb_predict, LMB: lmb_predict}[state.kind](state, motion, birth)


def update(state: FilterState, measurements, sensor: SensorModel) -> FilterState:
    return {PHD: phd_update, MB: mb_update, LMB: lmb_update}[state.kind](state, measurements, sensor)


def extract(state: FilterState) -> list[np.ndarray]:
    if state.kind == PHD:
        return phd_extract(state)
    if state.kind == MB:
        return mb_extract(state)
    return [x for _, x in lmb_extract(state)]
