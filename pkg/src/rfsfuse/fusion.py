"""Centralized arithmetic-average PHD fusion by Gaussian-mixture weight fit.

Each sensor flattens its posterior to the unified mixture of its unlabeled
PHD.  The fused target is the weighted average D_AA = sum_i w_i D_i; each
sensor then refits only its component weights so its own PHD best matches
that average in integrated squared difference:

    min_{weights >= 0}  ISD(D_i || D_AA)
      = min  int ( (1 - w_i) D_i(x) - sum_{s != i} w_s D_s(x) )^2 dx.

A single coordinate has the closed-form minimizer

    w_bfom[j] = Delta/(1 - w_i) * sum_{s != i} sum_l w_s a_s[l] N(mu_ij; mu_sl, P_ij + P_sl)
              - Delta * sum_{j' != j} a_i[j'] N(mu_ij; mu_ij', P_ij + P_ij')

with Delta = |2 P_ij|^(1/2) (2 pi)^(d/2), swept Gauss-Seidel over j with a
nonnegativity floor and a relaxation (learning-rate) step, for a few
iterations with a geometrically fading rate.  Means, covariances, counts
and labels are never modified, so one cross-term table serves the whole
fusion event.  A cardinality-consensus pass finally rescales intensity
weights (PHD) or existence probabilities (MB/LMB) toward the network
average target count.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .filters import LMB, MB, PHD, FilterState
from .gm import CrossTermTable, GaussianMixture
from .rfs import (
    BernoulliComponent,
    LMBPosterior,
    MBPosterior,
    UnifiedGM,
    lmb_to_unified,
    mb_to_unified,
    poisson_phd,
    scatter_weights,
)

_R_CLAMP = 0.999


@dataclass(frozen=True)
class FusionConfig:
    """Fusion weights and weight-fit hyperparameters.

    fusion_weights must be positive and sum to one.  alpha1 is the initial
    learning rate, beta the per-iteration fading rate (beta = 1 keeps the
    rate fixed), floor the nonnegativity clamp for fitted weights,
    conv_threshold the ISD level treated as consensus, t_max the fit
    iteration cap.  cc_literal_sum switches cardinality consensus from the
    weighted mean to the plain (unweighted) sum of local counts.
    """

    fusion_weights: tuple
    alpha1: float = 0.2
    beta: float = 0.6
    floor: float = 0.01
    conv_threshold: float = 1e-4
    t_max: int = 3
    cc_enabled: bool = True
    fit_enabled: bool = True
    cc_literal_sum: bool = False

    def __post_init__(self):
        w = tuple(float(v) for v in self.fusion_weights)
        object.__setattr__(self, "fusion_weights", w)
        if any(v <= 0 for v in w):
            raise ValueError("fusion weights must be positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"fusion weights sum to {sum(w)}, expected 1")
        if not 0.0 < self.alpha1 < 1.0:
            raise ValueError("alpha1 must lie in (0, 1)")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.floor < 0:
            raise ValueError("weight floor must be >= 0")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


def uniform_config(n_sensors: int, **kwargs) -> FusionConfig:
    return FusionConfig(fusion_weights=(1.0 / n_sensors,) * n_sensors, **kwargs)


@dataclass(frozen=True)
class FusionSnapshot:
    """Immutable per-sensor unified PHDs plus expected target counts."""

    unified: tuple[UnifiedGM, ...]
    cardinalities: tuple[float, ...]

    def __post_init__(self):
        dims = {u.gm.dim for u in self.unified if len(u.gm) > 0}
        if len(dims) > 1:
            raise ValueError(f"snapshot mixes state dimensions {sorted(dims)}")

    @property
    def n_sensors(self) -> int:
        return len(self.unified)


@dataclass(frozen=True)
class FitDiagnostics:
    """One row per (sensor, iteration) of a fusion event."""

    sensor: int
    iteration: int
    isd: float
    alpha: float
    elapsed_ns: int


def build_snapshot(states) -> FusionSnapshot:
    unified, cards = [], []
    for state in states:
        if state.kind == PHD:
            unified.append(poisson_phd(state.posterior))
        elif state.kind == MB:
            unified.append(mb_to_unified(state.posterior))
        else:
            unified.append(lmb_to_unified(state.posterior))
        cards.append(expected_count(state))
    return FusionSnapshot(tuple(unified), tuple(cards))


def expected_count(state: FilterState) -> float:
    if state.kind == PHD:
        return float(np.sum(state.posterior.weights))
    return state.posterior.expected_cardinality


def build_cross_terms(snapshot: FusionSnapshot) -> CrossTermTable:
    """All pair correlations for one fusion event; valid for every iteration."""
    return CrossTermTable([u.gm for u in snapshot.unified])


def bfom_weight(
    snapshot: FusionSnapshot,
    i: int,
    j: int,
    current_weights,
    config: FusionConfig,
    table: CrossTermTable,
) -> float:
    """Unconstrained single-coordinate minimizer of the fit objective.

    May be negative; clamping is the caller's job.  current_weights holds
    every sensor's weight vector, with sensor i's reflecting any
    already-updated coordinates of the running sweep.
    """
    n = snapshot.n_sensors
    if n < 2:
        raise ValueError("fusion needs at least two sensors")
    w_i = config.fusion_weights[i]
    if w_i >= 1.0:
        raise ValueError("fusion weight w_i = 1 leaves no other sensors to fit against")
    self_block = table.block(i, i)
    delta = 1.0 / self_block[j, j]
    attraction = 0.0
    for s in range(n):
        if s == i:
            continue
        attraction += config.fusion_weights[s] * float(
            table.block(i, s)[j] @ current_weights[s]
        )
    own = np.asarray(current_weights[i], dtype=float)
    repulsion = float(self_block[j] @ own) - self_block[j, j] * own[j]
    return delta * attraction / (1.0 - w_i) - delta * repulsion


def sweep(
    snapshot: FusionSnapshot,
    i: int,
    config: FusionConfig,
    table: CrossTermTable,
    t: int,
    alpha_t: float,
    current_weights,
) -> np.ndarray:
    """One Gauss-Seidel pass over sensor i's weights.

    Coordinates j are visited in order using already-updated values for
    j' < j; the other sensors' vectors in current_weights stay frozen.
    Each coordinate is clamped at the floor and relaxed:
    w[j] <- alpha_t * max(floor, bfom) + (1 - alpha_t) * w_prev[j].
    """
    if not 0.0 < alpha_t <= 1.0:
        raise ValueError("alpha_t must lie in (0, 1]")
    n = snapshot.n_sensors
    w_i = config.fusion_weights[i]
    self_block = table.block(i, i)
    J = len(snapshot.unified[i].gm)
    work = np.asarray(current_weights[i], dtype=float).copy()
    attraction = np.zeros(J)
    for s in range(n):
        if s == i:
            continue
        attraction += config.fusion_weights[s] * (
            table.block(i, s) @ np.asarray(current_weights[s], dtype=float)
        )
    diag = np.diagonal(self_block)
    for j in range(J):
        repulsion = float(self_block[j] @ work) - diag[j] * work[j]
        bfom = (attraction[j] / (1.0 - w_i) - repulsion) / diag[j]
        clamped = max(config.floor, bfom)
        work[j] = alpha_t * clamped + (1.0 - alpha_t) * work[j]
    return work


def learning_rate_update(alpha_t: float, beta: float) -> float:
    """Fading-rate schedule: the next learning rate is beta * alpha_t."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    return beta * alpha_t


def fit_objective(
    snapshot: FusionSnapshot,
    i: int,
    current_weights,
    config: FusionConfig,
    table: CrossTermTable,
) -> float:
    """ISD(D_i || D_AA) with the average formed from the table blocks.

    Sensor i carries its current fitted weights; since the average
    contains w_i D_i itself, the difference reduces to
    (1 - w_i) D_i - sum_{s != i} w_s D_s.
    """
    w = config.fusion_weights
    p = (1.0 - w[i]) * np.asarray(current_weights[i], dtype=float)
    total = float(p @ table.block(i, i) @ p)
    n = snapshot.n_sensors
    for s in range(n):
        if s == i:
            continue
        qs = w[s] * np.asarray(current_weights[s], dtype=float)
        total -= 2.0 * float(p @ table.block(i, s) @ qs)
        for s2 in range(n):
            if s2 == i:
                continue
            qs2 = w[s2] * np.asarray(current_weights[s2], dtype=float)
            total += float(qs @ table.block(s, s2) @ qs2)
    return max(total, 0.0)


def converged(
    snapshot: FusionSnapshot,
    i: int,
    current_weights,
    config: FusionConfig,
    table: CrossTermTable,
) -> bool:
    """Whether sensor i's PHD is within the ISD consensus threshold of the average."""
    return fit_objective(snapshot, i, current_weights, config, table) <= config.conv_threshold


def cardinality_consensus(cardinalities, fusion_weights, literal_sum: bool = False) -> float:
    """Network target-count consensus: weighted mean (default) or plain sum."""
    cards = np.asarray(cardinalities, dtype=float)
    weights = np.asarray(fusion_weights, dtype=float)
    if cards.shape != weights.shape:
        raise ValueError(f"{cards.size} cardinalities vs {weights.size} fusion weights")
    if literal_sum:
        return float(np.sum(cards))
    return float(weights @ cards)


def feedback_phd(
    state: FilterState, fitted_weights, n_aa: float, n_i: float, config: FusionConfig
) -> FilterState:
    """Install fitted intensity weights; optionally rescale to the consensus count."""
    weights = np.asarray(fitted_weights, dtype=float)
    if config.cc_enabled and n_i > 0.0:
        weights = weights * (n_aa / n_i)
    return replace(state, posterior=state.posterior.with_weights(weights))


def _renormalize_track(bc: BernoulliComponent, raw, r_scale: float | None) -> BernoulliComponent:
    raw = np.asarray(raw, dtype=float)
    total = float(np.sum(raw))
    if total > 0.0:
        weights = raw / total
    else:
        weights = np.full(raw.size, 1.0 / raw.size)  # degenerate: all at the floor
    spatial = bc.spatial.with_weights(weights)
    r = bc.existence if r_scale is None else float(np.clip(bc.existence * r_scale, 0.0, _R_CLAMP))
    return BernoulliComponent(r, spatial)


def feedback_mb_lmb(
    state: FilterState,
    fitted_weights,
    index_map,
    n_aa: float,
    n_i: float,
    config: FusionConfig,
) -> FilterState:
    """Scatter fitted weights into tracks, renormalize each, rescale existence.

    Per-track spatial weights are the scattered values normalized to sum 1;
    with cardinality consensus on, each existence probability is scaled by
    n_aa / n_i and clamped to [0, 0.999].  Means, covariances and labels
    are untouched.
    """
    grouped = scatter_weights(fitted_weights, index_map)
    r_scale = None
    if config.cc_enabled and n_i > 0.0:
        r_scale = n_aa / n_i
    if state.kind == MB:
        tracks = [
            _renormalize_track(bc, grouped.get(key, bc.spatial.weights), r_scale)
            for key, bc in enumerate(state.posterior.tracks)
        ]
        return replace(state, posterior=MBPosterior(tuple(tracks)))
    if state.kind == LMB:
        tracks = [
            (label, _renormalize_track(bc, grouped.get(label, bc.spatial.weights), r_scale))
            for label, bc in state.posterior.tracks
        ]
        return replace(state, posterior=LMBPosterior(tuple(tracks)))
    raise ValueError(f"feedback_mb_lmb got a {state.kind!r} state")


@dataclass(frozen=True)
class FusionResult:
    states: tuple[FilterState, ...]
    diagnostics: tuple[FitDiagnostics, ...] = field(default_factory=tuple)
    iterations: int = 0
    elapsed_ns: int = 0


def fuse_once(states, config: FusionConfig) -> FusionResult:
    """One centralized fusion event over all sensors' current posteriors.

    Gathers unified-PHD snapshots, builds the cross-term table once, runs
    the per-sensor weight fits against the others' frozen pre-fusion
    weights, computes the cardinality consensus, and applies the feedback
    appropriate to each filter kind.  Structure (means, covariances,
    counts, index maps, labels) is never modified.
    """
    states = list(states)
    if len(states) < 2:
        raise ValueError("fusion needs at least two sensors")
    if len(config.fusion_weights) != len(states):
        raise ValueError(
            f"{len(config.fusion_weights)} fusion weights for {len(states)} sensors"
        )
    if not (config.fit_enabled or config.cc_enabled):
        raise ValueError("nothing to do: both the weight fit and CC are disabled")
    t_start = _time.perf_counter_ns()
    snapshot = build_snapshot(states)
    frozen = [u.gm.weights.copy() for u in snapshot.unified]
    fitted = [w.copy() for w in frozen]
    diagnostics: list[FitDiagnostics] = []
    iterations = 0

    if config.fit_enabled:
        table = build_cross_terms(snapshot)
        alpha_t = config.alpha1
        for t in range(1, config.t_max + 1):
            iterations = t
            all_ok = True
            for i in range(len(states)):
                tick = _time.perf_counter_ns()
                # sensor i sweeps against the others' pre-fusion weights
                current = list(frozen)
                current[i] = fitted[i]
                fitted[i] = sweep(snapshot, i, config, table, t, alpha_t, current)
                current[i] = fitted[i]
                isd = fit_objective(snapshot, i, current, config, table)
                diagnostics.append(
                    FitDiagnostics(i, t, isd, alpha_t, _time.perf_counter_ns() - tick)
                )
                if isd > config.conv_threshold:
                    all_ok = False
            if all_ok:
                break
            alpha_t = learning_rate_update(alpha_t, config.beta)

    n_aa = cardinality_consensus(
        snapshot.cardinalities, config.fusion_weights, config.cc_literal_sum
    )
    new_states = []
    for i, state in enumerate(states):
        if state.kind == PHD:
            n_i = float(np.sum(fitted[i]))
            new_states.append(feedback_phd(state, fitted[i], n_aa, n_i, config))
        else:
            n_i = snapshot.cardinalities[i]
            new_states.append(
                feedback_mb_lmb(
                    state, fitted[i], snapshot.unified[i].index_map, n_aa, n_i, config
                )
            )
    return FusionResult(
        states=tuple(new_states),
        diagnostics=tuple(diagnostics),
        iterations=iterations,
        elapsed_ns=_time.perf_counter_ns() - t_start,
    )
