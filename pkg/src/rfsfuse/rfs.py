"""Multi-target posterior representations and their unlabeled-PHD flattening.

Three posterior families are supported: a Poisson intensity (the PHD filter
state), a multi-Bernoulli (MB) posterior, and a labeled multi-Bernoulli
(LMB) posterior.  All three expose the same unlabeled PHD once flattened to
a single Gaussian mixture: the Poisson intensity is already that mixture,
while for MB/LMB each track contributes its spatial components scaled by the
track existence probability,

    w_flat[(track, comp)] = r_track * w_track[comp],

and the mixture mass equals sum_track r_track (the expected target count).
The flattening keeps a bijective index map from flat position back to
(track, component) so that fitted weights can be scattered back into the
owning tracks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .gm import GaussianMixture, gm_mass


class DuplicateLabelError(ValueError):
    """Two tracks in one labeled posterior carry the same label."""


class TrackLabel(NamedTuple):
    """Track identity as (birth time, birth index); orders lexicographically."""

    birth_time: int
    birth_index: int


@dataclass(frozen=True)
class BernoulliComponent:
    """One track: existence probability and a normalized spatial mixture."""

    existence: float
    spatial: GaussianMixture

    def __post_init__(self):
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError(f"existence probability {self.existence} outside [0, 1]")
        _check_spatial_normalized(self.spatial)

    @property
    def mean_state(self) -> np.ndarray:
        """Weight-averaged mean of the spatial mixture."""
        return np.einsum("j,jd->d", self.spatial.weights, self.spatial.means)


def _check_spatial_normalized(spatial: GaussianMixture) -> None:
    total = gm_mass(spatial)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"spatial mixture weights sum to {total}, expected 1")


@dataclass(frozen=True)
class MBPosterior:
    """Unlabeled multi-Bernoulli posterior: an ordered set of tracks."""

    tracks: tuple[BernoulliComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))

    @property
    def expected_cardinality(self) -> float:
        return float(sum(t.existence for t in self.tracks))


@dataclass(frozen=True)
class LMBPosterior:
    """Labeled multi-Bernoulli posterior: tracks with pairwise-distinct labels."""

    tracks: tuple[tuple[TrackLabel, BernoulliComponent], ...]

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple((TrackLabel(*l), bc) for l, bc in self.tracks))
        labels = [l for l, _ in self.tracks]
        if len(set(labels)) != len(labels):
            raise DuplicateLabelError(f"labels are not pairwise distinct: {labels}")

    @property
    def expected_cardinality(self) -> float:
        return float(sum(bc.existence for _, bc in self.tracks))

    def strip_labels(self) -> MBPosterior:
        """Forget labels, keeping label order (sorted) for the track sequence."""
        ordered = sorted(self.tracks, key=lambda t: t[0])
        return MBPosterior(tuple(bc for _, bc in ordered))


@dataclass(frozen=True)
class UnifiedGM:
    """Flat mixture of a posterior's unlabeled PHD plus the index bijection.

    index_map[j] identifies the (track key, component position) that flat
    component j came from; track keys are flat positions for a Poisson
    source, track positions for MB, labels for LMB.
    """

    gm: GaussianMixture
    index_map: tuple = field(default_factory=tuple)
    source_kind: str = "phd"

    def __post_init__(self):
        object.__setattr__(self, "index_map", tuple(self.index_map))
        if len(self.index_map) != len(self.gm):
            raise ValueError(
                f"index map length {len(self.index_map)} != mixture size {len(self.gm)}"
            )

    @property
    def mass(self) -> float:
        return gm_mass(self.gm)


def poisson_phd(intensity: GaussianMixture) -> UnifiedGM:
    """Wrap a Poisson intensity: it already is the unlabeled PHD."""
    index_map = tuple((j, 0) for j in range(len(intensity)))
    return UnifiedGM(gm=intensity, index_map=index_map, source_kind="phd")


def _flatten_tracks(keyed_tracks, source_kind: str) -> UnifiedGM:
    weights, means, covs, index_map = [], [], [], []
    dim = None
    for key, bc in keyed_tracks:
        _check_spatial_normalized(bc.spatial)
        dim = bc.spatial.dim
        for iota in range(len(bc.spatial)):
            weights.append(bc.existence * bc.spatial.weights[iota])
            means.append(bc.spatial.means[iota])
            covs.append(bc.spatial.covs[iota])
            index_map.append((key, iota))
    if not weights:
        return UnifiedGM(GaussianMixture.empty(dim or 1), (), source_kind)
    gm = GaussianMixture(np.array(weights), np.stack(means), np.stack(covs))
    return UnifiedGM(gm=gm, index_map=tuple(index_map), source_kind=source_kind)


def mb_to_unified(mb: MBPosterior) -> UnifiedGM:
    """Flatten an MB posterior; one component per (track, spatial component)."""
    return _flatten_tracks(enumerate(mb.tracks), "mb")


def lmb_to_unified(lmb: LMBPosterior) -> UnifiedGM:
    """Flatten an LMB posterior in canonical label order.

    Tracks are sorted by (birth time, birth index) first, so the flat order
    does not depend on insertion history.  The map keys are the labels; the
    same construction as the unlabeled case applies otherwise.
    """
    ordered = sorted(lmb.tracks, key=lambda t: t[0])
    return _flatten_tracks(ordered, "lmb")


def scatter_weights(unified_weights, index_map) -> dict:
    """Invert the flattening: group a flat weight vector by owning track.

    Returns {track key: array of weights in component order}.  The weights
    are taken as-is (un-normalized); per-track normalization is the
    feedback step's job.
    """
    unified_weights = np.asarray(unified_weights, dtype=float)
    if unified_weights.size != len(index_map):
        raise ValueError(
            f"got {unified_weights.size} weights for an index map of size {len(index_map)}"
        )
    grouped: dict = {}
    for w, (key, iota) in zip(unified_weights, index_map):
        grouped.setdefault(key, []).append((iota, float(w)))
    return {
        key: np.array([w for _, w in sorted(items)]) for key, items in grouped.items()
    }
