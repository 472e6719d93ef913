"""Posterior representations and unified-GM flattening."""

import numpy as np
import pytest

from rfsfuse.gm import GaussianMixture, gm_mass
from rfsfuse.rfs import (
    BernoulliComponent,
    DuplicateLabelError,
    LMBPosterior,
    MBPosterior,
    TrackLabel,
    lmb_to_unified,
    mb_to_unified,
    poisson_phd,
    scatter_weights,
)

from conftest import random_mixture, random_spd


def spatial1(w_list, means, rng=None, d=4):
    gm = GaussianMixture(
        w_list,
        [[m, 0, 0, 0][:d] for m in means],
        [np.diag([100.0, 25.0, 100.0, 25.0])[:d, :d] for _ in means],
    )
    return gm


def random_bc(rng, n_comps=2, d=2):
    w = rng.uniform(0.2, 1.0, n_comps)
    gm = GaussianMixture(
        w / w.sum(),
        rng.normal(0, 3, (n_comps, d)),
        np.array([random_spd(rng, d) for _ in range(n_comps)]),
    )
    return BernoulliComponent(float(rng.uniform(0.05, 0.95)), gm)


class TestPoissonPhd:
    def test_intensity_mass_two(self):
        unified = poisson_phd(spatial1([2.0], [0.0]))
        assert unified.mass == pytest.approx(2.0)
        assert unified.source_kind == "phd"

    def test_empty(self):
        unified = poisson_phd(GaussianMixture.empty(4))
        assert unified.mass == 0.0
        assert unified.index_map == ()

    def test_mass_one(self):
        unified = poisson_phd(spatial1([0.3, 0.7], [0.0, 50.0]))
        assert unified.mass == pytest.approx(1.0)
        assert unified.index_map == ((0, 0), (1, 0))


class TestMbToUnified:
    def test_single_track(self):
        mb = MBPosterior((BernoulliComponent(0.8, spatial1([1.0], [0.0])),))
        unified = mb_to_unified(mb)
        assert len(unified.gm) == 1
        assert unified.gm.weights[0] == pytest.approx(0.8)

    def test_cardinality_identity(self):
        mb = MBPosterior(
            (
                BernoulliComponent(0.5, spatial1([1.0], [0.0])),
                BernoulliComponent(0.5, spatial1([1.0], [30.0])),
            )
        )
        assert mb_to_unified(mb).mass == pytest.approx(1.0)

    def test_product_weights_and_map(self):
        mb = MBPosterior((BernoulliComponent(0.6, spatial1([0.25, 0.75], [0.0, 40.0])),))
        unified = mb_to_unified(mb)
        assert np.allclose(unified.gm.weights, [0.15, 0.45])
        assert unified.index_map == ((0, 0), (0, 1))

    def test_mass_identity_random(self, rng):
        for _ in range(20):
            mb = MBPosterior(tuple(random_bc(rng) for _ in range(int(rng.integers(1, 5)))))
            assert gm_mass(mb_to_unified(mb).gm) == pytest.approx(
                mb.expected_cardinality, abs=1e-9
            )

    def test_pointwise_intensity(self, rng):
        mb = MBPosterior(tuple(random_bc(rng) for _ in range(3)))
        unified = mb_to_unified(mb)
        for _ in range(10):
            x = rng.normal(0, 3, 2)
            direct = sum(t.existence * t.spatial.evaluate(x) for t in mb.tracks)
            assert unified.gm.evaluate(x) == pytest.approx(direct, abs=1e-12)

    def test_violated_normalization_rejected(self):
        with pytest.raises(ValueError):
            BernoulliComponent(0.5, spatial1([0.5, 0.2], [0.0, 1.0]))

    def test_existence_range_enforced(self):
        with pytest.raises(ValueError):
            BernoulliComponent(1.2, spatial1([1.0], [0.0]))


class TestLmbToUnified:
    def test_single_labeled_track(self):
        lmb = LMBPosterior(((TrackLabel(3, 1), BernoulliComponent(1.0, spatial1([1.0], [0.0]))),))
        assert lmb_to_unified(lmb).mass == pytest.approx(1.0)

    def test_label_order_and_map(self):
        bc = BernoulliComponent(0.5, spatial1([1.0], [0.0]))
        lmb = LMBPosterior(((TrackLabel(1, 2), bc), (TrackLabel(1, 1), bc)))
        unified = lmb_to_unified(lmb)
        assert unified.mass == pytest.approx(1.0)
        assert unified.index_map == ((TrackLabel(1, 1), 0), (TrackLabel(1, 2), 0))

    def test_matches_mb_on_same_parameters(self, rng):
        bcs = [random_bc(rng) for _ in range(3)]
        lmb = LMBPosterior(tuple((TrackLabel(1, i + 1), bc) for i, bc in enumerate(bcs)))
        u_lmb = lmb_to_unified(lmb)
        u_mb = mb_to_unified(lmb.strip_labels())
        assert np.array_equal(u_lmb.gm.weights, u_mb.gm.weights)
        assert np.array_equal(u_lmb.gm.means, u_mb.gm.means)
        assert np.array_equal(u_lmb.gm.covs, u_mb.gm.covs)

    def test_duplicate_labels_rejected(self):
        bc = BernoulliComponent(0.5, spatial1([1.0], [0.0]))
        with pytest.raises(DuplicateLabelError):
            LMBPosterior(((TrackLabel(1, 1), bc), (TrackLabel(1, 1), bc)))


class TestScatterWeights:
    def test_grouping(self):
        index_map = ((0, 0), (0, 1), (1, 0))
        grouped = scatter_weights([0.1, 0.3, 0.2], index_map)
        assert np.allclose(grouped[0], [0.1, 0.3])
        assert np.allclose(grouped[1], [0.2])

    def test_identity_for_phd_source(self):
        unified = poisson_phd(spatial1([0.4, 0.6], [0.0, 20.0]))
        grouped = scatter_weights(unified.gm.weights, unified.index_map)
        flat = [grouped[j][0] for j in range(2)]
        assert np.allclose(flat, [0.4, 0.6])

    def test_round_trip(self, rng):
        mb = MBPosterior(tuple(random_bc(rng, n_comps=3) for _ in range(3)))
        unified = mb_to_unified(mb)
        grouped = scatter_weights(unified.gm.weights, unified.index_map)
        for ell, track in enumerate(mb.tracks):
            assert np.allclose(grouped[ell], track.existence * track.spatial.weights)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            scatter_weights([0.1, 0.2], ((0, 0),))
