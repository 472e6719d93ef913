"""Local GM-PHD / MB / LMB recursions against small closed-form oracles."""

import itertools

import numpy as np
import pytest

from rfsfuse.filters import (
    Caps,
    FilterState,
    cardinality_pmf,
    lmb_extract,
    lmb_predict,
    lmb_update,
    make_filter_state,
    mb_extract,
    mb_predict,
    mb_update,
    phd_extract,
    phd_predict,
    phd_update,
)
from rfsfuse.gm import GaussianMixture, gm_mass
from rfsfuse.models import (
    BirthModel,
    SensorModel,
    clutter_intensity,
    make_cv_model,
    make_linear_sensor,
    make_mb_birth,
    measurement_kernel,
)
from rfsfuse.rfs import (
    BernoulliComponent,
    LMBPosterior,
    MBPosterior,
    TrackLabel,
    mb_to_unified,
)

MOTION = make_cv_model()
BIRTH = make_mb_birth(((0, 0), (400, -600), (-800, -200), (-200, 800)))
NO_BIRTH = BirthModel("mb_birth", ())
TRACK_COV = np.diag([100.0, 25.0, 100.0, 25.0])


def single_gc(mean_xy=(0.0, 0.0), weight=1.0):
    return GaussianMixture(
        [weight], [[mean_xy[0], 0.0, mean_xy[1], 0.0]], [TRACK_COV]
    )


def track(r, mean_xy=(0.0, 0.0), weights=(1.0,), offsets=((0.0, 0.0),)):
    means = [[mean_xy[0] + dx, 0.0, mean_xy[1] + dy, 0.0] for dx, dy in offsets]
    gm = GaussianMixture(list(weights), means, [TRACK_COV] * len(weights))
    return BernoulliComponent(r, gm)


class TestPhd:
    def test_survival_scaling(self):
        state = FilterState("phd", single_gc())
        out = phd_predict(state, MOTION, NO_BIRTH)
        assert gm_mass(out.posterior) == pytest.approx(0.95)

    def test_birth_mass(self):
        out = phd_predict(make_filter_state("phd"), MOTION, BIRTH)
        assert gm_mass(out.posterior) == pytest.approx(0.12)

    def test_unit_survival_preserves_mass(self, rng):
        motion = make_cv_model(survival=1.0)
        gm = GaussianMixture(
            rng.uniform(0.1, 1, 5),
            rng.normal(0, 100, (5, 4)),
            [TRACK_COV] * 5,
        )
        out = phd_predict(FilterState("phd", gm), motion, NO_BIRTH)
        assert gm_mass(out.posterior) == pytest.approx(gm_mass(gm), rel=1e-12)

    def test_misdetection_only(self):
        sensor = make_linear_sensor(detection=0.9)
        out = phd_update(FilterState("phd", single_gc()), [], sensor)
        assert gm_mass(out.posterior) == pytest.approx(0.1)

    def test_perfect_reassignment(self):
        sensor = make_linear_sensor(detection=1.0, clutter_rate=0.0)
        out = phd_update(FilterState("phd", single_gc()), [np.zeros(2)], sensor)
        assert gm_mass(out.posterior) == pytest.approx(1.0)

    def test_clutter_dominated_limit(self):
        sensor = make_linear_sensor(detection=0.9, clutter_rate=1e9)
        out = phd_update(FilterState("phd", single_gc()), [np.zeros(2)], sensor)
        assert gm_mass(out.posterior) == pytest.approx(0.1, rel=1e-4)

    def test_mass_equals_measurement_count(self, rng):
        # p_d = 1, no clutter, one measurement per target
        sensor = make_linear_sensor(detection=1.0, clutter_rate=0.0)
        gm = GaussianMixture(
            [1.0, 1.0],
            [[0, 0, 0, 0], [500.0, 0, 500.0, 0]],
            [TRACK_COV] * 2,
        )
        zs = [np.array([1.0, -2.0]), np.array([498.0, 503.0])]
        out = phd_update(FilterState("phd", gm), zs, sensor)
        assert gm_mass(out.posterior) == pytest.approx(2.0, abs=1e-6)

    def test_extract_threshold(self):
        gm = GaussianMixture(
            [0.9, 0.2],
            [[0, 0, 0, 0], [100.0, 0, 0, 0]],
            [TRACK_COV] * 2,
        )
        assert len(phd_extract(FilterState("phd", gm))) == 1
        assert phd_extract(make_filter_state("phd")) == []
        gm3 = GaussianMixture(
            [0.51, 0.51, 0.49],
            [[0, 0, 0, 0], [100.0, 0, 0, 0], [200.0, 0, 0, 0]],
            [TRACK_COV] * 3,
        )
        assert len(phd_extract(FilterState("phd", gm3))) == 2

    def test_cap_enforced(self, rng):
        means = np.zeros((250, 4))
        means[:, 0] = np.arange(250) * 100.0
        gm = GaussianMixture(rng.uniform(0.5, 1.0, 250), means, [TRACK_COV] * 250)
        out = phd_update(FilterState("phd", gm, Caps()), [], make_linear_sensor(detection=0.5))
        assert len(out.posterior) <= 200


class TestMb:
    def test_predict_scales_existence(self):
        mb = MBPosterior((track(0.8),))
        out = mb_predict(FilterState("mb", mb), MOTION, NO_BIRTH)
        assert out.posterior.tracks[0].existence == pytest.approx(0.76)

    def test_predict_appends_birth(self):
        out = mb_predict(make_filter_state("mb"), MOTION, BIRTH)
        assert len(out.posterior.tracks) == 4
        assert out.posterior.expected_cardinality == pytest.approx(0.12)

    def test_unit_survival(self):
        motion = make_cv_model(survival=1.0)
        mb = MBPosterior((track(0.8), track(0.3, (500, 500))))
        out = mb_predict(FilterState("mb", mb), motion, NO_BIRTH)
        assert [t.existence for t in out.posterior.tracks] == pytest.approx([0.8, 0.3])

    def test_misdetection_formula(self):
        sensor = make_linear_sensor(detection=0.9)
        out = mb_update(FilterState("mb", MBPosterior((track(0.5),))), [], sensor)
        assert out.posterior.tracks[0].existence == pytest.approx(0.5 * 0.1 / 0.55)

    def test_pd_zero_identity(self):
        sensor = make_linear_sensor(detection=0.0)
        mb = MBPosterior((track(0.5), track(0.7, (300, 300))))
        out = mb_update(FilterState("mb", mb), [np.array([3.0, 3.0])], sensor)
        assert [t.existence for t in out.posterior.tracks] == pytest.approx([0.5, 0.7])

    def test_single_track_bernoulli_oracle(self):
        # with p_d = 1 the cardinality-balanced update coincides with the
        # exact Bernoulli filter, whose posterior existence approaches 1 as
        # clutter vanishes
        r = 0.99
        sensor = make_linear_sensor(detection=1.0, clutter_rate=1e-9)
        mb = MBPosterior((track(r),))
        z = np.array([0.0, 0.0])
        out = mb_update(FilterState("mb", mb), [z], sensor)
        assert len(out.posterior.tracks) == 1
        kern = measurement_kernel(mb.tracks[0].spatial.means, mb.tracks[0].spatial.covs, sensor)
        q = float(kern.apply(z)[0][0])
        kappa = clutter_intensity(z, sensor)
        r_bayes = r * q / (kappa * (1 - r) + r * q)
        assert out.posterior.tracks[0].existence == pytest.approx(min(r_bayes, 1 - 1e-9), rel=1e-9)
        assert out.posterior.tracks[0].existence >= 0.99

    def test_cardinality_mode_extraction(self):
        sp = single_gc()
        assert len(mb_extract(FilterState("mb", MBPosterior((BernoulliComponent(0.99, sp),))))) == 1
        two_low = MBPosterior((BernoulliComponent(0.1, sp), BernoulliComponent(0.1, sp)))
        assert len(mb_extract(FilterState("mb", two_low))) == 0
        three_sure = MBPosterior(tuple(BernoulliComponent(1.0, sp) for _ in range(3)))
        assert len(mb_extract(FilterState("mb", three_sure))) == 3

    def test_poisson_binomial_mode_oracle(self, rng):
        for _ in range(20):
            rs = rng.uniform(0.0, 1.0, int(rng.integers(1, 8)))
            pmf = cardinality_pmf(rs)
            assert pmf.sum() == pytest.approx(1.0)
            # enumeration oracle
            n = len(rs)
            probs = np.zeros(n + 1)
            for mask in itertools.product([0, 1], repeat=n):
                p = np.prod([r if b else 1 - r for r, b in zip(rs, mask)])
                probs[sum(mask)] += p
            assert np.allclose(pmf, probs, atol=1e-12)

    def test_spatial_weights_normalized_after_update(self, rng):
        sensor = make_linear_sensor()
        mb = MBPosterior(
            (track(0.6, weights=(0.3, 0.7), offsets=((0, 0), (20, 5))),)
        )
        out = mb_update(FilterState("mb", mb), [np.array([5.0, 5.0])], sensor)
        for t in out.posterior.tracks:
            assert gm_mass(t.spatial) == pytest.approx(1.0, abs=1e-9)

    def test_caps_enforced(self):
        sensor = make_linear_sensor()
        tracks = tuple(track(0.5, (i * 150.0, 0.0)) for i in range(60))
        out = mb_update(FilterState("mb", MBPosterior(tracks)), [], sensor)
        assert len(out.posterior.tracks) <= 50

    def test_cardinality_identity_with_unified(self, rng):
        mb = MBPosterior((track(0.5), track(0.25, (300, 300))))
        assert gm_mass(mb_to_unified(mb).gm) == pytest.approx(0.75, abs=1e-12)


def lmb_single(r=0.5, mean_xy=(0.0, 0.0)):
    return LMBPosterior(((TrackLabel(1, 1), track(r, mean_xy)),))


def enumerate_lmb_posterior(tracks, measurements, sensor):
    """Brute-force joint association enumeration for small LMB updates.

    Options per track: non-existence, misdetection, or one measurement;
    measurements are assigned injectively.  Returns per-track (existence,
    association weight map) after global normalization.
    """
    pd = sensor.detection
    n = len(tracks)
    kerns = [measurement_kernel(t.spatial.means, t.spatial.covs, sensor) for t in tracks]
    options = []
    for t, kern in zip(tracks, kerns):
        opts = {"none": 1.0 - t.existence, "miss": t.existence * (1 - pd)}
        for zi, z in enumerate(measurements):
            q = kern.apply(z)[0]
            rho = float(t.spatial.weights @ q)
            kappa = max(clutter_intensity(z, sensor), np.finfo(float).tiny)
            opts[zi] = t.existence * pd * rho / kappa
        options.append(opts)
    keys = [list(o.keys()) for o in options]
    total = 0.0
    assoc_w = [dict() for _ in range(n)]
    for combo in itertools.product(*keys):
        used = [k for k in combo if isinstance(k, int)]
        if len(used) != len(set(used)):
            continue
        w = np.prod([options[i][k] for i, k in enumerate(combo)])
        total += w
        for i, k in enumerate(combo):
            assoc_w[i][k] = assoc_w[i].get(k, 0.0) + w
    out = []
    for i in range(n):
        r_post = sum(w for k, w in assoc_w[i].items() if k != "none") / total
        out.append((r_post, {k: w / total for k, w in assoc_w[i].items()}))
    return out


class TestLmb:
    def test_birth_labels(self):
        state = make_filter_state("lmb")
        for _ in range(7):
            state = lmb_predict(state, MOTION, NO_BIRTH)
        state = lmb_predict(FilterState("lmb", state.posterior, time=6), MOTION, BIRTH)
        labels = [tuple(l) for l, _ in state.posterior.tracks]
        assert labels == [(7, 1), (7, 2), (7, 3), (7, 4)]

    def test_survivor_keeps_label(self):
        lmb = LMBPosterior(((TrackLabel(3, 2), track(0.8)),))
        out = lmb_predict(FilterState("lmb", lmb, time=5), MOTION, NO_BIRTH)
        assert out.posterior.tracks[0][0] == TrackLabel(3, 2)
        assert out.posterior.tracks[0][1].existence == pytest.approx(0.76)

    def test_misdetection_matches_mb(self):
        sensor = make_linear_sensor(detection=0.9)
        out = lmb_update(FilterState("lmb", lmb_single(0.5)), [], sensor)
        assert out.posterior.tracks[0][1].existence == pytest.approx(0.5 * 0.1 / 0.55)

    def test_detection_raises_existence(self):
        sensor = make_linear_sensor(detection=0.9, clutter_rate=1e-9)
        out = lmb_update(FilterState("lmb", lmb_single(0.5)), [np.zeros(2)], sensor)
        assert out.posterior.tracks[0][1].existence > 0.5

    def test_joint_equals_enumeration(self, rng):
        # two overlapping tracks, two measurements: the ranked-assignment
        # marginalization must agree with exhaustive joint enumeration
        sensor = make_linear_sensor(detection=0.9)
        tracks = (track(0.6, (0.0, 0.0)), track(0.5, (25.0, 10.0)))
        lmb = LMBPosterior(((TrackLabel(1, 1), tracks[0]), (TrackLabel(1, 2), tracks[1])))
        zs = [np.array([4.0, 2.0]), np.array([22.0, 12.0])]
        out = lmb_update(FilterState("lmb", lmb), zs, sensor)
        oracle = enumerate_lmb_posterior(tracks, zs, sensor)
        for (label, bc), (r_oracle, _) in zip(out.posterior.tracks, oracle):
            assert bc.existence == pytest.approx(r_oracle, abs=1e-9)

    def test_separated_clusters_equal_independent_updates(self):
        sensor = make_linear_sensor()
        t1 = (TrackLabel(1, 1), track(0.6, (0.0, 0.0)))
        t2 = (TrackLabel(1, 2), track(0.7, (800.0, 800.0)))
        zs = [np.array([5.0, -5.0]), np.array([795.0, 802.0])]
        joint = lmb_update(FilterState("lmb", LMBPosterior((t1, t2))), zs, sensor)
        alone1 = lmb_update(FilterState("lmb", LMBPosterior((t1,))), [zs[0]], sensor)
        alone2 = lmb_update(FilterState("lmb", LMBPosterior((t2,))), [zs[1]], sensor)
        assert joint.posterior.tracks[0][1].existence == pytest.approx(
            alone1.posterior.tracks[0][1].existence, abs=1e-9
        )
        assert joint.posterior.tracks[1][1].existence == pytest.approx(
            alone2.posterior.tracks[0][1].existence, abs=1e-9
        )

    def test_extract_threshold_strict(self):
        sp = single_gc()
        lmb = LMBPosterior(
            (
                (TrackLabel(1, 1), BernoulliComponent(0.9, sp)),
                (TrackLabel(1, 2), BernoulliComponent(0.3, sp)),
            )
        )
        assert len(lmb_extract(FilterState("lmb", lmb))) == 1
        lmb_low = LMBPosterior(((TrackLabel(1, 1), BernoulliComponent(0.49, sp)),))
        assert lmb_extract(FilterState("lmb", lmb_low)) == []
        lmb_edge = LMBPosterior(((TrackLabel(1, 1), BernoulliComponent(0.5, sp)),))
        assert lmb_extract(FilterState("lmb", lmb_edge)) == []

    def test_existence_stays_in_unit_interval(self, rng):
        sensor = make_linear_sensor()
        state = make_filter_state("lmb")
        for k in range(5):
            state = lmb_predict(state, MOTION, BIRTH)
            zs = [rng.uniform(-900, 900, 2) for _ in range(int(rng.integers(0, 6)))]
            state = lmb_update(state, zs, sensor)
            for _, bc in state.posterior.tracks:
                assert 0.0 <= bc.existence <= 1.0
                assert gm_mass(bc.spatial) == pytest.approx(1.0, abs=1e-9)


class TestSingleTargetEquivalence:
    def test_misdetection_fixtures(self, rng):
        # with one track and no measurements the MB and LMB updates share
        # the same closed form, so posteriors must match exactly
        for _ in range(50):
            r = float(rng.uniform(0.05, 0.95))
            pd = float(rng.uniform(0.1, 0.99))
            sensor = make_linear_sensor(detection=pd)
            offsets = ((0.0, 0.0), (15.0, -10.0))
            weights = rng.uniform(0.2, 1.0, 2)
            weights = tuple(weights / weights.sum())
            bc = track(r, (0.0, 0.0), weights, offsets)
            mb_out = mb_update(
                FilterState("mb", MBPosterior((bc,))), [], sensor
            ).posterior.tracks[0]
            lmb_out = lmb_update(
                FilterState("lmb", LMBPosterior(((TrackLabel(1, 1), bc),))), [], sensor
            ).posterior.tracks[0][1]
            assert mb_out.existence == pytest.approx(lmb_out.existence, abs=1e-9)
            assert np.allclose(mb_out.spatial.weights, lmb_out.spatial.weights, atol=1e-9)
