"""Aggregate statistics and the per-window gaze feature set."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnkit.features import (
    AggStats,
    FeatureVector,
    aggregate,
    extract_feature_vector,
    pupil_baseline,
    pupil_baseline_correct,
    vergence,
)
from attnkit.gaze import Blink, Fixation, Saccade, Window

from oracles import DT_US, aggstats_reference, make_series

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


class TestAggregate:
    def test_symmetric_triple(self):
        a = aggregate([1, 2, 3])
        assert a.mean == 2 and a.median == 2
        assert a.min == 1 and a.max == 3 and a.range == 2
        assert a.std == pytest.approx(1.0)
        assert a.skew == 0.0
        assert a.count == 3

    def test_constant_series(self):
        a = aggregate([5, 5, 5, 5])
        assert a.std == 0.0 and a.skew == 0.0 and a.kurtosis == 0.0

    def test_empty_series(self):
        a = aggregate([])
        assert a.count == 0
        assert a.mean is None and a.std is None and a.q25 is None

    def test_against_reference_on_uniform_draws(self):
        x = np.random.default_rng(7).uniform(0, 1, size=1000)
        got = aggregate(x).as_dict()
        ref = aggstats_reference(x)
        for key, expected in ref.items():
            assert got[key] == pytest.approx(expected, abs=1e-12), key

    @given(st.lists(finite_floats, min_size=1, max_size=60))
    @settings(max_examples=80, deadline=None)
    def test_against_reference_property(self, xs):
        got = aggregate(xs).as_dict()
        ref = aggstats_reference(xs)
        for key, expected in ref.items():
            assert got[key] == pytest.approx(expected, rel=1e-9, abs=1e-9), key

    @given(st.lists(finite_floats, min_size=1, max_size=40))
    @settings(max_examples=80, deadline=None)
    def test_duplication_stability(self, xs):
        a = aggregate(xs)
        b = aggregate(list(xs) + list(xs))
        for key in ("mean", "median", "min", "max", "q25", "q75"):
            assert getattr(b, key) == pytest.approx(getattr(a, key), rel=1e-12, abs=1e-12)

    @given(st.lists(finite_floats, min_size=1, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_order_invariant(self, xs):
        assert aggregate(xs) == aggregate(list(reversed(xs)))

    @given(st.lists(finite_floats, min_size=2, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_quantile_ordering(self, xs):
        a = aggregate(xs)
        assert a.min <= a.q25 <= a.median <= a.q75 <= a.max
        assert a.range == pytest.approx(a.max - a.min)
        assert a.std >= 0

    def test_stats_subset(self):
        a = aggregate([1, 2, 3], stats=("mean", "max"))
        assert a.mean == 2 and a.max == 3
        assert a.min is None and a.median is None
        assert a.count == 3


class TestVergence:
    def test_parallel_gaze(self):
        v = vergence((0, 0, 1), (0, 0, 1), None, None)
        assert v["angle_rad"] == pytest.approx(0.0)

    def test_orthogonal(self):
        v = vergence((1, 0, 0), (0, 1, 0), None, None)
        assert v["angle_rad"] == pytest.approx(np.pi / 2)

    def test_pupil_distance(self):
        v = vergence(None, None, (100, 200), (160, 200))
        assert v["angle_rad"] is None
        assert v["pupil_distance_px"] == pytest.approx(60.0)


class TestPupilBaseline:
    def test_constant_signal_corrects_to_zero(self):
        n = 100
        series = make_series(np.arange(n, dtype=np.int64) * DT_US,
                             np.tile((500.0, 500.0), (n, 1)),
                             np.ones(n, dtype=bool),
                             pupil_mm=np.full(n, 3.2))
        base = pupil_baseline(series)
        assert base == pytest.approx(3.2)
        corrected = pupil_baseline_correct([3.2, 3.2], base)
        assert corrected == [pytest.approx(0.0), pytest.approx(0.0)]

    def test_subtraction(self):
        assert pupil_baseline_correct([3.5], 3.0) == [pytest.approx(0.5)]

    def test_default_span_is_50_ms(self):
        # pupil 2.0 during the first 50 ms, 4.0 afterwards
        n = 100
        pupil = np.full(n, 4.0)
        pupil[:13] = 2.0  # samples at 0..48 ms
        series = make_series(np.arange(n, dtype=np.int64) * DT_US,
                             np.tile((500.0, 500.0), (n, 1)),
                             np.ones(n, dtype=bool), pupil_mm=pupil)
        assert pupil_baseline(series) == pytest.approx(2.0)

    def test_no_valid_baseline_warns(self):
        n = 100
        series = make_series(np.arange(n, dtype=np.int64) * DT_US,
                             np.tile((500.0, 500.0), (n, 1)),
                             np.ones(n, dtype=bool))
        series.valid_left[:20] = False
        series.valid_right[:20] = False
        with pytest.warns(UserWarning, match="baseline"):
            assert pupil_baseline(series) is None

    def test_baseline_span_corrects_to_mean_zero(self):
        rng = np.random.default_rng(3)
        n = 200
        pupil = rng.uniform(2.5, 4.5, size=n)
        series = make_series(np.arange(n, dtype=np.int64) * DT_US,
                             np.tile((500.0, 500.0), (n, 1)),
                             np.ones(n, dtype=bool), pupil_mm=pupil)
        base = pupil_baseline(series)
        span = series.pupil_mm()[series.t_us <= series.t_us[0] + 50_000]
        corrected = pupil_baseline_correct(list(span), base)
        assert np.mean(corrected) == pytest.approx(0.0, abs=1e-9)


def _window(events, person="p1", probe="q1", samples=None):
    return Window(person_id=person, probe_id=probe, start_us=0, end_us=10_000_000,
                  events=list(events), samples=samples, accepted=True)


class TestExtract:
    def test_ratio_pairing_rule(self):
        events = [
            Fixation(0, 200_000, (0, 0), (0, 0)),
            Saccade(200_000, 230_000, length_px=100.0, direction_px=100.0),
            Fixation(230_000, 630_000, (0, 0), (0, 0)),
            Saccade(630_000, 660_000, length_px=50.0, direction_px=-50.0),
            Fixation(660_000, 700_000, (0, 0), (0, 0)),
        ]
        fv = extract_feature_vector(_window(events))
        assert fv.values["fixsac_ratio.count"] == 2
        assert fv.values["fixsac_ratio.min"] == pytest.approx(200 / 30)
        assert fv.values["fixsac_ratio.max"] == pytest.approx(400 / 30)
        assert fv.values["fixsac_ratio.mean"] == pytest.approx(10.0)

    def test_regression_proportion(self):
        events = [
            Saccade(0, 10_000, length_px=50, direction_px=50.0),
            Saccade(20_000, 30_000, length_px=20, direction_px=-20.0),
            Saccade(40_000, 50_000, length_px=10, direction_px=10.0),
        ]
        fv = extract_feature_vector(_window(events))
        assert fv.values["saccade.regression_proportion"] == pytest.approx(1 / 3)

    def test_fixation_count_is_single_value(self):
        events = [Fixation(i * 100_000, i * 100_000 + 90_000, (float(i), 0.0), (0, 0))
                  for i in range(18)]
        fv = extract_feature_vector(_window(events))
        assert fv.values["fixation.count"] == 18
        assert fv.values["blink.count"] == 0

    def test_zero_saccades_means_missing_not_zero(self):
        events = [Fixation(0, 100_000, (0, 0), (0, 0))]
        fv = extract_feature_vector(_window(events))
        assert fv.values["saccade_duration_ms.mean"] is None
        assert fv.values["saccade.regression_proportion"] is None
        assert fv.values["fixsac_ratio.count"] == 0

    def test_zero_fixations_means_dispersion_missing(self):
        fv = extract_feature_vector(_window([]))
        assert fv.values["fixation_dispersion.x"] is None
        assert fv.values["fixation.count"] == 0

    def test_blink_features(self):
        events = [Blink(0, 100_000), Blink(200_000, 500_000)]
        fv = extract_feature_vector(_window(events))
        assert fv.values["blink.count"] == 2
        assert fv.values["blink_duration_ms.mean"] == pytest.approx(200.0)

    def test_dispersion_translation_and_scale(self):
        def fv_for(centroids):
            events = [Fixation(i * 100_000, i * 100_000 + 90_000, tuple(c), (0, 0))
                      for i, c in enumerate(centroids)]
            return extract_feature_vector(_window(events))

        base = np.array([[0.0, 0.0], [10.0, 4.0], [20.0, -4.0]])
        a = fv_for(base)
        b = fv_for(base + np.array([55.0, -17.0]))
        assert b.values["fixation_dispersion.x"] == pytest.approx(a.values["fixation_dispersion.x"])
        assert b.values["fixation_dispersion.y"] == pytest.approx(a.values["fixation_dispersion.y"])
        c = fv_for(base * 2.0)
        assert c.values["fixation_dispersion.x"] == pytest.approx(2 * a.values["fixation_dispersion.x"])
        assert c.values["fixation_dispersion.y"] == pytest.approx(2 * a.values["fixation_dispersion.y"])

    def test_time_translation_invariance(self):
        events = [
            Fixation(0, 200_000, (10, 10), (5, 5)),
            Saccade(200_000, 230_000, length_px=100.0, direction_px=100.0),
            Fixation(230_000, 630_000, (110, 10), (5, 5)),
        ]
        shift = 3_600_000_000
        shifted = [
            Fixation(0 + shift, 200_000 + shift, (10, 10), (5, 5)),
            Saccade(200_000 + shift, 230_000 + shift, length_px=100.0, direction_px=100.0),
            Fixation(230_000 + shift, 630_000 + shift, (110, 10), (5, 5)),
        ]
        a = extract_feature_vector(_window(events))
        b = extract_feature_vector(Window(person_id="p1", probe_id="q1",
                                          start_us=shift, end_us=shift + 10_000_000,
                                          events=shifted, accepted=True))
        assert a.values == b.values

    def test_rejected_window_refused(self):
        win = _window([])
        win.accepted = False
        win.rejection_reason = "tracking ratio"
        with pytest.raises(ValueError, match="tracking ratio"):
            extract_feature_vector(win)

    def test_vergence_features_from_samples(self):
        n = 50
        pos = np.tile((500.0, 500.0), (n, 1))
        series = make_series(np.arange(n, dtype=np.int64) * DT_US, pos,
                             np.ones(n, dtype=bool))
        # converging eyes: constant 2-degree vergence angle
        half = np.deg2rad(1.0)
        series.left_dir = np.tile((np.sin(half), 0.0, np.cos(half)), (n, 1))
        series.right_dir = np.tile((-np.sin(half), 0.0, np.cos(half)), (n, 1))
        fv = extract_feature_vector(_window([], samples=series))
        assert fv.values["vergence_angle_rad.mean"] == pytest.approx(np.deg2rad(2.0))
        assert fv.values["vergence_angle_rad.std"] == 0.0
        assert fv.values["vergence_pupil_distance_px.mean"] == pytest.approx(60.0)

    def test_pupil_features_corrected(self):
        events = [
            Fixation(0, 100_000, (0, 0), (0, 0), mean_pupil_mm=3.5),
            Fixation(200_000, 300_000, (0, 0), (0, 0), mean_pupil_mm=3.0),
        ]
        fv = extract_feature_vector(_window(events), pupil_baseline_mm=3.0)
        assert fv.values["pupil_mm.max"] == pytest.approx(0.5)
        assert fv.values["pupil_mm.min"] == pytest.approx(0.0)
        missing = extract_feature_vector(_window(events))
        assert missing.values["pupil_mm.mean"] is None

    def test_group_tags(self):
        assert FeatureVector.group_of("fixation_duration_ms.mean") == "fixation"
        assert FeatureVector.group_of("fixsac_ratio.mean") == "fixation"
        assert FeatureVector.group_of("saccade.regression_proportion") == "saccade"
        assert FeatureVector.group_of("blink.count") == "blink"
        assert FeatureVector.group_of("pupil_mm.std") == "pupil"
        assert FeatureVector.group_of("vergence_angle_rad.mean") == "vergence"
        assert FeatureVector.group_of("eda_phasic.mean") == "physio"
        assert FeatureVector.group_of("au12.mean") == "external"

    def test_no_nan_stored(self):
        with pytest.raises(ValueError, match="non-finite"):
            FeatureVector("p", "q", {"x.mean": float("nan")})
