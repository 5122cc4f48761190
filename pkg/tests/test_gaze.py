"""Event detection, windowing and quality rules."""

import numpy as np
import pytest

from attnkit.gaze import (
    Blink,
    EventDetector,
    Fixation,
    QualityRules,
    Saccade,
    ScreenGeometry,
    Window,
    cut_window,
    detect_events,
    load_samples,
    quality_filter,
    tracking_ratio,
)
from attnkit.validation import IngestError, SchemaError

from oracles import (
    DT_US,
    build_stepwise_trace,
    default_geometry,
    event_signature,
    make_series,
    random_stepwise_plan,
)


def _stationary(n, center=(500.0, 500.0)):
    t = np.arange(n, dtype=np.int64) * DT_US
    pos = np.tile(np.asarray(center), (n, 1))
    return make_series(t, pos, np.ones(n, dtype=bool))


def _three_segment(jitter=0.0, rng=None):
    """100 samples at (500,500), 3 transition samples, 100 at (800,500).

    Transition samples sit more than the dispersion threshold away from both
    clusters so neither fixation absorbs them.
    """
    t = np.arange(203, dtype=np.int64) * DT_US
    pos = np.zeros((203, 2))
    pos[:100] = (500.0, 500.0)
    pos[100] = (620.0, 500.0)
    pos[101] = (650.0, 500.0)
    pos[102] = (680.0, 500.0)
    pos[103:] = (800.0, 500.0)
    if jitter and rng is not None:
        pos += rng.uniform(-jitter, jitter, size=pos.shape)
    return make_series(t, pos, np.ones(203, dtype=bool))


class TestDetect:
    def test_stationary_single_fixation(self):
        events = detect_events(_stationary(30))
        kinds = [e.kind for e in events]
        assert kinds == ["fixation"]
        assert events[0].duration_ms == pytest.approx(29 * DT_US / 1000.0)

    def test_two_clusters_with_fast_transition(self):
        events = detect_events(_three_segment())
        kinds = [e.kind for e in events]
        assert kinds == ["fixation", "saccade", "fixation"]
        sac = events[1]
        assert sac.length_px == pytest.approx(300.0, abs=1e-9)
        assert sac.direction_px == pytest.approx(300.0, abs=1e-9)

    def test_saccade_degree_attributes_with_geometry(self):
        series = _three_segment()
        series.geometry = default_geometry()
        sac = [e for e in detect_events(series) if e.kind == "saccade"][0]
        assert sac.amplitude_deg == pytest.approx(
            default_geometry().px_to_deg(300.0), rel=1e-9
        )
        assert sac.peak_velocity_deg_s is not None and sac.peak_velocity_deg_s > 40.0

    def test_overlong_blink_flag(self):
        n0, nb, n1 = 100, 151, 100  # 151 samples span exactly 600 ms
        t = np.arange(n0 + nb + n1, dtype=np.int64) * DT_US
        pos = np.tile((500.0, 500.0), (n0 + nb + n1, 1))
        valid = np.ones(n0 + nb + n1, dtype=bool)
        valid[n0:n0 + nb] = False
        events = detect_events(make_series(t, pos, valid))
        blinks = [e for e in events if e.kind == "blink"]
        assert len(blinks) == 1
        assert blinks[0].duration_ms == pytest.approx(600.0)
        assert blinks[0].overlong is True

    def test_blink_at_exactly_500ms_not_overlong(self):
        n0, nb, n1 = 50, 126, 50  # span 500 ms exactly
        t = np.arange(n0 + nb + n1, dtype=np.int64) * DT_US
        pos = np.tile((500.0, 500.0), (n0 + nb + n1, 1))
        valid = np.ones(n0 + nb + n1, dtype=bool)
        valid[n0:n0 + nb] = False
        blinks = [e for e in detect_events(make_series(t, pos, valid)) if e.kind == "blink"]
        assert len(blinks) == 1 and blinks[0].overlong is False

    def test_short_dropout_is_not_a_blink_and_bridges_saccade(self):
        # 2-sample dropout (4 ms) between two far-apart clusters
        t = np.arange(202, dtype=np.int64) * DT_US
        pos = np.zeros((202, 2))
        pos[:100] = (400.0, 500.0)
        pos[102:] = (900.0, 500.0)
        valid = np.ones(202, dtype=bool)
        valid[100:102] = False
        events = detect_events(make_series(t, pos, valid))
        assert [e.kind for e in events] == ["fixation", "saccade", "fixation"]

    def test_blink_between_fixations_suppresses_saccade(self):
        t = np.arange(230, dtype=np.int64) * DT_US
        pos = np.zeros((230, 2))
        pos[:100] = (400.0, 500.0)
        pos[130:] = (900.0, 500.0)
        valid = np.ones(230, dtype=bool)
        valid[100:130] = False  # 29-sample span = 116 ms blink
        events = detect_events(make_series(t, pos, valid))
        assert [e.kind for e in events] == ["fixation", "blink", "fixation"]

    def test_all_invalid_warns_and_returns_empty(self):
        n = 100
        t = np.arange(n, dtype=np.int64) * DT_US
        series = make_series(t, np.zeros((n, 2)), np.zeros(n, dtype=bool))
        with pytest.warns(UserWarning, match="all samples invalid"):
            assert detect_events(series) == []

    def test_matches_stepwise_oracle(self):
        for seed in range(30):
            rng = np.random.default_rng(1000 + seed)
            plan = random_stepwise_plan(rng)
            series, expected = build_stepwise_trace(plan, rng)
            got = event_signature(detect_events(series))
            assert got == expected, f"seed {seed}"

    def test_events_ordered_and_non_overlapping(self):
        for seed in range(15):
            rng = np.random.default_rng(2000 + seed)
            series, _ = build_stepwise_trace(random_stepwise_plan(rng), rng)
            events = detect_events(series)
            for prev, nxt in zip(events, events[1:]):
                assert nxt.start_us >= prev.end_us

    def test_fixation_dispersion_and_duration_bounds(self):
        det = EventDetector()
        for seed in range(10):
            rng = np.random.default_rng(3000 + seed)
            series, _ = build_stepwise_trace(random_stepwise_plan(rng), rng)
            for ev in det.detect(series):
                if ev.kind == "fixation":
                    assert ev.dispersion[0] <= det.max_dispersion_px
                    assert ev.dispersion[1] <= det.max_dispersion_px
                    assert ev.duration_ms >= det.min_fixation_ms

    def test_translation_invariance(self):
        rng = np.random.default_rng(7)
        series, _ = build_stepwise_trace(random_stepwise_plan(rng), rng)
        base = detect_events(series)

        shifted = make_series(
            series.t_us,
            series.left_por + np.array([123.0, -45.0]),
            series.valid_left,
        )
        moved = detect_events(shifted)
        assert len(moved) == len(base)
        for a, b in zip(base, moved):
            assert a.kind == b.kind
            assert a.start_us == b.start_us and a.end_us == b.end_us
            if a.kind == "fixation":
                assert b.centroid[0] == pytest.approx(a.centroid[0] + 123.0, abs=1e-6)
                assert b.centroid[1] == pytest.approx(a.centroid[1] - 45.0, abs=1e-6)
            if a.kind == "saccade":
                assert b.length_px == pytest.approx(a.length_px, abs=1e-6)

    def test_estimator_params_roundtrip(self):
        det = EventDetector(max_dispersion_px=80.0)
        assert det.get_params()["max_dispersion_px"] == 80.0
        det.set_params(min_blink_ms=60.0)
        assert det.min_blink_ms == 60.0


class TestLoad:
    HEADER = (
        "t_us,left_x,left_y,right_x,right_y,left_pupil_mm,right_pupil_mm,"
        "left_pupil_px_x,left_pupil_px_y,right_pupil_px_x,right_pupil_px_y,"
        "valid_left,valid_right"
    )

    def _row(self, t, x=500.0, y=400.0):
        return f"{t},{x},{y},{x + 2},{y},3.1,3.2,{x},{y},{x + 60},{y},1,1"

    def test_three_row_csv(self, tmp_path):
        p = tmp_path / "gaze.csv"
        p.write_text("\n".join([self.HEADER, self._row(0), self._row(4000), self._row(8000)]))
        series = load_samples(p)
        assert len(series) == 3
        assert series.valid_both.all()

    def test_missing_column_names_it(self, tmp_path):
        header = self.HEADER.replace("left_pupil_mm,", "")
        p = tmp_path / "gaze.csv"
        p.write_text(header + "\n")
        with pytest.raises(SchemaError, match="left_pupil_mm"):
            load_samples(p)

    def test_duplicate_timestamp_rejected(self, tmp_path):
        p = tmp_path / "gaze.csv"
        p.write_text("\n".join([self.HEADER, self._row(0), self._row(4000), self._row(4000)]))
        with pytest.raises(IngestError, match="row"):
            load_samples(p)

    def test_malformed_rows_skipped_and_counted(self, tmp_path):
        p = tmp_path / "gaze.csv"
        p.write_text("\n".join([self.HEADER, self._row(0), "garbage,row", self._row(4000)]))
        with pytest.warns(UserWarning, match="malformed"):
            series = load_samples(p)
        assert len(series) == 2 and series.n_malformed_rows == 1

    def test_out_of_bounds_marked_invalid(self, tmp_path):
        p = tmp_path / "gaze.csv"
        p.write_text("\n".join([self.HEADER, self._row(0), self._row(4000, x=50000.0)]))
        series = load_samples(p, geometry=ScreenGeometry(screen_px=(1920, 1080)))
        assert series.valid_both.tolist() == [True, False]
        assert series.n_out_of_bounds == 2  # both eyes of the second sample


class TestWindows:
    def _long_series(self, seconds=120, rate=250):
        n = seconds * rate
        t = np.arange(n, dtype=np.int64) * (1_000_000 // rate)
        pos = np.tile((500.0, 500.0), (n, 1))
        return make_series(t, pos, np.ones(n, dtype=bool))

    def test_ten_second_window_span(self):
        series = self._long_series()
        win = cut_window(series, [], probe_time_us=100_000_000, duration_s=10.0)
        assert (win.start_us, win.end_us) == (90_000_000, 100_000_000)

    def test_thirty_second_window_span(self):
        series = self._long_series()
        win = cut_window(series, [], probe_time_us=100_000_000, duration_s=30.0)
        assert (win.start_us, win.end_us) == (70_000_000, 100_000_000)

    def test_insufficient_span(self):
        series = self._long_series(seconds=20)
        win = cut_window(series, [], probe_time_us=5_000_000, duration_s=10.0)
        assert win.accepted is False
        assert win.rejection_reason == "insufficient span"

    def test_events_clipped_and_durations_recomputed(self):
        series = self._long_series()
        fix = Fixation(start_us=89_000_000, end_us=92_000_000,
                       centroid=(500.0, 500.0), dispersion=(0.0, 0.0))
        win = cut_window(series, [fix], probe_time_us=100_000_000, duration_s=10.0)
        assert win.events[0].start_us == 90_000_000
        assert win.events[0].duration_ms == pytest.approx(2000.0)

    def test_tracking_ratio_definition(self):
        series = self._long_series(seconds=40)
        # invalidate all but 1750 of the 2500 samples in [20 s, 30 s)
        lo, hi = 20 * 250, 30 * 250
        series.valid_left[lo + 1750:hi] = False
        win = cut_window(series, [], probe_time_us=30_000_000, duration_s=10.0)
        assert tracking_ratio(win, 250.0) == pytest.approx(0.7)

    def test_tracking_ratio_trivials(self):
        series = self._long_series(seconds=40)
        win = cut_window(series, [], probe_time_us=30_000_000, duration_s=10.0)
        assert tracking_ratio(win, 250.0) == pytest.approx(1.0)
        series.valid_right[:] = False
        win2 = cut_window(series, [], probe_time_us=30_000_000, duration_s=10.0)
        assert tracking_ratio(win2, 250.0) == pytest.approx(0.0)

    def test_tracking_ratio_monotone_in_valid_count(self):
        series = self._long_series(seconds=40)
        rng = np.random.default_rng(5)
        drop = rng.permutation(np.arange(20 * 250, 30 * 250))
        last = None
        for k in (0, 1000, 1500, 2000):
            s = self._long_series(seconds=40)
            s.valid_left[drop[:2500 - k]] = False
            win = cut_window(s, [], probe_time_us=30_000_000, duration_s=10.0)
            r = tracking_ratio(win, 250.0)
            if last is not None:
                assert r >= last
            last = r


class TestQuality:
    def _window(self, ratio, events=()):
        return Window(person_id="p", probe_id="q", start_us=0, end_us=10_000_000,
                      events=list(events), n_valid_samples=int(ratio * 2500),
                      nominal_rate_hz=250.0, tracking_ratio=ratio)

    def test_low_ratio_rejected(self):
        win = quality_filter(self._window(0.6), QualityRules(min_tracking_ratio=0.7))
        assert win.accepted is False and win.rejection_reason == "tracking ratio"

    def test_passing_window_accepted(self):
        win = quality_filter(self._window(0.8), QualityRules(min_tracking_ratio=0.75))
        assert win.accepted is True and win.rejection_reason is None

    def test_overlong_blink_rejected(self):
        blink = Blink(start_us=1_000_000, end_us=1_600_000)
        win = quality_filter(self._window(1.0, [blink]))
        assert win.accepted is False and win.rejection_reason == "overlong blink"

    def test_overlong_rejection_can_be_disabled(self):
        blink = Blink(start_us=1_000_000, end_us=1_600_000)
        rules = QualityRules(reject_overlong_blinks=False)
        assert quality_filter(self._window(1.0, [blink]), rules).accepted is True
