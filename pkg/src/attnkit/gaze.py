"""Raw gaze ingest, oculomotor event detection, probe windows, quality rules.

Detection is dispersion-based for fixations (I-DT) with a velocity gate for
saccades (I-VT style) and bilateral-invalid runs for blinks. All events span
[t(first constituent sample), t(last constituent sample)]; a saccade spans
from the last sample of the preceding fixation to the first sample of the
following fixation.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import IngestError, SchemaError


@dataclass(frozen=True)
class ScreenGeometry:
    """Physical screen setup used to convert pixels to visual angle.

    screen_px: (width, height) in pixels.
    screen_mm: (width, height) in millimetres, optional.
    viewing_distance_mm: eye-to-screen distance, optional.
    """

    screen_px: tuple[int, int]
    screen_mm: tuple[float, float] | None = None
    viewing_distance_mm: float | None = None

    @property
    def deg_per_px(self) -> float | None:
        """Small-angle degrees per pixel (horizontal scale, square pixels assumed)."""
        if self.screen_mm is None or self.viewing_distance_mm is None:
            return None
        mm_per_px = self.screen_mm[0] / self.screen_px[0]
        return math.degrees(mm_per_px / self.viewing_distance_mm)

    def px_to_deg(self, px: float) -> float | None:
        scale = self.deg_per_px
        return None if scale is None else px * scale

    @property
    def diagonal_px(self) -> float:
        return math.hypot(self.screen_px[0], self.screen_px[1])


GAZE_CSV_COLUMNS = (
    "t_us",
    "left_x", "left_y", "right_x", "right_y",
    "left_pupil_mm", "right_pupil_mm",
    "left_pupil_px_x", "left_pupil_px_y",
    "right_pupil_px_x", "right_pupil_px_y",
    "left_dir_x", "left_dir_y", "left_dir_z",
    "right_dir_x", "right_dir_y", "right_dir_z",
    "valid_left", "valid_right",
)
_DIR_COLUMNS = GAZE_CSV_COLUMNS[11:17]
_REQUIRED_COLUMNS = tuple(c for c in GAZE_CSV_COLUMNS if c not in _DIR_COLUMNS)


@dataclass
class SampleSeries:
    """Columnar binocular gaze samples, strictly increasing in time."""

    t_us: np.ndarray                      # (N,) int64 microseconds
    left_por: np.ndarray                  # (N, 2) px
    right_por: np.ndarray                 # (N, 2) px
    left_pupil_mm: np.ndarray             # (N,)
    right_pupil_mm: np.ndarray            # (N,)
    left_pupil_px: np.ndarray             # (N, 2)
    right_pupil_px: np.ndarray            # (N, 2)
    valid_left: np.ndarray                # (N,) bool
    valid_right: np.ndarray               # (N,) bool
    left_dir: np.ndarray | None = None    # (N, 3) unit vectors when present
    right_dir: np.ndarray | None = None
    geometry: ScreenGeometry | None = None
    n_malformed_rows: int = 0
    n_out_of_bounds: int = 0

    def __post_init__(self) -> None:
        t = np.asarray(self.t_us, dtype=np.int64)
        if t.ndim != 1:
            raise ValueError("t_us must be one-dimensional")
        if len(t) > 1:
            bad = np.nonzero(np.diff(t) <= 0)[0]
            if bad.size:
                raise IngestError(
                    f"timestamps not strictly increasing at row {int(bad[0]) + 1}"
                )
        self.t_us = t

    def __len__(self) -> int:
        return len(self.t_us)

    @property
    def valid_both(self) -> np.ndarray:
        return self.valid_left & self.valid_right

    @property
    def usable(self) -> np.ndarray:
        """Samples with a gaze position: at least one valid eye."""
        return self.valid_left | self.valid_right

    def positions(self) -> np.ndarray:
        """(N, 2) gaze position: mean of the valid eyes, NaN when unusable."""
        pos = np.full((len(self), 2), np.nan)
        both = self.valid_both
        only_l = self.valid_left & ~self.valid_right
        only_r = self.valid_right & ~self.valid_left
        pos[both] = 0.5 * (self.left_por[both] + self.right_por[both])
        pos[only_l] = self.left_por[only_l]
        pos[only_r] = self.right_por[only_r]
        return pos

    def pupil_mm(self) -> np.ndarray:
        """(N,) binocular mean pupil diameter, NaN when no eye is valid."""
        out = np.full(len(self), np.nan)
        lv = self.valid_left & np.isfinite(self.left_pupil_mm)
        rv = self.valid_right & np.isfinite(self.right_pupil_mm)
        both = lv & rv
        out[both] = 0.5 * (self.left_pupil_mm[both] + self.right_pupil_mm[both])
        out[lv & ~rv] = self.left_pupil_mm[lv & ~rv]
        out[rv & ~lv] = self.right_pupil_mm[rv & ~lv]
        return out

    def median_dt_us(self) -> float:
        if len(self) < 2:
            return float("nan")
        return float(np.median(np.diff(self.t_us)))

    def slice_us(self, start_us: int, end_us: int) -> "SampleSeries":
        """Samples with start_us <= t < end_us."""
        m = (self.t_us >= start_us) & (self.t_us < end_us)
        return SampleSeries(
            t_us=self.t_us[m],
            left_por=self.left_por[m],
            right_por=self.right_por[m],
            left_pupil_mm=self.left_pupil_mm[m],
            right_pupil_mm=self.right_pupil_mm[m],
            left_pupil_px=self.left_pupil_px[m],
            right_pupil_px=self.right_pupil_px[m],
            valid_left=self.valid_left[m],
            valid_right=self.valid_right[m],
            left_dir=None if self.left_dir is None else self.left_dir[m],
            right_dir=None if self.right_dir is None else self.right_dir[m],
            geometry=self.geometry,
        )


def _parse_flag(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes"):
        return True
    if t in ("0", "false", "f", "no", ""):
        return False
    raise ValueError(f"not a validity flag: {text!r}")


def _parse_float(text: str) -> float:
    t = text.strip()
    return float("nan") if t == "" else float(t)


def load_samples(path, geometry: ScreenGeometry | None = None) -> SampleSeries:
    """Load a gaze CSV (see GAZE_CSV_COLUMNS; the six *_dir_* columns are optional).

    Malformed rows are skipped and counted on the returned series. Valid samples
    whose on-screen position falls outside [-0.5w, 1.5w] x [-0.5h, 1.5h] are
    marked invalid (requires geometry).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty gaze CSV: header row required") from None
        header = [h.strip() for h in header]
        missing = [c for c in _REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"gaze CSV missing required column(s): {', '.join(missing)}")
        have_dir = all(c in header for c in _DIR_COLUMNS)
        if not have_dir and any(c in header for c in _DIR_COLUMNS):
            raise SchemaError("gaze CSV has a partial set of *_dir_* columns; provide all six or none")
        idx = {c: header.index(c) for c in header}

        rows = []
        n_malformed = 0
        for row in reader:
            if len(row) != len(header):
                n_malformed += 1
                continue
            try:
                t = int(row[idx["t_us"]])
                vals = [
                    _parse_float(row[idx[c]])
                    for c in _REQUIRED_COLUMNS[1:11]
                ]
                flags = (_parse_flag(row[idx["valid_left"]]), _parse_flag(row[idx["valid_right"]]))
                dirs = (
                    [_parse_float(row[idx[c]]) for c in _DIR_COLUMNS] if have_dir else None
                )
            except (ValueError, KeyError):
                n_malformed += 1
                continue
            rows.append((t, vals, flags, dirs))

    if not rows:
        raise IngestError(f"no parseable samples in {path}")

    t_us = np.array([r[0] for r in rows], dtype=np.int64)
    if len(t_us) > 1:
        bad = np.nonzero(np.diff(t_us) <= 0)[0]
        if bad.size:
            raise IngestError(f"timestamps not strictly increasing at row {int(bad[0]) + 2}")
    vals = np.array([r[1] for r in rows], dtype=np.float64)
    valid_left = np.array([r[2][0] for r in rows], dtype=bool)
    valid_right = np.array([r[2][1] for r in rows], dtype=bool)
    dirs = np.array([r[3] for r in rows], dtype=np.float64) if rows[0][3] is not None else None

    left_por = vals[:, 0:2]
    right_por = vals[:, 2:4]

    # a "valid" eye with no finite position is unusable in practice
    valid_left &= np.all(np.isfinite(left_por), axis=1)
    valid_right &= np.all(np.isfinite(right_por), axis=1)

    n_oob = 0
    if geometry is not None:
        w, h = geometry.screen_px
        for v, por in ((valid_left, left_por), (valid_right, right_por)):
            oob = v & ~(
                (por[:, 0] >= -0.5 * w) & (por[:, 0] <= 1.5 * w)
                & (por[:, 1] >= -0.5 * h) & (por[:, 1] <= 1.5 * h)
            )
            n_oob += int(oob.sum())
            v &= ~oob

    if n_malformed:
        warnings.warn(f"skipped {n_malformed} malformed row(s) in {path}", stacklevel=2)

    return SampleSeries(
        t_us=t_us,
        left_por=left_por,
        right_por=right_por,
        left_pupil_mm=vals[:, 4],
        right_pupil_mm=vals[:, 5],
        left_pupil_px=vals[:, 6:8],
        right_pupil_px=vals[:, 8:10],
        valid_left=valid_left,
        valid_right=valid_right,
        left_dir=None if dirs is None else dirs[:, 0:3],
        right_dir=None if dirs is None else dirs[:, 3:6],
        geometry=geometry,
        n_malformed_rows=n_malformed,
        n_out_of_bounds=n_oob,
    )


@dataclass
class Fixation:
    kind = "fixation"
    start_us: int
    end_us: int
    centroid: tuple[float, float]
    dispersion: tuple[float, float]       # per-axis max - min of constituent samples
    mean_pupil_mm: float | None = None

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000.0


@dataclass
class Saccade:
    kind = "saccade"
    start_us: int
    end_us: int
    length_px: float
    direction_px: float                   # signed horizontal displacement
    amplitude_deg: float | None = None
    avg_velocity_deg_s: float | None = None
    peak_velocity_deg_s: float | None = None
    avg_accel_deg_s2: float | None = None
    peak_accel_deg_s2: float | None = None
    peak_decel_deg_s2: float | None = None

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000.0


@dataclass
class Blink:
    kind = "blink"
    start_us: int
    end_us: int
    overlong_ms: float = 500.0

    @property
    def duration_ms(self) -> float:
        return (self.end_us - self.start_us) / 1000.0

    @property
    def overlong(self) -> bool:
        return self.duration_ms > self.overlong_ms


Event = Fixation | Saccade | Blink


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end] index runs where mask is True (inclusive ends)."""
    out = []
    n = len(mask)
    i = 0
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((i, j))
            i = j + 1
        else:
            i += 1
    return out


def _bridged_positions(pos: np.ndarray, usable: np.ndarray, t_us: np.ndarray,
                       max_bridge_us: float) -> np.ndarray:
    """Positions with unusable runs shorter than max_bridge_us linearly bridged.

    Used for velocity computation only; longer runs (blinks) stay NaN.
    """
    out = pos.copy()
    for a, b in _runs(~usable):
        if a == 0 or b == len(pos) - 1:
            continue  # no anchor on one side
        if t_us[b] - t_us[a] >= max_bridge_us:
            continue
        t0, t1 = t_us[a - 1], t_us[b + 1]
        frac = (t_us[a:b + 1] - t0) / (t1 - t0)
        out[a:b + 1] = pos[a - 1] + frac[:, None] * (pos[b + 1] - pos[a - 1])
    return out


def _central_diff(y: np.ndarray, t_s: np.ndarray) -> np.ndarray:
    """Central differences with one-sided endpoints; NaN-propagating."""
    n = len(y)
    d = np.full_like(np.asarray(y, dtype=np.float64), np.nan)
    if n < 2:
        return d
    d[1:-1] = (y[2:] - y[:-2]) / (t_s[2:] - t_s[:-2])
    d[0] = (y[1] - y[0]) / (t_s[1] - t_s[0])
    d[-1] = (y[-1] - y[-2]) / (t_s[-1] - t_s[-2])
    return d


def _smooth3(y: np.ndarray) -> np.ndarray:
    """Centered 3-sample moving average, shrinking at the edges, NaN-aware."""
    if len(y) == 0:
        return np.asarray(y, dtype=np.float64).copy()
    pad = np.array([np.nan])
    stack = np.vstack([
        np.concatenate([pad, y[:-1]]),
        y,
        np.concatenate([y[1:], pad]),
    ])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmean(stack, axis=0)


class EventDetector(BaseEstimator, TransformerMixin):
    """I-DT fixation detection with a velocity-gated saccade pass and blink runs.

    Parameters
    ----------
    max_dispersion_px : I-DT window limit, applied per axis (max - min).
    min_fixation_ms : minimum fixation duration.
    velocity_threshold_deg_s : saccade gate when geometry is known.
    velocity_threshold_px_ms : saccade gate fallback without geometry.
    min_blink_ms : bilateral-invalid runs at least this long become blinks;
        shorter dropouts are linearly bridged for velocity computation only.
    overlong_blink_ms : blinks strictly longer than this are flagged overlong.

    The detector is stateless; fit() is a no-op kept for estimator-API symmetry.
    """

    def __init__(self, max_dispersion_px: float = 100.0, min_fixation_ms: float = 80.0,
                 velocity_threshold_deg_s: float = 40.0, velocity_threshold_px_ms: float = 0.8,
                 min_blink_ms: float = 50.0, overlong_blink_ms: float = 500.0):
        self.max_dispersion_px = max_dispersion_px
        self.min_fixation_ms = min_fixation_ms
        self.velocity_threshold_deg_s = velocity_threshold_deg_s
        self.velocity_threshold_px_ms = velocity_threshold_px_ms
        self.min_blink_ms = min_blink_ms
        self.overlong_blink_ms = overlong_blink_ms

    def fit(self, X=None, y=None):
        return self

    def transform(self, series: SampleSeries) -> list[Event]:
        return self.detect(series)

    def detect(self, series: SampleSeries) -> list[Event]:
        """Detect fixations, saccades and blinks; time-ordered, non-overlapping."""
        if len(series) == 0:
            raise ValueError("empty sample series")
        t = series.t_us
        usable = series.usable
        if not usable.any():
            warnings.warn("all samples invalid; no events detected", stacklevel=2)
            return []

        pos = series.positions()
        pupil = series.pupil_mm()
        min_blink_us = self.min_blink_ms * 1000.0
        min_fix_us = self.min_fixation_ms * 1000.0

        blinks: list[Blink] = []
        for a, b in _runs(~usable):
            dur_us = t[b] - t[a]
            if dur_us >= min_blink_us:
                blinks.append(Blink(int(t[a]), int(t[b]), overlong_ms=self.overlong_blink_ms))

        fixations: list[tuple[int, int]] = []  # sample index spans, inclusive
        for a, b in _runs(usable):
            i = a
            while i <= b:
                j = i
                min_x = max_x = pos[i, 0]
                min_y = max_y = pos[i, 1]
                while j + 1 <= b:
                    nx, ny = pos[j + 1]
                    cand = (
                        max(max_x, nx) - min(min_x, nx),
                        max(max_y, ny) - min(min_y, ny),
                    )
                    if cand[0] > self.max_dispersion_px or cand[1] > self.max_dispersion_px:
                        break
                    j += 1
                    min_x, max_x = min(min_x, nx), max(max_x, nx)
                    min_y, max_y = min(min_y, ny), max(max_y, ny)
                if t[j] - t[i] >= min_fix_us:
                    fixations.append((i, j))
                    i = j + 1
                else:
                    i += 1

        # velocity profile on bridged positions (px/ms), degree scale if possible
        bridged = _bridged_positions(pos, usable, t, min_blink_us)
        t_s = t / 1e6
        vx = _smooth3(_central_diff(bridged[:, 0], t_s))
        vy = _smooth3(_central_diff(bridged[:, 1], t_s))
        speed_px_s = np.hypot(vx, vy)
        deg_per_px = None if series.geometry is None else series.geometry.deg_per_px
        speed_deg_s = None if deg_per_px is None else speed_px_s * deg_per_px
        accel_deg_s2 = None if speed_deg_s is None else _central_diff(speed_deg_s, t_s)

        def _gate(lo: int, hi: int) -> bool:
            if speed_deg_s is not None:
                seg = speed_deg_s[lo:hi + 1]
                thr = self.velocity_threshold_deg_s
            else:
                seg = speed_px_s[lo:hi + 1] / 1000.0  # px/ms
                thr = self.velocity_threshold_px_ms
            seg = seg[np.isfinite(seg)]
            return bool(seg.size) and float(seg.max()) > thr

        saccades: list[Saccade] = []
        blink_spans = [(bl.start_us, bl.end_us) for bl in blinks]
        for (i0, j0), (i1, j1) in zip(fixations, fixations[1:]):
            lo, hi = j0, i1
            gap_start, gap_end = t[lo], t[hi]
            if any(s < gap_end and e > gap_start for s, e in blink_spans):
                continue
            if not _gate(lo, hi):
                continue
            disp = pos[hi] - pos[lo]
            length = float(np.hypot(disp[0], disp[1]))
            sac = Saccade(
                start_us=int(t[lo]), end_us=int(t[hi]),
                length_px=length, direction_px=float(disp[0]),
            )
            if deg_per_px is not None:
                seg_v = speed_deg_s[lo:hi + 1]
                seg_v = seg_v[np.isfinite(seg_v)]
                seg_a = accel_deg_s2[lo:hi + 1]
                seg_a = seg_a[np.isfinite(seg_a)]
                pos_a = seg_a[seg_a > 0]
                neg_a = seg_a[seg_a < 0]
                sac.amplitude_deg = length * deg_per_px
                if seg_v.size:
                    sac.avg_velocity_deg_s = float(seg_v.mean())
                    sac.peak_velocity_deg_s = float(seg_v.max())
                if pos_a.size:
                    sac.avg_accel_deg_s2 = float(pos_a.mean())
                    sac.peak_accel_deg_s2 = float(pos_a.max())
                if neg_a.size:
                    sac.peak_decel_deg_s2 = float(-neg_a.min())
            saccades.append(sac)

        events: list[Event] = []
        for i, j in fixations:
            pts = pos[i:j + 1]
            pup = pupil[i:j + 1]
            pup = pup[np.isfinite(pup)]
            events.append(Fixation(
                start_us=int(t[i]), end_us=int(t[j]),
                centroid=(float(pts[:, 0].mean()), float(pts[:, 1].mean())),
                dispersion=(
                    float(pts[:, 0].max() - pts[:, 0].min()),
                    float(pts[:, 1].max() - pts[:, 1].min()),
                ),
                mean_pupil_mm=float(pup.mean()) if pup.size else None,
            ))
        events.extend(saccades)
        events.extend(blinks)
        events.sort(key=lambda e: (e.start_us, e.end_us))
        return events


def detect_events(series: SampleSeries, **params) -> list[Event]:
    """Functional front end for EventDetector(**params).detect(series)."""
    return EventDetector(**params).detect(series)


@dataclass
class Window:
    """Probe-anchored slice [probe - duration, probe) with its events and quality."""

    person_id: str
    probe_id: str
    start_us: int
    end_us: int
    events: list[Event]
    samples: SampleSeries | None = None
    n_valid_samples: int = 0
    nominal_rate_hz: float = float("nan")
    tracking_ratio: float = float("nan")
    accepted: bool = True
    rejection_reason: str | None = None

    @property
    def duration_s(self) -> float:
        return (self.end_us - self.start_us) / 1e6


def _clip_event(ev: Event, start_us: int, end_us: int) -> Event:
    s = max(ev.start_us, start_us)
    e = min(ev.end_us, end_us)
    return replace(ev, start_us=int(s), end_us=int(e))


def cut_window(series: SampleSeries, events: list[Event], probe_time_us: int,
               duration_s: float, person_id: str = "", probe_id: str = "",
               nominal_rate_hz: float | None = None) -> Window:
    """Cut the probe-anchored window and clip events to it.

    Partial events at the window edges keep their clipped span (durations are
    recomputed from the clipped timestamps); kinematic attributes still refer
    to the full event. A probe earlier than `duration_s` after recording start
    yields accepted=False with reason "insufficient span".
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    end_us = int(probe_time_us)
    start_us = int(round(probe_time_us - duration_s * 1e6))

    clipped = [
        _clip_event(ev, start_us, end_us)
        for ev in events
        if ev.start_us < end_us and ev.end_us > start_us
    ]
    clipped.sort(key=lambda e: (e.start_us, e.end_us))

    sl = series.slice_us(start_us, end_us)
    rate = nominal_rate_hz
    if rate is None:
        dt = series.median_dt_us()
        rate = 1e6 / dt if np.isfinite(dt) and dt > 0 else float("nan")
    n_valid = int(sl.valid_both.sum())

    win = Window(
        person_id=person_id, probe_id=probe_id,
        start_us=start_us, end_us=end_us,
        events=clipped, samples=sl,
        n_valid_samples=n_valid, nominal_rate_hz=float(rate),
    )
    win.tracking_ratio = tracking_ratio(win, rate)
    if len(series) == 0 or start_us < int(series.t_us[0]):
        win.accepted = False
        win.rejection_reason = "insufficient span"
    return win


def tracking_ratio(window: Window, nominal_rate_hz: float) -> float:
    """valid-sample count / (duration * rate), clamped to [0, 1]."""
    if nominal_rate_hz <= 0 or not np.isfinite(nominal_rate_hz):
        raise ValueError("nominal_rate_hz must be positive")
    expected = window.duration_s * nominal_rate_hz
    if expected <= 0:
        return 0.0
    return float(min(1.0, max(0.0, window.n_valid_samples / expected)))


@dataclass(frozen=True)
class QualityRules:
    min_tracking_ratio: float = 0.70
    reject_overlong_blinks: bool = True


def quality_filter(window: Window, rules: QualityRules = QualityRules()) -> Window:
    """Return a copy of the window with accepted/rejection_reason set."""
    out = replace(window)
    if window.rejection_reason == "insufficient span":
        return out
    if window.tracking_ratio < rules.min_tracking_ratio:
        out.accepted = False
        out.rejection_reason = "tracking ratio"
        return out
    if rules.reject_overlong_blinks and any(
        isinstance(ev, Blink) and ev.overlong for ev in window.events
    ):
        out.accepted = False
        out.rejection_reason = "overlong blink"
        return out
    out.accepted = True
    out.rejection_reason = None
    return out
