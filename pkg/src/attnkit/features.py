"""Per-window gaze features and named aggregate statistics.

Every distribution-valued feature is summarised by the same eleven statistics
(AggStats); scalar features (counts, proportions, per-axis dispersion) are
emitted as single entries. Missing values are explicit (None), never NaN.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .gaze import Blink, Event, Fixation, Saccade, SampleSeries, ScreenGeometry, Window

AGG_STAT_NAMES = (
    "min", "max", "mean", "median", "std", "q25", "q75",
    "skew", "kurtosis", "range", "count",
)


@dataclass(frozen=True)
class AggStats:
    """Summary statistics of a real-valued series.

    std is the sample standard deviation (n-1); skew is adjusted
    Fisher-Pearson; kurtosis is adjusted excess kurtosis. All three are
    defined as 0 for constant input and whenever the unbiased estimator
    needs more points than given (n < 2, 3, 4 respectively). Quantiles use
    the averaged-inverted-CDF convention, which is stable under duplicating
    the sample and reduces to the usual median. An empty series yields
    all-missing entries with count 0.
    """

    min: float | None = None
    max: float | None = None
    mean: float | None = None
    median: float | None = None
    std: float | None = None
    q25: float | None = None
    q75: float | None = None
    skew: float | None = None
    kurtosis: float | None = None
    range: float | None = None
    count: int = 0

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def aggregate(values, stats=None) -> AggStats:
    """Compute AggStats over a list of reals; `stats` optionally restricts
    which entries are filled (the rest stay missing)."""
    x = np.asarray([v for v in values if v is not None], dtype=np.float64)
    x = np.sort(x[np.isfinite(x)])  # fixed summation order: results do not
    n = len(x)                      # depend on input ordering
    if n == 0:
        return AggStats(count=0)

    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered ** 2))
    constant = x[0] == x[-1] or m2 <= 0.0  # exact check: x is sorted

    if n >= 2 and not constant:
        std = math.sqrt(float(np.sum(centered ** 2)) / (n - 1))
    else:
        std = 0.0
    if n >= 3 and not constant:
        g1 = float(np.mean(centered ** 3)) / m2 ** 1.5
        skew = g1 * math.sqrt(n * (n - 1)) / (n - 2)
    else:
        skew = 0.0
    if n >= 4 and not constant:
        g2 = float(np.mean(centered ** 4)) / m2 ** 2 - 3.0
        kurt = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * g2 + 6.0)
    else:
        kurt = 0.0

    full = AggStats(
        min=float(x.min()),
        max=float(x.max()),
        mean=mean,
        median=float(np.median(x)),
        std=std,
        q25=float(np.quantile(x, 0.25, method="averaged_inverted_cdf")),
        q75=float(np.quantile(x, 0.75, method="averaged_inverted_cdf")),
        skew=skew,
        kurtosis=kurt,
        range=float(x.max() - x.min()),
        count=n,
    )
    if stats is None:
        return full
    keep = set(stats) | {"count"}
    return AggStats(**{k: (v if k in keep else None) for k, v in full.as_dict().items()
                       if k != "count"}, count=n)


FEATURE_GROUPS = ("fixation", "saccade", "blink", "pupil", "vergence", "physio", "external")


@dataclass
class FeatureVector:
    """Named per-window features; missing entries are explicit None values."""

    person_id: str
    probe_id: str
    values: dict[str, float | None]

    def __post_init__(self) -> None:
        for name, v in self.values.items():
            if v is not None and not math.isfinite(v):
                raise ValueError(f"feature {name!r} is non-finite; use None for missing")

    @staticmethod
    def group_of(name: str) -> str:
        """Provenance group derived from the feature-name prefix."""
        head = name.split(".", 1)[0].split("_", 1)[0]
        if head in ("fixation", "fixsac"):
            return "fixation"
        if head == "saccade":
            return "saccade"
        if head == "blink":
            return "blink"
        if head == "pupil":
            return "pupil"
        if head == "vergence":
            return "vergence"
        if head in ("eda", "bvp"):
            return "physio"
        return "external"


def vergence(sample_left_dir, sample_right_dir, left_pupil_px, right_pupil_px):
    """Per-sample vergence angle and pupil-image distance.

    angle = arccos(clamp(l . r, -1, 1)) for unit gaze direction vectors;
    distance = Euclidean distance between the pupil image positions. Either
    entry is None when its inputs are unavailable.
    """
    angle = None
    if sample_left_dir is not None and sample_right_dir is not None:
        l = np.asarray(sample_left_dir, dtype=np.float64)
        r = np.asarray(sample_right_dir, dtype=np.float64)
        if np.all(np.isfinite(l)) and np.all(np.isfinite(r)):
            angle = float(np.arccos(np.clip(float(l @ r), -1.0, 1.0)))
    dist = None
    if left_pupil_px is not None and right_pupil_px is not None:
        lp = np.asarray(left_pupil_px, dtype=np.float64)
        rp = np.asarray(right_pupil_px, dtype=np.float64)
        if np.all(np.isfinite(lp)) and np.all(np.isfinite(rp)):
            dist = float(np.hypot(*(lp - rp)))
    return {"angle_rad": angle, "pupil_distance_px": dist}


def pupil_baseline(series: SampleSeries, baseline_ms: float = 50.0) -> float | None:
    """Mean binocular pupil diameter over the first baseline_ms of a recording.

    Returns None (with a warning) when no valid pupil sample falls in the span.
    """
    if len(series) == 0:
        warnings.warn("empty series: no pupil baseline", stacklevel=2)
        return None
    limit = series.t_us[0] + baseline_ms * 1000.0
    mask = series.t_us <= limit
    pupil = series.pupil_mm()[mask]
    pupil = pupil[np.isfinite(pupil)]
    if pupil.size == 0:
        warnings.warn("no valid pupil samples in the baseline span", stacklevel=2)
        return None
    return float(pupil.mean())


def pupil_baseline_correct(values, baseline_mm: float | None):
    """Subtract the person's baseline from each pupil value; None passes through."""
    if baseline_mm is None:
        return [None for _ in values]
    return [None if v is None else v - baseline_mm for v in values]


def _rms_dispersion(centroids: np.ndarray) -> tuple[float, float]:
    """Per-axis root-mean-square distance of fixation centroids to their mean."""
    mean = centroids.mean(axis=0)
    sq = (centroids - mean) ** 2
    return (float(np.sqrt(sq[:, 0].mean())), float(np.sqrt(sq[:, 1].mean())))


def _pair_fixation_saccade_ratios(events: list[Event]) -> list[float]:
    """Each fixation's duration divided by the duration of the saccade that
    immediately follows it (before the next fixation); a trailing fixation
    without such a saccade is skipped."""
    ratios = []
    for k, ev in enumerate(events):
        if not isinstance(ev, Fixation):
            continue
        for nxt in events[k + 1:]:
            if isinstance(nxt, Fixation):
                break
            if isinstance(nxt, Saccade):
                if nxt.duration_ms > 0:
                    ratios.append(ev.duration_ms / nxt.duration_ms)
                break
    return ratios


def _emit(values: dict, prefix: str, stats: AggStats) -> None:
    for stat, v in stats.as_dict().items():
        values[f"{prefix}.{stat}"] = v


def extract_feature_vector(window: Window, geometry: ScreenGeometry | None = None,
                           pupil_baseline_mm: float | None = None) -> FeatureVector:
    """Compute the per-window gaze feature set from an accepted window.

    Degree-valued saccade features are missing without screen geometry;
    baseline-corrected pupil features are missing without a baseline.
    """
    if not window.accepted:
        raise ValueError(f"window not accepted ({window.rejection_reason})")
    if geometry is None and window.samples is not None:
        geometry = window.samples.geometry

    fixations = [e for e in window.events if isinstance(e, Fixation)]
    saccades = [e for e in window.events if isinstance(e, Saccade)]
    blinks = [e for e in window.events if isinstance(e, Blink)]

    values: dict[str, float | None] = {}
    values["fixation.count"] = float(len(fixations))
    _emit(values, "fixation_duration_ms", aggregate([f.duration_ms for f in fixations]))
    if fixations:
        dx, dy = _rms_dispersion(np.asarray([f.centroid for f in fixations]))
        values["fixation_dispersion.x"] = dx
        values["fixation_dispersion.y"] = dy
    else:
        values["fixation_dispersion.x"] = None
        values["fixation_dispersion.y"] = None

    _emit(values, "fixsac_ratio", aggregate(_pair_fixation_saccade_ratios(window.events)))

    _emit(values, "saccade_duration_ms", aggregate([s.duration_ms for s in saccades]))
    _emit(values, "saccade_length_px", aggregate([s.length_px for s in saccades]))
    _emit(values, "saccade_amplitude_deg", aggregate([s.amplitude_deg for s in saccades]))
    _emit(values, "saccade_velocity_avg_deg_s", aggregate([s.avg_velocity_deg_s for s in saccades]))
    _emit(values, "saccade_velocity_peak_deg_s", aggregate([s.peak_velocity_deg_s for s in saccades]))
    _emit(values, "saccade_accel_avg_deg_s2", aggregate([s.avg_accel_deg_s2 for s in saccades]))
    _emit(values, "saccade_accel_peak_deg_s2", aggregate([s.peak_accel_deg_s2 for s in saccades]))
    _emit(values, "saccade_decel_peak_deg_s2", aggregate([s.peak_decel_deg_s2 for s in saccades]))
    if saccades:
        values["saccade.regression_proportion"] = float(
            sum(1 for s in saccades if s.direction_px < 0) / len(saccades)
        )
    else:
        values["saccade.regression_proportion"] = None

    values["blink.count"] = float(len(blinks))
    _emit(values, "blink_duration_ms", aggregate([b.duration_ms for b in blinks]))

    angles = np.empty(0)
    distances = np.empty(0)
    s = window.samples
    if s is not None and len(s) > 0:
        both = s.valid_both
        if s.left_dir is not None and s.right_dir is not None:
            dots = np.sum(s.left_dir[both] * s.right_dir[both], axis=1)
            angles = np.arccos(np.clip(dots[np.isfinite(dots)], -1.0, 1.0))
        diff = s.left_pupil_px[both] - s.right_pupil_px[both]
        d = np.hypot(diff[:, 0], diff[:, 1])
        distances = d[np.isfinite(d)]
    _emit(values, "vergence_angle_rad", aggregate(angles))
    _emit(values, "vergence_pupil_distance_px", aggregate(distances))

    corrected = pupil_baseline_correct(
        [f.mean_pupil_mm for f in fixations], pupil_baseline_mm
    )
    _emit(values, "pupil_mm", aggregate([c for c in corrected if c is not None]))

    return FeatureVector(person_id=window.person_id, probe_id=window.probe_id, values=values)
