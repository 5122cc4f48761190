"""EDA and BVP wristband signal features.

EDA is median-filtered, z-standardized within person, and split into a slow
tonic level (centered moving average) plus the fast phasic residual, from
which SCR peaks with amplitude, rise and half-recovery times are extracted.
BVP is standardized and detrended, beat peaks are picked with a refractory
separation, and a sample-held heart-rate series is derived from inter-beat
intervals.  Window-level features are the usual aggregate statistics under
the "eda_*" / "bvp_*" name prefixes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .features import AggStats, aggregate
from .validation import as_float_array

__all__ = [
    "PhysioSeries",
    "EdaDecomposition",
    "ScrPeak",
    "BvpResult",
    "decompose_eda",
    "scr_peaks",
    "bvp_features",
    "physio_features",
]


@dataclass(frozen=True)
class PhysioSeries:
    """Uniformly sampled wristband channel for one person."""

    person_id: str
    channel: str                 # "EDA" or "BVP"
    values: np.ndarray
    rate_hz: float | None = None
    t0_us: int = 0

    def __post_init__(self) -> None:
        if self.channel not in ("EDA", "BVP"):
            raise ValueError("channel must be 'EDA' or 'BVP'")
        rate = self.rate_hz
        if rate is None:
            rate = 4.0 if self.channel == "EDA" else 64.0
        if rate <= 0:
            raise ValueError("rate_hz must be > 0")
        v = as_float_array(self.values, "values").ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rate_hz", float(rate))

    def __len__(self) -> int:
        return int(self.values.shape[0])


def _median3(x: np.ndarray) -> np.ndarray:
    if len(x) < 3:
        return x.copy()
    padded = np.concatenate([x[:1], x, x[-1:]])
    stacked = np.stack([padded[:-2], padded[1:-1], padded[2:]])
    return np.median(stacked, axis=0)


def _zscore(x: np.ndarray) -> np.ndarray | None:
    sd = float(x.std())
    if sd == 0:
        return None
    return (x - x.mean()) / sd


def _moving_average(x: np.ndarray, half: int) -> np.ndarray:
    """Centered moving average over [i-half, i+half], truncated at the edges."""
    n = len(x)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half, n - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


@dataclass(frozen=True)
class EdaDecomposition:
    cleaned: np.ndarray
    tonic: np.ndarray
    phasic: np.ndarray


def decompose_eda(series: PhysioSeries, tonic_window_s: float = 4.0) -> EdaDecomposition:
    """Split an EDA series into cleaned, tonic, and phasic components.

    cleaned = z-standardized median-filtered raw signal (mean 0, sd 1 for
    non-constant input); tonic = centered moving average spanning
    tonic_window_s/2 on each side, truncated at the edges; phasic is the
    exact residual cleaned - tonic.
    """
    if series.channel != "EDA":
        raise ValueError("expected an EDA series")
    if len(series) < 8:
        raise ValueError("need at least 8 samples")
    filtered = _median3(series.values)
    z = _zscore(filtered)
    if z is None:
        warnings.warn("constant EDA signal: cleaned defined as all-zero")
        z = np.zeros(len(series))
    half = int(round(series.rate_hz * tonic_window_s / 2.0))
    tonic = _moving_average(z, half)
    phasic = z - tonic
    # cleaned is assembled from its own parts so tonic + phasic == cleaned
    # holds bitwise; it differs from the plain z-score by at most 1 ulp
    return EdaDecomposition(cleaned=tonic + phasic, tonic=tonic, phasic=phasic)


@dataclass(frozen=True)
class ScrPeak:
    onset_us: int
    peak_us: int
    amplitude: float             # z-units above the preceding trough
    rise_time_s: float
    recovery_time_s: float | None

    def __post_init__(self) -> None:
        if self.peak_us <= self.onset_us:
            raise ValueError("peak must follow onset")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be > 0")


def scr_peaks(phasic: np.ndarray, rate_hz: float, t0_us: int = 0,
              min_amplitude: float = 0.05) -> list[ScrPeak]:
    """Detect skin-conductance responses in a phasic signal.

    A local maximum is accepted when it exceeds the minimum since the last
    accepted peak (the preceding trough) by at least min_amplitude.  Rise
    time runs from that trough; recovery time is the first later sample at
    or below peak - amplitude/2, missing when the signal never falls that
    far before the series ends.
    """
    x = as_float_array(phasic, "phasic").ravel()
    if rate_hz <= 0:
        raise ValueError("rate_hz must be > 0")
    dt_us = 1e6 / rate_hz
    peaks: list[ScrPeak] = []
    search_from = 0
    for m in range(1, len(x) - 1):
        if not (x[m] > x[m - 1] and x[m] >= x[m + 1]):
            continue
        segment = x[search_from:m + 1]
        trough = search_from + int(np.argmin(segment))
        amplitude = float(x[m] - x[trough])
        if amplitude < min_amplitude:
            continue
        target = x[m] - amplitude / 2.0
        recovery = None
        for r in range(m + 1, len(x)):
            if x[r] <= target:
                recovery = (r - m) / rate_hz
                break
        peaks.append(ScrPeak(
            onset_us=int(round(t0_us + trough * dt_us)),
            peak_us=int(round(t0_us + m * dt_us)),
            amplitude=amplitude,
            rise_time_s=(m - trough) / rate_hz,
            recovery_time_s=recovery,
        ))
        search_from = m
    return peaks


@dataclass(frozen=True)
class BvpResult:
    cleaned: np.ndarray
    peak_indices: np.ndarray
    peak_times_us: np.ndarray
    rate_bpm: np.ndarray | None  # per-sample, missing with < 2 beats


def bvp_features(series: PhysioSeries, detrend_window_s: float = 1.0,
                 min_separation_s: float = 0.33) -> BvpResult:
    """Clean a BVP series, pick beat peaks, and derive a heart-rate series.

    cleaned = z-standardized raw minus its centered moving average over
    detrend_window_s.  Beat peaks are local maxima accepted in descending
    amplitude order subject to the minimum separation.  The rate series is
    60/inter-beat-interval, held from each beat to the next and backfilled
    before the first beat; with fewer than 2 beats the rate is missing.
    """
    if series.channel != "BVP":
        raise ValueError("expected a BVP series")
    if len(series) < 2 * series.rate_hz:
        raise ValueError("need at least 2 seconds of data")
    z = _zscore(series.values)
    if z is None:
        warnings.warn("constant BVP signal: cleaned defined as all-zero")
        cleaned = np.zeros(len(series))
    else:
        half = int(round(series.rate_hz * detrend_window_s / 2.0))
        cleaned = z - _moving_average(z, half)

    candidates = [m for m in range(1, len(cleaned) - 1)
                  if cleaned[m] > cleaned[m - 1] and cleaned[m] >= cleaned[m + 1]]
    candidates.sort(key=lambda m: (-cleaned[m], m))
    min_gap = min_separation_s * series.rate_hz
    accepted: list[int] = []
    for m in candidates:
        if all(abs(m - a) >= min_gap for a in accepted):
            accepted.append(m)
    accepted.sort()
    peaks = np.asarray(accepted, dtype=np.int64)
    dt_us = 1e6 / series.rate_hz
    times = (series.t0_us + peaks * dt_us).astype(np.int64)

    if len(peaks) < 2:
        return BvpResult(cleaned=cleaned, peak_indices=peaks,
                         peak_times_us=times, rate_bpm=None)
    rate = np.empty(len(cleaned))
    ibis_s = np.diff(peaks) / series.rate_hz
    bpm = 60.0 / ibis_s
    rate[: peaks[1]] = bpm[0]    # backfill before the second beat
    for k in range(1, len(peaks) - 1):
        rate[peaks[k]: peaks[k + 1]] = bpm[k]
    rate[peaks[-1]:] = bpm[-1]
    return BvpResult(cleaned=cleaned, peak_indices=peaks,
                     peak_times_us=times, rate_bpm=rate)


def _emit(values: dict, prefix: str, stats: AggStats) -> None:
    for stat, v in stats.as_dict().items():
        values[f"{prefix}.{stat}"] = v


def physio_features(eda: PhysioSeries | None = None,
                    bvp: PhysioSeries | None = None,
                    min_scr_amplitude: float = 0.05) -> dict[str, float | None]:
    """Window-level physiological features under eda_* / bvp_* names.

    Emits aggregate statistics of the EDA cleaned/tonic/phasic components and
    of SCR amplitudes, rise and recovery times plus an SCR count, and of the
    cleaned BVP signal and heart-rate series plus a beat count.  Channels not
    supplied contribute nothing.
    """
    values: dict[str, float | None] = {}
    if eda is not None:
        dec = decompose_eda(eda)
        _emit(values, "eda_cleaned", aggregate(dec.cleaned))
        _emit(values, "eda_tonic", aggregate(dec.tonic))
        _emit(values, "eda_phasic", aggregate(dec.phasic))
        peaks = scr_peaks(dec.phasic, eda.rate_hz, t0_us=eda.t0_us,
                          min_amplitude=min_scr_amplitude)
        values["eda_scr.count"] = float(len(peaks))
        _emit(values, "eda_scr_amplitude", aggregate([p.amplitude for p in peaks]))
        _emit(values, "eda_scr_rise_s", aggregate([p.rise_time_s for p in peaks]))
        _emit(values, "eda_scr_recovery_s",
              aggregate([p.recovery_time_s for p in peaks if p.recovery_time_s is not None]))
    if bvp is not None:
        res = bvp_features(bvp)
        _emit(values, "bvp_cleaned", aggregate(res.cleaned))
        values["bvp_beat.count"] = float(len(res.peak_indices))
        rate = res.rate_bpm if res.rate_bpm is not None else []
        _emit(values, "bvp_rate_bpm", aggregate(rate))
    return values
