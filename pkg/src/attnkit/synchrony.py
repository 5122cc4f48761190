"""Gaze synchrony: density-map divergence, scanpath similarity, and ISC.

Implements three families of pairwise gaze-coupling measures plus the
group-scoring scheme that turns them into per-person, per-probe scores:

* Kullback-Leibler divergence between Gaussian gaze density maps.
* MultiMatch-style scanpath similarity over aligned saccade vectors
  (shape, direction, length, position, duration).
* Inter-subject correlation (ISC) of gaze x, y and pupil diameter.

Raw scores are z-standardized within each probe so that values are
comparable across stimuli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .gaze import SampleSeries, ScreenGeometry
from .validation import as_float_array

__all__ = [
    "MEASURES",
    "Scanpath",
    "DensityMap",
    "MultiMatchResult",
    "SynchronyScore",
    "scanpath_from_events",
    "density_map",
    "kl_divergence",
    "multimatch",
    "isc_pair",
    "resample_channels",
    "group_scores",
]

MEASURES = (
    "KLD",
    "MM_overall",
    "MM_shape",
    "MM_direction",
    "MM_length",
    "MM_position",
    "MM_duration",
    "ISC",
)

DEFAULT_GRID = (64, 36)  # (columns, rows)


@dataclass(frozen=True)
class Scanpath:
    """Ordered fixation sequence: positions in px plus durations in ms."""

    positions: np.ndarray      # (n, 2)
    durations_ms: np.ndarray   # (n,)
    screen_px: tuple[int, int]

    def __post_init__(self) -> None:
        pos = np.atleast_2d(as_float_array(self.positions, "positions"))
        dur = as_float_array(self.durations_ms, "durations_ms").ravel()
        if pos.shape[0] == 0:
            raise ValueError("no fixations")
        if pos.shape[1] != 2:
            raise ValueError("positions must be an (n, 2) array")
        if pos.shape[0] != dur.shape[0]:
            raise ValueError("positions and durations_ms must have equal length")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if not np.all(np.isfinite(dur)) or np.any(dur <= 0):
            raise ValueError("durations_ms must be finite and > 0")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "durations_ms", dur)

    def __len__(self) -> int:
        return int(self.positions.shape[0])


def scanpath_from_events(events: Sequence, screen_px: tuple[int, int]) -> Scanpath:
    """Build a Scanpath from the fixations in a detected event list."""
    pos = [ev.centroid for ev in events if ev.kind == "fixation"]
    dur = [ev.duration_ms for ev in events if ev.kind == "fixation"]
    if not pos:
        raise ValueError("no fixations")
    return Scanpath(np.asarray(pos, float), np.asarray(dur, float), screen_px)


@dataclass(frozen=True)
class DensityMap:
    """Normalized spatial gaze distribution on a regular grid.

    grid is row-major with shape (rows, columns) = (grid_h, grid_w); cell
    [r, c] covers the screen rectangle starting at (c*cell_w, r*cell_h).
    """

    grid: np.ndarray
    cell_size_px: tuple[float, float]
    sigma_px: float

    def __post_init__(self) -> None:
        g = as_float_array(self.grid, "grid")
        if g.ndim != 2:
            raise ValueError("grid must be 2-D")
        if np.any(g <= 0):
            raise ValueError("grid entries must be > 0 after regularization")
        if abs(float(g.sum()) - 1.0) > 1e-9:
            raise ValueError("grid must sum to 1")
        object.__setattr__(self, "grid", g)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


def density_map(scanpath: Scanpath, grid: tuple[int, int] = DEFAULT_GRID,
                sigma_px: float | None = None, weighting: str = "count",
                geometry: ScreenGeometry | None = None) -> DensityMap:
    """Superpose one isotropic Gaussian per fixation on a (columns, rows) grid.

    Weights are 1 per fixation in "count" mode and the fixation duration in
    milliseconds in "duration" mode.  Every cell receives epsilon = 1e-12
    before normalizing the grid to sum 1, so downstream divergences stay
    finite.  sigma defaults to 1 degree of visual angle when geometry allows
    the conversion, else 2% of the screen width.
    """
    if len(scanpath) == 0:
        raise ValueError("no fixations")
    if weighting not in ("count", "duration"):
        raise ValueError("weighting must be 'count' or 'duration'")
    gw, gh = int(grid[0]), int(grid[1])
    if gw < 1 or gh < 1:
        raise ValueError("grid must have at least one cell per axis")
    w, h = scanpath.screen_px
    if sigma_px is None:
        scale = geometry.deg_per_px if geometry is not None else None
        sigma_px = (1.0 / scale) if scale else 0.02 * w
    if sigma_px <= 0:
        raise ValueError("sigma_px must be > 0")

    cell_w = w / gw
    cell_h = h / gh
    xc = (np.arange(gw) + 0.5) * cell_w          # cell centre columns
    yc = (np.arange(gh) + 0.5) * cell_h          # cell centre rows
    weights = np.ones(len(scanpath)) if weighting == "count" else scanpath.durations_ms

    out = np.zeros((gh, gw))
    inv = 1.0 / (2.0 * sigma_px * sigma_px)
    for (fx, fy), wgt in zip(scanpath.positions, weights):
        gx = np.exp(-((xc - fx) ** 2) * inv)
        gy = np.exp(-((yc - fy) ** 2) * inv)
        out += wgt * np.outer(gy, gx)
    out += 1e-12
    out /= out.sum()
    return DensityMap(grid=out, cell_size_px=(cell_w, cell_h), sigma_px=float(sigma_px))


def _as_distribution(m) -> np.ndarray:
    if isinstance(m, DensityMap):
        return m.grid
    return as_float_array(m, "distribution")


def kl_divergence(p, q, symmetrize: bool = True) -> float:
    """KL divergence in nats between two normalized distributions.

    Accepts DensityMap or plain arrays of matching shape.  Cells with zero
    mass in the first argument contribute nothing; the symmetrized variant is
    the arithmetic mean of both directions.
    """
    pa = _as_distribution(p)
    qa = _as_distribution(q)
    if pa.shape != qa.shape:
        raise ValueError(f"shape mismatch: {pa.shape} vs {qa.shape}")

    def directed(a: np.ndarray, b: np.ndarray) -> float:
        mask = a > 0
        a = a[mask]
        b = b[mask]
        with np.errstate(divide="ignore"):
            return float(np.sum(a * np.log(a / b)))

    if not symmetrize:
        return directed(pa, qa)
    return 0.5 * (directed(pa, qa) + directed(qa, pa))


@dataclass(frozen=True)
class MultiMatchResult:
    shape: float
    direction: float
    length: float
    position: float
    duration: float
    overall: float

    def as_dict(self) -> dict[str, float]:
        return {
            "shape": self.shape,
            "direction": self.direction,
            "length": self.length,
            "position": self.position,
            "duration": self.duration,
            "overall": self.overall,
        }


def _align(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost monotone path over moves down/right/diagonal."""
    m, n = cost.shape
    acc = np.empty_like(cost)
    acc[0, 0] = cost[0, 0]
    for i in range(1, m):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
    for j in range(1, n):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, m):
        for j in range(1, n):
            acc[i, j] = cost[i, j] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])

    path = [(m - 1, n - 1)]
    i, j = m - 1, n - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # diagonal preferred on ties so identical inputs align pairwise
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path


def multimatch(a: Scanpath, b: Scanpath) -> MultiMatchResult:
    """Five-dimension scanpath similarity over DP-aligned saccade vectors.

    Dissimilarities: shape = |va - vb|, direction = angular difference,
    length = ||va| - |vb||, position = distance between the saccades' start
    fixations, duration = absolute start-fixation duration difference.
    Normalization: shape and length by twice the screen diagonal, direction
    by pi, position by the diagonal, duration by the larger duration of the
    pair.  similarity = 1 - mean normalized dissimilarity, clamped to [0, 1].
    """
    if len(a) < 2 or len(b) < 2:
        raise ValueError("scanpath too short")
    if tuple(a.screen_px) != tuple(b.screen_px):
        raise ValueError("screen size mismatch")
    diag = math.hypot(a.screen_px[0], a.screen_px[1])

    va = np.diff(a.positions, axis=0)
    vb = np.diff(b.positions, axis=0)
    cost = np.linalg.norm(va[:, None, :] - vb[None, :, :], axis=2)
    path = _align(cost)

    shape_d, direction_d, length_d, position_d, duration_d = [], [], [], [], []
    for i, j in path:
        shape_d.append(float(np.linalg.norm(va[i] - vb[j])) / (2 * diag))
        ang = abs(math.atan2(va[i][1], va[i][0]) - math.atan2(vb[j][1], vb[j][0]))
        ang %= 2 * math.pi
        direction_d.append(min(ang, 2 * math.pi - ang) / math.pi)
        length_d.append(
            abs(float(np.linalg.norm(va[i])) - float(np.linalg.norm(vb[j]))) / (2 * diag))
        position_d.append(float(np.linalg.norm(a.positions[i] - b.positions[j])) / diag)
        dmax = max(a.durations_ms[i], b.durations_ms[j])
        duration_d.append(abs(a.durations_ms[i] - b.durations_ms[j]) / dmax if dmax > 0 else 0.0)

    def sim(dissims: list[float]) -> float:
        return float(min(1.0, max(0.0, 1.0 - np.mean(dissims))))

    sims = [sim(shape_d), sim(direction_d), sim(length_d), sim(position_d), sim(duration_d)]
    return MultiMatchResult(*sims, overall=float(np.mean(sims)))


def resample_channels(series: SampleSeries, clock_us: np.ndarray) -> np.ndarray:
    """Linear-interpolate gaze x, y and pupil onto a common clock.

    Returns an (n_frames, 3) array; frames outside the span of usable samples
    are NaN.  Intended as the preprocessing step for isc_pair.
    """
    clock = np.asarray(clock_us, dtype=np.float64)
    pos = series.positions()
    pupil = series.pupil_mm()
    t = series.t_us.astype(np.float64)
    out = np.full((clock.shape[0], 3), np.nan)
    for col, values in enumerate((pos[:, 0], pos[:, 1], pupil)):
        ok = np.isfinite(values)
        if ok.sum() == 0:
            continue
        tv = t[ok]
        out[:, col] = np.interp(clock, tv, values[ok], left=np.nan, right=np.nan)
    return out


def isc_pair(a: np.ndarray, b: np.ndarray) -> float | None:
    """Mean Pearson correlation of the shared channels of two aligned series.

    a and b are (n_frames, n_channels) arrays on a common clock; each
    channel's correlation uses only rows finite in both.  Channels with
    fewer than 2 shared frames or zero variance are skipped; if nothing
    remains the result is None.
    """
    a = np.atleast_2d(as_float_array(a, "a"))
    b = np.atleast_2d(as_float_array(b, "b"))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    rs = []
    for c in range(a.shape[1]):
        mask = np.isfinite(a[:, c]) & np.isfinite(b[:, c])
        if mask.sum() < 2:
            continue
        xa = a[mask, c]
        xb = b[mask, c]
        if np.ptp(xa) == 0 or np.ptp(xb) == 0:
            continue
        rs.append(float(np.corrcoef(xa, xb)[0, 1]))
    if not rs:
        return None
    return float(np.mean(rs))


@dataclass(frozen=True)
class SynchronyScore:
    person_id: str
    probe_id: str
    measure: str
    raw: float | None
    z: float | None
    peer_group: str
    n_peers: int
    reason: str | None = None


def _pair_function(measure: str, symmetrize: bool) -> Callable:
    if measure == "KLD":
        return lambda p, q: kl_divergence(p, q, symmetrize=symmetrize)
    if measure == "ISC":
        return isc_pair
    if measure.startswith("MM_"):
        field = measure[3:]
        if field not in ("overall", "shape", "direction", "length", "position", "duration"):
            raise ValueError(f"unknown measure {measure!r}")
        return lambda p, q: getattr(multimatch(p, q), field)
    raise ValueError(f"unknown measure {measure!r}")


def group_scores(items: Mapping[str, object], labels: Mapping[str, str],
                 measure: str = "MM_overall", probe_id: str = "",
                 pair_fn: Callable | None = None, symmetrize: bool = True,
                 grid: tuple[int, int] = DEFAULT_GRID, sigma_px: float | None = None,
                 weighting: str = "count",
                 geometry: ScreenGeometry | None = None) -> list[SynchronyScore]:
    """Score each person against the same-label peers of one probe.

    items maps person_id to the measure's input object: a Scanpath for the
    KLD and MM_* measures, or an aligned (n_frames, channels) array for ISC.
    A person's raw score is the mean pairwise value against every peer
    sharing their attention label; persons without peers get a missing score
    with reason "no peers".  Raw scores are z-standardized across all scored
    persons of the probe (sample sd; zero variance maps every z to 0; a
    single scored person gets a missing z).
    """
    if pair_fn is None:
        pair = _pair_function(measure, symmetrize)
        if measure == "KLD":
            items = {
                pid: density_map(sp, grid=grid, sigma_px=sigma_px,
                                 weighting=weighting, geometry=geometry)
                for pid, sp in items.items()
            }
    else:
        pair = pair_fn

    persons = sorted(items)
    missing = set(persons) - set(labels)
    if missing:
        raise ValueError(f"missing labels for: {sorted(missing)}")

    raws: dict[str, float | None] = {}
    peers_used: dict[str, int] = {}
    reasons: dict[str, str | None] = {}
    for p in persons:
        peers = [q for q in persons if q != p and labels[q] == labels[p]]
        if not peers:
            raws[p], peers_used[p], reasons[p] = None, 0, "no peers"
            continue
        vals = [pair(items[p], items[q]) for q in peers]
        vals = [v for v in vals if v is not None]
        if not vals:
            raws[p], peers_used[p], reasons[p] = None, 0, "undefined pairs"
            continue
        raws[p] = float(np.mean(vals))
        peers_used[p] = len(vals)
        reasons[p] = None

    scored = [p for p in persons if raws[p] is not None]
    zs: dict[str, float | None] = {p: None for p in persons}
    if len(scored) >= 2:
        arr = np.array([raws[p] for p in scored])
        sd = float(arr.std(ddof=1))
        mu = float(arr.mean())
        for p in scored:
            zs[p] = 0.0 if sd == 0 else (raws[p] - mu) / sd

    return [
        SynchronyScore(person_id=p, probe_id=probe_id, measure=measure,
                       raw=raws[p], z=zs[p], peer_group=labels[p],
                       n_peers=peers_used[p], reason=reasons[p])
        for p in persons
    ]
