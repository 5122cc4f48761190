"""Independent brute-force references used to pin expected values in tests.

Everything here is deliberately written the slow, obvious way and kept free of
attnkit internals (only its public data containers are constructed).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from attnkit.gaze import SampleSeries, ScreenGeometry

# ---------------------------------------------------------------------------
# stepwise gaze traces with analytically known events
# ---------------------------------------------------------------------------

DT_US = 4000  # 250 Hz


def make_series(t_us, pos, valid, pupil_mm=None, geometry=None):
    """Assemble a binocular SampleSeries with identical eyes."""
    t_us = np.asarray(t_us, dtype=np.int64)
    pos = np.asarray(pos, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    n = len(t_us)
    if pupil_mm is None:
        pupil_mm = np.full(n, 3.0)
    pupil_mm = np.asarray(pupil_mm, dtype=np.float64)
    return SampleSeries(
        t_us=t_us,
        left_por=pos.copy(),
        right_por=pos.copy(),
        left_pupil_mm=pupil_mm.copy(),
        right_pupil_mm=pupil_mm.copy(),
        left_pupil_px=pos.copy(),
        right_pupil_px=pos.copy() + np.array([60.0, 0.0]),
        valid_left=valid.copy(),
        valid_right=valid.copy(),
        geometry=geometry,
    )


def random_stepwise_plan(rng, n_fix_lo=3, n_fix_hi=8, allow_short=True):
    """Random plan of fix/drop/blink segments obeying the generator contract:

    consecutive fixation centres at least 200 px apart, jitter <= 30 px,
    drops of 1-3 samples, blinks of 15-160 samples (60 ms - 640 ms at 250 Hz).
    """
    n_fix = int(rng.integers(n_fix_lo, n_fix_hi + 1))
    plan = []
    prev_center = None
    for k in range(n_fix):
        while True:
            c = rng.uniform((100, 100), (1820, 980))
            if prev_center is None or np.hypot(*(c - prev_center)) >= 200:
                break
        prev_center = c
        if allow_short and k not in (0, n_fix - 1) and rng.random() < 0.2:
            n_samples = int(rng.integers(3, 15))     # < 80 ms: not a fixation
        else:
            n_samples = int(rng.integers(50, 200))   # 196 ms - 796 ms
        plan.append(("fix", n_samples, c))
        if k < n_fix - 1:
            r = rng.random()
            if r < 0.35:
                plan.append(("drop", int(rng.integers(1, 4))))
            elif r < 0.6:
                plan.append(("blink", int(rng.integers(15, 161))))
    return plan


def build_stepwise_trace(plan, rng, dt_us=DT_US, jitter_px=30.0, min_fix_ms=80.0,
                         min_blink_ms=50.0, overlong_blink_ms=500.0):
    """Realize a plan as a SampleSeries and derive the expected events.

    Expected-event derivation is straight from the documented contract:
      * a fix segment is a fixation iff t[last]-t[first] >= min_fix_ms
      * a blink segment is a blink iff its span >= min_blink_ms
        (overlong iff span > overlong_blink_ms)
      * consecutive fixations with no blink between them are joined by one
        saccade spanning [last sample of the first, first sample of the second]
    """
    t, pos, valid = [], [], []
    segs = []  # (kind, first_idx, last_idx, center)
    idx = 0
    tick = 0
    for seg in plan:
        kind = seg[0]
        n = seg[1]
        first = idx
        for _ in range(n):
            t.append(tick * dt_us)
            if kind == "fix":
                c = seg[2]
                pos.append(c + rng.uniform(-jitter_px / 2, jitter_px / 2, size=2))
                valid.append(True)
            else:
                pos.append((0.0, 0.0))
                valid.append(False)
            tick += 1
            idx += 1
        segs.append((kind, first, idx - 1, seg[2] if kind == "fix" else None))

    t = np.asarray(t, dtype=np.int64)
    series = make_series(t, pos, valid)

    expected = []
    fix_spans = []
    for kind, a, b, _c in segs:
        span_ms = (t[b] - t[a]) / 1000.0
        if kind == "fix" and span_ms >= min_fix_ms:
            fix_spans.append((a, b))
            expected.append(("fixation", int(t[a]), int(t[b])))
        elif kind == "blink" and span_ms >= min_blink_ms:
            expected.append(("blink", int(t[a]), int(t[b]), span_ms > overlong_blink_ms))

    blink_segs = [(a, b) for kind, a, b, _c in segs if kind == "blink"]
    for (a0, b0), (a1, b1) in zip(fix_spans, fix_spans[1:]):
        if any(b0 < a and b < a1 for a, b in blink_segs):
            continue  # a blink splits the pair
        expected.append(("saccade", int(t[b0]), int(t[a1])))

    expected.sort(key=lambda e: (e[1], e[2]))
    return series, expected


def event_signature(events):
    """(kind, start, end[, overlong]) tuples for exact comparison."""
    out = []
    for ev in events:
        if ev.kind == "blink":
            out.append(("blink", ev.start_us, ev.end_us, ev.overlong))
        else:
            out.append((ev.kind, ev.start_us, ev.end_us))
    return sorted(out, key=lambda e: (e[1], e[2]))


# ---------------------------------------------------------------------------
# edit distance by exhaustive recursion
# ---------------------------------------------------------------------------

def edit_distance_bruteforce(a, b, indel=1.0, substitution=1.0):
    """Minimal edit cost via memoized recursion over all edit scripts."""
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return (len(b) - j) * indel
        if j == len(b):
            return (len(a) - i) * indel
        best = go(i + 1, j + 1) + (0.0 if a[i] == b[j] else substitution)
        best = min(best, go(i + 1, j) + indel)
        best = min(best, go(i, j + 1) + indel)
        return best

    return go(0, 0)


# ---------------------------------------------------------------------------
# exhaustive MultiMatch alignment
# ---------------------------------------------------------------------------

def _all_monotone_paths(m, n):
    """All paths from (0,0) to (m-1,n-1) using steps (1,0),(0,1),(1,1)."""
    paths = []

    def walk(i, j, acc):
        if i == m - 1 and j == n - 1:
            paths.append(acc + [(i, j)])
            return
        if i + 1 < m:
            walk(i + 1, j, acc + [(i, j)])
        if j + 1 < n:
            walk(i, j + 1, acc + [(i, j)])
        if i + 1 < m and j + 1 < n:
            walk(i + 1, j + 1, acc + [(i, j)])

    walk(0, 0, [])
    return paths


def multimatch_bruteforce(pos_a, dur_a, pos_b, dur_b, screen_px):
    """Enumerate every monotone alignment, keep the cheapest, score it.

    Mirrors the documented contract: costs are saccade-vector difference
    magnitudes; similarities are 1 - normalized dissimilarity, averaged over
    aligned pairs (shape & length / 2*diagonal, direction / pi,
    position / diagonal, duration / max of the pair).
    """
    pos_a = np.asarray(pos_a, float)
    pos_b = np.asarray(pos_b, float)
    dur_a = np.asarray(dur_a, float)
    dur_b = np.asarray(dur_b, float)
    va = np.diff(pos_a, axis=0)
    vb = np.diff(pos_b, axis=0)
    m, n = len(va), len(vb)
    diag = math.hypot(*screen_px)

    best_cost, best_path = None, None
    for path in _all_monotone_paths(m, n):
        cost = sum(np.linalg.norm(va[i] - vb[j]) for i, j in path)
        if best_cost is None or cost < best_cost - 1e-12:
            best_cost, best_path = cost, path

    dims = {"shape": [], "direction": [], "length": [], "position": [], "duration": []}
    for i, j in best_path:
        dims["shape"].append(np.linalg.norm(va[i] - vb[j]) / (2 * diag))
        ang_a = math.atan2(va[i][1], va[i][0])
        ang_b = math.atan2(vb[j][1], vb[j][0])
        d = abs(ang_a - ang_b) % (2 * math.pi)
        dims["direction"].append(min(d, 2 * math.pi - d) / math.pi)
        dims["length"].append(
            abs(np.linalg.norm(va[i]) - np.linalg.norm(vb[j])) / (2 * diag)
        )
        dims["position"].append(np.linalg.norm(pos_a[i] - pos_b[j]) / diag)
        dmax = max(dur_a[i], dur_b[j])
        dims["duration"].append(abs(dur_a[i] - dur_b[j]) / dmax if dmax > 0 else 0.0)
    sims = {k: min(1.0, max(0.0, 1.0 - float(np.mean(v)))) for k, v in dims.items()}
    sims["overall"] = float(np.mean([sims[k] for k in
                                     ("shape", "direction", "length", "position", "duration")]))
    return sims


# ---------------------------------------------------------------------------
# hand-raise probability post-processing, the slow way
# ---------------------------------------------------------------------------

def postprocess_bruteforce(probs, fps, threshold=0.5, merge_gap_s=4.0, min_duration_s=1.0):
    """Runs > threshold, cascade-merge gaps < merge_gap_s, drop short events.

    Returns (start_s, end_s, mean_probability) triples; a frame run [a, b]
    spans [a/fps, (b+1)/fps) and the mean is over above-threshold frames only.
    """
    probs = np.asarray(probs, float)
    runs = []
    i = 0
    while i < len(probs):
        if np.isfinite(probs[i]) and probs[i] > threshold:
            j = i
            while j + 1 < len(probs) and np.isfinite(probs[j + 1]) and probs[j + 1] > threshold:
                j += 1
            runs.append([i, j, list(range(i, j + 1))])
            i = j + 1
        else:
            i += 1

    merged = []
    for run in runs:
        if merged and (run[0] - (merged[-1][1] + 1)) / fps < merge_gap_s:
            merged[-1][1] = run[1]
            merged[-1][2] = merged[-1][2] + run[2]
        else:
            merged.append(run)

    events = []
    for a, b, frames in merged:
        start_s = a / fps
        end_s = (b + 1) / fps
        if end_s - start_s < min_duration_s:
            continue
        events.append((start_s, end_s, float(np.mean(probs[frames]))))
    return events


# ---------------------------------------------------------------------------
# summary statistics via an alternative route
# ---------------------------------------------------------------------------

def aggstats_reference(values):
    """Reference summary stats: scipy for skew/kurtosis, manual quantiles."""
    import scipy.stats

    x = np.asarray(values, float)
    n = len(x)
    if n == 0:
        return None
    s = np.sort(x)

    def quantile(q):
        # averaged inverted CDF over 1-based order statistics
        j = n * q
        if abs(j - round(j)) < 1e-12:
            j = int(round(j))
            return 0.5 * (s[max(j - 1, 0)] + s[min(j, n - 1)])
        return s[min(math.ceil(j) - 1, n - 1)]

    if n >= 2 and np.ptp(x) > 0:
        std = math.sqrt(float(np.sum((x - x.mean()) ** 2)) / (n - 1))
    else:
        std = 0.0
    skew = float(scipy.stats.skew(x, bias=False)) if n >= 3 and np.ptp(x) > 0 else 0.0
    kurt = float(scipy.stats.kurtosis(x, fisher=True, bias=False)) if n >= 4 and np.ptp(x) > 0 else 0.0
    return {
        "min": float(s[0]),
        "max": float(s[-1]),
        "mean": float(x.mean()),
        "median": float(quantile(0.5)),
        "std": std,
        "q25": float(quantile(0.25)),
        "q75": float(quantile(0.75)),
        "skew": skew,
        "kurtosis": kurt,
        "range": float(s[-1] - s[0]),
        "count": n,
    }


def default_geometry():
    return ScreenGeometry(screen_px=(1920, 1080), screen_mm=(531.0, 299.0),
                          viewing_distance_mm=650.0)


# ---------------------------------------------------------------------------
# Gaussian density map by explicit nested loops
# ---------------------------------------------------------------------------

def density_map_bruteforce(positions, weights, screen_px, grid_wh, sigma):
    """Evaluate the Gaussian superposition cell by cell, then regularize."""
    gw, gh = grid_wh
    w, h = screen_px
    cell_w, cell_h = w / gw, h / gh
    out = np.zeros((gh, gw))
    for r in range(gh):
        for c in range(gw):
            cx = (c + 0.5) * cell_w
            cy = (r + 0.5) * cell_h
            total = 0.0
            for (fx, fy), wgt in zip(positions, weights):
                d2 = (cx - fx) ** 2 + (cy - fy) ** 2
                total += wgt * math.exp(-d2 / (2 * sigma * sigma))
            out[r, c] = total
    out += 1e-12
    return out / out.sum()


# ---------------------------------------------------------------------------
# EDA decomposition with explicit loops
# ---------------------------------------------------------------------------

def eda_decompose_bruteforce(raw, rate_hz, tonic_window_s=4.0):
    """Median-filter (edge replicated), z-standardize, sliding mean tonic."""
    import statistics

    raw = [float(v) for v in raw]
    n = len(raw)
    padded = [raw[0]] + raw + [raw[-1]]
    filtered = [statistics.median(padded[i:i + 3]) for i in range(n)]
    mean = sum(filtered) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in filtered) / n)
    if sd == 0:
        cleaned = [0.0] * n
    else:
        cleaned = [(v - mean) / sd for v in filtered]
    half = int(round(rate_hz * tonic_window_s / 2.0))
    tonic = []
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n - 1, i + half)
        window = cleaned[lo:hi + 1]
        tonic.append(sum(window) / len(window))
    phasic = [c - t for c, t in zip(cleaned, tonic)]
    return np.array(cleaned), np.array(tonic), np.array(phasic)
