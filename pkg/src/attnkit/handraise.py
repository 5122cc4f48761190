"""Hand-raise detection from body keypoints.

Input is one JSON line per video frame with 25-point body skeletons
(x, y, confidence; confidence 0 marks a missing keypoint).  The pipeline
tracks persons across frames by torso-box overlap, normalizes each pose to
a torso-length coordinate frame, expands it into geometric features,
summarizes fixed-length frame windows, scores the windows with a random
forest, and turns per-frame probabilities into merged raise events.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .ml.design import DesignMatrixBuilder
from .ml.forest import GiniRandomForest
from .validation import IngestError, as_float_array

__all__ = [
    "KEYPOINT_INDICES",
    "KEYPOINT_NAMES",
    "DEFAULT_FPS",
    "WINDOW_SIZE",
    "TRAIN_STRIDE",
    "ANNOTATE_STRIDE",
    "FramePoses",
    "load_poses",
    "torso_box",
    "box_iou",
    "Tracklet",
    "track_persons",
    "normalize_pose",
    "pose_feature_names",
    "frame_features",
    "tracklet_features",
    "window_starts",
    "window_summary",
    "frames_raised",
    "train_windows",
    "HandRaiseModel",
    "train_hand_raise",
    "RaiseEvent",
    "postprocess_probabilities",
    "HandRaiseAnnotation",
    "annotate",
    "evaluate_counts",
]

# Subset of the 25-point body model used for hand-raise geometry.
KEYPOINT_INDICES = (0, 1, 2, 3, 4, 5, 6, 7, 8, 15, 16, 17, 18)
KEYPOINT_NAMES = ("nose", "neck", "shoulder_r", "elbow_r", "wrist_r",
                  "shoulder_l", "elbow_l", "wrist_l", "hip_mid",
                  "eye_r", "eye_l", "ear_r", "ear_l")
_JOINT = {name: i for i, name in enumerate(KEYPOINT_NAMES)}

DEFAULT_FPS = 24.0
WINDOW_SIZE = 48
TRAIN_STRIDE = 48
ANNOTATE_STRIDE = 8

_PAIR_DISTANCES = (
    ("wrist_r", "nose"), ("wrist_l", "nose"),
    ("wrist_r", "shoulder_r"), ("wrist_l", "shoulder_l"),
    ("wrist_r", "shoulder_l"), ("wrist_l", "shoulder_r"),
    ("elbow_r", "nose"), ("elbow_l", "nose"),
)

# interior angle measured at the middle joint
_ANGLES = (
    ("shoulder_r", "elbow_r", "wrist_r"), ("shoulder_l", "elbow_l", "wrist_l"),
    ("neck", "shoulder_r", "elbow_r"), ("neck", "shoulder_l", "elbow_l"),
    ("nose", "neck", "shoulder_r"), ("nose", "neck", "shoulder_l"),
)

_BONES = (
    ("nose", "neck"),
    ("neck", "shoulder_r"), ("neck", "shoulder_l"),
    ("shoulder_r", "elbow_r"), ("shoulder_l", "elbow_l"),
    ("elbow_r", "wrist_r"), ("elbow_l", "wrist_l"),
    ("neck", "hip_mid"),
    ("nose", "eye_r"), ("nose", "eye_l"),
    ("eye_r", "ear_r"), ("eye_l", "ear_l"),
)


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FramePoses:
    """All detected skeletons of one video frame."""

    frame: int
    keypoints: tuple      # tuple of (25, 3) float arrays


def load_poses(path) -> tuple:
    """Read JSON-lines pose data: one object per frame.

    Each line holds {"frame": int, "persons": [{"kp": [[x, y, c] * 25]}]}
    and may carry "fps"; the first fps seen wins, defaulting to 24.
    Returns (frames sorted by frame index, fps).  A malformed line raises
    IngestError naming its 1-based line number.
    """
    frames = []
    fps = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("not a JSON object")
                frame = int(obj["frame"])
                persons = []
                for person in obj.get("persons", []):
                    kp = np.asarray(person["kp"], dtype=np.float64)
                    if kp.shape != (25, 3):
                        raise ValueError(f"kp must be 25x3, got {kp.shape}")
                    persons.append(kp)
                if fps is None and "fps" in obj:
                    fps = float(obj["fps"])
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"malformed pose data on line {lineno}: {exc}") from exc
            frames.append(FramePoses(frame=frame, keypoints=tuple(persons)))
    frames.sort(key=lambda f: f.frame)
    return frames, (DEFAULT_FPS if fps is None else fps)


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------

def _valid_points(kp: np.ndarray, names) -> np.ndarray:
    pts = []
    for name in names:
        row = kp[KEYPOINT_INDICES[_JOINT[name]]]
        if row[2] > 0:
            pts.append(row[:2])
    return np.asarray(pts)


def torso_box(kp: np.ndarray):
    """Bounding box of neck, both shoulders, and mid-hip; None if < 2 visible."""
    pts = _valid_points(kp, ("neck", "shoulder_r", "shoulder_l", "hip_mid"))
    if len(pts) < 2:
        return None
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    return (float(x0), float(y0), float(x1), float(y1))


def box_iou(a, b) -> float:
    """Intersection-over-union of two (x0, y0, x1, y1) boxes."""
    ix0 = max(a[0], b[0])
    iy0 = max(a[1], b[1])
    ix1 = min(a[2], b[2])
    iy1 = min(a[3], b[3])
    iw = max(0.0, ix1 - ix0)
    ih = max(0.0, iy1 - iy0)
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


@dataclass
class Tracklet:
    """One person followed across frames: frame index -> (25, 3) keypoints."""

    track_id: str
    poses: dict = field(default_factory=dict)
    last_frame: int = -1
    last_box: tuple | None = None

    @property
    def first_frame(self) -> int:
        return min(self.poses)

    @property
    def n_frames(self) -> int:
        return len(self.poses)


def track_persons(frames, iou_threshold: float = 0.3, max_gap: int = 12) -> list:
    """Greedy torso-IOU tracking with short-gap bridging.

    Per frame, candidate (tracklet, detection) pairs are taken in descending
    IOU order; a pair links when its IOU exceeds the threshold and both
    sides are still free.  Tracklets unseen for more than max_gap frames
    stop matching.  Track ids are s0, s1, ... in order of first appearance.
    """
    tracklets: list[Tracklet] = []
    for fp in frames:
        boxes = [torso_box(kp) for kp in fp.keypoints]
        active = [t for t in tracklets
                  if t.last_box is not None and fp.frame - t.last_frame <= max_gap]
        pairs = []
        for ti, t in enumerate(active):
            for di, box in enumerate(boxes):
                if box is None:
                    continue
                iou = box_iou(t.last_box, box)
                if iou > iou_threshold:
                    pairs.append((-iou, ti, di))
        pairs.sort()
        used_t: set = set()
        used_d: set = set()
        for neg_iou, ti, di in pairs:
            if ti in used_t or di in used_d:
                continue
            used_t.add(ti)
            used_d.add(di)
            t = active[ti]
            t.poses[fp.frame] = fp.keypoints[di]
            t.last_frame = fp.frame
            t.last_box = boxes[di]
        for di, box in enumerate(boxes):
            if di in used_d or box is None:
                continue
            t = Tracklet(track_id=f"s{len(tracklets)}")
            t.poses[fp.frame] = fp.keypoints[di]
            t.last_frame = fp.frame
            t.last_box = box
            tracklets.append(t)
    return tracklets


# ---------------------------------------------------------------------------
# pose normalization and per-frame features
# ---------------------------------------------------------------------------

def normalize_pose(kp: np.ndarray):
    """Neck-centred pose in torso-length units; None when unanchorable.

    Requires visible neck and mid-hip at least one pixel apart; missing
    keypoints come out as NaN rows.
    """
    kp = as_float_array(kp, "keypoints")
    if kp.shape != (25, 3):
        raise ValueError("keypoints must have shape (25, 3)")
    subset = kp[list(KEYPOINT_INDICES)]
    coords = subset[:, :2].copy()
    coords[subset[:, 2] <= 0] = np.nan
    neck = coords[_JOINT["neck"]]
    hip = coords[_JOINT["hip_mid"]]
    if np.isnan(neck).any() or np.isnan(hip).any():
        return None
    scale = float(np.hypot(*(neck - hip)))
    if scale < 1.0:
        return None
    return (coords - neck) / scale


def pose_feature_names() -> tuple:
    """Names of the 172 per-frame pose features, in output order."""
    names = []
    for joint in KEYPOINT_NAMES:
        names.append(f"{joint}_x")
        names.append(f"{joint}_y")
    for a, b in _PAIR_DISTANCES:
        names.append(f"dist_{a}_{b}")
    for a, b, c in _ANGLES:
        names.append(f"angle_{a}_{b}_{c}")
    for a, b in _BONES:
        for joint in KEYPOINT_NAMES:
            if joint in (a, b):
                continue
            names.append(f"linedist_{a}_{b}_{joint}")
    return tuple(names)


_FEATURE_NAMES = pose_feature_names()


def _angle_at(a, b, c) -> float:
    u = a - b
    v = c - b
    nu = np.hypot(*u)
    nv = np.hypot(*v)
    if not np.isfinite(nu) or not np.isfinite(nv) or nu < 1e-12 or nv < 1e-12:
        return np.nan
    cos = float(np.dot(u, v) / (nu * nv))
    return float(np.arccos(min(1.0, max(-1.0, cos))))


def _line_distance(p, q, j) -> float:
    d = q - p
    norm = np.hypot(*d)
    if not np.isfinite(norm) or norm < 1e-12:
        return np.nan
    r = j - p
    return float(abs(d[0] * r[1] - d[1] * r[0]) / norm)


def frame_features(kp: np.ndarray) -> np.ndarray:
    """172 geometric features of one skeleton; all NaN if unanchorable.

    Layout: 26 normalized coordinates, 8 point distances, 6 interior
    angles, then the distance from each non-incident joint to the infinite
    line through each of 12 bones (12 x 11 = 132).
    """
    coords = normalize_pose(kp)
    if coords is None:
        return np.full(len(_FEATURE_NAMES), np.nan)
    out = np.empty(len(_FEATURE_NAMES))
    k = 0
    for j in range(len(KEYPOINT_NAMES)):
        out[k] = coords[j, 0]
        out[k + 1] = coords[j, 1]
        k += 2
    for a, b in _PAIR_DISTANCES:
        diff = coords[_JOINT[a]] - coords[_JOINT[b]]
        out[k] = np.hypot(*diff)
        k += 1
    for a, b, c in _ANGLES:
        out[k] = _angle_at(coords[_JOINT[a]], coords[_JOINT[b]], coords[_JOINT[c]])
        k += 1
    for a, b in _BONES:
        p = coords[_JOINT[a]]
        q = coords[_JOINT[b]]
        for joint in KEYPOINT_NAMES:
            if joint in (a, b):
                continue
            out[k] = _line_distance(p, q, coords[_JOINT[joint]])
            k += 1
    return out


def tracklet_features(tracklet: Tracklet, n_frames: int) -> np.ndarray:
    """Per-frame features over the full video timeline; absent frames NaN."""
    out = np.full((n_frames, len(_FEATURE_NAMES)), np.nan)
    for frame, kp in tracklet.poses.items():
        if 0 <= frame < n_frames:
            out[frame] = frame_features(kp)
    return out


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

def window_starts(n_frames: int, size: int = WINDOW_SIZE, stride: int = TRAIN_STRIDE) -> list:
    """Start indices of complete windows; a trailing remainder is dropped."""
    if size < 1 or stride < 1:
        raise ValueError("size and stride must be positive")
    return list(range(0, n_frames - size + 1, stride))


def window_summary(features: np.ndarray) -> np.ndarray:
    """Per-column nanmean then nanstd (population) of one window's frames."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(features, axis=0)
        std = np.nanstd(features, axis=0)
    return np.concatenate([mean, std])


def window_feature_names() -> tuple:
    return tuple(f"mean_{n}" for n in _FEATURE_NAMES) + tuple(
        f"std_{n}" for n in _FEATURE_NAMES)


def frames_raised(n_frames: int, intervals, fps: float) -> np.ndarray:
    """Boolean per-frame mask: frame f is raised when f/fps lies in an interval."""
    mask = np.zeros(n_frames, dtype=bool)
    for start_s, end_s in intervals:
        if end_s <= start_s:
            raise ValueError("interval end must exceed start")
        lo = int(np.ceil(start_s * fps))
        hi = int(np.ceil(end_s * fps))
        mask[max(0, lo):min(n_frames, hi)] = True
    return mask


def train_windows(features: np.ndarray, intervals, fps: float,
                  size: int = WINDOW_SIZE, stride: int = TRAIN_STRIDE):
    """Window summaries and labels for one person's frame features.

    A window is positive when at least half its frames fall inside a raised
    interval; windows with no valid frames are skipped.
    """
    features = as_float_array(features, "features")
    n = features.shape[0]
    raised = frames_raised(n, intervals, fps)
    rows = []
    labels = []
    for start in window_starts(n, size=size, stride=stride):
        chunk = features[start:start + size]
        if np.all(np.isnan(chunk)):
            continue
        rows.append(window_summary(chunk))
        labels.append(int(raised[start:start + size].mean() >= 0.5))
    if not rows:
        return (np.empty((0, 2 * features.shape[1])), np.empty(0, dtype=np.int64))
    return np.asarray(rows), np.asarray(labels, dtype=np.int64)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass
class HandRaiseModel:
    """Window scorer: design-matrix preprocessing plus a random forest."""

    builder: DesignMatrixBuilder
    forest: GiniRandomForest
    window_size: int = WINDOW_SIZE

    def score_windows(self, window_rows: np.ndarray) -> np.ndarray:
        return self.forest.predict_scores(self.builder.transform(window_rows))

    def to_json(self) -> str:
        payload = {
            "window_size": self.window_size,
            "transform": self.builder.record(),
            "model": self.forest.to_dict(),
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HandRaiseModel":
        payload = json.loads(text)
        return cls(builder=DesignMatrixBuilder.from_record(payload["transform"]),
                   forest=GiniRandomForest.from_dict(payload["model"]),
                   window_size=payload["window_size"])


def train_hand_raise(feature_matrices, interval_lists, fps: float,
                     size: int = WINDOW_SIZE, stride: int = TRAIN_STRIDE,
                     n_trees: int = 100, max_depth: int = 50,
                     class_weight="balanced", seed: int = 0) -> HandRaiseModel:
    """Fit the window classifier from per-person frame features and intervals."""
    if len(feature_matrices) != len(interval_lists):
        raise ValueError("feature_matrices and interval_lists must align")
    all_rows = []
    all_labels = []
    for features, intervals in zip(feature_matrices, interval_lists):
        rows, labels = train_windows(features, intervals, fps, size=size, stride=stride)
        if len(rows):
            all_rows.append(rows)
            all_labels.append(labels)
    if not all_rows:
        raise ValueError("no usable training windows")
    X = np.vstack(all_rows)
    y = np.concatenate(all_labels)
    builder = DesignMatrixBuilder()
    builder.fit(X, feature_names=window_feature_names())
    forest = GiniRandomForest(n_trees=n_trees, max_depth=max_depth,
                              class_weight=class_weight, seed=seed)
    forest.fit(builder.transform(X), y)
    return HandRaiseModel(builder=builder, forest=forest, window_size=size)


# ---------------------------------------------------------------------------
# annotation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RaiseEvent:
    """One detected hand raise; the span covers frames a..b as [a, b+1)/fps."""

    start_s: float
    end_s: float
    mean_probability: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def postprocess_probabilities(probs, fps: float, threshold: float = 0.5,
                              merge_gap_s: float = 4.0,
                              min_duration_s: float = 1.0) -> list:
    """Frame probabilities to events: threshold, merge, drop short.

    Runs of frames strictly above the threshold merge left to right when
    the gap to the previous event is under merge_gap_s; merged events
    shorter than min_duration_s are dropped.  The reported mean covers the
    above-threshold frames only (never the bridged gap frames).
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ValueError("probabilities must be 1-D")
    fps = float(fps)
    if fps <= 0:
        raise ValueError("fps must be positive")
    above = np.zeros(len(probs), dtype=bool)
    finite = np.isfinite(probs)
    above[finite] = probs[finite] > threshold

    runs = []       # [first, last, hot frame indices]
    i = 0
    n = len(probs)
    while i < n:
        if above[i]:
            j = i
            while j + 1 < n and above[j + 1]:
                j += 1
            runs.append([i, j, list(range(i, j + 1))])
            i = j + 1
        else:
            i += 1

    merged = []
    for run in runs:
        if merged and (run[0] - (merged[-1][1] + 1)) / fps < merge_gap_s:
            merged[-1][1] = run[1]
            merged[-1][2] += run[2]
        else:
            merged.append(run)

    events = []
    for first, last, hot in merged:
        start_s = first / fps
        end_s = (last + 1) / fps
        if end_s - start_s < min_duration_s:
            continue
        events.append(RaiseEvent(start_s=start_s, end_s=end_s,
                                 mean_probability=float(np.mean(probs[hot]))))
    return events


@dataclass(frozen=True)
class HandRaiseAnnotation:
    frame_probabilities: np.ndarray
    events: tuple


def annotate(model: HandRaiseModel, features: np.ndarray, fps: float,
             stride: int = ANNOTATE_STRIDE, threshold: float = 0.5,
             merge_gap_s: float = 4.0, min_duration_s: float = 1.0) -> HandRaiseAnnotation:
    """Score overlapping windows and reduce them to raise events.

    Each frame's probability is the mean score of the windows covering it;
    frames no scored window covers stay NaN and never enter an event.
    """
    features = as_float_array(features, "features")
    n = features.shape[0]
    size = model.window_size
    rows = []
    spans = []
    for start in window_starts(n, size=size, stride=stride):
        chunk = features[start:start + size]
        if np.all(np.isnan(chunk)):
            continue
        rows.append(window_summary(chunk))
        spans.append((start, start + size))
    prob_sum = np.zeros(n)
    cover = np.zeros(n)
    if rows:
        scores = model.score_windows(np.asarray(rows))
        for (start, end), score in zip(spans, scores):
            prob_sum[start:end] += score
            cover[start:end] += 1.0
    with np.errstate(invalid="ignore"):
        probs = np.where(cover > 0, prob_sum / np.maximum(cover, 1.0), np.nan)
    events = postprocess_probabilities(probs, fps, threshold=threshold,
                                       merge_gap_s=merge_gap_s,
                                       min_duration_s=min_duration_s)
    return HandRaiseAnnotation(frame_probabilities=probs, events=tuple(events))


def evaluate_counts(truth: dict, predicted: dict) -> float:
    """Mean absolute error between per-person event counts.

    The two dicts must cover exactly the same persons.
    """
    if set(truth) != set(predicted):
        missing = set(truth) ^ set(predicted)
        raise ValueError("count keys mismatch: " + ", ".join(sorted(map(str, missing))))
    if not truth:
        raise ValueError("counts must be non-empty")
    return float(np.mean([abs(truth[k] - predicted[k]) for k in truth]))
