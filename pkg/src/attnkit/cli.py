"""Deterministic command-line front end.

Every subcommand reads local files, writes its outputs atomically, and
records a manifest (resolved configuration, input digests, output paths,
tool version) in the output directory.  Randomness enters only through the
configured seed, so rerunning a command with the same inputs and seed
reproduces every artifact byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__, io
from .features import FeatureVector, extract_feature_vector
from .gaze import (QualityRules, ScreenGeometry, cut_window, detect_events,
                   load_samples, quality_filter)
from .handraise import (HandRaiseModel, annotate, evaluate_counts, load_poses,
                        track_persons, tracklet_features, train_hand_raise)
from .ml import (Dataset, ModelSpec, balance, build_design_matrix,
                 cross_validate, evaluate_scores, make_model, model_from_json,
                 model_to_json, permutation_importance, select_top_k,
                 threshold_sweep)
from .physio import physio_features
from .sequences import cut as cut_dendrogram
from .sequences import diagnostics as cluster_diagnostics
from .sequences import distance_matrix, ward_cluster
from .synchrony import density_map, group_scores, resample_channels, scanpath_from_events
from .validation import IngestError, SchemaError

__all__ = ["RunConfig", "main"]


class ConfigError(Exception):
    """Bad configuration input: unknown key, wrong type, unreadable JSON."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Every tunable of every subcommand, with its default.

    A JSON config file (--config) overrides the defaults and command-line
    flags override the file.  Unknown config keys are rejected.
    """

    seed: int = 0
    out_dir: str = "attnkit_out"
    threads: int | None = None            # recorded for the manifest; advisory

    # screen geometry (used unless a --geometry file overrides it)
    screen_px: list | None = None         # default [1920, 1080], set in __post_init__
    screen_mm: list | None = None
    viewing_distance_mm: float | None = None

    # gaze event detection
    dispersion_px: float = 100.0
    min_fixation_ms: float = 80.0
    velocity_deg_s: float = 40.0
    velocity_px_ms: float = 0.8
    min_blink_ms: float = 50.0
    overlong_blink_ms: float = 500.0

    # probe windows and quality gating
    window_s: float = 30.0
    min_tracking_ratio: float = 0.70
    reject_overlong_blinks: bool = True
    pupil_baseline_mm: float | None = None

    # synchrony
    measure: str = "multimatch"           # kld | multimatch | isc
    grid: list | None = None              # default [64, 36] (columns, rows)
    sigma_px: float | None = None
    weighting: str = "count"
    symmetrize: bool = True
    isc_rate_hz: float = 50.0

    # sequence clustering
    indel: float = 1.0
    substitution: float = 1.0
    k: int = 4
    k_max: int = 8

    # physiology
    min_scr_amplitude: float = 0.05

    # classification
    model: str = "logistic_regression"
    l2: float = 1.0
    epochs: int = 500
    learning_rate: float = 0.1
    n_trees: int = 100
    max_depth: int = 50
    class_weight: str | None = None
    balance: str = "none"
    smote_k: int = 5
    scheme: str = "lopo"
    kfold_k: int = 4
    threshold: float = 0.5
    repeats: int = 10
    top_k: int | None = None

    # hand raises
    hr_window_size: int = 48
    hr_train_stride: int = 48
    hr_annotate_stride: int = 8
    iou_threshold: float = 0.3
    max_gap: int = 12
    hr_threshold: float = 0.5
    merge_gap_s: float = 4.0
    min_duration_s: float = 1.0
    hr_n_trees: int = 100
    hr_max_depth: int = 50
    hr_class_weight: str | None = "balanced"

    def __post_init__(self) -> None:
        if self.screen_px is None:
            self.screen_px = [1920, 1080]
        if self.grid is None:
            self.grid = [64, 36]


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def _load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(payload) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError("unknown config key(s): " + ", ".join(unknown))
    return payload


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults <- config file <- flags, then environment fallbacks."""
    data = asdict(RunConfig())
    config_path = getattr(args, "config", None)
    if config_path:
        data.update(_load_config_file(config_path))
    flag_values = {k: v for k, v in vars(args).items() if k in _CONFIG_FIELDS}
    data.update(flag_values)
    if data.get("threads") is None:
        env = os.environ.get("ATTNKIT_THREADS")
        if env:
            try:
                data["threads"] = int(env)
            except ValueError:
                raise ConfigError(f"ATTNKIT_THREADS must be an integer, got {env!r}")
    for key in ("class_weight", "hr_class_weight"):
        if data.get(key) == "none":
            data[key] = None
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}")


def _geometry(cfg: RunConfig, geometry_path: str | None) -> ScreenGeometry:
    screen_px = cfg.screen_px
    screen_mm = cfg.screen_mm
    distance = cfg.viewing_distance_mm
    if geometry_path:
        with open(geometry_path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        allowed = {"screen_px", "screen_mm", "viewing_distance_mm"}
        unknown = sorted(set(payload) - allowed)
        if unknown:
            raise SchemaError(f"{geometry_path}: unknown geometry key(s): "
                              + ", ".join(unknown))
        if "screen_px" not in payload:
            raise SchemaError(f"{geometry_path}: geometry requires screen_px")
        screen_px = payload["screen_px"]
        screen_mm = payload.get("screen_mm", screen_mm)
        distance = payload.get("viewing_distance_mm", distance)
    return ScreenGeometry(
        screen_px=(int(screen_px[0]), int(screen_px[1])),
        screen_mm=(float(screen_mm[0]), float(screen_mm[1])) if screen_mm else None,
        viewing_distance_mm=float(distance) if distance else None)


def _detector_params(cfg: RunConfig) -> dict:
    return {
        "max_dispersion_px": cfg.dispersion_px,
        "min_fixation_ms": cfg.min_fixation_ms,
        "velocity_threshold_deg_s": cfg.velocity_deg_s,
        "velocity_threshold_px_ms": cfg.velocity_px_ms,
        "min_blink_ms": cfg.min_blink_ms,
        "overlong_blink_ms": cfg.overlong_blink_ms,
    }


def _quality_rules(cfg: RunConfig) -> QualityRules:
    return QualityRules(min_tracking_ratio=cfg.min_tracking_ratio,
                        reject_overlong_blinks=cfg.reject_overlong_blinks)


_MEASURE_NAMES = {"kld": "KLD", "multimatch": "MM_overall", "isc": "ISC"}


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def _out_path(args: argparse.Namespace, out_dir: str, default_name: str) -> str:
    return getattr(args, "out", None) or os.path.join(out_dir, default_name)


def _slice_physio(channel_map: dict, person: str, channel: str,
                  start_us: int, end_us: int):
    key = (person, channel)
    if key not in channel_map:
        return None
    t, v = channel_map[key]
    mask = (t >= start_us) & (t < end_us)
    if not mask.any():
        return None
    return io.physio_series_from_samples(person, channel, t[mask], v[mask])


def _labeled_dataset(features_path: str, labels_path: str) -> Dataset:
    fvs = io.read_features_csv(features_path)
    label_map = io.read_labels_csv(labels_path)
    missing = [f"{fv.person_id}/{fv.probe_id}" for fv in fvs
               if (fv.person_id, fv.probe_id) not in label_map]
    if missing:
        raise IngestError("missing labels for: " + ", ".join(missing[:10]))
    labels = [label_map[(fv.person_id, fv.probe_id)] for fv in fvs]
    return Dataset.from_feature_vectors(fvs, labels)


def _load_scoring_inputs(args: argparse.Namespace):
    """Model file + features/labels -> (model, builder, transformed X, y)."""
    with open(args.model_path, "r", encoding="utf-8") as fh:
        model, builder, _spec = model_from_json(fh.read())
    if builder is None:
        raise SchemaError(f"{args.model_path}: model file lacks a transform block")
    fvs = io.read_features_csv(args.features)
    label_map = io.read_labels_csv(args.labels)
    missing = [f"{fv.person_id}/{fv.probe_id}" for fv in fvs
               if (fv.person_id, fv.probe_id) not in label_map]
    if missing:
        raise IngestError("missing labels for: " + ", ".join(missing[:10]))
    names = builder.feature_names_
    present = set()
    for fv in fvs:
        present.update(fv.values)
    absent = [n for n in names if n not in present]
    if absent:
        raise SchemaError("missing feature column(s): " + ", ".join(absent))
    X = np.full((len(fvs), len(names)), np.nan)
    for i, fv in enumerate(fvs):
        for j, name in enumerate(names):
            value = fv.values.get(name)
            if value is not None:
                X[i, j] = value
    y = np.array([label_map[(fv.person_id, fv.probe_id)] for fv in fvs])
    return model, builder, builder.transform(X), y


def _model_spec(cfg: RunConfig) -> ModelSpec:
    return ModelSpec(kind=cfg.model, seed=cfg.seed, l2=cfg.l2, epochs=cfg.epochs,
                     learning_rate=cfg.learning_rate, n_trees=cfg.n_trees,
                     max_depth=cfg.max_depth, class_weight=cfg.class_weight)


# ---------------------------------------------------------------------------
# subcommands: each returns ({input name: path}, [output paths])
# ---------------------------------------------------------------------------

def _cmd_events(cfg: RunConfig, args, out_dir: str):
    geometry_path = getattr(args, "geometry", None)
    geometry = _geometry(cfg, geometry_path)
    series = load_samples(args.in_path, geometry)
    events = detect_events(series, **_detector_params(cfg))
    out = _out_path(args, out_dir, "events.csv")
    io.write_events_csv(out, events)
    inputs = {"gaze": args.in_path}
    if geometry_path:
        inputs["geometry"] = geometry_path
    return inputs, [out]


def _cmd_features(cfg: RunConfig, args, out_dir: str):
    geometry_path = getattr(args, "geometry", None)
    geometry = _geometry(cfg, geometry_path)
    series = load_samples(args.gaze, geometry)
    events = detect_events(series, **_detector_params(cfg))
    probes = io.read_probes_csv(args.probes)
    rules = _quality_rules(cfg)
    physio_path = getattr(args, "physio", None)
    channel_map = io.read_physio_csv(physio_path) if physio_path else None

    vectors = []
    for person, probe, t_us in probes:
        if person != args.person:
            continue
        window = cut_window(series, events, t_us, cfg.window_s,
                            person_id=person, probe_id=probe)
        window = quality_filter(window, rules)
        if not window.accepted:
            continue
        fv = extract_feature_vector(window, geometry=geometry,
                                    pupil_baseline_mm=cfg.pupil_baseline_mm)
        if channel_map is not None:
            eda = _slice_physio(channel_map, person, "EDA",
                                window.start_us, window.end_us)
            bvp = _slice_physio(channel_map, person, "BVP",
                                window.start_us, window.end_us)
            extra = physio_features(eda=eda, bvp=bvp,
                                    min_scr_amplitude=cfg.min_scr_amplitude)
            fv = FeatureVector(person_id=fv.person_id, probe_id=fv.probe_id,
                               values={**fv.values, **extra})
        vectors.append(fv)

    out = _out_path(args, out_dir, "features.csv")
    io.write_features_csv(out, vectors)
    inputs = {"gaze": args.gaze, "probes": args.probes}
    if geometry_path:
        inputs["geometry"] = geometry_path
    if physio_path:
        inputs["physio"] = physio_path
    return inputs, [out]


def _cmd_synchrony(cfg: RunConfig, args, out_dir: str):
    geometry_path = getattr(args, "geometry", None)
    geometry = _geometry(cfg, geometry_path)
    measure = _MEASURE_NAMES[cfg.measure]
    probes = io.read_probes_csv(args.probes)
    label_map = io.read_labels_csv(args.labels)
    rules = _quality_rules(cfg)
    maps_dir = getattr(args, "maps_dir", None)
    if maps_dir:
        os.makedirs(maps_dir, exist_ok=True)

    by_probe: dict = {}
    for person, probe, t_us in probes:
        by_probe.setdefault(probe, []).append((person, t_us))

    cache: dict = {}

    def person_data(person: str):
        if person not in cache:
            path = os.path.join(args.gaze_dir, f"{person}.csv")
            series = load_samples(path, geometry)
            cache[person] = (path, series, detect_events(series, **_detector_params(cfg)))
        return cache[person]

    step_us = int(round(1e6 / cfg.isc_rate_hz))
    grid = (int(cfg.grid[0]), int(cfg.grid[1]))
    scores = []
    outputs = []
    for probe in sorted(by_probe):
        items: dict = {}
        labels: dict = {}
        for person, t_us in sorted(by_probe[probe]):
            if (person, probe) not in label_map:
                continue
            _path, series, events = person_data(person)
            window = cut_window(series, events, t_us, cfg.window_s,
                                person_id=person, probe_id=probe)
            window = quality_filter(window, rules)
            if not window.accepted:
                continue
            if measure == "ISC":
                clock = np.arange(window.start_us, window.end_us, step_us,
                                  dtype=np.int64)
                items[person] = resample_channels(window.samples, clock)
            else:
                try:
                    scanpath = scanpath_from_events(window.events, geometry.screen_px)
                except ValueError:
                    continue                      # no fixations in the window
                items[person] = scanpath
                if maps_dir:
                    dm = density_map(scanpath, grid=grid, sigma_px=cfg.sigma_px,
                                     weighting=cfg.weighting, geometry=geometry)
                    map_path = os.path.join(maps_dir, f"{probe}_{person}.pgm")
                    io.write_pgm16(map_path, dm.grid)
                    outputs.append(map_path)
            labels[person] = str(label_map[(person, probe)])
        if items:
            scores.extend(group_scores(
                items, labels, measure=measure, probe_id=probe,
                symmetrize=cfg.symmetrize, grid=grid, sigma_px=cfg.sigma_px,
                weighting=cfg.weighting, geometry=geometry))

    out = _out_path(args, out_dir, "synchrony.csv")
    io.write_synchrony_csv(out, scores)
    inputs = {"probes": args.probes, "labels": args.labels}
    if geometry_path:
        inputs["geometry"] = geometry_path
    for person in sorted(cache):
        inputs[f"gaze:{person}"] = cache[person][0]
    return inputs, [out] + outputs


def _cmd_cluster(cfg: RunConfig, args, out_dir: str):
    sequences = io.read_sequences_csv(args.sequences)
    matrix = distance_matrix(sequences, indel=cfg.indel,
                             substitution=cfg.substitution)
    dendrogram = ward_cluster(matrix)
    assignments = cut_dendrogram(dendrogram, cfg.k)

    assignments_path = os.path.join(out_dir, "assignments.csv")
    io.write_assignments_csv(assignments_path,
                             [s.person_id for s in sequences], assignments)
    dendrogram_path = os.path.join(out_dir, "dendrogram.json")
    io.write_json(dendrogram_path, dendrogram.as_dict())

    n = len(sequences)
    rows = [cluster_diagnostics(matrix, cut_dendrogram(dendrogram, k))
            for k in range(2, min(cfg.k_max, n - 1) + 1)]
    diagnostics_path = os.path.join(out_dir, "diagnostics.csv")
    io.write_diagnostics_csv(diagnostics_path, rows)
    return ({"sequences": args.sequences},
            [assignments_path, dendrogram_path, diagnostics_path])


def _cmd_physio(cfg: RunConfig, args, out_dir: str):
    channel_map = io.read_physio_csv(args.in_path)
    probes = io.read_probes_csv(args.probes)
    window_us = int(round(cfg.window_s * 1e6))
    vectors = []
    for person, probe, t_us in probes:
        eda = _slice_physio(channel_map, person, "EDA", t_us - window_us, t_us)
        bvp = _slice_physio(channel_map, person, "BVP", t_us - window_us, t_us)
        values = physio_features(eda=eda, bvp=bvp,
                                 min_scr_amplitude=cfg.min_scr_amplitude)
        vectors.append(FeatureVector(person_id=person, probe_id=probe,
                                     values=values))
    out = _out_path(args, out_dir, "physio_features.csv")
    io.write_features_csv(out, vectors)
    return {"physio": args.in_path, "probes": args.probes}, [out]


def _cmd_train(cfg: RunConfig, args, out_dir: str):
    dataset = _labeled_dataset(args.features, args.labels)
    spec = _model_spec(cfg)
    result = cross_validate(dataset, spec, scheme=cfg.scheme, k=cfg.kfold_k,
                            balance_method=cfg.balance, smote_k=cfg.smote_k,
                            threshold=cfg.threshold)
    metrics_path = os.path.join(out_dir, "metrics.json")
    io.write_json(metrics_path, result.as_dict())

    matrix, builder = build_design_matrix(dataset)
    labels = np.asarray(dataset.labels)
    balanced_x, balanced_y = balance(matrix, labels, method=cfg.balance,
                                     k=cfg.smote_k, seed=cfg.seed)
    model = make_model(spec).fit(balanced_x, balanced_y)
    model_path = os.path.join(out_dir, "model.json")
    io.atomic_write_text(model_path, model_to_json(model, builder, spec) + "\n")
    return ({"features": args.features, "labels": args.labels},
            [metrics_path, model_path])


def _cmd_evaluate(cfg: RunConfig, args, out_dir: str):
    model, _builder, matrix, labels = _load_scoring_inputs(args)
    report = evaluate_scores(model.predict_scores(matrix), labels,
                             threshold=cfg.threshold)
    out = _out_path(args, out_dir, "metrics.json")
    io.write_json(out, report.as_dict())
    return ({"model": args.model_path, "features": args.features,
             "labels": args.labels}, [out])


def _cmd_sweep(cfg: RunConfig, args, out_dir: str):
    model, _builder, matrix, labels = _load_scoring_inputs(args)
    sweep = threshold_sweep(model.predict_scores(matrix), labels)
    out = _out_path(args, out_dir, "sweep.csv")
    io.write_sweep_csv(out, sweep)
    return ({"model": args.model_path, "features": args.features,
             "labels": args.labels}, [out])


def _cmd_importance(cfg: RunConfig, args, out_dir: str):
    model, builder, matrix, labels = _load_scoring_inputs(args)
    importances = permutation_importance(model, matrix, labels,
                                         repeats=cfg.repeats, seed=cfg.seed)
    names = list(builder.kept_names_)
    if cfg.top_k is not None:
        idx = select_top_k(importances, min(cfg.top_k, len(importances)))
        names = [names[i] for i in idx]
        importances = importances[idx]
    out = _out_path(args, out_dir, "importance.csv")
    io.write_importance_csv(out, names, importances)
    return ({"model": args.model_path, "features": args.features,
             "labels": args.labels}, [out])


def _load_tracklets(path: str, cfg: RunConfig):
    frames, fps = load_poses(path)
    n_frames = frames[-1].frame + 1 if frames else 0
    tracklets = track_persons(frames, iou_threshold=cfg.iou_threshold,
                              max_gap=cfg.max_gap)
    return tracklets, n_frames, fps


def _cmd_handraise_train(cfg: RunConfig, args, out_dir: str):
    with open(args.intervals, "r", encoding="utf-8") as fh:
        interval_payload = json.load(fh)
    basenames = [os.path.basename(p) for p in args.poses]
    unknown_files = sorted(set(interval_payload) - set(basenames))
    if unknown_files:
        raise IngestError("intervals reference unknown pose file(s): "
                          + ", ".join(unknown_files))

    feature_matrices = []
    interval_lists = []
    fps_seen = None
    for path, basename in zip(args.poses, basenames):
        tracklets, n_frames, fps = _load_tracklets(path, cfg)
        if fps_seen is None:
            fps_seen = fps
        elif fps != fps_seen:
            raise IngestError(f"pose files disagree on fps: {fps_seen} vs {fps}")
        file_intervals = interval_payload.get(basename, {})
        track_ids = {t.track_id for t in tracklets}
        unknown_tracks = sorted(set(file_intervals) - track_ids)
        if unknown_tracks:
            raise IngestError(f"{basename}: intervals reference unknown track(s): "
                              + ", ".join(unknown_tracks))
        for tracklet in tracklets:
            feature_matrices.append(tracklet_features(tracklet, n_frames))
            interval_lists.append([(float(a), float(b)) for a, b
                                   in file_intervals.get(tracklet.track_id, [])])

    model = train_hand_raise(feature_matrices, interval_lists, fps_seen,
                             size=cfg.hr_window_size, stride=cfg.hr_train_stride,
                             n_trees=cfg.hr_n_trees, max_depth=cfg.hr_max_depth,
                             class_weight=cfg.hr_class_weight, seed=cfg.seed)
    out = _out_path(args, out_dir, "handraise_model.json")
    io.atomic_write_text(out, model.to_json() + "\n")
    inputs = {"intervals": args.intervals}
    for path, basename in zip(args.poses, basenames):
        inputs[f"poses:{basename}"] = path
    return inputs, [out]


def _cmd_handraise_annotate(cfg: RunConfig, args, out_dir: str):
    with open(args.model_path, "r", encoding="utf-8") as fh:
        model = HandRaiseModel.from_json(fh.read())
    tracklets, n_frames, fps = _load_tracklets(args.poses, cfg)
    events_by_student: dict = {}
    counts: dict = {}
    for tracklet in tracklets:
        features = tracklet_features(tracklet, n_frames)
        annotation = annotate(model, features, fps,
                              stride=cfg.hr_annotate_stride,
                              threshold=cfg.hr_threshold,
                              merge_gap_s=cfg.merge_gap_s,
                              min_duration_s=cfg.min_duration_s)
        events_by_student[tracklet.track_id] = annotation.events
        counts[tracklet.track_id] = len(annotation.events)
    events_path = os.path.join(out_dir, "raise_events.csv")
    io.write_raise_events_csv(events_path, events_by_student)
    counts_path = os.path.join(out_dir, "counts.csv")
    io.write_counts_csv(counts_path, counts)
    return ({"poses": args.poses, "model": args.model_path},
            [events_path, counts_path])


def _cmd_handraise_eval(cfg: RunConfig, args, out_dir: str):
    truth = io.read_counts_csv(args.truth)
    predicted = io.read_counts_csv(args.pred)
    mae = evaluate_counts(truth, predicted)
    out = _out_path(args, out_dir, "count_error.json")
    io.write_json(out, {"mae": mae, "n_students": len(truth)})
    return {"truth": args.truth, "pred": args.pred}, [out]


_HANDLERS = {
    "events": _cmd_events,
    "features": _cmd_features,
    "synchrony": _cmd_synchrony,
    "cluster": _cmd_cluster,
    "physio": _cmd_physio,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "importance": _cmd_importance,
    "handraise-train": _cmd_handraise_train,
    "handraise-annotate": _cmd_handraise_annotate,
    "handraise-eval": _cmd_handraise_eval,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add(parser: argparse.ArgumentParser, flag: str, **kwargs) -> None:
    kwargs.setdefault("default", argparse.SUPPRESS)
    parser.add_argument(flag, **kwargs)


def _global_flags(parser: argparse.ArgumentParser) -> None:
    _add(parser, "--config", help="JSON config file; flags override it")
    _add(parser, "--seed", type=int, help="master random seed")
    _add(parser, "--out-dir", dest="out_dir", help="directory for outputs and manifest")
    _add(parser, "--threads", type=int,
         help="advisory thread count (ATTNKIT_THREADS is the fallback)")


def _detection_flags(parser: argparse.ArgumentParser) -> None:
    _add(parser, "--dispersion-px", dest="dispersion_px", type=float)
    _add(parser, "--min-fixation-ms", dest="min_fixation_ms", type=float)
    _add(parser, "--velocity-deg-s", dest="velocity_deg_s", type=float)
    _add(parser, "--velocity-px-ms", dest="velocity_px_ms", type=float)
    _add(parser, "--min-blink-ms", dest="min_blink_ms", type=float)
    _add(parser, "--overlong-blink-ms", dest="overlong_blink_ms", type=float)


def _window_flags(parser: argparse.ArgumentParser) -> None:
    _add(parser, "--window-s", dest="window_s", type=float)
    _add(parser, "--min-tracking-ratio", dest="min_tracking_ratio", type=float)


def _geometry_flags(parser: argparse.ArgumentParser) -> None:
    _add(parser, "--geometry", help="JSON file with screen_px/screen_mm/viewing_distance_mm")
    _add(parser, "--screen-px", dest="screen_px", nargs=2, type=int,
         metavar=("W", "H"))
    _add(parser, "--screen-mm", dest="screen_mm", nargs=2, type=float,
         metavar=("W", "H"))
    _add(parser, "--viewing-distance-mm", dest="viewing_distance_mm", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnkit",
        description="Deterministic analytics over gaze, physiology, and pose data.")
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("events", help="detect fixations, saccades, and blinks")
    _global_flags(p)
    _geometry_flags(p)
    _detection_flags(p)
    p.add_argument("--in", dest="in_path", required=True, help="gaze samples CSV")
    _add(p, "--out", help="events CSV path (default: OUT_DIR/events.csv)")

    p = sub.add_parser("features", help="per-probe gaze feature vectors for one person")
    _global_flags(p)
    _geometry_flags(p)
    _detection_flags(p)
    _window_flags(p)
    p.add_argument("--gaze", required=True, help="single-person gaze samples CSV")
    p.add_argument("--probes", required=True, help="probes CSV (person_id,probe_id,t_us)")
    p.add_argument("--person", required=True, help="person_id the gaze file belongs to")
    _add(p, "--physio", help="optional physiology CSV merged as extra features")
    _add(p, "--pupil-baseline-mm", dest="pupil_baseline_mm", type=float)
    _add(p, "--min-scr-amplitude", dest="min_scr_amplitude", type=float)
    _add(p, "--out")

    p = sub.add_parser("synchrony", help="per-probe gaze synchrony scores")
    _global_flags(p)
    _geometry_flags(p)
    _detection_flags(p)
    _window_flags(p)
    p.add_argument("--gaze-dir", dest="gaze_dir", required=True,
                   help="directory with <person_id>.csv gaze files")
    p.add_argument("--probes", required=True)
    p.add_argument("--labels", required=True, help="labels CSV (person_id,probe_id,label)")
    _add(p, "--measure", choices=sorted(_MEASURE_NAMES))
    _add(p, "--grid", nargs=2, type=int, metavar=("COLS", "ROWS"))
    _add(p, "--sigma-px", dest="sigma_px", type=float)
    _add(p, "--weighting", choices=["count", "duration"])
    _add(p, "--directed", dest="symmetrize", action="store_const", const=False,
         help="use the directed divergence instead of the symmetrized one")
    _add(p, "--isc-rate-hz", dest="isc_rate_hz", type=float)
    _add(p, "--maps-dir", dest="maps_dir", help="also export density maps as 16-bit PGM")
    _add(p, "--out")

    p = sub.add_parser("cluster", help="cluster state sequences")
    _global_flags(p)
    p.add_argument("--sequences", required=True, help="sequences CSV (person_id,s1..sL)")
    _add(p, "--indel", type=float)
    _add(p, "--substitution", type=float)
    _add(p, "--k", type=int, help="cluster count for assignments.csv")
    _add(p, "--k-max", dest="k_max", type=int, help="largest k in diagnostics.csv")

    p = sub.add_parser("physio", help="per-probe physiology feature vectors")
    _global_flags(p)
    _window_flags(p)
    p.add_argument("--in", dest="in_path", required=True,
                   help="physiology CSV (person_id,channel,t_us,value)")
    p.add_argument("--probes", required=True)
    _add(p, "--min-scr-amplitude", dest="min_scr_amplitude", type=float)
    _add(p, "--out")

    p = sub.add_parser("train", help="cross-validate and fit a final classifier")
    _global_flags(p)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    _add(p, "--model-kind", dest="model",
         choices=["logistic_regression", "random_forest"])
    _add(p, "--l2", type=float)
    _add(p, "--epochs", type=int)
    _add(p, "--learning-rate", dest="learning_rate", type=float)
    _add(p, "--n-trees", dest="n_trees", type=int)
    _add(p, "--max-depth", dest="max_depth", type=int)
    _add(p, "--class-weight", dest="class_weight", choices=["none", "balanced"])
    _add(p, "--balance", choices=["none", "random", "smote"])
    _add(p, "--smote-k", dest="smote_k", type=int)
    _add(p, "--scheme", choices=["lopo", "kfold"])
    _add(p, "--kfold-k", dest="kfold_k", type=int)
    _add(p, "--threshold", type=float)

    for name, help_text in (("evaluate", "score a saved model on labeled features"),
                            ("sweep", "decision-threshold sweep for a saved model"),
                            ("importance", "permutation feature importance")):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p)
        p.add_argument("--model", dest="model_path", required=True,
                       help="model JSON produced by train")
        p.add_argument("--features", required=True)
        p.add_argument("--labels", required=True)
        if name == "evaluate":
            _add(p, "--threshold", type=float)
        if name == "importance":
            _add(p, "--repeats", type=int)
            _add(p, "--top-k", dest="top_k", type=int)
        _add(p, "--out")

    p = sub.add_parser("handraise-train", help="train the hand-raise window classifier")
    _global_flags(p)
    p.add_argument("--poses", nargs="+", required=True, help="pose JSON-lines files")
    p.add_argument("--intervals", required=True,
                   help="JSON {pose file basename: {track id: [[start_s, end_s], ...]}}")
    _add(p, "--window-size", dest="hr_window_size", type=int)
    _add(p, "--train-stride", dest="hr_train_stride", type=int)
    _add(p, "--iou-threshold", dest="iou_threshold", type=float)
    _add(p, "--max-gap", dest="max_gap", type=int)
    _add(p, "--hr-n-trees", dest="hr_n_trees", type=int)
    _add(p, "--hr-max-depth", dest="hr_max_depth", type=int)
    _add(p, "--hr-class-weight", dest="hr_class_weight", choices=["none", "balanced"])
    _add(p, "--out")

    p = sub.add_parser("handraise-annotate", help="annotate a pose stream with raise events")
    _global_flags(p)
    p.add_argument("--poses", required=True, help="pose JSON-lines file")
    p.add_argument("--model", dest="model_path", required=True)
    _add(p, "--annotate-stride", dest="hr_annotate_stride", type=int)
    _add(p, "--iou-threshold", dest="iou_threshold", type=float)
    _add(p, "--max-gap", dest="max_gap", type=int)
    _add(p, "--hr-threshold", dest="hr_threshold", type=float)
    _add(p, "--merge-gap-s", dest="merge_gap_s", type=float)
    _add(p, "--min-duration-s", dest="min_duration_s", type=float)

    p = sub.add_parser("handraise-eval", help="mean absolute count error")
    _global_flags(p)
    p.add_argument("--pred", required=True, help="predicted counts CSV")
    p.add_argument("--truth", required=True, help="ground-truth counts CSV")
    _add(p, "--out")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        os.makedirs(cfg.out_dir, exist_ok=True)
        inputs, outputs = _HANDLERS[args.command](cfg, args, cfg.out_dir)
        manifest_path = os.path.join(cfg.out_dir, "manifest.json")
        io.write_manifest(manifest_path, args.command, asdict(cfg), inputs,
                          outputs, __version__)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, IngestError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
