"""Acceptance gate: one test per binding behavioral guarantee.

Each test pins published anchor values, brute-force-oracle equality, or a
determinism contract, and additionally asserts its own runtime budget so the
whole gate stays fast enough to run on every change.
"""

import json
import math
import time

import numpy as np
import pytest

from attnkit import cli
from attnkit.gaze import detect_events
from attnkit.handraise import postprocess_probabilities
from attnkit.ml import (Dataset, ModelSpec, above_chance, average_precision,
                        cross_validate, f1_score)
from attnkit.physio import PhysioSeries, bvp_features, decompose_eda, scr_peaks
from attnkit.sequences import (diagnostics, distance_matrix, om_distance,
                               ward_cluster)
from attnkit.sequences import cut as cut_dendrogram
from attnkit.synchrony import Scanpath, density_map, kl_divergence, multimatch
from oracles import (build_stepwise_trace, edit_distance_bruteforce,
                     eda_decompose_bruteforce, event_signature,
                     multimatch_bruteforce, postprocess_bruteforce,
                     random_stepwise_plan)


class Budget:
    """Context manager asserting wall-clock runtime stays inside a bound."""

    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            elapsed = time.perf_counter() - self.start
            assert elapsed < self.seconds, (
                f"runtime {elapsed:.2f}s exceeded the {self.seconds}s budget")


def test_accept_01_metric_formulas_match_published_anchors():
    with Budget(0.1):
        assert f1_score(0.818, 0.709) == pytest.approx(0.760, abs=0.001)
        assert above_chance(0.396, chance=0.243) == pytest.approx(0.2021, abs=0.0001)
        assert above_chance(0.267, chance=0.151) == pytest.approx(0.1366, abs=0.0001)


def test_accept_02_uniform_scores_auc_pr_equals_prevalence():
    with Budget(5.0):
        rng = np.random.default_rng(2024)
        n = 10_000
        for prevalence in (0.151, 0.393):
            labels = np.zeros(n, dtype=int)
            labels[:int(round(prevalence * n))] = 1
            rng.shuffle(labels)
            scores = rng.random(n)
            assert average_precision(scores, labels) == pytest.approx(
                prevalence, abs=0.02)


def test_accept_03_om_distance_bruteforce_equality_and_metric_axioms():
    with Budget(10.0):
        rng = np.random.default_rng(7)
        alphabet = ["a", "b", "c", "d"]

        def random_sequence(max_len=10, min_len=0):
            length = int(rng.integers(min_len, max_len + 1))
            return [alphabet[i] for i in rng.integers(0, len(alphabet), length)]

        for _ in range(200):
            a, b = random_sequence(), random_sequence()
            assert om_distance(a, b) == edit_distance_bruteforce(a, b)

        for _ in range(1000):
            a = random_sequence(8, 1)
            b = random_sequence(8, 1)
            c = random_sequence(8, 1)
            assert om_distance(a, a) == 0.0
            assert om_distance(a, b) == om_distance(b, a)
            assert om_distance(a, c) <= om_distance(a, b) + om_distance(b, c) + 1e-9


def test_accept_04_multimatch_and_kld_anchors():
    with Budget(5.0):
        screen = (1920, 1080)
        rng = np.random.default_rng(11)

        path = Scanpath(rng.uniform((0, 0), screen, size=(6, 2)),
                        rng.uniform(80, 600, size=6), screen)
        result = multimatch(path, path)
        assert (result.shape, result.direction, result.length,
                result.position, result.duration) == (1.0, 1.0, 1.0, 1.0, 1.0)
        assert result.overall == 1.0

        for _ in range(50):
            pos_a = rng.uniform((0, 0), screen, size=(3, 2))
            pos_b = rng.uniform((0, 0), screen, size=(3, 2))
            dur_a = rng.uniform(80, 600, size=3)
            dur_b = rng.uniform(80, 600, size=3)
            got = multimatch(Scanpath(pos_a, dur_a, screen),
                             Scanpath(pos_b, dur_b, screen))
            want = multimatch_bruteforce(pos_a, dur_a, pos_b, dur_b, screen)
            for dim in ("shape", "direction", "length", "position",
                        "duration", "overall"):
                assert getattr(got, dim) == pytest.approx(want[dim], abs=1e-9)

        fixations = Scanpath(rng.uniform((0, 0), screen, size=(8, 2)),
                             rng.uniform(80, 600, size=8), screen)
        dm = density_map(fixations)
        assert kl_divergence(dm, dm) <= 1e-9
        directed = kl_divergence([0.5, 0.5], [0.25, 0.75], symmetrize=False)
        assert directed == pytest.approx(0.1438, abs=1e-4)


def test_accept_05_handraise_postprocess_bruteforce_equality():
    with Budget(5.0):
        rng = np.random.default_rng(5)
        for _ in range(500):
            n = int(rng.integers(0, 240))
            probs = rng.random(n)
            probs[rng.random(n) < 0.15] = np.nan
            fps = float(rng.choice([10.0, 24.0, 30.0]))
            got = postprocess_probabilities(probs, fps)
            want = postprocess_bruteforce(probs, fps)
            assert len(got) == len(want)
            for event, (start_s, end_s, mean_p) in zip(got, want):
                assert event.start_s == start_s
                assert event.end_s == end_s
                assert event.mean_probability == mean_p

        # two runs of hot frames [0,2] and [5,7] at 1 fps: the 2-frame gap is
        # under the 4 s merge limit, so one event spans frames 0..7
        merged = postprocess_probabilities(
            np.array([0.9, 0.9, 0.9, 0.1, 0.1, 0.9, 0.9, 0.9]), fps=1.0)
        assert len(merged) == 1
        assert (merged[0].start_s, merged[0].end_s) == (0.0, 8.0)

        # an 0.8 s burst is below the 1 s minimum duration and is dropped
        assert postprocess_probabilities(np.full(8, 0.9), fps=10.0) == []


def test_accept_06_event_detection_bruteforce_equality():
    with Budget(5.0):
        rng = np.random.default_rng(2)
        for _ in range(120):
            plan = random_stepwise_plan(rng)
            series, expected = build_stepwise_trace(plan, rng)
            events = detect_events(series)
            assert event_signature(events) == expected


def _synthetic_windows(effect_size, seed, n_persons=60, n_windows=15,
                       prevalence=0.25, n_features=10, n_informative=3):
    rng = np.random.default_rng(seed)
    rows, labels, person_ids = [], [], []
    for p in range(n_persons):
        person_shift = rng.normal(0.0, 0.3, size=n_features)
        for _ in range(n_windows):
            y = int(rng.random() < prevalence)
            x = person_shift + rng.normal(0.0, 1.0, size=n_features)
            if y:
                x[:n_informative] += effect_size
            rows.append(x)
            labels.append(y)
            person_ids.append(f"s{p:02d}")
    matrix = np.asarray(rows)
    return Dataset(person_ids=tuple(person_ids),
                   probe_ids=tuple(f"w{i}" for i in range(len(rows))),
                   matrix=matrix,
                   feature_names=tuple(f"f{j}" for j in range(n_features)),
                   labels=np.asarray(labels))


def test_accept_07_lopo_auc_pr_separates_effect_sizes():
    with Budget(60.0):
        spec = ModelSpec(kind="logistic_regression", seed=0)

        informative = _synthetic_windows(effect_size=1.5, seed=41)
        result = cross_validate(informative, spec, scheme="lopo")
        assert result.aggregate.auc_pr >= 0.25 + 0.15

        null = _synthetic_windows(effect_size=0.0, seed=42)
        realized = float(np.mean(null.labels))
        result = cross_validate(null, spec, scheme="lopo")
        assert result.aggregate.auc_pr == pytest.approx(realized, abs=0.03)


def test_accept_08_sequence_clustering_recovery_and_diagnostic_ranges():
    with Budget(10.0):
        rng = np.random.default_rng(3)
        length = 15

        def population(dominant, rare, count):
            out = []
            for _ in range(count):
                states = [dominant if rng.random() < 0.85 else rare
                          for _ in range(length)]
                out.append(tuple(states))
            return out

        sequences = population("focus", "doodle", 20) + population("wander", "blank", 20)
        truth = np.array([0] * 20 + [1] * 20)
        matrix = distance_matrix(sequences)
        assignments = cut_dendrogram(ward_cluster(matrix), 2)

        # exact recovery up to relabeling
        first = assignments[:20]
        second = assignments[20:]
        assert len(set(first)) == 1 and len(set(second)) == 1
        assert first[0] != second[0]
        report = diagnostics(matrix, assignments)
        assert report.average_silhouette_width > 0.5

        for _ in range(100):
            k = int(rng.integers(2, 7))
            while True:
                random_assignments = rng.integers(0, k, size=len(sequences))
                if len(np.unique(random_assignments)) >= 2:
                    break
            report = diagnostics(matrix, random_assignments)
            assert -1.0 <= report.average_silhouette_width <= 1.0
            assert 0.0 <= report.huberts_c <= 1.0
            assert -1.0 <= report.point_biserial <= 1.0
        _ = truth


def test_accept_09_physio_scr_recovery_additivity_heart_rate():
    with Budget(5.0):
        rate = 4.0
        t = np.arange(int(60.0 * rate)) / rate
        bump = np.zeros_like(t)
        rising = (t >= 40.0) & (t < 42.0)
        bump[rising] = 0.5 * (t[rising] - 40.0) / 2.0
        decaying = t >= 42.0
        bump[decaying] = 0.5 * np.exp(-(t[decaying] - 42.0) / 8.0)
        raw = 2.0 + bump

        series = PhysioSeries("p1", "EDA", raw, rate_hz=rate)
        decomposition = decompose_eda(series)
        peaks = scr_peaks(decomposition.phasic, rate)
        assert len(peaks) == 1
        peak = peaks[0]

        _, _, phasic_ref = eda_decompose_bruteforce(raw, rate)
        sample_s = 1.0 / rate
        peak_idx = int(round(peak.peak_us * rate / 1e6))
        trough_idx = int(round(peak.onset_us * rate / 1e6))
        amplitude_ref = phasic_ref[peak_idx] - phasic_ref[trough_idx]
        assert peak.amplitude == pytest.approx(amplitude_ref, rel=0.05)
        assert abs(peak.rise_time_s - 2.0) <= sample_s
        half_target = phasic_ref[peak_idx] - amplitude_ref / 2.0
        recovery_ref = next((i - peak_idx) / rate
                            for i in range(peak_idx + 1, len(phasic_ref))
                            if phasic_ref[i] <= half_target)
        assert peak.recovery_time_s is not None
        assert abs(peak.recovery_time_s - recovery_ref) <= sample_s

        # decomposition components add back bitwise
        rng = np.random.default_rng(9)
        noisy = decompose_eda(PhysioSeries("p2", "EDA",
                                           2.0 + rng.normal(0, 0.2, 300),
                                           rate_hz=rate))
        assert np.array_equal(noisy.tonic + noisy.phasic, noisy.cleaned)

        # a 1 Hz pulse wave reads as 60 +/- 1 bpm
        bvp_rate = 64.0
        tt = np.arange(int(30.0 * bvp_rate)) / bvp_rate
        result = bvp_features(PhysioSeries("p3", "BVP",
                                           np.sin(2 * math.pi * tt),
                                           rate_hz=bvp_rate))
        assert result.rate_bpm is not None
        assert abs(float(np.median(result.rate_bpm)) - 60.0) <= 1.0
        interior_bpm = 60.0 / (np.diff(result.peak_indices)[1:-1] / bvp_rate)
        assert np.all(np.abs(interior_bpm - 60.0) <= 1.0)


def test_accept_10_cli_train_evaluate_byte_determinism(tmp_path):
    with Budget(30.0):
        rng = np.random.default_rng(13)
        n_features = 5
        feature_lines = ["person_id,probe_id," +
                         ",".join(f"f{j}" for j in range(n_features))]
        label_lines = ["person_id,probe_id,label"]
        for p in range(6):
            for w in range(10):
                y = int(rng.random() < 0.3)
                x = rng.normal(0, 1, n_features)
                if y:
                    x[:2] += 1.2
                feature_lines.append(f"s{p},w{w}," + ",".join(f"{v:.6f}" for v in x))
                label_lines.append(f"s{p},w{w},{y}")
        features = tmp_path / "features.csv"
        features.write_text("\n".join(feature_lines) + "\n")
        labels = tmp_path / "labels.csv"
        labels.write_text("\n".join(label_lines) + "\n")

        def run_pipeline(tag):
            train_dir = tmp_path / f"train_{tag}"
            rc = cli.main(["train", "--features", str(features),
                           "--labels", str(labels), "--out-dir", str(train_dir),
                           "--model-kind", "random_forest", "--n-trees", "30",
                           "--balance", "smote", "--scheme", "kfold",
                           "--kfold-k", "3", "--seed", "11"])
            assert rc == 0
            eval_dir = tmp_path / f"eval_{tag}"
            rc = cli.main(["evaluate", "--model", str(train_dir / "model.json"),
                           "--features", str(features), "--labels", str(labels),
                           "--out-dir", str(eval_dir), "--seed", "11"])
            assert rc == 0
            return {
                "cv_metrics": (train_dir / "metrics.json").read_bytes(),
                "model": (train_dir / "model.json").read_bytes(),
                "eval_metrics": (eval_dir / "metrics.json").read_bytes(),
            }

        first = run_pipeline("a")
        second = run_pipeline("b")
        assert first["cv_metrics"] == second["cv_metrics"]
        assert first["model"] == second["model"]
        assert first["eval_metrics"] == second["eval_metrics"]
        assert json.loads(first["model"].decode())["model"]["kind"] == "random_forest"
