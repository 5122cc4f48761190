"""Thought-probe sequence clustering: edit distance, Ward linkage, diagnostics.

Per-person categorical state sequences are compared with an optimal-matching
edit distance (insert/delete/substitute, constant unit costs by default),
clustered agglomeratively with the Ward criterion via Lance-Williams updates,
and assessed with average silhouette width, Hubert's C, and the point-biserial
correlation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .validation import as_float_array

__all__ = [
    "ProbeSequence",
    "Dendrogram",
    "ClusterDiagnostics",
    "om_distance",
    "distance_matrix",
    "ward_cluster",
    "cut",
    "diagnostics",
]


@dataclass(frozen=True)
class ProbeSequence:
    """One person's ordered categorical thought-probe states."""

    person_id: str
    states: tuple[str, ...]
    alphabet: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        states = tuple(self.states)
        if len(states) == 0:
            raise ValueError("sequence must be non-empty")
        alphabet = self.alphabet
        if alphabet is None:
            alphabet = tuple(sorted(set(states)))
        else:
            alphabet = tuple(alphabet)
            for s in states:
                if s not in alphabet:
                    raise ValueError(f"symbol outside alphabet: {s!r}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alphabet", alphabet)

    def __len__(self) -> int:
        return len(self.states)


def _states_of(seq) -> tuple:
    if isinstance(seq, ProbeSequence):
        return seq.states
    return tuple(seq)


def om_distance(a, b, indel: float = 1.0, substitution: float = 1.0) -> float:
    """Minimal total cost to transform one sequence into the other.

    Classic edit-distance dynamic program over insertions, deletions and
    substitutions.  Accepts ProbeSequence objects (whose alphabets must
    agree) or plain symbol sequences.
    """
    if isinstance(a, ProbeSequence) and isinstance(b, ProbeSequence):
        if set(a.alphabet) != set(b.alphabet):
            raise ValueError("alphabet mismatch")
    sa = _states_of(a)
    sb = _states_of(b)
    if indel < 0 or substitution < 0:
        raise ValueError("costs must be non-negative")

    m, n = len(sa), len(sb)
    prev = [j * indel for j in range(n + 1)]
    for i in range(1, m + 1):
        cur = [i * indel] + [0.0] * n
        ai = sa[i - 1]
        for j in range(1, n + 1):
            sub = prev[j - 1] + (0.0 if ai == sb[j - 1] else substitution)
            cur[j] = min(sub, prev[j] + indel, cur[j - 1] + indel)
        prev = cur
    return float(prev[n])


def distance_matrix(sequences: Sequence, indel: float = 1.0,
                    substitution: float = 1.0) -> np.ndarray:
    """Symmetric pairwise om_distance matrix with a zero diagonal."""
    n = len(sequences)
    if n < 2:
        raise ValueError("need at least 2 sequences")
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = om_distance(sequences[i], sequences[j], indel=indel,
                            substitution=substitution)
            out[i, j] = d
            out[j, i] = d
    return out


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge history: leaves 0..n-1, internal nodes n..2n-2."""

    n_leaves: int
    merges: tuple[Merge, ...]

    def __post_init__(self) -> None:
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError("a dendrogram over n leaves has exactly n-1 merges")

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def as_dict(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "merges": [
                {"left": m.left, "right": m.right, "height": m.height, "size": m.size}
                for m in self.merges
            ],
        }


def _check_dissimilarity(matrix) -> np.ndarray:
    d = as_float_array(matrix, "matrix")
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(d)):
        raise ValueError("matrix must be finite")
    if not np.allclose(d, d.T, atol=1e-9):
        raise ValueError("matrix must be symmetric")
    if np.any(np.diag(d) != 0):
        raise ValueError("matrix diagonal must be zero")
    if np.any(d < 0):
        raise ValueError("dissimilarities must be non-negative")
    return d


def ward_cluster(matrix, squared: bool = True) -> Dendrogram:
    """Agglomerative Ward clustering from a precomputed dissimilarity matrix.

    The Lance-Williams Ward update runs on squared input dissimilarities by
    default (pass squared=False to treat the input as already squared or to
    force the raw scale); merge heights are reported in that working scale.
    Ties are broken toward the pair whose smallest leaf indices are
    lexicographically least, so the merge order is deterministic.
    """
    d = _check_dissimilarity(matrix)
    n = d.shape[0]
    if n < 2:
        raise ValueError("need at least 2 items")
    work = d ** 2 if squared else d.copy()

    total = 2 * n - 1
    big = np.full((total, total), np.inf)
    big[:n, :n] = work
    np.fill_diagonal(big, np.inf)
    sizes = np.zeros(total, dtype=np.int64)
    sizes[:n] = 1
    reps = np.arange(total)                 # smallest leaf index per node
    active = list(range(n))

    merges: list[Merge] = []
    for step in range(n - 1):
        idx = np.array(active)
        sub = big[np.ix_(idx, idx)]
        best = sub.min()
        pairs = np.argwhere(sub == best)
        # ties resolved by the lexicographically smallest (min-leaf) pair
        best_key = None
        pick = None
        for r, c in pairs:
            if r >= c:
                continue
            i, j = int(idx[r]), int(idx[c])
            key = tuple(sorted((int(reps[i]), int(reps[j]))))
            if best_key is None or key < best_key:
                best_key = key
                pick = (i, j)
        i, j = pick
        new = n + step
        sizes[new] = sizes[i] + sizes[j]
        reps[new] = min(reps[i], reps[j])
        left, right = (i, j) if reps[i] <= reps[j] else (j, i)
        merges.append(Merge(left=left, right=right, height=float(best),
                            size=int(sizes[new])))

        ni, nj = sizes[i], sizes[j]
        for k in active:
            if k == i or k == j:
                continue
            nk = sizes[k]
            upd = ((ni + nk) * big[i, k] + (nj + nk) * big[j, k]
                   - nk * best) / (ni + nj + nk)
            big[new, k] = upd
            big[k, new] = upd
        active.remove(i)
        active.remove(j)
        active.append(new)

    return Dendrogram(n_leaves=n, merges=tuple(merges))


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Cut into k clusters; labels are 1-based, numbered by descending size.

    Ties in cluster size are ordered by the smallest member index.  The
    result is an int array aligned with the leaf order of the input matrix.
    """
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step, m in enumerate(dendrogram.merges[: n - k]):
        clusters[n + step] = clusters.pop(m.left) + clusters.pop(m.right)

    groups = sorted(clusters.values(), key=lambda g: (-len(g), min(g)))
    labels = np.zeros(n, dtype=np.int64)
    for rank, members in enumerate(groups, start=1):
        labels[members] = rank
    return labels


@dataclass(frozen=True)
class ClusterDiagnostics:
    k: int
    average_silhouette_width: float
    huberts_c: float
    point_biserial: float


def diagnostics(matrix, assignments) -> ClusterDiagnostics:
    """Cluster-quality scores from a dissimilarity matrix and labels.

    ASW: mean silhouette, singleton clusters contributing 0.  Hubert's C:
    (S - S_min)/(S_max - S_min) where S sums within-cluster dissimilarities
    and S_min/S_max sum the same count of globally smallest/largest ones
    (0 = as compact as the data allows).  Point-biserial: Pearson correlation
    between the pairwise dissimilarity vector and the same-cluster indicator
    (tight clusterings are strongly negative); zero variance yields 0.
    """
    d = _check_dissimilarity(matrix)
    labels = np.asarray(assignments)
    n = d.shape[0]
    if labels.shape != (n,):
        raise ValueError("assignments must have one label per item")
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette undefined for k = 1")

    sil = np.zeros(n)
    for i in range(n):
        same = (labels == labels[i])
        same[i] = False
        if not same.any():
            continue                       # singleton contributes 0
        a = float(d[i, same].mean())
        b = min(float(d[i, labels == lab].mean()) for lab in uniq if lab != labels[i])
        denom = max(a, b)
        sil[i] = 0.0 if denom == 0 else (b - a) / denom
    asw = float(sil.mean())

    iu, ju = np.triu_indices(n, k=1)
    dists = d[iu, ju]
    within = (labels[iu] == labels[ju])
    n_within = int(within.sum())
    if n_within == 0 or n_within == len(dists):
        huberts = 0.0
    else:
        s = float(dists[within].sum())
        ordered = np.sort(dists)
        s_min = float(ordered[:n_within].sum())
        s_max = float(ordered[-n_within:].sum())
        huberts = 0.0 if s_max == s_min else (s - s_min) / (s_max - s_min)

    indicator = within.astype(float)
    if np.ptp(dists) == 0 or np.ptp(indicator) == 0:
        pb = 0.0
    else:
        pb = float(np.corrcoef(dists, indicator)[0, 1])

    return ClusterDiagnostics(k=len(uniq), average_silhouette_width=asw,
                              huberts_c=huberts, point_biserial=pb)
