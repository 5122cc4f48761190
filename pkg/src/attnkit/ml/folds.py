"""Person-level cross-validation folds.

Splits always keep every row of a person on the same side, so a model is
never evaluated on windows from a person it trained on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import check_random_state

__all__ = ["Fold", "leave_one_person_out", "person_kfold"]


@dataclass(frozen=True)
class Fold:
    train_idx: np.ndarray
    test_idx: np.ndarray
    test_persons: tuple


def _person_array(person_ids) -> np.ndarray:
    persons = np.asarray(person_ids)
    if persons.ndim != 1 or len(persons) == 0:
        raise ValueError("person_ids must be a non-empty 1-D sequence")
    return persons


def leave_one_person_out(person_ids) -> list:
    """One fold per person (sorted order), testing on that person only."""
    persons = _person_array(person_ids)
    unique = sorted(set(persons.tolist()))
    if len(unique) < 2:
        raise ValueError("leave-one-person-out needs at least two persons")
    folds = []
    for person in unique:
        test = np.flatnonzero(persons == person)
        train = np.flatnonzero(persons != person)
        folds.append(Fold(train_idx=train, test_idx=test, test_persons=(person,)))
    return folds


def person_kfold(person_ids, k: int, seed: int = 0) -> list:
    """k folds of whole persons: shuffle the sorted persons, then chunk."""
    persons = _person_array(person_ids)
    unique = sorted(set(persons.tolist()))
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > len(unique):
        raise ValueError(f"k={k} exceeds the number of persons ({len(unique)})")
    rng = check_random_state(seed)
    order = rng.permutation(len(unique))
    shuffled = [unique[i] for i in order]
    folds = []
    for chunk in np.array_split(np.arange(len(unique)), k):
        group = tuple(sorted(shuffled[i] for i in chunk))
        mask = np.isin(persons, group)
        folds.append(Fold(train_idx=np.flatnonzero(~mask),
                          test_idx=np.flatnonzero(mask),
                          test_persons=group))
    return folds
