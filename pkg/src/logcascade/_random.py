"""Seed handling.

Every stochastic routine takes a ``seed`` that may be ``None``, an ``int`` or a
:class:`numpy.random.SeedSequence`.  Monte-Carlo drivers spawn one child
sequence per replica so that replica ``i`` always sees the same stream,
whatever the number of replicas or the evaluation order.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[None, int, np.random.SeedSequence]


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (np.random.Generator, np.random.RandomState)):
        raise TypeError("pass an int or SeedSequence, not a generator")
    return np.random.SeedSequence(seed)


def replica_seeds(seed: SeedLike, reps: int) -> list[np.random.SeedSequence]:
    """Independent child sequences, one per replica, derived from ``seed``.

    Children are derived with ``SeedSequence(entropy, spawn_key=(i,))`` rather
    than :meth:`SeedSequence.spawn` so the result does not depend on how many
    children were requested earlier from the same parent object.
    """
    root = as_seed_sequence(seed)
    return [
        np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i,))
        for i in range(reps)
    ]


def seed_record(seed: SeedLike) -> dict:
    """JSON-friendly description of a seed."""
    ss = as_seed_sequence(seed)
    entropy = ss.entropy
    if isinstance(entropy, (list, tuple)):
        entropy = [int(e) for e in entropy]
    elif entropy is not None:
        entropy = int(entropy)
    return {"entropy": entropy, "spawn_key": [int(k) for k in ss.spawn_key]}
