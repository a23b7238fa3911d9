"""Label-skewed client partitions drawn from a Dirichlet prior."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import PartitionError, TooFewSamples

MAX_RETRIES = 100


def dirichlet_partition(labels, n, alpha, rng, max_retries=MAX_RETRIES):
    """Split sample indices into ``n`` disjoint client sets.

    For each class, the fraction of its samples given to each client is drawn
    from ``Dir_n(alpha)``.  Allocations that leave a client empty are redrawn
    (up to ``max_retries`` times).  Returned index arrays are sorted.
    """
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        raise TooFewSamples("labels are empty")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if n < 1:
        raise ValueError("need at least one client")
    if labels.size < n:
        raise TooFewSamples(f"{labels.size} samples cannot cover {n} clients")
    if n == 1:
        return [np.arange(labels.size)]

    classes = np.unique(labels)
    for _ in range(max_retries):
        buckets = [[] for _ in range(n)]
        for c in classes:
            idx = np.flatnonzero(labels == c)
            rng.shuffle(idx)
            props = rng.dirichlet(np.full(n, float(alpha)))
            cuts = (np.cumsum(props)[:-1] * idx.size).astype(int)
            for k, chunk in enumerate(np.split(idx, cuts)):
                buckets[k].append(chunk)
        parts = [np.sort(np.concatenate(b)) for b in buckets]
        if all(p.size > 0 for p in parts):
            return parts
    raise PartitionError(f"no allocation without an empty client after {max_retries} draws")


def write_partition(parts, path):
    """One client per line, comma-separated sample indices."""
    text = "\n".join(",".join(str(int(i)) for i in p) for p in parts) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_partition(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [np.array([int(t) for t in line.split(",") if t], dtype=int) for line in lines]
