"""Deterministic replica parallelism.

Every replica receives its own generator spawned from a master seed, so
results depend only on (seed, replica index) and never on how replicas are
scheduled across processes.  Results are returned in replica order.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

__all__ = ["replica_seeds", "run_replicas"]


def replica_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """``count`` independent child seed sequences of ``seed``.

    ``seed`` may be an int, a SeedSequence or a Generator (whose own seed
    sequence is used).
    """
    if isinstance(seed, np.random.Generator):
        return seed.bit_generator.seed_seq.spawn(count)
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(count)
    return np.random.SeedSequence(seed).spawn(count)


def _call(args):
    fn, task, ss = args
    return fn(task, np.random.default_rng(ss))


def run_replicas(fn: Callable, tasks: Sequence, seeds: Sequence[np.random.SeedSequence],
                 workers: int = 1) -> list:
    """Evaluate ``fn(task, rng)`` for every task with its own generator.

    ``fn`` must be picklable (a module-level function) when ``workers > 1``.
    """
    if len(tasks) != len(seeds):
        raise ValueError("one seed per task is required")
    jobs = [(fn, t, s) for t, s in zip(tasks, seeds)]
    workers = max(1, min(int(workers), len(jobs) or 1, os.cpu_count() * 4 if os.cpu_count() else 1))
    if workers == 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
