"""Chunked, worker-count independent Monte Carlo execution.

Trials are processed in fixed-size chunks. A chunk always covers the same
trial indices and draws from the same per-trial streams, so the result is
bit-identical for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .rng import complex_normal, stream

CHUNK = 256


def resolve_threads(threads):
    if threads is None or threads == 0:
        return os.cpu_count() or 1
    return max(1, int(threads))


def chunks(n_trials, chunk=CHUNK):
    return [np.arange(s, min(s + chunk, n_trials)) for s in range(0, n_trials, chunk)]


def run_chunks(n_trials, fn, threads=1, chunk=CHUNK):
    """Evaluate ``fn(trial_indices)`` on every chunk; results are returned in chunk order."""
    parts = chunks(n_trials, chunk)
    threads = resolve_threads(threads)
    if threads == 1 or len(parts) == 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, parts))


def draw(seed, purpose, indices, size, user=0):
    """One row of ``size`` CN(0,1) samples per trial, from stream ``(seed, purpose, trial, user)``."""
    out = np.empty((len(indices), size), dtype=complex)
    for row, i in enumerate(indices):
        out[row] = complex_normal(stream(seed, purpose, i, user), size)
    return out


def mean_and_stderr(samples):
    x = np.asarray(samples, dtype=float)
    mean = float(np.sum(x) / x.size)
    if x.size < 2:
        return mean, 0.0
    return mean, float(np.std(x, ddof=1) / np.sqrt(x.size))


def to_db(x):
    return 10.0 * np.log10(x)


def stderr_db(mean, se):
    """First-order propagation of a linear standard error to dB."""
    return float(10.0 / np.log(10.0) * se / mean) if mean > 0 else float("nan")
