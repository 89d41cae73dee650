"""Coordinate-descent sweep kernels.

The dictionary never exists as a matrix, so a sweep walks the flat
coordinate order (block k ascending, shape s ascending) and works on the
live residual through the (p, tau) shape bank.  Kernels are jitted with
numba when available; the pure-python bodies are the reference semantics.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def full_sweep(bank, sq_prefix, beta, resid, r, n_grid):
    """One cyclic pass over every coordinate; returns the largest relative move.

    ``beta`` (flat, length N*p) and ``resid`` are updated in place so that
    ``resid == y - A beta`` holds after every single-coordinate update.
    """
    p, tau = bank.shape
    max_rel = 0.0
    for k in range(n_grid):
        lk = n_grid - 1 - k
        if lk > tau:
            lk = tau
        if lk <= 0:
            continue
        base = k * p
        for s in range(p):
            gnn = sq_prefix[s, lk] / n_grid
            if gnn <= 0.0:
                continue
            corr = 0.0
            for j in range(lk):
                corr += bank[s, j] * resid[k + 1 + j]
            corr /= n_grid
            b_old = beta[base + s]
            b_new = b_old + (corr - r) / gnn
            if b_new < 0.0:
                b_new = 0.0
            delta = b_new - b_old
            if delta != 0.0:
                beta[base + s] = b_new
                for j in range(lk):
                    resid[k + 1 + j] -= delta * bank[s, j]
                rel = abs(delta) / (1.0 + abs(b_new))
                if rel > max_rel:
                    max_rel = rel
    return max_rel


@njit(cache=True)
def active_sweep(bank, sq_prefix, beta, resid, r, n_grid, active):
    """One cyclic pass restricted to the given flat coordinate indices."""
    p, tau = bank.shape
    max_rel = 0.0
    for idx in range(active.shape[0]):
        n = active[idx]
        k = n // p
        s = n - k * p
        lk = n_grid - 1 - k
        if lk > tau:
            lk = tau
        if lk <= 0:
            continue
        gnn = sq_prefix[s, lk] / n_grid
        if gnn <= 0.0:
            continue
        corr = 0.0
        for j in range(lk):
            corr += bank[s, j] * resid[k + 1 + j]
        corr /= n_grid
        b_old = beta[n]
        b_new = b_old + (corr - r) / gnn
        if b_new < 0.0:
            b_new = 0.0
        delta = b_new - b_old
        if delta != 0.0:
            beta[n] = b_new
            for j in range(lk):
                resid[k + 1 + j] -= delta * bank[s, j]
            rel = abs(delta) / (1.0 + abs(b_new))
            if rel > max_rel:
                max_rel = rel
    return max_rel
