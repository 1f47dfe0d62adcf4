"""Parallel ensembles of independent paths.

Path ``i`` always uses the stream ``path_generator(seed, i)`` and writes into
row ``i`` of the output, so results do not depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cft import SleParams
from .chordal import MAX_HALVINGS, chordal_kernel, default_guard
from .errors import BranchError
from .rng import path_generator
from .strip import EXIT_L, _check_strip_params, initial_strip_state, strip_kernel


def default_threads() -> int:
    return os.cpu_count() or 1


def _parallel(fn, n_paths: int, threads: Optional[int]):
    threads = threads or default_threads()
    if threads <= 1 or n_paths < 2:
        for i in range(n_paths):
            fn(i)
        return
    chunks = np.array_split(np.arange(n_paths), min(threads * 4, n_paths))

    def run(chunk):
        for i in chunk:
            fn(int(i))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run, chunks))


@dataclass
class StripEnsemble:
    """Per-path results; ``h`` has shape (n_paths, n_slices, n_points)."""

    slice_times: np.ndarray
    h: np.ndarray
    labels: np.ndarray
    exit_s: np.ndarray
    s_end: np.ndarray
    status: np.ndarray
    nsteps: np.ndarray


def run_strip_ensemble(
    params: SleParams,
    w_points: Sequence[complex],
    n_paths: int,
    seed: int,
    ds: float,
    guard: float = 1e-8,
    L: float = EXIT_L,
    horizon: float = 2000.0,
    slice_times: Sequence[float] = (),
    threads: Optional[int] = None,
    max_steps: int = 50_000_000,
) -> StripEnsemble:
    """Simulate ``n_paths`` strip paths, each tracking all ``w_points``.

    Labels use 0 = undecided, 1 = left, 2 = right, 3 = swallowed.
    """
    _check_strip_params(params)
    state = initial_strip_state(params, w_points)
    kappa = params.kappa
    const = (kappa - 6 - sum(params.rho)) / 2 - params.rho[0] / 2
    rho_rest = np.array(params.rho[1:], dtype=float)
    tilde0 = np.array(state.tilde_x[1:], dtype=complex)
    H0 = np.array(state.h_points, dtype=complex)
    slices = np.asarray(slice_times, dtype=float)
    if slices.size and (np.any(np.diff(slices) < 0) or slices[-1] > horizon):
        raise ValueError("slice times must be sorted and within the horizon")
    m, ns = len(H0), len(slices)
    h = np.empty((n_paths, ns, m), dtype=complex)
    labels = np.empty((n_paths, m), dtype=np.int64)
    exit_s = np.empty((n_paths, m))
    s_end = np.empty(n_paths)
    status = np.empty(n_paths, dtype=np.int64)
    nsteps = np.empty(n_paths, dtype=np.int64)

    def one(i):
        gen = path_generator(seed, i)
        out = strip_kernel(gen, kappa, const, rho_rest, tilde0, H0, ds, guard, L,
                           horizon, slices, max_steps)
        h[i], labels[i], exit_s[i], s_end[i], status[i], nsteps[i] = out

    _parallel(one, n_paths, threads)
    if np.any(status == 3):
        raise BranchError("a tracked point left the strip; reduce ds")
    return StripEnsemble(slices, h, labels, exit_s, s_end, status, nsteps)


@dataclass
class ChordalEnsemble:
    """Per-path slice records: xi (N, ns), X and Xprime (N, ns, n), Z (N, ns, m)."""

    slice_times: np.ndarray
    xi: np.ndarray
    X: np.ndarray
    Xprime: np.ndarray
    Z: np.ndarray
    t_stop: np.ndarray
    status: np.ndarray
    nsteps: np.ndarray


def run_chordal_ensemble(
    params: SleParams,
    slice_times: Sequence[float],
    n_paths: int,
    seed: int,
    dt: float,
    guard: Optional[float] = None,
    z_points: Sequence[complex] = (),
    threads: Optional[int] = None,
    max_steps: int = 10_000_000,
) -> ChordalEnsemble:
    """Simulate ``n_paths`` chordal paths; the last slice time is the horizon.

    Status 0 = reached the horizon, 1 = collision, 2 = step budget exhausted.
    """
    if guard is None:
        guard = default_guard(params)
    slices = np.asarray(slice_times, dtype=float)
    if slices.size == 0 or np.any(np.diff(slices) < 0):
        raise ValueError("need sorted, non-empty slice times")
    X0 = np.array(params.x, dtype=float)
    rho = np.array(params.rho, dtype=float)
    Z0 = np.array(z_points, dtype=complex)
    N, ns, n, m = n_paths, len(slices), params.n, len(Z0)
    xi = np.empty((N, ns))
    X = np.empty((N, ns, n))
    Xp = np.empty((N, ns, n))
    Z = np.empty((N, ns, m), dtype=complex)
    t_stop = np.empty(N)
    status = np.empty(N, dtype=np.int64)
    nsteps = np.empty(N, dtype=np.int64)

    def one(i):
        gen = path_generator(seed, i)
        out = chordal_kernel(gen, params.kappa, params.xi0, X0, rho, Z0, dt, guard,
                             slices, MAX_HALVINGS, max_steps)
        xi[i], X[i], Xp[i], Z[i], t_stop[i], status[i], nsteps[i] = out

    _parallel(one, n_paths, threads)
    return ChordalEnsemble(slices, xi, X, Xp, Z, t_stop, status, nsteps)
