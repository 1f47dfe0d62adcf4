"""Chordal Loewner flow driven by the SLE(kappa; rho) SDE.

Each step is operator-split: an Euler-Maruyama update of the driving value,
then the exact Loewner flow for the updated driving value held constant over
the step (a vertical slit map).  The slit map is

    g(z) = xi + sqrt((z - xi)^2 + 4 dt)

with the root taken in the closed upper half-plane (for real z, on the same
side of xi as z).  Its derivative is (z - xi) / (g(z) - xi).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numba as nb
import numpy as np

from .cft import SleParams, drift_at
from .errors import BranchError, StepRejected, StoppedStateError
from .rng import path_generator

MAX_HALVINGS = 20
GUARD_REL = 1e-4
BRANCH_TOL = 1e-9


@dataclass(frozen=True)
class ChordalState:
    t: float
    xi: float
    X: tuple
    Xprime: tuple
    alive: tuple
    stopped: bool = False
    stop_reason: Optional[str] = None


@dataclass
class DrivingPath:
    """Recorded driving function of one sample path.

    ``steps[k]`` and ``dB[k]`` are the step size and Brownian increment used
    to go from ``times[k]`` to ``times[k+1]``.  ``X_values`` and
    ``Xprime_values`` hold the marked-point images at every recorded time.
    """

    dt: float
    times: np.ndarray
    xi_values: np.ndarray
    dB: np.ndarray
    steps: np.ndarray
    X_values: np.ndarray
    Xprime_values: np.ndarray
    seed: Optional[int] = None
    path_index: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass
class TracePath:
    times: np.ndarray
    points: np.ndarray
    tip_offset: float


def initial_state(params: SleParams) -> ChordalState:
    n = params.n
    return ChordalState(
        t=0.0,
        xi=params.xi0,
        X=params.x,
        Xprime=(1.0,) * n,
        alive=(True,) * n,
    )


def sle_drift(xi: float, X: Sequence[float], alive: Sequence[bool], params: SleParams) -> float:
    """Default drift provider: sum over alive points of rho_j / (xi - X_j)."""
    xs = [x for x, a in zip(X, alive) if a]
    rho = [r for r, a in zip(params.rho, alive) if a]
    return drift_at(xi, xs, rho)


def correlator_drift(log_D: Callable[[float, Sequence[float]], float], fd_step: float = 1e-6):
    """Drift provider kappa * d/dxi log D(xi; X) for a user-supplied correlator.

    ``log_D(xi, X)`` must return the log of the chosen conformal block; the
    derivative is taken by a central difference with relative step ``fd_step``.
    """

    def drift(xi, X, alive, params):
        scale = min((abs(xi - x) for x, a in zip(X, alive) if a), default=1.0)
        h = fd_step * scale
        return params.kappa * (log_D(xi + h, X) - log_D(xi - h, X)) / (2 * h)

    return drift


def slit_map(z, xi: float, dt: float):
    """Exact Loewner flow over time ``dt`` for constant driving ``xi``.

    Accepts real or complex scalars and numpy arrays.
    """
    if np.isscalar(z):
        if isinstance(z, complex) or np.iscomplexobj(z):
            d = complex(z) - xi
            r = cmath.sqrt(d * d + 4 * dt)
            if r.imag < 0 or (r.imag == 0 and (r.real > 0) != (d.real > 0)):
                r = -r
            return xi + r
        d = z - xi
        return xi + math.copysign(math.sqrt(d * d + 4 * dt), d)
    z = np.asarray(z)
    d = z - xi
    r = np.sqrt(d * d + 4 * dt + 0j)
    flip = (r.imag < 0) | ((r.imag == 0) & ((r.real > 0) != (d.real > 0)))
    r = np.where(flip, -r, r)
    out = xi + r
    return out if np.iscomplexobj(z) else out.real


def slit_map_inverse(w, xi: float, dt: float):
    """Inverse of :func:`slit_map`; maps H into H minus the slit (xi, xi + 2i sqrt(dt)]."""
    d = np.asarray(w, dtype=complex) - xi
    r = np.sqrt(d * d - 4 * dt)
    flip = (r.imag < 0) | ((r.imag == 0) & ((r.real > 0) != (d.real > 0)))
    r = np.where(flip, -r, r)
    out = xi + r
    return complex(out) if out.ndim == 0 else out


def ode_advance(state: ChordalState, dt: float) -> ChordalState:
    """Flow the marked points over ``dt`` with the driving value frozen at ``state.xi``."""
    if state.stopped:
        raise StoppedStateError("cannot advance a stopped state")
    xi = state.xi
    X, Xp = list(state.X), list(state.Xprime)
    for j, a in enumerate(state.alive):
        if not a:
            continue
        d = X[j] - xi
        if d == 0.0:
            raise StepRejected(f"marked point {j} sits on the driving value", index=j)
        root = math.sqrt(d * d + 4 * dt)
        X[j] = xi + math.copysign(root, d)
        Xp[j] = Xp[j] * (abs(d) / root)
    return replace(state, t=state.t + dt, X=tuple(X), Xprime=tuple(Xp))


def sde_step(
    state: ChordalState,
    dB: float,
    dt: float,
    params: SleParams,
    drift: Optional[Callable] = None,
    guard: float = 0.0,
) -> ChordalState:
    """One operator-split step: Euler-Maruyama driving update then exact slit flow.

    Raises StepRejected when the new driving value reaches or crosses an
    alive marked point (within ``guard``).
    """
    if state.stopped:
        raise StoppedStateError("cannot step a stopped state")
    f = (drift or sle_drift)(state.xi, state.X, state.alive, params)
    xi_new = state.xi + math.sqrt(params.kappa) * dB + f * dt
    for j, (x, a) in enumerate(zip(state.X, state.alive)):
        if a and ((x - state.xi) * (x - xi_new) <= 0 or abs(x - xi_new) <= guard):
            raise StepRejected(f"driving value reached marked point {j}", index=j)
    return ode_advance(replace(state, xi=xi_new), dt)


def default_guard(params: SleParams) -> float:
    if params.n == 0:
        return 0.0
    return GUARD_REL * min(abs(x - params.xi0) for x in params.x)


def _adaptive_dt(state: ChordalState, dt: float) -> float:
    dists = [abs(state.xi - x) for x, a in zip(state.X, state.alive) if a]
    if not dists:
        return dt
    return dt * min(1.0, min(dists) ** 2 / 4)


def run_path(
    params: SleParams,
    horizon: float,
    seed: int,
    dt: float,
    guard: Optional[float] = None,
    path_index: int = 0,
    drift: Optional[Callable] = None,
    max_halvings: int = MAX_HALVINGS,
    max_steps: int = 10_000_000,
):
    """Simulate one path up to ``horizon`` or the collision time, whichever comes first.

    The step size is ``dt * min(1, d^2 / 4)`` where d is the smallest distance
    from the driving value to an alive marked point.  A rejected step is split
    in two with a Brownian-bridge midpoint and retried; after ``max_halvings``
    nested splits the path is declared stopped.

    Returns the final :class:`ChordalState` and the :class:`DrivingPath`.
    """
    if not horizon > 0 or not dt > 0:
        raise ValueError("horizon and dt must be positive")
    if guard is None:
        guard = default_guard(params)
    gen = path_generator(seed, path_index)
    sqk = math.sqrt(params.kappa)
    state = initial_state(params)
    times, xis, dBs, steps = [0.0], [state.xi], [], []
    Xs, Xps = [state.X], [state.Xprime]
    pending = []
    nsteps = 0
    while horizon - state.t > 1e-14 * horizon:
        if nsteps >= max_steps:
            state = replace(state, stopped=True, stop_reason="max_steps")
            break
        if pending:
            h, dB, depth = pending.pop()
        else:
            h = min(_adaptive_dt(state, dt), horizon - state.t)
            dB = math.sqrt(h) * gen.standard_normal()
            depth = 0
        if state.t + h == state.t:
            # steps below the resolution of t: the driving value has met a point
            j = min((abs(state.xi - x), j) for j, (x, a) in enumerate(zip(state.X, state.alive)) if a)[1]
            alive = list(state.alive)
            alive[j] = False
            state = replace(state, alive=tuple(alive), stopped=True, stop_reason=f"collision:{j}")
            break
        try:
            new = sde_step(state, dB, h, params, drift, guard)
        except StepRejected as exc:
            if depth >= max_halvings:
                alive = list(state.alive)
                alive[exc.index] = False
                state = replace(
                    state, alive=tuple(alive), stopped=True,
                    stop_reason=f"collision:{exc.index}",
                )
                break
            dB1 = 0.5 * dB + 0.5 * math.sqrt(h) * gen.standard_normal()
            pending.append((0.5 * h, dB - dB1, depth + 1))
            pending.append((0.5 * h, dB1, depth + 1))
            continue
        nsteps += 1
        state = new
        times.append(state.t)
        xis.append(state.xi)
        dBs.append(dB)
        steps.append(h)
        Xs.append(state.X)
        Xps.append(state.Xprime)
    n = params.n
    path = DrivingPath(
        dt=dt,
        times=np.array(times),
        xi_values=np.array(xis),
        dB=np.array(dBs),
        steps=np.array(steps),
        X_values=np.array(Xs, dtype=float).reshape(len(times), n),
        Xprime_values=np.array(Xps, dtype=float).reshape(len(times), n),
        seed=seed,
        path_index=path_index,
        meta={"guard": guard, "stop_reason": state.stop_reason},
    )
    return state, path


def replay_path(params: SleParams, path: DrivingPath, drift: Optional[Callable] = None):
    """Re-run the recorded increments through :func:`sde_step`; returns the xi values."""
    state = initial_state(params)
    xis = [state.xi]
    for h, dB in zip(path.steps, path.dB):
        state = sde_step(state, float(dB), float(h), params, drift)
        xis.append(state.xi)
    return np.array(xis)


def flow_points(path: DrivingPath, z, upto: Optional[int] = None):
    """g_t(z) at every recorded time up to index ``upto`` (inclusive).

    Returns an array of shape (upto + 1, *shape(z)).
    """
    if upto is None:
        upto = len(path.steps)
    z = np.asarray(z)
    out = np.empty((upto + 1,) + z.shape, dtype=z.dtype if np.iscomplexobj(z) else float)
    out[0] = z
    g = z
    for k in range(upto):
        g = slit_map(g, path.xi_values[k + 1], path.steps[k])
        out[k + 1] = g
    return out


def trace_points(path: DrivingPath, sample_times, tip_offset: Optional[float] = None) -> TracePath:
    """Estimate the trace gamma_t at ``sample_times`` by backward slit-map composition.

    For each sample time the nearest recorded time at or below it is used.
    The seed is xi_t + i * tip_offset (default 2 sqrt(dt)).
    """
    if tip_offset is None:
        tip_offset = 2 * math.sqrt(path.dt)
    sample_times = np.atleast_1d(np.asarray(sample_times, dtype=float))
    if np.any(sample_times < 0) or np.any(sample_times > path.times[-1] * (1 + 1e-12)):
        raise ValueError("sample times must lie within the path duration")
    idx = np.searchsorted(path.times, sample_times * (1 + 1e-13), side="right") - 1
    pts = np.empty(len(sample_times), dtype=complex)
    for i, K in enumerate(idx):
        if K == 0:
            pts[i] = path.xi_values[0]
            continue
        w = complex(path.xi_values[K], tip_offset)
        for k in range(K - 1, -1, -1):
            w = slit_map_inverse(w, path.xi_values[k + 1], path.steps[k])
            if w.imag < -BRANCH_TOL:
                raise BranchError(f"trace left the upper half-plane at step {k}")
        pts[i] = complex(w.real, max(w.imag, 0.0))
    return TracePath(times=path.times[idx], points=pts, tip_offset=tip_offset)


@dataclass(frozen=True)
class SwallowResult:
    swallowed: bool
    tau: Optional[float]
    image: complex

    def in_hull(self, t: float) -> bool:
        return self.swallowed and self.tau <= t


def swallow_classify(path: DrivingPath, z, guard: float) -> SwallowResult:
    """Flow ``z`` along the path and report its swallowing time, if any.

    A point is swallowed at the first recorded time where |g_t(z) - xi_t| <= guard,
    or, for a point on the real line, where the driving value has passed it.
    """
    z = complex(z)
    g = z
    for k in range(len(path.steps)):
        xi_new = path.xi_values[k + 1]
        side_before = g.real - path.xi_values[k]
        if g.imag == 0.0 and side_before * (g.real - xi_new) <= 0:
            return SwallowResult(True, float(path.times[k + 1]), g)
        g = slit_map(g, xi_new, path.steps[k])
        if abs(g - xi_new) <= guard:
            return SwallowResult(True, float(path.times[k + 1]), g)
    return SwallowResult(False, None, g)


# ---------------------------------------------------------------------------
# ensemble kernel


@nb.njit(nogil=True, cache=True)
def _slit_c(z, xi, dt):
    d = z - xi
    r = np.sqrt(d * d + 4.0 * dt)
    if r.imag < 0.0 or (r.imag == 0.0 and (r.real > 0.0) != (d.real > 0.0)):
        r = -r
    return xi + r


@nb.njit(nogil=True, cache=True)
def chordal_kernel(gen, kappa, xi0, X0, rho, Z0, dt, guard, slice_times, max_halvings, max_steps):
    """Simulate one path, recording the state at each slice time.

    Mirrors :func:`run_path` step for step (same random draws) when
    ``slice_times`` is just the horizon.  Returns
    (xi[ns], X[ns, n], Xp[ns, n], Z[ns, m], t_stop, status, nsteps) with
    status 0 = reached horizon, 1 = collision, 2 = step budget exhausted.
    """
    n = X0.shape[0]
    m = Z0.shape[0]
    ns = slice_times.shape[0]
    sqk = np.sqrt(kappa)
    xi = xi0
    X = X0.copy()
    Xp = np.ones(n)
    Z = Z0.copy()
    t = 0.0
    out_xi = np.empty(ns)
    out_X = np.empty((ns, n))
    out_Xp = np.empty((ns, n))
    out_Z = np.empty((ns, m), dtype=np.complex128)
    st_h = np.empty(max_halvings + 2)
    st_b = np.empty(max_halvings + 2)
    st_d = np.empty(max_halvings + 2, dtype=np.int64)
    top = 0
    status = 0
    nsteps = 0
    si = 0
    while si < ns and slice_times[si] <= 0.0:
        out_xi[si] = xi
        out_X[si] = X
        out_Xp[si] = Xp
        out_Z[si] = Z
        si += 1
    while si < ns:
        target = slice_times[si]
        if top > 0:
            top -= 1
            h = st_h[top]
            dB = st_b[top]
            depth = st_d[top]
        else:
            if nsteps >= max_steps:
                status = 2
                break
            dmin = np.inf
            for j in range(n):
                dj = abs(xi - X[j])
                if dj < dmin:
                    dmin = dj
            h = dt
            if n > 0:
                h = dt * min(1.0, dmin * dmin / 4.0)
            h = min(h, target - t)
            dB = np.sqrt(h) * gen.standard_normal()
            depth = 0
        if t + h == t:
            status = 1
            break
        f = 0.0
        for j in range(n):
            f += rho[j] / (xi - X[j])
        xi_new = xi + sqk * dB + f * h
        bad = -1
        for j in range(n):
            if (X[j] - xi) * (X[j] - xi_new) <= 0.0 or abs(X[j] - xi_new) <= guard:
                bad = j
                break
        if bad >= 0:
            if depth >= max_halvings:
                status = 1
                break
            dB1 = 0.5 * dB + 0.5 * np.sqrt(h) * gen.standard_normal()
            st_h[top] = 0.5 * h
            st_b[top] = dB - dB1
            st_d[top] = depth + 1
            top += 1
            st_h[top] = 0.5 * h
            st_b[top] = dB1
            st_d[top] = depth + 1
            top += 1
            continue
        nsteps += 1
        xi = xi_new
        for j in range(n):
            d = X[j] - xi
            root = np.sqrt(d * d + 4.0 * h)
            if d > 0:
                X[j] = xi + root
            else:
                X[j] = xi - root
            Xp[j] = Xp[j] * (abs(d) / root)
        for k in range(m):
            Z[k] = _slit_c(Z[k], xi, h)
        t = t + h
        if top == 0 and target - t <= 1e-14 * target:
            t = target
            while si < ns and slice_times[si] <= t:
                out_xi[si] = xi
                out_X[si] = X
                out_Xp[si] = Xp
                out_Z[si] = Z
                si += 1
    t_stop = t
    while si < ns:
        out_xi[si] = xi
        out_X[si] = X
        out_Xp[si] = Xp
        out_Z[si] = Z
        si += 1
    return out_xi, out_X, out_Xp, out_Z, t_stop, status, nsteps
