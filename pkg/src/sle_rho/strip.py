"""SLE(kappa; rho) in the strip S = {0 < Im w < pi}.

The map m(z) = log((z - x1) / (xi0 - x1)) sends x1, xi0, infinity to
-infinity, 0, +infinity.  After the time change dt = (xi_t - g_t(x1))^2 ds the
normalized maps h_s (tip sent to 0) solve

    dh = -sqrt(kappa) dB + [(kappa - 6 - sum rho)/2
                            + sum_j (rho_j/2) coth(h(x~_j)/2)
                            + coth(h(w)/2)] ds

with x~_1 = -infinity.  Infinite arguments enter only through coth(+-inf) = +-1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numba as nb
import numpy as np

from .cft import SleParams, rho_infinity
from .chordal import MAX_HALVINGS, DrivingPath, flow_points
from .errors import BranchError, DomainError, StepRejected
from .rng import path_generator

STRIP_TOL = 1e-9
EXIT_L = 30.0

LEFT, RIGHT, SWALLOWED, UNDECIDED = "left", "right", "swallowed", "undecided"
_LABELS = {0: UNDECIDED, 1: LEFT, 2: RIGHT, 3: SWALLOWED}


def _as_upper(z) -> complex:
    z = complex(z)
    # force +0.0 imaginary part so the negative real axis maps to Im = +pi
    return complex(z.real, z.imag + 0.0)


def map_to_strip(z, x1: float, xi0: float = 0.0):
    """m(z) = -log((xi0 - x1) / (z - x1)) from the closed half-plane to the closed strip.

    Requires x1 < xi0.  The marked point itself maps to ``-inf`` (a float).
    """
    if not x1 < xi0:
        raise DomainError("strip coordinates require x1 < xi0")
    z = _as_upper(z)
    if z.imag < 0:
        raise DomainError("z must lie in the closed upper half-plane")
    if z == x1:
        return -math.inf
    w = cmath.log((z - x1) / (xi0 - x1))
    if w.imag < -STRIP_TOL or w.imag > math.pi + STRIP_TOL:
        raise BranchError(f"m({z}) = {w} left the strip")
    return w


def map_from_strip(w, x1: float, xi0: float = 0.0) -> complex:
    return x1 + (xi0 - x1) * cmath.exp(w)


def coth_half(z):
    """coth(z/2) with coth(+-inf) = +-1."""
    if isinstance(z, float) and math.isinf(z):
        return math.copysign(1.0, z)
    z = complex(z)
    if abs(z.real) > 40:
        # tanh saturates; avoid overflow in sinh/cosh
        return complex(math.copysign(1.0, z.real), 0.0)
    return 1 / cmath.tanh(z / 2)


@dataclass(frozen=True)
class StripState:
    """Strip time ``s``, driving ``eta``, tracked values of h_s.

    ``tilde_x`` holds h_s(x~_j) for j = 1..n; the first entry is ``-inf``.
    Points with ``active`` False are frozen (they have exited).
    """

    s: float
    eta: float
    h_points: tuple
    tilde_x: tuple
    active: tuple = ()

    def __post_init__(self):
        if not self.active:
            object.__setattr__(self, "active", (True,) * len(self.h_points))

    def g_strip(self, k: int) -> complex:
        """g^S_s(w_k) = h_s(w_k) + eta_s."""
        return self.h_points[k] + self.eta


def _check_strip_params(params: SleParams):
    if params.n < 1:
        raise DomainError("strip coordinates need at least one marked point")
    if not params.x[0] < params.xi0:
        raise DomainError("strip coordinates require x1 < xi0")


def initial_strip_state(params: SleParams, w_points: Sequence[complex]) -> StripState:
    _check_strip_params(params)
    x1, xi0 = params.x[0], params.xi0
    tilde = (-math.inf,) + tuple(map_to_strip(x, x1, xi0) for x in params.x[1:])
    return StripState(
        s=0.0, eta=0.0, h_points=tuple(complex(w) for w in w_points), tilde_x=tilde
    )


def strip_drift_constant(params: SleParams) -> float:
    """(kappa - 6 - sum rho) / 2, i.e. rho_inf / 2."""
    return rho_infinity(params) / 2


def driving_drift(params: SleParams, state: StripState) -> complex:
    """Point-independent part of the h drift."""
    total = strip_drift_constant(params)
    for r, tx in zip(params.rho, state.tilde_x):
        total += r / 2 * coth_half(tx)
    return total


def eta_drift(params: SleParams, state: StripState) -> complex:
    """Drift of eta: -sum over j in {1..n, inf} of (rho_j/2) coth(h(x~_j)/2)."""
    total = -rho_infinity(params) / 2
    for r, tx in zip(params.rho, state.tilde_x):
        total -= r / 2 * coth_half(tx)
    return total


def strip_step(state: StripState, dB: float, ds: float, params: SleParams, guard: float = 0.0) -> StripState:
    """Euler-Maruyama step of the strip dynamics for all active tracked points.

    Raises StepRejected if a point would leave the closed strip or a marked
    point x~_j (j >= 2) would come within ``guard`` of the tip.
    """
    sqk = math.sqrt(params.kappa)
    common = -sqk * dB + driving_drift(params, state) * ds
    eta = state.eta + sqk * dB + eta_drift(params, state).real * ds
    hs = list(state.h_points)
    for k, (h, a) in enumerate(zip(hs, state.active)):
        if not a:
            continue
        h = h + common + coth_half(h) * ds
        if h.imag < -STRIP_TOL or h.imag > math.pi + STRIP_TOL:
            raise StepRejected(f"tracked point {k} left the strip", index=k, kind="strip")
        hs[k] = h
    tilde = list(state.tilde_x)
    for j in range(1, len(tilde)):
        tj = tilde[j] + common + coth_half(tilde[j]) * ds
        if abs(tj) <= guard:
            raise StepRejected(f"marked point {j} reached the tip", index=j)
        tilde[j] = tj
    return replace(state, s=state.s + ds, eta=eta, h_points=tuple(hs), tilde_x=tuple(tilde))


def _strip_dt(state: StripState, ds: float) -> float:
    q = 1.0
    for h, a in zip(state.h_points, state.active):
        if a:
            q = min(q, (h.real * h.real + h.imag * h.imag) / 4.0)
    for t in state.tilde_x[1:]:
        t = complex(t)
        q = min(q, (t.real * t.real + t.imag * t.imag) / 4.0)
    return ds * q


def _exit_label(h: complex, guard: float, L: float) -> int:
    if h.real < -L:
        return 1
    if h.real > L:
        return 2
    if abs(h) < guard:
        return 3
    return 0


@dataclass
class StripPath:
    s: np.ndarray
    eta: np.ndarray
    h: np.ndarray
    labels: list
    exit_s: list
    stop_reason: Optional[str] = None


def run_strip_path(
    params: SleParams,
    w_points: Sequence[complex],
    horizon: float,
    seed: int,
    ds: float,
    guard: float = 1e-8,
    L: float = EXIT_L,
    path_index: int = 0,
    max_steps: int = 50_000_000,
) -> StripPath:
    """Reference single-path strip simulation with exit classification.

    Step size is ``ds * min(1, d^2/4)`` with d the distance of the closest
    active tracked point (or marked point) to the tip.  A tracked point exits
    left when Re h < -L, right when Re h > L, swallowed when |h| < guard.
    """
    gen = path_generator(seed, path_index)
    state = initial_strip_state(params, w_points)
    m = len(state.h_points)
    labels = [0] * m
    exit_s = [math.nan] * m
    active = list(state.active)
    for k, h in enumerate(state.h_points):
        labels[k] = _exit_label(h, guard, L)
        if labels[k]:
            active[k] = False
            exit_s[k] = 0.0
    state = replace(state, active=tuple(active))
    s_hist, eta_hist, h_hist = [0.0], [0.0], [state.h_points]
    pending = []
    stop_reason = None
    nsteps = 0
    while any(state.active) and horizon - state.s > 1e-14 * horizon:
        if pending:
            h_step, dB, depth = pending.pop()
        else:
            if nsteps >= max_steps:
                stop_reason = "max_steps"
                break
            h_step = min(_strip_dt(state, ds), horizon - state.s)
            dB = math.sqrt(h_step) * gen.standard_normal()
            depth = 0
        try:
            new = strip_step(state, dB, h_step, params, guard)
        except StepRejected as exc:
            if depth >= MAX_HALVINGS:
                if exc.kind == "collision":
                    stop_reason = f"collision:{exc.index}"
                    break
                raise BranchError(str(exc)) from exc
            dB1 = 0.5 * dB + 0.5 * math.sqrt(h_step) * gen.standard_normal()
            pending.append((0.5 * h_step, dB - dB1, depth + 1))
            pending.append((0.5 * h_step, dB1, depth + 1))
            continue
        nsteps += 1
        active = list(new.active)
        for k, h in enumerate(new.h_points):
            if active[k]:
                lab = _exit_label(h, guard, L)
                if lab:
                    labels[k] = lab
                    exit_s[k] = new.s
                    active[k] = False
        state = replace(new, active=tuple(active))
        s_hist.append(state.s)
        eta_hist.append(state.eta)
        h_hist.append(state.h_points)
    return StripPath(
        s=np.array(s_hist),
        eta=np.array(eta_hist),
        h=np.array(h_hist, dtype=complex).reshape(len(s_hist), m),
        labels=[_LABELS[v] for v in labels],
        exit_s=exit_s,
        stop_reason=stop_reason,
    )


# ---------------------------------------------------------------------------
# relation to the half-plane picture


def time_change(path: DrivingPath, params: SleParams):
    """Strip time s(t) = int_0^t dt' / (xi - g(x1))^2 by the trapezoid rule.

    Returns (t, s) arrays on the recorded grid.
    """
    _check_strip_params(params)
    d = path.xi_values - path.X_values[:, 0]
    if np.any(d <= 0):
        raise DomainError("x1 is not alive along the whole path")
    rate = 1.0 / d**2
    dt = np.diff(path.times)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt)])
    return path.times.copy(), s


def chordal_to_strip(path: DrivingPath, params: SleParams, w_points: Sequence[complex]) -> np.ndarray:
    """h_t(w) = log((g_t(z) - g_t(x1)) / (xi_t - g_t(x1))) with z = m^{-1}(w).

    Returns an array (n_times, n_points).
    """
    _check_strip_params(params)
    x1, xi0 = params.x[0], params.xi0
    z = np.array([map_from_strip(w, x1, xi0) for w in w_points], dtype=complex)
    g = flow_points(path, z)
    X1 = path.X_values[:, :1]
    xi = path.xi_values[:, None]
    return np.log((g - X1) / (xi - X1))


def strip_from_increments(path: DrivingPath, params: SleParams, w_points: Sequence[complex]):
    """Direct strip Euler scheme driven by the chordal path's own increments.

    Uses ds_k = dt_k / (xi_k - X1_k)^2 and dB^S_k = dB_k / (xi_k - X1_k).
    Returns (s, h) with h of shape (n_times, n_points).
    """
    state = initial_strip_state(params, w_points)
    d = path.xi_values - path.X_values[:, 0]
    out = np.empty((len(path.times), len(w_points)), dtype=complex)
    out[0] = state.h_points
    s = np.zeros(len(path.times))
    for k in range(len(path.steps)):
        dsk = path.steps[k] / d[k] ** 2
        state = strip_step(state, path.dB[k] / d[k], dsk, params)
        out[k + 1] = state.h_points
        s[k + 1] = state.s
    return s, out


# ---------------------------------------------------------------------------
# ensemble kernel


@nb.njit(nogil=True, cache=True)
def _coth_half_c(z):
    if abs(z.real) > 40.0:
        return complex(np.sign(z.real), 0.0)
    return 1.0 / np.tanh(0.5 * z)


@nb.njit(nogil=True, cache=True)
def strip_kernel(gen, kappa, const_drift, rho_rest, tilde0, H0, ds, guard, L, horizon,
                 slice_times, max_steps):
    """One strip path; mirrors :func:`run_strip_path` when ``slice_times`` is empty.

    ``const_drift`` is (kappa - 6 - sum rho)/2 - rho_1/2.  Returns
    (H[ns, m], labels[m], exit_s[m], s_end, status, nsteps) with status
    0 = finished, 1 = marked point collision, 2 = step budget, 3 = strip violation.
    """
    m = H0.shape[0]
    nr = rho_rest.shape[0]
    ns = slice_times.shape[0]
    sqk = np.sqrt(kappa)
    H = H0.copy()
    T = tilde0.copy()
    labels = np.zeros(m, dtype=np.int64)
    exit_s = np.full(m, np.nan)
    active = np.ones(m, dtype=np.bool_)
    n_active = m
    for k in range(m):
        lab = 0
        if H[k].real < -L:
            lab = 1
        elif H[k].real > L:
            lab = 2
        elif abs(H[k]) < guard:
            lab = 3
        if lab > 0:
            labels[k] = lab
            exit_s[k] = 0.0
            active[k] = False
            n_active -= 1
    out = np.empty((ns, m), dtype=np.complex128)
    si = 0
    while si < ns and slice_times[si] <= 0.0:
        out[si] = H
        si += 1
    st_h = np.empty(MAX_HALVINGS + 2)
    st_b = np.empty(MAX_HALVINGS + 2)
    st_d = np.empty(MAX_HALVINGS + 2, dtype=np.int64)
    top = 0
    s = 0.0
    status = 0
    nsteps = 0
    Hn = np.empty(m, dtype=np.complex128)
    Tn = np.empty(nr, dtype=np.complex128)
    while n_active > 0 and horizon - s > 1e-14 * horizon:
        target = horizon
        if si < ns and slice_times[si] < target:
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
            q = 1.0
            for k in range(m):
                if active[k]:
                    a2 = (H[k].real * H[k].real + H[k].imag * H[k].imag) / 4.0
                    if a2 < q:
                        q = a2
            for j in range(nr):
                a2 = (T[j].real * T[j].real + T[j].imag * T[j].imag) / 4.0
                if a2 < q:
                    q = a2
            h = min(ds * q, target - s)
            dB = np.sqrt(h) * gen.standard_normal()
            depth = 0
        drift = complex(const_drift, 0.0)
        for j in range(nr):
            drift += 0.5 * rho_rest[j] * _coth_half_c(T[j])
        common = -sqk * dB + drift * h
        reject = 0
        for k in range(m):
            if active[k]:
                v = H[k] + common + _coth_half_c(H[k]) * h
                if v.imag < -1e-9 or v.imag > np.pi + 1e-9:
                    reject = 1
                Hn[k] = v
            else:
                Hn[k] = H[k]
        for j in range(nr):
            v = T[j] + common + _coth_half_c(T[j]) * h
            if abs(v) <= guard:
                reject = 2
            Tn[j] = v
        if reject > 0:
            if depth >= MAX_HALVINGS:
                status = 1 if reject == 2 else 3
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
        s = s + h
        for j in range(nr):
            T[j] = Tn[j]
        for k in range(m):
            if active[k]:
                H[k] = Hn[k]
                lab = 0
                if H[k].real < -L:
                    lab = 1
                elif H[k].real > L:
                    lab = 2
                elif abs(H[k]) < guard:
                    lab = 3
                if lab > 0:
                    labels[k] = lab
                    exit_s[k] = s
                    active[k] = False
                    n_active -= 1
        if top == 0 and si < ns and target - s <= 1e-14 * max(target, 1.0):
            if target < horizon:
                s = target
            while si < ns and slice_times[si] <= s:
                out[si] = H
                si += 1
    while si < ns:
        out[si] = H
        si += 1
    return out, labels, exit_s, s, status, nsteps
