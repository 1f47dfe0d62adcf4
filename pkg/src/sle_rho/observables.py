"""Left-passage machinery in the strip and the Monte Carlo martingale harness.

For SLE(kappa; rho) with a single marked point, an analytic F on the strip
makes F(h_s(w)) a martingale iff

    ((kappa - 6 - 2 rho)/2 + coth(u/2)) F'(u) + (kappa/2) F''(u) = 0,

solved by F(w) = int_{-inf}^w sinh(u/2)^(-4/kappa) exp((6 - kappa + 2 rho) u / kappa) du.
The power uses the principal logarithm of sinh(u/2), whose argument lies in
[0, pi] on the closed strip; the integrand is then positive on u > 0 and
continuous on the strip minus the origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .cft import SleParams
from .ensemble import run_chordal_ensemble, run_strip_ensemble
from .errors import DomainError, GridTooCoarse, QuadratureError, WindowError
from .strip import EXIT_L, LEFT, RIGHT, SWALLOWED, UNDECIDED, coth_half, map_to_strip, run_strip_path

LOG2 = math.log(2.0)
SINGULAR_FLOOR = 1e-300
P_SLACK = 1e-9


@dataclass(frozen=True)
class QuadratureSpec:
    """Parameters of the F integral; enforces the finiteness window.

    kappa > 4 and (kappa - 8)/2 < rho < (kappa - 4)/2.
    """

    kappa: float
    rho: float
    rel_tol: float = 1e-9
    split_point: float = 1.0
    branch: str = "principal-log-sinh"

    def __post_init__(self):
        k, r = self.kappa, self.rho
        if not k > 4:
            raise WindowError(f"the left-passage integral needs kappa > 4, got {k}")
        if not (k - 8) / 2 < r < (k - 4) / 2:
            raise WindowError(
                f"rho = {r} outside the window ({(k - 8) / 2}, {(k - 4) / 2}) for kappa = {k}"
            )
        if self.branch != "principal-log-sinh":
            raise ValueError(f"unknown branch tag {self.branch!r}")

    @property
    def power(self) -> float:
        return 4 / self.kappa

    @property
    def exponent(self) -> float:
        return (6 - self.kappa + 2 * self.rho) / self.kappa

    @property
    def drift_constant(self) -> float:
        return (self.kappa - 6 - 2 * self.rho) / 2

    @property
    def beta_plus(self) -> float:
        """Decay rate of the integrand as Re u -> +inf."""
        return (self.kappa - 4 - 2 * self.rho) / self.kappa

    @property
    def beta_minus(self) -> float:
        """Decay rate of the integrand as Re u -> -inf."""
        return (8 - self.kappa + 2 * self.rho) / self.kappa

    @classmethod
    def from_params(cls, params: SleParams, **kw) -> "QuadratureSpec":
        if params.n != 1:
            raise DomainError("the left-passage integral is defined for a single marked point")
        return cls(params.kappa, params.rho[0], **kw)


def log_sinh_half(u):
    """Principal log of sinh(u/2) on the closed strip, overflow-safe."""
    u = np.asarray(u, dtype=complex)
    u = u.real + 1j * (u.imag + 0.0)
    out = np.empty_like(u)
    pos = u.real > 20
    neg = u.real < -20
    mid = ~(pos | neg)
    out[mid] = np.log(np.sinh(u[mid] / 2))
    out[pos] = u[pos] / 2 - LOG2 + np.log1p(-np.exp(-u[pos]))
    out[neg] = 1j * math.pi - u[neg] / 2 - LOG2 + np.log1p(-np.exp(u[neg]))
    return out


def integrand(u, spec: QuadratureSpec):
    """sinh(u/2)^(-4/kappa) exp((6 - kappa + 2 rho) u / kappa) on the fixed branch."""
    arr = np.asarray(u, dtype=complex)
    if np.any(np.abs(arr) < SINGULAR_FLOOR):
        raise DomainError("integrand is singular at u = 0")
    val = np.exp(-spec.power * log_sinh_half(arr) + spec.exponent * arr)
    return complex(val) if val.ndim == 0 else val


def _quad(fn, a, b, spec, **kw):
    val, err = integrate.quad(fn, a, b, epsabs=0.0, epsrel=spec.rel_tol * 0.1, limit=400, **kw)
    return val, err


def _cquad(fn, a, b, spec, **kw):
    re, e1 = _quad(lambda t: fn(t).real, a, b, spec, **kw)
    im, e2 = _quad(lambda t: fn(t).imag, a, b, spec, **kw)
    return complex(re, im), math.hypot(e1, e2)


def _real_half_line(spec: QuadratureSpec, sign: float):
    """int_0^inf |sinh(v/2)|^(-p) exp(sign * a * v) dv, split at ``split_point``."""
    p, a, sp = spec.power, spec.exponent, spec.split_point

    def smooth(v):
        # (sinh(v/2)/v)^(-p) exp(sign a v); the v^(-p) factor is the quadrature weight
        ratio = math.sinh(v / 2) / v if v > 0 else 0.5
        return math.exp(-p * math.log(ratio) + sign * a * v)

    def tail(v):
        ls = v / 2 - LOG2 + math.log1p(-math.exp(-v))
        return math.exp(-p * ls + sign * a * v)

    v1, e1 = _quad(smooth, 0.0, sp, spec, weight="alg", wvar=(-p, 0.0))
    v2, e2 = _quad(tail, sp, math.inf, spec)
    return v1 + v2, e1 + e2


class _Constants:
    """F(0) and F(+inf), cached per spec."""

    _cache: dict = {}

    @classmethod
    def get(cls, spec: QuadratureSpec):
        key = (spec.kappa, spec.rho, spec.rel_tol, spec.split_point)
        if key not in cls._cache:
            i_neg, e_neg = _real_half_line(spec, -1.0)
            i_pos, e_pos = _real_half_line(spec, +1.0)
            if e_neg > spec.rel_tol * i_neg or e_pos > spec.rel_tol * i_pos:
                raise QuadratureError("half-line integrals missed the tolerance")
            f0 = np.exp(-1j * math.pi * spec.power) * i_neg
            cls._cache[key] = (complex(f0), complex(f0 + i_pos))
        return cls._cache[key]


def F_zero(spec: QuadratureSpec) -> complex:
    return _Constants.get(spec)[0]


def F_infinity(spec: QuadratureSpec) -> complex:
    return _Constants.get(spec)[1]


def _ray_from_zero(w: complex, spec: QuadratureSpec):
    """int_0^w along the straight ray, with the t^(-p) endpoint weight handled exactly."""
    p, a = spec.power, spec.exponent

    def smooth(t):
        # the endpoint t = 0 is evaluated by the weighted rule; use the limit there
        ls = log_sinh_half(w * t)[()] - math.log(t) if t > 0 else np.log(w / 2)
        return w * np.exp(-p * ls + a * w * t)

    return _cquad(smooth, 0.0, 1.0, spec, weight="alg", wvar=(-p, 0.0))


def _midline_route(w: complex, spec: QuadratureSpec):
    """int from -inf along Im u = pi/2 to Re w + i pi/2, then vertically to w."""
    x, y = w.real, w.imag
    mid = math.pi / 2
    f_h = lambda t: integrand(complex(t, mid), spec)
    val, err = _cquad(f_h, -math.inf, min(x, 0.0), spec)
    if x > 0:
        v, e = _cquad(f_h, 0.0, x, spec)
        val, err = val + v, err + e
    if y != mid:
        f_v = lambda t: 1j * integrand(complex(x, t), spec)
        v, e = _cquad(f_v, mid, y, spec)
        val, err = val + v, err + e
    return val, err


def _check_strip_point(w: complex):
    if w.imag < -1e-12 or w.imag > math.pi + 1e-12:
        raise DomainError(f"{w} is outside the closed strip")


def F_value(w, spec: QuadratureSpec) -> complex:
    """F(w) = int_{-inf}^w of :func:`integrand`; ``w`` may be +inf or -inf.

    Points with |w| < split_point are reached by a ray from the origin (with
    F(0) from the negative real axis); other points by the midline route.
    """
    if isinstance(w, (int, float)) and math.isinf(w):
        return F_infinity(spec) if w > 0 else 0j
    w = complex(w)
    if math.isinf(w.real):
        return F_infinity(spec) if w.real > 0 else 0j
    _check_strip_point(w)
    w = complex(w.real, min(max(w.imag, 0.0), math.pi))
    if abs(w) < SINGULAR_FLOOR:
        return F_zero(spec)
    if abs(w) < spec.split_point:
        val, err = _ray_from_zero(w, spec)
        val += F_zero(spec)
    else:
        val, err = _midline_route(w, spec)
    if err > spec.rel_tol * max(abs(val), 1e-300):
        raise QuadratureError(f"F({w}) error estimate {err:.3g} exceeds tolerance")
    return val


def p_left(w, spec: QuadratureSpec, F: Optional[Callable] = None) -> float:
    """P^l(w) = 1 - Im F(w) / Im F(+inf); 1 at -inf, 0 on the positive real axis."""
    if isinstance(w, (int, float)) and math.isinf(w):
        return 1.0 if w < 0 else 0.0
    F = F or F_value
    val = 1 - F(w, spec).imag / F_infinity(spec).imag
    if -P_SLACK <= val < 0:
        return 0.0
    if 1 < val <= 1 + P_SLACK:
        return 1.0
    if not 0 <= val <= 1:
        raise QuadratureError(f"P^l({w}) = {val} outside [0, 1]")
    return val


@dataclass(frozen=True)
class SideProbabilities:
    left: float
    right: float
    swallowed: float

    @property
    def left_given_decided(self) -> float:
        """Left probability conditioned on the point not being swallowed."""
        return self.left / (self.left + self.right)


def side_probabilities(w, spec: QuadratureSpec) -> SideProbabilities:
    """Left, right and swallowed probabilities of a strip point.

    P^r is the bounded harmonic combination a Re F + b Im F with limits 0 at
    -inf and at 0 and 1 at +inf; the swallowed mass is what remains.
    """
    f0, finf = F_zero(spec), F_infinity(spec)
    val = F_value(w, spec)
    alpha = 1 / (finf.real - f0.real)
    beta = -alpha * f0.real / f0.imag
    right = alpha * val.real + beta * val.imag
    left = p_left(w, spec)
    return SideProbabilities(left, right, 1 - left - right)


def p_left_kappa4(w, rho: float, eps: float = 1e-3, **kw) -> float:
    """kappa -> 4 limit of P^l by Richardson extrapolation in kappa - 4."""
    p1 = p_left(w, QuadratureSpec(4 + eps, rho, **kw))
    p2 = p_left(w, QuadratureSpec(4 + 2 * eps, rho, **kw))
    return 2 * p1 - p2


class FEvaluator:
    """Vectorized F on the closed strip for ensemble observables.

    Uses convergent exponential series for |Re w| >= ``tail_re`` and a
    Gauss-Jacobi rule (weight t^(-4/kappa)) on the ray from 0 otherwise.
    """

    def __init__(self, spec: QuadratureSpec, n_jacobi: int = 48, n_terms: int = 60, tail_re: float = 2.0):
        self.spec = spec
        self.tail_re = tail_re
        p = spec.power
        x, wts = special.roots_jacobi(n_jacobi, 0.0, -p)
        self._t = (1 + x) / 2
        self._w = wts * 2 ** (p - 1)
        k = np.arange(n_terms)
        # binomial series coefficients of (1 - q)^(-p)
        self._c = np.exp(special.gammaln(k + p) - special.gammaln(p) - special.gammaln(k + 1))
        self._k = k
        self.f0 = F_zero(spec)
        self.finf = F_infinity(spec)

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        w = w.ravel()
        out = np.empty(w.shape, dtype=complex)
        s, p = self.spec, self.spec.power
        right = w.real >= self.tail_re
        left = w.real <= -self.tail_re
        mid = ~(right | left)
        fin = np.isfinite(w.real)
        right = right & fin
        left = left & fin
        if right.any():
            b = s.beta_plus + self._k
            terms = self._c * np.exp(-np.outer(w[right], b)) / b
            out[right] = self.finf - 2**p * terms.sum(axis=1)
        if left.any():
            b = s.beta_minus + self._k
            terms = self._c * np.exp(np.outer(w[left], b)) / b
            out[left] = np.exp(-1j * math.pi * p) * 2**p * terms.sum(axis=1)
        if mid.any():
            wm = w[mid]
            small = np.abs(wm) < SINGULAR_FLOOR
            wm_safe = np.where(small, 1.0, wm)
            u = np.outer(wm_safe, self._t)
            ls = log_sinh_half(u) - np.log(self._t)
            vals = wm_safe * (np.exp(-p * ls + s.exponent * u) @ self._w)
            out[mid] = self.f0 + np.where(small, 0.0, vals)
        posinf = np.isinf(w.real) & (w.real > 0)
        neginf = np.isinf(w.real) & (w.real < 0)
        out[posinf] = self.finf
        out[neginf] = 0.0
        return out.reshape(shape)

    def p_left(self, w):
        return 1 - self(w).imag / self.finf.imag


def F_on_grid(grid, spec: QuadratureSpec, nodes: int = 20) -> np.ndarray:
    """F on a polyline grid: F_value at the first node plus Gauss-Legendre increments.

    Differences of the result are accurate to rounding, which is what finite
    differencing needs.  Segments must stay away from u = 0.
    """
    grid = np.asarray(grid, dtype=complex)
    x, wts = np.polynomial.legendre.leggauss(nodes)
    a, b = grid[:-1], grid[1:]
    half = (b - a) / 2
    u = (a + b)[:, None] / 2 + half[:, None] * x[None, :]
    inc = (integrand(u, spec) @ wts) * half
    out = np.empty(len(grid), dtype=complex)
    out[0] = F_value(grid[0], spec)
    out[1:] = out[0] + np.cumsum(inc)
    return out


def martingale_ode_residual(
    F_samples,
    grid,
    spec: QuadratureSpec,
    drift_rho: Optional[float] = None,
    max_disagreement: Optional[float] = None,
) -> float:
    """Max over interior grid points of |(c + coth(u/2)) F' + (kappa/2) F''|.

    c = (kappa - 6 - 2 rho)/2 with rho = ``drift_rho`` if given.  Derivatives
    are central differences on the uniform grid, Richardson-combined from
    steps h and 2h.  If ``max_disagreement`` is set and the h vs 2h estimates
    of the residual differ by more than that, GridTooCoarse is raised.
    """
    F = np.asarray(F_samples, dtype=complex)
    u = np.asarray(grid, dtype=complex)
    if len(F) != len(u) or len(u) < 5:
        raise GridTooCoarse("need at least 5 matching samples")
    h = u[1] - u[0]
    if not np.allclose(np.diff(u), h, rtol=1e-9, atol=0):
        raise GridTooCoarse("grid must be uniform")
    rho = spec.rho if drift_rho is None else drift_rho
    c = (spec.kappa - 6 - 2 * rho) / 2
    i = np.arange(2, len(u) - 2)
    d1h = (F[i + 1] - F[i - 1]) / (2 * h)
    d1H = (F[i + 2] - F[i - 2]) / (4 * h)
    d2h = (F[i + 1] - 2 * F[i] + F[i - 1]) / h**2
    d2H = (F[i + 2] - 2 * F[i] + F[i - 2]) / (4 * h**2)
    coth = np.array([coth_half(v) for v in u[i]])
    r_h = (c + coth) * d1h + spec.kappa / 2 * d2h
    r_H = (c + coth) * d1H + spec.kappa / 2 * d2H
    res = np.abs((4 * r_h - r_H) / 3)
    if max_disagreement is not None:
        gap = float(np.max(np.abs(r_h - r_H)))
        if gap > max_disagreement:
            raise GridTooCoarse(f"h vs 2h residuals disagree by {gap:.3g}")
    return float(res.max())


# ---------------------------------------------------------------------------
# side classification and Monte Carlo


def classify_side(
    params: SleParams,
    w,
    seed: int,
    horizon: float = 2000.0,
    L: float = EXIT_L,
    guard: float = 1e-8,
    ds: float = 1e-3,
    path_index: int = 0,
    half_plane: bool = False,
) -> str:
    """Label a point left/right/swallowed/undecided along one strip path.

    With ``half_plane`` the point is first pushed through map_to_strip.
    """
    if half_plane:
        w = map_to_strip(w, params.x[0], params.xi0)
    path = run_strip_path(params, [w], horizon, seed, ds, guard=guard, L=L, path_index=path_index)
    return path.labels[0]


@dataclass
class LeftPassageReport:
    points: list
    freq_left: list
    se_left: list
    freq_right: list
    freq_swallowed: list
    freq_undecided: list
    p_analytic: list
    z_scores: list
    n_paths: int
    seed: int
    ds: float
    L: float
    guard: float

    def passed(self, n_se: float = 3.0) -> bool:
        return all(abs(z) < n_se for z in self.z_scores)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["points"] = [[complex(p).real, complex(p).imag] for p in self.points]
        return d


def left_passage_mc(
    params: SleParams,
    w_points: Sequence[complex],
    n_paths: int,
    seed: int,
    ds: float = 1e-3,
    L: float = EXIT_L,
    guard: float = 1e-8,
    horizon: float = 2000.0,
    threads: Optional[int] = None,
    spec: Optional[QuadratureSpec] = None,
) -> LeftPassageReport:
    """Monte Carlo left frequencies against the analytic P^l.

    Swallowed points count as not-left; P^l is continuous at 0 with value 0,
    so this is the event whose probability P^l gives.
    """
    spec = spec or QuadratureSpec.from_params(params)
    ens = run_strip_ensemble(params, w_points, n_paths, seed, ds, guard=guard, L=L,
                             horizon=horizon, threads=threads)
    lab = ens.labels
    fl = (lab == 1).mean(axis=0)
    se = np.sqrt(fl * (1 - fl) / n_paths)
    p_an = np.array([p_left(w, spec) for w in w_points])
    z = np.where(se > 0, (fl - p_an) / np.where(se > 0, se, 1), np.where(fl == p_an, 0.0, np.inf))
    return LeftPassageReport(
        points=[complex(w) for w in w_points],
        freq_left=fl.tolist(),
        se_left=se.tolist(),
        freq_right=(lab == 2).mean(axis=0).tolist(),
        freq_swallowed=(lab == 3).mean(axis=0).tolist(),
        freq_undecided=(lab == 0).mean(axis=0).tolist(),
        p_analytic=p_an.tolist(),
        z_scores=z.tolist(),
        n_paths=n_paths,
        seed=seed,
        ds=ds,
        L=L,
        guard=guard,
    )


@dataclass
class StripBatch:
    """Ensemble view at one slice: ``h`` is (n_paths, n_points)."""

    s: float
    h: np.ndarray
    exited: np.ndarray


@dataclass
class ChordalBatch:
    """Ensemble view at one slice; arrays have a leading path axis."""

    t: float
    xi: np.ndarray
    X: np.ndarray
    Xprime: np.ndarray
    Z: np.ndarray
    stopped: np.ndarray


@dataclass
class MartingaleReport:
    slice_times: list
    means: list
    std_errors: list
    deviations: list
    max_deviation: float
    threshold: float
    verdict: str
    n_paths: int
    seed: int
    policy: str
    mode: str
    counts: list = field(default_factory=list)
    note: str = (
        "deviations are |mean_s - mean_0| over the standard error of the paired "
        "difference; with several slices a few-percent false alarm rate is expected"
    )

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def _summarize(values, include, slice_times, threshold, n_paths, seed, policy, mode):
    """values: (n_paths, n_slices) observable samples; include: same-shape mask."""
    base = values[:, 0]
    means, ses, devs, counts = [], [], [], []
    for k in range(values.shape[1]):
        m = include[:, k]
        v = values[m, k]
        d = v - base[m]
        cnt = int(m.sum())
        counts.append(cnt)
        means.append(float(v.mean()) if cnt else math.nan)
        ses.append(float(v.std(ddof=1) / math.sqrt(cnt)) if cnt > 1 else 0.0)
        se_d = float(d.std(ddof=1) / math.sqrt(cnt)) if cnt > 1 else 0.0
        diff = float(d.mean()) if cnt else 0.0
        if se_d > 0:
            devs.append(abs(diff) / se_d)
        else:
            devs.append(0.0 if diff == 0 else math.inf)
    mx = max(devs)
    return MartingaleReport(
        slice_times=[float(s) for s in slice_times],
        means=means,
        std_errors=ses,
        deviations=devs,
        max_deviation=mx,
        threshold=threshold,
        verdict="pass" if mx < threshold else "fail",
        n_paths=n_paths,
        seed=seed,
        policy=policy,
        mode=mode,
        counts=counts,
    )


def martingale_check(
    observable: Callable,
    params: SleParams,
    slice_times: Sequence[float],
    n_paths: int,
    seed: int,
    *,
    mode: str = "strip",
    w_points: Sequence[complex] = (0.5j * math.pi,),
    z_points: Sequence[complex] = (),
    ds: float = 1e-3,
    guard: Optional[float] = None,
    L: float = EXIT_L,
    threshold: float = 3.5,
    policy: str = "freeze",
    vectorized: bool = True,
    threads: Optional[int] = None,
) -> MartingaleReport:
    """Test E[observable] for constancy across slice times by Monte Carlo.

    In ``strip`` mode the observable receives a :class:`StripBatch`; in
    ``chordal`` mode a :class:`ChordalBatch` (``ds`` is then the chordal base
    step).  With ``vectorized=False`` it is called once per path with a
    single-path batch.  Policy ``freeze`` keeps the last value of paths that
    have exited/stopped, ``exclude`` drops them from later slices.
    """
    if policy not in ("freeze", "exclude"):
        raise ValueError(f"unknown policy {policy!r}")
    slices = np.asarray(slice_times, dtype=float)
    if slices[0] != 0.0:
        slices = np.concatenate([[0.0], slices])
    ns = len(slices)
    values = np.empty((n_paths, ns))
    include = np.ones((n_paths, ns), dtype=bool)
    if mode == "strip":
        g = 1e-8 if guard is None else guard
        ens = run_strip_ensemble(params, w_points, n_paths, seed, ds, guard=g, L=L,
                                 horizon=float(slices[-1]), slice_times=slices, threads=threads)
        exit_first = np.nanmin(np.where(np.isnan(ens.exit_s), np.inf, ens.exit_s), axis=1)
        for k, s in enumerate(slices):
            exited = exit_first <= s
            if policy == "exclude":
                include[:, k] = ~exited
            batch = StripBatch(float(s), ens.h[:, k, :], exited)
            values[:, k] = _apply(observable, batch, vectorized, n_paths)
    elif mode == "chordal":
        ens = run_chordal_ensemble(params, slices, n_paths, seed, ds, guard=guard,
                                   z_points=z_points, threads=threads)
        for k, t in enumerate(slices):
            stopped = (ens.status != 0) & (ens.t_stop <= t)
            if policy == "exclude":
                include[:, k] = ~stopped
            batch = ChordalBatch(float(t), ens.xi[:, k], ens.X[:, k], ens.Xprime[:, k],
                                 ens.Z[:, k], stopped)
            values[:, k] = _apply(observable, batch, vectorized, n_paths)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _summarize(values, include, slices, threshold, n_paths, seed, policy, mode)


def _apply(observable, batch, vectorized, n_paths):
    if vectorized:
        return np.broadcast_to(np.asarray(observable(batch), dtype=float), (n_paths,))
    out = np.empty(n_paths)
    cls = type(batch)
    for i in range(n_paths):
        fields = {
            k: (v[i : i + 1] if isinstance(v, np.ndarray) else v)
            for k, v in vars(batch).items()
        }
        out[i] = float(np.asarray(observable(cls(**fields))).ravel()[0])
    return out


def F_observable(spec: QuadratureSpec, part: str = "im", point: int = 0):
    """Vectorized Re/Im F(h_s(w)) on a StripBatch."""
    ev = FEvaluator(spec)

    def obs(batch: StripBatch):
        val = ev(batch.h[:, point])
        return val.real if part == "re" else val.imag

    return obs


def raw_h_observable(part: str = "re", point: int = 0):
    """h_s(w) itself: not a martingale when the strip drift is nonzero."""

    def obs(batch: StripBatch):
        v = batch.h[:, point]
        return v.real if part == "re" else v.imag

    return obs


def tilted_point_observable(params: SleParams, y: float, rho_y: float):
    """Martingale for SLE(kappa; rho) from an extra boundary point y of weight rho_y.

    M_t = g_t'(y)^delta_y |Y - xi|^(rho_y/kappa) prod_j |Y - X_j|^(rho_j rho_y / 2 kappa)
    with delta_y = rho_y (rho_y + 4 - kappa)/(4 kappa).  Returns the simulation
    parameters (y appended with zero weight, so it does not affect the drift)
    and a vectorized observable on ChordalBatch.
    """
    k = params.kappa
    sim = SleParams(k, params.rho + (0.0,), params.x + (y,), params.xi0)
    delta = rho_y * (rho_y + 4 - k) / (4 * k)
    n = params.n

    def obs(batch: ChordalBatch):
        Y = batch.X[:, n]
        logm = delta * np.log(batch.Xprime[:, n]) + rho_y / k * np.log(np.abs(Y - batch.xi))
        for j in range(n):
            logm += params.rho[j] * rho_y / (2 * k) * np.log(np.abs(Y - batch.X[:, j]))
        return np.exp(logm)

    return sim, obs


SIDE_LABELS = (UNDECIDED, LEFT, RIGHT, SWALLOWED)
