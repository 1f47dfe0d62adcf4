"""Closed-form Coulomb-gas / CFT quantities attached to SLE(kappa; rho).

All functions here are pure.  ``rho_inf`` is always derived from the
parameters and appended internally; it is never part of ``SleParams.rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import CoincidentPointError, DomainError

# relative floor for coincident points, scaled by the largest pairwise distance
COINCIDE_REL = 1e-12


@dataclass(frozen=True)
class SleParams:
    """A full SLE(kappa; rho) problem instance.

    Parameters
    ----------
    kappa : float
        Diffusivity of the driving Brownian motion, ``kappa > 0``.
    rho : sequence of float
        Weights rho_1..rho_n of the marked points (possibly empty).
    x : sequence of float
        Marked boundary points x_1..x_n, same length as ``rho``.
    xi0 : float
        Starting point of the curve.
    """

    kappa: float
    rho: tuple = ()
    x: tuple = ()
    xi0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        kappa = float(self.kappa)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "xi0", float(self.xi0))
        if not (kappa > 0 and math.isfinite(kappa)):
            raise DomainError(f"kappa must be positive, got {kappa}")
        if len(self.rho) != len(self.x):
            raise DomainError(
                f"rho and x must have equal length ({len(self.rho)} != {len(self.x)})"
            )
        if any(v == self.xi0 for v in self.x):
            raise DomainError("marked points must differ from xi0")
        if len(set(self.x)) != len(self.x):
            raise DomainError("marked points must be pairwise distinct")

    @property
    def n(self) -> int:
        return len(self.rho)


@dataclass(frozen=True)
class ChargeLedger:
    """Coulomb-gas charges; ``boundary`` ends with the entry for infinity."""

    background: float
    interface: float
    boundary: tuple

    @property
    def total(self) -> float:
        return math.fsum([self.background, self.interface, *self.boundary])


@dataclass(frozen=True)
class FreeFieldBC:
    """Free-boson boundary data for SLE(4; rho)-type configurations.

    ``jumps`` holds lambda_j = sqrt(delta_j / g) for j = 1..n and infinity;
    an entry is ``None`` when delta_j < 0 (no real free-field jump exists).
    """

    coupling_g: float
    jumps: tuple
    angles: tuple
    weights: tuple
    critical_jump: float
    total_angle: float


def _check_kappa(kappa):
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")


def central_charge(kappa: float) -> float:
    """c(kappa) = (6 - kappa)(3 kappa - 8) / (2 kappa)."""
    _check_kappa(kappa)
    return (6 - kappa) * (3 * kappa - 8) / (2 * kappa)


def kac_weight(r: int, s: int, kappa: float) -> float:
    """Kac weight h_{r,s}(kappa) in the SLE labelling (h_{1,2} = (6-kappa)/(2 kappa))."""
    if int(r) != r or int(s) != s or r < 1 or s < 1:
        raise DomainError(f"Kac labels must be positive integers, got ({r}, {s})")
    _check_kappa(kappa)
    return (kappa**2 * (r * r - 1) - 8 * kappa * (r * s - 1) + 16 * (s * s - 1)) / (
        16 * kappa
    )


def delta_from_rho(rho: float, kappa: float) -> float:
    """Conformal weight rho (rho + 4 - kappa) / (4 kappa) of a marked point."""
    _check_kappa(kappa)
    return rho * (rho + 4 - kappa) / (4 * kappa)


def rho_infinity(params: SleParams) -> float:
    return params.kappa - 6 - math.fsum(params.rho)


def all_rho(params: SleParams) -> tuple:
    """rho_1..rho_n followed by rho_inf."""
    return params.rho + (rho_infinity(params),)


def charge_of_rho(rho: float, kappa: float) -> float:
    return rho / (2 * math.sqrt(kappa))


def background_charge(kappa: float) -> float:
    """The background charge -2 alpha_0 = (4 - kappa) / (2 sqrt(kappa))."""
    _check_kappa(kappa)
    return (4 - kappa) / (2 * math.sqrt(kappa))


def vertex_weight(alpha: float, kappa: float) -> float:
    """Weight alpha^2 - 2 alpha_0 alpha of a vertex operator of charge alpha."""
    two_alpha0 = -background_charge(kappa)
    return alpha * alpha - two_alpha0 * alpha


def charge_ledger(params: SleParams) -> ChargeLedger:
    kappa = params.kappa
    return ChargeLedger(
        background=background_charge(kappa),
        interface=1 / math.sqrt(kappa),
        boundary=tuple(charge_of_rho(r, kappa) for r in all_rho(params)),
    )


def coincide_floor(xi: float, xs: Sequence[float], rel: float = COINCIDE_REL) -> float:
    pts = [xi, *xs]
    scale = max(pts) - min(pts) if len(pts) > 1 else 0.0
    return rel * max(scale, 1.0)


def _check_separation(xi, xs, floor):
    for j, xj in enumerate(xs):
        if abs(xj - xi) <= floor:
            raise CoincidentPointError(f"x[{j}] = {xj} coincides with xi = {xi}")
        for k in range(j + 1, len(xs)):
            if abs(xs[k] - xj) <= floor:
                raise CoincidentPointError(f"x[{j}] and x[{k}] coincide")


def log_correlator_D(xi: float, params: SleParams, floor: Optional[float] = None) -> float:
    """Real log of the screening-free product correlator, up to an additive constant.

    sum_j (rho_j/kappa) log|x_j - xi| + sum_{j<k} (rho_j rho_k / 2 kappa) log|x_k - x_j|
    """
    xs, rho, kappa = params.x, params.rho, params.kappa
    if floor is None:
        floor = coincide_floor(xi, xs)
    _check_separation(xi, xs, floor)
    terms = [(r / kappa) * math.log(abs(xj - xi)) for r, xj in zip(rho, xs)]
    for j in range(len(xs)):
        for k in range(j + 1, len(xs)):
            terms.append(rho[j] * rho[k] / (2 * kappa) * math.log(abs(xs[k] - xs[j])))
    return math.fsum(terms)


def drift_f(xi: float, params: SleParams, floor: Optional[float] = None) -> float:
    """SLE(kappa; rho) drift sum_j rho_j / (xi - x_j) = kappa d/dxi log D."""
    return drift_at(xi, params.x, params.rho, floor)


def drift_at(xi, xs, rho, floor=None) -> float:
    """Drift for arbitrary current images ``xs`` of the marked points."""
    if floor is None:
        floor = coincide_floor(xi, xs)
    total = 0.0
    for r, xj in zip(rho, xs):
        d = xi - xj
        if abs(d) <= floor:
            raise CoincidentPointError(f"marked point {xj} coincides with xi = {xi}")
        total += r / d
    return total


def free_field_bc(params: SleParams, coupling_g: float = 0.25) -> FreeFieldBC:
    """Free-field jumps and derivative-direction angles for each boundary change.

    With the default g = 1/4 a weight of 1/4 corresponds to a unit jump, the
    critical jump at kappa = 4.
    """
    if not coupling_g > 0:
        raise DomainError(f"coupling g must be positive, got {coupling_g}")
    rhos = all_rho(params)
    weights = tuple(delta_from_rho(r, params.kappa) for r in rhos)
    jumps = tuple(math.sqrt(w / coupling_g) if w >= 0 else None for w in weights)
    angles = tuple(math.pi / 2 * r for r in rhos)
    return FreeFieldBC(
        coupling_g=coupling_g,
        jumps=jumps,
        angles=angles,
        weights=weights,
        critical_jump=1 / math.sqrt(4 * coupling_g),
        total_angle=math.pi / 2 * math.fsum(rhos),
    )
