"""Verma-module linear algebra at small levels.

States are dictionaries mapping a partition (n1 >= n2 >= ... >= nk) to its
coefficient, the partition standing for L_{-n1} ... L_{-nk}|h>.  Coefficients
may be Fractions (exact) or floats.  Basis order at each level is reverse
lexicographic, e.g. level 2 is [(2,), (1, 1)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import optimize

from .cft import kac_weight

MAX_LEVEL = 4
MAX_KAC = 6


def partitions(n: int, max_part: Optional[int] = None) -> list:
    """Partitions of n as non-increasing tuples, reverse lexicographic order."""
    if max_part is None:
        max_part = n
    if n == 0:
        return [()]
    out = []
    for first in range(min(n, max_part), 0, -1):
        for rest in partitions(n - first, first):
            out.append((first,) + rest)
    return out


def _add(acc: dict, state: dict, scale=1):
    for k, v in state.items():
        acc[k] = acc.get(k, 0) + scale * v
    return acc


class _Algebra:
    """L_m action on PBW-ordered states for fixed (c, h)."""

    def __init__(self, c, h):
        self.c, self.h = c, h

    def act(self, m: int, state: dict) -> dict:
        out: dict = {}
        for word, coef in state.items():
            if coef != 0:
                _add(out, self._act_word(m, word), coef)
        return {k: v for k, v in out.items() if v != 0}

    def _act_word(self, m: int, word: tuple) -> dict:
        if m == 0:
            return {word: self.h + sum(word)}
        if not word:
            return {(-m,): 1} if m < 0 else {}
        n1, rest = word[0], word[1:]
        if m < 0:
            n = -m
            if n >= n1:
                return {(n,) + word: 1}
            # L_{-n} L_{-n1} = L_{-n1} L_{-n} + (n1 - n) L_{-n-n1}
            out = self.act(-n1, self._act_word(m, rest))
            return _add(out, self._act_word(-(n + n1), rest), n1 - n)
        # L_m L_{-n1} = L_{-n1} L_m + (m + n1) L_{m-n1} + (c/12)(m^3 - m) delta_{m,n1}
        out = self.act(-n1, self._act_word(m, rest))
        _add(out, self._act_word(m - n1, rest), m + n1)
        if m == n1:
            _add(out, {rest: 1}, self.c * (m**3 - m) / 12)
        return out

    def inner(self, left: tuple, right: tuple):
        """<h| L_{lk} ... L_{l1} L_{-r1} ... L_{-rj} |h> for partitions left, right."""
        if sum(left) != sum(right):
            return 0
        state = {right: 1}
        for m in left:
            state = self.act(m, state)
        return state.get((), 0)


def _coerce(x, exact: bool):
    if exact:
        return x if isinstance(x, Fraction) else Fraction(x)
    return float(x)


def gram_matrix(c, h, level: int, exact: bool = False):
    """Gram matrix of {L_{-lambda}|h>} over partitions of ``level``.

    With ``exact`` the entries are Fractions (floats are converted exactly);
    otherwise a float numpy array is returned.
    """
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in [0, {MAX_LEVEL}]")
    alg = _Algebra(_coerce(c, exact), _coerce(h, exact))
    basis = partitions(level)
    g = [[alg.inner(a, b) for b in basis] for a in basis]
    if exact:
        return g
    return np.array(g, dtype=float)


def exact_det(mat) -> Fraction:
    """Determinant of a small Fraction matrix by fraction-free elimination."""
    a = [list(row) for row in mat]
    n = len(a)
    det = Fraction(1)
    for i in range(n):
        piv = next((r for r in range(i, n) if a[r][i] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != i:
            a[i], a[piv] = a[piv], a[i]
            det = -det
        det *= a[i][i]
        for r in range(i + 1, n):
            f = a[r][i] / a[i][i]
            for k in range(i, n):
                a[r][k] -= f * a[i][k]
    return det


@dataclass
class VermaLevel:
    c: float
    h: float
    level: int
    basis: list
    gram: np.ndarray

    @classmethod
    def build(cls, c, h, level: int, exact: bool = True) -> "VermaLevel":
        g = gram_matrix(c, h, level, exact=exact)
        return cls(float(c), float(h), level, partitions(level), np.array(g, dtype=float))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.gram)) if self.gram.size else 1.0


def central_charge_exact(kappa):
    k = Fraction(kappa)
    return (8 - 3 * k) * (k - 6) / (2 * k)


def kac_weight_exact(r: int, s: int, kappa):
    k = Fraction(kappa)
    return ((r * k - 4 * s) ** 2 - (k - 4) ** 2) / (16 * k)


@dataclass
class NullVectorResult:
    kappa: float
    residual: float
    det: float
    gram_norm: float
    image_norm: float
    exact: bool

    @property
    def relative_det(self) -> float:
        # at kappa = 6 the whole level-2 Gram matrix vanishes (c = h = 0)
        if self.det == 0:
            return 0.0
        return abs(self.det) / self.gram_norm**2

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "residual": self.residual,
            "det": self.det,
            "relative_det": self.relative_det,
            "gram_norm": self.gram_norm,
            "image_norm": self.image_norm,
            "exact": self.exact,
        }


def null_vector_residual(kappa, coeffs=None, h=None, exact: bool = True) -> NullVectorResult:
    """Norm of v = (-2 L_{-2} + (kappa/2) L_{-1}^2)|h_{1,2}> at c(kappa).

    ``residual`` is sqrt|v^T G v|, ``image_norm`` is max |G v| (zero iff v is
    orthogonal to the whole level).  ``coeffs`` and ``h`` override the vector
    and the weight, for controls.  Exact mode evaluates the identity at the
    binary value of a float kappa, so it carries no rounding.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    k = _coerce(kappa, exact)
    if exact:
        c = central_charge_exact(k)
        hh = kac_weight_exact(1, 2, k) if h is None else Fraction(h)
    else:
        c = (8 - 3 * k) * (k - 6) / (2 * k)
        hh = (6 - k) / (2 * k) if h is None else float(h)
    v = [_coerce(x, exact) for x in coeffs] if coeffs is not None else [_coerce(-2, exact), k / 2]
    g = gram_matrix(c, hh, 2, exact=exact)
    gv = [sum(g[i][j] * v[j] for j in range(2)) for i in range(2)]
    q = sum(v[i] * gv[i] for i in range(2))
    det = exact_det(g) if exact else np.linalg.det(g)
    gf = np.array(g, dtype=float)
    return NullVectorResult(
        kappa=float(kappa),
        residual=math.sqrt(abs(float(q))),
        det=float(det),
        gram_norm=float(np.linalg.norm(gf)),
        image_norm=float(max(abs(float(x)) for x in gv)),
        exact=exact,
    )


def weight_table(kappa: float, r_max: int = 3, s_max: int = 3) -> np.ndarray:
    """Array T with T[r-1, s-1] = h_{r,s}(kappa)."""
    if not (1 <= r_max <= MAX_KAC and 1 <= s_max <= MAX_KAC):
        raise ValueError(f"table bounds must lie in [1, {MAX_KAC}]")
    return np.array([[kac_weight(r, s, kappa) for s in range(1, s_max + 1)] for r in range(1, r_max + 1)])


@lru_cache(maxsize=None)
def _det_degree(level: int) -> int:
    return sum(len(p) for p in partitions(level))


def det_polynomial(c, level: int) -> list:
    """Exact coefficients (highest first) of det Gram_level as a polynomial in h."""
    deg = _det_degree(level)
    cc = Fraction(c)
    xs = [Fraction(i) for i in range(deg + 1)]
    ys = [exact_det(gram_matrix(cc, x, level, exact=True)) for x in xs]
    # Newton divided differences, then expand to monomials
    coef = list(ys)
    for j in range(1, deg + 1):
        for i in range(deg, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    poly = [Fraction(0)] * (deg + 1)  # lowest first
    basis = [Fraction(1)]
    for j in range(deg + 1):
        for i, b in enumerate(basis):
            poly[i] += coef[j] * b
        nxt = [Fraction(0)] * (len(basis) + 1)
        for i, b in enumerate(basis):
            nxt[i + 1] += b
            nxt[i] -= xs[j] * b
        basis = nxt
    return poly[::-1]


def det_zeros(kappa, level: int = 2, h_range=(-10.0, 10.0), n_grid: int = 4001, xtol: float = 1e-14) -> list:
    """Real zeros of det Gram_level(c(kappa), h) in ``h_range``, sorted.

    Simple zeros come from sign changes; even-order zeros from sign changes
    of the derivative at points where the determinant is (relatively) tiny.
    """
    poly = det_polynomial(central_charge_exact(kappa), level)
    p = np.array([float(x) for x in poly])
    dp = np.polyder(p)
    grid = np.linspace(*h_range, n_grid)
    scale = np.max(np.abs(np.polyval(p, grid)))
    roots = []
    for f, keep in ((p, lambda r: True), (dp, lambda r: abs(np.polyval(p, r)) < 1e-10 * scale)):
        vals = np.polyval(f, grid)
        for i in range(n_grid - 1):
            if vals[i] == 0:
                cand = grid[i]
            elif vals[i] * vals[i + 1] < 0:
                cand = optimize.brentq(lambda x: np.polyval(f, x), grid[i], grid[i + 1], xtol=xtol)
            else:
                continue
            if keep(cand):
                roots.append(float(cand))
    roots.sort()
    merged = []
    for r in roots:
        if not merged or abs(r - merged[-1]) > 1e-6:
            merged.append(r)
    return merged


def kac_ratio(c, h, level: int, kappa) -> Fraction:
    """det Gram_level / prod_{rs <= level} (h - h_{r,s})^{p(level - rs)}, exact."""
    det = exact_det(gram_matrix(Fraction(c), Fraction(h), level, exact=True))
    denom = Fraction(1)
    for r in range(1, level + 1):
        for s in range(1, level // r + 1):
            denom *= (Fraction(h) - kac_weight_exact(r, s, kappa)) ** len(partitions(level - r * s))
    return det / denom
