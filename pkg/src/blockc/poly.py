"""Real polynomials in the monomial basis, parity splitting, and the norms
the cost model is built on (L1, sup-norm on [-1, 1], unit-circle GQET norm).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb

ZERO_TOL = 1e-12

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    out = [float(c) for c in coeffs]
    while out and abs(out[-1]) <= ZERO_TOL:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class PolySpec:
    """Coefficients ``[a0, ..., ad]`` of ``sum_j a_j x**j``.

    Trailing coefficients below ``ZERO_TOL`` are dropped on construction, so
    the last stored coefficient is always nonzero. The zero polynomial has
    no coefficients and degree -1.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float]):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def parity(self) -> str:
        """One of ``"even"``, ``"odd"``, ``"mixed"`` (``"even"`` for zero)."""
        has_even = any(abs(c) > ZERO_TOL for c in self.coeffs[0::2])
        has_odd = any(abs(c) > ZERO_TOL for c in self.coeffs[1::2])
        if has_even and has_odd:
            return "mixed"
        return "odd" if has_odd else "even"

    def even_part(self) -> "PolySpec":
        return PolySpec(c if j % 2 == 0 else 0.0 for j, c in enumerate(self.coeffs))

    def odd_part(self) -> "PolySpec":
        return PolySpec(c if j % 2 == 1 else 0.0 for j, c in enumerate(self.coeffs))

    def scaled(self, alpha: float) -> "PolySpec":
        """Coefficients of ``p(alpha * x)``."""
        return PolySpec(c * alpha**j for j, c in enumerate(self.coeffs))

    def normalized(self, alpha: float, divisor: float) -> "PolySpec":
        """``p(alpha * x) / divisor`` with Chebyshev coefficients taken from ``p``.

        Dividing large monomial coefficients would lose the cancellation that
        keeps e.g. ``T_30`` bounded, so the Chebyshev form is scaled instead.
        """
        q = PolySpec(c * alpha**j / divisor for j, c in enumerate(self.coeffs))
        q.__dict__["cheb"] = chebyshev_coeffs(self, alpha) / divisor
        return q

    @cached_property
    def cheb(self) -> np.ndarray:
        """Chebyshev coefficients, converted exactly."""
        return chebyshev_coeffs(self.coeffs)

    def __call__(self, x):
        # Chebyshev evaluation avoids the cancellation of large monomial terms
        if self.is_zero:
            return np.zeros_like(np.asarray(x, dtype=float))
        return npcheb.chebval(x, self.cheb)

    def __add__(self, other: "PolySpec") -> "PolySpec":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return PolySpec(x + y for x, y in zip(a, b))

    def __mul__(self, other: "PolySpec") -> "PolySpec":
        if self.is_zero or other.is_zero:
            return PolySpec(())
        return PolySpec(np.convolve(self.coeffs, other.coeffs))

    def compose(self, inner: "PolySpec") -> "PolySpec":
        """``self(inner(x))`` by Horner's rule on coefficient vectors."""
        acc = PolySpec(())
        for c in reversed(self.coeffs):
            acc = acc * inner + PolySpec((c,))
        return acc


def split_parity(p: PolySpec) -> tuple[PolySpec, PolySpec]:
    """Return ``(even, odd)`` with ``even + odd == p`` coefficientwise."""
    return p.even_part(), p.odd_part()


def chebyshev_coeffs(p: PolySpec | Sequence[float], alpha: float = 1.0) -> np.ndarray:
    """Chebyshev-basis coefficients of ``p(alpha * x)``.

    The change of basis runs in exact rational arithmetic (every float is a
    dyadic rational), so high-degree inputs such as the monomial expansion of
    ``T_30`` convert without cancellation.
    """
    if isinstance(p, PolySpec) and alpha == 1.0:
        return p.cheb
    coeffs = p.coeffs if isinstance(p, PolySpec) else tuple(p)
    if not coeffs:
        return np.zeros(1)
    a = Fraction(alpha)
    scaled = [Fraction(c) * a**j for j, c in enumerate(coeffs)]
    # Horner in the Chebyshev basis: acc <- x * acc + a_j, using
    # x T_0 = T_1 and x T_k = (T_{k+1} + T_{k-1}) / 2.
    acc: list[Fraction] = []
    for c in reversed(scaled):
        nxt = [Fraction(0)] * (len(acc) + 1)
        for k, v in enumerate(acc):
            if not v:
                continue
            if k == 0:
                nxt[1] += v
            else:
                nxt[k + 1] += v / 2
                nxt[k - 1] += v / 2
        nxt[0] += c
        acc = nxt
    return np.array([float(v) for v in acc])


def chebyshev_eval(cheb: np.ndarray, x):
    return npcheb.chebval(x, cheb)


def _golden_max(f, lo: np.ndarray, hi: np.ndarray, width: float) -> np.ndarray:
    """Vectorised golden-section search for maxima of ``f`` inside each bracket."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    best = np.maximum(f(lo), f(hi))
    while np.max(hi - lo) > width:
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = f(x1), f(x2)
        best = np.maximum(best, np.maximum(f1, f2))
        left = f1 < f2
        lo = np.where(left, x1, lo)
        hi = np.where(left, hi, x2)
    return np.maximum(best, f(0.5 * (lo + hi)))


def _grid_max(f, grid: np.ndarray, width: float, periodic: bool = False) -> float:
    vals = f(grid)
    n = len(grid)
    if periodic:
        left = np.roll(vals, 1)
        right = np.roll(vals, -1)
        idx = np.nonzero((vals >= left) & (vals >= right))[0]
        step = grid[1] - grid[0]
        lo = grid[idx] - step
        hi = grid[idx] + step
    else:
        padded = np.concatenate(([-np.inf], vals, [-np.inf]))
        idx = np.nonzero((vals >= padded[:-2]) & (vals >= padded[2:]))[0]
        lo = grid[np.maximum(idx - 1, 0)]
        hi = grid[np.minimum(idx + 1, n - 1)]
    best = float(np.max(vals))
    if len(idx):
        refined = _golden_max(f, lo, hi, width)
        best = max(best, float(np.max(refined)))
    return best


def l1_norm(p: PolySpec, alpha: float) -> float:
    """``sum_j |a_j| * alpha**j``."""
    return float(sum(abs(c) * alpha**j for j, c in enumerate(p.coeffs)))


_LINF_NODES = np.cos(np.pi * np.arange(4097) / 4096)[::-1]


def linf_norm(p: PolySpec, alpha: float) -> float:
    """``max_{|x| <= 1} |p(alpha x)|`` to about 1e-12 absolute accuracy."""
    if p.is_zero:
        return 0.0
    if p.degree == 0:
        return abs(p.coeffs[0])
    cheb = chebyshev_coeffs(p, alpha)

    def f(x):
        return np.abs(npcheb.chebval(np.clip(x, -1.0, 1.0), cheb))

    return _grid_max(f, _LINF_NODES, 1e-12)


def gqet_norm(p: PolySpec, alpha: float) -> float:
    """``max_{|z| = 1} |sum_j c_j z**j|`` with ``c`` the Chebyshev coefficients
    of ``p(alpha x)``.

    On the real axis ``Re sum_j c_j e^{i j t} = p(alpha cos t)``, so this is
    never below :func:`linf_norm`.
    """
    if p.is_zero:
        return 0.0
    cheb = chebyshev_coeffs(p, alpha)
    if len(cheb) == 1:
        return abs(float(cheb[0]))
    n = max(4096, 64 * len(cheb))
    grid = np.linspace(0.0, 2 * np.pi, n, endpoint=False)

    def f(t):
        return np.abs(np.polynomial.polynomial.polyval(np.exp(1j * np.asarray(t)), cheb))

    return _grid_max(f, grid, 1e-10, periodic=True)
