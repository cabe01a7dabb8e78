"""Analytic query / subnormalization / ancilla model.

Every operator combines the reports of its children, and polynomial nodes
are priced per implementation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .errors import QsvtInadmissible
from .ir import Adjoint, Base, Choice, Expr, Poly, Prod, Sum, Tensor, is_hermitian_judgment
from .poly import ZERO_TOL, PolySpec, gqet_norm, l1_norm, linf_norm

TIE_RTOL = 1e-12


class PolyMethod(str, enum.Enum):
    LCU = "lcu"
    HORNER = "horner"
    QSVT = "qsvt"
    GQET = "gqet"


# preference on ties, best first
_TIE_ORDER = (PolyMethod.QSVT, PolyMethod.HORNER, PolyMethod.LCU)


@dataclass(frozen=True)
class CostReport:
    queries: float
    subnorm: float
    ancillas: int

    @property
    def total(self) -> float:
        return self.queries * self.subnorm

    def as_dict(self) -> dict:
        return {
            "queries": self.queries,
            "subnorm": self.subnorm,
            "ancillas": self.ancillas,
            "total": self.total,
        }


def clog2(n: int) -> int:
    """``ceil(log2 n)`` with ``clog2(0) == clog2(1) == 0``."""
    return (n - 1).bit_length() if n > 1 else 0


@lru_cache(maxsize=4096)
def _linf(coeffs: tuple, alpha: float) -> float:
    return linf_norm(PolySpec(coeffs), alpha)


@lru_cache(maxsize=1024)
def _gqet(coeffs: tuple, alpha: float) -> float:
    return gqet_norm(PolySpec(coeffs), alpha)


def qsvt_parts(p: PolySpec, alpha: float) -> list[tuple[str, PolySpec, float]]:
    """Nonzero parity parts of ``p`` with the sup-norm of ``part(alpha x)``."""
    out = []
    for label, part in (("even", p.even_part()), ("odd", p.odd_part())):
        if not part.is_zero:
            out.append((label, part, _linf(part.coeffs, alpha)))
    return out


def poly_cost(p: PolySpec, base: CostReport, method: PolyMethod | str, hermitian: bool = True) -> CostReport:
    """Cost of ``Poly(M, p)`` under ``method`` given the report of ``M``."""
    method = PolyMethod(method)
    d = max(p.degree, 0)
    k, a, m = base.queries, base.subnorm, base.ancillas
    if method is PolyMethod.LCU:
        powers = sum(j for j, c in enumerate(p.coeffs) if abs(c) > ZERO_TOL)
        return CostReport(k * powers, l1_norm(p, a), clog2(d) + d + m)
    if method is PolyMethod.HORNER:
        return CostReport(k * d, l1_norm(p, a), 2 * d + m)
    if method is PolyMethod.QSVT:
        if not hermitian:
            raise QsvtInadmissible("QSVT needs a Hermitian polynomial base")
        parts = qsvt_parts(p, a)
        queries = k * sum(part.degree for _, part, _ in parts)
        subnorm = sum(s for _, _, s in parts)
        return CostReport(queries, subnorm, len(parts) + m)
    return CostReport(k * d, _gqet(p.coeffs, a), 1 + m)


def select_poly_method(p: PolySpec, base: CostReport, hermitian: bool) -> PolyMethod:
    """Cheapest compilable method; ties resolve QSVT, then Horner, then LCU."""
    cands = [m for m in _TIE_ORDER if hermitian or m is not PolyMethod.QSVT]
    totals = {m: poly_cost(p, base, m, hermitian).total for m in cands}
    best = min(totals.values())
    for m in cands:
        if totals[m] <= best + TIE_RTOL * abs(best):
            return m
    raise AssertionError("unreachable")


def poly_method(e: Poly, base: CostReport, forced: Optional[str] = None) -> PolyMethod:
    """Method a ``Poly`` node is priced and compiled with."""
    if e.method is not None:
        return PolyMethod(e.method)
    if forced is not None:
        return PolyMethod(forced)
    return select_poly_method(e.spec, base, is_hermitian_judgment(e.base))


def cost(e: Expr, method: Optional[str] = None, memo: Optional[dict] = None) -> CostReport:
    """Analytic cost report for ``e``.

    ``method`` forces the implementation of every ``Poly`` node that does not
    pin one itself.
    """
    memo = {} if memo is None else memo

    def go(x: Expr) -> CostReport:
        hit = memo.get(id(x))
        if hit is not None and hit[0] is x:
            return hit[1]
        kids = [go(c) for c in x.children()]
        if isinstance(x, Base):
            out = CostReport(0.0, 1.0, 0) if x.is_identity else CostReport(1.0, x.decl.alpha, x.decl.m)
        elif isinstance(x, Adjoint):
            out = kids[0]
        elif isinstance(x, Sum):
            out = CostReport(
                sum(r.queries for r in kids),
                sum(abs(c) * r.subnorm for (c, _), r in zip(x.terms, kids)),
                clog2(len(kids)) + max(r.ancillas for r in kids),
            )
        elif isinstance(x, Prod):
            out = CostReport(
                sum(r.queries for r in kids),
                math.prod(r.subnorm for r in kids),
                clog2(len(kids)) + max(r.ancillas for r in kids),
            )
        elif isinstance(x, Choice):
            out = CostReport(
                sum(r.queries for r in kids),
                max(r.subnorm for r in kids),
                max(r.ancillas for r in kids),
            )
        elif isinstance(x, Tensor):
            # factors run side by side, so their ancillas cannot be shared
            out = CostReport(
                sum(r.queries for r in kids),
                math.prod(r.subnorm for r in kids),
                sum(r.ancillas for r in kids),
            )
        elif isinstance(x, Poly):
            chosen = poly_method(x, kids[0], method)
            out = poly_cost(x.spec, kids[0], chosen, is_hermitian_judgment(x.base))
        else:
            raise TypeError(f"cannot cost {x!r}")
        memo[id(x)] = (x, out)
        return out

    return go(e)
