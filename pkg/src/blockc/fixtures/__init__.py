"""Benchmark programs shipped with the package."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as C

from ..cost import CostReport

EXACT = "exact-paper"
SELF = "self-defined"


@dataclass(frozen=True)
class BenchFixture:
    name: str
    program: str
    reproducibility: str
    expected_unopt: Optional[CostReport] = None
    expected_opt: Optional[CostReport] = None


_EXPECTED = {
    "simulation-example": (CostReport(8.0, 2.6, 2), CostReport(4.0, 2.0, 1)),
    "regression-example": (CostReport(12.0, 16.0, 5), CostReport(8.0, 1.0, 3)),
}

MATRIX_BENCH = (
    "simulation-example",
    "regression-example",
    "penalized-coupler",
    "laplacian-filter",
    "ols-ridge",
)
ALGORITHM_BENCH = ("matrix-inversion", "hamiltonian-simulation", "sign-function")


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.cob").read_text()


def load(name: str) -> BenchFixture:
    unopt, opt = _EXPECTED.get(name, (None, None))
    return BenchFixture(name, source(name), EXACT if name in _EXPECTED else SELF, unopt, opt)


def names() -> list[str]:
    return list(MATRIX_BENCH + ALGORITHM_BENCH)


def all_fixtures() -> list[BenchFixture]:
    return [load(n) for n in names()]


def chebyshev_coeffs(n: int) -> list[float]:
    """Monomial coefficients of ``T_n``."""
    return [float(c) for c in C.cheb2poly([0] * n + [1])]


def chebyshev_source(n: int) -> str:
    coeffs = ", ".join(repr(c) for c in chebyshev_coeffs(n))
    return f"T{n} = Poly(X, [{coeffs}]);\n"


def chebyshev(n: int) -> BenchFixture:
    return BenchFixture(f"chebyshev-T{n}", chebyshev_source(n), SELF)


CHEBYSHEV_RANGE = range(2, 31)
