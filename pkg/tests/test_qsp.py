import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from blockc.errors import NotFixedParity, SupNormExceedsOne
from blockc.poly import PolySpec, linf_norm
from blockc.qsp import PhaseSequence, evaluate_phases, solve_phases

GRID = np.linspace(-1, 1, 201)


def random_target(rng, degree: int, sup: float = 0.9) -> PolySpec:
    """Fixed-parity polynomial of exact ``degree`` with sup-norm ``sup``."""
    cheb = np.zeros(degree + 1)
    cheb[degree % 2:: 2] = rng.normal(size=len(cheb[degree % 2:: 2]))
    cheb[degree] = cheb[degree] or 1.0
    p = PolySpec(C.cheb2poly(cheb))
    return PolySpec(np.array(p.coeffs) * (sup / linf_norm(p, 1.0)))


def residual(phases: PhaseSequence, p: PolySpec) -> float:
    return float(np.max(np.abs(evaluate_phases(phases, GRID).real - phases.scale * p(GRID))))


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 30])
def test_zero_phases_give_chebyshev(n):
    got = evaluate_phases(PhaseSequence((0.0,) * (n + 1)), GRID)
    np.testing.assert_allclose(got.real, np.cos(n * np.arccos(GRID)), atol=1e-12)


def test_reflection_angles_preserve_polynomial():
    rng = np.random.default_rng(3)
    for d in (1, 2, 3, 8):
        ph = PhaseSequence(tuple(rng.uniform(-np.pi, np.pi, d + 1)))
        x = np.linspace(-1, 1, 17)
        s = np.sqrt(1 - x**2)
        ref = evaluate_phases(ph, x)
        refl = ph.reflection_angles()
        got = []
        for xi, si in zip(x, s):
            r = np.array([[xi, si], [si, -xi]])
            m = np.diag([np.exp(1j * refl[0]), np.exp(-1j * refl[0])])
            for a in refl[1:]:
                m = m @ r @ np.diag([np.exp(1j * a), np.exp(-1j * a)])
            got.append(m[0, 0])
        np.testing.assert_allclose(got, ref, atol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 30])
def test_chebyshev_targets_converge(n):
    t = PolySpec(C.cheb2poly([0] * n + [1]))
    ph = solve_phases(t)
    assert residual(ph, t) <= 1e-10
    assert all(-math.pi < a <= math.pi for a in ph.angles)


def test_phases_are_symmetric():
    ph = solve_phases(PolySpec([0.0, 0.6, 0.0, -0.3]))
    np.testing.assert_allclose(ph.angles, ph.angles[::-1], atol=1e-12)


def test_constant_target():
    ph = solve_phases(PolySpec([-0.5]))
    assert ph.angles == (math.acos(-0.5),)
    assert evaluate_phases(ph, 0.3).real == pytest.approx(-0.5)


def test_mixed_parity_rejected():
    with pytest.raises(NotFixedParity):
        solve_phases(PolySpec([0.1, 0.5]))


def test_sup_norm_above_one_rejected():
    with pytest.raises(SupNormExceedsOne) as info:
        solve_phases(PolySpec([0.0, 1.2]))
    assert info.value.supnorm == pytest.approx(1.2)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_random_targets_round_trip(d, seed):
    p = random_target(np.random.default_rng(seed), d)
    ph = solve_phases(p)
    assert ph.scale == 1.0
    assert residual(ph, p) <= 1e-8


def test_evaluate_shapes():
    ph = PhaseSequence((0.1, 0.2, 0.1))
    assert evaluate_phases(ph, 0.5).shape == ()
    assert evaluate_phases(ph, np.zeros((3, 2))).shape == (3, 2)
    assert evaluate_phases((0.1, 0.2, 0.1), 0.5) == evaluate_phases(ph, 0.5)
