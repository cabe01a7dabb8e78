"""Symmetric QSP phase finding by Newton's method on Chebyshev nodes.

Convention (``"Wx"``)::

    P(x) = <0| e^{i phi_0 Z} prod_{j=1..d} [ W(x) e^{i phi_j Z} ] |0>
    W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]]

and the solver targets ``Re P(x) = p(x)`` on ``[-1, 1]``. Phase vectors are
kept symmetric (``phi_j == phi_{d-j}``), which leaves ``ceil((d+1)/2)`` free
parameters, matched against the same number of Chebyshev nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotFixedParity, SupNormExceedsOne
from .poly import PolySpec, chebyshev_eval, linf_norm

SUP_MARGIN = 1e-9
RESCALE = 1.0 - 1e-6


@dataclass(frozen=True)
class PhaseSequence:
    """Solved phases for a fixed-parity target.

    ``scale`` is 1.0 unless the solver had to shrink a target whose sup-norm
    sits at 1; the realised polynomial is then ``scale * p``.
    """

    angles: tuple[float, ...]
    scale: float = 1.0
    residual: float = 0.0
    iterations: int = 0
    convention: str = "Wx"

    @property
    def degree(self) -> int:
        return len(self.angles) - 1

    def reflection_angles(self) -> tuple[float, ...]:
        """Phases for the reflection oracle ``R(x) = -i e^{i pi Z/4} W(x) e^{i pi Z/4}``.

        These give the same ``<0|...|0>`` entry when every ``W`` is swapped
        for ``R``, which is what the QSVT circuit applies.
        """
        d = self.degree
        if d == 0:
            return self.angles
        out = [a - math.pi / 2 for a in self.angles]
        out[0] = self.angles[0] - math.pi / 4 + d * math.pi / 2
        out[-1] = self.angles[-1] - math.pi / 4
        return tuple(out)


def _w(x: np.ndarray) -> np.ndarray:
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    w = np.empty((len(x), 2, 2), dtype=complex)
    w[:, 0, 0] = x
    w[:, 1, 1] = x
    w[:, 0, 1] = 1j * s
    w[:, 1, 0] = 1j * s
    return w


def _rz(phi: float) -> np.ndarray:
    return np.diag([np.exp(1j * phi), np.exp(-1j * phi)])


def _value_and_jacobian(phases: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Top-left entry at each ``x`` and the Jacobian of its real part."""
    d = len(phases) - 1
    w = _w(x)
    rot = [_rz(p) for p in phases]
    prefix = [np.broadcast_to(rot[0], (len(x), 2, 2)).copy()]
    for j in range(1, d + 1):
        prefix.append(prefix[-1] @ w @ rot[j])
    suffix = [None] * (d + 1)
    cur = np.broadcast_to(np.eye(2, dtype=complex), (len(x), 2, 2)).copy()
    suffix[d] = cur
    for j in range(d - 1, -1, -1):
        cur = w @ rot[j + 1] @ cur
        suffix[j] = cur
    jac = np.empty((len(x), d + 1))
    for j in range(d + 1):
        # d/dphi_j of e^{i phi_j Z} is i Z e^{i phi_j Z}; Z sits between prefix and suffix
        g = 1j * (prefix[j][:, 0, 0] * suffix[j][:, 0, 0] - prefix[j][:, 0, 1] * suffix[j][:, 1, 0])
        jac[:, j] = g.real
    return prefix[d][:, 0, 0], jac


def _symmetric(params: np.ndarray, d: int) -> np.ndarray:
    phases = np.empty(d + 1)
    for j, v in enumerate(params):
        phases[j] = v
        phases[d - j] = v
    return phases


def evaluate_phases(phases: PhaseSequence | tuple[float, ...], x) -> np.ndarray:
    """Complex ``P(x)`` for every entry of ``x`` (scalar in, 0-d array out)."""
    angles = phases.angles if isinstance(phases, PhaseSequence) else phases
    xs = np.asarray(x, dtype=float).ravel()
    w = _w(xs)
    acc = np.broadcast_to(_rz(angles[0]), (len(xs), 2, 2)).copy()
    for phi in angles[1:]:
        acc = acc @ w @ _rz(phi)
    out = acc[:, 0, 0]
    return out.reshape(np.shape(x))


def _newton(cheb: np.ndarray, d: int, tol: float, max_iter: int):
    free = (d + 2) // 2
    k = np.arange(1, free + 1)
    nodes = np.cos((2 * k - 1) * np.pi / (4 * free))
    target = chebyshev_eval(cheb, nodes)
    params = np.zeros(free)
    params[0] = np.pi / 4
    err = math.inf
    for it in range(max_iter + 1):
        val, jac = _value_and_jacobian(_symmetric(params, d), nodes)
        resid = val.real - target
        err = float(np.max(np.abs(resid)))
        if err < tol:
            return params, it, err
        if it == max_iter:
            break
        reduced = jac[:, :free].copy()
        for j in range(free):
            if d - j != j:
                reduced[:, j] += jac[:, d - j]
        try:
            step = np.linalg.solve(reduced, resid)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(reduced, resid, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        params = params - step
    return None, max_iter, err


def _wrap(a: float) -> float:
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a == -math.pi else a


def solve_phases(p: PolySpec, tol: float = 1e-12, max_iter: int = 500) -> PhaseSequence:
    """Find symmetric phases with ``Re P(x) = p(x)`` on ``[-1, 1]``.

    ``p`` must have definite parity and sup-norm at most 1 (up to a 1e-9
    slack). If Newton fails on a target that touches 1, it is retried once
    on ``(1 - 1e-6) * p`` and the factor is stored in ``scale``.
    """
    if p.is_zero or p.parity == "mixed":
        raise NotFixedParity(f"QSP target must have definite parity, got {p.coeffs}")
    sup = linf_norm(p, 1.0)
    if sup > 1.0 + SUP_MARGIN:
        raise SupNormExceedsOne(sup)
    d = p.degree
    if d == 0:
        a0 = max(-1.0, min(1.0, p.coeffs[0]))
        return PhaseSequence((math.acos(a0),))

    cheb = p.cheb
    scale = 1.0
    params, its, err = _newton(cheb, d, tol, max_iter)
    if params is None and sup > 1.0 - SUP_MARGIN:
        scale = RESCALE
        params, its, err = _newton(cheb * scale, d, tol, max_iter)
    if params is None:
        raise NoConvergence(err, its)
    angles = tuple(_wrap(a) for a in _symmetric(params, d))
    return PhaseSequence(angles, scale=scale, residual=err, iterations=its)
