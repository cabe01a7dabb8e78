"""Dense state-vector simulation and block verification."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .circuit import Circuit, Gate, compile, count_queries, gate_matrix, oracle_unitary
from .errors import OversizeCircuit, VerificationFailed
from .ir import Expr, denote

MAX_QUBITS = 14
# a full unitary on 14 qubits would need 4 GiB
MAX_FULL_QUBITS = 12
TOL = 1e-9
TOL_QSP = 1e-7


def _apply(psi: np.ndarray, mat: np.ndarray, targets: Sequence[int], controls, nq: int) -> None:
    """In-place ``mat`` on ``targets`` of ``psi`` shaped ``(2,)*nq + (batch,)``."""
    idx: list = [slice(None)] * (nq + 1)
    for q, p in controls:
        idx[q] = int(p)
    idx = tuple(idx)
    sub = psi[idx]
    # axes of the targets once the control axes are indexed away
    fixed = sorted(q for q, _ in controls)
    axes = [t - sum(1 for f in fixed if f < t) for t in targets]
    k = len(targets)
    moved = np.moveaxis(sub, axes, list(range(k)))
    shape = moved.shape
    out = (mat @ moved.reshape(2**k, -1)).reshape(shape)
    psi[idx] = np.moveaxis(out, list(range(k)), axes)


def apply_gates(
    state: np.ndarray,
    gates: Sequence[Gate],
    nq: int,
    oracle_mats: Optional[dict] = None,
) -> np.ndarray:
    """Apply ``gates`` to the columns of ``state`` (shape ``(2**nq, batch)``)."""
    batch = state.shape[1]
    psi = np.array(state, dtype=complex).reshape((2,) * nq + (batch,))
    for g in gates:
        if g.kind == "Oracle":
            mat = oracle_mats[(g.name, g.dagger)]
        else:
            mat = gate_matrix(g)
        _apply(psi, mat, g.targets, g.controls, nq)
    return psi.reshape(2**nq, batch)


def _oracle_mats(c: Circuit, seed: int) -> dict:
    mats = {}
    for g in c.gates:
        if g.kind == "Oracle" and (g.name, g.dagger) not in mats:
            u = oracle_unitary(c.oracles[g.name], seed)
            mats[(g.name, g.dagger)] = u.conj().T if g.dagger else u
    return mats


def simulate(c: Circuit, seed: int = 0, columns: Optional[Sequence[int]] = None) -> np.ndarray:
    """Columns of the circuit unitary, oracles instantiated from ``seed``.

    ``columns=None`` returns the full unitary.
    """
    nq = c.num_qubits
    if nq > MAX_QUBITS or (columns is None and nq > MAX_FULL_QUBITS):
        raise OversizeCircuit(f"circuit has {nq} qubits, simulation limit is {MAX_QUBITS}")
    dim = 2**nq
    cols = np.arange(dim) if columns is None else np.asarray(columns, dtype=int)
    state = np.zeros((dim, len(cols)), dtype=complex)
    state[cols, np.arange(len(cols))] = 1.0
    return apply_gates(state, c.gates, nq, _oracle_mats(c, seed))


def block(c: Circuit, seed: int = 0) -> np.ndarray:
    """Top-left ``2**n_data`` block: ancillas prepared and post-selected at 0."""
    dim = 2**c.n_data
    return simulate(c, seed, range(dim))[:dim, :]


@dataclass(frozen=True)
class VerifyReport:
    block: np.ndarray
    target: np.ndarray
    alpha_pred: float
    max_dev: float
    tol: float
    queries_measured: float
    success_prob_bound: float

    @property
    def ok(self) -> bool:
        return self.max_dev <= self.tol

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_dev": self.max_dev,
            "tol": self.tol,
            "alpha_pred": self.alpha_pred,
            "queries_measured": self.queries_measured,
            "success_prob_bound": self.success_prob_bound,
        }


def verify(
    e: Expr,
    seed: int = 0,
    method: Optional[str] = None,
    raise_on_fail: bool = True,
) -> VerifyReport:
    """Compile ``e``, simulate it, and compare the block with ``denote(e) / alpha``."""
    from .circuit import bindings_for

    c = compile(e, method)
    got = block(c, seed)
    target = denote(e, bindings_for(e, seed))
    alpha = c.predicted.subnorm
    dev = float(np.max(np.abs(got - target / alpha)))
    tol = TOL_QSP if c.uses_qsp else TOL
    rng = np.random.default_rng(seed)
    x = rng.normal(size=target.shape[1]) + 1j * rng.normal(size=target.shape[1])
    x /= np.linalg.norm(x)
    prob = float(np.linalg.norm(target @ x) ** 2 / alpha**2)
    report = VerifyReport(got, target, alpha, dev, tol, count_queries(c), prob)
    if raise_on_fail and not report.ok:
        raise VerificationFailed(dev, tol)
    return report
