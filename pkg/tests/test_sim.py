import numpy as np
import pytest

import blockc.sim as sim
from blockc import fixtures
from blockc.circuit import Circuit, Gate, Register, compile
from blockc.cost import CostReport
from blockc.errors import OversizeCircuit, VerificationFailed
from blockc.frontend import parse
from blockc.ir import BUILTINS, Base
from blockc.sim import apply_gates, simulate, verify

X = Base(BUILTINS["X"])


def circuit(gates, n):
    return Circuit([Register("data", n, "data")], gates, CostReport(0.0, 1.0, 0))


def test_bell_state():
    c = circuit([Gate("H", (0,)), Gate("X", (1,), ((0, True),))], 2)
    out = simulate(c, columns=[0])[:, 0]
    np.testing.assert_allclose(out, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-12)


def test_qubit_zero_is_most_significant():
    out = simulate(circuit([Gate("X", (0,))], 3), columns=[0])[:, 0]
    assert np.argmax(np.abs(out)) == 4


def test_negative_control():
    c = circuit([Gate("X", (1,), ((0, False),))], 2)
    u = simulate(c)
    assert np.argmax(np.abs(u[:, 0])) == 1  # |00> -> |01>
    assert np.argmax(np.abs(u[:, 2])) == 2  # |10> untouched


def test_rotation_conventions():
    t = 0.7
    u = simulate(circuit([Gate("Rz", (0,), (), t)], 1))
    np.testing.assert_allclose(u, np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)]), atol=1e-12)
    u = simulate(circuit([Gate("Ry", (0,), (), t)], 1))
    np.testing.assert_allclose(u[:, 0], [np.cos(t / 2), np.sin(t / 2)], atol=1e-12)


def test_apply_gates_batches_columns():
    state = np.eye(4, dtype=complex)[:, :2]
    out = apply_gates(state, [Gate("X", (1,))], 2)
    np.testing.assert_array_equal(np.abs(out), np.eye(4)[:, [1, 0]])


def test_oversize_circuit():
    with pytest.raises(OversizeCircuit):
        simulate(circuit([], sim.MAX_QUBITS + 1), columns=[0])
    with pytest.raises(OversizeCircuit):
        simulate(circuit([], sim.MAX_FULL_QUBITS + 1))


def test_verify_builtin_is_exact():
    r = verify(X)
    assert r.max_dev == 0.0 and r.ok
    assert r.queries_measured == 1.0
    assert r.success_prob_bound == pytest.approx(1.0)


def test_verify_simulation_example_tight():
    r = verify(parse(fixtures.source("simulation-example")).resolve(), seed=0)
    assert r.max_dev <= 1e-10
    assert r.tol == 1e-9
    assert r.alpha_pred == pytest.approx(2.6)


def test_verify_qsvt_path_uses_loose_tolerance():
    e = parse(fixtures.source("sign-function")).resolve()
    r = verify(e, seed=3)
    assert r.tol == 1e-7 and r.max_dev <= 1e-7


def test_verify_detects_wrong_circuit(monkeypatch):
    wrong = compile(parse("M = Z;").resolve())
    monkeypatch.setattr(sim, "compile", lambda e, method=None: wrong)
    with pytest.raises(VerificationFailed) as info:
        verify(X)
    assert info.value.max_dev == pytest.approx(1.0)


def test_verify_report_dict():
    d = verify(X).as_dict()
    assert set(d) == {"ok", "max_dev", "tol", "alpha_pred", "queries_measured", "success_prob_bound"}
