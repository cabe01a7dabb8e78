"""End-to-end acceptance checks, one test per criterion."""
import itertools
import time

import numpy as np
import pytest
from numpy.polynomial import chebyshev as C

from blockc import fixtures
from blockc.circuit import bindings_for, compile, count_queries
from blockc.cli import main, timing_row
from blockc.cost import cost
from blockc.frontend import parse, print_expr
from blockc.ir import denote
from blockc.poly import PolySpec, l1_norm, linf_norm
from blockc.qsp import PhaseSequence, evaluate_phases, solve_phases
from blockc.rewrite import apply_rules
from blockc.sim import block, verify

from gen import corpus

GRID = np.linspace(-1, 1, 201)


def program(name):
    return parse(fixtures.source(name)).resolve()


@pytest.fixture(scope="module")
def programs():
    worked = [program("simulation-example"), program("regression-example")]
    return worked + corpus(500)


def test_criterion_1_worked_example_costs(criterion):
    t0 = time.perf_counter()
    sim = program("simulation-example")
    reg = program("regression-example")
    rows = []
    for e in (sim, reg):
        raw, opt = cost(e), cost(apply_rules(e)[0])
        rows.append((raw.queries, round(raw.subnorm, 12), round(raw.total, 12), opt.queries, opt.subnorm, opt.total))
    elapsed = time.perf_counter() - t0
    ok = rows == [(8.0, 2.6, 20.8, 4.0, 2.0, 8.0), (12.0, 16.0, 192.0, 8.0, 1.0, 8.0)] and elapsed < 1.0
    criterion(1, ok, f"costs {rows} in {elapsed:.3f}s")


def test_criterion_2_optimized_form(criterion):
    out = print_expr(apply_rules(program("regression-example"))[0])
    criterion(2, out == "Poly((A - B), [0.0, 0.0, 1.0, 0.0, -0.25])", out)


def test_criterion_3_query_and_ancilla_agreement(criterion, programs):
    t0 = time.perf_counter()
    bad = []
    for i, e in enumerate(programs):
        c = compile(e)
        pred = cost(e)
        if count_queries(c) != pred.queries or c.ancilla_width != pred.ancillas:
            bad.append(i)
    elapsed = time.perf_counter() - t0
    criterion(3, not bad and elapsed < 60, f"{len(programs)} programs, mismatches {bad[:5]}, {elapsed:.1f}s")


def test_criterion_4_semantic_verification(criterion, programs):
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for i, e in enumerate(programs):
        r = verify(e, seed=i, raise_on_fail=False)
        worst = max(worst, r.max_dev / r.tol)
        if not r.ok:
            bad.append((i, r.max_dev))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 300
    criterion(4, ok, f"{len(programs)} programs, worst dev/tol {worst:.2e}, failures {bad[:3]}, {elapsed:.1f}s")


def test_criterion_5_optimizer_sound_monotone_idempotent(criterion, programs):
    t0 = time.perf_counter()
    unsound, worse, unstable = [], [], []
    for i, e in enumerate(programs):
        out, _ = apply_rules(e)
        b = bindings_for(e, i)
        if np.max(np.abs(denote(out, b) - denote(e, b))) > 1e-9:
            unsound.append(i)
        if cost(out).total > cost(e).total:
            worse.append(i)
        if len(apply_rules(out)[1]):
            unstable.append(i)
    elapsed = time.perf_counter() - t0
    ok = not (unsound or worse or unstable) and elapsed < 120
    criterion(5, ok, f"unsound {unsound[:3]}, cost increases {worse[:3]}, non-idempotent {unstable[:3]}, {elapsed:.1f}s")


def test_criterion_6_norm_inequalities(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(1000):
        p = PolySpec(rng.normal(size=int(rng.integers(1, 12))))
        a = float(rng.uniform(0.1, 2.0))
        bad += linf_norm(p, a) > l1_norm(p, a) + 1e-9
    fixed = [n for n in fixtures.ALGORITHM_BENCH + ("regression-example",)]
    order = []
    for n in fixed:
        e = apply_rules(program(n))[0]
        order.append(cost(e, "qsvt").subnorm <= cost(e, "lcu").subnorm)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and all(order) and elapsed < 10
    criterion(6, ok, f"linf > l1 in {bad}/1000, QSVT <= LCU subnorm on {sum(order)}/{len(order)} fixtures, {elapsed:.1f}s")


def test_criterion_7_qsp_round_trip(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 31))
        cheb = np.zeros(d + 1)
        cheb[d % 2:: 2] = rng.normal(size=len(cheb[d % 2:: 2]))
        p = PolySpec(C.cheb2poly(cheb))
        p = PolySpec(np.array(p.coeffs) * (0.9 / linf_norm(p, 1.0)))
        ph = solve_phases(p)
        worst = max(worst, float(np.max(np.abs(evaluate_phases(ph, GRID).real - ph.scale * p(GRID)))))
    cheb_err = max(
        float(np.max(np.abs(evaluate_phases(PhaseSequence((0.0,) * (n + 1)), GRID).real - np.cos(n * np.arccos(GRID)))))
        for n in range(31)
    )
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and cheb_err <= 1e-12 and elapsed < 120
    criterion(7, ok, f"max residual {worst:.2e}, zero-phase T_n error {cheb_err:.2e}, {elapsed:.1f}s")


def test_criterion_8_cross_method_agreement(criterion):
    raw = program("regression-example")
    e = apply_rules(raw)[0]
    blocks = {}
    for m in ("lcu", "horner", "qsvt"):
        c = compile(e, m)
        blocks[m] = block(c, 8) * c.predicted.subnorm
    gap = max(np.max(np.abs(blocks[a] - blocks[b])) for a, b in itertools.combinations(blocks, 2))
    qsvt_total, lcu_total = cost(e, "qsvt").total, cost(raw).total
    ok = gap <= 1e-7 and qsvt_total == 8.0 and lcu_total == 192.0
    criterion(8, ok, f"pairwise gap {gap:.2e}, QSVT {qsvt_total} vs unoptimized LCU {lcu_total}")


def test_criterion_9_algorithm_directionality(criterion):
    rows = []
    for n in fixtures.ALGORITHM_BENCH:
        e = program(n)
        q, h, l = (cost(e, m) for m in ("qsvt", "horner", "lcu"))
        rows.append((n, q.total < h.total < l.total and h.queries <= l.queries, round(q.total, 2), h.total, l.total))
    criterion(9, all(r[1] for r in rows), "; ".join(f"{n}: {q} < {h:.1f} < {l:.1f}" for n, _, q, h, l in rows))


def test_criterion_10_compile_time(criterion):
    rows = [timing_row(n) for n in fixtures.CHEBYSHEV_RANGE]
    slowest = max(r["non_solver"] for r in rows)
    split = all("solver" in r and "non_solver" in r for r in rows)
    ok = slowest < 0.5 and split
    criterion(10, ok, f"max non-solver {slowest:.4f}s, max solver {max(r['solver'] for r in rows):.4f}s over T_2..T_30")


def test_criterion_11_qasm_validity(criterion, tmp_path, capsys):
    qasm2 = pytest.importorskip("qiskit.qasm2")
    names = fixtures.names()
    bad = []
    for name in names:
        for extra in ([], ["--no-opt"]):
            texts = []
            for k in range(2):
                out = tmp_path / f"{name}{k}.qasm"
                main(["compile", name, "--seed", "3", "-o", str(out), *extra])
                texts.append(out.read_bytes())
            try:
                qasm2.loads(texts[0].decode())
            except Exception as exc:  # noqa: BLE001
                bad.append(f"{name}: {exc}")
            if texts[0] != texts[1]:
                bad.append(f"{name}: output differs between runs")
    capsys.readouterr()
    criterion(11, not bad, f"{2 * len(names)} programs emitted; problems {bad[:3]}")
