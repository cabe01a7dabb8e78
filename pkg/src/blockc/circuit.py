"""Circuit synthesis for block encodings.

Each expression compiles to a fragment: ancilla registers followed by the
data qubits, with gates on local qubit indices. Parents place child
fragments into their own layout, share ancilla blocks between children that
run one after another, and add control qubits where a construction selects a
branch. Qubit 0 is the most significant index, and every non-data register
is post-selected on zero.
"""
from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .cost import CostReport, PolyMethod, clog2, cost, poly_method, qsvt_parts
from .errors import InternalArity, UnboundOracle, UnsupportedMethod
from .ir import (
    BUILTINS,
    Adjoint,
    Base,
    Choice,
    Expr,
    OracleDecl,
    Poly,
    Prod,
    Sum,
    Tensor,
    TypedExpr,
    identity,
    iter_nodes,
    qubits,
)
from .poly import ZERO_TOL, PolySpec
from .qsp import PhaseSequence, solve_phases

SELF_INVERSE = {"H", "X", "Y", "Z"}


@dataclass(frozen=True)
class Register:
    name: str
    size: int
    kind: str  # data, ancilla, selector, counter, qsvt, pad


@dataclass(frozen=True)
class Gate:
    """A gate on absolute (or fragment-local) qubit indices.

    ``controls`` holds ``(qubit, polarity)`` pairs; polarity False means the
    gate fires when that qubit is 0.
    """

    kind: str  # H, X, Y, Z, Ry, Rz, Oracle
    targets: tuple[int, ...]
    controls: tuple[tuple[int, bool], ...] = ()
    angle: Optional[float] = None
    name: Optional[str] = None
    dagger: bool = False

    @property
    def label(self) -> str:
        if self.kind == "X" and len(self.controls) == 1 and self.controls[0][1]:
            return "CX"
        return self.kind

    def inverse(self) -> "Gate":
        if self.kind in ("Ry", "Rz"):
            return replace(self, angle=-self.angle)
        if self.kind == "Oracle":
            return replace(self, dagger=not self.dagger)
        return self

    def as_dict(self) -> dict:
        out = {
            "kind": self.label,
            "qubits": list(self.targets),
            "controls": [[q, int(p)] for q, p in self.controls],
            "angle": self.angle,
        }
        if self.kind == "Oracle":
            out["oracle"] = self.name
            out["dagger"] = self.dagger
        return out


@dataclass
class Circuit:
    registers: list[Register]
    gates: list[Gate]
    predicted: CostReport
    oracles: dict[str, OracleDecl] = field(default_factory=dict)
    uses_qsp: bool = False
    solver_time: float = 0.0

    @property
    def num_qubits(self) -> int:
        return sum(r.size for r in self.registers)

    @property
    def n_data(self) -> int:
        return sum(r.size for r in self.registers if r.kind == "data")

    @property
    def postselect(self) -> list[Register]:
        return [r for r in self.registers if r.kind != "data"]

    @property
    def ancilla_width(self) -> int:
        return sum(r.size for r in self.postselect)

    def offsets(self) -> dict[str, int]:
        out, pos = {}, 0
        for r in self.registers:
            out[r.name] = pos
            pos += r.size
        return out

    def gate_list(self) -> list[dict]:
        return [g.as_dict() for g in self.gates]


def count_queries(c: Circuit) -> float:
    """Number of oracle invocations, daggered or controlled ones included."""
    return float(sum(1 for g in c.gates if g.kind == "Oracle"))


# ---------------------------------------------------------------- fragments


@dataclass
class _Frag:
    anc: list[Register]
    n: int
    gates: list[Gate]
    alpha: float

    @property
    def width(self) -> int:
        return sum(r.size for r in self.anc)


def _place(gates: Sequence[Gate], mapping: Sequence[int], controls=()) -> list[Gate]:
    controls = tuple(controls)
    return [
        replace(
            g,
            targets=tuple(mapping[t] for t in g.targets),
            controls=controls + tuple((mapping[q], p) for q, p in g.controls),
        )
        for g in gates
    ]


def _adjoint(gates: Sequence[Gate]) -> list[Gate]:
    return [g.inverse() for g in reversed(gates)]


def _pattern(qs: Sequence[int], value: int) -> tuple[tuple[int, bool], ...]:
    """Controls matching ``value`` on ``qs`` (first qubit is the high bit)."""
    k = len(qs)
    return tuple((q, bool((value >> (k - 1 - i)) & 1)) for i, q in enumerate(qs))


def _increment(qs: Sequence[int], controls=()) -> list[Gate]:
    """``+1 mod 2**len(qs)`` as a ripple of multi-controlled X, high bit first."""
    controls = tuple(controls)
    return [
        Gate("X", (q,), controls + tuple((p, True) for p in qs[i + 1:]))
        for i, q in enumerate(qs)
    ]


def _add_const(qs: Sequence[int], value: int) -> list[Gate]:
    gates = []
    k = len(qs)
    for j in range(k):
        if (value >> j) & 1:
            gates += _increment(qs[: k - j])
    return gates


def _prepare(qs: Sequence[int], weights: Sequence[float]) -> list[Gate]:
    """Rotation tree loading amplitudes ``sqrt(w_j / sum w)`` onto ``qs``."""
    s = len(qs)
    w = list(weights) + [0.0] * ((1 << s) - len(weights))
    gates = []
    for level in range(s):
        span = 1 << (s - level)
        for prefix in range(1 << level):
            lo = prefix * span
            total = sum(w[lo: lo + span])
            if total <= 0.0:
                continue
            left = sum(w[lo: lo + span // 2])
            ratio = min(1.0, max(0.0, left / total))
            theta = 2.0 * float(np.arccos(np.sqrt(ratio)))
            gates.append(Gate("Ry", (qs[level],), _pattern(qs[:level], prefix), theta))
    return gates


def _shared_block(frags: Sequence[_Frag]) -> list[Register]:
    widest = max(frags, key=lambda f: f.width)
    return list(widest.anc)


@lru_cache(maxsize=512)
def _phases(coeffs: tuple, alpha: float, sup: float) -> tuple[PhaseSequence, float]:
    t0 = time.perf_counter()
    ph = solve_phases(PolySpec(coeffs).normalized(alpha, sup))
    return ph, time.perf_counter() - t0


class _Compiler:
    def __init__(self, method: Optional[str] = None):
        self.method = method
        self.next_id = 0
        self.memo: dict = {}
        self.oracles: dict[str, OracleDecl] = {}
        self.uses_qsp = False
        self.solver_time = 0.0

    def fresh(self) -> int:
        i = self.next_id
        self.next_id += 1
        return i

    def alpha(self, e: Expr) -> float:
        return cost(e, self.method, self.memo).subnorm

    def compile(self, e: Expr) -> _Frag:
        nid = self.fresh()
        if isinstance(e, Base):
            return self.base(e, nid)
        if isinstance(e, Adjoint):
            f = self.compile(e.child)
            return _Frag(f.anc, f.n, _adjoint(f.gates), f.alpha)
        if isinstance(e, Sum):
            items = [(c, self.compile(t)) for c, t in e.terms]
            return self.lcu(items, nid)
        if isinstance(e, Prod):
            return self.prod([self.compile(f) for f in e.factors], nid)
        if isinstance(e, Choice):
            return self.choice([self.compile(b) for b in e.branches], nid)
        if isinstance(e, Tensor):
            return self.tensor([self.compile(f) for f in e.factors])
        if isinstance(e, Poly):
            return self.poly(e, nid)
        raise InternalArity(f"cannot compile {e!r}")

    def base(self, e: Base, nid: int) -> _Frag:
        d = e.decl
        if e.is_identity:
            return _Frag([], 1, [], 1.0)
        self.oracles[d.name] = d
        anc = [Register(f"orc_{d.name}_anc_{nid}", d.m, "ancilla")] if d.m else []
        gate = Gate("Oracle", tuple(range(d.m + d.n)), name=d.name)
        return _Frag(anc, d.n, [gate], d.alpha)

    def lcu(self, items: Sequence[tuple[float, _Frag]], nid: int) -> _Frag:
        """PREPARE / SELECT / PREPARE-dagger over weighted child fragments."""
        n = items[0][1].n
        if any(f.n != n for _, f in items):
            raise InternalArity("sum operands disagree on data width")
        s = clog2(len(items))
        block = _shared_block([f for _, f in items])
        width = sum(r.size for r in block)
        sel = list(range(s))
        data0 = s + width
        weights = [abs(c) * f.alpha for c, f in items]
        prep = _prepare(sel, weights)
        gates = list(prep)
        for j, (c, f) in enumerate(items):
            mapping = list(range(s, s + f.width)) + list(range(data0, data0 + n))
            ctl = _pattern(sel, j)
            gates += _place(f.gates, mapping, ctl)
            if c < 0:
                gates += self._phase_flip(sel, j, data0)
        gates += _adjoint(prep)
        anc = ([Register(f"sum_sel_{nid}", s, "selector")] if s else []) + block
        return _Frag(anc, n, gates, float(sum(weights)))

    @staticmethod
    def _phase_flip(sel: Sequence[int], j: int, data0: int) -> list[Gate]:
        if not sel:
            q = data0  # no selector: -1 as Z X Z X on a data qubit
            return [Gate("Z", (q,)), Gate("X", (q,)), Gate("Z", (q,)), Gate("X", (q,))]
        t = sel[-1]
        ctl = _pattern(sel[:-1], j >> 1)
        z = Gate("Z", (t,), ctl)
        if j & 1:
            return [z]
        return [Gate("X", (t,)), z, Gate("X", (t,))]

    def prod(self, frags: Sequence[_Frag], nid: int) -> _Frag:
        n = frags[0].n
        if any(f.n != n for f in frags):
            raise InternalArity("product operands disagree on data width")
        if len(frags) == 1:
            return frags[0]
        s = clog2(len(frags))
        block = _shared_block(frags)
        width = sum(r.size for r in block)
        ctr = list(range(s))
        zero_block = tuple((q, False) for q in range(s, s + width))
        gates: list[Gate] = []
        # rightmost factor acts first
        for i, f in enumerate(reversed(frags)):
            mapping = list(range(s, s + f.width)) + list(range(s + width, s + width + n))
            gates += _place(f.gates, mapping)
            if i < len(frags) - 1:
                gates += _increment(ctr, zero_block)
        gates += _add_const(ctr, ((1 << s) - (len(frags) - 1)) % (1 << s))
        anc = [Register(f"prod_ctr_{nid}", s, "counter")] + block
        return _Frag(anc, n, gates, float(np.prod([f.alpha for f in frags])))

    def choice(self, frags: Sequence[_Frag], nid: int) -> _Frag:
        n = frags[0].n
        j = clog2(len(frags))
        block = _shared_block(frags)
        width = sum(r.size for r in block)
        disc = list(range(width, width + j))
        gates: list[Gate] = []
        for i, f in enumerate(frags):
            mapping = list(range(f.width)) + list(range(width + j, width + j + n))
            gates += _place(f.gates, mapping, _pattern(disc, i))
        return _Frag(block, n + j, gates, max(f.alpha for f in frags))

    def tensor(self, frags: Sequence[_Frag]) -> _Frag:
        total_anc = sum(f.width for f in frags)
        anc: list[Register] = []
        gates: list[Gate] = []
        a_pos, d_pos = 0, total_anc
        for f in frags:
            mapping = list(range(a_pos, a_pos + f.width)) + list(range(d_pos, d_pos + f.n))
            gates += _place(f.gates, mapping)
            anc += f.anc
            a_pos += f.width
            d_pos += f.n
        return _Frag(anc, sum(f.n for f in frags), gates, float(np.prod([f.alpha for f in frags])))

    # -- polynomials

    def poly(self, e: Poly, nid: int) -> _Frag:
        base_cost = cost(e.base, self.method, self.memo)
        method = poly_method(e, base_cost, self.method)
        target = cost(e, self.method, self.memo)
        if method is PolyMethod.QSVT:
            frag = self.qsvt(e, base_cost, nid)
        elif method in (PolyMethod.LCU, PolyMethod.HORNER):
            expansion = lcu_expansion(e) if method is PolyMethod.LCU else horner_expansion(e)
            frag = self.compile(expansion)
        else:
            raise UnsupportedMethod("GQET is priced by the cost model but never compiled")
        pad = target.ancillas - frag.width
        if pad < 0:
            raise InternalArity(f"{method.value} expansion uses {frag.width} ancillas, model allows {target.ancillas}")
        if pad:
            frag = _Frag([Register(f"poly_pad_{nid}", pad, "pad")] + frag.anc, frag.n, _shift(frag.gates, pad), frag.alpha)
        return frag

    def qsvt(self, e: Poly, base_cost: CostReport, nid: int) -> _Frag:
        base = self.compile(e.base)
        parts = qsvt_parts(e.spec, base_cost.subnorm)
        frags = []
        for label, part, sup in parts:
            phases, dt = _phases(part.coeffs, base_cost.subnorm, sup)
            self.solver_time += dt
            self.uses_qsp = True
            f = _qsvt_frag(base, phases, self.fresh())
            f.alpha = sup / phases.scale
            frags.append(f)
        if len(frags) == 1:
            return frags[0]
        return self.lcu([(1.0, f) for f in frags], nid)


def _shift(gates: Sequence[Gate], k: int) -> list[Gate]:
    top = 1 + max([max(g.targets + tuple(q for q, _ in g.controls)) for g in gates], default=-1)
    return _place(gates, [i + k for i in range(top)])


def _qsvt_frag(base: _Frag, phases: PhaseSequence, nid: int) -> _Frag:
    """One QSVT ancilla ahead of the base ancillas, phases alternating U and U^dagger."""
    w = base.width
    q = 0
    mapping = list(range(1, 1 + w + base.n))
    forward = _place(base.gates, mapping)
    backward = _adjoint(forward)
    proj = tuple((1 + i, False) for i in range(w))
    angles = phases.reflection_angles()
    gates = [Gate("H", (q,))]
    for j, phi in enumerate(angles):
        gates += [Gate("X", (q,), proj), Gate("Rz", (q,), (), 2.0 * phi), Gate("X", (q,), proj)]
        if j < len(angles) - 1:
            gates += forward if j % 2 == 0 else backward
    gates.append(Gate("H", (q,)))
    anc = [Register(f"qsvt_anc_{nid}", 1, "qsvt")] + list(base.anc)
    return _Frag(anc, base.n, gates, 1.0)


def lcu_expansion(e: Poly) -> Expr:
    """``sum_j a_j M**j`` with each power as a product of copies."""
    n = qubits(e.base)
    terms = []
    for j, c in enumerate(e.coeffs):
        if abs(c) <= ZERO_TOL:
            continue
        if j == 0:
            term = identity(n)
        elif j == 1:
            term = e.base
        else:
            term = Prod((e.base,) * j)
        terms.append((c, term))
    return Sum(tuple(terms))


def horner_expansion(e: Poly) -> Expr:
    """``(...((a_d M + a_{d-1}) M + a_{d-2}) ...) M + a_0``."""
    n = qubits(e.base)
    coeffs = e.coeffs
    acc: Expr = Sum(((coeffs[-1], identity(n)),))
    for c in reversed(coeffs[:-1]):
        step = Prod((acc, e.base))
        acc = Sum(((1.0, step), (c, identity(n)))) if abs(c) > ZERO_TOL else step
    return acc


def compile(e: Union[Expr, TypedExpr], method: Optional[str] = None) -> Circuit:
    """Compile an expression into a post-selected block-encoding circuit."""
    expr = e.expr if isinstance(e, TypedExpr) else e
    comp = _Compiler(method)
    frag = comp.compile(expr)
    regs = [r for r in frag.anc if r.size] + [Register("data", frag.n, "data")]
    return Circuit(
        regs,
        frag.gates,
        cost(expr, method, comp.memo),
        dict(sorted(comp.oracles.items())),
        comp.uses_qsp,
        comp.solver_time,
    )


def build_qsvt(base: Circuit, phi: PhaseSequence) -> Circuit:
    """QSVT circuit applying ``phi``'s polynomial to the block of ``base``."""
    anc = [r for r in base.registers if r.kind != "data"]
    frag = _Frag(anc, base.n_data, list(base.gates), base.predicted.subnorm)
    ids = [int(r.name.rsplit("_", 1)[1]) for r in base.registers if r.name.rsplit("_", 1)[-1].isdigit()]
    f = _qsvt_frag(frag, phi, 1 + max(ids, default=-1))
    d = len(phi.angles) - 1
    predicted = CostReport(base.predicted.queries * d, 1.0, base.predicted.ancillas + 1)
    return Circuit(
        [r for r in f.anc if r.size] + [Register("data", f.n, "data")],
        f.gates,
        predicted,
        dict(base.oracles),
        True,
    )


def has_qsp(e: Expr, method: Optional[str] = None) -> bool:
    """Whether compiling ``e`` runs the phase solver."""
    memo: dict = {}
    for _, node in iter_nodes(e):
        if isinstance(node, Poly):
            if poly_method(node, cost(node.base, method, memo), method) is PolyMethod.QSVT:
                return True
    return False


# ----------------------------------------------------------- instantiation


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


GATE_MATRICES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def gate_matrix(g: Gate) -> np.ndarray:
    if g.kind == "Ry":
        return _ry(g.angle)
    if g.kind == "Rz":
        return _rz(g.angle)
    return GATE_MATRICES[g.kind]


def oracle_gates(decl: OracleDecl, seed: int, dagger: bool = False) -> list[Gate]:
    """Seeded rotation ladder standing in for oracle ``decl`` (local qubits).

    A Hermitian oracle is realised as ``V^dagger Z V`` so its top-left block
    is Hermitian; other oracles are ``V`` itself. Builtin gates use their
    exact matrix.
    """
    if decl.name in BUILTINS and decl == BUILTINS[decl.name]:
        gates = [] if decl.name == "I" else [Gate(decl.name, (0,))]
        return gates
    q = decl.m + decl.n
    rng = np.random.default_rng([seed, zlib.crc32(decl.name.encode())])
    v: list[Gate] = []
    for layer in range(3):
        for i in range(q):
            v.append(Gate("Ry", (i,), (), float(rng.uniform(0, 2 * np.pi))))
            v.append(Gate("Rz", (i,), (), float(rng.uniform(0, 2 * np.pi))))
        if layer < 2:
            v += [Gate("X", (i + 1,), ((i, True),)) for i in range(q - 1)]
    gates = v + [Gate("Z", (0,))] + _adjoint(v) if decl.hermitian else v
    return _adjoint(gates) if dagger else gates


def instantiate_oracles(c: Circuit, seed: int) -> Circuit:
    """Replace every oracle gate by its seeded decomposition."""
    cache: dict = {}
    gates: list[Gate] = []
    for g in c.gates:
        if g.kind != "Oracle":
            gates.append(g)
            continue
        key = (g.name, g.dagger)
        if key not in cache:
            cache[key] = oracle_gates(c.oracles[g.name], seed, g.dagger)
        gates += _place(cache[key], list(g.targets), g.controls)
    return Circuit(list(c.registers), gates, c.predicted, dict(c.oracles), c.uses_qsp, c.solver_time)


def _gates_unitary(gates: Sequence[Gate], nq: int) -> np.ndarray:
    from .sim import apply_gates

    state = np.eye(2**nq, dtype=complex)
    return apply_gates(state, gates, nq)


@lru_cache(maxsize=256)
def oracle_unitary(decl: OracleDecl, seed: int) -> np.ndarray:
    """Full unitary of the instantiated oracle on its ``[ancillas, data]`` qubits."""
    u = _gates_unitary(oracle_gates(decl, seed), decl.m + decl.n)
    u.setflags(write=False)
    return u


def oracle_binding(decl: OracleDecl, seed: int) -> np.ndarray:
    """Matrix the instantiated oracle block-encodes: ``alpha`` times its top-left block."""
    dim = 2**decl.n
    return decl.alpha * np.array(oracle_unitary(decl, seed)[:dim, :dim])


def bindings_for(e: Expr, seed: int) -> dict[str, np.ndarray]:
    out = {}
    for _, node in iter_nodes(e):
        if isinstance(node, Base) and not node.is_identity and node.name not in out:
            out[node.name] = oracle_binding(node.decl, seed)
    return out


def check_emittable(c: Circuit, opaque: bool) -> None:
    if not opaque and any(g.kind == "Oracle" for g in c.gates):
        names = sorted({g.name for g in c.gates if g.kind == "Oracle"})
        raise UnboundOracle(f"oracles {', '.join(names)} are not instantiated (use --opaque or a seed)")
