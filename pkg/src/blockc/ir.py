"""Expression IR, typing, the syntactic hermiticity judgment and dense
denotations.

Expressions are immutable dataclasses and compare structurally. ``Ref`` only
appears in freshly parsed programs; :meth:`Program.resolve` inlines bindings
so every later stage sees closed terms built from ``Base`` leaves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .errors import (
    ChoiceSubnormMismatch,
    DimensionMismatch,
    NonHermitianPolyBase,
    OversizeDenotation,
    TypeMismatch,
)
from .poly import PolySpec

MAX_DENOTE_QUBITS = 10
CHOICE_RTOL = 1e-9


@dataclass(frozen=True)
class OracleDecl:
    name: str
    n: int
    m: int = 0
    alpha: float = 1.0
    hermitian: bool = False


BUILTINS: dict[str, OracleDecl] = {
    g: OracleDecl(g, 1, 0, 1.0, True) for g in ("X", "Y", "Z", "H", "I")
}

BUILTIN_MATRICES: dict[str, np.ndarray] = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "I": np.eye(2, dtype=complex),
}


class Expr:
    """Marker base class for IR nodes."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()


@dataclass(frozen=True)
class Ref(Expr):
    name: str


@dataclass(frozen=True)
class Base(Expr):
    decl: OracleDecl

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def is_identity(self) -> bool:
        return self.decl == BUILTINS["I"]


@dataclass(frozen=True)
class Adjoint(Expr):
    child: Expr

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple[tuple[float, Expr], ...]

    def children(self):
        return tuple(t for _, t in self.terms)


@dataclass(frozen=True)
class Prod(Expr):
    """Matrix product ``factors[0] @ factors[1] @ ...``.

    ``commuting`` records that every pair of factors was declared (or is
    syntactically) commuting, which is what H-Product needs.
    """

    factors: tuple[Expr, ...]
    commuting: bool = False

    def children(self):
        return self.factors


@dataclass(frozen=True)
class Choice(Expr):
    branches: tuple[Expr, ...]

    def children(self):
        return self.branches


@dataclass(frozen=True)
class Tensor(Expr):
    factors: tuple[Expr, ...]

    def children(self):
        return self.factors


@dataclass(frozen=True)
class Poly(Expr):
    """``sum_j coeffs[j] * base**j``; ``method`` pins an implementation."""

    base: Expr
    coeffs: tuple[float, ...]
    method: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", PolySpec(self.coeffs).coeffs)

    @property
    def spec(self) -> PolySpec:
        return PolySpec(self.coeffs)

    def children(self):
        return (self.base,)


def identity(n: int) -> Expr:
    """Zero-query identity on ``n`` qubits."""
    i = Base(BUILTINS["I"])
    return i if n == 1 else Tensor((i,) * n)


def rebuild(e: Expr, kids: tuple[Expr, ...]) -> Expr:
    """Copy of ``e`` with its children replaced, preserving node metadata."""
    if isinstance(e, Adjoint):
        return Adjoint(kids[0])
    if isinstance(e, Sum):
        return Sum(tuple((c, k) for (c, _), k in zip(e.terms, kids)))
    if isinstance(e, Prod):
        return Prod(tuple(kids), e.commuting)
    if isinstance(e, Choice):
        return Choice(tuple(kids))
    if isinstance(e, Tensor):
        return Tensor(tuple(kids))
    if isinstance(e, Poly):
        return Poly(kids[0], e.coeffs, e.method)
    return e


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in e.children())


def iter_nodes(e: Expr, path: tuple = ()):
    """Preorder walk yielding ``(path, node)``; paths index into ``children()``."""
    yield path, e
    for i, c in enumerate(e.children()):
        yield from iter_nodes(c, path + (i,))


def subexpr(e: Expr, path: tuple) -> Expr:
    for i in path:
        e = e.children()[i]
    return e


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class CommuteDecl:
    left: str
    right: str


@dataclass(frozen=True)
class Program:
    oracles: tuple[OracleDecl, ...]
    commutes: tuple[CommuteDecl, ...]
    bindings: tuple[tuple[str, Expr], ...]
    main: Expr

    def env(self) -> dict[str, OracleDecl]:
        return {**BUILTINS, **{o.name: o for o in self.oracles}}

    def resolve(self) -> Expr:
        """Inline bindings into ``main`` and fix the commuting flag of products."""
        env = self.env()
        done: dict[str, Expr] = {}

        def go(e: Expr) -> Expr:
            if isinstance(e, Ref):
                if e.name in done:
                    return done[e.name]
                return Base(env[e.name])
            kids = tuple(go(k) for k in e.children())
            out = rebuild(e, kids)
            if isinstance(out, Prod):
                out = Prod(out.factors, pairwise_commuting(out.factors, pairs))
            return out

        pairs: set[frozenset] = set()
        # commute declarations may name bindings as well as oracles
        for name, ast in self.bindings:
            pairs = _commute_pairs(self.commutes, env, done)
            done[name] = go(ast)
        pairs = _commute_pairs(self.commutes, env, done)
        return go(self.main)


def _commute_pairs(commutes, env, done) -> set:
    out = set()
    for c in commutes:
        ends = []
        for nm in (c.left, c.right):
            if nm in done:
                ends.append(done[nm])
            elif nm in env:
                ends.append(Base(env[nm]))
        if len(ends) == 2:
            out.add(frozenset(ends) if ends[0] != ends[1] else frozenset((ends[0],)))
    return out


def pairwise_commuting(factors, pairs) -> bool:
    for i, a in enumerate(factors):
        for b in factors[i + 1:]:
            if a == b or _is_id(a) or _is_id(b):
                continue
            if frozenset((a, b)) not in pairs:
                return False
    return True


def _is_id(e: Expr) -> bool:
    return isinstance(e, Base) and e.is_identity


# ------------------------------------------------------------------ typing


@dataclass(frozen=True)
class QType:
    n_qubits: int

    def __str__(self) -> str:
        return "⊗".join(["bool"] * self.n_qubits) if self.n_qubits else "unit"


def qubits(e: Expr, path: tuple = ()) -> int:
    """Data-qubit count of ``e``; raises on ill-typed operands."""
    if isinstance(e, Base):
        return e.decl.n
    if isinstance(e, (Adjoint, Poly)):
        return qubits(e.children()[0], path + (0,))
    if isinstance(e, (Sum, Prod)):
        ns = [qubits(k, path + (i,)) for i, k in enumerate(e.children())]
        if len(set(ns)) > 1:
            raise TypeMismatch(f"operands act on {ns} qubits", path)
        return ns[0]
    if isinstance(e, Choice):
        ns = [qubits(k, path + (i,)) for i, k in enumerate(e.branches)]
        if len(set(ns)) > 1:
            raise TypeMismatch(f"direct sum branches act on {ns} qubits", path)
        k = len(e.branches)
        if k & (k - 1):
            raise TypeMismatch(f"direct sum needs a power-of-two branch count, got {k}", path)
        return ns[0] + (k.bit_length() - 1)
    if isinstance(e, Tensor):
        return sum(qubits(k, path + (i,)) for i, k in enumerate(e.factors))
    raise TypeMismatch(f"unresolved node {e!r}", path)


def is_hermitian_judgment(e: Expr) -> bool:
    """Hermiticity derivable from the declared flags alone (never numeric)."""
    if isinstance(e, Base):
        return e.decl.hermitian
    if isinstance(e, Adjoint):
        return is_hermitian_judgment(e.child)
    if isinstance(e, Poly):
        return is_hermitian_judgment(e.base)
    if isinstance(e, Prod):
        if len(e.factors) > 1 and not e.commuting:
            return False
        return all(is_hermitian_judgment(f) for f in e.factors)
    return all(is_hermitian_judgment(k) for k in e.children())


@dataclass(frozen=True)
class TypedExpr:
    expr: Expr
    qtype: QType
    hermitian: bool
    subnorm: float
    ancillas: int
    queries: float
    children: tuple["TypedExpr", ...] = field(default=(), repr=False)


def typecheck(p: Union[Program, Expr], method: Optional[str] = None) -> TypedExpr:
    """Annotate every node with its type, hermiticity and costs.

    ``method`` forces a polynomial implementation for every ``Poly`` node that
    does not already pin one.
    """
    from .cost import cost  # cost depends on this module

    e = p.resolve() if isinstance(p, Program) else p
    memo: dict = {}

    def go(e: Expr, path: tuple) -> TypedExpr:
        kids = tuple(go(k, path + (i,)) for i, k in enumerate(e.children()))
        n = qubits(e, path)
        if isinstance(e, Poly):
            if not e.coeffs:
                raise TypeMismatch("polynomial has no nonzero coefficient", path)
            if not kids[0].hermitian:
                raise NonHermitianPolyBase("polynomial base is not judged Hermitian", path)
        if isinstance(e, Choice):
            alphas = [k.subnorm for k in kids]
            if any(not math.isclose(a, alphas[0], rel_tol=CHOICE_RTOL) for a in alphas):
                raise ChoiceSubnormMismatch(alphas, path)
        c = cost(e, method=method, memo=memo)
        return TypedExpr(e, QType(n), is_hermitian_judgment(e), c.subnorm, c.ancillas, c.queries, kids)

    return go(e, ())


# --------------------------------------------------------------- semantics


def _matrix_for(b: Base, bindings: Mapping[str, np.ndarray]) -> np.ndarray:
    if b.name in bindings:
        mat = np.asarray(bindings[b.name], dtype=complex)
    elif b.decl in BUILTINS.values():
        mat = BUILTIN_MATRICES[b.name]
    else:
        raise DimensionMismatch(f"no matrix bound for oracle {b.name}")
    if mat.shape != (2**b.decl.n, 2**b.decl.n):
        raise DimensionMismatch(f"oracle {b.name} bound to shape {mat.shape}, expected n={b.decl.n}")
    return mat


def denote(e: Union[TypedExpr, Expr], bindings: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
    """Dense matrix ``[[e]]`` (unnormalised)."""
    expr = e.expr if isinstance(e, TypedExpr) else e
    n = qubits(expr)
    if n > MAX_DENOTE_QUBITS:
        raise OversizeDenotation(f"{n} data qubits exceeds the dense limit {MAX_DENOTE_QUBITS}")
    bindings = bindings or {}
    memo: dict[int, np.ndarray] = {}

    def go(x: Expr) -> np.ndarray:
        key = id(x)
        if key in memo:
            return memo[key]
        if isinstance(x, Base):
            out = _matrix_for(x, bindings)
        elif isinstance(x, Adjoint):
            out = go(x.child).conj().T
        elif isinstance(x, Sum):
            out = sum(c * go(t) for c, t in x.terms)
        elif isinstance(x, Prod):
            out = go(x.factors[0])
            for f in x.factors[1:]:
                out = out @ go(f)
        elif isinstance(x, Choice):
            mats = [go(b) for b in x.branches]
            d = mats[0].shape[0]
            out = np.zeros((d * len(mats),) * 2, dtype=complex)
            for i, m in enumerate(mats):
                out[i * d:(i + 1) * d, i * d:(i + 1) * d] = m
        elif isinstance(x, Tensor):
            out = go(x.factors[0])
            for f in x.factors[1:]:
                out = np.kron(out, go(f))
        elif isinstance(x, Poly):
            m = go(x.base)
            out = np.zeros_like(m)
            for c in reversed(x.coeffs):
                out = out @ m + c * np.eye(m.shape[0])
        else:
            raise TypeMismatch(f"cannot denote {x!r}")
        memo[key] = out
        return out

    return go(expr)
