"""Cost-guided normalisation: adjoint push-down, identity elimination,
factoring, polynomial fusion and sum fusion.

The driver normalises innermost-first and repeats to a fixed point. A rule
application is kept only when the rewritten subtree is no worse in *both*
queries and subnormalization (and keeps any hermiticity it had). Every
parent operator is monotone in those two numbers, so the guard makes the
whole-program cost non-increasing.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .cost import CostReport, PolyMethod, cost, poly_cost, select_poly_method
from .errors import AllTermsCancel, StepLimitExceeded
from .frontend import print_expr
from .ir import (
    Adjoint,
    Base,
    Choice,
    Expr,
    Poly,
    Prod,
    Sum,
    Tensor,
    identity,
    is_hermitian_judgment,
    node_count,
    qubits,
    rebuild,
)
from .poly import ZERO_TOL, PolySpec

__all__ = [
    "RuleId",
    "RewriteStep",
    "RewriteTrace",
    "apply_rules",
    "optimize",
    "poly_fuse",
    "select_poly_method",
    "sum_fuse",
]

REL = 1e-12
CHOICE_RTOL = 1e-9


class RuleId(str, enum.Enum):
    SumFusion = "SumFusion"
    PolyFusion = "PolyFusion"
    PolyMulMerge = "PolyMulMerge"
    PolyAddMerge = "PolyAddMerge"
    PolyChoiceMerge = "PolyChoiceMerge"
    PolyCompose = "PolyCompose"
    FactorProdSumL = "FactorProdSumL"
    FactorProdSumR = "FactorProdSumR"
    FactorChoiceProdL = "FactorChoiceProdL"
    FactorChoiceProdR = "FactorChoiceProdR"
    FactorTensorSumL = "FactorTensorSumL"
    FactorTensorSumR = "FactorTensorSumR"
    FactorTensorChoiceL = "FactorTensorChoiceL"
    FactorTensorChoiceR = "FactorTensorChoiceR"
    ChoiceIdem = "ChoiceIdem"
    ProdIdentity = "ProdIdentity"
    AdjHermitian = "AdjHermitian"
    AdjInvolution = "AdjInvolution"
    AdjProd = "AdjProd"
    AdjSum = "AdjSum"
    AdjTensor = "AdjTensor"
    AdjChoice = "AdjChoice"


@dataclass(frozen=True)
class RewriteStep:
    rule: RuleId
    path: tuple[int, ...]
    before: CostReport
    after: CostReport

    def as_dict(self) -> dict:
        return {
            "rule": self.rule.value,
            "path": list(self.path),
            "before": self.before.as_dict(),
            "after": self.after.as_dict(),
        }


@dataclass
class RewriteTrace:
    """Applied steps; costs are those of the rewritten subtree."""

    steps: list[RewriteStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def as_list(self) -> list[dict]:
        return [s.as_dict() for s in self.steps]


# ------------------------------------------------------------------ helpers


def is_identity(e: Expr) -> bool:
    if isinstance(e, Base):
        return e.is_identity
    if isinstance(e, Tensor):
        return all(is_identity(f) for f in e.factors)
    return False


def _prod(factors, commuting: bool) -> Expr:
    factors = tuple(factors)
    return factors[0] if len(factors) == 1 else Prod(factors, commuting)


def _tensor(factors) -> Expr:
    factors = tuple(factors)
    return factors[0] if len(factors) == 1 else Tensor(factors)


def _flag(e: Expr) -> bool:
    return e.commuting if isinstance(e, Prod) else True


def _as_power(e: Expr) -> tuple[Expr, PolySpec]:
    """View ``e`` as ``p(base)``: Poly nodes, products of copies, or ``x``."""
    if isinstance(e, Poly) and e.method is None:
        return e.base, e.spec
    if isinstance(e, Prod) and len(e.factors) > 1 and all(f == e.factors[0] for f in e.factors):
        base, p = _as_power(e.factors[0])
        q = PolySpec((1.0,))
        for _ in e.factors:
            q = q * p
        return base, q
    return e, PolySpec((0.0, 1.0))


def _make_poly(base: Expr, p: PolySpec) -> Optional[Expr]:
    """``p(base)`` as an expression, or ``None`` for the zero polynomial."""
    if p.is_zero:
        return None
    if p.coeffs == (0.0, 1.0):
        return base
    return Poly(base, p.coeffs)


# -------------------------------------------------------------------- rules
# Each rule maps a node (whose children are already normal) to a rewritten
# node, or returns None when it does not match.


def r_adj_involution(e):
    if isinstance(e, Adjoint) and isinstance(e.child, Adjoint):
        return e.child.child


def r_adj_hermitian(e):
    if isinstance(e, Adjoint) and is_hermitian_judgment(e.child):
        return e.child


def r_adj_prod(e):
    if isinstance(e, Adjoint) and isinstance(e.child, Prod):
        c = e.child
        return Prod(tuple(Adjoint(f) for f in reversed(c.factors)), c.commuting)


def r_adj_sum(e):
    if isinstance(e, Adjoint) and isinstance(e.child, Sum):
        return Sum(tuple((c, Adjoint(t)) for c, t in e.child.terms))


def r_adj_tensor(e):
    if isinstance(e, Adjoint) and isinstance(e.child, Tensor):
        return Tensor(tuple(Adjoint(f) for f in e.child.factors))


def r_adj_choice(e):
    if isinstance(e, Adjoint) and isinstance(e.child, Choice):
        return Choice(tuple(Adjoint(b) for b in e.child.branches))


def r_prod_identity(e):
    if isinstance(e, Prod):
        if len(e.factors) == 1:
            return e.factors[0]
        kept = [f for f in e.factors if not is_identity(f)]
        if len(kept) == len(e.factors):
            return None
        return _prod(kept or [e.factors[0]], e.commuting)
    if isinstance(e, Tensor) and len(e.factors) == 1:
        return e.factors[0]


def r_choice_idem(e):
    if isinstance(e, Choice) and all(b == e.branches[0] for b in e.branches):
        k = len(e.branches)
        if k == 1:
            return e.branches[0]
        return Tensor((identity(k.bit_length() - 1), e.branches[0]))


def _factor_sum(e, split, join):
    """Group sum terms sharing an outer factor; ``split`` exposes (factor, rest)."""
    if not isinstance(e, Sum) or len(e.terms) < 2:
        return None
    groups: dict = {}
    for i, (c, t) in enumerate(e.terms):
        parts = split(t)
        if parts is not None:
            groups.setdefault(parts[0], []).append(i)
    for key, idx in groups.items():
        if len(idx) < 2:
            continue
        inner = []
        flags = True
        for i in idx:
            c, t = e.terms[i]
            _, rest = split(t)
            inner.append((c, rest))
            flags = flags and _flag(t)
        merged = join(key, Sum(tuple(inner)), flags)
        terms = []
        for i, term in enumerate(e.terms):
            if i == idx[0]:
                terms.append((1.0, merged))
            elif i not in idx:
                terms.append(term)
        return Sum(tuple(terms))
    return None


def _split_prod_l(t):
    if isinstance(t, Prod) and len(t.factors) > 1:
        return t.factors[0], _prod(t.factors[1:], t.commuting)


def _split_prod_r(t):
    if isinstance(t, Prod) and len(t.factors) > 1:
        return t.factors[-1], _prod(t.factors[:-1], t.commuting)


def _split_tensor_l(t):
    if isinstance(t, Tensor) and len(t.factors) > 1:
        return t.factors[0], _tensor(t.factors[1:])


def _split_tensor_r(t):
    if isinstance(t, Tensor) and len(t.factors) > 1:
        return t.factors[-1], _tensor(t.factors[:-1])


def r_factor_prod_sum_l(e):
    return _factor_sum(e, _split_prod_l, lambda a, s, f: Prod((a, s), f))


def r_factor_prod_sum_r(e):
    return _factor_sum(e, _split_prod_r, lambda a, s, f: Prod((s, a), f))


def r_factor_tensor_sum_l(e):
    return _factor_sum(e, _split_tensor_l, lambda a, s, f: Tensor((a, s)))


def r_factor_tensor_sum_r(e):
    return _factor_sum(e, _split_tensor_r, lambda a, s, f: Tensor((s, a)))


def _common(branches, split):
    parts = [split(b) for b in branches]
    if len(branches) < 2 or any(p is None for p in parts):
        return None
    if any(p[0] != parts[0][0] for p in parts) or is_identity(parts[0][0]):
        return None
    return parts[0][0], [p[1] for p in parts]


def r_factor_choice_prod_l(e):
    # (A*B) (+) (A*C)  ->  (I (x) A) * (B (+) C)
    if isinstance(e, Choice):
        hit = _common(e.branches, _split_prod_l)
        if hit:
            a, rests = hit
            sel = identity(len(e.branches).bit_length() - 1)
            flag = all(_flag(b) for b in e.branches)
            return Prod((Tensor((sel, a)), Choice(tuple(rests))), flag)


def r_factor_choice_prod_r(e):
    if isinstance(e, Choice):
        hit = _common(e.branches, _split_prod_r)
        if hit:
            a, rests = hit
            sel = identity(len(e.branches).bit_length() - 1)
            flag = all(_flag(b) for b in e.branches)
            return Prod((Choice(tuple(rests)), Tensor((sel, a))), flag)


def r_factor_tensor_choice_l(e):
    # (A (x) B) (+) (A (x) C)  ->  (I (x) A (x) I_B) * ((I_A (x) B) (+) (I_A (x) C));
    # the discriminator qubit sits in front of A, so A cannot simply be pulled out
    if isinstance(e, Choice):
        hit = _common(e.branches, _split_tensor_l)
        if hit:
            a, rests = hit
            na, nr = qubits(a), qubits(rests[0])
            sel = identity(len(e.branches).bit_length() - 1)
            left = Tensor((sel, a, identity(nr)))
            right = Choice(tuple(Tensor((identity(na), r)) for r in rests))
            return Prod((left, right), True)


def r_factor_tensor_choice_r(e):
    # (B (x) A) (+) (C (x) A)  ->  (B (+) C) (x) A
    if isinstance(e, Choice):
        hit = _common(e.branches, _split_tensor_r)
        if hit:
            a, rests = hit
            return Tensor((Choice(tuple(rests)), a))


def _fusable(base: Expr) -> bool:
    return is_hermitian_judgment(base)


def r_poly_prod(e):
    """Merge runs of same-base factors of a product into one polynomial."""
    if not isinstance(e, Prod):
        return None
    views = [_as_power(f) for f in e.factors]
    out, i, rule = [], 0, None
    while i < len(views):
        j = i + 1
        while j < len(views) and views[j][0] == views[i][0]:
            j += 1
        if j - i >= 2 and _fusable(views[i][0]):
            p = PolySpec((1.0,))
            for _, q in views[i:j]:
                p = p * q
            polys = sum(isinstance(f, Poly) for f in e.factors[i:j])
            rule = rule or (RuleId.PolyMulMerge if polys >= 2 else RuleId.PolyFusion)
            out.append(_make_poly(views[i][0], p))
        else:
            out.extend(e.factors[i:j])
        i = j
    if rule is None:
        return None
    return rule, _prod(out, e.commuting)


def r_poly_sum(e):
    """Collect same-base monomials of a sum (and identity constants) into polynomials."""
    if not isinstance(e, Sum):
        return None
    consts = []
    groups: dict = {}
    order = []
    for i, (c, t) in enumerate(e.terms):
        if is_identity(t):
            consts.append(i)
            continue
        base, p = _as_power(t)
        if base not in groups:
            groups[base] = []
            order.append(base)
        groups[base].append((i, c, p))
    fusable = [b for b in order if _fusable(b)]
    attach = bool(consts) and len(order) == 1 and bool(fusable)
    targets = [b for b in fusable if len(groups[b]) >= 2 or (attach and b is order[0])]
    if not targets:
        return None
    polys = 0
    new_terms = []
    done = set()
    for i, (c, t) in enumerate(e.terms):
        if i in done:
            continue
        if attach and i in consts:
            continue
        base = None if is_identity(t) else _as_power(t)[0]
        if base is not None and any(base == b for b in targets):
            members = groups[base]
            p = PolySpec(())
            for j, cj, q in members:
                p = p + PolySpec(cj * a for a in q.coeffs)
                done.add(j)
                polys += isinstance(e.terms[j][1], Poly)
            if attach:
                for j in consts:
                    p = p + PolySpec((e.terms[j][0],))
            fused = _make_poly(base, p)
            if fused is not None:
                new_terms.append((1.0, fused))
        else:
            new_terms.append((c, t))
    rule = RuleId.PolyAddMerge if polys >= 2 else RuleId.PolyFusion
    if not new_terms:
        raise AllTermsCancel(sorted({print_expr(t) for _, t in e.terms}))
    if len(new_terms) == 1 and new_terms[0][0] == 1.0:
        return rule, new_terms[0][1]
    return rule, Sum(tuple(new_terms))


def r_poly_unwrap(e):
    if isinstance(e, Poly) and e.coeffs == (0.0, 1.0):
        return e.base


def r_poly_compose(e):
    if isinstance(e, Poly) and isinstance(e.base, Poly) and e.base.method is None:
        inner = e.base
        return Poly(inner.base, e.spec.compose(inner.spec).coeffs)


def r_poly_choice(e):
    if isinstance(e, Choice) and all(isinstance(b, Poly) for b in e.branches):
        first = e.branches[0]
        if all(b.coeffs == first.coeffs and b.method == first.method for b in e.branches):
            return Poly(Choice(tuple(b.base for b in e.branches)), first.coeffs, first.method)


def r_sum_fusion(e):
    """Flatten nested sums, merge equal terms, drop zeros, sort canonically."""
    if not isinstance(e, Sum):
        return None
    flat: list[tuple[float, Expr]] = []

    def add(c, t):
        if isinstance(t, Sum):
            for ci, ti in t.terms:
                add(c * ci, ti)
        else:
            flat.append((c, t))

    for c, t in e.terms:
        add(c, t)
    merged: dict = {}
    for c, t in flat:
        merged[t] = merged.get(t, 0.0) + c
    kept = [(c, t) for t, c in merged.items() if abs(c) >= ZERO_TOL]
    if not kept:
        raise AllTermsCancel(sorted({print_expr(t) for _, t in flat}))
    kept.sort(key=lambda ct: print_expr(ct[1]))
    if len(kept) == 1 and kept[0][0] == 1.0:
        return kept[0][1]
    return Sum(tuple(kept))


# priority order: adjoints, identities, factoring, polynomial fusion, sum fusion
RULES: list[tuple[RuleId, Callable]] = [
    (RuleId.AdjInvolution, r_adj_involution),
    (RuleId.AdjHermitian, r_adj_hermitian),
    (RuleId.AdjProd, r_adj_prod),
    (RuleId.AdjSum, r_adj_sum),
    (RuleId.AdjTensor, r_adj_tensor),
    (RuleId.AdjChoice, r_adj_choice),
    (RuleId.ProdIdentity, r_prod_identity),
    (RuleId.ChoiceIdem, r_choice_idem),
    (RuleId.FactorProdSumL, r_factor_prod_sum_l),
    (RuleId.FactorProdSumR, r_factor_prod_sum_r),
    (RuleId.FactorChoiceProdL, r_factor_choice_prod_l),
    (RuleId.FactorChoiceProdR, r_factor_choice_prod_r),
    (RuleId.FactorTensorSumL, r_factor_tensor_sum_l),
    (RuleId.FactorTensorSumR, r_factor_tensor_sum_r),
    (RuleId.FactorTensorChoiceL, r_factor_tensor_choice_l),
    (RuleId.FactorTensorChoiceR, r_factor_tensor_choice_r),
    (RuleId.PolyFusion, r_poly_unwrap),
    (RuleId.PolyCompose, r_poly_compose),
    (RuleId.PolyChoiceMerge, r_poly_choice),
    (None, r_poly_prod),
    (None, r_poly_sum),
    (RuleId.SumFusion, r_sum_fusion),
]

SUM_RULES = {RuleId.SumFusion}
POLY_RULES = {
    RuleId.PolyFusion,
    RuleId.PolyMulMerge,
    RuleId.PolyAddMerge,
    RuleId.PolyChoiceMerge,
    RuleId.PolyCompose,
}


# ------------------------------------------------------------------- driver


class _Normalizer:
    def __init__(self, allowed: Optional[set], limit: int):
        self.allowed = allowed
        self.limit = limit
        self.trace = RewriteTrace()
        self.memo: dict = {}
        self.herm: dict = {}
        self.normal: dict = {}

    def cost(self, e: Expr) -> CostReport:
        return cost(e, memo=self.memo)

    def hermitian(self, e: Expr) -> bool:
        hit = self.herm.get(id(e))
        if hit is None or hit[0] is not e:
            hit = (e, is_hermitian_judgment(e))
            self.herm[id(e)] = hit
        return hit[1]

    def admit(self, old: Expr, new: Expr) -> Optional[tuple[Expr, CostReport, CostReport]]:
        """Apply the guard; may pin a polynomial method to satisfy it."""
        before = self.cost(old)
        if self.hermitian(old) and not self.hermitian(new):
            return None
        if qubits(new) != qubits(old):
            raise AssertionError("rewrite changed the qubit count")
        after = self.cost(new)
        if _dominates(after, before):
            return new, before, after
        if isinstance(new, Poly) and new.method is None:
            herm = self.hermitian(new.base)
            base = self.cost(new.base)
            best = None
            for m in (PolyMethod.QSVT, PolyMethod.HORNER, PolyMethod.LCU):
                if m is PolyMethod.QSVT and not herm:
                    continue
                c = poly_cost(new.spec, base, m, herm)
                if _dominates(c, before) and (best is None or c.total < best[1].total * (1 - REL)):
                    best = (m, c)
            if best is not None:
                return replace(new, method=best[0].value), before, best[1]
        return None

    def step(self, rule: RuleId, path, before, after) -> None:
        if len(self.trace.steps) >= self.limit:
            raise StepLimitExceeded(f"rewriting exceeded {self.limit} steps")
        self.trace.steps.append(RewriteStep(rule, path, before, after))

    def run(self, e: Expr, path: tuple = ()) -> Expr:
        while True:
            hit = self.normal.get(id(e))
            if hit is not None and hit[0] is e:
                return e
            e = self.children(e, path)
            nxt = self.rewrite_once(e, path)
            if nxt is None:
                self.normal[id(e)] = (e,)
                return e
            e = nxt

    def children(self, e: Expr, path: tuple) -> Expr:
        kids = e.children()
        if not kids:
            return e
        new = []
        for i, k in enumerate(kids):
            if isinstance(e, Choice):
                mark = len(self.trace.steps)
                nk = self.run(k, path + (i,))
                a_new, a_old = self.cost(nk).subnorm, self.cost(k).subnorm
                if a_new > a_old or not math.isclose(a_new, a_old, rel_tol=CHOICE_RTOL):
                    # a branch may not change its subnormalization on its own
                    # (not cached as normal: outside a Choice it may still fuse)
                    del self.trace.steps[mark:]
                    nk = k
            else:
                nk = self.run(k, path + (i,))
            new.append(nk)
        if all(a is b for a, b in zip(new, kids)):
            return e
        return rebuild(e, tuple(new))

    def rewrite_once(self, e: Expr, path: tuple) -> Optional[Expr]:
        for rid, rule in RULES:
            out = rule(e)
            if out is None:
                continue
            if isinstance(out, tuple):
                rid, out = out
            if self.allowed is not None and rid not in self.allowed:
                continue
            if out == e:
                continue
            ok = self.admit(e, out)
            if ok is None:
                continue
            new, before, after = ok
            self.step(rid, path, before, after)
            return new
        return None


def _dominates(a: CostReport, b: CostReport) -> bool:
    # exact comparison: a rewrite whose cost only rounds up by an ulp is refused,
    # so the root total can never grow through accumulated rounding
    return a.queries <= b.queries and a.subnorm <= b.subnorm


def _limit(e: Expr) -> int:
    return 10 * node_count(e) * len(RULES)


def apply_rules(e: Expr) -> tuple[Expr, RewriteTrace]:
    """Normalise ``e`` under every rule; returns the normal form and the trace."""
    n = _Normalizer(None, _limit(e))
    out = n.run(e)
    return out, n.trace


def optimize(e: Expr) -> Expr:
    return apply_rules(e)[0]


def sum_fuse(e: Expr) -> Expr:
    """Sum fusion alone, applied everywhere."""
    return _Normalizer(SUM_RULES, _limit(e)).run(e)


def poly_fuse(e: Expr) -> Expr:
    """Polynomial fusion and the Poly merge rules alone, applied everywhere."""
    return _Normalizer(POLY_RULES, _limit(e)).run(e)
