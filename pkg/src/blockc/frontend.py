"""Surface syntax: ``.cob`` programs to IR and back.

Grammar (statements end with ``;``, ``#`` starts a line comment)::

    oracle NAME : qubits=INT, ancillas=INT, subnorm=NUM, hermitian=BOOL;
    commute NAME NAME;
    NAME = expr;
    expr                      # optional final main expression

    expr  := term (('+' | '-') term)*
    term  := ['-'] chain
    chain := power (('*' | '/') power)*
    power := atom ['**' INT]
    atom  := NUM | NAME | '(' expr ')' | kron(expr, ...) | dsum(expr, ...)
           | adj(expr) | Poly(expr, [expr, ...] [, METHOD])

Within a chain, numbers multiply into the term coefficient and matrices form
a product. A lone matrix with neither a number nor a sign stays bare; any
explicit coefficient or sign makes it a weighted sum term.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import DuplicateDeclaration, ParseError, UnknownIdentifier
from .ir import (
    BUILTINS,
    Adjoint,
    Base,
    Choice,
    CommuteDecl,
    Expr,
    OracleDecl,
    Poly,
    Prod,
    Program,
    Ref,
    Sum,
    Tensor,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/()\[\],;:=])
    """,
    re.VERBOSE,
)

_METHODS = ("lcu", "horner", "qsvt", "gqet")
_KEYWORDS = {"oracle", "commute", "kron", "dsum", "adj", "Poly"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            out.append(Token(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


# A parsed operand: either a plain number or a (coefficient, explicit?, matrix) term.
@dataclass
class _Term:
    coef: float
    explicit: bool
    mat: Optional[Expr]


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.oracles: dict[str, OracleDecl] = {}
        self.bindings: dict[str, Expr] = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None, cls=ParseError):
        t = tok or self.tok
        return cls(msg, t.line, t.col)

    def accept(self, text: str) -> Optional[Token]:
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return t

    def expect_kind(self, kind: str) -> Token:
        if self.tok.kind != kind:
            raise self.error(f"expected {kind}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    # -- statements
    def program(self) -> Program:
        commutes: list[CommuteDecl] = []
        main: Optional[Expr] = None
        order: list[str] = []
        while self.tok.kind != "eof":
            if main is not None:
                raise self.error("the main expression must be the last statement")
            t = self.tok
            if t.text == "oracle" and self.toks[self.i + 1].kind == "name":
                self.oracle()
            elif t.text == "commute" and self.toks[self.i + 1].kind == "name":
                self.i += 1
                a = self.declared_name()
                b = self.declared_name()
                commutes.append(CommuteDecl(a, b))
                self.expect(";")
            elif t.kind == "name" and self.toks[self.i + 1].text == "=":
                self.i += 2
                if t.text in self.oracles or t.text in self.bindings:
                    raise self.error(f"{t.text} is already declared", t, DuplicateDeclaration)
                if t.text in _KEYWORDS:
                    raise self.error(f"{t.text} is a reserved word", t)
                self.bindings[t.text] = self.matrix_expr()
                order.append(t.text)
                self.expect(";")
            else:
                main = self.matrix_expr()
                self.accept(";")
        if main is None:
            if not order:
                raise self.error("program has no expression")
            main = Ref(order[-1])
        return Program(
            tuple(self.oracles.values()),
            tuple(commutes),
            tuple((n, self.bindings[n]) for n in order),
            main,
        )

    def declared_name(self) -> str:
        t = self.expect_kind("name")
        if t.text not in self.oracles and t.text not in self.bindings and t.text not in BUILTINS:
            raise self.error(f"unknown identifier {t.text}", t, UnknownIdentifier)
        return t.text

    def oracle(self) -> None:
        self.expect("oracle")
        name_tok = self.expect_kind("name")
        name = name_tok.text
        if name in self.oracles or name in self.bindings:
            raise self.error(f"{name} is already declared", name_tok, DuplicateDeclaration)
        if name in _KEYWORDS:
            raise self.error(f"{name} is a reserved word", name_tok)
        self.expect(":")
        fields: dict[str, str] = {}
        while True:
            key = self.expect_kind("name")
            self.expect("=")
            val = self.tok
            if val.kind not in ("num", "name"):
                raise self.error("expected a value")
            self.i += 1
            if key.text in fields:
                raise self.error(f"field {key.text} given twice", key)
            fields[key.text] = val.text
            if not self.accept(","):
                break
        self.expect(";")
        unknown = set(fields) - {"qubits", "ancillas", "subnorm", "hermitian"}
        if unknown:
            raise self.error(f"unknown oracle field {sorted(unknown)[0]}", name_tok)
        if "qubits" not in fields:
            raise self.error("oracle needs qubits=", name_tok)
        try:
            n = int(fields["qubits"])
            m = int(fields.get("ancillas", "0"))
            alpha = float(fields.get("subnorm", "1.0"))
        except ValueError as exc:
            raise self.error(f"bad oracle field: {exc}", name_tok) from None
        herm = fields.get("hermitian", "false")
        if herm not in ("true", "false"):
            raise self.error("hermitian must be true or false", name_tok)
        if n < 1 or m < 0 or not alpha > 0:
            raise self.error("oracle needs qubits >= 1, ancillas >= 0, subnorm > 0", name_tok)
        self.oracles[name] = OracleDecl(name, n, m, alpha, herm == "true")

    # -- expressions
    def matrix_expr(self) -> Expr:
        t = self.tok
        v = self.expr()
        if not isinstance(v, Expr):
            raise self.error("expected a matrix expression, found a number", t)
        return v

    def expr(self) -> Union[float, Expr]:
        start = self.tok
        terms = [self.term()]
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            sign = -1.0 if self.expect(self.tok.text).text == "-" else 1.0
            t = self.term()
            terms.append(_Term(sign * t.coef, True, t.mat))
        kinds = {t.mat is None for t in terms}
        if kinds == {True}:
            return sum(t.coef for t in terms)
        if len(kinds) > 1:
            raise self.error("cannot add a number to a matrix", start)
        if len(terms) == 1 and not terms[0].explicit:
            return terms[0].mat
        return Sum(tuple((t.coef, t.mat) for t in terms))

    def term(self) -> _Term:
        if self.accept("-"):
            t = self.chain()
            return _Term(-t.coef, True, t.mat)
        return self.chain()

    def chain(self) -> _Term:
        coef, explicit, mats = 1.0, False, []

        def take(v, divide=False, tok=None):
            nonlocal coef, explicit
            if isinstance(v, Expr):
                if divide:
                    raise self.error("cannot divide by a matrix", tok)
                mats.append(v)
            else:
                explicit = True
                if divide:
                    if v == 0:
                        raise self.error("division by zero", tok)
                    coef /= v
                else:
                    coef *= v

        take(self.power())
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.expect(self.tok.text)
            take(self.power(), op.text == "/", op)
        if not mats:
            return _Term(coef, True, None)
        mat = mats[0] if len(mats) == 1 else Prod(tuple(mats))
        return _Term(coef, explicit, mat)

    def power(self):
        v = self.atom()
        if self.tok.text == "**":
            op = self.expect("**")
            k = int(self.expect_kind("num").text) if self.tok.kind == "num" and self.tok.text.isdigit() else None
            if k is None or k < 1:
                raise self.error("exponent must be a positive integer", op)
            if isinstance(v, Expr):
                return v if k == 1 else Prod((v,) * k)
            return v**k
        return v

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return float(t.text)
        if t.text == "(":
            self.i += 1
            v = self.expr()
            self.expect(")")
            return v
        if t.kind != "name":
            raise self.error(f"unexpected {t.text or 'end of input'!r}")
        self.i += 1
        if t.text in ("kron", "dsum", "adj", "Poly") and self.tok.text == "(":
            return self.call(t)
        if t.text in self.bindings:
            return Ref(t.text)
        if t.text in self.oracles:
            return Base(self.oracles[t.text])
        if t.text in BUILTINS:
            return Base(BUILTINS[t.text])
        raise self.error(f"unknown identifier {t.text}", t, UnknownIdentifier)

    def call(self, head: Token) -> Expr:
        self.expect("(")
        if head.text == "Poly":
            base = self.matrix_expr()
            self.expect(",")
            self.expect("[")
            coeffs = []
            while self.tok.text != "]":
                ct = self.tok
                c = self.expr()
                if isinstance(c, Expr):
                    raise self.error("polynomial coefficients must be numbers", ct)
                coeffs.append(float(c))
                if not self.accept(","):
                    break
            self.expect("]")
            method = None
            if self.accept(","):
                mt = self.expect_kind("name")
                if mt.text not in _METHODS:
                    raise self.error(f"unknown polynomial method {mt.text}", mt)
                method = mt.text
            self.expect(")")
            return Poly(base, tuple(coeffs), method)
        args = [self.matrix_expr()]
        while self.accept(","):
            args.append(self.matrix_expr())
        self.expect(")")
        if head.text == "adj":
            if len(args) != 1:
                raise self.error("adj takes one argument", head)
            return Adjoint(args[0])
        return (Tensor if head.text == "kron" else Choice)(tuple(args))


def parse(text: str) -> Program:
    """Parse a whole program."""
    return _Parser(text).program()


def parse_expr(text: str, oracles: tuple[OracleDecl, ...] = ()) -> Expr:
    """Parse a single expression over the given oracles (plus builtins)."""
    p = _Parser(text)
    p.oracles = {o.name: o for o in oracles}
    e = p.matrix_expr()
    p.accept(";")
    if p.tok.kind != "eof":
        raise p.error("trailing input after expression")
    return e


# ---------------------------------------------------------------- printing


def _num(c: float) -> str:
    return repr(float(c))


def _factor(e: Expr) -> str:
    s = print_expr(e)
    return f"({s})" if isinstance(e, (Sum, Prod)) else s


def print_expr(e: Expr) -> str:
    """Canonical text; ``parse_expr(print_expr(e))`` rebuilds ``e``."""
    if isinstance(e, (Base, Ref)):
        return e.name
    if isinstance(e, Adjoint):
        return f"adj({print_expr(e.child)})"
    if isinstance(e, Tensor):
        return "kron(" + ", ".join(print_expr(f) for f in e.factors) + ")"
    if isinstance(e, Choice):
        return "dsum(" + ", ".join(print_expr(b) for b in e.branches) + ")"
    if isinstance(e, Poly):
        coeffs = ", ".join(_num(c) for c in e.coeffs)
        tail = f", {e.method}" if e.method else ""
        return f"Poly({_factor(e.base)}, [{coeffs}]{tail})"
    if isinstance(e, Prod):
        return " * ".join(_factor(f) for f in e.factors)
    if isinstance(e, Sum):
        parts = []
        for i, (c, t) in enumerate(e.terms):
            body = _factor(t) if isinstance(t, Sum) else print_expr(t)
            c = float(c)
            if i == 0:
                if c == 1.0 and len(e.terms) > 1:
                    parts.append(body)
                elif c == -1.0:
                    parts.append(f"-{body}")
                else:
                    parts.append(f"{_num(c)} * {body}")
            else:
                neg = c < 0
                mag = -c if neg else c
                parts.append(" - " if neg else " + ")
                parts.append(body if mag == 1.0 else f"{_num(mag)} * {body}")
        return "".join(parts)
    raise TypeError(f"cannot print {e!r}")


def _bool(b: bool) -> str:
    return "true" if b else "false"


def print_program(p: Program) -> str:
    lines = [
        f"oracle {o.name} : qubits={o.n}, ancillas={o.m}, subnorm={_num(o.alpha)}, "
        f"hermitian={_bool(o.hermitian)};"
        for o in p.oracles
    ]
    lines += [f"commute {c.left} {c.right};" for c in p.commutes]
    lines += [f"{name} = {print_expr(e)};" for name, e in p.bindings]
    lines.append(print_expr(p.main))
    return "\n".join(lines) + "\n"
