"""OpenQASM 2.0 emission.

Gates with two or more controls are reduced to a single control through a
Toffoli V-chain on a scratch register ``mcx_anc``, which starts and ends in
|0>. Negative controls are conjugated with X. Uninstantiated oracles are
emitted as ``opaque`` gates when requested.
"""
from __future__ import annotations

from .circuit import Circuit, Gate, check_emittable

_ONE_CTRL = {"X": "cx", "Y": "cy", "Z": "cz", "H": "ch"}


def _num(x: float) -> str:
    s = repr(float(x))
    if "." not in s:
        # the OpenQASM 2 real literal needs a decimal point
        s = s.replace("e", ".0e") if "e" in s else s + ".0"
    return s


def _scratch_needed(c: Circuit) -> int:
    need = 0
    for g in c.gates:
        k = len(g.controls)
        if k >= 2 and not (k == 2 and g.kind == "X"):
            need = max(need, k - 1)
    return need


def _oracle_name(g: Gate, controlled: bool) -> str:
    name = f"orc_{g.name}" + ("_dg" if g.dagger else "")
    return "c_" + name if controlled else name


class _Emitter:
    def __init__(self, c: Circuit):
        self.c = c
        self.names = []
        for r in c.registers:
            self.names += [f"{r.name}[{i}]" for i in range(r.size)]
        self.lines: list[str] = []

    def q(self, i: int) -> str:
        return self.names[i]

    def single(self, g: Gate, ctrl: str | None) -> None:
        """``g`` with at most one (positive) control given by name."""
        tgt = ", ".join(self.q(t) for t in g.targets)
        if g.kind == "Oracle":
            name = _oracle_name(g, ctrl is not None)
            args = f"{ctrl}, {tgt}" if ctrl else tgt
            self.lines.append(f"{name} {args};")
            return
        if ctrl is None:
            if g.kind in ("Ry", "Rz"):
                self.lines.append(f"{g.kind.lower()}({_num(g.angle)}) {tgt};")
            else:
                self.lines.append(f"{g.kind.lower()} {tgt};")
            return
        if g.kind == "Ry":
            self.lines.append(f"cu3({_num(g.angle)}, 0, 0) {ctrl}, {tgt};")
        elif g.kind == "Rz":
            self.lines.append(f"crz({_num(g.angle)}) {ctrl}, {tgt};")
        else:
            self.lines.append(f"{_ONE_CTRL[g.kind]} {ctrl}, {tgt};")

    def gate(self, g: Gate) -> None:
        flips = [self.q(q) for q, p in g.controls if not p]
        for f in flips:
            self.lines.append(f"x {f};")
        ctrls = [self.q(q) for q, _ in g.controls]
        if not ctrls:
            self.single(g, None)
        elif len(ctrls) == 1:
            self.single(g, ctrls[0])
        elif len(ctrls) == 2 and g.kind == "X":
            self.lines.append(f"ccx {ctrls[0]}, {ctrls[1]}, {self.q(g.targets[0])};")
        else:
            chain = [f"ccx {ctrls[0]}, {ctrls[1]}, mcx_anc[0];"]
            for i, ctl in enumerate(ctrls[2:]):
                chain.append(f"ccx mcx_anc[{i}], {ctl}, mcx_anc[{i + 1}];")
            self.lines += chain
            self.single(g, f"mcx_anc[{len(ctrls) - 2}]")
            self.lines += reversed(chain)
        for f in flips:
            self.lines.append(f"x {f};")


def emit_qasm(c: Circuit, opaque: bool = False) -> str:
    """Render ``c`` as OpenQASM 2.0 text; post-selection goes in comments."""
    check_emittable(c, opaque)
    head = ['OPENQASM 2.0;', 'include "qelib1.inc";']
    decls: dict[str, int] = {}
    for g in c.gates:
        if g.kind == "Oracle":
            name = _oracle_name(g, bool(g.controls))
            decls.setdefault(name, len(g.targets) + (1 if g.controls else 0))
    for name, arity in decls.items():
        head.append(f"opaque {name} " + ", ".join(f"q{i}" for i in range(arity)) + ";")
    for r in c.registers:
        head.append(f"qreg {r.name}[{r.size}];")
    scratch = _scratch_needed(c)
    if scratch:
        head.append(f"qreg mcx_anc[{scratch}];")
    em = _Emitter(c)
    for g in c.gates:
        em.gate(g)
    tail = [f"// postselect {r.name} = 0" for r in c.postselect]
    tail.append(f"// predicted queries={_num(c.predicted.queries)} subnorm={_num(c.predicted.subnorm)} ancillas={c.predicted.ancillas}")
    return "\n".join(head + em.lines + tail) + "\n"
