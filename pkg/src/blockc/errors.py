"""Exception hierarchy shared by every stage of the compiler."""
from __future__ import annotations


class BlockcError(Exception):
    """Base class for all compiler diagnostics."""

    kind = "Error"
    exit_code = 1

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ParseError(BlockcError):
    kind = "SyntaxError"
    exit_code = 2

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col

    def to_dict(self) -> dict:
        return {**super().to_dict(), "line": self.line, "column": self.col}


class DuplicateDeclaration(ParseError):
    kind = "DuplicateDeclaration"


class UnknownIdentifier(ParseError):
    kind = "UnknownIdentifier"


class TypeCheckError(BlockcError):
    """A typing rule failed; ``path`` locates the offending subexpression."""

    kind = "TypeError"

    def __init__(self, message: str, path: tuple = ()):
        where = "/".join(str(p) for p in path) or "<root>"
        super().__init__(f"{message} at {where}")
        self.path = tuple(path)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "path": list(self.path)}


class TypeMismatch(TypeCheckError):
    kind = "TypeMismatch"


class ChoiceSubnormMismatch(TypeCheckError):
    kind = "ChoiceSubnormMismatch"

    def __init__(self, alphas, path: tuple = ()):
        self.alphas = list(alphas)
        super().__init__(
            "direct sum branches need equal subnormalization, got "
            + ", ".join(repr(a) for a in self.alphas),
            path,
        )


class NonHermitianPolyBase(TypeCheckError):
    kind = "NonHermitianPolyBase"


class AllTermsCancel(TypeCheckError):
    kind = "AllTermsCancel"

    def __init__(self, terms, path: tuple = ()):
        self.terms = list(terms)
        super().__init__(
            "every term of the fused sum cancels: " + ", ".join(self.terms), path
        )


class DimensionMismatch(BlockcError):
    kind = "DimensionMismatch"


class OversizeDenotation(BlockcError):
    kind = "OversizeDenotation"


class OversizeCircuit(BlockcError):
    kind = "OversizeCircuit"


class QsvtInadmissible(BlockcError):
    kind = "QsvtInadmissible"


class NotFixedParity(BlockcError):
    kind = "NotFixedParity"


class SupNormExceedsOne(BlockcError):
    kind = "SupNormExceedsOne"

    def __init__(self, supnorm: float):
        super().__init__(f"polynomial sup-norm {supnorm!r} exceeds 1 on [-1, 1]")
        self.supnorm = supnorm


class NoConvergence(BlockcError):
    kind = "NoConvergence"

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"phase solver stalled after {iterations} iterations, residual {residual:.3e}"
        )
        self.residual = residual


class StepLimitExceeded(BlockcError):
    kind = "StepLimitExceeded"


class InternalArity(BlockcError):
    kind = "InternalArity"


class UnboundOracle(BlockcError):
    kind = "UnboundOracle"


class VerificationFailed(BlockcError):
    kind = "VerificationFailed"
    exit_code = 3

    def __init__(self, max_dev: float, tol: float):
        super().__init__(f"top-left block deviates by {max_dev:.3e} (tolerance {tol:.1e})")
        self.max_dev = max_dev
        self.tol = tol


class UnsupportedMethod(BlockcError):
    kind = "UnsupportedMethod"
