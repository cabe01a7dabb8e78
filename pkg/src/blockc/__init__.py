"""Compiler for block-encoding expressions: typing, cost analysis,
cost-guided rewriting, circuit synthesis and dense verification."""

__version__ = "0.1.0"
