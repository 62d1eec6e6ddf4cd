"""Parse polynomial text such as ``"x1^2 - 3/2*x1*x2 + nu"`` into a series."""

from __future__ import annotations

import ast
import re

from .scalars import I, GaussianRational
from .series import GradedSeries, SeriesError, VariableProfile, monomial

__all__ = ["PolyParseError", "parse_poly"]

_VAR = re.compile(r"^x([1-9][0-9]*)$")


class PolyParseError(ValueError):
    pass


def parse_poly(text: str, profile: VariableProfile) -> GradedSeries:
    """Integer/rational coefficients, ``x1..xn``, ``nu``, ``i``, ``+ - * / ^`` and parentheses."""
    if not text or not text.strip():
        raise PolyParseError("empty polynomial")
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise PolyParseError(f"syntax error in {text!r} at column {min(exc.offset or len(text), len(text))}") from None
    return _eval(tree.body, profile, text)


def _fail(node, text, msg):
    col = getattr(node, "col_offset", 0) + 1
    raise PolyParseError(f"{msg} at column {col} of {text!r}")


def _eval(node, prof: VariableProfile, text: str):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, int):
            _fail(node, text, "only integer literals are allowed")
        return GradedSeries.constant(prof, node.value)
    if isinstance(node, ast.Name):
        if node.id == "nu":
            return monomial(prof, nu=1)
        if node.id == "i":
            return GradedSeries.constant(prof, I)
        m = _VAR.match(node.id)
        if not m or int(m.group(1)) > prof.n:
            _fail(node, text, f"unknown variable {node.id!r}")
        return monomial(prof, x={int(m.group(1)) - 1: 1})
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand, prof, text)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            base = _eval(node.left, prof, text)
            e = node.right
            if isinstance(e, ast.UnaryOp) or not isinstance(e, ast.Constant) or not isinstance(e.value, int):
                _fail(e, text, "exponents must be non-negative integer literals")
            return base ** e.value
        a = _eval(node.left, prof, text)
        b = _eval(node.right, prof, text)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            c = _scalar_of(b)
            if c is None:
                _fail(node.right, text, "division only by nonzero constants")
            return a.scale(GaussianRational(1) / c)
    _fail(node, text, "unsupported expression")


def _scalar_of(s: GradedSeries):
    n = s.n
    zero_key = (0, (0,) * n, (0,) * n, ())
    if set(s.terms) == {zero_key}:
        return s.terms[zero_key]
    return None
