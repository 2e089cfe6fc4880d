"""Safe parsing of small closed-form expressions used in config files.

Expressions are restricted to numbers, a fixed set of variable names,
the binary operators ``+ - * / **`` (``^`` is accepted as a power
alias), unary minus, and the functions ``sin``, ``cos``, ``exp``.
Parsing is done with :mod:`ast` so that anything outside the whitelist
is rejected with a column offset before sympy ever sees the text.
"""

from __future__ import annotations

import ast
from typing import Sequence

import numpy as np
import sympy

FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
CONSTANTS = {"pi": sympy.pi}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    """Raised for malformed or disallowed expression text."""

    def __init__(self, message: str, text: str, col: int | None = None):
        self.text = text
        self.col = col
        where = f" at column {col + 1}" if col is not None else ""
        super().__init__(f"{message}{where} in expression {text!r}")


def _check(node: ast.AST, text: str, variables: Sequence[str]) -> None:
    col = getattr(node, "col_offset", None)
    if isinstance(node, ast.Expression):
        _check(node.body, text, variables)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed", text, col)
        _check(node.left, text, variables)
        _check(node.right, text, variables)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ExpressionError("unary operator not allowed", text, col)
        _check(node.operand, text, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("unknown function", text, col)
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError("functions take exactly one argument", text, col)
        _check(node.args[0], text, variables)
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown symbol {node.id!r}", text, col)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError("only numeric literals are allowed", text, col)
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} not allowed", text, col)


class Expression:
    """A validated scalar expression, vectorized over numpy arrays.

    >>> e = Expression("x**2 + sin(y)", ("x", "y"))
    >>> float(e(2.0, 0.0))
    4.0
    """

    def __init__(self, text: str, variables: Sequence[str]):
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError("empty expression", str(text))
        self.text = text
        self.variables = tuple(variables)
        src = text.strip().replace("^", "**")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            col = min(exc.offset - 1, len(src)) if exc.offset else len(src)
            raise ExpressionError("syntax error", text, col) from None
        _check(tree, text, self.variables)
        symbols = {name: sympy.Symbol(name, real=True) for name in self.variables}
        self._symbols = [symbols[name] for name in self.variables]
        self.sym = sympy.sympify(src, locals={**symbols, **FUNCTIONS, **CONSTANTS})
        self._fn = sympy.lambdify(self._symbols, self.sym, modules="numpy")

    @classmethod
    def _from_sym(cls, sym: sympy.Expr, variables: Sequence[str]) -> "Expression":
        obj = cls.__new__(cls)
        obj.text = str(sym)
        obj.variables = tuple(variables)
        obj._symbols = [sympy.Symbol(name, real=True) for name in obj.variables]
        obj.sym = sym
        obj._fn = sympy.lambdify(obj._symbols, sym, modules="numpy")
        return obj

    def __call__(self, *args) -> np.ndarray:
        arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
        out = self._fn(*arrays)
        return np.broadcast_to(np.asarray(out, dtype=float), arrays[0].shape).copy()

    def diff(self, variable: str) -> "Expression":
        """Exact symbolic derivative with respect to ``variable``."""
        sym = sympy.diff(self.sym, self._symbols[self.variables.index(variable)])
        return Expression._from_sym(sym, self.variables)

    def is_constant(self) -> bool:
        return not (self.sym.free_symbols & set(self._symbols))

    def __repr__(self) -> str:
        return f"Expression({self.text!r}, {self.variables!r})"
