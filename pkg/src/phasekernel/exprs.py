"""Tiny arithmetic expression evaluator for chart config files.

Grammar: + - * / ^, unary minus, parentheses, functions sin cos exp,
numeric literals, and variables q1..qn.  Expressions are compiled once
into closures operating on numpy arrays, so fields defined in JSON can
be evaluated on grids.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def compile_expression(text: str, n_vars: int):
    """Compile an expression string into f(q) with q an array of length n_vars.

    The returned callable also accepts stacked points with shape (..., n_vars).
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc

    names = [f"q{i + 1}" for i in range(n_vars)]

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ConfigError(f"non-numeric literal in {text!r}")
            value = float(node.value)
            return lambda q: value
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown variable {node.id!r} in {text!r}")
            idx = names.index(node.id)
            return lambda q: q[..., idx]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.UAdd):
                return inner
            return lambda q: -inner(q)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = build(node.left), build(node.right)
            return lambda q: op(left(q), right(q))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise ConfigError(f"unsupported function call in {text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take one argument in {text!r}")
            fn = _FUNCTIONS[node.func.id]
            arg = build(node.args[0])
            return lambda q: fn(arg(q))
        raise ConfigError(f"unsupported syntax {type(node).__name__} in {text!r}")

    fn = build(tree)

    def evaluate(q):
        q = np.asarray(q, dtype=float)
        out = fn(q)
        return np.broadcast_to(np.asarray(out, dtype=float), q.shape[:-1]).copy() \
            if np.ndim(out) != np.ndim(q) - 1 or np.shape(out) != q.shape[:-1] else out

    return evaluate


def compile_vector(texts, n_vars: int):
    """Compile a list of expression strings into f(q) -> array (..., len(texts))."""
    fns = [compile_expression(t, n_vars) for t in texts]

    def evaluate(q):
        q = np.asarray(q, dtype=float)
        return np.stack([f(q) for f in fns], axis=-1)

    return evaluate


def compile_matrix(rows, n_vars: int):
    """Compile a nested list of expression strings into f(q) -> (..., m, m)."""
    fns = [[compile_expression(t, n_vars) for t in row] for row in rows]

    def evaluate(q):
        q = np.asarray(q, dtype=float)
        return np.stack(
            [np.stack([f(q) for f in row], axis=-1) for row in fns], axis=-2
        )

    return evaluate
