"""Small arithmetic-expression compiler used by config-driven profiles.

Expressions like ``"2 - rho**2"`` or ``"1 + 0.2*cos(t)"`` are parsed with
:mod:`ast`, checked against a whitelist, and turned into callables that
work on floats, numpy arrays and :class:`~eulerslip.dual.Dual` values alike.
"""

from __future__ import annotations

import ast
import math
import operator

from . import dual

FUNCTIONS = {
    "sin": dual.sin,
    "cos": dual.cos,
    "tan": dual.tan,
    "exp": dual.exp,
    "log": dual.log,
    "sqrt": dual.sqrt,
    "sinh": dual.sinh,
    "cosh": dual.cosh,
    "tanh": dual.tanh,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


class ExpressionError(ValueError):
    pass


def compile_expression(source: str, variables: tuple[str, ...]):
    """Compile ``source`` into ``f(*values)`` over the named ``variables``."""
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {source!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            value = float(node.value)
            return lambda env: value
        if isinstance(node, ast.Name):
            name = node.id
            if name in variables:
                return lambda env: env[name]
            if name in CONSTANTS:
                value = CONSTANTS[name]
                return lambda env: value
            raise ExpressionError(f"unknown name {name!r} in {source!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = build(node.left), build(node.right)
            if isinstance(node.op, ast.Pow) and isinstance(node.right, ast.Constant):
                exponent = node.right.value
                return lambda env: op(left(env), exponent)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -inner(env)
            return inner
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in FUNCTIONS
            and len(node.args) == 1
            and not node.keywords
        ):
            fn = FUNCTIONS[node.func.id]
            arg = build(node.args[0])
            return lambda env: fn(arg(env))
        raise ExpressionError(f"unsupported construct in {source!r}: {ast.dump(node)[:60]}")

    body = build(tree)

    def evaluate(*values):
        return body(dict(zip(variables, values)))

    evaluate.source = source
    return evaluate
