"""Small arithmetic grammar for coefficient fields in configuration files.

Allowed: numbers, the coordinates ``x`` (and ``y`` in 2D), ``pi``, the
operators + - * / ^ (``**`` is accepted too), unary minus and the functions
sin, cos, exp. Anything else is rejected before evaluation.
"""

import ast

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["parse_expression", "parse_constant", "CompiledExpression"]

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _reject(msg, text):
    raise InvalidArgumentError(f"{msg} in expression {text!r}", code="bad_expression")


def _check(node, names, text):
    if isinstance(node, ast.Expression):
        _check(node.body, names, text)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            _reject(f"unsupported literal {node.value!r}", text)
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id != "pi":
            _reject(f"unknown name {node.id!r}", text)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            _reject("unsupported operator", text)
        _check(node.left, names, text)
        _check(node.right, names, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            _reject("unsupported unary operator", text)
        _check(node.operand, names, text)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            _reject("unsupported function", text)
        if len(node.args) != 1 or node.keywords:
            _reject(f"{node.func.id} takes exactly one argument", text)
        _check(node.args[0], names, text)
    else:
        _reject(f"unsupported syntax {type(node).__name__}", text)


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    return _FUNCS[node.func.id](_eval(node.args[0], env))


class CompiledExpression:
    """Validated expression; call with a (P, dim) point array."""

    def __init__(self, text, dim, names=None):
        self.text = text
        self.dim = dim
        self._names = tuple(names) if names else (("x",) if dim == 1 else ("x", "y"))
        if len(self._names) != dim:
            raise InvalidArgumentError("one variable name per dimension is required")
        self._tree = _parse(text, self._names)
        self.names = self._names

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        env = {"pi": np.pi}
        for i, name in enumerate(self._names):
            env[name] = pts[:, i]
        with np.errstate(all="ignore"):
            val = np.broadcast_to(np.asarray(_eval(self._tree, env), dtype=float), (len(pts),))
        if not np.all(np.isfinite(val)):
            raise InvalidArgumentError(
                f"expression {self.text!r} is not finite on the grid", code="bad_expression"
            )
        return val.copy()

    def __repr__(self):
        return f"CompiledExpression({self.text!r}, dim={self.dim})"


def _parse(text, names):
    if not isinstance(text, str) or not text.strip():
        raise InvalidArgumentError("expression must be a non-empty string", code="bad_expression")
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise InvalidArgumentError(
            f"cannot parse expression {text!r}: {exc.msg}", code="bad_expression"
        ) from exc
    _check(tree, names, text)
    return tree


def parse_expression(text, dim=1, names=None):
    """Validate ``text`` and return a vectorized callable of the points.

    ``names`` overrides the coordinate names (default ``x`` or ``x, y``).
    """
    if dim not in (1, 2):
        raise InvalidArgumentError(f"dimension must be 1 or 2, got {dim}")
    return CompiledExpression(str(text), dim, names)


def parse_constant(value):
    """A number, or an expression in ``pi`` only, as a float."""
    if isinstance(value, bool):
        raise InvalidArgumentError(f"expected a number, got {value!r}", code="bad_expression")
    if isinstance(value, (int, float)):
        return float(value)
    tree = _parse(str(value), ())
    with np.errstate(all="ignore"):
        out = float(_eval(tree, {"pi": np.pi}))
    if not np.isfinite(out):
        raise InvalidArgumentError(f"constant {value!r} is not finite", code="bad_expression")
    return out
