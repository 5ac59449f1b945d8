"""Small arithmetic grammar for densities given as functions of vertex coordinates.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = [ "+" | "-" ] power ;
    power   = atom [ "**" unary ] ;
    atom    = number | name | func "(" expr ")" | "(" expr ")" ;
    name    = "x" | "y" | "z" | "r" | "pi" ;
    func    = "exp" | "log" | "sqrt" | "sin" | "cos" | "tanh" | "abs" ;

``r`` is the Euclidean norm of the vertex position.  Expressions are parsed
with the Python tokenizer and every node is checked against this whitelist
before evaluation; nothing else (attributes, calls to other names,
comparisons) is accepted.
"""
from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
         "tanh": np.tanh, "abs": np.abs}
NAMES = ("x", "y", "z", "r", "pi")
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


def parse_expression(text: str) -> ast.AST:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse density expression {text!r}: {exc.msg}", "density") from None
    _check(tree.body, text)
    return tree.body


def _check(node, text):
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, text)
        _check(node.right, text)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        _check(node.operand, text)
    elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        pass
    elif isinstance(node, ast.Name) and node.id in NAMES:
        pass
    elif (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in FUNCS
          and len(node.args) == 1 and not node.keywords):
        _check(node.args[0], text)
    else:
        raise ConfigError(f"unsupported construct {ast.dump(node)[:40]!r} in density expression {text!r}",
                          "density")


def _eval(node, env):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    return FUNCS[node.func.id](_eval(node.args[0], env))


def evaluate_expression(text: str, points) -> np.ndarray:
    """Evaluate the expression at each row of ``points`` (n x 3)."""
    tree = parse_expression(text)
    P = np.asarray(points, dtype=float)
    env = {"x": P[:, 0], "y": P[:, 1], "z": P[:, 2], "r": np.linalg.norm(P, axis=1), "pi": np.pi}
    with np.errstate(all="ignore"):
        out = np.broadcast_to(np.asarray(_eval(tree, env), dtype=float), (len(P),)).copy()
    return out
