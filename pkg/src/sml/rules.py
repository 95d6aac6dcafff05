"""Tiny arithmetic rules in the stage index, e.g. ``"n+1"``, ``"2^(n+1)"``, ``"h"``."""
from __future__ import annotations

import ast
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Pow: lambda a, b: a**b,
    ast.FloorDiv: lambda a, b: a // b,
    ast.Div: lambda a, b: Fraction(a) / Fraction(b),
    ast.Mod: lambda a, b: a % b,
}
_VARS = ("n", "h")


@dataclass(frozen=True)
class Rule:
    """An integer-valued expression in n (stage index) and h (height h_n)."""

    expr: str

    def __post_init__(self) -> None:
        tree = ast.parse(self.expr.replace("^", "**"), mode="eval")
        _validate(tree.body)
        object.__setattr__(self, "_tree", tree)

    def __call__(self, n: int, h: int = 0):
        return _eval(self._tree.body, {"n": n, "h": h})

    def uses(self, name: str) -> bool:
        return any(isinstance(x, ast.Name) and x.id == name for x in ast.walk(self._tree))

    def is_polynomial_in_n(self) -> bool:
        """True when only n, constants, +, -, * and constant powers appear."""
        if self.uses("h"):
            return False
        for node in ast.walk(self._tree.body):
            if isinstance(node, ast.BinOp):
                if isinstance(node.op, ast.Pow):
                    if any(isinstance(x, ast.Name) for x in ast.walk(node.right)):
                        return False
                elif not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult)):
                    return False
        return True

    def is_constant(self) -> bool:
        return not self.uses("n") and not self.uses("h")

    def __str__(self) -> str:
        return self.expr


RuleLike = Union[Rule, str, int]


def as_rule(x: RuleLike) -> Rule:
    if isinstance(x, Rule):
        return x
    return Rule(str(x))


def _validate(node) -> None:
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _validate(node.left)
        _validate(node.right)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _validate(node.operand)
    elif isinstance(node, ast.Constant) and isinstance(node.value, int):
        pass
    elif isinstance(node, ast.Name) and node.id in _VARS:
        pass
    else:
        raise ValueError(f"unsupported rule syntax: {ast.dump(node)}")


def _eval(node, env):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return node.value
    return env[node.id]
