"""Second-order jets: exact values, gradients, and Hessians of expressions.

A :class:`Jet2` over ``k`` coordinates carries ``(value, grad, hess)`` with a
``(k,)`` gradient and a symmetric ``(k, k)`` Hessian.  All arithmetic
propagates both derivative orders exactly (no numeric differencing); the
Hessian stays bit-exactly symmetric because every update is built from outer
products ``g g^T`` or the symmetrized ``a b^T + b a^T``.

:class:`PointEvaluator` evaluates expression trees at a fixed point, either
as plain floats or as jets, memoising per node object so shared subtrees are
visited once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EvaluationDomainError
from .expr import BinOp, Call, Expr, Neg, Num, Var

__all__ = ["Jet2", "EvalPoint", "PointEvaluator", "eval_jet", "finite_difference_jet"]


@dataclass(frozen=True)
class EvalPoint:
    """A point of the total space: base coordinates ``x``, fiber coordinates ``y``."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    @staticmethod
    def of(x: Sequence[float], y: Sequence[float]) -> "EvalPoint":
        return EvalPoint(tuple(float(v) for v in x), tuple(float(v) for v in y))

    def values(self) -> tuple[float, ...]:
        return self.x + self.y

    def __str__(self) -> str:
        return f"(x={list(self.x)}, y={list(self.y)})"


class Jet2:
    """Truncated second-order Taylor data of a scalar quantity."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = value
        self.grad = grad
        self.hess = hess

    @staticmethod
    def constant(value: float, k: int) -> "Jet2":
        return Jet2(float(value), np.zeros(k), np.zeros((k, k)))

    @staticmethod
    def coordinate(value: float, index: int, k: int) -> "Jet2":
        g = np.zeros(k)
        g[index] = 1.0
        return Jet2(float(value), g, np.zeros((k, k)))

    def __add__(self, o: "Jet2") -> "Jet2":
        return Jet2(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    def __sub__(self, o: "Jet2") -> "Jet2":
        return Jet2(self.value - o.value, self.grad - o.grad, self.hess - o.hess)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __mul__(self, o: "Jet2") -> "Jet2":
        cross = np.outer(self.grad, o.grad)
        return Jet2(
            self.value * o.value,
            self.value * o.grad + o.value * self.grad,
            self.value * o.hess + o.value * self.hess + cross + cross.T,
        )

    def chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Compose with a scalar function given f(v), f'(v), f''(v)."""
        return Jet2(f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad))

    def reciprocal(self) -> "Jet2":
        v = self.value
        return self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def __truediv__(self, o: "Jet2") -> "Jet2":
        return self * o.reciprocal()

    def pow_int(self, k: int) -> "Jet2":
        if k < 0:
            return self.pow_int(-k).reciprocal()
        result = Jet2.constant(1.0, self.grad.shape[0])
        for _ in range(k):
            result = result * self
        return result

    def scaled(self, c: float) -> "Jet2":
        return Jet2(c * self.value, c * self.grad, c * self.hess)


def _call_jet(func: str, a: Jet2, node: Expr) -> Jet2:
    v = a.value
    if func == "sin":
        return a.chain(math.sin(v), math.cos(v), -math.sin(v))
    if func == "cos":
        return a.chain(math.cos(v), -math.sin(v), -math.cos(v))
    if func == "exp":
        e = math.exp(v)
        return a.chain(e, e, e)
    if func == "ln":
        if v <= 0.0:
            raise EvaluationDomainError(f"ln of non-positive value {v!r}", node)
        return a.chain(math.log(v), 1.0 / v, -1.0 / (v * v))
    if func == "sqrt":
        if v < 0.0:
            raise EvaluationDomainError(f"sqrt of negative value {v!r}", node)
        if v == 0.0:
            raise EvaluationDomainError("sqrt derivative singular at 0", node)
        s = math.sqrt(v)
        return a.chain(s, 0.5 / s, -0.25 / (s * v))
    raise AssertionError(func)


def _call_float(func: str, v: float, node: Expr) -> float:
    if func == "sin":
        return math.sin(v)
    if func == "cos":
        return math.cos(v)
    if func == "exp":
        return math.exp(v)
    if func == "ln":
        if v <= 0.0:
            raise EvaluationDomainError(f"ln of non-positive value {v!r}", node)
        return math.log(v)
    if func == "sqrt":
        if v < 0.0:
            raise EvaluationDomainError(f"sqrt of negative value {v!r}", node)
        return math.sqrt(v)
    raise AssertionError(func)


def _int_exponent(c: float) -> int | None:
    if c == int(c) and abs(c) <= 1_000_000:
        return int(c)
    return None


class PointEvaluator:
    """Evaluates expression trees at one fixed coordinate assignment.

    Shared sub-objects are evaluated once per evaluator (memoised by object
    identity), so composite trees built from common pieces stay cheap.
    """

    def __init__(self, names: Sequence[str], values: Sequence[float]):
        if len(names) != len(values):
            raise ValueError("coordinate names and values differ in length")
        self.names = tuple(names)
        self.values = tuple(float(v) for v in values)
        self.index = {name: i for i, name in enumerate(self.names)}
        self.k = len(self.names)
        # memo entries store (node, result): the node reference keeps the id
        # unique for the evaluator's lifetime (ids of dead objects get reused)
        self._jets: dict[int, tuple[Expr, Jet2]] = {}
        self._floats: dict[int, tuple[Expr, float]] = {}
        self.cache: dict = {}  # scratch space for callers (per-point tensors etc.)

    def value(self, e: Expr) -> float:
        memo = self._floats
        key = id(e)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        if isinstance(e, Num):
            r = e.value
        elif isinstance(e, Var):
            r = self.values[self.index[e.name]]
        elif isinstance(e, Neg):
            r = -self.value(e.operand)
        elif isinstance(e, Call):
            r = _call_float(e.func, self.value(e.operand), e)
        else:
            a = self.value(e.left)
            b = self.value(e.right)
            op = e.op
            if op == "+":
                r = a + b
            elif op == "-":
                r = a - b
            elif op == "*":
                r = a * b
            elif op == "/":
                if b == 0.0:
                    raise EvaluationDomainError("division by zero", e)
                r = a / b
            else:
                r = self._pow_float(a, b, e)
        memo[key] = (e, r)
        return r

    def _pow_float(self, a: float, b: float, node: Expr) -> float:
        k = _int_exponent(b) if isinstance(node.right, Num) else None
        if k is not None:
            if k < 0 and a == 0.0:
                raise EvaluationDomainError("zero base with negative exponent", node)
            r = 1.0
            for _ in range(abs(k)):
                r *= a
            return 1.0 / r if k < 0 else r
        if a <= 0.0:
            raise EvaluationDomainError(
                f"non-integer power of non-positive base {a!r}", node
            )
        return math.exp(b * math.log(a))

    def jet(self, e: Expr) -> Jet2:
        memo = self._jets
        key = id(e)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        if isinstance(e, Num):
            r = Jet2.constant(e.value, self.k)
        elif isinstance(e, Var):
            i = self.index[e.name]
            r = Jet2.coordinate(self.values[i], i, self.k)
        elif isinstance(e, Neg):
            r = -self.jet(e.operand)
        elif isinstance(e, Call):
            r = _call_jet(e.func, self.jet(e.operand), e)
        else:
            op = e.op
            if op == "^":
                r = self._pow_jet(e)
            else:
                a = self.jet(e.left)
                b = self.jet(e.right)
                if op == "+":
                    r = a + b
                elif op == "-":
                    r = a - b
                elif op == "*":
                    r = a * b
                else:
                    if b.value == 0.0:
                        raise EvaluationDomainError("division by zero", e)
                    r = a / b
        memo[key] = (e, r)
        return r

    def _pow_jet(self, e: BinOp) -> Jet2:
        a = self.jet(e.left)
        if isinstance(e.right, Num):
            k = _int_exponent(e.right.value)
            if k is not None:
                if k < 0 and a.value == 0.0:
                    raise EvaluationDomainError("zero base with negative exponent", e)
                return a.pow_int(k)
            c = e.right.value
            if a.value <= 0.0:
                raise EvaluationDomainError(
                    f"non-integer power of non-positive base {a.value!r}", e
                )
            v = a.value
            f0 = math.exp(c * math.log(v))
            return a.chain(f0, c * f0 / v, c * (c - 1.0) * f0 / (v * v))
        b = self.jet(e.right)
        if a.value <= 0.0:
            raise EvaluationDomainError(
                f"non-integer power of non-positive base {a.value!r}", e
            )
        # a^b = exp(b ln a)
        ln_a = a.chain(math.log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value))
        prod = b * ln_a
        ev = math.exp(prod.value)
        return prod.chain(ev, ev, ev)

    def gradient(self, e: Expr) -> np.ndarray:
        return self.jet(e).grad

    def values_of(self, exprs: Sequence[Expr]) -> np.ndarray:
        return np.array([self.value(x) for x in exprs])


def eval_jet(e: Expr, names: Sequence[str], values: Sequence[float]) -> Jet2:
    """Value, gradient, and Hessian of ``e`` at the given coordinate values."""
    return PointEvaluator(names, values).jet(e)


def finite_difference_jet(
    e: Expr, names: Sequence[str], values: Sequence[float], h: float
) -> Jet2:
    """Central-difference estimate of the jet; test oracle for :func:`eval_jet`."""
    if h <= 0.0:
        raise ValueError("step size must be positive")
    base = list(float(v) for v in values)
    k = len(base)

    def f(shift: dict[int, float]) -> float:
        pt = list(base)
        for i, d in shift.items():
            pt[i] += d
        return PointEvaluator(names, pt).value(e)

    f0 = f({})
    grad = np.zeros(k)
    hess = np.zeros((k, k))
    for i in range(k):
        fp = f({i: h})
        fm = f({i: -h})
        grad[i] = (fp - fm) / (2.0 * h)
        hess[i, i] = (fp - 2.0 * f0 + fm) / (h * h)
    for i in range(k):
        for j in range(i + 1, k):
            fpp = f({i: h, j: h})
            fpm = f({i: h, j: -h})
            fmp = f({i: -h, j: h})
            fmm = f({i: -h, j: -h})
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h * h)
    return Jet2(f0, grad, hess)
