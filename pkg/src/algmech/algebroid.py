"""Lie algebroids in local coordinates: anchor, structure functions, and the
base-level calculus.

Index conventions used throughout the package:

* ``anchor[i][a]`` is the coefficient of d/dx^i in the image of the a-th
  frame section (n rows, m columns),
* ``structure[a][b][c]`` is the c-component of the bracket of frame sections
  a and b; antisymmetry in (a, b) is validated, never assumed,
* connection coefficients later on follow ``N[a][b]`` = lower index a,
  upper index b.

Axioms are checked pointwise on a sample set: the engine is numeric, and for
the polynomial data this library targets, pointwise residuals at a few dozen
random points are decisive in practice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EvaluationDomainError, FiberDependenceError
from .expr import Expr, differentiate, e_mul, e_sub, e_sum, variables
from .jets import EvalPoint, PointEvaluator

__all__ = ["Algebroid", "BaseSection", "ValidationReport"]


@dataclass(frozen=True)
class BaseSection:
    """Section of the bundle itself, componentwise over the frame sections."""

    components: tuple[Expr, ...]
    x_only: bool

    @staticmethod
    def define(alg: "Algebroid", components: Sequence[Expr]) -> "BaseSection":
        fiber = set(alg.fiber_coords)
        used = frozenset().union(*(variables(c) for c in components)) if components else frozenset()
        return BaseSection(tuple(components), x_only=not (used & fiber))


@dataclass(frozen=True)
class ValidationReport:
    antisymmetry: float
    cyclic: float
    compatibility: float
    tol: float
    samples: int
    passed: bool

    def residuals(self) -> dict[str, float]:
        return {
            "antisymmetry": self.antisymmetry,
            "cyclic": self.cyclic,
            "compatibility": self.compatibility,
        }


@dataclass(frozen=True)
class Algebroid:
    """Anchor and structure functions over named local coordinates."""

    base_coords: tuple[str, ...]
    fiber_coords: tuple[str, ...]
    anchor: tuple[tuple[Expr, ...], ...]  # [i][a], entries in x only
    structure: tuple[tuple[tuple[Expr, ...], ...], ...]  # [a][b][c], in x only

    @property
    def n(self) -> int:
        return len(self.base_coords)

    @property
    def m(self) -> int:
        return len(self.fiber_coords)

    @property
    def coords(self) -> tuple[str, ...]:
        return self.base_coords + self.fiber_coords

    def evaluator(self, p: EvalPoint) -> PointEvaluator:
        if len(p.x) != self.n or len(p.y) != self.m:
            raise ValueError(
                f"point has dims ({len(p.x)},{len(p.y)}), system is ({self.n},{self.m})"
            )
        return PointEvaluator(self.coords, p.values())

    # -- pointwise data ----------------------------------------------------

    def anchor_at(self, ev: PointEvaluator) -> np.ndarray:
        cached = ev.cache.get("anchor")
        if cached is None:
            cached = np.array([[ev.value(e) for e in row] for row in self.anchor])
            ev.cache["anchor"] = cached
        return cached

    def structure_at(self, ev: PointEvaluator) -> np.ndarray:
        cached = ev.cache.get("structure")
        if cached is None:
            m = self.m
            cached = np.array(
                [[[ev.value(self.structure[a][b][c]) for c in range(m)] for b in range(m)] for a in range(m)]
            )
            ev.cache["structure"] = cached
        return cached

    # -- base calculus -----------------------------------------------------

    def _require_x_only(self, f: Expr, what: str) -> None:
        bad = variables(f) & set(self.fiber_coords)
        if bad:
            raise FiberDependenceError(
                f"{what} depends on fiber coordinates {sorted(bad)}"
            )

    def anchor_apply(self, s: BaseSection, f: Expr, p: EvalPoint) -> float:
        """Derivative of a base function along the anchored vector field of s."""
        if not s.x_only:
            raise FiberDependenceError("section must not depend on fiber coordinates")
        self._require_x_only(f, "function")
        ev = self.evaluator(p)
        sigma = self.anchor_at(ev)
        rho = ev.values_of(s.components)
        grad_x = ev.gradient(f)[: self.n]
        return float(rho @ (sigma.T @ grad_x))

    def differential(self, f: Expr, p: EvalPoint) -> np.ndarray:
        """Components of the exterior derivative of a base function."""
        self._require_x_only(f, "function")
        ev = self.evaluator(p)
        grad_x = ev.gradient(f)[: self.n]
        return self.anchor_at(ev).T @ grad_x

    def bracket_exprs(self, r: BaseSection, s: BaseSection) -> BaseSection:
        """Component trees of the section bracket [r, s]."""
        if not (r.x_only and s.x_only):
            raise FiberDependenceError("bracket is defined for x-only sections")
        m, n = self.m, self.n
        comps = []
        for c in range(m):
            quad = e_sum(
                e_mul(e_mul(r.components[a], s.components[b]), self.structure[a][b][c])
                for a in range(m)
                for b in range(m)
            )
            flow_r = self._anchor_derivative_expr(r, s.components[c])
            flow_s = self._anchor_derivative_expr(s, r.components[c])
            comps.append(e_sum([quad, e_sub(flow_r, flow_s)]))
        return BaseSection.define(self, comps)

    def _anchor_derivative_expr(self, s: BaseSection, f: Expr) -> Expr:
        return e_sum(
            e_mul(e_mul(s.components[a], self.anchor[i][a]), differentiate(f, self.base_coords[i]))
            for a in range(self.m)
            for i in range(self.n)
        )

    def bracket(self, r: BaseSection, s: BaseSection, p: EvalPoint) -> np.ndarray:
        """Bracket components at a point."""
        ev = self.evaluator(p)
        return ev.values_of(self.bracket_exprs(r, s).components)

    # -- axiom validation ----------------------------------------------------

    def validate(self, samples: Sequence[EvalPoint], tol: float) -> ValidationReport:
        """Pointwise residuals of antisymmetry and the two structure equations.

        Evaluation domain errors propagate with the offending sample point
        attached to the message.
        """
        if not samples:
            raise ValueError("at least one sample point is required")
        n, m = self.n, self.m
        anti = cyc = compat = 0.0
        for p in samples:
            try:
                anti, cyc, compat = self._validate_at(p, anti, cyc, compat)
            except EvaluationDomainError as err:
                raise EvaluationDomainError(
                    f"{err} while validating at {p}", err.subexpression
                ) from err
        return ValidationReport(
            antisymmetry=anti,
            cyclic=cyc,
            compatibility=compat,
            tol=tol,
            samples=len(samples),
            passed=(anti <= tol and cyc <= tol and compat <= tol),
        )

    def _validate_at(
        self, p: EvalPoint, anti: float, cyc: float, compat: float
    ) -> tuple[float, float, float]:
        n, m = self.n, self.m
        ev = self.evaluator(p)
        sigma = self.anchor_at(ev)
        L = self.structure_at(ev)
        anti = max(anti, float(np.max(np.abs(L + L.transpose(1, 0, 2)))) if m else 0.0)

        # first partials of structure functions and anchor entries
        dL = np.zeros((m, m, m, n))
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    dL[a, b, c] = ev.gradient(self.structure[a][b][c])[:n]
        dsig = np.zeros((n, m, n))
        for i in range(n):
            for a in range(m):
                dsig[i, a] = ev.gradient(self.anchor[i][a])[:n]

        # cyclic sum of sigma_a^i dL_{bc}^d/dx^i + L_{a e}^d L_{bc}^e
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    for d in range(m):
                        total = 0.0
                        for aa, bb, cc in ((a, b, c), (b, c, a), (c, a, b)):
                            total += float(sigma[:, aa] @ dL[bb, cc, d])
                            total += float(L[aa, :, d] @ L[bb, cc, :])
                        cyc = max(cyc, abs(total))

        # anchor compatibility with the bracket
        for a in range(m):
            for b in range(m):
                for i in range(n):
                    lhs = float(sigma[:, a] @ dsig[i, b] - sigma[:, b] @ dsig[i, a])
                    rhs = float(sigma[i, :] @ L[a, b, :])
                    compat = max(compat, abs(lhs - rhs))
        return anti, cyc, compat
