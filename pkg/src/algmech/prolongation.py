"""Calculus on the prolongation bundle.

Sections are stored in the moving frame {X_a, V_a}: a pair of component
lists, both allowed to depend on all coordinates.  The frame bracket rules
([X_a, X_b] = L_ab^c X_c, the other two vanish) extend to functional
coefficients through the anchored derivations

    sigma1(A)(f) = A_x^a sigma_a^i df/dx^i + A_v^a df/dy^a.

Pointwise (1,1)-tensors are stored as four m-by-m blocks acting on component
columns; expression-backed tensors (:class:`ExprTensor`) keep the blocks as
trees so that Lie and covariant derivatives can differentiate them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebroid import Algebroid, BaseSection
from .expr import (
    Expr,
    ONE,
    ZERO,
    Var,
    differentiate,
    e_mul,
    e_num,
    e_sub,
    e_sum,
)
from .jets import EvalPoint, PointEvaluator

__all__ = [
    "ProlongationSection",
    "Semispray",
    "TensorBlock11",
    "ExprTensor",
    "bracket",
    "bracket_at",
    "sigma1_apply",
    "tangent_structure_apply",
    "euler_section",
    "vertical_lift",
    "complete_lift",
    "sode_flow",
    "sode_derivative",
    "sode_derivative_expr",
    "spray_test",
    "SprayReport",
    "j_tensor",
    "zeros_block",
    "eye_block",
    "basis_sections",
    "identity_tensor",
    "lie_derivative_tensor",
]


@dataclass(frozen=True)
class ProlongationSection:
    """Component trees over the frame {X_a} (x_comps) and {V_a} (v_comps)."""

    x_comps: tuple[Expr, ...]
    v_comps: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.x_comps) != len(self.v_comps):
            raise ValueError("X- and V-component counts differ")

    @staticmethod
    def constant(x: Sequence[float], v: Sequence[float]) -> "ProlongationSection":
        return ProlongationSection(
            tuple(e_num(c) for c in x), tuple(e_num(c) for c in v)
        )

    @staticmethod
    def basis_x(m: int, a: int) -> "ProlongationSection":
        return ProlongationSection.constant(np.eye(m)[a], np.zeros(m))

    @staticmethod
    def basis_v(m: int, a: int) -> "ProlongationSection":
        return ProlongationSection.constant(np.zeros(m), np.eye(m)[a])

    def values_at(self, ev: PointEvaluator) -> tuple[np.ndarray, np.ndarray]:
        return ev.values_of(self.x_comps), ev.values_of(self.v_comps)


def basis_sections(m: int) -> list[ProlongationSection]:
    """The 2m frame sections, X_0..X_{m-1} then V_0..V_{m-1}."""
    return [ProlongationSection.basis_x(m, a) for a in range(m)] + [
        ProlongationSection.basis_v(m, a) for a in range(m)
    ]


@dataclass(frozen=True)
class Semispray:
    """Second-order field: as a section it reads (y^a, S^a)."""

    components: tuple[Expr, ...]

    def section(self, alg: Algebroid) -> ProlongationSection:
        return ProlongationSection(
            tuple(Var(name) for name in alg.fiber_coords), self.components
        )


def euler_section(alg: Algebroid) -> ProlongationSection:
    """The canonical vertical section with components (0, y^a)."""
    m = alg.m
    return ProlongationSection(
        tuple(ZERO for _ in range(m)), tuple(Var(n) for n in alg.fiber_coords)
    )


def vertical_lift(alg: Algebroid, s: BaseSection) -> ProlongationSection:
    return ProlongationSection(tuple(ZERO for _ in range(alg.m)), s.components)


def complete_lift(alg: Algebroid, s: BaseSection) -> ProlongationSection:
    """Lift whose flow projects onto the anchored flow of the base section."""
    if not s.x_only:
        raise ValueError("complete lift requires an x-only section")
    m, n = alg.m, alg.n
    v_comps = []
    for a in range(m):
        terms = []
        for eps in range(m):
            coeff = e_sub(
                e_sum(
                    e_mul(alg.anchor[i][eps], differentiate(s.components[a], alg.base_coords[i]))
                    for i in range(n)
                ),
                e_sum(e_mul(alg.structure[b][eps][a], s.components[b]) for b in range(m)),
            )
            terms.append(e_mul(coeff, Var(alg.fiber_coords[eps])))
        v_comps.append(e_sum(terms))
    return ProlongationSection(tuple(s.components), tuple(v_comps))


# ---------------------------------------------------------------------------
# Derivations and the bracket
# ---------------------------------------------------------------------------


def _dir_values(
    alg: Algebroid, ev: PointEvaluator, ax: np.ndarray, av: np.ndarray, f: Expr
) -> float:
    """sigma1(A)(f) at the point, with A given by component values ax, av."""
    g = ev.jet(f).grad
    sigma = alg.anchor_at(ev)
    return float(ax @ (sigma.T @ g[: alg.n]) + av @ g[alg.n :])


def sigma1_apply(
    alg: Algebroid, A: ProlongationSection, f: Expr, p: EvalPoint
) -> float:
    """Derivative of a function on the total space along the anchor image of A."""
    ev = alg.evaluator(p)
    ax, av = A.values_at(ev)
    return _dir_values(alg, ev, ax, av, f)


def bracket_at(
    alg: Algebroid,
    A: ProlongationSection,
    B: ProlongationSection,
    ev: PointEvaluator,
) -> tuple[np.ndarray, np.ndarray]:
    m = alg.m
    L = alg.structure_at(ev)
    ax, av = A.values_at(ev)
    bx, bv = B.values_at(ev)
    x_part = np.einsum("a,b,abg->g", ax, bx, L)
    v_part = np.zeros(m)
    for g in range(m):
        x_part[g] += _dir_values(alg, ev, ax, av, B.x_comps[g]) - _dir_values(
            alg, ev, bx, bv, A.x_comps[g]
        )
        v_part[g] = _dir_values(alg, ev, ax, av, B.v_comps[g]) - _dir_values(
            alg, ev, bx, bv, A.v_comps[g]
        )
    return x_part, v_part


def bracket(
    alg: Algebroid, A: ProlongationSection, B: ProlongationSection, p: EvalPoint
) -> tuple[np.ndarray, np.ndarray]:
    """Components of [A, B] on the prolongation bundle at a point."""
    return bracket_at(alg, A, B, alg.evaluator(p))


def tangent_structure_apply(
    A: ProlongationSection, alg: Algebroid, p: EvalPoint
) -> tuple[np.ndarray, np.ndarray]:
    """Vertical endomorphism: kills V-components, sends X_a to V_a."""
    ev = alg.evaluator(p)
    ax, _ = A.values_at(ev)
    return np.zeros(alg.m), ax


# ---------------------------------------------------------------------------
# Second-order fields
# ---------------------------------------------------------------------------


def sode_flow(alg: Algebroid, S: Semispray) -> tuple[tuple[str, Expr], ...]:
    """(coordinate, velocity-tree) pairs of the anchored flow of S."""
    pairs = []
    for i in range(alg.n):
        pairs.append(
            (
                alg.base_coords[i],
                e_sum(
                    e_mul(Var(alg.fiber_coords[a]), alg.anchor[i][a])
                    for a in range(alg.m)
                ),
            )
        )
    for a in range(alg.m):
        pairs.append((alg.fiber_coords[a], S.components[a]))
    return tuple(pairs)


def sode_derivative_expr(alg: Algebroid, S: Semispray, f: Expr) -> Expr:
    """Tree for S(f), the derivative of f along the second-order field."""
    return e_sum(
        e_mul(vel, differentiate(f, name)) for name, vel in sode_flow(alg, S)
    )


def sode_derivative(alg: Algebroid, S: Semispray, f: Expr, p: EvalPoint) -> float:
    return sigma1_apply(alg, S.section(alg), f, p)


@dataclass(frozen=True)
class SprayReport:
    homogeneity: float
    euler_bracket: float
    tol: float
    samples: int
    is_spray: bool


def spray_test(
    alg: Algebroid, S: Semispray, samples: Sequence[EvalPoint], tol: float
) -> SprayReport:
    """Degree-2 homogeneity of the coefficients, cross-checked by [C, S] = S."""
    hom = 0.0
    brk = 0.0
    C = euler_section(alg)
    Ssec = S.section(alg)
    for p in samples:
        ev = alg.evaluator(p)
        y = np.array(p.y)
        for a in range(alg.m):
            jet = ev.jet(S.components[a])
            euler = 0.0
            for b in range(alg.m):
                euler += y[b] * jet.grad[alg.n + b]
            hom = max(hom, abs(euler - 2.0 * jet.value))
        bx, bv = bracket_at(alg, C, Ssec, ev)
        sx, sv = Ssec.values_at(ev)
        brk = max(brk, float(np.max(np.abs(bx - sx))), float(np.max(np.abs(bv - sv))))
    return SprayReport(
        homogeneity=hom,
        euler_bracket=brk,
        tol=tol,
        samples=len(samples),
        is_spray=hom <= tol,
    )


# ---------------------------------------------------------------------------
# (1,1)-tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TensorBlock11:
    """Pointwise action on the frame: columns of each block index the input."""

    xx: np.ndarray
    xv: np.ndarray
    vx: np.ndarray
    vv: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.xx, self.xv], [self.vx, self.vv]])

    @staticmethod
    def from_matrix(mat: np.ndarray) -> "TensorBlock11":
        m = mat.shape[0] // 2
        return TensorBlock11(
            xx=mat[:m, :m].copy(),
            xv=mat[:m, m:].copy(),
            vx=mat[m:, :m].copy(),
            vv=mat[m:, m:].copy(),
        )

    def apply(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.xx @ x + self.xv @ v, self.vx @ x + self.vv @ v


_Block = tuple[tuple[Expr, ...], ...]


def zeros_block(m: int) -> _Block:
    return tuple(tuple(ZERO for _ in range(m)) for _ in range(m))


def eye_block(m: int) -> _Block:
    return tuple(
        tuple(ONE if i == j else ZERO for j in range(m)) for i in range(m)
    )


@dataclass(frozen=True, eq=False)
class ExprTensor:
    """Expression-backed (1,1)-tensor; blocks index [row][column]."""

    xx: _Block
    xv: _Block
    vx: _Block
    vv: _Block

    @property
    def m(self) -> int:
        return len(self.xx)

    def column(self, k: int) -> ProlongationSection:
        """Image of the k-th frame section (X-frame first, then V-frame)."""
        m = self.m
        if k < m:
            return ProlongationSection(
                tuple(self.xx[r][k] for r in range(m)),
                tuple(self.vx[r][k] for r in range(m)),
            )
        k -= m
        return ProlongationSection(
            tuple(self.xv[r][k] for r in range(m)),
            tuple(self.vv[r][k] for r in range(m)),
        )

    def at(self, ev: PointEvaluator) -> TensorBlock11:
        def block(rows: _Block) -> np.ndarray:
            return np.array([[ev.value(e) for e in row] for row in rows])

        return TensorBlock11(block(self.xx), block(self.xv), block(self.vx), block(self.vv))


def j_tensor(m: int) -> ExprTensor:
    """The vertical endomorphism: X_a -> V_a, V_a -> 0."""
    return ExprTensor(
        xx=zeros_block(m), xv=zeros_block(m), vx=eye_block(m), vv=zeros_block(m)
    )


def identity_tensor(m: int) -> ExprTensor:
    return ExprTensor(
        xx=eye_block(m), xv=zeros_block(m), vx=zeros_block(m), vv=eye_block(m)
    )


def lie_derivative_tensor(
    alg: Algebroid, A: ProlongationSection, T: ExprTensor, p: EvalPoint
) -> TensorBlock11:
    """(L_A T)(B) = [A, T(B)] - T([A, B]) evaluated on every frame section.

    T must be expression-backed: the first bracket differentiates the
    coefficient functions of T(B).
    """
    m = alg.m
    ev = alg.evaluator(p)
    T_at = T.at(ev)
    cols = []
    for k, B in enumerate(basis_sections(m)):
        t1x, t1v = bracket_at(alg, A, T.column(k), ev)
        bx, bv = bracket_at(alg, A, B, ev)
        t2x, t2v = T_at.apply(bx, bv)
        cols.append(np.concatenate([t1x - t2x, t1v - t2v]))
    mat = np.stack(cols, axis=1)
    return TensorBlock11.from_matrix(mat)
