"""Regular Lagrangians: fiber metric, canonical second-order field, Cartan
sections, energy, and time integration of the induced dynamics.

The canonical semispray components are built as expression trees (derivative
trees of the Lagrangian composed with an adjugate/determinant inverse of the
fiber metric), so every downstream object can take exact first and second
partials of them through jet evaluation.

Sign conventions for the two-section built from the Lagrangian, with the
wedge normalisation (a^b)(A,B) = a(A) b(B) - a(B) b(A):

    omega(X_a, X_b) = c_ab,   omega(X_a, V_b) = -g_ab,   omega(V,V) = 0,

with c_ab the antisymmetrised mixed-derivative coefficient.  These are the
signs under which the canonical field satisfies the symplectic equation
omega(S, .) = -dE(.) identically; the test suite pins this down.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebroid import Algebroid
from .errors import EvaluationDomainError, IntegrationAbortError, SingularMetricError
from .expr import (
    Expr,
    ONE,
    Var,
    ZERO,
    differentiate,
    e_div,
    e_mul,
    e_neg,
    e_sub,
    e_sum,
)
from .jets import EvalPoint, PointEvaluator
from .prolongation import ProlongationSection, Semispray

__all__ = [
    "Lagrangian",
    "Trajectory",
    "fiber_metric",
    "canonical_semispray",
    "energy",
    "cartan_one_section",
    "cartan_pairing",
    "cartan_pairing_exprs",
    "cartan_two_section",
    "symplectic_residual",
    "integrate_sode",
    "euler_lagrange_residual",
    "matrix_inverse_exprs",
]

_DET_RTOL = 1e-10  # relative determinant cutoff for regularity


@dataclass(frozen=True, eq=False)
class Lagrangian:
    """A Lagrangian with its derivative trees precomputed against a system."""

    alg: Algebroid
    expr: Expr
    dx: tuple[Expr, ...]  # dL/dx^i
    dy: tuple[Expr, ...]  # dL/dy^a
    dxy: tuple[tuple[Expr, ...], ...]  # [i][a] = d2L/dx^i dy^a
    metric_exprs: tuple[tuple[Expr, ...], ...]  # [a][b] = d2L/dy^a dy^b
    energy_expr: Expr

    @staticmethod
    def define(alg: Algebroid, expr: Expr) -> "Lagrangian":
        dx = tuple(differentiate(expr, c) for c in alg.base_coords)
        dy = tuple(differentiate(expr, c) for c in alg.fiber_coords)
        dxy = tuple(
            tuple(differentiate(dx[i], c) for c in alg.fiber_coords)
            for i in range(alg.n)
        )
        g = tuple(
            tuple(differentiate(dy[a], c) for c in alg.fiber_coords)
            for a in range(alg.m)
        )
        e = e_sub(
            e_sum(
                e_mul(Var(alg.fiber_coords[a]), dy[a]) for a in range(alg.m)
            ),
            expr,
        )
        return Lagrangian(alg, expr, dx, dy, dxy, g, e)


def fiber_metric(
    L: Lagrangian, p: EvalPoint
) -> tuple[np.ndarray, np.ndarray, float]:
    """Fiber Hessian, its inverse, and a condition estimate; raises if singular."""
    alg = L.alg
    ev = alg.evaluator(p)
    hess = ev.jet(L.expr).hess
    g = hess[alg.n :, alg.n :]
    scale = float(np.max(np.abs(g)))
    det = float(np.linalg.det(g))
    if scale == 0.0 or abs(det) < _DET_RTOL * scale**alg.m:
        raise SingularMetricError(p, det)
    ginv = np.linalg.inv(g)
    eye = np.eye(alg.m)
    if float(np.max(np.abs(g @ ginv - eye))) > 1e-12:
        ginv = ginv @ (2.0 * eye - g @ ginv)  # one Newton sweep
        if float(np.max(np.abs(g @ ginv - eye))) > 1e-12:
            raise SingularMetricError(p, det)
    return g, ginv, float(np.linalg.cond(g))


def _minor(mat: list[list[Expr]], row: int, col: int) -> list[list[Expr]]:
    return [
        [entry for j, entry in enumerate(r) if j != col]
        for i, r in enumerate(mat)
        if i != row
    ]


def _det_expr(mat: list[list[Expr]]) -> Expr:
    k = len(mat)
    if k == 0:
        return ONE  # empty minor, reached by the rank-one cofactor
    if k == 1:
        return mat[0][0]
    terms = []
    for j in range(k):
        term = e_mul(mat[0][j], _det_expr(_minor(mat, 0, j)))
        terms.append(term if j % 2 == 0 else e_neg(term))
    return e_sum(terms)


def matrix_inverse_exprs(
    mat: Sequence[Sequence[Expr]],
) -> tuple[tuple[tuple[Expr, ...], ...], Expr]:
    """Adjugate-over-determinant inverse of a small expression matrix.

    Laplace expansion; fine for the fiber ranks this library targets.
    """
    rows = [list(r) for r in mat]
    k = len(rows)
    det = _det_expr(rows)
    inv = []
    for i in range(k):
        inv_row = []
        for j in range(k):
            cof = _det_expr(_minor(rows, j, i))
            if (i + j) % 2 == 1:
                cof = e_neg(cof)
            inv_row.append(cof)
        inv.append(inv_row)
    return tuple(tuple(e_div(c, det) for c in row) for row in inv), det


def canonical_semispray(alg: Algebroid, L: Lagrangian) -> Semispray:
    """The second-order field determined by the symplectic equation of L."""
    m, n = alg.m, alg.n
    ginv, _ = matrix_inverse_exprs(L.metric_exprs)
    y = [Var(c) for c in alg.fiber_coords]
    comps = []
    for e in range(m):
        rhs_terms = []
        for b in range(m):
            force = e_sum(e_mul(alg.anchor[i][b], L.dx[i]) for i in range(n))
            drift = e_sum(
                e_mul(e_mul(alg.anchor[i][a], L.dxy[i][b]), y[a])
                for i in range(n)
                for a in range(m)
            )
            twist = e_sum(
                e_mul(e_mul(alg.structure[b][a][g], y[a]), L.dy[g])
                for a in range(m)
                for g in range(m)
            )
            rhs = e_sub(e_sub(force, drift), twist)
            rhs_terms.append(e_mul(ginv[e][b], rhs))
        comps.append(e_sum(rhs_terms))
    return Semispray(tuple(comps))


def energy(L: Lagrangian, p: EvalPoint) -> float:
    """Fiber-Euler energy y^a dL/dy^a - L."""
    return L.alg.evaluator(p).value(L.energy_expr)


def cartan_one_section(L: Lagrangian, p: EvalPoint) -> np.ndarray:
    """Coefficients of the one-section dL/dy^a along the X-coframe."""
    return L.alg.evaluator(p).values_of(L.dy)


def cartan_pairing_exprs(alg: Algebroid, L: Lagrangian) -> list[list[Expr]]:
    """Expression matrix of the two-section on frame pairs.

    ``W[r][c] = omega(frame_r, frame_c)`` with the X-frame first, so that
    ``omega(A, B) = concat(A)^T W concat(B)`` on stacked component columns.
    """
    m, n = alg.m, alg.n
    c_block = [[None] * m for _ in range(m)]
    for a in range(m):
        for b in range(m):
            mixed = e_sub(
                e_sum(e_mul(alg.anchor[i][a], L.dxy[i][b]) for i in range(n)),
                e_sum(e_mul(alg.anchor[i][b], L.dxy[i][a]) for i in range(n)),
            )
            torsion = e_sum(
                e_mul(L.dy[e], alg.structure[a][b][e]) for e in range(m)
            )
            c_block[a][b] = e_sub(mixed, torsion)
    W: list[list[Expr]] = [[ZERO] * (2 * m) for _ in range(2 * m)]
    for a in range(m):
        for b in range(m):
            W[a][b] = c_block[a][b]
            W[a][m + b] = e_neg(L.metric_exprs[a][b])
            W[m + a][b] = L.metric_exprs[b][a]
    return W


def cartan_pairing(alg: Algebroid, L: Lagrangian, ev: PointEvaluator) -> np.ndarray:
    cached = ev.cache.get("cartan_pairing")
    if cached is None:
        W = cartan_pairing_exprs(alg, L)
        cached = np.array([[ev.value(e) for e in row] for row in W])
        ev.cache["cartan_pairing"] = cached
    return cached


def cartan_two_section(
    alg: Algebroid,
    L: Lagrangian,
    A: ProlongationSection,
    B: ProlongationSection,
    p: EvalPoint,
) -> float:
    """The symplectic two-section evaluated on a pair of sections."""
    ev = alg.evaluator(p)
    W = cartan_pairing(alg, L, ev)
    ax, av = A.values_at(ev)
    bx, bv = B.values_at(ev)
    return float(np.concatenate([ax, av]) @ W @ np.concatenate([bx, bv]))


def symplectic_residual(
    alg: Algebroid,
    L: Lagrangian,
    S: Semispray,
    A: ProlongationSection,
    p: EvalPoint,
) -> float:
    """omega(S, A) + dE(A); vanishes for the canonical field, any A."""
    ev = alg.evaluator(p)
    W = cartan_pairing(alg, L, ev)
    sx, sv = S.section(alg).values_at(ev)
    ax, av = A.values_at(ev)
    pairing = float(np.concatenate([sx, sv]) @ W @ np.concatenate([ax, av]))
    grad_e = ev.jet(L.energy_expr).grad
    sigma = alg.anchor_at(ev)
    d_energy = float(ax @ (sigma.T @ grad_e[: alg.n]) + av @ grad_e[alg.n :])
    return pairing + d_energy


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    times: list[float]
    states: list[tuple[tuple[float, ...], tuple[float, ...]]]
    energy: list[float] | None

    def to_csv(self, path, alg: Algebroid) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t", *alg.base_coords, *alg.fiber_coords]
            if self.energy is not None:
                header.append("E")
            writer.writerow(header)
            for k, (t, (x, y)) in enumerate(zip(self.times, self.states)):
                row = [format(t, ".17g")]
                row += [format(v, ".17g") for v in x]
                row += [format(v, ".17g") for v in y]
                if self.energy is not None:
                    row.append(format(self.energy[k], ".17g"))
                writer.writerow(row)

    def energy_drift(self) -> float:
        if not self.energy:
            return 0.0
        e0 = self.energy[0]
        return max(abs(e - e0) for e in self.energy)


def integrate_sode(
    alg: Algebroid,
    S: Semispray,
    x0: Sequence[float],
    y0: Sequence[float],
    dt: float,
    steps: int,
    lagrangian: Lagrangian | None = None,
) -> Trajectory:
    """Classical fixed-step RK4 for dx = sigma(x) y dt, dy = S(x, y) dt.

    The step is fixed (no adaptivity) so repeated runs are byte-identical.
    Domain errors abort with the partial trajectory attached.
    """
    if dt <= 0.0 or steps < 1:
        raise ValueError("dt must be positive and steps >= 1")
    n, m = alg.n, alg.m
    state = np.array([*x0, *y0], dtype=float)
    if state.shape[0] != n + m:
        raise ValueError("initial condition has wrong dimension")
    names = alg.coords
    anchor_flat = [alg.anchor[i][a] for i in range(n) for a in range(m)]

    def rhs(z: np.ndarray) -> np.ndarray:
        ev = PointEvaluator(names, z)
        sig = np.array([ev.value(e) for e in anchor_flat]).reshape(n, m)
        xdot = sig @ z[n:]
        ydot = np.array([ev.value(c) for c in S.components])
        return np.concatenate([xdot, ydot])

    def point(z: np.ndarray) -> EvalPoint:
        return EvalPoint.of(z[:n], z[n:])

    times = [0.0]
    states = [(tuple(state[:n]), tuple(state[n:]))]
    energies = None
    if lagrangian is not None:
        energies = [energy(lagrangian, point(state))]
    traj = Trajectory(times, states, energies)
    try:
        for k in range(steps):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * dt * k1)
            k3 = rhs(state + 0.5 * dt * k2)
            k4 = rhs(state + dt * k3)
            state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            times.append((k + 1) * dt)
            states.append((tuple(state[:n]), tuple(state[n:])))
            if energies is not None:
                energies.append(energy(lagrangian, point(state)))
    except EvaluationDomainError as err:
        raise IntegrationAbortError(str(err), traj) from err
    return traj


def euler_lagrange_residual(
    alg: Algebroid, L: Lagrangian, p: EvalPoint, ydot: Sequence[float]
) -> np.ndarray:
    """Residual of the variational equations with d/dt expanded along
    (xdot = sigma y, ydot = given)."""
    ev = alg.evaluator(p)
    n, m = alg.n, alg.m
    jet = ev.jet(L.expr)
    grad_x, grad_y = jet.grad[:n], jet.grad[n:]
    h_xy = jet.hess[:n, n:]
    h_yy = jet.hess[n:, n:]
    sigma = alg.anchor_at(ev)
    Ls = alg.structure_at(ev)
    y = np.array(p.y)
    xdot = sigma @ y
    ydot = np.asarray(ydot, dtype=float)
    ddt = h_xy.T @ xdot + h_yy @ ydot
    rhs = sigma.T @ grad_x - np.einsum("abe,b,e->a", Ls, y, grad_y)
    return ddt - rhs
