"""Primal active-set solver for the three-variable modification QP.

The problem solved here is

    minimize    e0**2 + w1*(e1 - e0)**2 + w2*(e2 - e1)**2
    subject to  lo_i <= r_i . e <= hi_i          (a handful of rows)

with ``e`` a 3-vector.  Everything is plain Python floats: the problem is
tiny and solved once per joint per control sample, so numpy call overhead
would dominate the arithmetic.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

Row = tuple[float, float, float]


class QPInfeasible(RuntimeError):
    """The feasible set is empty (or no feasible start point could be built)."""


class QPSolution(NamedTuple):
    e: tuple[float, float, float]
    active: tuple[int, ...]          # indices into the expanded (a.e >= b) list
    multipliers: tuple[float, ...]
    iterations: int


def objective_matrix(w1: float, w2: float) -> list[list[float]]:
    """Q such that the cost equals e^T Q e."""
    return [
        [1.0 + w1, -w1, 0.0],
        [-w1, w1 + w2, -w2],
        [0.0, -w2, w2],
    ]


def objective(e: Sequence[float], w1: float, w2: float) -> float:
    return e[0] ** 2 + w1 * (e[1] - e[0]) ** 2 + w2 * (e[2] - e[1]) ** 2


def _inverse3(m: list[list[float]]) -> list[list[float]]:
    a, b, c = m[0]
    d, e, f = m[1]
    g, h, i = m[2]
    co00 = e * i - f * h
    co01 = -(d * i - f * g)
    co02 = d * h - e * g
    det = a * co00 + b * co01 + c * co02
    if det == 0.0:
        raise ZeroDivisionError("singular objective matrix")
    inv = [
        [co00, -(b * i - c * h), b * f - c * e],
        [co01, a * i - c * g, -(a * f - c * d)],
        [co02, -(a * h - b * g), a * e - b * d],
    ]
    return [[v / det for v in row] for row in inv]


def _solve_small(s: list[list[float]], rhs: list[float]) -> list[float]:
    """Gaussian elimination with partial pivoting for m <= 3."""
    m = len(rhs)
    aug = [list(s[i]) + [rhs[i]] for i in range(m)]
    for col in range(m):
        piv = max(range(col, m), key=lambda r: abs(aug[r][col]))
        if abs(aug[piv][col]) < 1e-300:
            raise ZeroDivisionError("dependent working set")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        for r in range(col + 1, m):
            f = aug[r][col] / p
            if f != 0.0:
                for c in range(col, m + 1):
                    aug[r][c] -= f * aug[col][c]
    out = [0.0] * m
    for r in range(m - 1, -1, -1):
        acc = aug[r][m]
        for c in range(r + 1, m):
            acc -= aug[r][c] * out[c]
        out[r] = acc / aug[r][r]
    return out


def expand_rows(rows: Sequence[Row], lo: Sequence[float], hi: Sequence[float]):
    """Turn two-sided rows into one-sided ``a . e >= b`` constraints.

    Constraint ``2*i`` is the lower side of row ``i`` and ``2*i + 1`` the
    upper side; infinite bounds are kept but never become active.
    """
    a: list[Row] = []
    b: list[float] = []
    for r, l, h in zip(rows, lo, hi):
        a.append((r[0], r[1], r[2]))
        b.append(l)
        a.append((-r[0], -r[1], -r[2]))
        b.append(-h)
    return a, b


def _solve_sym(s: list[list[float]], rhs: list[float]) -> list[float]:
    m = len(rhs)
    if m == 1:
        return [rhs[0] / s[0][0]]
    if m == 2:
        det = s[0][0] * s[1][1] - s[0][1] * s[1][0]
        if det == 0.0:
            raise ZeroDivisionError("dependent working set")
        return [(rhs[0] * s[1][1] - s[0][1] * rhs[1]) / det,
                (s[0][0] * rhs[1] - rhs[0] * s[1][0]) / det]
    return _solve_small(s, rhs)


class ActiveSetQP:
    """Primal active-set method for a QP with fixed constraint normals.

    ``rows`` are the two-sided constraint rows; each is expanded into a
    lower (index 2i) and an upper (index 2i+1) one-sided constraint.  The
    Hessian inverse and every product a_i . G a_j are tabulated once, so an
    iteration costs a lookup plus an m x m solve (m <= 3).  Zero weights
    make the Hessian singular and are floored at ``weight_floor``; below
    ``direct_below`` the tabulated G is too large to use and each step
    solves the full KKT system instead.
    """

    weight_floor = 1e-12
    direct_below = 1e-2

    def __init__(self, rows: Sequence[Row], w1: float = 1.0, w2: float = 1.0,
                 max_iter: int = 60):
        if w1 < 0 or w2 < 0:
            raise ValueError("QP weights must be non-negative")
        self.w1 = max(w1, self.weight_floor)
        self.w2 = max(w2, self.weight_floor)
        self.max_iter = max_iter
        self._q2 = [[2.0 * v for v in row] for row in objective_matrix(self.w1, self.w2)]
        self._direct = min(self.w1, self.w2) < self.direct_below
        qinv = _inverse3(objective_matrix(self.w1, self.w2))
        # argmin e^T Q e s.t. A e = b is e = G A^T lam with G = Q^-1 / 2
        g = [[0.5 * v for v in row] for row in qinv]
        self.normals, _ = expand_rows(rows, [0.0] * len(rows), [0.0] * len(rows))
        self._ga = [tuple(g[r][0] * a[0] + g[r][1] * a[1] + g[r][2] * a[2] for r in range(3))
                    for a in self.normals]
        self._s = [[ai[0] * ga[0] + ai[1] * ga[1] + ai[2] * ga[2] for ga in self._ga]
                   for ai in self.normals]
        self.warm: tuple[int, ...] = ()

    def bounds(self, lo: Sequence[float], hi: Sequence[float]) -> list[float]:
        b = []
        for l, h in zip(lo, hi):
            b.append(l)
            b.append(-h)
        return b

    def _eqp(self, work, b):
        if self._direct:
            return self._eqp_direct(work, b)
        s = self._s
        lam = _solve_sym([[s[i][j] for j in work] for i in work], [b[i] for i in work])
        x = [0.0, 0.0, 0.0]
        for lj, j in zip(lam, work):
            ga = self._ga[j]
            x[0] += lj * ga[0]
            x[1] += lj * ga[1]
            x[2] += lj * ga[2]
        return x, lam

    def _eqp_direct(self, work, b):
        # Full KKT system in e and lambda.  Slower, but it never forms the
        # large entries of G, which cancel badly when a weight is tiny.
        q2 = self._q2
        a = self.normals
        m = len(work)
        rows = [q2[r] + [-a[j][r] for j in work] for r in range(3)]
        rows += [list(a[j]) + [0.0] * m for j in work]
        sol = _solve_small(rows, [0.0, 0.0, 0.0] + [b[j] for j in work])
        return sol[:3], sol[3:]

    def _kkt_ok(self, x, lam, b, tol):
        if lam and min(lam) < -tol:
            return False
        for ai, bi in zip(self.normals, b):
            if ai[0] * x[0] + ai[1] * x[1] + ai[2] * x[2] < bi - tol:
                return False
        return True

    def solve(self, b: Sequence[float], start: Sequence[float], tol: float = 1e-12) -> QPSolution:
        """Minimize subject to ``normals[i] . e >= b[i]`` from a feasible ``start``.

        The working set of the previous call is tried first; it is accepted
        only if it satisfies every KKT condition.
        """
        a = self.normals
        if self.warm:
            try:
                x, lam = self._eqp(self.warm, b)
            except ZeroDivisionError:
                pass
            else:
                if self._kkt_ok(x, lam, b, tol):
                    return QPSolution((x[0], x[1], x[2]), self.warm, tuple(lam), 0)

        n_con = len(a)
        x = [float(start[0]), float(start[1]), float(start[2])]
        for i in range(n_con):
            ai = a[i]
            if ai[0] * x[0] + ai[1] * x[1] + ai[2] * x[2] < b[i] - tol:
                raise QPInfeasible(f"start point violates constraint {i}")

        work: list[int] = []
        for it in range(1, self.max_iter + 1):
            if work:
                xh, lam = self._eqp(work, b)
            else:
                xh, lam = [0.0, 0.0, 0.0], []
            p = [xh[0] - x[0], xh[1] - x[1], xh[2] - x[2]]
            scale = 1.0 + abs(x[0]) + abs(x[1]) + abs(x[2])
            if abs(p[0]) + abs(p[1]) + abs(p[2]) <= 1e-14 * scale:
                if not lam or min(lam) >= -1e-14 * scale:
                    self.warm = tuple(work)
                    return QPSolution((xh[0], xh[1], xh[2]), tuple(work), tuple(lam), it)
                work.pop(min(range(len(lam)), key=lam.__getitem__))
                continue

            alpha = 1.0
            block = -1
            # constraints in the span of the working set have a.p == 0 up to
            # rounding; they must never block or the working set turns singular
            flat = -1e-12 * (abs(p[0]) + abs(p[1]) + abs(p[2]))
            for i in range(n_con):
                ai = a[i]
                ap = ai[0] * p[0] + ai[1] * p[1] + ai[2] * p[2]
                if ap < flat and i not in work:
                    slack = ai[0] * x[0] + ai[1] * x[1] + ai[2] * x[2] - b[i]
                    t = (slack if slack > 0.0 else 0.0) / -ap
                    if t < alpha:
                        alpha = t
                        block = i
            if block < 0:
                x = xh
            else:
                x = [x[0] + alpha * p[0], x[1] + alpha * p[1], x[2] + alpha * p[2]]
                work.append(block)
        raise QPInfeasible(f"active-set iteration cap ({self.max_iter}) reached")


def kkt_residual(sol: QPSolution, a: Sequence[Row], b: Sequence[float],
                 w1: float, w2: float) -> float:
    """Largest violation among stationarity, dual and primal feasibility,
    and complementary slackness for a returned solution."""
    q = objective_matrix(w1, w2)
    e = sol.e
    grad = [2.0 * sum(q[r][c] * e[c] for c in range(3)) for r in range(3)]
    for lam_i, i in zip(sol.multipliers, sol.active):
        for r in range(3):
            grad[r] -= lam_i * a[i][r]
    res = max(abs(v) for v in grad)
    if sol.multipliers:
        res = max(res, -min(sol.multipliers))
    for lam_i, i in zip(sol.multipliers, sol.active):
        slack = sum(a[i][r] * e[r] for r in range(3)) - b[i]
        res = max(res, abs(lam_i * slack))
    for i in range(len(a)):
        if math.isfinite(b[i]):
            res = max(res, b[i] - sum(a[i][r] * e[r] for r in range(3)))
    return res
