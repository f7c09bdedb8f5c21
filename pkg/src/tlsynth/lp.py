"""Small dense linear programs: maximize c.u subject to A u <= b and box bounds.

Problems here have a handful of variables and rows, so a textbook two-phase
tableau simplex with Bland's rule is plenty.  One-variable programs (the
common single-input case) are solved exactly by intersecting intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-12


class LPError(RuntimeError):
    pass


class LPNumericalError(LPError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (max constraint residual {residual:.3e})")
        self.residual = residual


@dataclass
class LinearProgram:
    """maximize objective.u  s.t.  A u <= b,  lo <= u <= hi."""

    objective: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float))
        m = self.objective.size
        self.A = np.zeros((0, m)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, m)
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        self.lo = np.full(m, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float).reshape(m)
        self.hi = np.full(m, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).reshape(m)
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b row counts differ")
        for arr in (self.objective, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")
        if np.any(self.lo > self.hi):
            raise ValueError("inconsistent bounds: lo > hi")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def residual(self, u: np.ndarray) -> float:
        r = [0.0]
        if self.A.size:
            r.append(float(np.max(self.A @ u - self.b)))
        r.append(float(np.max(self.lo - u)))
        r.append(float(np.max(u - self.hi)))
        return max(r)


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None
    pivots: int = field(default=0, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def lp_solve(lp: LinearProgram) -> LPResult:
    if lp.n_vars == 1:
        res = _solve_1d(lp)
    else:
        res = _solve_simplex(lp)
    if res.ok:
        resid = lp.residual(res.x)
        if resid > FEAS_TOL:
            raise LPNumericalError("simplex returned an infeasible point", resid)
    return res


def _solve_1d(lp: LinearProgram) -> LPResult:
    lo, hi = float(lp.lo[0]), float(lp.hi[0])
    for row, rhs in zip(lp.A[:, 0], lp.b):
        if row > 0:
            hi = min(hi, rhs / row)
        elif row < 0:
            lo = max(lo, rhs / row)
        elif rhs < -FEAS_TOL:
            return LPResult("infeasible")
    if lo > hi:
        if lo - hi > FEAS_TOL * max(1.0, abs(lo)):
            return LPResult("infeasible")
        hi = lo
    c = float(lp.objective[0])
    if c > 0:
        u = hi
    elif c < 0:
        u = lo
    else:
        u = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
    if not np.isfinite(u):
        return LPResult("unbounded")
    x = np.array([u])
    return LPResult("optimal", x, c * u)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run(T: np.ndarray, basis: list[int], allowed: int) -> tuple[str, int]:
    """Maximize with Bland's rule.  The last row holds reduced costs, the last column the rhs."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        obj = T[-1, :allowed]
        entering = next((j for j in range(allowed) if obj[j] < -_PIVOT_TOL), None)
        if entering is None:
            return "optimal", pivots
        col = T[:m, entering]
        best = None
        for i in range(m):
            if col[i] > _PIVOT_TOL:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best[0] - 1e-15 or (abs(ratio - best[0]) <= 1e-15 and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", pivots
        _pivot(T, best[1], entering)
        basis[best[1]] = entering
        pivots += 1
        if pivots > 10_000:
            raise LPError("simplex failed to terminate")


def _solve_simplex(lp: LinearProgram) -> LPResult:
    n = lp.n_vars
    # u = shift + S y with y >= 0; columns of S are +-e_k, free variables get two columns
    cols, shift = [], np.zeros(n)
    extra_rows, extra_rhs = [], []
    for k in range(n):
        lo, hi = lp.lo[k], lp.hi[k]
        e = np.zeros(n)
        e[k] = 1.0
        if np.isfinite(lo):
            shift[k] = lo
            cols.append(e)
            if np.isfinite(hi):
                extra_rows.append(len(cols) - 1)
                extra_rhs.append(hi - lo)
        elif np.isfinite(hi):
            shift[k] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    S = np.array(cols).T  # n x p
    p = S.shape[1]
    A = lp.A @ S
    b = lp.b - lp.A @ shift
    if extra_rows:
        E = np.zeros((len(extra_rows), p))
        E[np.arange(len(extra_rows)), extra_rows] = 1.0
        A = np.vstack([A, E])
        b = np.concatenate([b, extra_rhs])
    c = S.T @ lp.objective
    m = A.shape[0]

    neg = b < 0
    k = int(neg.sum())
    # columns: y (p), slacks (m), artificials (k), rhs
    T = np.zeros((m + 1, p + m + k + 1))
    T[:m, :p] = A
    T[:m, p:p + m] = np.eye(m)
    T[:m, -1] = b
    T[:m][neg] *= -1.0
    basis = []
    art = p + m
    for i in range(m):
        if neg[i]:
            T[i, art] = 1.0
            basis.append(art)
            art += 1
        else:
            basis.append(p + i)

    ncols = p + m
    pivots = 0
    if k:
        # phase 1: maximize -sum(artificials)
        T[-1, :] = 0.0
        T[-1, p + m:p + m + k] = 1.0
        for i in range(m):
            if neg[i]:
                T[-1] -= T[i]
        _, pv = _run(T, basis, p + m + k)
        pivots += pv
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max())):
            return LPResult("infeasible", pivots=pivots)
        # drive zero-level artificials out of the basis
        for i in range(m):
            if basis[i] >= p + m:
                j = next((j for j in range(p + m) if abs(T[i, j]) > _PIVOT_TOL), None)
                if j is not None:
                    _pivot(T, i, j)
                    basis[i] = j
        keep = [i for i in range(m) if basis[i] < p + m]
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.delete(T, np.s_[ncols:ncols + k], axis=1)

    T[-1, :] = 0.0
    T[-1, :p] = -c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    status, pv = _run(T, basis, ncols)
    pivots += pv
    if status == "unbounded":
        return LPResult("unbounded", pivots=pivots)
    y = np.zeros(ncols)
    for i, j in enumerate(basis):
        y[j] = T[i, -1]
    u = shift + S @ y[:p]
    return LPResult("optimal", u, float(lp.objective @ u), pivots=pivots)
