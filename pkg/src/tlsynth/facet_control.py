"""Facet reachability controllers on rectangles and their exit-time bounds.

For a rectangle and a set of exit facets, each vertex gets a control from a
small LP: push as fast as possible towards a target exit facet while
keeping a margin ``eps`` of inward speed on every non-exit facet through
that vertex.  The multi-affine interpolation of the vertex controls is the
feedback law.  Exit times are bounded by comparing with a one-dimensional
system whose speed varies linearly between the slowest vertex speeds on the
target facet and on its opposite facet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import ControlSystem, Facet, Rect, facet_vertices, facets_of_vertex, interpolate
from .lp import LinearProgram, LPError, lp_solve

ExitSet = tuple[Facet, ...]

LIMIT_RTOL = 1e-9


class LPUnbounded(LPError):
    pass


def exit_set(facets: Iterable[Facet]) -> ExitSet:
    es = tuple(sorted(set(facets)))
    if not es:
        raise ValueError("an exit set must be non-empty")
    return es


def exit_set_str(es: ExitSet) -> str:
    return "{" + ",".join(str(f) for f in es) + "}"


def parse_exit_set(text: str) -> ExitSet:
    text = text.strip().strip("{}")
    return exit_set(Facet.parse(t) for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class Controller:
    rect: Rect
    exit_set: ExitSet
    vertex_controls: np.ndarray  # (2^N, m), row v is u at vertex selector v
    bound_facet: Facet
    time_bound: float
    per_facet_bounds: Mapping[Facet, float]
    epsilon: float
    speeds: np.ndarray = field(repr=False, default=None)  # speeds toward bound_facet per vertex

    def feedback(self, x, check: bool = True) -> np.ndarray:
        return feedback(self, x, check=check)


def _vertex_program(sys: ControlSystem, hv: np.ndarray, target: Facet,
                    non_exit: Sequence[Facet], eps: float) -> LinearProgram:
    n = sys.n
    rows, rhs = [], []
    for f in non_exit:
        nf = f.normal(n)
        rows.append(nf @ sys.B)
        rhs.append(-eps - nf @ hv)
    U = sys.U
    if U.G:
        rows.extend(np.asarray(U.G, dtype=float))
        rhs.extend(U.g)
    return LinearProgram(
        objective=target.normal(n) @ sys.B,
        A=np.array(rows).reshape(-1, sys.m),
        b=np.array(rhs, dtype=float),
        lo=None if U.lo is None else np.asarray(U.lo),
        hi=None if U.hi is None else np.asarray(U.hi),
    )


def _solve_vertex(sys, hv, target, non_exit, eps):
    res = lp_solve(_vertex_program(sys, hv, target, non_exit, eps))
    if res.status == "unbounded":
        raise LPUnbounded("vertex LP is unbounded; the input set U must be bounded")
    if res.status == "infeasible":
        return None
    return res.x


def vertex_lp(sys: ControlSystem, r: Rect, v: int, target: Facet, exits: Iterable[Facet],
              eps: float) -> np.ndarray | None:
    """Control at vertex ``v`` maximizing the speed towards ``target``.

    Subject to n_F'.(h(v) + B u) <= -eps for every facet F' through ``v``
    outside ``exits``, and u in U.  Returns ``None`` when infeasible.
    """
    exits = set(exits)
    if target not in exits:
        raise ValueError("target facet must belong to the exit set")
    if eps <= 0:
        raise ValueError("eps must be positive")
    hv = sys.h.eval(r.vertex(v))
    non_exit = [f for f in facets_of_vertex(r, v) if f not in exits]
    return _solve_vertex(sys, hv, target, non_exit, eps)


def vertex_speeds(sys: ControlSystem, r: Rect, controls: np.ndarray, f: Facet) -> np.ndarray:
    """n_f.(h(v) + B u_v) for every vertex."""
    pts = np.array([r.vertex(v) for v in range(1 << r.dim)])
    vel = sys.h.eval(pts) + controls @ sys.B.T
    return f.sign * vel[:, f.axis]


def _min_speeds(r: Rect, f: Facet, speeds) -> tuple[float, float]:
    s_near = min(float(speeds[v]) for v in facet_vertices(r, f))
    s_far = min(float(speeds[v]) for v in facet_vertices(r, f.opposite))
    return s_near, s_far


def slow_exit_time(width: float, s_near: float, s_far: float, start: float = 0.0) -> float:
    """Time for p' = s_far + (s_near - s_far) p / width to go from ``start`` to ``width``.

    ``s_near`` is the speed at the target facet (p = width), ``s_far`` at the
    opposite facet (p = 0).  Both must be positive.
    """
    if s_near <= 0 or s_far <= 0:
        return math.inf
    ds = s_near - s_far
    s_start = s_far + ds * start / width
    if abs(ds) <= LIMIT_RTOL * max(s_near, s_far):
        return (width - start) / s_start
    # ln(s_near / s_start) * width / ds, written to stay accurate for small ds
    return math.log1p((s_near - s_start) / s_start) * width / ds


def time_bound_single(r: Rect, f: Facet, speeds) -> float:
    """Upper bound on the time to leave ``r`` through ``f``; inf if some speed is not positive."""
    s_near, s_far = _min_speeds(r, f, speeds)
    if s_near <= 0 or s_far <= 0:
        return math.inf
    return slow_exit_time(r.b[f.axis] - r.a[f.axis], s_near, s_far)


def time_bound_conservative(r: Rect, f: Facet, speeds) -> float:
    s_near, s_far = _min_speeds(r, f, speeds)
    if s_near <= 0 or s_far <= 0:
        return math.inf
    return (r.b[f.axis] - r.a[f.axis]) / min(s_near, s_far)


class _VertexCache:
    """Memo of vertex LPs for one rectangle, shared by all exit sets."""

    def __init__(self, sys: ControlSystem, r: Rect, eps: float):
        self.sys, self.r, self.eps = sys, r, eps
        pts = np.array([r.vertex(v) for v in range(1 << r.dim)])
        self.h = sys.h.eval(pts)
        self.memo: dict = {}

    def solve(self, v: int, target: Facet, non_exit: tuple[Facet, ...]):
        key = (v, target, non_exit)
        if key not in self.memo:
            self.memo[key] = _solve_vertex(self.sys, self.h[v], target, non_exit, self.eps)
        return self.memo[key]


def _synthesize(cache: _VertexCache, exits: ExitSet) -> Controller | None:
    r, sys = cache.r, cache.sys
    exits_set = set(exits)
    non_exit = [tuple(f for f in facets_of_vertex(r, v) if f not in exits_set)
                for v in range(1 << r.dim)]
    per_facet: dict[Facet, float] = {}
    best = None
    for target in exits:
        controls = []
        for v in range(1 << r.dim):
            u = cache.solve(v, target, non_exit[v])
            if u is None:
                return None
            controls.append(u)
        controls = np.array(controls)
        vel = cache.h + controls @ sys.B.T
        speeds = target.sign * vel[:, target.axis]
        t = time_bound_single(r, target, speeds)
        per_facet[target] = t
        if best is None or t < best[0]:
            best = (t, target, controls, speeds)
    t, target, controls, speeds = best
    if not math.isfinite(t):
        return None
    return Controller(rect=r, exit_set=exits, vertex_controls=controls, bound_facet=target,
                      time_bound=t, per_facet_bounds=per_facet, epsilon=cache.eps, speeds=speeds)


def synthesize(sys: ControlSystem, r: Rect, exits: Iterable[Facet], eps: float) -> Controller | None:
    """Multi-affine controller driving ``r`` out through ``exits``, or ``None``.

    Among the exit facets, the one with the smallest time bound fixes the
    vertex controls; ties go to the smallest (axis, sign).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _synthesize(_VertexCache(sys, r, eps), exit_set(exits))


def synthesize_many(sys: ControlSystem, r: Rect, exit_sets: Iterable[ExitSet],
                    eps: float) -> dict[ExitSet, Controller | None]:
    """:func:`synthesize` for several exit sets of one rectangle, sharing vertex LPs."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    cache = _VertexCache(sys, r, eps)
    return {es: _synthesize(cache, es) for es in exit_sets}


def synthesize_relaxed(sys: ControlSystem, r: Rect, exits: Iterable[Facet], eps: float) -> Controller | None:
    """Like :func:`synthesize` but allows ``eps = 0`` (bound-tightness studies only)."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return _synthesize(_VertexCache(sys, r, eps), exit_set(exits))


def feedback(ctrl: Controller, x, check: bool = True) -> np.ndarray:
    return interpolate(ctrl.rect, ctrl.vertex_controls, x, check=check)
