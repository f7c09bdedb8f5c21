"""Closed-loop simulation under the switched multi-affine feedback.

Inside a cell the vertex controls of the active controller are interpolated
and the ODE is stepped with fixed-step RK4.  A crossing of an exit facet is
located by bisection on the step length and the state is snapped onto the
facet before switching to the neighbouring cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from .abstraction import WTS
from .facet_control import Controller, ExitSet
from .formula import Formula, satisfied_by_prefix
from .geometry import ControlSystem, Facet, PartitionGrid, all_facets
from .synthesis import StrategyAutomaton

NON_EXIT_BAND = 1e-7

VERDICTS = ("accepted-in-time", "accepted-late", "violated-exit", "not-accepted")


class SimulationError(RuntimeError):
    pass


class NonExitCrossing(SimulationError):
    pass


class MaxTimeExceeded(SimulationError):
    pass


@dataclass(frozen=True)
class SimConfig:
    step: float = 1e-3
    event_tol: float = 1e-9
    max_time: float | None = None  # None means 10 * T

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not 0 < self.event_tol < self.step:
            raise ValueError("event_tol must lie in (0, step)")
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError("max_time must be positive")


@dataclass(frozen=True)
class Segment:
    cell: int
    aut_state: int
    exit_set: ExitSet
    t_enter: float
    t_exit: float
    exit_facet: Facet | None

    @property
    def duration(self) -> float:
        return self.t_exit - self.t_enter


@dataclass
class Trajectory:
    samples: list[tuple[float, np.ndarray, int, int]] = field(default_factory=list)  # (t, x, cell, aut state)
    segments: list[Segment] = field(default_factory=list)
    word: list[int] = field(default_factory=list)
    total_time: float = 0.0
    verdict: str = "not-accepted"


@dataclass
class CellExits:
    """Per-start outcome of running one controller until its rectangle is left."""

    time: np.ndarray        # exit time (inf if none before the horizon)
    point: np.ndarray       # state at exit, snapped onto the facet
    facet: list[Facet | None]
    violation: np.ndarray   # largest outward distance seen on a non-exit facet


class _Batch:
    """Closed-loop vector fields of several controllers, one per row."""

    def __init__(self, sys: ControlSystem, ctrls: Sequence[Controller]):
        n = sys.n
        self.sys = sys
        self.facets = all_facets(n)
        self.axes = np.array([f.axis for f in self.facets])
        self.signs = np.array([f.sign for f in self.facets], dtype=float)
        self.lo = np.array([c.rect.lo for c in ctrls])
        self.hi = np.array([c.rect.hi for c in ctrls])
        self.w = self.hi - self.lo
        self.V = np.array([np.asarray(c.vertex_controls, dtype=float) for c in ctrls])
        self.offsets = np.array([[c.rect.facet_offset(f) for f in self.facets] for c in ctrls])
        self.is_exit = np.array([[f in c.exit_set for f in self.facets] for c in ctrls])
        self.bits = np.array([[v >> i & 1 for i in range(n)] for v in range(1 << n)], dtype=bool)

    def field(self, x, rows):
        t = (x - self.lo[rows]) / self.w[rows]
        wts = np.where(self.bits[None], t[:, None, :], 1.0 - t[:, None, :]).prod(axis=2)
        u = np.einsum("kv,kvm->km", wts, self.V[rows])
        return self.sys.h.eval(x) + u @ self.sys.B.T

    def rk4(self, x, rows, h):
        h = np.asarray(h, dtype=float).reshape(-1, 1) if np.ndim(h) else h
        k1 = self.field(x, rows)
        k2 = self.field(x + 0.5 * h * k1, rows)
        k3 = self.field(x + 0.5 * h * k2, rows)
        k4 = self.field(x + h * k3, rows)
        return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def dist(self, x, rows):
        """Signed distance beyond each facet (positive means outside)."""
        return self.signs * (x[:, self.axes] - self.offsets[rows])

    def exit_dist(self, x, rows):
        return np.where(self.is_exit[rows], self.dist(x, rows), -np.inf).max(axis=1)

    def nonexit_dist(self, x, rows):
        return np.where(self.is_exit[rows], -np.inf, self.dist(x, rows)).max(axis=1, initial=-np.inf)


def run_cells(sys: ControlSystem, ctrls: Sequence[Controller], x0, cfg: SimConfig, horizon: float,
              record: list | None = None, t0: float = 0.0) -> CellExits:
    """Integrate row ``i`` of ``x0`` under ``ctrls[i]`` until it hits one of its exit facets.

    Non-exit overshoot up to ``NON_EXIT_BAND`` is clamped back into the cell;
    larger overshoot is reported in ``violation`` and left to the caller.
    ``record`` collects ``(t, x)`` after every step (single-row runs only).
    """
    n = sys.n
    x = np.array(x0, dtype=float).reshape(-1, n)
    k = len(x)
    if len(ctrls) != k:
        raise ValueError("one controller per start point required")
    b = _Batch(sys, ctrls)
    times = np.full(k, math.inf)
    points = x.copy()
    exit_facet: list[Facet | None] = [None] * k
    violation = np.zeros(k)
    t = np.full(k, float(t0))
    active = np.arange(k)
    h = cfg.step
    if record is not None:
        record.append((float(t0), x[0].copy()))
    while active.size:
        xa = x[active]
        xn = b.rk4(xa, active, h)
        crossed = b.exit_dist(xn, active) > 0
        if crossed.any():
            idx = active[crossed]
            xc = xa[crossed]
            lo_t = np.zeros(len(idx))
            hi_t = np.full(len(idx), h)
            while np.any(hi_t - lo_t > cfg.event_tol):
                mid = 0.5 * (lo_t + hi_t)
                out = b.exit_dist(b.rk4(xc, idx, mid), idx) > 0
                hi_t = np.where(out, mid, hi_t)
                lo_t = np.where(out, lo_t, mid)
            xe = b.rk4(xc, idx, hi_t)
            d = np.where(b.is_exit[idx], b.dist(xe, idx), -np.inf)
            which = np.argmax(d, axis=1)
            for j, (i, fi) in enumerate(zip(idx, which)):
                xe[j, b.axes[fi]] = b.offsets[i, fi]
                exit_facet[i] = b.facets[fi]
            violation[idx] = np.maximum(violation[idx], b.nonexit_dist(xe, idx))
            xe = np.clip(xe, b.lo[idx], b.hi[idx])
            times[idx] = t[idx] + hi_t
            points[idx] = xe
            x[idx] = xe
            if record is not None:
                record.append((float(times[0]), xe[0].copy()))
        stay = ~crossed
        idx = active[stay]
        if idx.size:
            xs = xn[stay]
            violation[idx] = np.maximum(violation[idx], b.nonexit_dist(xs, idx))
            x[idx] = np.clip(xs, b.lo[idx], b.hi[idx])
            t[idx] += h
            if record is not None:
                record.append((float(t[0]), x[0].copy()))
        active = idx[t[idx] < horizon]
    unfinished = np.isinf(times)
    points[unfinished] = x[unfinished]
    return CellExits(times, points, exit_facet, violation)


def run_cell(sys: ControlSystem, ctrl: Controller, x0, cfg: SimConfig, horizon: float,
             record: list | None = None, t0: float = 0.0) -> CellExits:
    """:func:`run_cells` with one controller for every start point."""
    x = np.array(x0, dtype=float).reshape(-1, sys.n)
    return run_cells(sys, [ctrl] * len(x), x, cfg, horizon, record=record, t0=t0)


def simulate(sys: ControlSystem, grid: PartitionGrid, strategy: StrategyAutomaton,
             controllers: Mapping[tuple[int, ExitSet], Controller], x0, cfg: SimConfig = SimConfig(),
             strict: bool = True) -> Trajectory:
    """Run the switched closed loop from ``x0`` until acceptance or failure.

    With ``strict`` a non-exit crossing beyond the tolerance band raises
    :class:`NonExitCrossing`; otherwise the verdict becomes ``violated-exit``.
    """
    T = strategy.T
    max_time = cfg.max_time if cfg.max_time is not None else 10.0 * T
    x = np.asarray(x0, dtype=float).copy()
    q = grid.locate(x)
    s = strategy.initial
    traj = Trajectory()
    t = 0.0
    if q is None:
        return traj
    traj.samples.append((t, x.copy(), q, s))
    while True:
        if s in strategy.finals:
            traj.verdict = "accepted-in-time" if t < T else "accepted-late"
            break
        es = strategy.output(s, q)
        if es is None:
            traj.verdict = "not-accepted"
            break
        ctrl = controllers[(q, es)]
        rec: list = []
        res = run_cell(sys, ctrl, x, cfg, horizon=max_time, record=rec, t0=t)
        for tk, xk in rec[1:-1]:
            traj.samples.append((tk, xk, q, s))
        if res.violation[0] > NON_EXIT_BAND:
            if strict:
                raise NonExitCrossing(
                    f"left cell {q} through a non-exit facet by {res.violation[0]:.3e} under {es}")
            traj.verdict = "violated-exit"
            break
        t_exit = float(res.time[0])
        if not math.isfinite(t_exit):
            raise MaxTimeExceeded(f"no exit from cell {q} before t = {max_time}")
        facet = res.facet[0]
        traj.segments.append(Segment(q, s, es, t, t_exit, facet))
        traj.word.append(grid.label(q))
        t = t_exit
        x = res.point[0]
        s = strategy.delta(s, q)
        q = grid.neighbor(q, facet)
        traj.total_time = t
        traj.samples.append((t, x.copy(), q, s))
        if s == strategy.aut.sink:
            traj.verdict = "not-accepted"
            break
    traj.total_time = t
    return traj


def check_word(traj: Trajectory, phi: Formula, T: float) -> str:
    """Verdict from the word and duration alone, using the finite-trace semantics."""
    if not traj.word or not satisfied_by_prefix(traj.word, phi):
        return "not-accepted"
    return "accepted-in-time" if traj.total_time < T else "accepted-late"


def per_segment_bound_check(traj: Trajectory, wts: WTS, rtol: float = 1e-3) -> bool:
    """Every cell visit lasts no longer than the weight of the transition taken."""
    return all(seg.duration <= wts.weight(seg.cell, seg.exit_set) * (1 + rtol)
               for seg in traj.segments)


def write_csv(traj: Trajectory, out: TextIO, names: Sequence[str] | None = None) -> None:
    n = len(traj.samples[0][1]) if traj.samples else 0
    names = list(names) if names else [f"x{i + 1}" for i in range(n)]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", *names, "cell", "aut_state"])
    for t, x, q, s in traj.samples:
        w.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in x), q, s])


def sample_starts(rects: Sequence, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` points uniform over a union of disjoint boxes."""
    if not rects:
        raise ValueError("cannot sample from an empty region")
    vols = np.array([r.volume for r in rects])
    picks = rng.choice(len(rects), size=k, p=vols / vols.sum())
    lo = np.array([rects[i].lo for i in picks])
    hi = np.array([rects[i].hi for i in picks])
    return lo + rng.random(lo.shape) * (hi - lo)
