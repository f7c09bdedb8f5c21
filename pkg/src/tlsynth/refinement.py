"""Grid refinement by particle swarm search over new threshold positions.

Each refinement round looks at every pair of consecutive thresholds more
than ``2d`` apart (a slot) and gives it one optimization variable in
``[lo, hi - d]``.  Values in the lower band ``[lo, lo + d)`` mean "do not
split"; anything else is inserted as a new threshold.  A swarm maximizes the
winning-set volume of the decoded grid, the best grid is adopted, and rounds
repeat until there are no slots left or the best volume stops changing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .abstraction import MODES, ControllerCache
from .formula import SpecAutomaton
from .geometry import THRESHOLD_TOL, ControlSystem, PartitionGrid
from .pipeline import synthesize_strategy

UNCHANGED_TOL = 1e-9


@dataclass(frozen=True)
class RefinementConfig:
    d: float
    T: float
    eps: float
    mode: str = "full"
    swarm_size: int = 20
    pso_iters: int = 30
    inertia: float = 0.729
    cognitive: float = 1.494
    social: float = 1.494
    seed: int = 0
    max_rounds: int = 25
    max_exit_size: int | None = None

    def __post_init__(self):
        if not self.d > 0 or not self.T > 0 or not self.eps > 0:
            raise ValueError("d, T and eps must be positive")
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if self.pso_iters < 0 or self.max_rounds < 0:
            raise ValueError("iteration counts must be non-negative")
        if min(self.inertia, self.cognitive, self.social) <= 0:
            raise ValueError("PSO coefficients must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Slot:
    dim: int
    index: int  # gap between thresholds[dim][index] and thresholds[dim][index + 1]
    lo: float
    hi: float   # upper end of the variable range, i.e. the next threshold minus d


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_value: float
    rng: np.random.Generator = field(repr=False)


@dataclass
class RoundLog:
    n_slots: int
    best_volume: float
    thresholds: tuple[tuple[float, ...], ...]
    evaluations: int


@dataclass
class RefinementResult:
    grid: PartitionGrid
    volume: float
    history: list[float]          # best volume after 0, 1, 2, ... rounds
    rounds: list[RoundLog]
    grids: list[PartitionGrid]    # initial grid followed by every adopted grid
    evaluated: dict[tuple, float] = field(default_factory=dict)  # thresholds -> volume, every grid tried

    def log_text(self) -> str:
        lines = [f"round 0 slots - dim - volume {self.history[0]:.17g}"]
        for k, r in enumerate(self.rounds, 1):
            lines.append(f"round {k} slots {r.n_slots} dim {r.n_slots} volume {r.best_volume:.17g}")
        for j, t in enumerate(self.grid.thresholds):
            lines.append(f"thresholds x{j + 1} " + " ".join(f"{v:.17g}" for v in t))
        return "\n".join(lines) + "\n"


def candidate_slots(grid: PartitionGrid, d: float) -> list[Slot]:
    """Gaps wider than ``2d`` (beyond rounding noise), in (dimension, index) order."""
    slots = []
    for j, t in enumerate(grid.thresholds):
        for i, (a, b) in enumerate(zip(t, t[1:])):
            if b - a > 2 * d + THRESHOLD_TOL:
                slots.append(Slot(j, i, a, b - d))
    return slots


def decode(position, grid: PartitionGrid, slots: list[Slot], d: float) -> PartitionGrid:
    """Insert the value of every slot whose entry clears the no-split band."""
    position = np.asarray(position, dtype=float)
    if position.shape != (len(slots),):
        raise ValueError("one position entry per slot required")
    new = [list(t) for t in grid.thresholds]
    changed = False
    for s, v in zip(slots, position):
        if s.lo + d <= v <= s.hi:
            new[s.dim].append(float(v))
            changed = True
    if not changed:
        return grid
    return grid.refined(new)


def objective(sys: ControlSystem, grid: PartitionGrid, aut: SpecAutomaton, cfg: RefinementConfig,
              cache: ControllerCache | None = None) -> float:
    """Winning-set volume of ``grid`` in the configured mode."""
    res = synthesize_strategy(sys, grid, aut, cfg.T, cfg.eps, cfg.mode, cache=cache,
                              max_exit_size=cfg.max_exit_size)
    return res.volume


def _swarm(n_round: int, slots: list[Slot], cfg: RefinementConfig,
           evaluate: Callable[[np.ndarray], float]) -> tuple[np.ndarray, float]:
    lo = np.array([s.lo for s in slots])
    hi = np.array([s.hi for s in slots])
    vmax = (hi - lo) / 2
    seq = np.random.SeedSequence(cfg.seed, spawn_key=(n_round,))
    particles = []
    for k, child in enumerate(seq.spawn(cfg.swarm_size)):
        rng = np.random.default_rng(child)
        # particle 0 starts at "no split anywhere" so the current grid is always in the race
        pos = lo.copy() if k == 0 else rng.uniform(lo, hi)
        vel = rng.uniform(-vmax, vmax)
        val = evaluate(pos)
        particles.append(Particle(pos, vel, pos.copy(), val, rng))
    best = max(range(len(particles)), key=lambda k: (particles[k].best_value, -k))
    g_pos, g_val = particles[best].best_position.copy(), particles[best].best_value
    for _ in range(cfg.pso_iters):
        for p in particles:
            r1 = p.rng.random(len(slots))
            r2 = p.rng.random(len(slots))
            p.velocity = (cfg.inertia * p.velocity
                          + cfg.cognitive * r1 * (p.best_position - p.position)
                          + cfg.social * r2 * (g_pos - p.position))
            p.velocity = np.clip(p.velocity, -vmax, vmax)
            p.position = np.clip(p.position + p.velocity, lo, hi)
            val = evaluate(p.position)
            if val > p.best_value:
                p.best_value, p.best_position = val, p.position.copy()
        # synchronous global update keeps the result independent of evaluation order
        for p in particles:
            if p.best_value > g_val:
                g_val, g_pos = p.best_value, p.best_position.copy()
    return g_pos, g_val


def refine(sys: ControlSystem, grid: PartitionGrid, aut: SpecAutomaton, cfg: RefinementConfig,
           cache: ControllerCache | None = None, progress: Callable[[str], None] | None = None
           ) -> RefinementResult:
    cache = cache if cache is not None else ControllerCache()
    memo: dict[tuple, float] = {}

    def volume_of(g: PartitionGrid) -> float:
        key = g.thresholds
        if key not in memo:
            memo[key] = objective(sys, g, aut, cfg, cache)
        return memo[key]

    current = grid
    best = volume_of(current)
    history, rounds, grids = [best], [], [current]
    for n_round in range(1, cfg.max_rounds + 1):
        slots = candidate_slots(current, cfg.d)
        if not slots:
            break
        before = len(memo)
        base = current
        pos, val = _swarm(n_round, slots, cfg, lambda x: volume_of(decode(x, base, slots, cfg.d)))
        current = decode(pos, base, slots, cfg.d)
        previous, best = best, val
        history.append(best)
        grids.append(current)
        rounds.append(RoundLog(len(slots), best, current.thresholds, len(memo) - before))
        if progress is not None:
            progress(f"round {n_round}: {len(slots)} slots, volume {best:.6g}")
        if math.isclose(best, previous, rel_tol=0.0, abs_tol=UNCHANGED_TOL):
            break
    return RefinementResult(current, best, history, rounds, grids, dict(memo))
