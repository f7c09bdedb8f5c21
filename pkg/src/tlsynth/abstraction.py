"""Weighted transition system over the cells of a grid partition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .facet_control import Controller, ExitSet, exit_set_str, synthesize_many
from .geometry import ControlSystem, PartitionGrid, all_facets

MODES = ("deterministic", "full")


class InvalidRun(ValueError):
    pass


class SynthesisFailure(RuntimeError):
    pass


def candidate_exit_sets(n: int, mode: str, max_size: int | None = None) -> list[ExitSet]:
    """Singletons in deterministic mode, every non-empty facet subset in full mode."""
    facets = all_facets(n)
    if mode == "deterministic":
        return [(f,) for f in facets]
    if mode != "full":
        raise ValueError(f"unknown mode {mode!r}")
    top = len(facets) if max_size is None else min(max_size, len(facets))
    return [tuple(c) for k in range(1, top + 1) for c in itertools.combinations(facets, k)]


class ControllerCache:
    """Synthesized controllers keyed by (cell box, exit set, eps).

    Grids produced by refinement share most cell boxes with their parent,
    so keeping this across builds avoids re-solving untouched cells.
    """

    def __init__(self):
        self._store: dict = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def get_many(self, sys: ControlSystem, rect, exit_sets: Sequence[ExitSet],
                 eps: float) -> dict[ExitSet, Controller | None]:
        base = (rect.a, rect.b, eps)
        out, missing = {}, []
        for es in exit_sets:
            key = base + (es,)
            if key in self._store:
                out[es] = self._store[key]
                self.hits += 1
            else:
                missing.append(es)
        if missing:
            self.misses += len(missing)
            fresh = synthesize_many(sys, rect, missing, eps)
            for es, ctrl in fresh.items():
                self._store[base + (es,)] = ctrl
            out.update(fresh)
        return out


@dataclass
class WTS:
    grid: PartitionGrid
    mode: str
    eps: float
    transitions: dict[int, dict[ExitSet, tuple[int, ...]]] = field(default_factory=dict)
    weights: dict[tuple[int, ExitSet], float] = field(default_factory=dict)
    controllers: dict[tuple[int, ExitSet], Controller] = field(default_factory=dict)

    @property
    def states(self) -> range:
        return self.grid.cells()

    def obs(self, q: int) -> int:
        return self.grid.label(q)

    def inputs(self, q: int) -> list[ExitSet]:
        return list(self.transitions.get(q, {}))

    def successors(self, q: int, sigma: ExitSet) -> tuple[int, ...]:
        return self.transitions.get(q, {}).get(sigma, ())

    def weight(self, q: int, sigma: ExitSet) -> float:
        return self.weights[(q, sigma)]

    @property
    def n_transitions(self) -> int:
        return len(self.weights)

    def to_text(self) -> str:
        lines = []
        for q in sorted(self.transitions):
            for sigma, succ in self.transitions[q].items():
                targets = ",".join(str(s) for s in succ)
                lines.append(f"{q} {exit_set_str(sigma)} -> {{{targets}}} {self.weights[(q, sigma)]!r}")
        return "\n".join(lines) + ("\n" if lines else "")


def build(sys: ControlSystem, grid: PartitionGrid, eps: float, mode: str = "full",
          cache: ControllerCache | None = None, max_exit_size: int | None = None) -> WTS:
    """Solve a facet reachability problem for every cell and candidate exit set.

    Exit sets touching the boundary of X are never admitted, so the closed
    loop cannot leave the state space.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    cache = cache if cache is not None else ControllerCache()
    candidates = candidate_exit_sets(grid.dim, mode, max_exit_size)
    wts = WTS(grid=grid, mode=mode, eps=eps)
    for q in grid.cells():
        interior = [es for es in candidates
                    if all(grid.neighbor(q, f) is not None for f in es)]
        if not interior:
            continue
        rect = grid.rect(q)
        try:
            ctrls = cache.get_many(sys, rect, interior, eps)
        except Exception as exc:
            raise SynthesisFailure(f"synthesis failed on cell {q} {rect}: {exc}") from exc
        row = {}
        for es in interior:
            ctrl = ctrls[es]
            if ctrl is None:
                continue
            row[es] = tuple(grid.neighbor(q, f) for f in es)
            wts.weights[(q, es)] = ctrl.time_bound
            wts.controllers[(q, es)] = ctrl
        if row:
            wts.transitions[q] = row
    return wts


def trajectory_cost(wts: WTS, states: Sequence[int], inputs: Sequence[ExitSet]) -> float:
    """Sum of weights along q0 --s1--> q1 --s2--> ... ; the run must respect the transitions."""
    if len(states) != len(inputs) + 1:
        raise InvalidRun("a run needs one more state than inputs")
    total = 0.0
    for q, sigma, q_next in zip(states, inputs, states[1:]):
        if q_next not in wts.successors(q, sigma):
            raise InvalidRun(f"{q_next} is not a successor of {q} under {exit_set_str(sigma)}")
        total += wts.weight(q, sigma)
    return total
