"""Product automaton, min-max cost-to-accept and the feedback strategy."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable

from .abstraction import WTS
from .facet_control import ExitSet, exit_set_str
from .formula import SpecAutomaton
from .geometry import PartitionGrid, Rect

INF = math.inf


class AlphabetMismatch(ValueError):
    pass


class NondeterministicProduct(ValueError):
    pass


def default_input_key(sigma) -> tuple:
    """Tie-break order on inputs: fewer facets first, then lexicographic."""
    if isinstance(sigma, tuple):
        return (len(sigma), sigma)
    return (1, sigma)


@dataclass
class ProductAutomaton:
    """Nondeterministic weighted automaton with states ``0..n_states-1``.

    ``trans[s][sigma] = (successors, weight)``.  Built from a WTS and a
    specification automaton, state ``s`` stands for the pair ``pairs[s]`` =
    (cell, automaton state).
    """

    n_states: int
    trans: dict[int, dict[Hashable, tuple[tuple[int, ...], float]]]
    initials: frozenset[int]
    finals: frozenset[int]
    pairs: list[tuple[int, int]] | None = None
    input_key: Callable = default_input_key
    _preds: dict | None = field(default=None, repr=False)

    def inputs(self, s: int):
        return self.trans.get(s, {})

    @property
    def preds(self) -> dict[int, set[int]]:
        if self._preds is None:
            preds: dict[int, set[int]] = {}
            for s, row in self.trans.items():
                for succ, _ in row.values():
                    for t in succ:
                        preds.setdefault(t, set()).add(s)
            self._preds = preds
        return self._preds

    def is_deterministic(self) -> bool:
        return all(len(succ) == 1 for row in self.trans.values() for succ, _ in row.values())


def build_product(wts: WTS, aut: SpecAutomaton) -> ProductAutomaton:
    """Product of a WTS and a DFA; the DFA reads the observation of the source cell.

    Transitions into the DFA's rejecting sink are dropped since they can
    never reach acceptance.
    """
    grid = wts.grid
    labels = grid.labels
    if labels and max(labels) >= aut.n_letters:
        raise AlphabetMismatch(
            f"cell observation p{max(labels)} is outside the automaton alphabet of size {aut.n_letters}")
    n_aut = aut.n_states
    n_cells = grid.n_cells
    pairs = [(q, s) for q in range(n_cells) for s in range(n_aut)]
    trans: dict[int, dict] = {}
    for q, row in wts.transitions.items():
        obs = labels[q]
        for s in range(n_aut):
            if s in aut.accepting:
                continue
            s_next = aut.delta[s][obs]
            if s_next == aut.sink:
                continue
            out = {}
            for sigma, succ in row.items():
                out[sigma] = (tuple(q2 * n_aut + s_next for q2 in succ), wts.weights[(q, sigma)])
            trans[q * n_aut + s] = out
    return ProductAutomaton(
        n_states=n_cells * n_aut,
        trans=trans,
        initials=frozenset(q * n_aut + aut.initial for q in range(n_cells)),
        finals=frozenset(q * n_aut + f for q in range(n_cells) for f in aut.accepting),
        pairs=pairs,
    )


@dataclass
class CostMap:
    J: list[float]
    omega: dict[int, Hashable]
    relaxations: int = 0

    def finite(self) -> list[int]:
        return [s for s, j in enumerate(self.J) if j < INF]


def _best(p: ProductAutomaton, J: list[float], s: int):
    best_val, best_sigma, best_key = INF, None, None
    for sigma, (succ, w) in p.inputs(s).items():
        worst = max(J[t] for t in succ)
        if worst == INF:
            continue
        val = worst + w
        if val < best_val or (val == best_val and p.input_key(sigma) < best_key):
            best_val, best_sigma, best_key = val, sigma, p.input_key(sigma)
    return best_val, best_sigma


def value_iteration(p: ProductAutomaton, order: str = "heap") -> CostMap:
    """Least-cost worst-case reachability of the final states.

    J(f) = 0 on finals and J(s) = min_sigma [ w(s, sigma) + max_{s'} J(s') ]
    elsewhere.  States are relaxed from a worklist seeded with the
    predecessors of the finals; ``order`` is ``"heap"`` (smallest tentative
    cost first) or ``"fifo"``.  The fixed point does not depend on the order.
    """
    J = [INF] * p.n_states
    for f in p.finals:
        J[f] = 0.0
    preds = p.preds
    seeds = sorted({s for f in p.finals for s in preds.get(f, ())} - p.finals)
    relax = 0

    if order == "heap":
        heap = []
        for s in seeds:
            val, _ = _best(p, J, s)
            heapq.heappush(heap, (val, s))
        while heap:
            _, s = heapq.heappop(heap)
            val, _ = _best(p, J, s)
            relax += 1
            if val < J[s]:
                J[s] = val
                for t in sorted(preds.get(s, ())):
                    if t in p.finals:
                        continue
                    cand, _ = _best(p, J, t)
                    if cand < J[t]:
                        heapq.heappush(heap, (cand, t))
    elif order == "fifo":
        queue = deque(seeds)
        queued = set(seeds)
        while queue:
            s = queue.popleft()
            queued.discard(s)
            val, _ = _best(p, J, s)
            relax += 1
            if val < J[s]:
                J[s] = val
                for t in sorted(preds.get(s, ())):
                    if t not in p.finals and t not in queued:
                        queue.append(t)
                        queued.add(t)
    else:
        raise ValueError(f"unknown order {order!r}")

    omega = {}
    for s in range(p.n_states):
        if s in p.finals or J[s] == INF:
            continue
        _, sigma = _best(p, J, s)
        omega[s] = sigma
    return CostMap(J, omega, relax)


def dijkstra_costs(p: ProductAutomaton) -> CostMap:
    """Shortest path to the finals; only valid for deterministic products."""
    if not p.is_deterministic():
        raise NondeterministicProduct("shortest paths need a deterministic product")
    # reverse edges: target -> [(source, sigma, w)]
    rev: dict[int, list] = {}
    for s, row in p.trans.items():
        if s in p.finals:
            continue
        for sigma, (succ, w) in row.items():
            rev.setdefault(succ[0], []).append((s, sigma, w))
    J = [INF] * p.n_states
    heap = []
    for f in p.finals:
        J[f] = 0.0
        heap.append((0.0, f))
    heapq.heapify(heap)
    done = set()
    while heap:
        d, t = heapq.heappop(heap)
        if t in done:
            continue
        done.add(t)
        for s, sigma, w in rev.get(t, ()):
            nd = d + w
            if nd < J[s]:
                J[s] = nd
                heapq.heappush(heap, (nd, s))
    omega = {}
    for s in range(p.n_states):
        if s in p.finals or J[s] == INF:
            continue
        omega[s] = _best(p, J, s)[1]
    return CostMap(J, omega)


def winning_set(cm: CostMap, p: ProductAutomaton, T: float) -> set[int]:
    """Initial states whose worst-case cost to acceptance is strictly below T."""
    if T <= 0:
        raise ValueError("T must be positive")
    return {s for s in p.initials if cm.J[s] < T}


@dataclass
class StrategyAutomaton:
    """Finite-memory feedback: reads the current cell, outputs the exit set to enforce."""

    aut: SpecAutomaton
    observations: tuple[int, ...]
    T: float
    table: dict[tuple[int, int], tuple[ExitSet, float]]  # (aut state, cell) -> (exit set, J)

    @property
    def initial(self) -> int:
        return self.aut.initial

    @property
    def finals(self) -> frozenset[int]:
        return self.aut.accepting

    def delta(self, s: int, q: int) -> int:
        return self.aut.delta[s][self.observations[q]]

    def output(self, s: int, q: int) -> ExitSet | None:
        entry = self.table.get((s, q))
        return None if entry is None else entry[0]

    def cost(self, s: int, q: int) -> float:
        entry = self.table.get((s, q))
        return INF if entry is None else entry[1]

    def to_text(self) -> str:
        lines = [f"{s} {q} {exit_set_str(es)} {j!r}"
                 for (s, q), (es, j) in sorted(self.table.items())]
        return "\n".join(lines) + ("\n" if lines else "")


def strategy_automaton(cm: CostMap, wts: WTS, aut: SpecAutomaton, T: float,
                       p: ProductAutomaton) -> tuple[StrategyAutomaton, list[int]]:
    n_aut = aut.n_states
    table = {}
    for state, sigma in cm.omega.items():
        if cm.J[state] < T:
            q, s = divmod(state, n_aut)
            table[(s, q)] = (sigma, cm.J[state])
    q0 = sorted(divmod(s, n_aut)[0] for s in winning_set(cm, p, T))
    return StrategyAutomaton(aut, wts.grid.labels, T, table), q0


def initial_region(q0: Iterable[int], grid: PartitionGrid) -> tuple[list[Rect], float]:
    rects = [grid.rect(q) for q in q0]
    return rects, float(sum(r.volume for r in rects))
