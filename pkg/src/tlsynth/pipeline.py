"""Grid -> abstraction -> product -> costs -> strategy, in one call."""

from __future__ import annotations

from dataclasses import dataclass

from .abstraction import WTS, ControllerCache, build
from .formula import SpecAutomaton
from .geometry import ControlSystem, PartitionGrid
from .synthesis import (CostMap, ProductAutomaton, StrategyAutomaton, build_product,
                        initial_region, strategy_automaton, value_iteration)


@dataclass
class SynthesisResult:
    grid: PartitionGrid
    wts: WTS
    product: ProductAutomaton
    costs: CostMap
    strategy: StrategyAutomaton
    q0: list[int]
    volume: float

    def initial_cost(self, q: int) -> float:
        return self.strategy.cost(self.strategy.initial, q)


def synthesize_strategy(sys: ControlSystem, grid: PartitionGrid, aut: SpecAutomaton, T: float,
                        eps: float, mode: str = "full", cache: ControllerCache | None = None,
                        max_exit_size: int | None = None) -> SynthesisResult:
    wts = build(sys, grid, eps, mode, cache=cache, max_exit_size=max_exit_size)
    product = build_product(wts, aut)
    costs = value_iteration(product)
    strategy, q0 = strategy_automaton(costs, wts, aut, T, product)
    _, volume = initial_region(q0, grid)
    return SynthesisResult(grid, wts, product, costs, strategy, q0, volume)
