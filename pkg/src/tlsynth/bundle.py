"""Versioned JSON export of a synthesized strategy and everything needed to simulate it."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .facet_control import Controller, exit_set_str, parse_exit_set
from .formula import SpecAutomaton
from .geometry import Facet, PartitionGrid
from .pipeline import SynthesisResult
from .synthesis import StrategyAutomaton

FORMAT = "tlsynth-strategy"
VERSION = 1


class BundleError(ValueError):
    pass


def to_dict(res: SynthesisResult, mode: str, eps: float) -> dict:
    strat = res.strategy
    aut = strat.aut
    used = {(q, es) for (_, q), (es, _) in strat.table.items()}
    controllers = []
    for q, es in sorted(used):
        c = res.wts.controllers[(q, es)]
        controllers.append({
            "cell": q,
            "exit_set": exit_set_str(es),
            "vertex_controls": c.vertex_controls.tolist(),
            "bound_facet": str(c.bound_facet),
            "time_bound": c.time_bound,
        })
    return {
        "format": FORMAT,
        "version": VERSION,
        "mode": mode,
        "eps": eps,
        "T": strat.T,
        "grid": {"thresholds": [list(t) for t in res.grid.thresholds], "labels": list(res.grid.labels)},
        "automaton": {
            "n_letters": aut.n_letters,
            "delta": [list(row) for row in aut.delta],
            "initial": aut.initial,
            "accepting": sorted(aut.accepting),
            "sink": aut.sink,
            "labels": list(aut.labels),
        },
        "strategy": [{"aut_state": s, "cell": q, "exit_set": exit_set_str(es), "J": j}
                     for (s, q), (es, j) in sorted(strat.table.items())],
        "q0": [{"cell": q, "J": res.initial_cost(q)} for q in res.q0],
        "volume": res.volume,
        "controllers": controllers,
    }


def save(path, res: SynthesisResult, mode: str, eps: float) -> None:
    Path(path).write_text(json.dumps(to_dict(res, mode, eps), indent=1) + "\n")


class LoadedStrategy:
    """Grid, strategy automaton and controller table rebuilt from a bundle."""

    def __init__(self, doc: dict):
        if doc.get("format") != FORMAT:
            raise BundleError("not a strategy bundle")
        if doc.get("version") != VERSION:
            raise BundleError(f"unsupported bundle version {doc.get('version')}")
        self.mode = doc["mode"]
        self.eps = float(doc["eps"])
        self.grid = PartitionGrid(tuple(tuple(t) for t in doc["grid"]["thresholds"]),
                                  tuple(doc["grid"]["labels"]))
        a = doc["automaton"]
        self.aut = SpecAutomaton(
            n_letters=a["n_letters"],
            delta=tuple(tuple(row) for row in a["delta"]),
            initial=a["initial"],
            accepting=frozenset(a["accepting"]),
            sink=a["sink"],
            labels=tuple(a.get("labels", ())),
        )
        table = {(e["aut_state"], e["cell"]): (parse_exit_set(e["exit_set"]), float(e["J"]))
                 for e in doc["strategy"]}
        self.strategy = StrategyAutomaton(self.aut, self.grid.labels, float(doc["T"]), table)
        self.q0 = [e["cell"] for e in doc["q0"]]
        self.q0_costs = {e["cell"]: float(e["J"]) for e in doc["q0"]}
        self.volume = float(doc["volume"])
        self.controllers = {}
        for c in doc["controllers"]:
            q, es = c["cell"], parse_exit_set(c["exit_set"])
            self.controllers[(q, es)] = Controller(
                rect=self.grid.rect(q), exit_set=es,
                vertex_controls=np.array(c["vertex_controls"], dtype=float),
                bound_facet=Facet.parse(c["bound_facet"]), time_bound=float(c["time_bound"]),
                per_facet_bounds={}, epsilon=self.eps)


def load(path) -> LoadedStrategy:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"malformed bundle: {exc}") from exc
    return LoadedStrategy(doc)
