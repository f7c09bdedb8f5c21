"""Command line front end: ``tlsynth synthesize|refine|simulate|check``.

Exit codes: 0 on success with a non-empty winning set, 1 on errors, 2 when
the winning set is empty (or, for ``check``, when the word is rejected).
"""

from __future__ import annotations

import sys
import zlib
from collections import Counter
from pathlib import Path

import click
import numpy as np

from . import bundle
from .abstraction import MODES, ControllerCache
from .formula import FormulaError, eval_finite, minimize, compile_formula
from .geometry import PartitionGrid
from .pipeline import synthesize_strategy
from .problem import ProblemError, ProblemSpec, load
from .refinement import refine
from .sim import SimConfig, SimulationError, check_word, simulate, sample_starts, write_csv

EXIT_OK, EXIT_ERROR, EXIT_EMPTY = 0, 1, 2


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named consumer of the problem seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))


def spec_automaton(spec: ProblemSpec):
    return minimize(compile_formula(spec.formula, len(spec.props), names=spec.names))


def read_thresholds(path) -> tuple[tuple[float, ...], ...]:
    """Threshold lists from a refinement log (lines ``thresholds xK v v v ...``)."""
    out = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if parts[:1] == ["thresholds"]:
            out.append(tuple(float(v) for v in parts[2:]))
    if not out:
        raise click.ClickException(f"no thresholds found in {path}")
    return tuple(out)


def _grid(spec: ProblemSpec, thresholds_file) -> PartitionGrid:
    grid = spec.grid()
    if thresholds_file:
        grid = grid.refined(read_thresholds(thresholds_file))
    return grid


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_synthesis(out: Path, res, mode: str, eps: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "strategy.txt").write_text(res.strategy.to_text())
    lines = [f"{q} {_fmt(res.initial_cost(q))}" for q in res.q0]
    (out / "q0.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    (out / "volume.txt").write_text(_fmt(res.volume) + "\n")
    bundle.save(out / "strategy.json", res, mode, eps)


@click.group()
def main():
    """Time-bounded temporal logic control synthesis for multi-affine systems."""


@main.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default=None, help="Override the problem's mode.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--thresholds", "thresholds_file", type=click.Path(exists=True, dir_okay=False),
              help="Refinement log whose thresholds define the grid.")
@click.option("--T", "T", type=float, default=None, help="Override the time budget.")
def synthesize(problem, mode, out_dir, thresholds_file, T):
    """Compute the strategy and winning set on the (optionally refined) grid."""
    try:
        spec = load(problem)
        mode = mode or spec.mode
        T = spec.T if T is None else T
        if not T > 0:
            raise click.BadParameter("T must be positive")
        grid = _grid(spec, thresholds_file)
        res = synthesize_strategy(spec.system, grid, spec_automaton(spec), T, spec.eps, mode,
                                  max_exit_size=spec.max_exit_size)
        _write_synthesis(Path(out_dir), res, mode, spec.eps)
    except (ProblemError, FormulaError, ArithmeticError, RuntimeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"mode {mode} cells {grid.n_cells} winning {len(res.q0)} volume {_fmt(res.volume)}")
    sys.exit(EXIT_OK if res.q0 else EXIT_EMPTY)


@main.command("refine")
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--seed", type=int, default=None, help="Override the problem's seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True)
def refine_cmd(problem, mode, seed, out_dir):
    """Add thresholds by swarm search to enlarge the winning set."""
    try:
        spec = load(problem)
        mode = mode or spec.mode
        cfg = spec.refinement_config(mode=mode, seed=seed)
        aut = spec_automaton(spec)
        cache = ControllerCache()
        result = refine(spec.system, spec.grid(), aut, cfg, cache=cache,
                        progress=lambda m: click.echo(m, err=True))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "refine.log").write_text(result.log_text())
        res = synthesize_strategy(spec.system, result.grid, aut, spec.T, spec.eps, mode, cache=cache,
                                  max_exit_size=spec.max_exit_size)
        _write_synthesis(out, res, mode, spec.eps)
    except (ProblemError, FormulaError, ArithmeticError, RuntimeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo("history " + " ".join(_fmt(v) for v in result.history))
    click.echo(f"mode {mode} cells {result.grid.n_cells} volume {_fmt(result.volume)}")
    sys.exit(EXIT_OK if res.q0 else EXIT_EMPTY)


@main.command("simulate")
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.argument("strategy_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--starts", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--step", type=float, default=None, help="Integration step (default from the problem).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True)
def simulate_cmd(problem, strategy_file, starts, seed, step, out_dir):
    """Simulate random starts from the exported winning set."""
    try:
        spec = load(problem)
        loaded = bundle.load(strategy_file)
        if not loaded.q0:
            click.echo("winning set is empty; nothing to simulate", err=True)
            sys.exit(EXIT_EMPTY)
        cfg = spec.sim if step is None else SimConfig(step=step, event_tol=min(spec.sim.event_tol, step / 10),
                                                      max_time=spec.sim.max_time)
        rng = substream(spec.seed if seed is None else seed, "simulate")
        x0s = sample_starts([loaded.grid.rect(q) for q in loaded.q0], starts, rng)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        counts: Counter = Counter()
        rows = []
        names = [f"x{i + 1}" for i in range(spec.system.n)]
        for k, x0 in enumerate(x0s):
            traj = simulate(spec.system, loaded.grid, loaded.strategy, loaded.controllers, x0, cfg,
                            strict=False)
            with open(out / f"traj_{k:04d}.csv", "w") as fh:
                write_csv(traj, fh, names)
            word_verdict = check_word(traj, spec.formula, loaded.strategy.T)
            counts[traj.verdict] += 1
            word = " ".join(spec.names[p] for p in traj.word)
            rows.append(f"{k} {traj.verdict} {word_verdict} {_fmt(traj.total_time)} "
                        + " ".join(_fmt(v) for v in x0) + f" | {word}")
        (out / "simulate.txt").write_text("\n".join(rows) + "\n")
    except (ProblemError, bundle.BundleError, SimulationError, RuntimeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    for verdict in ("accepted-in-time", "accepted-late", "violated-exit", "not-accepted"):
        click.echo(f"{verdict} {counts[verdict]}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.argument("word", nargs=-1, required=True)
def check(problem, word):
    """Evaluate the problem's formula on a finite word of proposition names."""
    try:
        spec = load(problem)
        index = {name: i for i, name in enumerate(spec.names)}
        letters = []
        for token in " ".join(word).split():
            if token not in index:
                raise click.BadParameter(f"unknown proposition {token!r}")
            letters.append(index[token])
        ok = eval_finite(letters, spec.formula)
    except (ProblemError, FormulaError, click.BadParameter) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo("satisfied" if ok else "not satisfied")
    sys.exit(EXIT_OK if ok else EXIT_EMPTY)


if __name__ == "__main__":
    main()
