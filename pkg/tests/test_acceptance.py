"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import time

import numpy as np
import pytest
from click.testing import CliRunner

from tlsynth import bundle
from tlsynth.abstraction import ControllerCache, build
from tlsynth.cli import main, spec_automaton, substream
from tlsynth.facet_control import synthesize, synthesize_relaxed, time_bound_single
from tlsynth.formula import (FALSE, TRUE, Atom, Eventually, NegAtom, Until, compile_formula, conj, depth, disj,
                             eval_finite, minimize)
from tlsynth.geometry import Facet, Rect
from tlsynth.pipeline import synthesize_strategy
from tlsynth.problem import case_study_path, load
from tlsynth.refinement import refine
from tlsynth.sim import NON_EXIT_BAND, SimConfig, run_cell, run_cells, sample_starts, simulate
from tlsynth.synthesis import dijkstra_costs, value_iteration

from acceptance_log import report
from oracles import brute_force_costs, slow_system_exit_time
from test_synthesis import random_product

E1, E2 = Facet(0, 1), Facet(1, 1)
STRIP = Rect((-1.5, -0.2), (-1.0, 0.2))
LOWER_LEFT = Rect((-2.0, -2.0), (-0.2, -0.2))


@pytest.fixture(scope="module")
def spec():
    return load(case_study_path())


def test_criterion_1_time_bound_matches_slow_system():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        s_near, s_far = rng.uniform(0.05, 5.0, 2)
        width = rng.uniform(0.05, 2.0)
        r = Rect((0.0, 0.0), (width, 1.0))
        bound = time_bound_single(r, E1, [s_far, s_near, s_far, s_near])
        ref = slow_system_exit_time(width, s_near, s_far)
        worst = max(worst, abs(bound - ref) / ref)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 5
    report(1, ok, f"closed-form bound vs integrated slow system, max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_bound_tightness(spec):
    start = time.perf_counter()
    cfg = SimConfig()
    tight = synthesize_relaxed(spec.system, STRIP, [E1], 0.0)
    corner = run_cell(spec.system, tight, [[-1.5, 0.2]], cfg, 10.0)
    rel = abs(corner.time[0] - tight.time_bound) / tight.time_bound
    robust = synthesize(spec.system, STRIP, [E1], 0.2)
    rng = np.random.default_rng(202)
    on_entry = np.column_stack([np.full(50, -1.5), rng.uniform(-0.2, 0.2, 50)])
    inside = rng.uniform(STRIP.lo, STRIP.hi, (150, 2))
    starts = np.vstack([[[-1.5, 0.2], [-1.5, -0.2]], on_entry, inside])
    runs = run_cell(spec.system, robust, starts, cfg, 10.0)
    elapsed = time.perf_counter() - start
    ok = (corner.facet[0] == E1 and rel <= 1e-3 and bool(np.all(runs.time < robust.time_bound))
          and all(f == E1 for f in runs.facet) and elapsed < 10)
    report(2, ok, f"eps=0 corner exit {corner.time[0]:.6f} vs bound {tight.time_bound:.6f} (rel {rel:.1e}); "
                  f"eps=0.2 max exit {runs.time.max():.4f} < {robust.time_bound:.4f}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_controller_soundness(spec):
    start = time.perf_counter()
    wts = build(spec.system, spec.grid(), spec.eps, "full")
    ctrls = list(wts.controllers.values())
    rng = np.random.default_rng(303)
    per = 200
    x0 = np.concatenate([rng.uniform(c.rect.lo, c.rect.hi, (per, 2)) for c in ctrls])
    batch = [c for c in ctrls for _ in range(per)]
    out = run_cells(spec.system, batch, x0, SimConfig(), horizon=20.0)
    bounds = np.repeat([c.time_bound for c in ctrls], per)
    in_time = bool(np.all(out.time <= bounds * (1 + 1e-3)))
    through_exit = all(f is not None and f in c.exit_set for f, c in zip(out.facet, batch))
    crossings = int(np.sum(out.violation > NON_EXIT_BAND))
    elapsed = time.perf_counter() - start
    ok = in_time and through_exit and crossings == 0 and elapsed < 120
    report(3, ok, f"{len(ctrls)} controllers x {per} starts, max exit/bound {np.max(out.time / bounds):.3f}, "
                  f"non-exit crossings {crossings}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_value_iteration_vs_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    vs_brute = vs_dijkstra = 0
    for _ in range(500):
        p = random_product(rng)
        vs_brute += value_iteration(p).J == brute_force_costs(p.n_states, p.trans, p.finals)
    for _ in range(500):
        p = random_product(rng, deterministic=True)
        vs_dijkstra += value_iteration(p).J == dijkstra_costs(p).J
    elapsed = time.perf_counter() - start
    ok = vs_brute == 500 and vs_dijkstra == 500 and elapsed < 60
    report(4, ok, f"exact agreement {vs_brute}/500 with strategy enumeration, {vs_dijkstra}/500 with "
                  f"reverse Dijkstra, {elapsed:.1f}s")
    assert ok


def random_formula(rng, n_props, max_depth):
    if max_depth == 0 or rng.random() < 0.25:
        kind = rng.integers(0, 10)
        if kind == 0:
            return TRUE if rng.random() < 0.5 else FALSE
        p = int(rng.integers(0, n_props))
        return NegAtom(p) if kind < 4 else Atom(p)
    kind = rng.integers(0, 4)
    sub = lambda: random_formula(rng, n_props, max_depth - 1)  # noqa: E731
    if kind == 0:
        return conj(sub(), sub())
    if kind == 1:
        return disj(sub(), sub())
    if kind == 2:
        return Until(sub(), sub())
    return Eventually(sub())


def mismatches(phi, n_letters, max_len=6):
    """Words up to ``max_len`` where the automaton and prefix-closed eval_finite disagree."""
    aut = minimize(compile_formula(phi, n_letters))
    bad = 0
    stack = [((), aut.initial, False)]
    while stack:
        word, state, prefix_ok = stack.pop()
        for a in range(n_letters):
            w = word + (a,)
            s = aut.step(state, a)
            ok = prefix_ok or eval_finite(w, phi)
            bad += (s in aut.accepting) != ok
            if len(w) < max_len:
                stack.append((w, s, ok))
    return bad


def test_criterion_5_automaton_matches_semantics(spec):
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    formulas = [random_formula(rng, 4, 4) for _ in range(50)]
    assert all(depth(f) <= 4 for f in formulas)
    case_bad = mismatches(spec.formula, len(spec.props))
    random_bad = sum(mismatches(f, 4) for f in formulas)
    elapsed = time.perf_counter() - start
    ok = case_bad == 0 and random_bad == 0 and elapsed < 120
    report(5, ok, f"case-study formula and 50 random formulas, all words up to length 6: "
                  f"{case_bad + random_bad} disagreements, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_6_case_study_refinement(spec):
    start = time.perf_counter()
    aut = spec_automaton(spec)
    cache = ControllerCache()
    runs = {mode: refine(spec.system, spec.grid(), aut, spec.refinement_config(mode=mode), cache=cache)
            for mode in ("deterministic", "full")}

    # every grid either run evaluated (adopted grids included), solved in both modes
    keys = sorted(set(runs["deterministic"].evaluated) | set(runs["full"].evaluated))
    initial = spec.grid()
    dominated = det_in_region = 0
    for key in keys:
        grid = initial.refined(key)
        det = synthesize_strategy(spec.system, grid, aut, spec.T, spec.eps, "deterministic", cache=cache)
        full = synthesize_strategy(spec.system, grid, aut, spec.T, spec.eps, "full", cache=cache)
        dominated += full.volume >= det.volume
        det_in_region += any(LOWER_LEFT.contains_rect(grid.rect(q)) for q in det.q0)
        for mode, res in (("deterministic", det), ("full", full)):
            if key in runs[mode].evaluated:
                assert runs[mode].evaluated[key] == res.volume

    def full_region_cells(grid):
        res = synthesize_strategy(spec.system, grid, aut, spec.T, spec.eps, "full", cache=cache)
        return [q for q in res.q0 if LOWER_LEFT.contains_rect(grid.rect(q))], res.q0

    region_initial, q0_initial = full_region_cells(initial)
    region_final, _ = full_region_cells(runs["full"].grid)
    det_initial = synthesize_strategy(spec.system, initial, aut, spec.T, spec.eps, "deterministic", cache=cache)
    hist = {m: r.history for m, r in runs.items()}
    monotone = all(all(a <= b for a, b in zip(h, h[1:])) for h in hist.values())
    v_det, v_full = runs["deterministic"].volume, runs["full"].volume
    elapsed = time.perf_counter() - start
    ok = (bool(det_initial.q0) and bool(q0_initial) and dominated == len(keys) and det_in_region == 0
          and bool(region_initial) and bool(region_final) and monotone
          and v_full >= 6.0 and v_det >= 4.0 and elapsed < 1800)
    report(6, ok, f"refined volumes full {v_full:.3f} (>= 6.0), deterministic {v_det:.3f} (>= 4.0); "
                  f"full >= det on {dominated}/{len(keys)} grids; lower-left cells won only in full mode "
                  f"({len(region_initial)} initially, {len(region_final)} refined); histories "
                  f"{'non-decreasing' if monotone else 'DECREASING'}, {elapsed:.0f}s")
    assert ok


def test_criterion_7_end_to_end(spec, tmp_path):
    start = time.perf_counter()
    res = CliRunner().invoke(main, ["synthesize", str(case_study_path()), "--mode", "full",
                                    "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    loaded = bundle.load(tmp_path / "strategy.json")
    starts = sample_starts([loaded.grid.rect(q) for q in loaded.q0], 100, substream(spec.seed, "acceptance-7"))
    good = 0
    worst_tau = 0.0
    for x0 in starts:
        traj = simulate(spec.system, loaded.grid, loaded.strategy, loaded.controllers, x0, spec.sim)
        segments_ok = all(seg.duration <= loaded.controllers[(seg.cell, seg.exit_set)].time_bound * (1 + 1e-3)
                          and seg.exit_facet in seg.exit_set for seg in traj.segments)
        worst_tau = max(worst_tau, traj.total_time)
        good += (traj.verdict == "accepted-in-time" and traj.total_time < spec.T and segments_ok
                 and eval_finite(traj.word, spec.formula))
    elapsed = time.perf_counter() - start
    ok = good == 100 and elapsed < 300
    report(7, ok, f"{good}/100 starts accepted in time with valid segments and satisfying words, "
                  f"max tau {worst_tau:.3f} < {spec.T}, {elapsed:.1f}s")
    assert ok


def test_criterion_8_split_properties(spec):
    start = time.perf_counter()
    whole = synthesize(spec.system, STRIP, [E1], spec.eps)
    t_whole = whole.time_bound
    along = across = 0
    cuts = np.linspace(-1.45, -1.05, 9)
    for cut in cuts:
        left = synthesize(spec.system, Rect((-1.5, -0.2), (cut, 0.2)), [E1], spec.eps)
        right = synthesize(spec.system, Rect((cut, -0.2), (-1.0, 0.2)), [E1], spec.eps)
        along += (left is not None and right is not None
                  and left.time_bound + right.time_bound <= t_whole * (1 + 1e-9))
    heights = np.linspace(-0.15, 0.15, 7)
    for cut in heights:
        low = synthesize(spec.system, Rect((-1.5, -0.2), (-1.0, cut)), [E1, E2], spec.eps)
        high = synthesize(spec.system, Rect((-1.5, cut), (-1.0, 0.2)), [E1, Facet(1, -1)], spec.eps)
        across += (low is not None and high is not None
                   and low.time_bound <= t_whole and high.time_bound <= t_whole)
    elapsed = time.perf_counter() - start
    ok = along == len(cuts) and across == len(heights) and elapsed < 5
    report(8, ok, f"split along the exit axis tightens the bound at {along}/{len(cuts)} cuts; "
                  f"orthogonal halves feasible within the bound at {across}/{len(heights)} cuts, {elapsed:.2f}s")
    assert ok
