"""Independent reference implementations used only by the tests.

Each oracle takes a different route from the production code: brute-force
strategy enumeration for the reachability game, scipy for LPs and ODEs, and
a backward table for the finite-trace semantics.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import linprog

from tlsynth.formula import And, Atom, Eventually, FalseF, NegAtom, Or, TrueF, Until


# --------------------------------------------------------------------------
# Finite-trace semantics by a backward table over positions


def _subformulas(f, out):
    if isinstance(f, (And, Or)):
        for c in f.children:
            _subformulas(c, out)
    elif isinstance(f, Until):
        _subformulas(f.left, out)
        _subformulas(f.right, out)
    elif isinstance(f, Eventually):
        _subformulas(f.child, out)
    if f not in out:
        out.append(f)  # children first
    return out


def table_eval(word, phi) -> bool:
    """Fill sat[f][i] for every subformula, last position first."""
    n = len(word)
    subs = _subformulas(phi, [])
    sat = {f: [False] * (n + 1) for f in subs}  # position n is past the end: nothing holds
    for i in range(n - 1, -1, -1):
        for f in subs:
            if isinstance(f, TrueF):
                v = True
            elif isinstance(f, FalseF):
                v = False
            elif isinstance(f, Atom):
                v = word[i] == f.prop
            elif isinstance(f, NegAtom):
                v = word[i] != f.prop
            elif isinstance(f, And):
                v = all(sat[c][i] for c in f.children)
            elif isinstance(f, Or):
                v = any(sat[c][i] for c in f.children)
            elif isinstance(f, Eventually):
                v = sat[f.child][i] or sat[f][i + 1]
            else:
                v = sat[f.right][i] or (sat[f.left][i] and sat[f][i + 1])
            sat[f][i] = v
    return sat[phi][0]


def table_prefix_accepts(word, phi) -> bool:
    return any(table_eval(word[:k], phi) for k in range(1, len(word) + 1))


# --------------------------------------------------------------------------
# Min-max reachability by enumerating positional strategies


def brute_force_costs(n_states, trans, finals) -> list[float]:
    """Pointwise minimum over all positional strategies of the worst-case cost.

    ``trans[s]`` maps inputs to ``(successors, weight)``.  For a fixed
    strategy the worst case is computed by Kleene iteration from infinity,
    which converges after ``n_states + 1`` rounds (longer plays contain a
    cycle and so never accept against an adversary).  All strategies are
    iterated at once, one row each.
    """
    finals = set(finals)
    options = [[] if s in finals else list(trans.get(s, {}).values()) for s in range(n_states)]
    picks = np.array(list(itertools.product(*(range(max(len(o), 1)) for o in options))), dtype=int)
    V = np.full((len(picks), n_states), math.inf)
    V[:, sorted(finals)] = 0.0
    for _ in range(n_states + 1):
        W = V.copy()
        for s, opts in enumerate(options):
            if not opts:
                continue
            vals = np.stack([w + V[:, list(succ)].max(axis=1) for succ, w in opts], axis=1)
            W[:, s] = vals[np.arange(len(picks)), picks[:, s]]
        V = W
    return V.min(axis=0).tolist()


# --------------------------------------------------------------------------
# Continuous oracles


def slow_system_exit_time(width: float, s_near: float, s_far: float) -> float:
    """Integrate p' = s_far + (s_near - s_far) p / width from 0 until p = width."""
    def rhs(_, p):
        return [s_far + (s_near - s_far) * p[0] / width]

    def hit(_, p):
        return p[0] - width
    hit.terminal = True
    hit.direction = 1
    horizon = 10 * width / min(s_near, s_far)
    sol = solve_ivp(rhs, (0.0, horizon), [0.0], events=hit, rtol=1e-12, atol=1e-14, method="DOP853")
    return float(sol.t_events[0][0])


def closed_loop_exit_time(field, x0, exit_dist, horizon: float) -> float:
    """First time ``exit_dist(x)`` reaches zero along x' = field(x), by scipy."""
    def event(_, x):
        return exit_dist(x)
    event.terminal = True
    event.direction = 1
    sol = solve_ivp(lambda _, x: field(x), (0.0, horizon), np.asarray(x0, dtype=float), events=event,
                    rtol=1e-11, atol=1e-13, method="DOP853")
    return float(sol.t_events[0][0]) if len(sol.t_events[0]) else math.inf


def scipy_lp(lp):
    """Solve a tlsynth LinearProgram with HiGHS; returns (status, value)."""
    bounds = [(None if not np.isfinite(a) else a, None if not np.isfinite(b) else b)
              for a, b in zip(lp.lo, lp.hi)]
    res = linprog(-lp.objective, A_ub=lp.A if lp.A.size else None, b_ub=lp.b if lp.b.size else None,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return "infeasible", None
    if res.status == 3:
        return "unbounded", None
    return "optimal", -res.fun
